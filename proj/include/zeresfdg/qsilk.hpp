#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "zeresfdg/tensor.hpp"

namespace zeresfdg {

struct QSilkConfig {
    double q_lo = 0.001;             // lower clamp quantile
    double q_hi = 0.999;             // upper clamp quantile
    double alpha_max = 0.08;         // peak injection strength at the final step
    double tail_fraction = 0.2;      // trailing fraction of steps where injection ramps in
    double sigma_detail = 1.0;       // blur sigma defining the injected high-pass
    double edge_gate_strength = 1.0; // 0 disables the edge gate, 1 is the full inverse gate
    bool depth_gate_enabled = true;  // honor a supplied depth map
    bool smooth_ramp = true;         // smoothstep ramp; false selects the linear ramp

    void validate() const;
};

// Optional per-sample nearness map, shape (n, 1, h, w). Larger values receive
// more detail after per-sample min-max normalization.
struct DepthMap {
    Tensor4 values;
};

// Min-max normalized copy in [0, 1] per sample; a constant sample maps to all
// ones (no gating preference).
Tensor4 normalize_depth(const DepthMap& depth);

struct ClampStats {
    std::vector<double> clipped_fraction;   // altered elements / sample size
    std::vector<int64_t> nonfinite_count;   // Inf/NaN replaced, per sample

    double mean_clipped_fraction() const;
};

// Clamp each sample into its own interpolated (q_lo, q_hi) quantile bounds.
// Quantiles are computed over finite elements only; +Inf clips to the upper
// bound, -Inf and NaN to the lower. A sample with no finite elements clamps
// to all zeros.
std::pair<Tensor4, ClampStats> quantile_clamp(const Tensor4& x, const QSilkConfig& cfg);

// Injection strength for a step: 0 before the trailing tail_fraction of the
// schedule, ramping to alpha_max at the final step. u runs 0 -> 1 across the
// tail boundary, shaped by smoothstep (3u^2 - 2u^3) or linearly.
double alpha_ramp(int64_t step_index, int64_t total_steps, const QSilkConfig& cfg);

// x + alpha_t * g_edge * g_depth * (x - blur(x, sigma_detail)).
// g_edge = 1 - edge_gate_strength * norm01(sobel_magnitude(x)) keeps detail out
// of strong edges; a flat sample gates to 1. g_depth is the normalized depth
// (ones when absent or disabled). alpha_t = 0 returns x unchanged.
Tensor4 micro_detail_inject(const Tensor4& x, const DepthMap* depth, double alpha_t,
                            const QSilkConfig& cfg);

}  // namespace zeresfdg
