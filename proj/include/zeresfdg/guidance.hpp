#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "zeresfdg/controller.hpp"
#include "zeresfdg/guidance_config.hpp"
#include "zeresfdg/tensor.hpp"

namespace zeresfdg {

struct FdgBands {
    Tensor4 tilde;  // lambda_low * low + lambda_high * high
    Tensor4 low;    // gaussian_blur(delta, sigma_split)
    Tensor4 high;   // delta - low, the defining subtraction
};

// Split delta into bands and reweight them. Rejects non-finite input so a bad
// prediction fails loudly here instead of propagating.
FdgBands fdg_reweight(const Tensor4& delta, const GuidanceConfig& cfg);

// Per-sample gain matching the output std to target_std, blended with the raw
// input by alpha. std(y_cfg) is clamped below by 1e-8 before dividing. With
// alpha = 0 the input is returned untouched. recenter scales deviations about
// the per-sample mean instead of about zero.
Tensor4 rescale_to_std(const Tensor4& y_cfg, const std::vector<double>& target_std,
                       double alpha, bool recenter = false);

struct ZeroProjection {
    Tensor4 residual;                // y_c - alpha_parallel * y_u, per sample
    std::vector<double> alpha_parallel;
    int64_t guard_hits = 0;          // samples where ||y_u||^2 <= 1e-12 forced alpha to 0
};

// Remove the component of y_c parallel to y_u, per sample.
ZeroProjection zero_project(const Tensor4& y_c, const Tensor4& y_u);

// Multiply by a spatial gate in [0, 1], (n,1,h,w) broadcast over channels or
// full (n,c,h,w).
Tensor4 apply_mask(const Tensor4& delta_tilde, const Tensor4& gate);

struct GuidedOutput {
    Tensor4 y;
    GuidanceMode mode_used = GuidanceMode::CFGZeroFD;
    std::vector<double> r_hf;            // per-sample high-frequency ratio
    std::vector<double> energy_low;      // ||low||^2 per sample
    std::vector<double> energy_high;     // ||high||^2 per sample
    std::vector<double> alpha_parallel;  // projection coefficient per sample
    std::vector<double> std_yc;          // std(y_c) per sample
    std::vector<double> std_ycfg;        // std of the pre-rescale guided tensor
                                         // (CFGZeroFD has no such tensor; std of y there)
    int64_t alpha_guard_hits = 0;
};

// One guided denoiser step. Updates the controller from this step's band
// energies first, then takes the branch the post-update state selects:
//   CFGZeroFD:  y = alpha_parallel * y_u + s * reweight(zero_project(y_c, y_u))
//   RescaleFDG: y = rescale(y_u + s * reweight(y_c - y_u), std(y_c))
// The gate, when present, multiplies the reweighted delta in either branch.
std::pair<GuidedOutput, ControllerState> zeresfdg_step(const Tensor4& y_c, const Tensor4& y_u,
                                                       const GuidanceConfig& cfg,
                                                       const ControllerState& state,
                                                       const Tensor4* gate = nullptr);

}  // namespace zeresfdg
