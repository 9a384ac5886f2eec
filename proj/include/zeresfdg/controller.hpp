#pragma once

#include <vector>

#include "zeresfdg/guidance_config.hpp"
#include "zeresfdg/tensor.hpp"

namespace zeresfdg {

// Spectral mode controller: an EMA of the high-frequency energy ratio drives a
// hysteresis switch between the two guidance branches.
struct ControllerState {
    double rho = 0.0;
    GuidanceMode mode = GuidanceMode::CFGZeroFD;
    bool initialized = false;  // first observation seeds rho directly
    int64_t step_index = 0;
};

// ||high||^2 / (||low||^2 + ||high||^2) per sample, 0 when both energies are 0.
std::vector<double> hf_ratio_per_sample(const Tensor4& low, const Tensor4& high);

// Batch mean of the per-sample ratios.
double hf_ratio(const Tensor4& low, const Tensor4& high);

// Threshold map alone: rho >= tau_hi selects RescaleFDG, rho <= tau_lo selects
// CFGZeroFD, anywhere inside the open band keeps the current mode.
// invert_mode_map swaps the two target modes.
GuidanceMode apply_hysteresis(double rho, GuidanceMode current, const GuidanceConfig& cfg);

// EMA update followed by the hysteresis map. r_hf must lie in [0, 1].
ControllerState controller_update(const ControllerState& state, double r_hf,
                                  const GuidanceConfig& cfg);

}  // namespace zeresfdg
