#include "zeresfdg/controller.hpp"

#include <cmath>
#include <stdexcept>

#include "zeresfdg/errors.hpp"

namespace zeresfdg {

const char* mode_name(GuidanceMode m) {
    return m == GuidanceMode::CFGZeroFD ? "CFGZeroFD" : "RescaleFDG";
}

GuidanceMode mode_from_name(const std::string& name) {
    if (name == "CFGZeroFD") {
        return GuidanceMode::CFGZeroFD;
    }
    if (name == "RescaleFDG") {
        return GuidanceMode::RescaleFDG;
    }
    throw ConfigError("unknown guidance mode \"" + name + "\"");
}

void GuidanceConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("guidance config: " + msg); };
    if (!(scale > 0.0)) {
        fail("s must be > 0, got " + std::to_string(scale));
    }
    if (!(alpha_rescale >= 0.0 && alpha_rescale <= 1.0)) {
        fail("alpha_rescale must lie in [0, 1], got " + std::to_string(alpha_rescale));
    }
    if (!(lambda_low >= 0.0 && lambda_low <= 1.0)) {
        fail("lambda_low must lie in [0, 1], got " + std::to_string(lambda_low));
    }
    if (!(lambda_high >= 1.0)) {
        fail("lambda_high must be >= 1, got " + std::to_string(lambda_high));
    }
    if (!(sigma_split > 0.0)) {
        fail("sigma_split must be > 0, got " + std::to_string(sigma_split));
    }
    if (!(beta_ema > 0.0 && beta_ema < 1.0)) {
        fail("beta_ema must lie in (0, 1), got " + std::to_string(beta_ema));
    }
    if (!(tau_lo > 0.0 && tau_hi < 1.0 && tau_lo < tau_hi)) {
        fail("thresholds must satisfy 0 < tau_lo < tau_hi < 1, got tau_lo=" +
             std::to_string(tau_lo) + " tau_hi=" + std::to_string(tau_hi));
    }
}

std::vector<double> hf_ratio_per_sample(const Tensor4& low, const Tensor4& high) {
    const auto e_low = dot_per_sample(low, low);
    const auto e_high = dot_per_sample(high, high);
    std::vector<double> out(e_low.size());
    for (size_t s = 0; s < out.size(); s++) {
        const double total = e_low[s] + e_high[s];
        out[s] = total > 0.0 ? e_high[s] / total : 0.0;
    }
    return out;
}

double hf_ratio(const Tensor4& low, const Tensor4& high) {
    const auto per_sample = hf_ratio_per_sample(low, high);
    double acc = 0.0;
    for (double r : per_sample) {
        acc += r;
    }
    return acc / static_cast<double>(per_sample.size());
}

GuidanceMode apply_hysteresis(double rho, GuidanceMode current, const GuidanceConfig& cfg) {
    GuidanceMode above = GuidanceMode::RescaleFDG;
    GuidanceMode below = GuidanceMode::CFGZeroFD;
    if (cfg.invert_mode_map) {
        std::swap(above, below);
    }
    if (rho >= cfg.tau_hi) {
        return above;
    }
    if (rho <= cfg.tau_lo) {
        return below;
    }
    return current;
}

ControllerState controller_update(const ControllerState& state, double r_hf,
                                  const GuidanceConfig& cfg) {
    if (!(r_hf >= 0.0 && r_hf <= 1.0)) {
        throw NumericError("controller r_hf must lie in [0, 1], got " + std::to_string(r_hf));
    }
    ControllerState next = state;
    if (!next.initialized) {
        next.rho = r_hf;
        next.initialized = true;
    } else {
        next.rho = cfg.beta_ema * next.rho + (1.0 - cfg.beta_ema) * r_hf;
    }
    next.mode = apply_hysteresis(next.rho, state.mode, cfg);
    next.step_index = state.step_index + 1;
    return next;
}

}  // namespace zeresfdg
