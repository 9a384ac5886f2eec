#include "zeresfdg/guidance.hpp"

#include <cmath>
#include <stdexcept>

#include "zeresfdg/errors.hpp"

namespace zeresfdg {

FdgBands fdg_reweight(const Tensor4& delta, const GuidanceConfig& cfg) {
    cfg.validate();
    for (int64_t i = 0; i < delta.size(); i++) {
        if (!std::isfinite(delta.data[i])) {
            throw NumericError("fdg_reweight: non-finite delta at flat index " + std::to_string(i));
        }
    }
    FdgBands bands;
    bands.low = gaussian_blur(delta, GaussianKernel::make(cfg.sigma_split));
    bands.high = Tensor4(delta.shape);
    bands.tilde = Tensor4(delta.shape);
    for (int64_t i = 0; i < delta.size(); i++) {
        const float low = bands.low.data[i];
        const float high = delta.data[i] - low;
        bands.high.data[i] = high;
        bands.tilde.data[i] = static_cast<float>(cfg.lambda_low * low + cfg.lambda_high * high);
    }
    return bands;
}

Tensor4 rescale_to_std(const Tensor4& y_cfg, const std::vector<double>& target_std,
                       double alpha, bool recenter) {
    if (static_cast<int64_t>(target_std.size()) != y_cfg.shape.n) {
        throw std::invalid_argument("rescale_to_std: " + std::to_string(target_std.size()) +
                                    " target values for batch of " + std::to_string(y_cfg.shape.n));
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("rescale_to_std: alpha must lie in [0, 1], got " +
                                    std::to_string(alpha));
    }
    if (alpha == 0.0) {
        return y_cfg;
    }
    Tensor4 out(y_cfg.shape);
    const auto own_std = std_per_sample(y_cfg);
    const int64_t m = y_cfg.shape.per_sample();
    for (int64_t b = 0; b < y_cfg.shape.n; b++) {
        const double gain = target_std[static_cast<size_t>(b)] /
                            std::max(own_std[static_cast<size_t>(b)], 1e-8);
        double center = 0.0;
        if (recenter) {
            const float* p = y_cfg.data.data() + b * m;
            for (int64_t i = 0; i < m; i++) {
                center += p[i];
            }
            center /= static_cast<double>(m);
        }
        const float* src = y_cfg.data.data() + b * m;
        float* dst = out.data.data() + b * m;
        for (int64_t i = 0; i < m; i++) {
            const double scaled = (src[i] - center) * gain + center;
            dst[i] = static_cast<float>(alpha * scaled + (1.0 - alpha) * src[i]);
        }
    }
    return out;
}

ZeroProjection zero_project(const Tensor4& y_c, const Tensor4& y_u) {
    if (!(y_c.shape == y_u.shape)) {
        throw std::invalid_argument("zero_project: shape mismatch " + y_c.shape.str() + " vs " +
                                    y_u.shape.str());
    }
    ZeroProjection zp;
    zp.residual = Tensor4(y_c.shape);
    zp.alpha_parallel.resize(static_cast<size_t>(y_c.shape.n));
    const auto cu = dot_per_sample(y_c, y_u);
    const auto uu = dot_per_sample(y_u, y_u);
    const int64_t m = y_c.shape.per_sample();
    for (int64_t b = 0; b < y_c.shape.n; b++) {
        double alpha = 0.0;
        if (uu[static_cast<size_t>(b)] > 1e-12) {
            alpha = cu[static_cast<size_t>(b)] / uu[static_cast<size_t>(b)];
        } else {
            zp.guard_hits++;
        }
        zp.alpha_parallel[static_cast<size_t>(b)] = alpha;
        const float* pc = y_c.data.data() + b * m;
        const float* pu = y_u.data.data() + b * m;
        float* pr = zp.residual.data.data() + b * m;
        for (int64_t i = 0; i < m; i++) {
            pr[i] = static_cast<float>(pc[i] - alpha * pu[i]);
        }
    }
    return zp;
}

Tensor4 apply_mask(const Tensor4& delta_tilde, const Tensor4& gate) {
    const Shape4& ds = delta_tilde.shape;
    const Shape4& gs = gate.shape;
    const bool broadcast = gs.c == 1;
    if (gs.n != ds.n || gs.h != ds.h || gs.w != ds.w || (!broadcast && gs.c != ds.c)) {
        throw std::invalid_argument("apply_mask: gate shape " + gs.str() +
                                    " does not fit tensor shape " + ds.str());
    }
    for (int64_t i = 0; i < gate.size(); i++) {
        const float g = gate.data[i];
        if (!(g >= 0.0f && g <= 1.0f)) {
            throw std::invalid_argument("apply_mask: gate value " + std::to_string(g) +
                                        " at flat index " + std::to_string(i) +
                                        " lies outside [0, 1]");
        }
    }
    Tensor4 out(ds);
    const int64_t hw = ds.h * ds.w;
    for (int64_t b = 0; b < ds.n; b++) {
        for (int64_t ch = 0; ch < ds.c; ch++) {
            const float* src = delta_tilde.data.data() + (b * ds.c + ch) * hw;
            const float* g = gate.data.data() + (b * gs.c + (broadcast ? 0 : ch)) * hw;
            float* dst = out.data.data() + (b * ds.c + ch) * hw;
            for (int64_t i = 0; i < hw; i++) {
                dst[i] = src[i] * g[i];
            }
        }
    }
    return out;
}

std::pair<GuidedOutput, ControllerState> zeresfdg_step(const Tensor4& y_c, const Tensor4& y_u,
                                                       const GuidanceConfig& cfg,
                                                       const ControllerState& state,
                                                       const Tensor4* gate) {
    cfg.validate();
    if (!(y_c.shape == y_u.shape)) {
        throw std::invalid_argument("zeresfdg_step: shape mismatch " + y_c.shape.str() + " vs " +
                                    y_u.shape.str());
    }

    GuidedOutput out;
    const Tensor4 delta = add_scaled(y_c, y_u, -1.0f);
    const FdgBands bands = fdg_reweight(delta, cfg);

    out.energy_low = dot_per_sample(bands.low, bands.low);
    out.energy_high = dot_per_sample(bands.high, bands.high);
    out.r_hf.resize(out.energy_low.size());
    double r_mean = 0.0;
    for (size_t b = 0; b < out.r_hf.size(); b++) {
        const double total = out.energy_low[b] + out.energy_high[b];
        out.r_hf[b] = total > 0.0 ? out.energy_high[b] / total : 0.0;
        r_mean += out.r_hf[b];
    }
    r_mean /= static_cast<double>(out.r_hf.size());

    const ControllerState next_state = controller_update(state, r_mean, cfg);
    out.mode_used = next_state.mode;
    out.std_yc = std_per_sample(y_c);

    const int64_t m = y_c.shape.per_sample();
    if (next_state.mode == GuidanceMode::CFGZeroFD) {
        ZeroProjection zp = zero_project(y_c, y_u);
        out.alpha_parallel = zp.alpha_parallel;
        out.alpha_guard_hits = zp.guard_hits;
        FdgBands residual_bands = fdg_reweight(zp.residual, cfg);
        Tensor4 tilde = gate ? apply_mask(residual_bands.tilde, *gate)
                             : std::move(residual_bands.tilde);
        out.y = Tensor4(y_c.shape);
        for (int64_t b = 0; b < y_c.shape.n; b++) {
            const double alpha = zp.alpha_parallel[static_cast<size_t>(b)];
            const float* pu = y_u.data.data() + b * m;
            const float* pt = tilde.data.data() + b * m;
            float* py = out.y.data.data() + b * m;
            for (int64_t i = 0; i < m; i++) {
                py[i] = static_cast<float>(alpha * pu[i] + cfg.scale * pt[i]);
            }
        }
        out.std_ycfg = std_per_sample(out.y);
    } else {
        // Projection coefficient is not part of this branch's math; computed
        // anyway so traces carry a defined value.
        const auto cu = dot_per_sample(y_c, y_u);
        const auto uu = dot_per_sample(y_u, y_u);
        out.alpha_parallel.resize(static_cast<size_t>(y_c.shape.n));
        for (size_t b = 0; b < out.alpha_parallel.size(); b++) {
            out.alpha_parallel[b] = uu[b] > 1e-12 ? cu[b] / uu[b] : 0.0;
        }
        Tensor4 tilde = gate ? apply_mask(bands.tilde, *gate) : bands.tilde;
        const Tensor4 y_cfg = add_scaled(y_u, tilde, static_cast<float>(cfg.scale));
        out.std_ycfg = std_per_sample(y_cfg);
        out.y = rescale_to_std(y_cfg, out.std_yc, cfg.alpha_rescale, cfg.rescale_recenters);
    }
    return {std::move(out), next_state};
}

}  // namespace zeresfdg
