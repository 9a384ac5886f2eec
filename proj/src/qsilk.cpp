#include "zeresfdg/qsilk.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "zeresfdg/errors.hpp"

namespace zeresfdg {

void QSilkConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("qsilk config: " + msg); };
    if (!(q_lo >= 0.0 && q_hi <= 1.0 && q_lo < q_hi)) {
        fail("quantiles must satisfy 0 <= q_lo < q_hi <= 1, got q_lo=" + std::to_string(q_lo) +
             " q_hi=" + std::to_string(q_hi));
    }
    if (!(alpha_max >= 0.0 && alpha_max <= 1.0)) {
        fail("alpha_max must lie in [0, 1], got " + std::to_string(alpha_max));
    }
    if (!(tail_fraction >= 0.0 && tail_fraction <= 1.0)) {
        fail("tail_fraction must lie in [0, 1], got " + std::to_string(tail_fraction));
    }
    if (!(sigma_detail > 0.0)) {
        fail("sigma_detail must be > 0, got " + std::to_string(sigma_detail));
    }
    if (!(edge_gate_strength >= 0.0 && edge_gate_strength <= 1.0)) {
        fail("edge_gate_strength must lie in [0, 1], got " + std::to_string(edge_gate_strength));
    }
}

Tensor4 normalize_depth(const DepthMap& depth) {
    const Shape4& s = depth.values.shape;
    if (s.c != 1) {
        throw std::invalid_argument("depth map must have a single channel, got " + s.str());
    }
    for (int64_t i = 0; i < depth.values.size(); i++) {
        if (!std::isfinite(depth.values.data[i])) {
            throw std::invalid_argument("depth map has non-finite value at flat index " +
                                        std::to_string(i));
        }
    }
    Tensor4 out(s);
    const int64_t m = s.per_sample();
    for (int64_t b = 0; b < s.n; b++) {
        const float* src = depth.values.data.data() + b * m;
        float* dst = out.data.data() + b * m;
        float lo = src[0];
        float hi = src[0];
        for (int64_t i = 1; i < m; i++) {
            lo = std::min(lo, src[i]);
            hi = std::max(hi, src[i]);
        }
        if (hi > lo) {
            const double range = static_cast<double>(hi) - static_cast<double>(lo);
            for (int64_t i = 0; i < m; i++) {
                dst[i] = static_cast<float>((src[i] - lo) / range);
            }
        } else {
            for (int64_t i = 0; i < m; i++) {
                dst[i] = 1.0f;
            }
        }
    }
    return out;
}

double ClampStats::mean_clipped_fraction() const {
    double acc = 0.0;
    for (double f : clipped_fraction) {
        acc += f;
    }
    return clipped_fraction.empty() ? 0.0 : acc / static_cast<double>(clipped_fraction.size());
}

std::pair<Tensor4, ClampStats> quantile_clamp(const Tensor4& x, const QSilkConfig& cfg) {
    cfg.validate();
    Tensor4 out(x.shape);
    ClampStats stats;
    stats.clipped_fraction.resize(static_cast<size_t>(x.shape.n));
    stats.nonfinite_count.resize(static_cast<size_t>(x.shape.n));
    const int64_t m = x.shape.per_sample();
    std::vector<float> finite;
    finite.reserve(static_cast<size_t>(m));
    for (int64_t b = 0; b < x.shape.n; b++) {
        const float* src = x.data.data() + b * m;
        float* dst = out.data.data() + b * m;
        finite.clear();
        for (int64_t i = 0; i < m; i++) {
            if (std::isfinite(src[i])) {
                finite.push_back(src[i]);
            }
        }
        double lo = 0.0;
        double hi = 0.0;
        if (!finite.empty()) {
            lo = quantile_of(finite, cfg.q_lo);
            hi = quantile_of(finite, cfg.q_hi);
        }
        int64_t altered = 0;
        int64_t nonfinite = 0;
        for (int64_t i = 0; i < m; i++) {
            const float v = src[i];
            float clipped;
            if (std::isnan(v)) {
                clipped = static_cast<float>(lo);
                nonfinite++;
            } else if (std::isinf(v)) {
                clipped = static_cast<float>(v > 0.0f ? hi : lo);
                nonfinite++;
            } else if (v < lo) {
                clipped = static_cast<float>(lo);
            } else if (v > hi) {
                clipped = static_cast<float>(hi);
            } else {
                clipped = v;
            }
            if (clipped != v || std::isnan(v)) {
                altered++;
            }
            dst[i] = clipped;
        }
        stats.clipped_fraction[static_cast<size_t>(b)] =
            static_cast<double>(altered) / static_cast<double>(m);
        stats.nonfinite_count[static_cast<size_t>(b)] = nonfinite;
    }
    return {std::move(out), stats};
}

double alpha_ramp(int64_t step_index, int64_t total_steps, const QSilkConfig& cfg) {
    cfg.validate();
    if (total_steps <= 0 || step_index < 0 || step_index >= total_steps) {
        throw std::invalid_argument("alpha_ramp: step " + std::to_string(step_index) +
                                    " outside schedule of " + std::to_string(total_steps) +
                                    " steps");
    }
    const double tail = cfg.tail_fraction * static_cast<double>(total_steps);
    if (tail <= 0.0) {
        return 0.0;
    }
    double u = (static_cast<double>(step_index + 1) - (static_cast<double>(total_steps) - tail)) / tail;
    u = std::clamp(u, 0.0, 1.0);
    const double ramp = cfg.smooth_ramp ? u * u * (3.0 - 2.0 * u) : u;
    return cfg.alpha_max * ramp;
}

Tensor4 micro_detail_inject(const Tensor4& x, const DepthMap* depth, double alpha_t,
                            const QSilkConfig& cfg) {
    cfg.validate();
    if (!(alpha_t >= 0.0 && alpha_t <= 1.0)) {
        throw std::invalid_argument("micro_detail_inject: alpha_t must lie in [0, 1], got " +
                                    std::to_string(alpha_t));
    }
    if (alpha_t == 0.0) {
        return x;
    }

    const Tensor4 blurred = gaussian_blur(x, GaussianKernel::make(cfg.sigma_detail));
    const Tensor4 edges = sobel_magnitude(x);

    Tensor4 gate(edges.shape);
    const int64_t hw = x.shape.h * x.shape.w;
    for (int64_t b = 0; b < x.shape.n; b++) {
        const float* e = edges.data.data() + b * hw;
        float* g = gate.data.data() + b * hw;
        float peak = 0.0f;
        for (int64_t i = 0; i < hw; i++) {
            peak = std::max(peak, e[i]);
        }
        for (int64_t i = 0; i < hw; i++) {
            const double norm = peak > 0.0f ? e[i] / static_cast<double>(peak) : 0.0;
            g[i] = static_cast<float>(1.0 - cfg.edge_gate_strength * norm);
        }
    }

    Tensor4 depth_gate;
    const bool use_depth = depth != nullptr && cfg.depth_gate_enabled;
    if (use_depth) {
        const Shape4& ds = depth->values.shape;
        if (ds.n != x.shape.n || ds.h != x.shape.h || ds.w != x.shape.w) {
            throw std::invalid_argument("micro_detail_inject: depth shape " + ds.str() +
                                        " does not fit tensor shape " + x.shape.str());
        }
        depth_gate = normalize_depth(*depth);
    }

    Tensor4 out(x.shape);
    for (int64_t b = 0; b < x.shape.n; b++) {
        const float* g_e = gate.data.data() + b * hw;
        const float* g_d = use_depth ? depth_gate.data.data() + b * hw : nullptr;
        for (int64_t ch = 0; ch < x.shape.c; ch++) {
            const float* src = x.data.data() + (b * x.shape.c + ch) * hw;
            const float* low = blurred.data.data() + (b * x.shape.c + ch) * hw;
            float* dst = out.data.data() + (b * x.shape.c + ch) * hw;
            for (int64_t i = 0; i < hw; i++) {
                const double highpass = static_cast<double>(src[i]) - static_cast<double>(low[i]);
                const double gated = g_d ? static_cast<double>(g_e[i]) * g_d[i] : g_e[i];
                dst[i] = static_cast<float>(src[i] + alpha_t * gated * highpass);
            }
        }
    }
    return out;
}

}  // namespace zeresfdg
