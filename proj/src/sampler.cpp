#include "zeresfdg/sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "zeresfdg/errors.hpp"
#include "zeresfdg/rng.hpp"

namespace zeresfdg {

SigmaSchedule SigmaSchedule::karras(int64_t steps, double sigma_max, double sigma_min, double rho) {
    if (steps < 1) {
        throw std::invalid_argument("schedule needs at least 1 step, got " + std::to_string(steps));
    }
    if (!(sigma_min > 0.0 && sigma_max > sigma_min)) {
        throw std::invalid_argument("schedule needs sigma_max > sigma_min > 0, got max=" +
                                    std::to_string(sigma_max) + " min=" + std::to_string(sigma_min));
    }
    if (!(rho > 0.0)) {
        throw std::invalid_argument("schedule rho must be > 0, got " + std::to_string(rho));
    }
    SigmaSchedule sched;
    sched.sigmas.resize(static_cast<size_t>(steps) + 1);
    if (steps == 1) {
        sched.sigmas[0] = static_cast<float>(sigma_max);
    } else {
        const double max_inv = std::pow(sigma_max, 1.0 / rho);
        const double min_inv = std::pow(sigma_min, 1.0 / rho);
        for (int64_t i = 0; i < steps; i++) {
            const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
            sched.sigmas[static_cast<size_t>(i)] =
                static_cast<float>(std::pow(max_inv + t * (min_inv - max_inv), rho));
        }
    }
    sched.sigmas.back() = 0.0f;
    sched.validate();
    return sched;
}

void SigmaSchedule::validate() const {
    if (sigmas.size() < 2) {
        throw std::invalid_argument("schedule must hold at least one step plus the closing 0");
    }
    if (sigmas.back() != 0.0f) {
        throw std::invalid_argument("schedule must end at sigma = 0, ends at " +
                                    std::to_string(sigmas.back()));
    }
    for (size_t i = 0; i + 1 < sigmas.size(); i++) {
        if (!(sigmas[i] > sigmas[i + 1])) {
            throw std::invalid_argument("schedule must decrease strictly, sigma[" +
                                        std::to_string(i) + "]=" + std::to_string(sigmas[i]) +
                                        " vs sigma[" + std::to_string(i + 1) + "]=" +
                                        std::to_string(sigmas[i + 1]));
        }
        if (!std::isfinite(sigmas[i]) || sigmas[i] <= 0.0f) {
            throw std::invalid_argument("schedule sigma[" + std::to_string(i) +
                                        "] must be positive and finite");
        }
    }
}

PredictionPair predict_pair(const ToyModel& model, const Tensor4& x_t, double sigma) {
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("predict_pair: sigma must be > 0, got " + std::to_string(sigma));
    }
    if (!(model.target_cond.shape == x_t.shape) || !(model.target_uncond.shape == x_t.shape)) {
        throw std::invalid_argument("predict_pair: targets " + model.target_cond.shape.str() +
                                    "/" + model.target_uncond.shape.str() +
                                    " do not match state " + x_t.shape.str());
    }
    PredictionPair pair{Tensor4(x_t.shape), Tensor4(x_t.shape)};
    for (int64_t i = 0; i < x_t.size(); i++) {
        const double v = x_t.data[i];
        pair.y_c.data[i] = static_cast<float>((v - model.target_cond.data[i]) / sigma);
        pair.y_u.data[i] = static_cast<float>((v - model.target_uncond.data[i]) / sigma);
    }
    return pair;
}

static double mean_of(const std::vector<double>& values) {
    double acc = 0.0;
    for (double v : values) {
        acc += v;
    }
    return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
}

RunResult run(const ToyModel& model, const SigmaSchedule& schedule, const GuidanceConfig& gcfg,
              const QSilkConfig& qcfg, const Tensor4* gate, const DepthMap* depth) {
    schedule.validate();
    gcfg.validate();
    qcfg.validate();
    if (!(model.target_cond.shape == model.target_uncond.shape)) {
        throw std::invalid_argument("model targets disagree on shape: " +
                                    model.target_cond.shape.str() + " vs " +
                                    model.target_uncond.shape.str());
    }

    const int64_t steps = schedule.steps();
    Tensor4 x = gaussian_tensor(model.target_cond.shape, model.noise_seed);
    for (auto& v : x.data) {
        v *= schedule.sigmas[0];
    }

    RunResult result;
    result.traces.reserve(static_cast<size_t>(steps));
    ControllerState state;

    for (int64_t i = 0; i < steps; i++) {
        try {
            const float sigma = schedule.sigmas[static_cast<size_t>(i)];
            const float sigma_next = schedule.sigmas[static_cast<size_t>(i) + 1];

            const PredictionPair pred = predict_pair(model, x, sigma);
            auto [guided, next_state] = zeresfdg_step(pred.y_c, pred.y_u, gcfg, state, gate);
            state = next_state;

            Tensor4 x0(x.shape);
            for (int64_t j = 0; j < x.size(); j++) {
                x0.data[j] = x.data[j] - sigma * guided.y.data[j];
            }

            auto [clamped, clamp_stats] = quantile_clamp(x0, qcfg);
            x0 = std::move(clamped);

            const double alpha_t = alpha_ramp(i, steps, qcfg);
            if (alpha_t > 0.0) {
                x0 = micro_detail_inject(x0, depth, alpha_t, qcfg);
            }

            for (int64_t j = 0; j < x.size(); j++) {
                x.data[j] = x0.data[j] + sigma_next * guided.y.data[j];
            }

            StepTrace trace;
            trace.step_index = i;
            trace.sigma = sigma;
            trace.r_hf = mean_of(guided.r_hf);
            trace.rho = state.rho;
            trace.mode = state.mode;
            trace.std_yc = mean_of(guided.std_yc);
            trace.std_ycfg = mean_of(guided.std_ycfg);
            trace.alpha_par_mean = mean_of(guided.alpha_parallel);
            trace.clamp_fraction = clamp_stats.mean_clipped_fraction();
            trace.alpha_t = alpha_t;
            if (!std::isfinite(trace.r_hf) || !std::isfinite(trace.rho) ||
                !std::isfinite(trace.std_yc) || !std::isfinite(trace.std_ycfg) ||
                !std::isfinite(trace.alpha_par_mean)) {
                throw NumericError("non-finite trace value");
            }
            result.traces.push_back(trace);
        } catch (const NumericError& e) {
            throw NumericError("step " + std::to_string(i) + ": " + e.what());
        }
    }

    result.final_image = std::move(x);
    return result;
}

}  // namespace zeresfdg
