#pragma once

#include <cstdint>
#include <vector>

#include "zeresfdg/guidance.hpp"
#include "zeresfdg/qsilk.hpp"
#include "zeresfdg/tensor.hpp"

namespace zeresfdg {

// Noise levels for a run: steps + 1 entries, strictly decreasing, final entry 0.
struct SigmaSchedule {
    std::vector<float> sigmas;

    int64_t steps() const { return static_cast<int64_t>(sigmas.size()) - 1; }

    // Karras spacing: power-of-rho interpolation between sigma_max and
    // sigma_min over the first `steps` entries, then the closing 0.
    static SigmaSchedule karras(int64_t steps, double sigma_max = 14.6,
                                double sigma_min = 0.03, double rho = 7.0);

    void validate() const;
};

// Analytic two-target denoiser stand-in. Each prediction is the exact noise
// residual toward its target, so guidance behavior can be asserted in closed
// form and runs stay deterministic.
struct ToyModel {
    Tensor4 target_cond;
    Tensor4 target_uncond;
    uint64_t noise_seed = 0;
};

// y_c = (x_t - target_cond) / sigma, y_u likewise. sigma must be > 0.
struct PredictionPair {
    Tensor4 y_c;
    Tensor4 y_u;
};
PredictionPair predict_pair(const ToyModel& model, const Tensor4& x_t, double sigma);

struct StepTrace {
    int64_t step_index = 0;
    float sigma = 0.0f;
    double r_hf = 0.0;          // batch-mean high-frequency ratio fed to the controller
    double rho = 0.0;           // controller EMA after this step's update
    GuidanceMode mode = GuidanceMode::CFGZeroFD;
    double std_yc = 0.0;        // batch means of the per-sample diagnostics
    double std_ycfg = 0.0;
    double alpha_par_mean = 0.0;
    double clamp_fraction = 0.0;
    double alpha_t = 0.0;
};

struct RunResult {
    Tensor4 final_image;
    std::vector<StepTrace> traces;
};

// Guided Euler loop over the schedule. Per step: guided prediction y, denoised
// x0 = x - sigma * y, quantile clamp on x0, micro-detail injection on x0 during
// the ramp tail, then x = x0 + sigma_next * y. The initial latent is a seeded
// standard normal scaled by sigmas[0]. The final entry of the schedule is 0, so
// the last x0 is the image. Any failure inside a step is rethrown with the step
// index attached.
RunResult run(const ToyModel& model, const SigmaSchedule& schedule, const GuidanceConfig& gcfg,
              const QSilkConfig& qcfg, const Tensor4* gate = nullptr,
              const DepthMap* depth = nullptr);

}  // namespace zeresfdg
