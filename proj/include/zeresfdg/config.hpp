#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "zeresfdg/guidance_config.hpp"
#include "zeresfdg/qsilk.hpp"
#include "zeresfdg/tensor.hpp"

namespace zeresfdg {

// Named target generator. Which parameters apply depends on the pattern:
//   constant(value), checkerboard(period, amplitude), radial(amplitude),
//   noise(seed, amplitude).
struct PatternSpec {
    std::string pattern = "constant";
    double value = 0.0;
    double amplitude = 1.0;
    int64_t period = 8;
    uint64_t seed = 0;
};

Tensor4 generate_pattern(const PatternSpec& spec, Shape4 shape);

struct RunParams {
    int64_t steps = 25;
    uint64_t seed = 42;
    Shape4 shape{1, 4, 64, 64};
    double scale = 4.5;  // guidance strength, JSON key "s"
    double sigma_max = 14.6;
    double sigma_min = 0.03;
    double schedule_rho = 7.0;
};

struct OutputFlags {
    bool trace_csv = true;
    bool trace_json = true;
    bool final_tensor = true;
    bool summary = true;
};

struct InputPaths {
    std::string mask_path;   // optional spatial gate, module tensor format
    std::string depth_path;  // optional depth map, module tensor format
};

// Everything one run needs, round-trippable through JSON. Parsing rejects
// unknown keys with the offending path in the message; missing keys keep
// their defaults. run.s is the single source of the guidance scale and is
// copied into guidance at load.
struct ExperimentConfig {
    GuidanceConfig guidance;
    QSilkConfig qsilk;
    RunParams run;
    PatternSpec target_cond{.pattern = "radial", .amplitude = 1.0};
    PatternSpec target_uncond{.pattern = "constant", .value = 0.0};
    OutputFlags outputs;
    InputPaths inputs;

    void validate() const;

    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::ordered_json to_json() const;

    static ExperimentConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

// Numeric knobs addressable by `sweep --axis`.
const std::vector<std::string>& sweep_axes();
double get_axis(const ExperimentConfig& cfg, const std::string& axis);
void set_axis(ExperimentConfig& cfg, const std::string& axis, double value);

}  // namespace zeresfdg
