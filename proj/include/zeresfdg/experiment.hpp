#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "zeresfdg/config.hpp"
#include "zeresfdg/sampler.hpp"

namespace zeresfdg {

// Scalar results of one run; serialized as summary.json.
struct RunSummary {
    int64_t steps = 0;
    double s = 0.0;
    uint64_t seed = 0;
    double l2_to_target_cond = 0.0;
    double l2_to_target_uncond = 0.0;
    int64_t mode_switches = 0;
    double mean_clamp_fraction = 0.0;

    nlohmann::ordered_json to_json() const;
};

// Frobenius distance between two same-shaped tensors, accumulated in double.
double l2_distance(const Tensor4& a, const Tensor4& b);

// Execute cfg and write the artifacts selected by cfg.outputs into out_dir
// (created if missing): trace.csv, trace.json, final.f32 with its final.json
// sidecar, summary.json. Relative input paths in cfg are taken as-is, so
// resolve them against the config location first when loading from disk.
RunSummary run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                          RunResult* result_out = nullptr);

// Rewrite relative mask/depth paths against base_dir so configs can carry
// their companion tensors with them.
void resolve_input_paths(ExperimentConfig& cfg, const std::filesystem::path& base_dir);

// CLI verb bodies. Failures are reported on stderr and mapped to exit codes:
// 0 success, 1 golden mismatch, 2 bad usage or config, 3 numeric failure.
int cmd_run(const std::string& config_path, const std::string& out_dir);
int cmd_sweep(const std::string& config_path, const std::string& out_dir, const std::string& axis,
              const std::vector<double>& values, int workers);
int cmd_verify_golden(const std::string& golden_dir);

}  // namespace zeresfdg
