#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "zeresfdg/sampler.hpp"

namespace zeresfdg {

// Shortest round-trip decimal text (std::to_chars); used everywhere a float
// lands in a text file so re-runs produce identical bytes.
std::string format_double(double v);
std::string format_float(float v);

inline constexpr const char* kTraceCsvHeader =
    "step,sigma,r_hf,rho,mode,std_yc,std_ycfg,alpha_par_mean,clamp_fraction,alpha_t";

void write_trace_csv(const std::vector<StepTrace>& traces, const std::filesystem::path& path);
void write_trace_json(const std::vector<StepTrace>& traces, const std::filesystem::path& path);

}  // namespace zeresfdg
