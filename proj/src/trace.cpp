#include "zeresfdg/trace.hpp"

#include <charconv>
#include <fstream>

#include <json.hpp>

#include "zeresfdg/errors.hpp"

namespace zeresfdg {

template <typename T>
static std::string to_shortest(T v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_double(double v) {
    return to_shortest(v);
}

std::string format_float(float v) {
    return to_shortest(v);
}

void write_trace_csv(const std::vector<StepTrace>& traces, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot open " + path.string() + " for writing");
    }
    out << kTraceCsvHeader << "\n";
    for (const StepTrace& t : traces) {
        out << t.step_index << ',' << format_float(t.sigma) << ',' << format_double(t.r_hf) << ','
            << format_double(t.rho) << ',' << mode_name(t.mode) << ',' << format_double(t.std_yc)
            << ',' << format_double(t.std_ycfg) << ',' << format_double(t.alpha_par_mean) << ','
            << format_double(t.clamp_fraction) << ',' << format_double(t.alpha_t) << "\n";
    }
}

void write_trace_json(const std::vector<StepTrace>& traces, const std::filesystem::path& path) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const StepTrace& t : traces) {
        nlohmann::ordered_json row;
        row["step"] = t.step_index;
        row["sigma"] = t.sigma;
        row["r_hf"] = t.r_hf;
        row["rho"] = t.rho;
        row["mode"] = mode_name(t.mode);
        row["std_yc"] = t.std_yc;
        row["std_ycfg"] = t.std_ycfg;
        row["alpha_par_mean"] = t.alpha_par_mean;
        row["clamp_fraction"] = t.clamp_fraction;
        row["alpha_t"] = t.alpha_t;
        rows.push_back(std::move(row));
    }
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot open " + path.string() + " for writing");
    }
    out << rows.dump(2) << "\n";
}

}  // namespace zeresfdg
