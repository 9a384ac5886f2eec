#include "zeresfdg/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "zeresfdg/errors.hpp"
#include "zeresfdg/rng.hpp"

namespace zeresfdg {

Tensor4 generate_pattern(const PatternSpec& spec, Shape4 shape) {
    Tensor4 out(shape);
    const int64_t hw = shape.h * shape.w;
    if (spec.pattern == "constant") {
        for (auto& v : out.data) {
            v = static_cast<float>(spec.value);
        }
    } else if (spec.pattern == "checkerboard") {
        if (spec.period < 1) {
            throw ConfigError("checkerboard period must be >= 1, got " + std::to_string(spec.period));
        }
        for (int64_t y = 0; y < shape.h; y++) {
            for (int64_t x = 0; x < shape.w; x++) {
                const bool even = ((y / spec.period) + (x / spec.period)) % 2 == 0;
                const float v = static_cast<float>(even ? spec.amplitude : -spec.amplitude);
                for (int64_t b = 0; b < shape.n; b++) {
                    for (int64_t ch = 0; ch < shape.c; ch++) {
                        out.data[(b * shape.c + ch) * hw + y * shape.w + x] = v;
                    }
                }
            }
        }
    } else if (spec.pattern == "radial") {
        const double cy = static_cast<double>(shape.h - 1) / 2.0;
        const double cx = static_cast<double>(shape.w - 1) / 2.0;
        const double extent = std::sqrt(cy * cy + cx * cx);
        for (int64_t y = 0; y < shape.h; y++) {
            for (int64_t x = 0; x < shape.w; x++) {
                const double dy = static_cast<double>(y) - cy;
                const double dx = static_cast<double>(x) - cx;
                const double d = extent > 0.0 ? std::sqrt(dy * dy + dx * dx) / extent : 0.0;
                const float v = static_cast<float>(spec.amplitude * (1.0 - 2.0 * d));
                for (int64_t b = 0; b < shape.n; b++) {
                    for (int64_t ch = 0; ch < shape.c; ch++) {
                        out.data[(b * shape.c + ch) * hw + y * shape.w + x] = v;
                    }
                }
            }
        }
    } else if (spec.pattern == "noise") {
        GaussianStream stream(spec.seed);
        for (auto& v : out.data) {
            v = static_cast<float>(spec.amplitude * stream.next());
        }
    } else {
        throw ConfigError("unknown target pattern \"" + spec.pattern +
                          "\" (expected: constant|checkerboard|radial|noise)");
    }
    return out;
}

void ExperimentConfig::validate() const {
    guidance.validate();
    qsilk.validate();
    if (run.steps < 1) {
        throw ConfigError("run.steps must be >= 1, got " + std::to_string(run.steps));
    }
    if (run.shape.n <= 0 || run.shape.c <= 0 || run.shape.h <= 0 || run.shape.w <= 0) {
        throw ConfigError("run.shape must be positive in every dim, got " + run.shape.str());
    }
    if (!(run.sigma_min > 0.0 && run.sigma_max > run.sigma_min)) {
        throw ConfigError("run needs sigma_max > sigma_min > 0, got sigma_max=" +
                          std::to_string(run.sigma_max) + " sigma_min=" + std::to_string(run.sigma_min));
    }
    if (!(run.schedule_rho > 0.0)) {
        throw ConfigError("run.schedule_rho must be > 0, got " + std::to_string(run.schedule_rho));
    }
    // Pattern names and parameters are checked by the generator on a 1x1 probe.
    generate_pattern(target_cond, {1, 1, 1, 1});
    generate_pattern(target_uncond, {1, 1, 1, 1});
}

namespace {

void reject_unknown_keys(const nlohmann::json& obj, const std::string& where,
                         const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.contains(key)) {
            throw ConfigError("config: unknown key \"" + (where.empty() ? key : where + "." + key) +
                              "\"");
        }
    }
}

template <typename T>
void read_field(const nlohmann::json& obj, const std::string& where, const char* key, T& dst) {
    if (!obj.contains(key)) {
        return;
    }
    try {
        dst = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: key \"" + where + "." + key + "\" has the wrong type");
    }
}

PatternSpec pattern_from_json(const nlohmann::json& obj, const std::string& where) {
    if (!obj.is_object()) {
        throw ConfigError("config: \"" + where + "\" must be an object");
    }
    PatternSpec spec;
    read_field(obj, where, "pattern", spec.pattern);
    std::set<std::string> allowed = {"pattern"};
    if (spec.pattern == "constant") {
        allowed.insert("value");
    } else if (spec.pattern == "checkerboard") {
        allowed.insert({"amplitude", "period"});
    } else if (spec.pattern == "radial") {
        allowed.insert("amplitude");
    } else if (spec.pattern == "noise") {
        allowed.insert({"amplitude", "seed"});
    } else {
        throw ConfigError("config: \"" + where + ".pattern\" names unknown pattern \"" +
                          spec.pattern + "\"");
    }
    reject_unknown_keys(obj, where, allowed);
    read_field(obj, where, "value", spec.value);
    read_field(obj, where, "amplitude", spec.amplitude);
    read_field(obj, where, "period", spec.period);
    read_field(obj, where, "seed", spec.seed);
    return spec;
}

nlohmann::ordered_json pattern_to_json(const PatternSpec& spec) {
    nlohmann::ordered_json j;
    j["pattern"] = spec.pattern;
    if (spec.pattern == "constant") {
        j["value"] = spec.value;
    } else if (spec.pattern == "checkerboard") {
        j["amplitude"] = spec.amplitude;
        j["period"] = spec.period;
    } else if (spec.pattern == "radial") {
        j["amplitude"] = spec.amplitude;
    } else if (spec.pattern == "noise") {
        j["amplitude"] = spec.amplitude;
        j["seed"] = spec.seed;
    }
    return j;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ConfigError("config root must be a JSON object");
    }
    reject_unknown_keys(j, "", {"guidance", "qsilk", "run", "model", "outputs", "inputs"});
    ExperimentConfig cfg;

    if (j.contains("guidance")) {
        const auto& g = j.at("guidance");
        reject_unknown_keys(g, "guidance",
                            {"alpha_rescale", "lambda_low", "lambda_high", "sigma_split",
                             "beta_ema", "tau_lo", "tau_hi", "rescale_recenters",
                             "invert_mode_map"});
        read_field(g, "guidance", "alpha_rescale", cfg.guidance.alpha_rescale);
        read_field(g, "guidance", "lambda_low", cfg.guidance.lambda_low);
        read_field(g, "guidance", "lambda_high", cfg.guidance.lambda_high);
        read_field(g, "guidance", "sigma_split", cfg.guidance.sigma_split);
        read_field(g, "guidance", "beta_ema", cfg.guidance.beta_ema);
        read_field(g, "guidance", "tau_lo", cfg.guidance.tau_lo);
        read_field(g, "guidance", "tau_hi", cfg.guidance.tau_hi);
        read_field(g, "guidance", "rescale_recenters", cfg.guidance.rescale_recenters);
        read_field(g, "guidance", "invert_mode_map", cfg.guidance.invert_mode_map);
    }

    if (j.contains("qsilk")) {
        const auto& q = j.at("qsilk");
        reject_unknown_keys(q, "qsilk",
                            {"q_lo", "q_hi", "alpha_max", "tail_fraction", "sigma_detail",
                             "edge_gate_strength", "depth_gate_enabled", "smooth_ramp"});
        read_field(q, "qsilk", "q_lo", cfg.qsilk.q_lo);
        read_field(q, "qsilk", "q_hi", cfg.qsilk.q_hi);
        read_field(q, "qsilk", "alpha_max", cfg.qsilk.alpha_max);
        read_field(q, "qsilk", "tail_fraction", cfg.qsilk.tail_fraction);
        read_field(q, "qsilk", "sigma_detail", cfg.qsilk.sigma_detail);
        read_field(q, "qsilk", "edge_gate_strength", cfg.qsilk.edge_gate_strength);
        read_field(q, "qsilk", "depth_gate_enabled", cfg.qsilk.depth_gate_enabled);
        read_field(q, "qsilk", "smooth_ramp", cfg.qsilk.smooth_ramp);
    }

    if (j.contains("run")) {
        const auto& r = j.at("run");
        reject_unknown_keys(r, "run",
                            {"steps", "seed", "shape", "s", "sigma_max", "sigma_min",
                             "schedule_rho"});
        read_field(r, "run", "steps", cfg.run.steps);
        read_field(r, "run", "seed", cfg.run.seed);
        read_field(r, "run", "s", cfg.run.scale);
        read_field(r, "run", "sigma_max", cfg.run.sigma_max);
        read_field(r, "run", "sigma_min", cfg.run.sigma_min);
        read_field(r, "run", "schedule_rho", cfg.run.schedule_rho);
        if (r.contains("shape")) {
            if (!r.at("shape").is_array() || r.at("shape").size() != 4) {
                throw ConfigError("config: \"run.shape\" must be [n,c,h,w]");
            }
            cfg.run.shape = {r.at("shape")[0].get<int64_t>(), r.at("shape")[1].get<int64_t>(),
                             r.at("shape")[2].get<int64_t>(), r.at("shape")[3].get<int64_t>()};
        }
    }

    if (j.contains("model")) {
        const auto& m = j.at("model");
        reject_unknown_keys(m, "model", {"target_cond", "target_uncond"});
        if (m.contains("target_cond")) {
            cfg.target_cond = pattern_from_json(m.at("target_cond"), "model.target_cond");
        }
        if (m.contains("target_uncond")) {
            cfg.target_uncond = pattern_from_json(m.at("target_uncond"), "model.target_uncond");
        }
    }

    if (j.contains("outputs")) {
        const auto& o = j.at("outputs");
        reject_unknown_keys(o, "outputs", {"trace_csv", "trace_json", "final_tensor", "summary"});
        read_field(o, "outputs", "trace_csv", cfg.outputs.trace_csv);
        read_field(o, "outputs", "trace_json", cfg.outputs.trace_json);
        read_field(o, "outputs", "final_tensor", cfg.outputs.final_tensor);
        read_field(o, "outputs", "summary", cfg.outputs.summary);
    }

    if (j.contains("inputs")) {
        const auto& in = j.at("inputs");
        reject_unknown_keys(in, "inputs", {"mask_path", "depth_path"});
        read_field(in, "inputs", "mask_path", cfg.inputs.mask_path);
        read_field(in, "inputs", "depth_path", cfg.inputs.depth_path);
    }

    cfg.guidance.scale = cfg.run.scale;
    cfg.validate();
    return cfg;
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
    nlohmann::ordered_json j;
    j["guidance"] = {{"alpha_rescale", guidance.alpha_rescale},
                     {"lambda_low", guidance.lambda_low},
                     {"lambda_high", guidance.lambda_high},
                     {"sigma_split", guidance.sigma_split},
                     {"beta_ema", guidance.beta_ema},
                     {"tau_lo", guidance.tau_lo},
                     {"tau_hi", guidance.tau_hi},
                     {"rescale_recenters", guidance.rescale_recenters},
                     {"invert_mode_map", guidance.invert_mode_map}};
    j["qsilk"] = {{"q_lo", qsilk.q_lo},
                  {"q_hi", qsilk.q_hi},
                  {"alpha_max", qsilk.alpha_max},
                  {"tail_fraction", qsilk.tail_fraction},
                  {"sigma_detail", qsilk.sigma_detail},
                  {"edge_gate_strength", qsilk.edge_gate_strength},
                  {"depth_gate_enabled", qsilk.depth_gate_enabled},
                  {"smooth_ramp", qsilk.smooth_ramp}};
    j["run"] = {{"steps", run.steps},
                {"seed", run.seed},
                {"shape", {run.shape.n, run.shape.c, run.shape.h, run.shape.w}},
                {"s", run.scale},
                {"sigma_max", run.sigma_max},
                {"sigma_min", run.sigma_min},
                {"schedule_rho", run.schedule_rho}};
    j["model"] = {{"target_cond", pattern_to_json(target_cond)},
                  {"target_uncond", pattern_to_json(target_uncond)}};
    j["outputs"] = {{"trace_csv", outputs.trace_csv},
                    {"trace_json", outputs.trace_json},
                    {"final_tensor", outputs.final_tensor},
                    {"summary", outputs.summary}};
    if (!inputs.mask_path.empty() || !inputs.depth_path.empty()) {
        j["inputs"] = {{"mask_path", inputs.mask_path}, {"depth_path", inputs.depth_path}};
    }
    return j;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

void ExperimentConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot open " + path.string() + " for writing");
    }
    out << to_json().dump(2) << "\n";
}

namespace {

struct AxisBinding {
    const char* name;
    double (*get)(const ExperimentConfig&);
    void (*set)(ExperimentConfig&, double);
};

void set_integer(int64_t& dst, double value, const char* what) {
    if (!(value > 0.0) || value != std::floor(value)) {
        throw ConfigError(std::string("axis ") + what + " needs a positive integer, got " +
                          std::to_string(value));
    }
    dst = static_cast<int64_t>(value);
}

const AxisBinding kAxes[] = {
    {"s", [](const ExperimentConfig& c) { return c.run.scale; },
     [](ExperimentConfig& c, double v) { c.run.scale = v; c.guidance.scale = v; }},
    {"steps", [](const ExperimentConfig& c) { return static_cast<double>(c.run.steps); },
     [](ExperimentConfig& c, double v) { set_integer(c.run.steps, v, "steps"); }},
    {"seed", [](const ExperimentConfig& c) { return static_cast<double>(c.run.seed); },
     [](ExperimentConfig& c, double v) {
         if (v < 0.0 || v != std::floor(v)) {
             throw ConfigError("axis seed needs a non-negative integer, got " + std::to_string(v));
         }
         c.run.seed = static_cast<uint64_t>(v);
     }},
    {"alpha_rescale", [](const ExperimentConfig& c) { return c.guidance.alpha_rescale; },
     [](ExperimentConfig& c, double v) { c.guidance.alpha_rescale = v; }},
    {"lambda_low", [](const ExperimentConfig& c) { return c.guidance.lambda_low; },
     [](ExperimentConfig& c, double v) { c.guidance.lambda_low = v; }},
    {"lambda_high", [](const ExperimentConfig& c) { return c.guidance.lambda_high; },
     [](ExperimentConfig& c, double v) { c.guidance.lambda_high = v; }},
    {"sigma_split", [](const ExperimentConfig& c) { return c.guidance.sigma_split; },
     [](ExperimentConfig& c, double v) { c.guidance.sigma_split = v; }},
    {"beta_ema", [](const ExperimentConfig& c) { return c.guidance.beta_ema; },
     [](ExperimentConfig& c, double v) { c.guidance.beta_ema = v; }},
    {"tau_lo", [](const ExperimentConfig& c) { return c.guidance.tau_lo; },
     [](ExperimentConfig& c, double v) { c.guidance.tau_lo = v; }},
    {"tau_hi", [](const ExperimentConfig& c) { return c.guidance.tau_hi; },
     [](ExperimentConfig& c, double v) { c.guidance.tau_hi = v; }},
    {"q_lo", [](const ExperimentConfig& c) { return c.qsilk.q_lo; },
     [](ExperimentConfig& c, double v) { c.qsilk.q_lo = v; }},
    {"q_hi", [](const ExperimentConfig& c) { return c.qsilk.q_hi; },
     [](ExperimentConfig& c, double v) { c.qsilk.q_hi = v; }},
    {"alpha_max", [](const ExperimentConfig& c) { return c.qsilk.alpha_max; },
     [](ExperimentConfig& c, double v) { c.qsilk.alpha_max = v; }},
    {"tail_fraction", [](const ExperimentConfig& c) { return c.qsilk.tail_fraction; },
     [](ExperimentConfig& c, double v) { c.qsilk.tail_fraction = v; }},
    {"sigma_detail", [](const ExperimentConfig& c) { return c.qsilk.sigma_detail; },
     [](ExperimentConfig& c, double v) { c.qsilk.sigma_detail = v; }},
    {"edge_gate_strength", [](const ExperimentConfig& c) { return c.qsilk.edge_gate_strength; },
     [](ExperimentConfig& c, double v) { c.qsilk.edge_gate_strength = v; }},
    {"sigma_max", [](const ExperimentConfig& c) { return c.run.sigma_max; },
     [](ExperimentConfig& c, double v) { c.run.sigma_max = v; }},
    {"sigma_min", [](const ExperimentConfig& c) { return c.run.sigma_min; },
     [](ExperimentConfig& c, double v) { c.run.sigma_min = v; }},
    {"schedule_rho", [](const ExperimentConfig& c) { return c.run.schedule_rho; },
     [](ExperimentConfig& c, double v) { c.run.schedule_rho = v; }},
};

const AxisBinding* find_axis(const std::string& axis) {
    for (const AxisBinding& b : kAxes) {
        if (axis == b.name) {
            return &b;
        }
    }
    return nullptr;
}

}  // namespace

const std::vector<std::string>& sweep_axes() {
    static const std::vector<std::string> axes = [] {
        std::vector<std::string> names;
        for (const AxisBinding& b : kAxes) {
            names.emplace_back(b.name);
        }
        return names;
    }();
    return axes;
}

double get_axis(const ExperimentConfig& cfg, const std::string& axis) {
    const AxisBinding* b = find_axis(axis);
    if (b == nullptr) {
        throw ConfigError("unknown sweep axis \"" + axis + "\"");
    }
    return b->get(cfg);
}

void set_axis(ExperimentConfig& cfg, const std::string& axis, double value) {
    const AxisBinding* b = find_axis(axis);
    if (b == nullptr) {
        throw ConfigError("unknown sweep axis \"" + axis + "\"");
    }
    b->set(cfg, value);
    cfg.validate();
}

}  // namespace zeresfdg
