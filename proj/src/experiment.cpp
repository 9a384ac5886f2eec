#include "zeresfdg/experiment.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "zeresfdg/errors.hpp"
#include "zeresfdg/tensor_io.hpp"
#include "zeresfdg/trace.hpp"

namespace zeresfdg {

double l2_distance(const Tensor4& a, const Tensor4& b) {
    if (!(a.shape == b.shape)) {
        throw std::invalid_argument("l2_distance: shape mismatch " + a.shape.str() + " vs " +
                                    b.shape.str());
    }
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); i++) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    return std::sqrt(acc);
}

nlohmann::ordered_json RunSummary::to_json() const {
    nlohmann::ordered_json j;
    j["steps"] = steps;
    j["s"] = s;
    j["seed"] = seed;
    j["l2_to_target_cond"] = l2_to_target_cond;
    j["l2_to_target_uncond"] = l2_to_target_uncond;
    j["mode_switches"] = mode_switches;
    j["mean_clamp_fraction"] = mean_clamp_fraction;
    return j;
}

void resolve_input_paths(ExperimentConfig& cfg, const std::filesystem::path& base_dir) {
    auto resolve = [&](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative()) {
            p = (base_dir / p).string();
        }
    };
    resolve(cfg.inputs.mask_path);
    resolve(cfg.inputs.depth_path);
}

RunSummary run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                          RunResult* result_out) {
    cfg.validate();

    ToyModel model{generate_pattern(cfg.target_cond, cfg.run.shape),
                   generate_pattern(cfg.target_uncond, cfg.run.shape), cfg.run.seed};
    const SigmaSchedule schedule = SigmaSchedule::karras(cfg.run.steps, cfg.run.sigma_max,
                                                         cfg.run.sigma_min, cfg.run.schedule_rho);

    GuidanceConfig gcfg = cfg.guidance;
    gcfg.scale = cfg.run.scale;

    Tensor4 gate({1, 1, 1, 1});
    const Tensor4* gate_ptr = nullptr;
    if (!cfg.inputs.mask_path.empty()) {
        gate = load_tensor(cfg.inputs.mask_path);
        gate_ptr = &gate;
    }
    DepthMap depth{Tensor4({1, 1, 1, 1})};
    const DepthMap* depth_ptr = nullptr;
    if (!cfg.inputs.depth_path.empty()) {
        depth.values = load_tensor(cfg.inputs.depth_path);
        depth_ptr = &depth;
    }

    RunResult result = run(model, schedule, gcfg, cfg.qsilk, gate_ptr, depth_ptr);

    RunSummary summary;
    summary.steps = cfg.run.steps;
    summary.s = cfg.run.scale;
    summary.seed = cfg.run.seed;
    summary.l2_to_target_cond = l2_distance(result.final_image, model.target_cond);
    summary.l2_to_target_uncond = l2_distance(result.final_image, model.target_uncond);
    for (size_t i = 1; i < result.traces.size(); i++) {
        if (result.traces[i].mode != result.traces[i - 1].mode) {
            summary.mode_switches++;
        }
    }
    double clamp_acc = 0.0;
    for (const StepTrace& t : result.traces) {
        clamp_acc += t.clamp_fraction;
    }
    summary.mean_clamp_fraction =
        result.traces.empty() ? 0.0 : clamp_acc / static_cast<double>(result.traces.size());

    std::filesystem::create_directories(out_dir);
    if (cfg.outputs.trace_csv) {
        write_trace_csv(result.traces, out_dir / "trace.csv");
    }
    if (cfg.outputs.trace_json) {
        write_trace_json(result.traces, out_dir / "trace.json");
    }
    if (cfg.outputs.final_tensor) {
        save_tensor(result.final_image, out_dir / "final.f32");
    }
    if (cfg.outputs.summary) {
        std::ofstream out(out_dir / "summary.json");
        if (!out) {
            throw ConfigError("cannot write " + (out_dir / "summary.json").string());
        }
        out << summary.to_json().dump(2) << "\n";
    }

    if (result_out != nullptr) {
        *result_out = std::move(result);
    }
    return summary;
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
    try {
        ExperimentConfig cfg = ExperimentConfig::load(config_path);
        resolve_input_paths(cfg, std::filesystem::path(config_path).parent_path());
        const RunSummary s = run_experiment(cfg, out_dir);
        std::cout << "run: " << s.steps << " steps, s=" << format_double(s.s)
                  << ", mode_switches=" << s.mode_switches
                  << ", l2_to_target_cond=" << format_double(s.l2_to_target_cond) << " -> "
                  << out_dir << "\n";
        return 0;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

namespace {

struct SweepCell {
    double value = 0.0;
    RunSummary summary;
    std::string error;
    int code = 0;
};

}  // namespace

int cmd_sweep(const std::string& config_path, const std::string& out_dir, const std::string& axis,
              const std::vector<double>& values, int workers) {
    ExperimentConfig base;
    try {
        if (values.empty()) {
            throw ConfigError("sweep needs at least one value");
        }
        base = ExperimentConfig::load(config_path);
        resolve_input_paths(base, std::filesystem::path(config_path).parent_path());
        get_axis(base, axis);  // unknown axis fails before any run starts
        std::filesystem::create_directories(out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    std::vector<SweepCell> cells(values.size());
    for (size_t i = 0; i < values.size(); i++) {
        cells[i].value = values[i];
    }

    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
            SweepCell& cell = cells[i];
            try {
                ExperimentConfig cfg = base;
                set_axis(cfg, axis, cell.value);
                const std::filesystem::path sub =
                    std::filesystem::path(out_dir) / (axis + "=" + format_double(cell.value));
                cell.summary = run_experiment(cfg, sub);
            } catch (const NumericError& e) {
                cell.error = e.what();
                cell.code = 3;
            } catch (const std::exception& e) {
                cell.error = e.what();
                cell.code = 2;
            }
        }
    };

    const size_t n_threads =
        std::min<size_t>(values.size(), static_cast<size_t>(std::max(1, workers)));
    std::vector<std::thread> pool;
    for (size_t t = 1; t < n_threads; t++) {
        pool.emplace_back(worker);
    }
    worker();
    for (std::thread& t : pool) {
        t.join();
    }

    for (const SweepCell& cell : cells) {
        if (cell.code != 0) {
            std::cerr << "error at " << axis << "=" << format_double(cell.value) << ": "
                      << cell.error << "\n";
            return cell.code;
        }
    }

    std::ofstream csv(std::filesystem::path(out_dir) / "sweep_summary.csv");
    csv << "value,l2_to_target_cond,l2_to_target_uncond,mode_switches,mean_clamp_fraction\n";
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const SweepCell& cell : cells) {
        csv << format_double(cell.value) << "," << format_double(cell.summary.l2_to_target_cond)
            << "," << format_double(cell.summary.l2_to_target_uncond) << ","
            << cell.summary.mode_switches << ","
            << format_double(cell.summary.mean_clamp_fraction) << "\n";
        nlohmann::ordered_json row = cell.summary.to_json();
        row["value"] = cell.value;
        rows.push_back(std::move(row));
    }
    csv.close();
    nlohmann::ordered_json doc;
    doc["axis"] = axis;
    doc["results"] = std::move(rows);
    std::ofstream js(std::filesystem::path(out_dir) / "sweep_summary.json");
    js << doc.dump(2) << "\n";

    std::cout << "sweep: " << axis << " over " << values.size() << " values -> " << out_dir
              << "\n";
    return 0;
}

namespace {

std::string read_file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// First differing line, 1-based, assuming at least one difference exists.
int64_t first_diff_line(const std::string& a, const std::string& b) {
    int64_t line = 1;
    const size_t n = std::min(a.size(), b.size());
    for (size_t i = 0; i < n; i++) {
        if (a[i] != b[i]) {
            return line;
        }
        if (a[i] == '\n') {
            line++;
        }
    }
    return line;
}

bool compare_case_file(const std::filesystem::path& golden, const std::filesystem::path& fresh,
                       const std::string& rel) {
    if (!std::filesystem::exists(fresh)) {
        std::cerr << "mismatch: " << rel << " was not produced by the re-run\n";
        return false;
    }
    const std::string want = read_file_bytes(golden);
    const std::string got = read_file_bytes(fresh);
    if (want == got) {
        return true;
    }
    if (golden.extension() == ".f32") {
        size_t off = 0;
        const size_t n = std::min(want.size(), got.size());
        while (off < n && want[off] == got[off]) {
            off++;
        }
        std::cerr << "mismatch: " << rel << " first differs at element " << off / 4;
        if (want.size() != got.size()) {
            std::cerr << " (sizes " << want.size() << " vs " << got.size() << " bytes)";
        }
        std::cerr << "\n";
    } else {
        std::cerr << "mismatch: " << rel << " first differs at line " << first_diff_line(want, got)
                  << "\n";
    }
    return false;
}

}  // namespace

int cmd_verify_golden(const std::string& golden_dir) {
    const std::filesystem::path root(golden_dir);
    std::vector<std::filesystem::path> cases;
    try {
        if (!std::filesystem::is_directory(root)) {
            std::cerr << "error: " << golden_dir << " is not a directory\n";
            return 2;
        }
        if (std::filesystem::exists(root / "config.json")) {
            cases.push_back(root);
        } else {
            for (const auto& entry : std::filesystem::directory_iterator(root)) {
                if (entry.is_directory() && std::filesystem::exists(entry.path() / "config.json")) {
                    cases.push_back(entry.path());
                }
            }
            std::sort(cases.begin(), cases.end());
        }
        if (cases.empty()) {
            std::cerr << "error: no case with a config.json under " << golden_dir << "\n";
            return 2;
        }
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    for (const std::filesystem::path& case_dir : cases) {
        const std::string name = case_dir.filename().string();
        std::filesystem::path tmp;
        try {
            ExperimentConfig cfg = ExperimentConfig::load(case_dir / "config.json");
            resolve_input_paths(cfg, case_dir);
            tmp = std::filesystem::temp_directory_path() /
                  ("verify-" + std::to_string(::getpid()) + "-" + name);
            std::filesystem::remove_all(tmp);
            run_experiment(cfg, tmp);
        } catch (const NumericError& e) {
            std::cerr << "numeric error in " << name << ": " << e.what() << "\n";
            return 3;
        } catch (const std::exception& e) {
            std::cerr << "error in " << name << ": " << e.what() << "\n";
            return 2;
        }

        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(case_dir)) {
            if (entry.is_regular_file() && entry.path().filename() != "config.json") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const std::filesystem::path& f : files) {
            const std::string rel = name + "/" + f.filename().string();
            if (!compare_case_file(f, tmp / f.filename(), rel)) {
                return 1;
            }
        }
        std::filesystem::remove_all(tmp);
        std::cout << "ok: " << name << " (" << files.size() << " files)\n";
    }
    return 0;
}

}  // namespace zeresfdg
