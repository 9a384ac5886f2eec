#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zeresfdg/experiment.hpp"

namespace {

// "0.5,1,2" -> {0.5, 1.0, 2.0}; empty fields and trailing commas are errors.
std::vector<double> parse_value_list(const std::string& csv) {
    std::vector<double> out;
    size_t start = 0;
    while (start <= csv.size()) {
        const size_t comma = csv.find(',', start);
        const std::string field =
            csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(field, &used);
        } catch (const std::exception&) {
            throw std::runtime_error("bad value \"" + field + "\" in --values");
        }
        if (used != field.size()) {
            throw std::runtime_error("bad value \"" + field + "\" in --values");
        }
        out.push_back(v);
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"frequency-decoupled guidance experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string axis;
    std::string values_csv;
    int workers = 1;
    std::string golden_dir;

    CLI::App* run = app.add_subcommand("run", "execute one config and write its artifacts");
    run->add_option("--config", config_path, "config JSON path")->required();
    run->add_option("--out", out_dir, "output directory")->required();

    CLI::App* sweep =
        app.add_subcommand("sweep", "re-run one config across values of a single axis");
    sweep->add_option("--config", config_path, "config JSON path")->required();
    sweep->add_option("--out", out_dir, "output directory, one subdir per value")->required();
    sweep->add_option("--axis", axis, "config knob to vary")->required();
    sweep->add_option("--values", values_csv, "comma-separated values")->required();
    sweep->add_option("--workers", workers, "parallel runs")->check(CLI::PositiveNumber);

    CLI::App* verify =
        app.add_subcommand("verify-golden", "re-run recorded cases and byte-compare the outputs");
    verify->add_option("dir", golden_dir, "directory of recorded cases")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (run->parsed()) {
        return zeresfdg::cmd_run(config_path, out_dir);
    }
    if (sweep->parsed()) {
        std::vector<double> values;
        try {
            values = parse_value_list(values_csv);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
        return zeresfdg::cmd_sweep(config_path, out_dir, axis, values, workers);
    }
    return zeresfdg::cmd_verify_golden(golden_dir);
}
