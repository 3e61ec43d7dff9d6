#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "skewless/config.hpp"
#include "skewless/metrics.hpp"
#include "skewless/presets.hpp"
#include "skewless/sim.hpp"
#include "skewless/stability.hpp"

namespace fs = std::filesystem;
using skewless::RunStatus;
using skewless::Verdict;

namespace {

bool log_enabled() {
    const char* level = std::getenv("SKEWLESS_LOG");
    return level != nullptr && std::string(level) != "quiet" &&
           std::string(level) != "";
}

void log_line(const std::string& message) {
    if (log_enabled()) std::cerr << "skewless: " << message << "\n";
}

Eigen::VectorXd rates_of(const skewless::SimulationConfig& config) {
    Eigen::VectorXd rates(config.nodes.size());
    for (size_t i = 0; i < config.nodes.size(); ++i) {
        rates(static_cast<int>(i)) = config.nodes[i].r;
    }
    return rates;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

int verdict_exit_code(Verdict v) {
    switch (v) {
        case Verdict::Stable:
            return 0;
        case Verdict::Unstable:
            return 2;
        case Verdict::NotCovered:
            return 3;
    }
    return 1;
}

int run_analyze(const std::string& config_path, const std::string& out_path) {
    const skewless::SimulationConfig config = skewless::load_config(config_path);
    const skewless::StabilityReport report = skewless::full_stability_report(
        skewless::final_topology(config), rates_of(config), config.params);
    const nlohmann::json doc = skewless::analysis_report(config, report);
    const std::string text = skewless::canonical_dump(doc);
    if (out_path.empty()) {
        std::cout << text;
    } else {
        write_file(out_path, text);
        log_line("report written to " + out_path);
    }
    return verdict_exit_code(report.verdict);
}

int run_simulate(const std::string& config_path, const std::string& out_dir,
                 double convergence_threshold, int hold) {
    const skewless::SimulationConfig config = skewless::load_config(config_path);
    const skewless::StabilityReport stability = skewless::full_stability_report(
        skewless::final_topology(config), rates_of(config), config.params);
    log_line("running " + std::to_string(config.steps) + " steps");
    const skewless::Trace trace = skewless::run(config);
    skewless::MetricsSummary metrics;
    metrics.window = skewless::default_window(trace);
    if (trace.nodes >= 2) {
        metrics = skewless::summarize(trace, metrics.window,
                                      convergence_threshold, hold);
    }

    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "trace.csv", skewless::trace_csv(trace));
    write_file(fs::path(out_dir) / "report.json",
               skewless::canonical_dump(skewless::simulation_report(
                   config, stability, trace, metrics)));
    write_file(fs::path(out_dir) / "config.json",
               skewless::canonical_dump(skewless::config_to_json(config)));
    log_line("outputs written to " + out_dir);
    return trace.status == RunStatus::Diverged ? 2 : 0;
}

int run_reproduce(const std::string& preset,
                  std::optional<std::uint64_t> seed,
                  const std::string& out_dir, double convergence_threshold,
                  int hold) {
    const auto results = skewless::reproduce_preset(preset, seed);
    fs::create_directories(out_dir);

    bool all_pass = true;
    nlohmann::json verdicts = nlohmann::json::array();
    for (const auto& result : results) {
        const fs::path dir = fs::path(out_dir) / result.preset;
        fs::create_directories(dir);
        write_file(dir / "trace.csv", skewless::trace_csv(result.trace));
        write_file(dir / "config.json",
                   skewless::canonical_dump(
                       skewless::config_to_json(result.config)));
        const skewless::StabilityReport stability =
            skewless::full_stability_report(
                skewless::final_topology(result.config),
                rates_of(result.config), result.config.params);
        const skewless::MetricsSummary metrics = skewless::summarize(
            result.trace, skewless::default_window(result.trace),
            convergence_threshold, hold);
        write_file(dir / "report.json",
                   skewless::canonical_dump(skewless::simulation_report(
                       result.config, stability, result.trace, metrics)));

        nlohmann::json entry;
        entry["preset"] = result.preset;
        nlohmann::json checks = nlohmann::json::array();
        for (const auto& check : result.checks) {
            std::cout << (check.pass ? "PASS" : "FAIL") << " " << result.preset
                      << ": " << check.name << " (" << check.detail << ")\n";
            checks.push_back({{"name", check.name},
                              {"pass", check.pass},
                              {"detail", check.detail}});
            all_pass = all_pass && check.pass;
        }
        entry["checks"] = checks;
        verdicts.push_back(entry);
    }
    write_file(fs::path(out_dir) / "verdicts.json",
               skewless::canonical_dump(verdicts));
    return all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"skewless network clock synchronization toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_path, out_dir = "out", preset;
    double convergence_threshold = 1e-6;
    int hold = 10;
    std::uint64_t seed_value = 0;
    bool list_presets = false;

    CLI::App* analyze = app.add_subcommand(
        "analyze", "stability analysis and fixed-point prediction");
    analyze->add_option("config", config_path, "configuration file")->required();
    analyze->add_option("-o,--output", out_path, "report path (default stdout)");

    CLI::App* simulate =
        app.add_subcommand("simulate", "run a configuration, emit trace + report");
    simulate->add_option("config", config_path, "configuration file")->required();
    simulate->add_option("-o,--output", out_dir, "output directory");
    simulate->add_option("--convergence-threshold", convergence_threshold,
                         "offset spread counted as converged (seconds)");
    simulate->add_option("--hold", hold, "rows the spread must stay below it");

    CLI::App* reproduce = app.add_subcommand(
        "reproduce", "run a named preset and check its expected outcome");
    reproduce->add_option("preset", preset, "preset name (see --list)");
    CLI::Option* seed_opt =
        reproduce->add_option("--seed", seed_value, "override the preset seed");
    reproduce->add_option("-o,--output", out_dir, "output directory");
    reproduce->add_flag("--list", list_presets, "list presets and exit");

    CLI11_PARSE(app, argc, argv);

    try {
        if (analyze->parsed()) return run_analyze(config_path, out_path);
        if (simulate->parsed()) {
            return run_simulate(config_path, out_dir, convergence_threshold,
                                hold);
        }
        if (reproduce->parsed()) {
            if (list_presets) {
                for (const auto& descriptor : skewless::preset_list()) {
                    std::cout << descriptor.name << "  " << descriptor.summary
                              << "\n";
                }
                std::cout << "parameter profiles:";
                for (const auto& name : skewless::profile_names()) {
                    std::cout << " " << name;
                }
                std::cout << "\n";
                return 0;
            }
            if (preset.empty() || !skewless::is_preset(preset)) {
                std::cerr << "unknown preset '" << preset
                          << "'; try reproduce --list\n";
                return 1;
            }
            std::optional<std::uint64_t> seed;
            if (seed_opt->count() > 0) seed = seed_value;
            return run_reproduce(preset, seed, out_dir, convergence_threshold,
                                 hold);
        }
    } catch (const skewless::ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 1;
}
