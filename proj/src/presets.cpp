#include "skewless/presets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "skewless/config.hpp"
#include "skewless/metrics.hpp"
#include "skewless/stability.hpp"

namespace skewless {

namespace {

constexpr double kStarTauBound = 1.2717;   // seconds, two-node star
constexpr double kLoopTauBound = 0.8478;   // seconds, mutually-connected pair

ProtocolParams default_profile() { return ProtocolParams{1.1, 1.0, 0.99, 1.0, 0.7}; }

NodeConfig leader_node(int id) {
    NodeConfig node;
    node.id = id;
    return node;
}

NodeConfig client_node(int id, double ppm, double x0) {
    NodeConfig node;
    node.id = id;
    node.r = 1.0 + ppm * 1e-6;
    node.x0 = x0;
    return node;
}

Topology loop_topology() {
    // Clients 1 and 2 each measure the leader and each other; c/|N| weights.
    return default_weights(make_two_client_loop(), 0.7);
}

SimulationConfig exp1_star() {
    SimulationConfig config;
    config.params = default_profile();
    config.topology = default_weights(make_star(2), config.params.c);
    config.nodes = {leader_node(1), client_node(2, 10.0, 1e-3)};
    config.steps = 300;
    config.seed = 1;
    return config;
}

SimulationConfig exp1_loop_unstable() {
    SimulationConfig config;
    config.params = default_profile();
    // Node 2 (id 3) free-runs until it joins at step 60 and closes the loop.
    config.topology =
        Topology(3, {{1, 0, config.params.c}}, {0, 2});
    config.nodes = {leader_node(1), client_node(2, 10.0, 1e-3),
                    client_node(3, -20.0, 2e-3)};
    config.events.push_back({60, loop_topology()});
    config.steps = 400;
    config.seed = 1;
    return config;
}

SimulationConfig exp1_loop_fixed() {
    SimulationConfig config;
    config.params = default_profile();
    config.params.tau = 0.5;
    config.topology = loop_topology();
    config.nodes = {leader_node(1), client_node(2, 10.0, 1e-3),
                    client_node(3, -20.0, 2e-3)};
    config.steps = 600;
    config.seed = 1;
    return config;
}

SimulationConfig exp2_wheel(int k) {
    SimulationConfig config;
    config.params = default_profile();
    config.params.tau = 0.5;
    config.topology = default_weights(make_wheel(9, k), config.params.c);
    config.nodes.push_back(leader_node(1));
    const double ppm[9] = {12, -7, 25, -18, 3, 31, -26, 9, -14};
    const double x0[9] = {5e-4, -3e-4, 8e-4, -6e-4, 2e-4,
                          9e-4, -8e-4, 4e-4, -2e-4};
    for (int i = 0; i < 9; ++i) {
        config.nodes.push_back(client_node(2 + i, ppm[i], x0[i]));
    }
    config.jitter.kind = JitterModel::Kind::UniformPingPong;
    config.jitter.jitter_max = 10e-3;
    config.jitter.granularity = 1e-3;
    for (int i = 1; i <= 9; ++i) config.jitter.edges.emplace_back(i, 0);
    config.steps = 4000;
    config.seed = 1001;
    return config;
}

SimulationConfig naive_instability() {
    SimulationConfig config;
    config.params = default_profile();
    config.params.c = 1.0;
    config.topology = Topology(2, {{1, 0, 1.0}}, {0});
    config.nodes = {leader_node(1), client_node(2, 10.0, 1e-3)};
    config.nodes[1].skewless = false;
    config.nodes[1].baseline = {BaselineKind::NaiveSkew, 0.02, 0.0};
    config.steps = 1600;
    config.seed = 1;
    return config;
}

Eigen::VectorXd rates_of(const SimulationConfig& config) {
    Eigen::VectorXd rates(config.nodes.size());
    for (size_t i = 0; i < config.nodes.size(); ++i) {
        rates(static_cast<int>(i)) = config.nodes[i].r;
    }
    return rates;
}

PresetCheck check(const std::string& name, bool pass, std::string detail) {
    return {name, pass, std::move(detail)};
}

std::string format_seconds(double v) {
    std::ostringstream out;
    out.precision(6);
    out << v;
    return out.str();
}

double peak_offset(const Trace& trace, int node, int first_row, int last_row) {
    double peak = 0.0;
    for (int row = first_row; row <= last_row && row < trace.rows; ++row) {
        peak = std::max(peak, std::abs(trace.offset(row, node)));
    }
    return peak;
}

double spearman(const std::vector<double>& values) {
    const int n = static_cast<int>(values.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return values[a] < values[b]; });
    std::vector<double> rank(n);
    for (int pos = 0; pos < n; ++pos) rank[order[pos]] = pos;
    double d2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = rank[i] - i;  // positions are already 0..n-1 in K order
        d2 += d * d;
    }
    return 1.0 - 6.0 * d2 / (n * (static_cast<double>(n) * n - 1.0));
}

ReproductionResult reproduce_exp1_star(std::optional<std::uint64_t> seed) {
    ReproductionResult result;
    result.preset = "exp1-star";
    result.config = make_preset(result.preset, seed);
    const StabilityReport report = full_stability_report(
        final_topology(result.config), rates_of(result.config),
        result.config.params);
    result.trace = run(result.config);
    const ConvergenceResult conv = detect_convergence(result.trace, 1e-6, 10);

    result.checks.push_back(check(
        "verdict stable", report.verdict == Verdict::Stable,
        std::string("verdict=") + to_string(report.verdict)));
    const double rel = std::abs(report.tau_bound - kStarTauBound) / kStarTauBound;
    result.checks.push_back(check("tau bound 1.2717 s within 0.1%", rel < 1e-3,
                                  "bound=" + format_seconds(report.tau_bound)));
    result.checks.push_back(
        check("offset below 1 us within 300 steps",
              conv.converged && conv.first_step <= 300,
              conv.converged ? "first step " + std::to_string(conv.first_step)
                             : "did not converge"));
    return result;
}

ReproductionResult reproduce_exp1_loop_unstable(std::optional<std::uint64_t> seed) {
    ReproductionResult result;
    result.preset = "exp1-loop-unstable";
    result.config = make_preset(result.preset, seed);
    const StabilityReport report = full_stability_report(
        final_topology(result.config), rates_of(result.config),
        result.config.params);
    result.trace = run(result.config);

    result.checks.push_back(check(
        "verdict unstable", report.verdict == Verdict::Unstable,
        std::string("verdict=") + to_string(report.verdict)));
    const double rel = std::abs(report.tau_bound - kLoopTauBound) / kLoopTauBound;
    result.checks.push_back(check("tau bound 847.8 ms within 0.1%", rel < 1e-3,
                                  "bound=" + format_seconds(report.tau_bound)));
    result.checks.push_back(check(
        "run diverges after the loop forms",
        result.trace.status == RunStatus::Diverged,
        result.trace.status == RunStatus::Diverged
            ? "diverged at step " + std::to_string(result.trace.diverged_at_step)
            : "completed without divergence"));
    return result;
}

ReproductionResult reproduce_exp1_loop_fixed(std::optional<std::uint64_t> seed) {
    ReproductionResult result;
    result.preset = "exp1-loop-fixed";
    result.config = make_preset(result.preset, seed);
    const StabilityReport report = full_stability_report(
        final_topology(result.config), rates_of(result.config),
        result.config.params);
    result.trace = run(result.config);
    const ConvergenceResult conv = detect_convergence(result.trace, 1e-6, 10);

    result.checks.push_back(check(
        "verdict stable at tau = 500 ms", report.verdict == Verdict::Stable,
        std::string("verdict=") + to_string(report.verdict)));
    result.checks.push_back(
        check("loop converges", conv.converged,
              conv.converged ? "first step " + std::to_string(conv.first_step)
                             : "did not converge"));
    return result;
}

ReproductionResult reproduce_naive(std::optional<std::uint64_t> seed) {
    ReproductionResult result;
    result.preset = "naive-instability";
    result.config = make_preset(result.preset, seed);
    result.trace = run(result.config);

    const double early = peak_offset(result.trace, 1, 25, 75);
    const double late = peak_offset(result.trace, 1, 150, 200);
    const int sign_changes = result.trace.offset_sign_changes(1, 25, 200);

    result.checks.push_back(check(
        "run diverges", result.trace.status == RunStatus::Diverged,
        result.trace.status == RunStatus::Diverged
            ? "diverged at step " + std::to_string(result.trace.diverged_at_step)
            : "completed"));
    result.checks.push_back(
        check("offset sign alternates", sign_changes >= 4,
              std::to_string(sign_changes) + " sign changes in steps 25..200"));
    result.checks.push_back(check(
        "envelope grows at least 2x", early > 0.0 && late >= 2.0 * early,
        "peak[150,200]=" + format_seconds(late) +
            " peak[25,75]=" + format_seconds(early)));
    return result;
}

std::vector<ReproductionResult> reproduce_exp2_sweep(
    std::optional<std::uint64_t> seed) {
    std::vector<ReproductionResult> results;
    std::vector<double> deviations;
    for (int k = 0; k <= 4; ++k) {
        ReproductionResult result;
        result.preset = "exp2-wheel-" + std::to_string(k);
        result.config = make_preset(result.preset, seed);
        result.trace = run(result.config);
        const double sqrt_s_n =
            mean_relative_deviation(result.trace, default_window(result.trace));
        deviations.push_back(sqrt_s_n);
        result.checks.push_back(check(
            "run completes", result.trace.status == RunStatus::Completed,
            "sqrt_s_n=" + format_seconds(sqrt_s_n)));
        results.push_back(std::move(result));
    }
    const double ratio = deviations.front() / deviations.back();
    results.back().checks.push_back(
        check("sqrt_s_n ratio K0/K4 at least 2", ratio >= 2.0,
              "ratio=" + format_seconds(ratio)));
    const double trend = spearman(deviations);
    results.back().checks.push_back(
        check("sqrt_s_n trend decreasing in K", trend < 0.0,
              "spearman=" + format_seconds(trend)));
    return results;
}

}  // namespace

ProtocolParams params_profile(const std::string& name) {
    if (name == "default") return default_profile();
    // The 16 s poll interval needs a small commit factor: condition (iii)
    // asks tau*mu_max < 1.44 for these gains, so c = 0.07 leaves the same
    // ~1.3x headroom the default profile has at tau = 1 s.
    if (name == "long-poll") return ProtocolParams{1.388, 1.374, 1.98, 16.0, 0.07};
    if (name == "fast-poll") return ProtocolParams{0.1385, 0.1363, 0.62, 0.25, 0.7};
    throw std::invalid_argument("unknown parameter profile '" + name + "'");
}

std::vector<std::string> profile_names() {
    return {"default", "long-poll", "fast-poll"};
}

std::vector<PresetDescriptor> preset_list() {
    return {
        {"exp1-star", "two nodes, tau = 1 s; converges"},
        {"exp1-loop-unstable",
         "client loop forms at step 60, tau = 1 s; diverges"},
        {"exp1-loop-fixed", "client loop from step 0, tau = 0.5 s; converges"},
        {"exp1", "all three convergence presets"},
        {"exp2-wheel-K", "9 clients, noisy leader links, ring degree 2K (K=0..4)"},
        {"exp2-wheel", "whole K = 0..4 sweep with trend checks"},
        {"naive-instability",
         "skew steering from raw offsets only; oscillates and diverges"},
    };
}

bool is_preset(const std::string& name) {
    if (name == "exp1" || name == "exp1-star" || name == "exp1-loop-unstable" ||
        name == "exp1-loop-fixed" || name == "exp2-wheel" ||
        name == "naive-instability") {
        return true;
    }
    if (name.rfind("exp2-wheel-", 0) == 0 && name.size() == 12) {
        const char k = name.back();
        return k >= '0' && k <= '4';
    }
    return false;
}

SimulationConfig make_preset(const std::string& name,
                             std::optional<std::uint64_t> seed) {
    SimulationConfig config;
    if (name == "exp1-star") {
        config = exp1_star();
    } else if (name == "exp1-loop-unstable") {
        config = exp1_loop_unstable();
    } else if (name == "exp1-loop-fixed") {
        config = exp1_loop_fixed();
    } else if (name == "naive-instability") {
        config = naive_instability();
    } else if (name.rfind("exp2-wheel-", 0) == 0 && name.size() == 12 &&
               name.back() >= '0' && name.back() <= '4') {
        config = exp2_wheel(name.back() - '0');
    } else {
        throw std::invalid_argument("unknown preset '" + name + "'");
    }
    if (seed) config.seed = *seed;
    return config;
}

bool ReproductionResult::all_pass() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const PresetCheck& c) { return c.pass; });
}

std::vector<ReproductionResult> reproduce_preset(
    const std::string& name, std::optional<std::uint64_t> seed) {
    if (name == "exp1") {
        std::vector<ReproductionResult> results;
        results.push_back(reproduce_exp1_star(seed));
        results.push_back(reproduce_exp1_loop_unstable(seed));
        results.push_back(reproduce_exp1_loop_fixed(seed));
        return results;
    }
    if (name == "exp1-star") return {reproduce_exp1_star(seed)};
    if (name == "exp1-loop-unstable") return {reproduce_exp1_loop_unstable(seed)};
    if (name == "exp1-loop-fixed") return {reproduce_exp1_loop_fixed(seed)};
    if (name == "naive-instability") return {reproduce_naive(seed)};
    if (name == "exp2-wheel") return reproduce_exp2_sweep(seed);
    if (name.rfind("exp2-wheel-", 0) == 0) {
        ReproductionResult result;
        result.preset = name;
        result.config = make_preset(name, seed);
        result.trace = run(result.config);
        const double sqrt_s_n =
            mean_relative_deviation(result.trace, default_window(result.trace));
        result.checks.push_back(check(
            "run completes", result.trace.status == RunStatus::Completed,
            "sqrt_s_n=" + format_seconds(sqrt_s_n)));
        return {result};
    }
    throw std::invalid_argument("unknown preset '" + name + "'");
}

}  // namespace skewless
