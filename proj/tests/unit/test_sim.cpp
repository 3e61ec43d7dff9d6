#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "../support/random_instances.hpp"
#include "skewless/metrics.hpp"
#include "skewless/presets.hpp"
#include "skewless/sim.hpp"
#include "skewless/stability.hpp"

using namespace skewless;
using testsupport::Rng;

namespace {

SimulationConfig two_node_config(double tau = 1.0) {
    SimulationConfig config;
    config.params = ProtocolParams{1.1, 1.0, 0.99, tau, 0.7};
    config.topology = default_weights(make_star(2), 0.7);
    config.nodes.resize(2);
    config.nodes[0] = {1, 1.0, 0.0, 1.0, 0.0};
    config.nodes[1] = {2, 1.00001, 1e-3, 1.0, 0.0};
    config.steps = 300;
    config.seed = 7;
    return config;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("offset measurement") {
    SUBCASE("exact without jitter") {
        std::vector<ClockState> states(2);
        states[0] = {1, 1.0, 5.0, 1.0, 0.0};
        states[1] = {2, 1.0, 5.0, 1.0, 0.0};
        Topology t(2, {{1, 0, 0.7}}, {0});
        std::mt19937_64 rng(1);
        const auto measured = measure_offsets(states, t, {}, rng);
        CHECK(measured.size() == 1u);
        CHECK(measured[0] == 0.0);

        states[0].x = 5.25;
        const auto again = measure_offsets(states, t, {}, rng);
        CHECK(again[0] == doctest::Approx(0.25).epsilon(1e-15));
    }

    SUBCASE("two-way error span matches the quoted 6.05 ms equivalent") {
        JitterModel jitter;
        jitter.kind = JitterModel::Kind::UniformPingPong;
        jitter.jitter_max = 10e-3;
        jitter.granularity = 1e-3;
        // Uniform over {-10ms, ..., +10ms}: sqrt(J*(J+g)/3).
        CHECK(jitter.equivalent_uniform_std() ==
              doctest::Approx(6.05e-3).epsilon(0.02));

        // Sampled check of the same quantity: draw the span uniformly.
        std::mt19937_64 rng(99);
        const int points = 2 * (jitter.support_points() - 1) + 1;
        double sum = 0.0, sum_sq = 0.0;
        const int draws = 200000;
        for (int i = 0; i < draws; ++i) {
            const int idx = static_cast<int>(rng() % points);
            const double v =
                -jitter.jitter_max + jitter.granularity * idx;
            sum += v;
            sum_sq += v * v;
        }
        const double mean = sum / draws;
        const double sampled_std = std::sqrt(sum_sq / draws - mean * mean);
        CHECK(sampled_std == doctest::Approx(6.05e-3).epsilon(0.02));
    }

    SUBCASE("midpoint noise is zero-mean with the closed-form deviation") {
        JitterModel jitter;
        jitter.kind = JitterModel::Kind::UniformPingPong;
        jitter.jitter_max = 10e-3;
        jitter.granularity = 1e-3;

        std::vector<ClockState> states(2);
        states[0] = {1, 1.0, 0.0, 1.0, 0.0};
        states[1] = {2, 1.0, 0.0, 1.0, 0.0};
        Topology t(2, {{1, 0, 0.7}}, {0});
        std::mt19937_64 rng(4242);

        const int draws = 100000;
        double sum = 0.0, sum_sq = 0.0;
        double extreme = 0.0;
        for (int i = 0; i < draws; ++i) {
            const auto measured = measure_offsets(states, t, jitter, rng);
            sum += measured[0];
            sum_sq += measured[0] * measured[0];
            extreme = std::max(extreme, std::abs(measured[0]));
            // Noise values live on the half-granularity grid within +-J/2.
            CHECK(std::abs(measured[0]) <= jitter.jitter_max / 2.0 + 1e-15);
            const double on_grid =
                measured[0] / (jitter.granularity / 2.0);
            CHECK(std::abs(on_grid - std::llround(on_grid)) < 1e-9);
        }
        const double mean = sum / draws;
        const double sampled_std = std::sqrt(sum_sq / draws - mean * mean);
        const double sigma = jitter.midpoint_noise_std();
        CHECK(std::abs(mean) < 3.0 * sigma / std::sqrt(double(draws)));
        CHECK(sampled_std == doctest::Approx(sigma).epsilon(0.02));
        CHECK(extreme == doctest::Approx(jitter.jitter_max / 2.0).epsilon(1e-9));
    }

    SUBCASE("edge filter restricts where noise lands") {
        JitterModel jitter;
        jitter.kind = JitterModel::Kind::UniformPingPong;
        jitter.jitter_max = 10e-3;
        jitter.granularity = 1e-3;
        jitter.edges = {{1, 0}};
        CHECK(jitter.applies_to(1, 0));
        CHECK(!jitter.applies_to(2, 1));
    }

    SUBCASE("jitter_max must sit on the granularity grid") {
        JitterModel jitter;
        jitter.kind = JitterModel::Kind::UniformPingPong;
        jitter.jitter_max = 10e-3;
        jitter.granularity = 3e-3;
        CHECK_THROWS_AS(jitter.validate(), std::invalid_argument);
    }
}

TEST_CASE("a lone leader free-runs") {
    SimulationConfig config;
    config.params = ProtocolParams{1.1, 1.0, 0.99, 2.0, 0.7};
    config.topology = make_star(1);
    config.nodes = {{1, 1.00002, 0.5, 1.0, 0.0}};
    config.steps = 10;
    config.seed = 3;
    const Trace trace = run(config);
    REQUIRE(trace.rows == 11);
    for (int row = 0; row < trace.rows; ++row) {
        CHECK(trace.at_x(row, 0) ==
              doctest::Approx(0.5 + row * 2.0 * 1.00002).epsilon(1e-15));
        CHECK(trace.at_s(row, 0) == 1.0);
        CHECK(trace.at_y(row, 0) == 0.0);
    }
}

TEST_CASE("two-node client converges below a microsecond within 300 steps") {
    const Trace trace = run(two_node_config());
    CHECK(trace.status == RunStatus::Completed);
    const ConvergenceResult conv = detect_convergence(trace, 1e-6, 10);
    CHECK(conv.converged);
    CHECK(conv.first_step <= 300);
    CHECK(std::abs(trace.offset(trace.rows - 1, 1)) < 1e-9);
}

TEST_CASE("one step equals the vector recursion by hand") {
    SimulationConfig config = two_node_config();
    config.nodes[1].y0 = 2e-4;
    config.nodes[1].s0 = 1.0001;
    config.steps = 1;
    const Trace trace = run(config);

    // z' = A z with z = [x; s; y] and the leader row of L zero.
    const double alpha = 0.7;
    const double d = config.nodes[0].x0 - config.nodes[1].x0;
    const double wo = alpha * d;
    const double x1 =
        config.nodes[1].x0 + config.params.tau * config.nodes[1].r * 1.0001;
    const double s1 = 1.0001 + 1.1 * wo - 1.0 * 2e-4;
    const double y1 = 0.99 * wo + 0.01 * 2e-4;
    CHECK(trace.at_x(1, 1) == doctest::Approx(x1).epsilon(1e-15));
    CHECK(trace.at_s(1, 1) == doctest::Approx(s1).epsilon(1e-15));
    CHECK(trace.at_y(1, 1) == doctest::Approx(y1).epsilon(1e-15));
    CHECK(trace.at_x(1, 0) ==
          doctest::Approx(config.params.tau).epsilon(1e-15));
}

TEST_CASE("synchronous trace follows the one-step matrix action") {
    Rng rng(5001);
    for (int trial = 0; trial < 4; ++trial) {
        const int n = testsupport::uniform_int(rng, 2, 4);
        const Topology topo = testsupport::random_family(rng, n);
        const Eigen::VectorXd rates = testsupport::random_rates(rng, n);
        ProtocolParams params = testsupport::stable_params(
            rng, spectrum(build_laplacian(topo) * rates.asDiagonal()).max_real(),
            0.6);
        params.tau = std::min(params.tau, 0.5);
        SimulationConfig config = testsupport::random_sim_config(
            rng, topo, rates, params, 0.0, 200, 11);

        const Eigen::MatrixXd a =
            assemble_system_matrix(build_laplacian(topo), rates, params).a;
        Eigen::VectorXd z(3 * n);
        for (int i = 0; i < n; ++i) {
            z(i) = config.nodes[i].x0;
            z(n + i) = config.nodes[i].s0;
            z(2 * n + i) = config.nodes[i].y0;
        }
        const Trace trace = run(config);
        const int ref = trace.reference_index;
        for (int row = 1; row < trace.rows; ++row) {
            z = a * z;
            for (int i = 0; i < n; ++i) {
                CHECK(std::abs((z(i) - z(ref)) - trace.offset(row, i)) < 1e-9);
            }
        }
    }
}

TEST_CASE("identical nodes stay exactly on the synchronized manifold") {
    SimulationConfig config;
    config.params = ProtocolParams{1.1, 1.0, 0.99, 1.0, 0.7};
    config.topology = default_weights(make_wheel(4, 1), 0.7);
    config.nodes.resize(5);
    for (int i = 0; i < 5; ++i) {
        config.nodes[i] = {i + 1, 1.0, 2.5, 1.0, 0.0};
    }
    config.steps = 200;
    config.seed = 5;
    const Trace trace = run(config);
    for (int row = 0; row < trace.rows; ++row) {
        CHECK(trace.spread(row) == 0.0);
    }
}

TEST_CASE("stable configurations synchronize to numerical precision") {
    Rng rng(5002);
    int found = 0;
    while (found < 5) {
        const int n = testsupport::uniform_int(rng, 2, 6);
        const Topology topo = testsupport::random_family(rng, n);
        const Eigen::VectorXd rates = testsupport::random_rates(rng, n);
        const double mu_max =
            spectrum(build_laplacian(topo) * rates.asDiagonal()).max_real();
        const ProtocolParams params = testsupport::stable_params(rng, mu_max, 0.5);
        const StabilityReport report =
            full_stability_report(topo, rates, params);
        if (report.verdict != Verdict::Stable || report.spectral_margin > 0.9) {
            continue;
        }
        ++found;
        SimulationConfig config = testsupport::random_sim_config(
            rng, topo, rates, params, 0.0, 1200, 17);
        const Trace trace = run(config);
        REQUIRE(trace.status == RunStatus::Completed);
        const int last = trace.rows - 1;
        CHECK(trace.spread(last) < 1e-9);
        double rate_lo = 1e300, rate_hi = -1e300;
        for (int i = 0; i < n; ++i) {
            const double node_rate = rates(i) * trace.at_s(last, i);
            rate_lo = std::min(rate_lo, node_rate);
            rate_hi = std::max(rate_hi, node_rate);
        }
        CHECK(rate_hi - rate_lo < 1e-12);

        // The tail slope reproduces the predicted synchronized rate.
        Eigen::VectorXd x0(n), s0(n), y0(n);
        for (int i = 0; i < n; ++i) {
            x0(i) = config.nodes[i].x0;
            s0(i) = config.nodes[i].s0;
            y0(i) = config.nodes[i].y0;
        }
        const Eigen::VectorXd xi = left_null_vector(build_laplacian(topo));
        const double gamma = 1.0 / xi.cwiseQuotient(rates).sum();
        const FixedPoint fp =
            predict_fixed_point(x0, s0, y0, rates, xi, gamma, params);
        const LineFit fit =
            fit_synchronized_line(trace, {3 * trace.rows / 4, trace.rows});
        CHECK(std::abs(fit.r_hat - fp.r_star) / std::abs(fp.r_star) < 1e-9);
    }
}

TEST_CASE("unstable configurations grow") {
    const Topology topo = default_weights(make_two_client_loop(), 0.7);
    Eigen::VectorXd rates(3);
    rates << 1.0, 1.00001, 0.99998;
    SimulationConfig config;
    config.params = ProtocolParams{1.1, 1.0, 0.99, 1.0, 0.7};
    config.topology = topo;
    config.nodes = {{1, 1.0, 0.0, 1.0, 0.0},
                    {2, 1.00001, 1e-3, 1.0, 0.0},
                    {3, 0.99998, 2e-3, 1.0, 0.0}};
    config.steps = 220;
    config.seed = 2;
    config.divergence_threshold = 1e9;  // keep it running for the growth check
    const Trace trace = run(config);
    const int t = trace.rows - 1;
    double early = 0.0, late = 0.0;
    for (int row = t / 5 - 5; row <= t / 5 + 5; ++row) {
        early = std::max(early, trace.spread(row));
    }
    for (int row = 4 * t / 5 - 5; row <= 4 * t / 5 + 5; ++row) {
        late = std::max(late, trace.spread(row));
    }
    CHECK(late > early);
}

TEST_CASE("divergence detector halts the run") {
    SimulationConfig config = make_preset("naive-instability");
    const Trace trace = run(config);
    CHECK(trace.status == RunStatus::Diverged);
    CHECK(trace.diverged_at_step > 0);
    CHECK(trace.rows == trace.diverged_at_step + 1);
    CHECK(trace.spread(trace.rows - 1) > config.divergence_threshold);
}

TEST_CASE("skew steering keeps time monotone while rates stay positive") {
    Rng rng(5003);
    SimulationConfig config = two_node_config();
    config.nodes[1].x0 = testsupport::uniform(rng, -0.01, 0.01);
    const Trace trace = run(config);
    for (int row = 1; row < trace.rows; ++row) {
        for (int i = 0; i < trace.nodes; ++i) {
            if (trace.at_s(row - 1, i) > 0.0) {
                CHECK(trace.at_x(row, i) >= trace.at_x(row - 1, i));
            }
        }
    }
}

TEST_CASE("mid-run topology events rewire the measurements") {
    SimulationConfig config = make_preset("exp1-loop-unstable");
    const Trace trace = run(config);
    CHECK(trace.status == RunStatus::Diverged);
    // Before the loop appears the star is stable; the spread at step 60
    // must still be small.
    CHECK(trace.spread(60) < 1e-2);
    CHECK(trace.diverged_at_step > 60);
}

TEST_CASE("same seed, same trace") {
    const SimulationConfig config = experiment_two_config(2, 10e-3, 31);
    const Trace a = run(config);
    const Trace b = run(config);
    REQUIRE(a.rows == b.rows);
    CHECK(trace_csv(a) == trace_csv(b));
    CHECK(a.x == b.x);
}

TEST_CASE("different seeds draw different noise") {
    const Trace a = run_experiment_two(0, 10e-3, 1);
    const Trace b = run_experiment_two(0, 10e-3, 2);
    CHECK(a.x != b.x);
}

TEST_CASE("baseline schemes run inside the network engine") {
    // Offset+skew corrections from raw offsets converge for gentle gains.
    SimulationConfig config = two_node_config();
    config.nodes[1].skewless = false;
    config.nodes[1].baseline = {BaselineKind::SkewAndOffset, 0.5, 0.3};
    config.steps = 600;
    const Trace trace = run(config);
    CHECK(trace.status == RunStatus::Completed);
    CHECK(std::abs(trace.offset(trace.rows - 1, 1)) < 1e-4);

    // The frequency-consuming scheme reads wo history without erroring.
    SimulationConfig freq_config = two_node_config();
    freq_config.nodes[1].skewless = false;
    freq_config.nodes[1].baseline = {BaselineKind::SkewOnly, 0.3, 0.2};
    freq_config.steps = 200;
    const Trace freq_trace = run(freq_config);
    CHECK(freq_trace.rows >= 2);
}

TEST_CASE("phase-shifted scheduling generalizes the synchronous path") {
    SUBCASE("zero phases reproduce the synchronous offsets exactly") {
        SimulationConfig config = two_node_config();
        const Trace sync = run(config);
        config.scheduling = Scheduling::PhaseShifted;
        const Trace phased = run(config);
        REQUIRE(sync.rows == phased.rows);
        for (int row = 0; row < sync.rows; ++row) {
            for (int i = 0; i < sync.nodes; ++i) {
                CHECK(sync.offset(row, i) == phased.offset(row, i));
            }
        }
    }
    SUBCASE("staggered updates still converge on a stable star") {
        SimulationConfig config = two_node_config();
        config.scheduling = Scheduling::PhaseShifted;
        config.nodes[0].phase = 0.0;
        config.nodes[1].phase = 0.4;
        const Trace trace = run(config);
        CHECK(trace.status == RunStatus::Completed);
        CHECK(detect_convergence(trace, 1e-6, 10).converged);
    }
    SUBCASE("the one-poll apply delay survives staggering") {
        // The loop that destabilizes the synchronous run must also
        // destabilize the staggered one.
        SimulationConfig config = make_preset("exp1-loop-unstable");
        config.scheduling = Scheduling::PhaseShifted;
        for (size_t i = 0; i < config.nodes.size(); ++i) {
            config.nodes[i].phase = 0.25 * static_cast<double>(i);
        }
        const Trace trace = run(config);
        CHECK(trace.status == RunStatus::Diverged);
    }
}

TEST_CASE("deviation grows with the injected jitter magnitude") {
    // Two clients on a leader, fast-poll gains, microsecond-granularity
    // noise swept upward: the steady-state deviation must follow.
    std::vector<double> deviations;
    for (double jitter_max : {0.0, 40e-6, 160e-6}) {
        SimulationConfig config;
        config.params = params_profile("fast-poll");
        config.topology = default_weights(make_star(3), config.params.c);
        config.nodes = {{1, 1.0, 0.0, 1.0, 0.0},
                        {2, 1.00001, 5e-4, 1.0, 0.0},
                        {3, 0.99998, -3e-4, 1.0, 0.0}};
        if (jitter_max > 0.0) {
            config.jitter.kind = JitterModel::Kind::UniformPingPong;
            config.jitter.jitter_max = jitter_max;
            config.jitter.granularity = 1e-6;
        }
        config.steps = 1000;
        config.seed = 404;
        const Trace trace = run(config);
        REQUIRE(trace.status == RunStatus::Completed);
        deviations.push_back(
            mean_relative_deviation(trace, default_window(trace)));
    }
    CHECK(deviations[0] < deviations[1]);
    CHECK(deviations[1] < deviations[2]);
    CHECK(deviations[2] < 1e-3);  // still tracking at the jitter floor
}

TEST_CASE("config validation rejects malformed runs") {
    SimulationConfig config = two_node_config();
    config.steps = 0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);

    config = two_node_config();
    config.nodes[1].r = -1.0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);

    config = two_node_config();
    config.nodes.pop_back();
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);

    config = two_node_config();
    config.events.push_back({500, config.topology});
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}

}  // TEST_SUITE
