#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "../support/random_instances.hpp"
#include "skewless/topology.hpp"

using namespace skewless;
using testsupport::Rng;

namespace {

// Characteristic polynomial coefficients via the Faddeev-LeVerrier
// recursion, used as the companion-matrix oracle for eigenvalues.
Eigen::VectorXd char_poly(const Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    Eigen::VectorXd coeff(n + 1);  // lambda^n + c1 lambda^{n-1} + ... + cn
    coeff(0) = 1.0;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k <= n; ++k) {
        m = a * m + coeff(k - 1) * Eigen::MatrixXd::Identity(n, n);
        coeff(k) = -(a * m).trace() / k;
    }
    return coeff;
}

std::vector<std::complex<double>> companion_eigenvalues(
    const Eigen::VectorXd& coeff) {
    const int n = static_cast<int>(coeff.size()) - 1;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) companion(i, n - 1) = -coeff(n - i);
    return spectrum(companion).values;
}

}  // namespace

TEST_SUITE("topology") {

TEST_CASE("laplacian of a single edge") {
    Topology t(2, {{1, 0, 0.7}}, {0});
    const Eigen::MatrixXd l = build_laplacian(t);
    CHECK(l(0, 0) == 0.0);
    CHECK(l(0, 1) == 0.0);
    CHECK(l(1, 0) == doctest::Approx(-0.7));
    CHECK(l(1, 1) == doctest::Approx(0.7));
}

TEST_CASE("laplacian of the two-client loop matches the hand expansion") {
    const Topology t = default_weights(make_two_client_loop(), 0.7);
    const Eigen::MatrixXd l = build_laplacian(t);
    CHECK(l.row(0).isZero(0.0));
    CHECK(l(1, 1) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(l(2, 2) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(l(1, 2) == doctest::Approx(-0.35).epsilon(1e-15));
    CHECK(l(2, 1) == doctest::Approx(-0.35).epsilon(1e-15));
    CHECK(l(1, 0) == doctest::Approx(-0.35).epsilon(1e-15));
}

TEST_CASE("laplacian row sums vanish for random topologies") {
    Rng rng(7001);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = testsupport::uniform_int(rng, 2, 12);
        const Topology t = testsupport::random_family(rng, n);
        const Eigen::MatrixXd l = build_laplacian(t);
        CHECK((l * Eigen::VectorXd::Ones(n)).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("default weights split the commit factor across neighbors") {
    SUBCASE("single neighbor gets the whole factor") {
        const Topology t = default_weights(make_star(2), 0.7);
        CHECK(t.edges()[0].alpha == doctest::Approx(0.7).epsilon(1e-15));
    }
    SUBCASE("loop clients split between leader and peer") {
        const Topology t = default_weights(make_two_client_loop(), 0.7);
        for (const auto& e : t.edges()) {
            CHECK(e.alpha == doctest::Approx(0.35).epsilon(1e-15));
        }
    }
    SUBCASE("fully meshed wheel client has nine neighbors") {
        const Topology t = default_weights(make_wheel(9, 4), 0.7);
        for (const auto& e : t.edges()) {
            CHECK(e.alpha == doctest::Approx(0.7 / 9.0).epsilon(1e-15));
        }
    }
    SUBCASE("isolated non-leader node is a configuration error") {
        Topology t(3, {{1, 0, 1.0}}, {0});
        CHECK_THROWS_AS(default_weights(t, 0.7), std::invalid_argument);
    }
}

TEST_CASE("builders produce the documented shapes") {
    SUBCASE("wheel with k=0 is the star") {
        const Topology wheel = make_wheel(9, 0);
        const Topology star = make_star(10);
        CHECK(wheel.node_count() == star.node_count());
        CHECK(wheel.edges().size() == star.edges().size());
    }
    SUBCASE("wheel with k=4 meshes the clients completely") {
        const Topology t = make_wheel(9, 4);
        // Every client measures the leader plus all 8 peers.
        CHECK(t.edges().size() == 9u * 9u);
        for (int client = 1; client <= 9; ++client) {
            CHECK(t.out_degree(client) == 9);
        }
    }
    SUBCASE("two-client loop has three nodes and four edges") {
        const Topology t = make_two_client_loop();
        CHECK(t.node_count() == 3);
        CHECK(t.edges().size() == 4u);
    }
    SUBCASE("chain connects each node to its predecessor") {
        const Topology t = make_chain(4);
        CHECK(t.edges().size() == 3u);
        CHECK(check_connectivity(t).connected());
    }
    SUBCASE("invalid ring degree is rejected") {
        CHECK_THROWS_AS(make_wheel(9, 5), std::invalid_argument);
        CHECK_THROWS_AS(make_wheel(9, -1), std::invalid_argument);
    }
    SUBCASE("leaders may not have outgoing edges") {
        CHECK_THROWS_AS(Topology(2, {{0, 1, 1.0}}, {0}), std::invalid_argument);
    }
    SUBCASE("self loops and non-positive weights are rejected") {
        CHECK_THROWS_AS(Topology(2, {{1, 1, 1.0}}, {0}), std::invalid_argument);
        CHECK_THROWS_AS(Topology(2, {{1, 0, 0.0}}, {0}), std::invalid_argument);
    }
}

TEST_CASE("left null vector") {
    SUBCASE("tree with unique leader concentrates on the leader") {
        Rng rng(7002);
        const Topology t = testsupport::random_tree(rng, 6);
        const Eigen::VectorXd xi = left_null_vector(build_laplacian(t));
        CHECK(xi(0) == doctest::Approx(1.0).epsilon(1e-12));
        for (int i = 1; i < 6; ++i) CHECK(std::abs(xi(i)) < 1e-12);
    }
    SUBCASE("symmetric pair splits evenly") {
        Topology t(2, {{0, 1, 0.4}, {1, 0, 0.4}}, {});
        const Eigen::VectorXd xi = left_null_vector(build_laplacian(t));
        CHECK(xi(0) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(xi(1) == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("loop with leader still points at the leader") {
        const Topology t = default_weights(make_two_client_loop(), 0.7);
        const Eigen::VectorXd xi = left_null_vector(build_laplacian(t));
        CHECK(xi(0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(xi(1)) < 1e-12);
        CHECK(std::abs(xi(2)) < 1e-12);
    }
    SUBCASE("satisfies both defining equations on random connected graphs") {
        Rng rng(7003);
        for (int trial = 0; trial < 40; ++trial) {
            const int n = testsupport::uniform_int(rng, 2, 12);
            const Topology t = testsupport::random_family(rng, n);
            const Eigen::MatrixXd l = build_laplacian(t);
            const Eigen::VectorXd xi = left_null_vector(l);
            CHECK((xi.transpose() * l).lpNorm<Eigen::Infinity>() < 1e-10);
            CHECK(xi.sum() == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("disconnected graphs are refused") {
        Topology t(4, {{1, 0, 1.0}, {3, 2, 1.0}}, {0, 2});
        CHECK_THROWS_AS(left_null_vector(build_laplacian(t)),
                        DisconnectedGraphError);
    }
}

TEST_CASE("gershgorin bound") {
    SUBCASE("star") {
        const Topology t = default_weights(make_star(5), 0.7);
        CHECK(gershgorin_bound(build_laplacian(t)) ==
              doctest::Approx(1.4).epsilon(1e-15));
    }
    SUBCASE("loop: bound 1.4 vs true top eigenvalue 1.05") {
        const Topology t = default_weights(make_two_client_loop(), 0.7);
        const Eigen::MatrixXd l = build_laplacian(t);
        CHECK(gershgorin_bound(l) == doctest::Approx(1.4).epsilon(1e-15));
        const Spectrum s = spectrum(l);
        CHECK(s.max_real() == doctest::Approx(1.05).epsilon(1e-12));
        CHECK(gershgorin_bound(l) >= s.max_real());
    }
    SUBCASE("single free node") {
        const Topology t = make_star(1);
        CHECK(gershgorin_bound(build_laplacian(t)) == 0.0);
    }
    SUBCASE("dominates every real eigenvalue on random instances") {
        Rng rng(7004);
        for (int trial = 0; trial < 30; ++trial) {
            const Topology t =
                testsupport::random_family(rng, testsupport::uniform_int(rng, 2, 8));
            const Eigen::MatrixXd l = build_laplacian(t);
            CHECK(gershgorin_bound(l) >= spectrum(l).max_real() - 1e-12);
        }
    }
}

TEST_CASE("spectrum") {
    SUBCASE("star eigenvalues are 0 and c") {
        const Topology t = default_weights(make_star(5), 0.7);
        const Spectrum s = spectrum(build_laplacian(t));
        CHECK(s.all_real);
        CHECK(std::abs(s.values.front()) < 1e-12);
        for (size_t i = 1; i < s.values.size(); ++i) {
            CHECK(s.values[i].real() == doctest::Approx(0.7).epsilon(1e-12));
        }
    }
    SUBCASE("loop eigenvalues are 0, c/2 and 1.5c") {
        const Topology t = default_weights(make_two_client_loop(), 0.7);
        const Spectrum s = spectrum(build_laplacian(t));
        REQUIRE(s.values.size() == 3u);
        CHECK(std::abs(s.values[0]) < 1e-12);
        CHECK(s.values[1].real() == doctest::Approx(0.35).epsilon(1e-12));
        CHECK(s.values[2].real() == doctest::Approx(1.05).epsilon(1e-12));
    }
    SUBCASE("diagonal matrices give back their diagonal") {
        Eigen::MatrixXd d = Eigen::VectorXd::LinSpaced(4, -1.0, 2.0).asDiagonal();
        const Spectrum s = spectrum(d);
        CHECK(s.all_real);
        for (int i = 0; i < 4; ++i) {
            CHECK(s.values[i].real() ==
                  doctest::Approx(d(i, i)).epsilon(1e-12));
        }
    }
    SUBCASE("agrees with the characteristic-polynomial companion oracle") {
        Rng rng(7005);
        for (int trial = 0; trial < 40; ++trial) {
            Eigen::MatrixXd m(4, 4);
            for (int i = 0; i < 4; ++i) {
                for (int j = 0; j < 4; ++j) {
                    m(i, j) = testsupport::uniform(rng, -1.0, 1.0);
                }
            }
            const auto direct = spectrum(m).values;
            const auto via_companion = companion_eigenvalues(char_poly(m));
            for (size_t i = 0; i < direct.size(); ++i) {
                double best = 1e9;
                for (const auto& v : via_companion) {
                    best = std::min(best, std::abs(v - direct[i]));
                }
                CHECK(best < 1e-7);
            }
        }
    }
    SUBCASE("the three graph families have real spectra") {
        Rng rng(7006);
        for (int trial = 0; trial < 60; ++trial) {
            const int n = testsupport::uniform_int(rng, 2, 8);
            const Topology t = testsupport::random_family(rng, n);
            CHECK(spectrum(build_laplacian(t)).all_real);
        }
    }
}

TEST_CASE("connectivity check reports both interpretations") {
    SUBCASE("connected loop") {
        const Topology t = default_weights(make_two_client_loop(), 0.7);
        const ConnectivityReport report = check_connectivity(t);
        CHECK(report.connected());
        CHECK(report.zero_eigenvalue_simple);
        CHECK(report.single_closed_component);
    }
    SUBCASE("two separate stars") {
        Topology t(4, {{1, 0, 1.0}, {3, 2, 1.0}}, {0, 2});
        const ConnectivityReport report = check_connectivity(t);
        CHECK(!report.connected());
        CHECK(report.zero_eigenvalue_multiplicity == 2);
        CHECK(!report.single_closed_component);
    }
}

}  // TEST_SUITE
