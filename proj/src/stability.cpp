#include "skewless/stability.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace skewless {

namespace {

constexpr double kOneRadius = 1e-7;  // multiplicity counting radius around 1

Eigen::MatrixXd as_rate_matrix(const Eigen::VectorXd& rates) {
    for (int i = 0; i < rates.size(); ++i) {
        if (!(rates(i) > 0.0) || !std::isfinite(rates(i))) {
            throw std::invalid_argument("rates must be positive and finite");
        }
    }
    return rates.asDiagonal();
}

std::vector<std::complex<double>> matrix_eigenvalues(const Eigen::MatrixXd& m) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("eigenvalue iteration failed to converge");
    }
    std::vector<std::complex<double>> values(m.rows());
    for (int i = 0; i < m.rows(); ++i) values[i] = solver.eigenvalues()(i);
    return values;
}

// Worst pairing distance of a greedy closest-first multiset match.
double greedy_match_residual(std::vector<std::complex<double>> a,
                             std::vector<std::complex<double>> b) {
    double worst = 0.0;
    while (!a.empty()) {
        size_t best_i = 0, best_j = 0;
        double best = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < a.size(); ++i) {
            for (size_t j = 0; j < b.size(); ++j) {
                double d = std::abs(a[i] - b[j]);
                if (d < best) {
                    best = d;
                    best_i = i;
                    best_j = j;
                }
            }
        }
        worst = std::max(worst, best);
        a.erase(a.begin() + best_i);
        b.erase(b.begin() + best_j);
    }
    return worst;
}

}  // namespace

Eigen::MatrixXd SystemMatrix::block(int row, int col) const {
    return a.block(row * n, col * n, n, n);
}

SystemMatrix assemble_system_matrix(const Eigen::MatrixXd& laplacian,
                                    const Eigen::VectorXd& rates,
                                    const ProtocolParams& params) {
    const int n = static_cast<int>(laplacian.rows());
    if (laplacian.cols() != n || rates.size() != n) {
        throw std::invalid_argument("laplacian and rate dimensions disagree");
    }
    params.validate();
    const Eigen::MatrixXd r = as_rate_matrix(rates);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);

    SystemMatrix sys;
    sys.n = n;
    sys.a = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    sys.a.block(0, 0, n, n) = id;
    sys.a.block(0, n, n, n) = params.tau * r;
    sys.a.block(n, 0, n, n) = -params.kappa1 * laplacian;
    sys.a.block(n, n, n, n) = id;
    sys.a.block(n, 2 * n, n, n) = -params.kappa2 * id;
    sys.a.block(2 * n, 0, n, n) = -params.p * laplacian;
    sys.a.block(2 * n, 2 * n, n, n) = (1.0 - params.p) * id;
    return sys;
}

std::complex<double> characteristic_factor(std::complex<double> lambda,
                                           std::complex<double> nu,
                                           const ProtocolParams& params) {
    const std::complex<double> lm1 = lambda - 1.0;
    return lm1 * lm1 * (lm1 + params.p) +
           (lm1 * params.kappa1 + params.p * params.delta_kappa()) * nu;
}

std::array<std::complex<double>, 3> companion_roots(std::complex<double> nu,
                                                    const ProtocolParams& params) {
    using C = std::complex<double>;
    const double p = params.p;
    const double k1 = params.kappa1;
    const double dk = params.delta_kappa();
    if (nu == C(0.0)) {
        // The factor degenerates to (lambda-1)^2 (lambda-1+p).
        return {C(1.0), C(1.0), C(1.0 - p)};
    }
    // Monic expansion: lambda^3 + c2 lambda^2 + c1 lambda + c0.
    const C c2 = C(p - 3.0);
    const C c1 = C(3.0 - 2.0 * p) + k1 * nu;
    const C c0 = C(p - 1.0) + (p * dk - k1) * nu;

    Eigen::Matrix3cd companion = Eigen::Matrix3cd::Zero();
    companion(1, 0) = 1.0;
    companion(2, 1) = 1.0;
    companion(0, 2) = -c0;
    companion(1, 2) = -c1;
    companion(2, 2) = -c2;
    Eigen::ComplexEigenSolver<Eigen::Matrix3cd> solver(companion, false);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("cubic companion eigensolve failed");
    }

    std::array<C, 3> roots;
    for (int i = 0; i < 3; ++i) {
        C x = solver.eigenvalues()(i);
        // Newton polish; a nearly-double root stalls harmlessly.
        for (int iter = 0; iter < 3; ++iter) {
            C value = ((x + c2) * x + c1) * x + c0;
            C deriv = (3.0 * x + 2.0 * c2) * x + c1;
            if (std::abs(deriv) < 1e-14) break;
            C next = x - value / deriv;
            if (std::abs(next - x) < 1e-16 * std::max(1.0, std::abs(x))) {
                x = next;
                break;
            }
            x = next;
        }
        roots[i] = x;
    }
    return roots;
}

FactorizationCheck factorization_check(const Eigen::MatrixXd& laplacian,
                                       const Eigen::VectorXd& rates,
                                       const ProtocolParams& params) {
    const SystemMatrix sys = assemble_system_matrix(laplacian, rates, params);
    FactorizationCheck check;
    check.eigenvalues_of_a = matrix_eigenvalues(sys.a);

    const Eigen::MatrixXd scaled =
        params.tau * laplacian * as_rate_matrix(rates);
    // The zero eigenvalue of tau*L*R is structural; snap the solver's fuzz
    // to an exact zero so the degenerate factor is solved analytically
    // (a double root amplifies an eigenvalue error by a square root).
    const double zero_tol = 1e-9 * std::max(1.0, scaled.cwiseAbs().maxCoeff());
    for (std::complex<double> nu : matrix_eigenvalues(scaled)) {
        if (std::abs(nu) < zero_tol) nu = 0.0;
        for (const auto& root : companion_roots(nu, params)) {
            check.factor_roots.push_back(root);
        }
    }
    check.match_residual =
        greedy_match_residual(check.eigenvalues_of_a, check.factor_roots);
    for (const auto& mu : check.eigenvalues_of_a) {
        if (std::abs(mu - 1.0) <= kOneRadius) ++check.multiplicity_of_one;
    }
    return check;
}

JordanChain jordan_chain(const Eigen::MatrixXd& laplacian,
                         const Eigen::VectorXd& rates,
                         const ProtocolParams& params,
                         const Eigen::VectorXd& xi) {
    const int n = static_cast<int>(laplacian.rows());
    if (xi.size() != n || rates.size() != n) {
        throw std::invalid_argument("dimension mismatch");
    }
    if (params.kappa1 == params.kappa2) {
        throw std::invalid_argument("kappa1 must differ from kappa2");
    }
    if (!(params.p > 0.0)) {
        throw std::invalid_argument("p must be positive");
    }
    const double xi_l_residual =
        (xi.transpose() * laplacian).lpNorm<Eigen::Infinity>();
    if (!(xi_l_residual < 1e-8)) {
        throw std::invalid_argument("xi is not a left null vector of L");
    }

    const double tau = params.tau;
    const double k2 = params.kappa2;
    const double p = params.p;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd r_inv_ones = rates.cwiseInverse();
    const Eigen::VectorXd r_inv_xi = xi.cwiseQuotient(rates);

    JordanChain chain;
    chain.xi = xi;
    chain.gamma = 1.0 / r_inv_xi.sum();

    auto stack = [n](const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                     const Eigen::VectorXd& c) {
        Eigen::VectorXd v(3 * n);
        v << a, b, c;
        return v;
    };
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);

    chain.zeta1 = stack(ones, zero, zero);
    chain.zeta2 = stack(ones, r_inv_ones / tau, zero);
    chain.zeta3 =
        stack(-(tau * k2 / (p * p)) * ones, (k2 / p) * r_inv_ones, r_inv_ones);

    const double g = chain.gamma;
    chain.eta1 = stack(g * r_inv_xi, -g * tau * xi,
                       g * tau * k2 * (1.0 / p + 1.0 / (p * p)) * xi);
    chain.eta2 = stack(zero, g * tau * xi, -(g * tau * k2 / p) * xi);
    chain.eta3 = stack(zero, zero, g * xi);
    return chain;
}

FixedPoint predict_fixed_point(const Eigen::VectorXd& x0,
                               const Eigen::VectorXd& s0,
                               const Eigen::VectorXd& y0,
                               const Eigen::VectorXd& rates,
                               const Eigen::VectorXd& xi, double gamma,
                               const ProtocolParams& params) {
    const int n = static_cast<int>(xi.size());
    if (x0.size() != n || s0.size() != n || y0.size() != n ||
        rates.size() != n) {
        throw std::invalid_argument("dimension mismatch");
    }
    const double k2 = params.kappa2;
    const double p = params.p;
    FixedPoint fp;
    fp.x_star = 0.0;
    fp.r_star = 0.0;
    for (int i = 0; i < n; ++i) {
        fp.x_star +=
            xi(i) * (x0(i) / rates(i) + params.tau * k2 / (p * p) * y0(i));
        fp.r_star += xi(i) * (s0(i) - k2 / p * y0(i));
    }
    fp.x_star *= gamma;
    fp.r_star *= gamma;
    return fp;
}

ParameterConditions check_parameter_conditions(const ProtocolParams& params,
                                               double mu_max) {
    if (!std::isfinite(mu_max) || mu_max < 0.0) {
        throw std::invalid_argument("mu_max must be finite and non-negative");
    }
    const double p = params.p;
    const double k1 = params.kappa1;
    const double k2 = params.kappa2;
    const double dk = params.delta_kappa();

    ParameterConditions cond;
    cond.p_ok = std::abs(1.0 - p) < 1.0;
    cond.gain_ok = dk > 0.0 && 2.0 * k1 / (3.0 * p) > dk;

    const double denom_core = k1 - p * dk;
    const double numer = p * (k2 - p * dk);
    if (mu_max == 0.0) {
        cond.tau_bound = std::numeric_limits<double>::infinity();
    } else {
        cond.tau_bound = numer / (mu_max * denom_core * denom_core);
    }
    cond.tau_ok = params.tau < cond.tau_bound;
    return cond;
}

double topology_free_tau_bound(const ProtocolParams& params, double alpha_max,
                               double r_max_hat) {
    const double p = params.p;
    const double k1 = params.kappa1;
    const double k2 = params.kappa2;
    const double dk = params.delta_kappa();
    if (!(alpha_max > 0.0) || !(r_max_hat > 0.0)) {
        throw std::invalid_argument("alpha_max and r_max_hat must be positive");
    }
    const double numer = p * (k2 - dk * p);
    const double core = k1 - dk * p;
    const double denom = 2.0 * alpha_max * r_max_hat * core * core;
    if (!(dk > 0.0) || !(numer > 0.0) || !(denom > 0.0)) {
        throw std::domain_error(
            "gain conditions violated: the poll-interval bound is undefined");
    }
    return numer / denom;
}

bool hermite_biehler_schur_test(double nu, const ProtocolParams& params) {
    if (!(nu > 0.0) || !std::isfinite(nu)) {
        throw std::invalid_argument("nu must be positive");
    }
    const double p = params.p;
    const double k1 = params.kappa1;
    const double dk = params.delta_kappa();
    if (dk <= 0.0) return false;
    if (!(p > 0.0) || !(p < 2.0)) return false;

    // Moebius image P(s) = s^3 + a2 s^2 + a1 s + a0 of the cubic factor.
    const double a2 = 2.0 * k1 / (dk * p) - 3.0;
    if (!(a2 > 0.0)) return false;
    const double a1 = 4.0 / (dk * nu) + 3.0 - 4.0 * k1 / (dk * p);
    const double a0 =
        4.0 * (2.0 - p) / (dk * p * nu) + 2.0 * k1 / (dk * p) - 1.0;

    const double omega_r = a0 / a2;  // squared zero of the real part
    const double omega_i = a1;       // squared nonzero zero of the imaginary part
    return omega_r > 0.0 && omega_r < omega_i;
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Stable:
            return "stable";
        case Verdict::Unstable:
            return "unstable";
        case Verdict::NotCovered:
            return "not-covered";
    }
    return "unknown";
}

StabilityReport full_stability_report(const Topology& topology,
                                      const Eigen::VectorXd& rates,
                                      const ProtocolParams& params) {
    if (rates.size() != topology.node_count()) {
        throw std::invalid_argument("one rate per node is required");
    }
    params.validate();
    StabilityReport report;

    const Eigen::MatrixXd l = build_laplacian(topology);
    report.connected = check_connectivity(topology).connected();

    const Spectrum lr_spectrum = spectrum(l * as_rate_matrix(rates));
    report.all_real_spectrum = lr_spectrum.all_real;
    report.mu_max = lr_spectrum.max_real();
    if (report.mu_max < 0.0 && report.mu_max > -1e-12) report.mu_max = 0.0;

    const FactorizationCheck fact = factorization_check(l, rates, params);
    report.multiplicity_of_one = fact.multiplicity_of_one;
    report.spectral_margin = 0.0;
    for (const auto& mu : fact.eigenvalues_of_a) {
        if (std::abs(mu - 1.0) > kOneRadius) {
            report.spectral_margin = std::max(report.spectral_margin, std::abs(mu));
        }
    }
    report.spectrally_stable =
        report.multiplicity_of_one == 2 && report.spectral_margin < 1.0;

    const bool has_edges = !topology.edges().empty();
    if (report.all_real_spectrum && !(has_edges && report.mu_max <= 0.0)) {
        const ParameterConditions cond =
            check_parameter_conditions(params, report.mu_max);
        report.p_ok = cond.p_ok;
        report.gain_ok = cond.gain_ok;
        report.tau_ok = cond.tau_ok;
        report.tau_bound = cond.tau_bound;
        const bool analytic =
            report.connected && cond.p_ok && cond.gain_ok && cond.tau_ok;
        report.conditions_match_spectrum = analytic == report.spectrally_stable;
    } else {
        report.tau_bound = std::numeric_limits<double>::quiet_NaN();
        report.conditions_match_spectrum = true;  // nothing to compare
    }

    try {
        const double alpha_max =
            has_edges ? l.diagonal().maxCoeff() : 0.0;
        report.tau_bound_topology_free =
            alpha_max > 0.0
                ? topology_free_tau_bound(params, alpha_max, rates.maxCoeff())
                : std::numeric_limits<double>::infinity();
    } catch (const std::domain_error&) {
        report.tau_bound_topology_free = std::numeric_limits<double>::quiet_NaN();
    }

    if (!report.all_real_spectrum) {
        report.verdict = Verdict::NotCovered;
    } else {
        report.verdict =
            report.spectrally_stable ? Verdict::Stable : Verdict::Unstable;
    }
    return report;
}

}  // namespace skewless
