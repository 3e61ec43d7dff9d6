#pragma once

#include <array>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "skewless/clock.hpp"
#include "skewless/topology.hpp"

namespace skewless {

/// The 3n x 3n one-step transition matrix of the networked update, acting
/// on z = [x; s; y]:
///
///   [ I      tau*R   0        ]
///   [ -k1*L  I       -k2*I    ]
///   [ -p*L   0       (1-p)*I  ]
struct SystemMatrix {
    Eigen::MatrixXd a;
    int n = 0;

    /// n x n sub-block, row/col in {0,1,2}.
    Eigen::MatrixXd block(int row, int col) const;
};

SystemMatrix assemble_system_matrix(const Eigen::MatrixXd& laplacian,
                                    const Eigen::VectorXd& rates,
                                    const ProtocolParams& params);

/// The cubic factor of det(lambda*I - A) attached to one eigenvalue
/// nu = mu(tau*L*R):
///
///   g(lambda; nu) = (lambda-1)^2 (lambda-1+p)
///                 + [(lambda-1)*kappa1 + p*(kappa1-kappa2)] * nu
std::complex<double> characteristic_factor(std::complex<double> lambda,
                                           std::complex<double> nu,
                                           const ProtocolParams& params);

/// The three roots of g(.; nu), found via the companion matrix and polished
/// by Newton steps so that |g(root)| stays below 1e-9 at coefficient scale.
std::array<std::complex<double>, 3> companion_roots(std::complex<double> nu,
                                                    const ProtocolParams& params);

struct FactorizationCheck {
    std::vector<std::complex<double>> eigenvalues_of_a;
    std::vector<std::complex<double>> factor_roots;
    double match_residual = 0.0;  // worst pairing distance
    int multiplicity_of_one = 0;  // eigenvalues of A within 1e-7 of 1
};

/// Verifies that eig(A) equals the multiset of roots of the cubic factors
/// over all nu_l = mu_l(tau*L*R), and counts the multiplicity of the
/// eigenvalue 1 (exactly 2 iff connected, kappa1 != kappa2 and p > 0).
FactorizationCheck factorization_check(const Eigen::MatrixXd& laplacian,
                                       const Eigen::VectorXd& rates,
                                       const ProtocolParams& params);

/// Right chain (zeta1, zeta2) and eigenvector zeta3, left chain
/// (eta2, eta1) and eigenvector eta3 of the eigenvalues 1 and 1-p,
/// biorthonormal (eta_l' * zeta_h = delta_lh). gamma is the xi-weighted
/// harmonic mean of the rates.
struct JordanChain {
    Eigen::VectorXd zeta1, zeta2, zeta3;
    Eigen::VectorXd eta1, eta2, eta3;
    double gamma = 1.0;
    Eigen::VectorXd xi;
};

/// Requires a connected graph, kappa1 != kappa2 and p > 0 (throws
/// std::invalid_argument otherwise). xi must be the normalized left null
/// vector of the Laplacian.
JordanChain jordan_chain(const Eigen::MatrixXd& laplacian,
                         const Eigen::VectorXd& rates,
                         const ProtocolParams& params,
                         const Eigen::VectorXd& xi);

/// The synchronized ramp x_i(t_k) -> r_star*(t_k - t_0) + x_star predicted
/// from the step-0 states.
struct FixedPoint {
    double x_star = 0.0;
    double r_star = 1.0;
};

FixedPoint predict_fixed_point(const Eigen::VectorXd& x0,
                               const Eigen::VectorXd& s0,
                               const Eigen::VectorXd& y0,
                               const Eigen::VectorXd& rates,
                               const Eigen::VectorXd& xi, double gamma,
                               const ProtocolParams& params);

/// The three closed-form parameter conditions:
///   p_ok:    0 < p < 2
///   gain_ok: 0 < kappa1-kappa2 < 2*kappa1/(3p)
///   tau_ok:  tau < p*(kappa2 - p*dk) / (mu_max*(kappa1 - p*dk)^2)
/// tau_bound carries the right-hand side of the last inequality.
struct ParameterConditions {
    bool p_ok = false;
    bool gain_ok = false;
    bool tau_ok = false;
    double tau_bound = 0.0;
};

/// mu_max is the largest eigenvalue of L*R, which must be real. Throws
/// std::invalid_argument when mu_max <= 0 (a graph with edges always has a
/// positive one).
ParameterConditions check_parameter_conditions(const ProtocolParams& params,
                                               double mu_max);

/// Poll-interval bound valid for every connected real-spectrum graph whose
/// per-node weight sums stay below alpha_max and whose rates stay below
/// r_max_hat:
///
///   tau < p*(kappa2 - dk*p) / (2*alpha_max*r_max_hat*(kappa1 - dk*p)^2)
///
/// Throws std::domain_error when the gain conditions make the bound
/// meaningless (dk <= 0 or a non-positive factor).
double topology_free_tau_bound(const ProtocolParams& params, double alpha_max,
                               double r_max_hat);

/// Closed-form Schur test for the cubic factor at real nu > 0, using the
/// Moebius map lambda = (s+1)/(s-1) and the Hermite-Biehler interlacing
/// conditions; no root finding. Returns false immediately when
/// kappa1 <= kappa2 or p is outside (0, 2).
bool hermite_biehler_schur_test(double nu, const ProtocolParams& params);

enum class Verdict { Stable, Unstable, NotCovered };

const char* to_string(Verdict v);

/// Aggregated analytic verdict for one configuration.
struct StabilityReport {
    bool connected = false;
    int multiplicity_of_one = 0;
    /// max |mu(A)| over eigenvalues away from 1 (radius 1e-7).
    double spectral_margin = 0.0;
    bool p_ok = false;
    bool gain_ok = false;
    bool tau_ok = false;
    double tau_bound = 0.0;
    double tau_bound_topology_free = 0.0;
    bool all_real_spectrum = false;
    double mu_max = 0.0;  // largest eigenvalue of L*R (real part)
    bool spectrally_stable = false;
    /// Whether the closed-form conditions and the spectral radius agree
    /// (only meaningful when the spectrum is real).
    bool conditions_match_spectrum = true;
    Verdict verdict = Verdict::Unstable;
};

/// Runs connectivity, the factorization check, the parameter conditions
/// (when the Laplacian spectrum is real) and the direct spectral-radius
/// test on A, and cross-checks the two verdicts. The spectral test is
/// authoritative for Stable/Unstable; NotCovered is reported when the
/// spectrum is complex and the closed-form conditions do not apply.
StabilityReport full_stability_report(const Topology& topology,
                                      const Eigen::VectorXd& rates,
                                      const ProtocolParams& params);

}  // namespace skewless
