#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <vector>

namespace skewless {

/// Directed measurement edge: `from` measures its offset against `to`,
/// weighted by alpha > 0.
struct Edge {
    int from = 0;
    int to = 0;
    double alpha = 1.0;
};

/// Thrown when an operation requires a simple zero Laplacian eigenvalue and
/// the graph does not provide one.
struct DisconnectedGraphError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Weighted directed measurement graph over nodes 0..n-1. Leaders are the
/// declared reference nodes; a leader must have no outgoing edges.
class Topology {
  public:
    Topology() = default;
    Topology(int node_count, std::vector<Edge> edges, std::vector<int> leaders);

    int node_count() const { return n_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<int>& leaders() const { return leaders_; }
    bool is_leader(int node) const;
    int out_degree(int node) const;

    /// Throws std::invalid_argument on self-loops, non-positive weights,
    /// out-of-range endpoints, or a leader with outgoing edges.
    void validate() const;

  private:
    int n_ = 0;
    std::vector<Edge> edges_;
    std::vector<int> leaders_;
};

/// Leader 0 plus n_total-1 clients, each measuring only the leader.
Topology make_star(int n_total);

/// Three nodes: leader 0, clients 1 and 2 each measuring the leader and
/// each other (four edges).
Topology make_two_client_loop();

/// Directed path: node i measures node i-1; node 0 is the leader.
Topology make_chain(int n_total);

/// Leader 0 plus n_clients clients. Every client measures the leader and
/// its k nearest ring neighbors on each side (2k bidirectional links).
/// Requires 0 <= k <= (n_clients-1)/2.
Topology make_wheel(int n_clients, int k);

/// Returns a copy with every non-leader's edges reweighted to c/|N_i| so
/// each non-leader's weights sum to c. Throws if a non-leader has no edges.
Topology default_weights(const Topology& t, double c);

/// Dense Laplacian: L_ii = sum_j alpha_ij, L_ij = -alpha_ij on the edges.
/// Leader rows are identically zero.
Eigen::MatrixXd build_laplacian(const Topology& t);

/// Unique left null vector of L normalized so its entries sum to 1,
/// computed to residual ||xi^T L||_inf below 1e-10. Throws
/// DisconnectedGraphError when the zero eigenvalue is not simple.
Eigen::VectorXd left_null_vector(const Eigen::MatrixXd& laplacian);

/// 2 * max_i L_ii; upper bound for every real Laplacian eigenvalue.
double gershgorin_bound(const Eigen::MatrixXd& laplacian);

/// Eigenvalues of a dense real matrix, sorted by (real, imag), with a flag
/// telling whether the whole spectrum is real within 1e-9 * ||M||.
struct Spectrum {
    std::vector<std::complex<double>> values;
    bool all_real = true;

    double max_real() const;
};

Spectrum spectrum(const Eigen::MatrixXd& m);

/// Connectivity in the consensus sense: the zero eigenvalue of L is simple.
/// The structural check reports whether exactly one closed strongly
/// connected component exists (the graph-theoretic reading of the same
/// condition); both are reported so a failure can be attributed.
struct ConnectivityReport {
    bool zero_eigenvalue_simple = false;
    bool single_closed_component = false;
    int zero_eigenvalue_multiplicity = 0;

    bool connected() const { return zero_eigenvalue_simple; }
};

ConnectivityReport check_connectivity(const Topology& t);

}  // namespace skewless
