#include "skewless/topology.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace skewless {

Topology::Topology(int node_count, std::vector<Edge> edges,
                   std::vector<int> leaders)
    : n_(node_count), edges_(std::move(edges)), leaders_(std::move(leaders)) {
    std::sort(leaders_.begin(), leaders_.end());
    validate();
}

bool Topology::is_leader(int node) const {
    return std::binary_search(leaders_.begin(), leaders_.end(), node);
}

int Topology::out_degree(int node) const {
    int count = 0;
    for (const auto& e : edges_) {
        if (e.from == node) ++count;
    }
    return count;
}

void Topology::validate() const {
    if (n_ <= 0) {
        throw std::invalid_argument("topology needs at least one node");
    }
    std::set<std::pair<int, int>> seen;
    for (const auto& e : edges_) {
        if (e.from < 0 || e.from >= n_ || e.to < 0 || e.to >= n_) {
            std::ostringstream msg;
            msg << "edge (" << e.from << "," << e.to << ") out of range";
            throw std::invalid_argument(msg.str());
        }
        if (e.from == e.to) {
            throw std::invalid_argument("self-loops are not allowed");
        }
        if (!(e.alpha > 0.0) || !std::isfinite(e.alpha)) {
            throw std::invalid_argument("edge weights must be positive");
        }
        if (!seen.insert({e.from, e.to}).second) {
            std::ostringstream msg;
            msg << "duplicate edge (" << e.from << "," << e.to << ")";
            throw std::invalid_argument(msg.str());
        }
    }
    for (int leader : leaders_) {
        if (leader < 0 || leader >= n_) {
            throw std::invalid_argument("leader id out of range");
        }
        if (out_degree(leader) != 0) {
            std::ostringstream msg;
            msg << "leader " << leader << " must not have outgoing edges";
            throw std::invalid_argument(msg.str());
        }
    }
}

Topology make_star(int n_total) {
    if (n_total < 1) throw std::invalid_argument("star needs at least one node");
    std::vector<Edge> edges;
    for (int i = 1; i < n_total; ++i) edges.push_back({i, 0, 1.0});
    return Topology(n_total, std::move(edges), {0});
}

Topology make_two_client_loop() {
    std::vector<Edge> edges{{1, 0, 1.0}, {2, 0, 1.0}, {1, 2, 1.0}, {2, 1, 1.0}};
    return Topology(3, std::move(edges), {0});
}

Topology make_chain(int n_total) {
    if (n_total < 1) throw std::invalid_argument("chain needs at least one node");
    std::vector<Edge> edges;
    for (int i = 1; i < n_total; ++i) edges.push_back({i, i - 1, 1.0});
    return Topology(n_total, std::move(edges), {0});
}

Topology make_wheel(int n_clients, int k) {
    if (n_clients < 1) {
        throw std::invalid_argument("wheel needs at least one client");
    }
    if (k < 0 || 2 * k > n_clients - 1) {
        std::ostringstream msg;
        msg << "ring degree k=" << k << " out of range for " << n_clients
            << " clients";
        throw std::invalid_argument(msg.str());
    }
    std::vector<Edge> edges;
    for (int c = 0; c < n_clients; ++c) {
        int node = 1 + c;
        edges.push_back({node, 0, 1.0});
        for (int d = 1; d <= k; ++d) {
            int fwd = 1 + (c + d) % n_clients;
            int bwd = 1 + (c - d + n_clients) % n_clients;
            edges.push_back({node, fwd, 1.0});
            if (bwd != fwd) edges.push_back({node, bwd, 1.0});
        }
    }
    return Topology(1 + n_clients, std::move(edges), {0});
}

Topology default_weights(const Topology& t, double c) {
    if (!(c > 0.0)) throw std::invalid_argument("commit factor must be positive");
    std::vector<int> degree(t.node_count(), 0);
    for (const auto& e : t.edges()) degree[e.from]++;
    for (int i = 0; i < t.node_count(); ++i) {
        if (degree[i] == 0 && !t.is_leader(i)) {
            std::ostringstream msg;
            msg << "node " << i << " has no neighbors and is not a leader";
            throw std::invalid_argument(msg.str());
        }
    }
    std::vector<Edge> edges = t.edges();
    for (auto& e : edges) e.alpha = c / degree[e.from];
    return Topology(t.node_count(), std::move(edges), t.leaders());
}

Eigen::MatrixXd build_laplacian(const Topology& t) {
    const int n = t.node_count();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : t.edges()) {
        l(e.from, e.to) -= e.alpha;
        l(e.from, e.from) += e.alpha;
    }
    return l;
}

double gershgorin_bound(const Eigen::MatrixXd& laplacian) {
    if (laplacian.rows() == 0) return 0.0;
    return 2.0 * laplacian.diagonal().maxCoeff();
}

double Spectrum::max_real() const {
    double best = 0.0;
    bool first = true;
    for (const auto& v : values) {
        if (first || v.real() > best) best = v.real();
        first = false;
    }
    return best;
}

Spectrum spectrum(const Eigen::MatrixXd& m) {
    Spectrum result;
    if (m.rows() == 0) return result;
    Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("eigenvalue iteration failed to converge");
    }
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    const double imag_tol = 1e-9 * scale;
    for (int i = 0; i < m.rows(); ++i) {
        std::complex<double> v = solver.eigenvalues()(i);
        if (std::abs(v.imag()) > imag_tol) result.all_real = false;
        result.values.push_back(v);
    }
    std::sort(result.values.begin(), result.values.end(),
              [](const std::complex<double>& a, const std::complex<double>& b) {
                  if (a.real() != b.real()) return a.real() < b.real();
                  return a.imag() < b.imag();
              });
    return result;
}

namespace {

// Count of eigenvalues of `m` within `radius` of zero.
int near_zero_count(const Eigen::MatrixXd& m, double radius) {
    int count = 0;
    for (const auto& v : spectrum(m).values) {
        if (std::abs(v) <= radius) ++count;
    }
    return count;
}

// Newton polish of an approximate left null vector: solve the stacked
// system [L^T; 1^T] xi = [0; 1] in the least-squares sense.
Eigen::VectorXd polish_null_vector(const Eigen::MatrixXd& laplacian,
                                   Eigen::VectorXd xi) {
    const int n = static_cast<int>(laplacian.rows());
    Eigen::MatrixXd stacked(n + 1, n);
    stacked.topRows(n) = laplacian.transpose();
    stacked.bottomRows(1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    rhs(n) = 1.0;
    for (int iter = 0; iter < 3; ++iter) {
        Eigen::VectorXd residual = rhs - stacked * xi;
        Eigen::VectorXd delta = stacked.colPivHouseholderQr().solve(residual);
        xi += delta;
        if (delta.lpNorm<Eigen::Infinity>() < 1e-15) break;
    }
    return xi;
}

}  // namespace

Eigen::VectorXd left_null_vector(const Eigen::MatrixXd& laplacian) {
    const int n = static_cast<int>(laplacian.rows());
    if (n == 0) throw std::invalid_argument("empty Laplacian");
    const double scale = std::max(1.0, laplacian.cwiseAbs().maxCoeff());
    if (n == 1) return Eigen::VectorXd::Ones(1);

    if (near_zero_count(laplacian, 1e-9 * scale) != 1) {
        throw DisconnectedGraphError(
            "disconnected graph: zero eigenvalue of the Laplacian is not simple");
    }

    Eigen::VectorXd xi = polish_null_vector(laplacian, Eigen::VectorXd::Ones(n) / n);
    const double residual = (xi.transpose() * laplacian).lpNorm<Eigen::Infinity>();
    if (!(residual < 1e-10)) {
        throw std::runtime_error("left null vector residual above tolerance");
    }
    return xi;
}

ConnectivityReport check_connectivity(const Topology& t) {
    ConnectivityReport report;
    const Eigen::MatrixXd l = build_laplacian(t);
    const double scale = std::max(1.0, l.cwiseAbs().maxCoeff());
    report.zero_eigenvalue_multiplicity = near_zero_count(l, 1e-9 * scale);
    report.zero_eigenvalue_simple = report.zero_eigenvalue_multiplicity == 1;

    // Structural reading: exactly one strongly connected component without
    // outgoing edges (Tarjan over the measurement digraph).
    const int n = t.node_count();
    std::vector<std::vector<int>> adj(n);
    for (const auto& e : t.edges()) adj[e.from].push_back(e.to);

    std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<bool> on_stack(n, false);
    std::vector<int> stack;
    int next_index = 0, comp_count = 0;

    // Iterative Tarjan to keep recursion depth bounded.
    struct Frame { int v; size_t child; };
    for (int start = 0; start < n; ++start) {
        if (index[start] != -1) continue;
        std::vector<Frame> frames{{start, 0}};
        index[start] = low[start] = next_index++;
        stack.push_back(start);
        on_stack[start] = true;
        while (!frames.empty()) {
            Frame& f = frames.back();
            if (f.child < adj[f.v].size()) {
                int w = adj[f.v][f.child++];
                if (index[w] == -1) {
                    index[w] = low[w] = next_index++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    frames.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
            } else {
                if (low[f.v] == index[f.v]) {
                    while (true) {
                        int w = stack.back();
                        stack.pop_back();
                        on_stack[w] = false;
                        comp[w] = comp_count;
                        if (w == f.v) break;
                    }
                    ++comp_count;
                }
                int v = f.v;
                frames.pop_back();
                if (!frames.empty()) {
                    low[frames.back().v] = std::min(low[frames.back().v], low[v]);
                }
            }
        }
    }

    std::vector<bool> closed(comp_count, true);
    for (const auto& e : t.edges()) {
        if (comp[e.from] != comp[e.to]) closed[comp[e.from]] = false;
    }
    report.single_closed_component =
        std::count(closed.begin(), closed.end(), true) == 1;
    return report;
}

}  // namespace skewless
