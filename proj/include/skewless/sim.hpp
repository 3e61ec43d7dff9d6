#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "skewless/clock.hpp"
#include "skewless/topology.hpp"

namespace skewless {

/// Measurement noise model. UniformPingPong draws one value per link
/// direction uniformly from {0, granularity, ..., jitter_max} and perturbs
/// the measured offset by (eta_fwd - eta_bwd)/2, the two-way midpoint
/// estimate.
struct JitterModel {
    enum class Kind { None, UniformPingPong };

    Kind kind = Kind::None;
    double jitter_max = 0.0;
    double granularity = 0.0;
    /// Edges the noise applies to; empty means every edge.
    std::vector<std::pair<int, int>> edges;

    bool applies_to(int from, int to) const;
    /// Number of points in the per-direction support.
    int support_points() const;
    /// Standard deviation of the uniform distribution over the full
    /// two-way span {-jitter_max, ..., +jitter_max}: sqrt(J*(J+g)/3).
    double equivalent_uniform_std() const;
    /// Standard deviation of the midpoint perturbation (eta_f - eta_b)/2.
    double midpoint_noise_std() const;
    void validate() const;
};

enum class Scheduling { Synchronous, PhaseShifted };

/// Initial condition and update rule of one node. When `skewless` is false
/// the node runs the given baseline scheme instead.
struct NodeConfig {
    int id = 0;
    double r = 1.0;
    double x0 = 0.0;
    double s0 = 1.0;
    double y0 = 0.0;
    bool skewless = true;
    BaselineScheme baseline{};
    double phase = 0.0;  // update offset within [0, tau), PhaseShifted only
};

/// Scheduled mid-run reconfiguration: from `step` on, measurements follow
/// the new topology.
struct TopologyEvent {
    int step = 0;
    Topology topology;
};

struct SimulationConfig {
    Topology topology;
    ProtocolParams params;
    std::vector<NodeConfig> nodes;
    JitterModel jitter;
    int steps = 1;
    std::uint64_t seed = 0;
    Scheduling scheduling = Scheduling::Synchronous;
    std::vector<TopologyEvent> events;
    double divergence_threshold = 1e3;

    void validate() const;
};

enum class RunStatus { Completed, Diverged };

/// Recorded run: row 0 is the initial state, row k the state after step k.
/// Offsets are taken against the reference node (the first leader of the
/// initial topology, else node 0).
struct Trace {
    int nodes = 0;
    double tau = 0.0;
    int reference_index = 0;
    std::vector<int> node_ids;
    int rows = 0;
    std::vector<double> x;  // row-major rows x nodes, absolute seconds
    std::vector<double> s;
    std::vector<double> y;
    /// Realized measurement perturbations per step, aligned with the edge
    /// order that was active at that step.
    std::vector<std::vector<double>> noises;
    RunStatus status = RunStatus::Completed;
    int diverged_at_step = -1;

    double at_x(int row, int node) const { return x[row * nodes + node]; }
    double at_s(int row, int node) const { return s[row * nodes + node]; }
    double at_y(int row, int node) const { return y[row * nodes + node]; }
    double offset(int row, int node) const {
        return at_x(row, node) - at_x(row, reference_index);
    }
    /// max_i x_i - min_i x_i at one row.
    double spread(int row) const;
    /// Sign changes of the given node's offset over [first_row, last_row].
    int offset_sign_changes(int node, int first_row, int last_row) const;
};

/// One measurement sweep: returns the measured offsets aligned with
/// topology.edges(); noise_out (optional) receives the realized
/// perturbation of each edge.
std::vector<double> measure_offsets(const std::vector<ClockState>& states,
                                    const Topology& topology,
                                    const JitterModel& jitter,
                                    std::mt19937_64& rng,
                                    std::vector<double>* noise_out = nullptr);

/// Stepping engine behind run(); exposed so single steps can be driven and
/// inspected directly.
class Simulation {
  public:
    explicit Simulation(SimulationConfig config);

    /// Advances every node by one poll interval from a common pre-step
    /// snapshot. Returns false once the divergence threshold is crossed.
    bool step();

    const std::vector<ClockState>& states() const { return states_; }
    const Topology& active_topology() const { return topology_; }
    int current_step() const { return step_index_; }
    const std::vector<double>& last_noises() const { return last_noises_; }

  private:
    void apply_events();

    SimulationConfig config_;
    Topology topology_;
    std::vector<ClockState> states_;
    std::vector<double> prev_wo_;  // one-older measurement, frequency errors
    std::vector<double> prev_x_;
    std::vector<bool> has_prev_;
    std::vector<double> pend_wo_;  // measurement awaiting its apply instant
    std::vector<double> pend_x_;   // (PhaseShifted bookkeeping)
    std::vector<bool> pend_valid_;
    std::vector<double> last_noises_;
    std::mt19937_64 rng_;
    int step_index_ = 0;
};

/// Runs the configured number of steps (or stops early on divergence) and
/// returns the recorded trace. Deterministic for a fixed seed.
Trace run(const SimulationConfig& config);

/// Jitter-filtering experiment: 9 clients around a leader, each linked to
/// the leader (noisy) and to 2k ring neighbors (noise-free), default
/// parameter profile with tau = 0.5 s.
Trace run_experiment_two(int k, double jitter_max, std::uint64_t seed);
SimulationConfig experiment_two_config(int k, double jitter_max,
                                       std::uint64_t seed);

/// CSV with header step,time_s,node,offset_to_leader_s,s,y; one row per
/// (step, node), 17 significant digits.
std::string trace_csv(const Trace& trace);

}  // namespace skewless
