#include "skewless/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "skewless/presets.hpp"

namespace skewless {

bool JitterModel::applies_to(int from, int to) const {
    if (kind == Kind::None) return false;
    if (edges.empty()) return true;
    return std::find(edges.begin(), edges.end(), std::make_pair(from, to)) !=
           edges.end();
}

int JitterModel::support_points() const {
    if (kind == Kind::None || jitter_max == 0.0) return 1;
    return static_cast<int>(std::llround(jitter_max / granularity)) + 1;
}

double JitterModel::equivalent_uniform_std() const {
    if (kind == Kind::None) return 0.0;
    return std::sqrt(jitter_max * (jitter_max + granularity) / 3.0);
}

double JitterModel::midpoint_noise_std() const {
    if (kind == Kind::None) return 0.0;
    return std::sqrt(jitter_max * (jitter_max + 2.0 * granularity) / 24.0);
}

void JitterModel::validate() const {
    if (kind == Kind::None) return;
    if (!(jitter_max >= 0.0) || !std::isfinite(jitter_max)) {
        throw std::invalid_argument("jitter_max must be non-negative");
    }
    if (jitter_max > 0.0) {
        if (!(granularity > 0.0)) {
            throw std::invalid_argument("jitter granularity must be positive");
        }
        const double steps = jitter_max / granularity;
        if (std::abs(steps - std::llround(steps)) > 1e-9 * std::max(1.0, steps)) {
            throw std::invalid_argument(
                "jitter_max must be a multiple of the granularity");
        }
    }
}

void SimulationConfig::validate() const {
    topology.validate();
    params.validate();
    jitter.validate();
    const int n = topology.node_count();
    if (static_cast<int>(nodes.size()) != n) {
        throw std::invalid_argument("one node entry per topology node is required");
    }
    std::vector<int> ids;
    for (const auto& node : nodes) {
        ids.push_back(node.id);
        if (!(node.r > 0.0) || !std::isfinite(node.r)) {
            throw std::invalid_argument("node rates must be positive and finite");
        }
        if (!std::isfinite(node.x0) || !std::isfinite(node.s0) ||
            !std::isfinite(node.y0)) {
            throw std::invalid_argument("node initial state must be finite");
        }
        if (scheduling == Scheduling::PhaseShifted &&
            (node.phase < 0.0 || node.phase >= params.tau)) {
            throw std::invalid_argument("node phases must lie in [0, tau)");
        }
        if (!node.skewless &&
            (!(node.baseline.kappa1 > 0.0) || node.baseline.kappa2 < 0.0 ||
             !std::isfinite(node.baseline.kappa1) ||
             !std::isfinite(node.baseline.kappa2))) {
            throw std::invalid_argument("baseline gains must be positive");
        }
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw std::invalid_argument("node ids must be unique");
    }
    if (steps < 1) throw std::invalid_argument("step count must be at least 1");
    if (!(divergence_threshold > 0.0)) {
        throw std::invalid_argument("divergence threshold must be positive");
    }
    for (const auto& ev : events) {
        if (ev.step < 0 || ev.step >= steps) {
            throw std::invalid_argument("event step outside the run");
        }
        ev.topology.validate();
        if (ev.topology.node_count() != n) {
            throw std::invalid_argument("events may not change the node count");
        }
    }
    for (const auto& [from, to] : jitter.edges) {
        if (from < 0 || from >= n || to < 0 || to >= n) {
            throw std::invalid_argument("jitter edge endpoint out of range");
        }
    }
}

double Trace::spread(int row) const {
    double lo = at_x(row, 0), hi = at_x(row, 0);
    for (int i = 1; i < nodes; ++i) {
        lo = std::min(lo, at_x(row, i));
        hi = std::max(hi, at_x(row, i));
    }
    return hi - lo;
}

int Trace::offset_sign_changes(int node, int first_row, int last_row) const {
    int changes = 0;
    int prev_sign = 0;
    for (int row = first_row; row <= last_row && row < rows; ++row) {
        const double v = offset(row, node);
        const int sign = v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
        if (sign != 0 && prev_sign != 0 && sign != prev_sign) ++changes;
        if (sign != 0) prev_sign = sign;
    }
    return changes;
}

std::vector<double> measure_offsets(const std::vector<ClockState>& states,
                                    const Topology& topology,
                                    const JitterModel& jitter,
                                    std::mt19937_64& rng,
                                    std::vector<double>* noise_out) {
    std::vector<double> measured;
    measured.reserve(topology.edges().size());
    if (noise_out) {
        noise_out->clear();
        noise_out->reserve(topology.edges().size());
    }
    const int points = jitter.support_points();
    for (const auto& edge : topology.edges()) {
        double d = states[edge.to].x - states[edge.from].x;
        double noise = 0.0;
        if (jitter.applies_to(edge.from, edge.to) && points > 1) {
            const double fwd =
                jitter.granularity * static_cast<double>(rng() % points);
            const double bwd =
                jitter.granularity * static_cast<double>(rng() % points);
            noise = (fwd - bwd) / 2.0;
        }
        measured.push_back(d + noise);
        if (noise_out) noise_out->push_back(noise);
    }
    return measured;
}

Simulation::Simulation(SimulationConfig config) : config_(std::move(config)) {
    config_.validate();
    topology_ = config_.topology;
    const int n = topology_.node_count();
    states_.resize(n);
    for (int i = 0; i < n; ++i) {
        states_[i].node_id = config_.nodes[i].id;
        states_[i].r = config_.nodes[i].r;
        states_[i].x = config_.nodes[i].x0;
        states_[i].s = config_.nodes[i].s0;
        states_[i].y = config_.nodes[i].y0;
    }
    prev_wo_.assign(n, 0.0);
    prev_x_.assign(n, 0.0);
    has_prev_.assign(n, false);
    pend_wo_.assign(n, 0.0);
    pend_x_.assign(n, 0.0);
    pend_valid_.assign(n, false);
    rng_.seed(config_.seed);
}

void Simulation::apply_events() {
    for (const auto& ev : config_.events) {
        if (ev.step == step_index_) topology_ = ev.topology;
    }
}

bool Simulation::step() {
    apply_events();
    const int n = topology_.node_count();
    const bool phased = config_.scheduling == Scheduling::PhaseShifted;
    const double tau = config_.params.tau;

    if (!phased) {
        // All measurements are taken against the common pre-step snapshot.
        const std::vector<double> measured = measure_offsets(
            states_, topology_, config_.jitter, rng_, &last_noises_);
        std::vector<double> wo(n, 0.0);
        const auto& edges = topology_.edges();
        for (size_t e = 0; e < edges.size(); ++e) {
            wo[edges[e].from] += edges[e].alpha * measured[e];
        }

        std::vector<ClockState> next = states_;
        for (int i = 0; i < n; ++i) {
            const ClockState& cur = states_[i];
            if (config_.nodes[i].skewless) {
                // A node without neighbors sees wo = 0; with y = 0 this
                // leaves (s, y) untouched and the clock free-runs.
                ClockState stepped = advance(cur, config_.params);
                ClockState corrected =
                    skewless_update(cur, wo[i], config_.params);
                stepped.s = corrected.s;
                stepped.y = corrected.y;
                next[i] = stepped;
            } else {
                double f_err = 0.0;
                if (has_prev_[i] && cur.x != prev_x_[i]) {
                    f_err = relative_frequency_error(wo[i], prev_wo_[i], cur.x,
                                                     prev_x_[i]);
                }
                const CorrectionPair corr = baseline_correction(
                    config_.nodes[i].baseline, wo[i], f_err);
                next[i] = advance(cur, config_.params, corr);
                prev_wo_[i] = wo[i];
                prev_x_[i] = cur.x;
                has_prev_[i] = true;
            }
        }
        states_ = std::move(next);
    } else {
        // Nodes act one at a time at their own instant within the round.
        // Each instant first applies the measurement taken at the node's
        // previous instant (the protocol's one-poll delay), then measures
        // its neighbors by extrapolating their last anchored state.
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return config_.nodes[a].phase < config_.nodes[b].phase;
        });
        // Every round starts re-anchored at the common epoch.
        const double round_start = step_index_ * tau;
        std::vector<double> anchor(n, round_start);
        auto x_at = [&](int j, double t) {
            return states_[j].x + (t - anchor[j]) * states_[j].r * states_[j].s;
        };
        last_noises_.assign(topology_.edges().size(), 0.0);
        const int points = config_.jitter.support_points();
        for (int i : order) {
            const double t = round_start + config_.nodes[i].phase;
            const double advanced_x = x_at(i, t);
            double new_x = advanced_x;

            if (pend_valid_[i]) {
                if (config_.nodes[i].skewless) {
                    ClockState corrected =
                        skewless_update(states_[i], pend_wo_[i], config_.params);
                    states_[i].s = corrected.s;
                    states_[i].y = corrected.y;
                } else {
                    double f_err = 0.0;
                    if (has_prev_[i] && pend_x_[i] != prev_x_[i]) {
                        f_err = relative_frequency_error(
                            pend_wo_[i], prev_wo_[i], pend_x_[i], prev_x_[i]);
                    }
                    const CorrectionPair corr = baseline_correction(
                        config_.nodes[i].baseline, pend_wo_[i], f_err);
                    states_[i].s += corr.u_s;
                    new_x += corr.u_x;
                }
            }
            states_[i].x = new_x;
            anchor[i] = t;

            // Fresh measurement, applied at this node's next instant.
            double wo = 0.0;
            bool any = false;
            const auto& edges = topology_.edges();
            for (size_t e = 0; e < edges.size(); ++e) {
                if (edges[e].from != i) continue;
                any = true;
                double d = x_at(edges[e].to, t) - x_at(i, t);
                if (config_.jitter.applies_to(i, edges[e].to) && points > 1) {
                    const double fwd =
                        config_.jitter.granularity *
                        static_cast<double>(rng_() % points);
                    const double bwd =
                        config_.jitter.granularity *
                        static_cast<double>(rng_() % points);
                    const double noise = (fwd - bwd) / 2.0;
                    d += noise;
                    last_noises_[e] = noise;
                }
                wo += edges[e].alpha * d;
            }
            prev_wo_[i] = pend_wo_[i];
            prev_x_[i] = pend_x_[i];
            has_prev_[i] = pend_valid_[i];
            pend_wo_[i] = any ? wo : 0.0;
            pend_x_[i] = states_[i].x;
            pend_valid_[i] = true;
        }
        // Re-anchor everyone at the round-end epoch for recording.
        const double epoch = (step_index_ + 1) * tau;
        for (int i = 0; i < n; ++i) {
            states_[i].x = x_at(i, epoch);
            anchor[i] = epoch;
        }
    }

    ++step_index_;
    double lo = states_[0].x, hi = states_[0].x;
    for (const auto& st : states_) {
        lo = std::min(lo, st.x);
        hi = std::max(hi, st.x);
    }
    return hi - lo <= config_.divergence_threshold;
}

Trace run(const SimulationConfig& config) {
    config.validate();
    Simulation sim(config);
    const int n = config.topology.node_count();

    Trace trace;
    trace.nodes = n;
    trace.tau = config.params.tau;
    trace.reference_index =
        config.topology.leaders().empty() ? 0 : config.topology.leaders()[0];
    for (const auto& node : config.nodes) trace.node_ids.push_back(node.id);

    auto record = [&](const std::vector<ClockState>& states) {
        for (const auto& st : states) {
            trace.x.push_back(st.x);
            trace.s.push_back(st.s);
            trace.y.push_back(st.y);
        }
        ++trace.rows;
    };
    record(sim.states());

    for (int k = 0; k < config.steps; ++k) {
        const bool within_bounds = sim.step();
        record(sim.states());
        trace.noises.push_back(sim.last_noises());
        if (!within_bounds) {
            trace.status = RunStatus::Diverged;
            trace.diverged_at_step = k + 1;
            break;
        }
    }
    return trace;
}

SimulationConfig experiment_two_config(int k, double jitter_max,
                                       std::uint64_t seed) {
    SimulationConfig config = make_preset("exp2-wheel-" + std::to_string(k));
    config.jitter.jitter_max = jitter_max;
    config.jitter.kind = jitter_max > 0.0 ? JitterModel::Kind::UniformPingPong
                                          : JitterModel::Kind::None;
    config.seed = seed;
    return config;
}

Trace run_experiment_two(int k, double jitter_max, std::uint64_t seed) {
    return run(experiment_two_config(k, jitter_max, seed));
}

namespace {

void append_double(std::string& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

}  // namespace

std::string trace_csv(const Trace& trace) {
    std::string out = "step,time_s,node,offset_to_leader_s,s,y\n";
    for (int row = 0; row < trace.rows; ++row) {
        for (int i = 0; i < trace.nodes; ++i) {
            out += std::to_string(row);
            out += ',';
            append_double(out, row * trace.tau);
            out += ',';
            out += std::to_string(trace.node_ids[i]);
            out += ',';
            append_double(out, trace.offset(row, i));
            out += ',';
            append_double(out, trace.at_s(row, i));
            out += ',';
            append_double(out, trace.at_y(row, i));
            out += '\n';
        }
    }
    return out;
}

}  // namespace skewless
