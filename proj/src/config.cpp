#include "skewless/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "skewless/presets.hpp"

namespace skewless {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw ConfigError(path + ": " + message);
}

const json& need(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) {
        fail(path, std::string("missing required field '") + key + "'");
    }
    return obj.at(key);
}

double need_number(const json& obj, const char* key, const std::string& path) {
    const json& v = need(obj, key, path);
    if (!v.is_number()) fail(path + "." + key, "expected a number");
    return v.get<double>();
}

double number_or(const json& obj, const char* key, double fallback) {
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    return obj.at(key).get<double>();
}

int need_integer(const json& obj, const char* key, const std::string& path) {
    const json& v = need(obj, key, path);
    if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
    return v.get<int>();
}

std::string need_string(const json& obj, const char* key,
                        const std::string& path) {
    const json& v = need(obj, key, path);
    if (!v.is_string()) fail(path + "." + key, "expected a string");
    return v.get<std::string>();
}

BaselineKind baseline_kind_from(const std::string& name,
                                const std::string& path) {
    if (name == "offset-only") return BaselineKind::OffsetOnly;
    if (name == "offset-freq") return BaselineKind::OffsetPlusFreq;
    if (name == "skew-only") return BaselineKind::SkewOnly;
    if (name == "skew-offset") return BaselineKind::SkewAndOffset;
    if (name == "naive-skew") return BaselineKind::NaiveSkew;
    fail(path, "unknown scheme '" + name + "'");
}

const char* baseline_kind_name(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::OffsetOnly: return "offset-only";
        case BaselineKind::OffsetPlusFreq: return "offset-freq";
        case BaselineKind::SkewOnly: return "skew-only";
        case BaselineKind::SkewAndOffset: return "skew-offset";
        case BaselineKind::NaiveSkew: return "naive-skew";
    }
    return "offset-only";
}

struct IdMap {
    std::map<int, int> index_of;

    int resolve(int id, const std::string& path) const {
        auto it = index_of.find(id);
        if (it == index_of.end()) {
            fail(path, "unknown node id " + std::to_string(id));
        }
        return it->second;
    }
};

Topology parse_topology(const json& edges_doc, const json* weights_doc,
                        const json& leaders_doc, const IdMap& ids, int n,
                        double* c_out, const std::string& path) {
    if (!edges_doc.is_array()) fail(path + ".edges", "expected an array");
    std::vector<Edge> edges;
    bool any_alpha = false;
    for (size_t i = 0; i < edges_doc.size(); ++i) {
        const std::string epath = path + ".edges[" + std::to_string(i) + "]";
        const json& e = edges_doc.at(i);
        Edge edge;
        edge.from = ids.resolve(need_integer(e, "from", epath), epath);
        edge.to = ids.resolve(need_integer(e, "to", epath), epath);
        if (e.contains("alpha")) {
            edge.alpha = e.at("alpha").get<double>();
            any_alpha = true;
        }
        edges.push_back(edge);
    }
    std::vector<int> leaders;
    if (!leaders_doc.is_array()) fail(path + ".leaders", "expected an array");
    for (const auto& id : leaders_doc) {
        leaders.push_back(ids.resolve(id.get<int>(), path + ".leaders"));
    }

    std::string mode = "explicit";
    double c = 0.0;
    if (weights_doc != nullptr && !weights_doc->is_null()) {
        mode = need_string(*weights_doc, "mode", path + ".weights");
        if (mode == "paper-eq15") {
            c = need_number(*weights_doc, "c", path + ".weights");
        } else if (mode != "explicit") {
            fail(path + ".weights.mode", "expected 'paper-eq15' or 'explicit'");
        }
    }

    Topology topo;
    try {
        if (mode == "paper-eq15") {
            if (any_alpha) {
                fail(path + ".edges",
                     "per-edge alpha not allowed with weights mode paper-eq15");
            }
            topo = default_weights(Topology(n, std::move(edges), std::move(leaders)), c);
            if (c_out) *c_out = c;
        } else {
            if (!any_alpha && !edges.empty()) {
                fail(path + ".edges",
                     "explicit weights mode requires alpha on every edge");
            }
            topo = Topology(n, std::move(edges), std::move(leaders));
        }
    } catch (const std::invalid_argument& err) {
        fail(path, err.what());
    }
    return topo;
}

int count_line(const std::string& text, size_t byte) {
    int line = 1;
    for (size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') ++line;
    }
    return line;
}

void append_number(std::string& out, const json& v) {
    // Unsigned first: is_number_integer() is also true for unsigned values,
    // and 64-bit seeds must not wrap through a signed conversion.
    if (v.is_number_unsigned()) {
        out += std::to_string(v.get<unsigned long long>());
        return;
    }
    if (v.is_number_integer()) {
        out += std::to_string(v.get<long long>());
        return;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
        out += "null";
        return;
    }
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), d);
    out.append(buf, res.ptr);
}

void write_canonical(const json& v, std::string& out, int depth) {
    const std::string pad(2 * static_cast<size_t>(depth), ' ');
    const std::string pad_in(2 * static_cast<size_t>(depth + 1), ' ');
    switch (v.type()) {
        case json::value_t::object: {
            if (v.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                out += pad_in;
                out += json(it.key()).dump();
                out += ": ";
                write_canonical(it.value(), out, depth + 1);
            }
            out += "\n" + pad + "}";
            return;
        }
        case json::value_t::array: {
            if (v.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            bool first = true;
            for (const auto& item : v) {
                if (!first) out += ",\n";
                first = false;
                out += pad_in;
                write_canonical(item, out, depth + 1);
            }
            out += "\n" + pad + "]";
            return;
        }
        case json::value_t::string:
            out += v.dump();
            return;
        case json::value_t::boolean:
            out += v.get<bool>() ? "true" : "false";
            return;
        case json::value_t::null:
            out += "null";
            return;
        default:
            append_number(out, v);
            return;
    }
}

json finite_or_null(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

}  // namespace

std::string canonical_dump(const json& doc) {
    std::string out;
    write_canonical(doc, out, 0);
    out += "\n";
    return out;
}

SimulationConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("$: expected a config object");
    const int version = need_integer(doc, "version", "$");
    if (version != 1) {
        fail("$.version", "unsupported version " + std::to_string(version));
    }

    SimulationConfig config;

    const json& nodes_doc = need(doc, "nodes", "$");
    if (!nodes_doc.is_array() || nodes_doc.empty()) {
        fail("$.nodes", "expected a non-empty array");
    }
    IdMap ids;
    for (size_t i = 0; i < nodes_doc.size(); ++i) {
        const std::string npath = "$.nodes[" + std::to_string(i) + "]";
        const json& nd = nodes_doc.at(i);
        NodeConfig node;
        node.id = need_integer(nd, "id", npath);
        node.r = need_number(nd, "r", npath);
        node.x0 = need_number(nd, "x0", npath);
        node.s0 = number_or(nd, "s0", 1.0);
        node.y0 = number_or(nd, "y0", 0.0);
        node.phase = number_or(nd, "phase", 0.0);
        if (nd.contains("scheme") && !nd.at("scheme").is_null()) {
            const json& scheme = nd.at("scheme");
            if (scheme.is_string()) {
                if (scheme.get<std::string>() != "skewless") {
                    fail(npath + ".scheme",
                         "string schemes other than 'skewless' are not known");
                }
            } else {
                node.skewless = false;
                node.baseline.kind = baseline_kind_from(
                    need_string(scheme, "kind", npath + ".scheme"),
                    npath + ".scheme.kind");
                node.baseline.kappa1 =
                    need_number(scheme, "kappa1", npath + ".scheme");
                node.baseline.kappa2 = number_or(scheme, "kappa2", 0.0);
            }
        }
        if (!ids.index_of.emplace(node.id, static_cast<int>(i)).second) {
            fail(npath + ".id", "duplicate node id");
        }
        config.nodes.push_back(node);
    }
    const int n = static_cast<int>(config.nodes.size());

    const json& params_doc = need(doc, "params", "$");
    if (params_doc.contains("profile")) {
        config.params =
            params_profile(need_string(params_doc, "profile", "$.params"));
    } else {
        for (const char* key : {"kappa1", "kappa2", "p", "tau"}) {
            need_number(params_doc, key, "$.params");
        }
    }
    config.params.kappa1 =
        number_or(params_doc, "kappa1", config.params.kappa1);
    config.params.kappa2 =
        number_or(params_doc, "kappa2", config.params.kappa2);
    config.params.p = number_or(params_doc, "p", config.params.p);
    config.params.tau = number_or(params_doc, "tau", config.params.tau);

    const json* weights_doc =
        doc.contains("weights") ? &doc.at("weights") : nullptr;
    double c = config.params.c;
    config.topology =
        parse_topology(need(doc, "edges", "$"), weights_doc,
                       need(doc, "leaders", "$"), ids, n, &c, "$");
    config.params.c = number_or(params_doc, "c", c);

    if (doc.contains("jitter") && !doc.at("jitter").is_null()) {
        const json& jd = doc.at("jitter");
        const std::string kind = need_string(jd, "kind", "$.jitter");
        if (kind == "none") {
            config.jitter.kind = JitterModel::Kind::None;
        } else if (kind == "uniform-ping-pong") {
            config.jitter.kind = JitterModel::Kind::UniformPingPong;
            config.jitter.jitter_max = need_number(jd, "max", "$.jitter");
            config.jitter.granularity =
                need_number(jd, "granularity", "$.jitter");
            if (jd.contains("edges") && !jd.at("edges").is_null()) {
                const json& je = jd.at("edges");
                if (je.is_string()) {
                    if (je.get<std::string>() != "all") {
                        fail("$.jitter.edges", "expected 'all' or a pair list");
                    }
                } else if (je.is_array()) {
                    for (const auto& pair : je) {
                        if (!pair.is_array() || pair.size() != 2) {
                            fail("$.jitter.edges", "expected [from, to] pairs");
                        }
                        config.jitter.edges.emplace_back(
                            ids.resolve(pair.at(0).get<int>(), "$.jitter.edges"),
                            ids.resolve(pair.at(1).get<int>(), "$.jitter.edges"));
                    }
                } else {
                    fail("$.jitter.edges", "expected 'all' or a pair list");
                }
            }
        } else {
            fail("$.jitter.kind", "expected 'none' or 'uniform-ping-pong'");
        }
    }

    const json& run_doc = need(doc, "run", "$");
    config.steps = need_integer(run_doc, "steps", "$.run");
    const json& seed_doc = need(run_doc, "seed", "$.run");
    if (!seed_doc.is_number_integer() && !seed_doc.is_number_unsigned()) {
        fail("$.run.seed", "a seed is required; runs never self-seed");
    }
    config.seed = seed_doc.get<std::uint64_t>();
    const std::string scheduling =
        run_doc.contains("scheduling")
            ? run_doc.at("scheduling").get<std::string>()
            : "synchronous";
    if (scheduling == "synchronous") {
        config.scheduling = Scheduling::Synchronous;
    } else if (scheduling == "phase-shifted") {
        config.scheduling = Scheduling::PhaseShifted;
    } else {
        fail("$.run.scheduling", "expected 'synchronous' or 'phase-shifted'");
    }
    config.divergence_threshold =
        number_or(run_doc, "divergence_threshold", 1e3);

    if (run_doc.contains("events")) {
        const json& events_doc = run_doc.at("events");
        if (!events_doc.is_array()) fail("$.run.events", "expected an array");
        for (size_t i = 0; i < events_doc.size(); ++i) {
            const std::string epath = "$.run.events[" + std::to_string(i) + "]";
            const json& ev = events_doc.at(i);
            TopologyEvent event;
            event.step = need_integer(ev, "step", epath);
            const json& action = need(ev, "set_topology", epath);
            const json* ev_weights =
                action.contains("weights") ? &action.at("weights") : nullptr;
            event.topology = parse_topology(
                need(action, "edges", epath), ev_weights,
                need(action, "leaders", epath), ids, n, nullptr, epath);
            config.events.push_back(std::move(event));
        }
    }

    try {
        config.validate();
    } catch (const std::invalid_argument& err) {
        fail("$", err.what());
    }
    return config;
}

SimulationConfig parse_config_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& err) {
        throw ConfigError("line " + std::to_string(count_line(text, err.byte)) +
                          ": " + err.what());
    }
    return parse_config(doc);
}

SimulationConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

json config_to_json(const SimulationConfig& config) {
    json doc;
    doc["version"] = 1;

    json nodes = json::array();
    for (const auto& node : config.nodes) {
        json nd;
        nd["id"] = node.id;
        nd["r"] = node.r;
        nd["x0"] = node.x0;
        nd["s0"] = node.s0;
        nd["y0"] = node.y0;
        if (config.scheduling == Scheduling::PhaseShifted) {
            nd["phase"] = node.phase;
        }
        if (node.skewless) {
            nd["scheme"] = "skewless";
        } else {
            nd["scheme"] = {{"kind", baseline_kind_name(node.baseline.kind)},
                            {"kappa1", node.baseline.kappa1},
                            {"kappa2", node.baseline.kappa2}};
        }
        nodes.push_back(nd);
    }
    doc["nodes"] = nodes;

    auto topology_json = [&](const Topology& topo) {
        json edges = json::array();
        for (const auto& e : topo.edges()) {
            edges.push_back({{"from", config.nodes[e.from].id},
                             {"to", config.nodes[e.to].id},
                             {"alpha", e.alpha}});
        }
        json leaders = json::array();
        for (int leader : topo.leaders()) {
            leaders.push_back(config.nodes[leader].id);
        }
        return std::make_pair(edges, leaders);
    };

    auto [edges, leaders] = topology_json(config.topology);
    doc["edges"] = edges;
    doc["leaders"] = leaders;
    doc["weights"] = {{"mode", "explicit"}};

    doc["params"] = {{"kappa1", config.params.kappa1},
                     {"kappa2", config.params.kappa2},
                     {"p", config.params.p},
                     {"tau", config.params.tau},
                     {"c", config.params.c}};

    if (config.jitter.kind == JitterModel::Kind::None) {
        doc["jitter"] = {{"kind", "none"}};
    } else {
        json jd = {{"kind", "uniform-ping-pong"},
                   {"max", config.jitter.jitter_max},
                   {"granularity", config.jitter.granularity}};
        if (config.jitter.edges.empty()) {
            jd["edges"] = "all";
        } else {
            json pairs = json::array();
            for (const auto& [from, to] : config.jitter.edges) {
                pairs.push_back(
                    {config.nodes[from].id, config.nodes[to].id});
            }
            jd["edges"] = pairs;
        }
        doc["jitter"] = jd;
    }

    json run;
    run["steps"] = config.steps;
    run["seed"] = config.seed;
    run["scheduling"] = config.scheduling == Scheduling::Synchronous
                            ? "synchronous"
                            : "phase-shifted";
    run["divergence_threshold"] = config.divergence_threshold;
    if (!config.events.empty()) {
        json events = json::array();
        for (const auto& ev : config.events) {
            auto [ev_edges, ev_leaders] = topology_json(ev.topology);
            events.push_back(
                {{"step", ev.step},
                 {"set_topology",
                  {{"edges", ev_edges}, {"leaders", ev_leaders}}}});
        }
        run["events"] = events;
    }
    doc["run"] = run;
    return doc;
}

json stability_report_to_json(const StabilityReport& report) {
    json doc;
    doc["connected"] = report.connected;
    doc["multiplicity_of_one"] = report.multiplicity_of_one;
    doc["spectral_margin"] = report.spectral_margin;
    doc["p_ok"] = report.p_ok;
    doc["gain_ok"] = report.gain_ok;
    doc["tau_ok"] = report.tau_ok;
    doc["tau_bound_s"] = finite_or_null(report.tau_bound);
    doc["tau_bound_topology_free_s"] =
        finite_or_null(report.tau_bound_topology_free);
    doc["all_real_spectrum"] = report.all_real_spectrum;
    doc["mu_max"] = report.mu_max;
    doc["spectrally_stable"] = report.spectrally_stable;
    doc["conditions_match_spectrum"] = report.conditions_match_spectrum;
    doc["verdict"] = to_string(report.verdict);
    return doc;
}

json metrics_to_json(const MetricsSummary& metrics) {
    json doc;
    doc["sqrt_s_n_s"] = metrics.sqrt_s_n;
    doc["ci99_s"] = metrics.ci99;
    doc["ci100_s"] = metrics.ci100;
    doc["converged"] = metrics.converged;
    doc["first_converged_step"] =
        metrics.first_converged_step < 0 ? json(nullptr)
                                         : json(metrics.first_converged_step);
    doc["empirical_r_star"] = metrics.empirical_r_star;
    doc["empirical_x_star_s"] = metrics.empirical_x_star;
    doc["window"] = {metrics.window.begin, metrics.window.end};
    return doc;
}

const Topology& final_topology(const SimulationConfig& config) {
    const Topology* topo = &config.topology;
    int last_step = -1;
    for (const auto& ev : config.events) {
        if (ev.step >= last_step) {
            last_step = ev.step;
            topo = &ev.topology;
        }
    }
    return *topo;
}

json analysis_report(const SimulationConfig& config,
                     const StabilityReport& report) {
    json doc;
    doc["version"] = 1;
    doc["kind"] = "analysis";
    doc["params"] = config_to_json(config)["params"];
    const Topology& topo = final_topology(config);
    doc["topology"] = {{"nodes", topo.node_count()},
                       {"edges", topo.edges().size()},
                       {"analyzed_after_events", !config.events.empty()}};
    doc["stability"] = stability_report_to_json(report);

    doc["xi"] = nullptr;
    doc["gamma"] = nullptr;
    doc["predicted_fixed_point"] = nullptr;
    if (report.connected) {
        const int n = topo.node_count();
        Eigen::VectorXd rates(n), x0(n), s0(n), y0(n);
        for (int i = 0; i < n; ++i) {
            rates(i) = config.nodes[i].r;
            x0(i) = config.nodes[i].x0;
            s0(i) = config.nodes[i].s0;
            y0(i) = config.nodes[i].y0;
        }
        const Eigen::VectorXd xi = left_null_vector(build_laplacian(topo));
        const double gamma = 1.0 / xi.cwiseQuotient(rates).sum();
        const FixedPoint fp =
            predict_fixed_point(x0, s0, y0, rates, xi, gamma, config.params);
        json xi_doc = json::array();
        for (int i = 0; i < n; ++i) xi_doc.push_back(xi(i));
        doc["xi"] = xi_doc;
        doc["gamma"] = gamma;
        doc["predicted_fixed_point"] = {{"x_star_s", fp.x_star},
                                        {"r_star", fp.r_star}};
    }
    return doc;
}

json simulation_report(const SimulationConfig& config,
                       const StabilityReport& report, const Trace& trace,
                       const MetricsSummary& metrics) {
    json doc;
    doc["version"] = 1;
    doc["kind"] = "simulation";
    doc["params"] = config_to_json(config)["params"];

    int worst_node = 0;
    double worst = -1.0;
    for (int i = 0; i < trace.nodes; ++i) {
        if (i == trace.reference_index) continue;
        for (int row = 0; row < trace.rows; ++row) {
            const double mag = std::abs(trace.offset(row, i));
            if (mag > worst) {
                worst = mag;
                worst_node = i;
            }
        }
    }
    const bool oscillating =
        trace.offset_sign_changes(worst_node, 0, trace.rows - 1) >= 6;

    doc["run"] = {
        {"status",
         trace.status == RunStatus::Diverged ? "diverged" : "completed"},
        {"diverged_at_step", trace.diverged_at_step < 0
                                 ? json(nullptr)
                                 : json(trace.diverged_at_step)},
        {"steps", config.steps},
        {"rows", trace.rows},
        {"seed", config.seed},
        {"oscillating", oscillating}};
    doc["metrics"] = metrics_to_json(metrics);
    doc["stability"] = stability_report_to_json(report);
    return doc;
}

namespace {

bool check_fields(const json& doc, const std::string& prefix,
                  const std::vector<std::pair<const char*, json::value_t>>& spec,
                  std::string* error) {
    for (const auto& [key, type] : spec) {
        if (!doc.contains(key)) {
            if (error) *error = prefix + "." + key + " is missing";
            return false;
        }
        const json& v = doc.at(key);
        bool ok = v.type() == type;
        // Any numeric flavor satisfies a number requirement, and parsed
        // non-negative integers arrive as unsigned.
        if (type == json::value_t::number_float && v.is_number()) ok = true;
        if (type == json::value_t::number_integer && v.is_number_integer()) {
            ok = true;
        }
        if (!ok && v.is_null()) ok = true;  // explicit nulls mark "not defined"
        if (!ok) {
            if (error) *error = prefix + "." + key + " has the wrong type";
            return false;
        }
    }
    return true;
}

}  // namespace

bool validate_report(const json& report, std::string* error) {
    using vt = json::value_t;
    if (!report.is_object()) {
        if (error) *error = "report must be an object";
        return false;
    }
    if (!check_fields(report, "$",
                      {{"version", vt::number_integer},
                       {"kind", vt::string},
                       {"params", vt::object},
                       {"stability", vt::object}},
                      error)) {
        return false;
    }
    if (!check_fields(report.at("stability"), "$.stability",
                      {{"connected", vt::boolean},
                       {"multiplicity_of_one", vt::number_integer},
                       {"spectral_margin", vt::number_float},
                       {"p_ok", vt::boolean},
                       {"gain_ok", vt::boolean},
                       {"tau_ok", vt::boolean},
                       {"tau_bound_s", vt::number_float},
                       {"tau_bound_topology_free_s", vt::number_float},
                       {"all_real_spectrum", vt::boolean},
                       {"spectrally_stable", vt::boolean},
                       {"conditions_match_spectrum", vt::boolean},
                       {"verdict", vt::string}},
                      error)) {
        return false;
    }
    const std::string kind = report.at("kind").get<std::string>();
    if (kind == "analysis") {
        return check_fields(report, "$",
                            {{"xi", vt::array},
                             {"gamma", vt::number_float},
                             {"predicted_fixed_point", vt::object},
                             {"topology", vt::object}},
                            error);
    }
    if (kind == "simulation") {
        if (!check_fields(report, "$",
                          {{"run", vt::object}, {"metrics", vt::object}},
                          error)) {
            return false;
        }
        return check_fields(report.at("metrics"), "$.metrics",
                            {{"sqrt_s_n_s", vt::number_float},
                             {"ci99_s", vt::number_float},
                             {"ci100_s", vt::number_float},
                             {"converged", vt::boolean},
                             {"empirical_r_star", vt::number_float},
                             {"empirical_x_star_s", vt::number_float},
                             {"window", vt::array}},
                            error);
    }
    if (error) *error = "unknown report kind '" + kind + "'";
    return false;
}

}  // namespace skewless
