#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "skewless/config.hpp"
#include "skewless/metrics.hpp"
#include "skewless/presets.hpp"
#include "skewless/sim.hpp"
#include "skewless/stability.hpp"

namespace py = pybind11;
using namespace skewless;

namespace {

Eigen::VectorXd rates_of(const SimulationConfig& config) {
    Eigen::VectorXd rates(config.nodes.size());
    for (size_t i = 0; i < config.nodes.size(); ++i) {
        rates(static_cast<int>(i)) = config.nodes[i].r;
    }
    return rates;
}

Eigen::MatrixXd trace_matrix(const Trace& trace,
                             const std::vector<double>& values) {
    Eigen::MatrixXd m(trace.rows, trace.nodes);
    for (int row = 0; row < trace.rows; ++row) {
        for (int col = 0; col < trace.nodes; ++col) {
            m(row, col) = values[row * trace.nodes + col];
        }
    }
    return m;
}

}  // namespace

PYBIND11_MODULE(skewless, m) {
    m.doc() = "skewless network clock synchronization: simulation and analysis";

    py::class_<ProtocolParams>(m, "ProtocolParams")
        .def(py::init([](double kappa1, double kappa2, double p, double tau,
                         double c) {
                 return ProtocolParams{kappa1, kappa2, p, tau, c};
             }),
             py::arg("kappa1") = 1.1, py::arg("kappa2") = 1.0,
             py::arg("p") = 0.99, py::arg("tau") = 1.0, py::arg("c") = 0.7)
        .def_readwrite("kappa1", &ProtocolParams::kappa1)
        .def_readwrite("kappa2", &ProtocolParams::kappa2)
        .def_readwrite("p", &ProtocolParams::p)
        .def_readwrite("tau", &ProtocolParams::tau)
        .def_readwrite("c", &ProtocolParams::c)
        .def_property_readonly("delta_kappa", &ProtocolParams::delta_kappa);

    py::class_<ClockState>(m, "ClockState")
        .def(py::init([](int node_id, double r, double x, double s, double y) {
                 return ClockState{node_id, r, x, s, y};
             }),
             py::arg("node_id") = 0, py::arg("r") = 1.0, py::arg("x") = 0.0,
             py::arg("s") = 1.0, py::arg("y") = 0.0)
        .def_readwrite("node_id", &ClockState::node_id)
        .def_readwrite("r", &ClockState::r)
        .def_readwrite("x", &ClockState::x)
        .def_readwrite("s", &ClockState::s)
        .def_readwrite("y", &ClockState::y);

    py::enum_<BaselineKind>(m, "BaselineKind")
        .value("OffsetOnly", BaselineKind::OffsetOnly)
        .value("OffsetPlusFreq", BaselineKind::OffsetPlusFreq)
        .value("SkewOnly", BaselineKind::SkewOnly)
        .value("SkewAndOffset", BaselineKind::SkewAndOffset)
        .value("NaiveSkew", BaselineKind::NaiveSkew);

    m.def(
        "advance",
        [](const ClockState& state, const ProtocolParams& params, double u_x,
           double u_s) { return advance(state, params, {u_x, u_s}); },
        py::arg("state"), py::arg("params"), py::arg("u_x") = 0.0,
        py::arg("u_s") = 0.0);
    m.def("skewless_update", &skewless_update, py::arg("state"),
          py::arg("weighted_offset"), py::arg("params"));
    m.def("relative_frequency_error", &relative_frequency_error,
          py::arg("d_now"), py::arg("d_prev"), py::arg("x_now"),
          py::arg("x_prev"));
    m.def(
        "baseline_correction",
        [](BaselineKind kind, double kappa1, double kappa2, double offset,
           double freq_error) {
            const CorrectionPair corr = baseline_correction(
                BaselineScheme{kind, kappa1, kappa2}, offset, freq_error);
            return py::make_tuple(corr.u_x, corr.u_s);
        },
        py::arg("kind"), py::arg("kappa1"), py::arg("kappa2"),
        py::arg("offset"), py::arg("freq_error") = 0.0);

    py::class_<Topology>(m, "Topology")
        .def_property_readonly("node_count", &Topology::node_count)
        .def_property_readonly("leaders", &Topology::leaders)
        .def_property_readonly("edges", [](const Topology& t) {
            std::vector<std::tuple<int, int, double>> out;
            for (const auto& e : t.edges()) out.emplace_back(e.from, e.to, e.alpha);
            return out;
        });

    m.def("make_star", &make_star, py::arg("n_total"));
    m.def("make_two_client_loop", &make_two_client_loop);
    m.def("make_chain", &make_chain, py::arg("n_total"));
    m.def("make_wheel", &make_wheel, py::arg("n_clients"), py::arg("k"));
    m.def("default_weights", &default_weights, py::arg("topology"),
          py::arg("c"));
    m.def("build_laplacian", &build_laplacian, py::arg("topology"));
    m.def("left_null_vector", &left_null_vector, py::arg("laplacian"));
    m.def("gershgorin_bound", &gershgorin_bound, py::arg("laplacian"));
    m.def(
        "spectrum",
        [](const Eigen::MatrixXd& matrix) {
            const Spectrum s = spectrum(matrix);
            return py::make_tuple(s.values, s.all_real);
        },
        py::arg("matrix"), "eigenvalues sorted by (re, im) plus all-real flag");

    m.def(
        "assemble_system_matrix",
        [](const Eigen::MatrixXd& laplacian, const Eigen::VectorXd& rates,
           const ProtocolParams& params) {
            return assemble_system_matrix(laplacian, rates, params).a;
        },
        py::arg("laplacian"), py::arg("rates"), py::arg("params"));
    m.def(
        "companion_roots",
        [](std::complex<double> nu, const ProtocolParams& params) {
            const auto roots = companion_roots(nu, params);
            return std::vector<std::complex<double>>(roots.begin(), roots.end());
        },
        py::arg("nu"), py::arg("params"));
    m.def("hermite_biehler_schur_test", &hermite_biehler_schur_test,
          py::arg("nu"), py::arg("params"));
    m.def(
        "check_parameter_conditions",
        [](const ProtocolParams& params, double mu_max) {
            const ParameterConditions cond =
                check_parameter_conditions(params, mu_max);
            py::dict out;
            out["p_ok"] = cond.p_ok;
            out["gain_ok"] = cond.gain_ok;
            out["tau_ok"] = cond.tau_ok;
            out["tau_bound"] = cond.tau_bound;
            return out;
        },
        py::arg("params"), py::arg("mu_max"));
    m.def("topology_free_tau_bound", &topology_free_tau_bound,
          py::arg("params"), py::arg("alpha_max"), py::arg("r_max_hat"));
    m.def("predict_fixed_point",
          [](const Eigen::VectorXd& x0, const Eigen::VectorXd& s0,
             const Eigen::VectorXd& y0, const Eigen::VectorXd& rates,
             const Eigen::VectorXd& xi, double gamma,
             const ProtocolParams& params) {
              const FixedPoint fp =
                  predict_fixed_point(x0, s0, y0, rates, xi, gamma, params);
              return py::make_tuple(fp.x_star, fp.r_star);
          });

    py::class_<StabilityReport>(m, "StabilityReport")
        .def_readonly("connected", &StabilityReport::connected)
        .def_readonly("multiplicity_of_one", &StabilityReport::multiplicity_of_one)
        .def_readonly("spectral_margin", &StabilityReport::spectral_margin)
        .def_readonly("p_ok", &StabilityReport::p_ok)
        .def_readonly("gain_ok", &StabilityReport::gain_ok)
        .def_readonly("tau_ok", &StabilityReport::tau_ok)
        .def_readonly("tau_bound", &StabilityReport::tau_bound)
        .def_readonly("tau_bound_topology_free",
                      &StabilityReport::tau_bound_topology_free)
        .def_readonly("all_real_spectrum", &StabilityReport::all_real_spectrum)
        .def_readonly("mu_max", &StabilityReport::mu_max)
        .def_readonly("spectrally_stable", &StabilityReport::spectrally_stable)
        .def_readonly("conditions_match_spectrum",
                      &StabilityReport::conditions_match_spectrum)
        .def_property_readonly("verdict", [](const StabilityReport& r) {
            return std::string(to_string(r.verdict));
        });

    m.def("full_stability_report", &full_stability_report, py::arg("topology"),
          py::arg("rates"), py::arg("params"));
    m.def(
        "factorization_check",
        [](const Eigen::MatrixXd& laplacian, const Eigen::VectorXd& rates,
           const ProtocolParams& params) {
            const FactorizationCheck fact = factorization_check(laplacian, rates, params);
            py::dict out;
            out["eigenvalues_of_a"] = fact.eigenvalues_of_a;
            out["factor_roots"] = fact.factor_roots;
            out["match_residual"] = fact.match_residual;
            out["multiplicity_of_one"] = fact.multiplicity_of_one;
            return out;
        },
        py::arg("laplacian"), py::arg("rates"), py::arg("params"));
    m.def(
        "jordan_chain",
        [](const Eigen::MatrixXd& laplacian, const Eigen::VectorXd& rates,
           const ProtocolParams& params, const Eigen::VectorXd& xi) {
            const JordanChain chain = jordan_chain(laplacian, rates, params, xi);
            py::dict out;
            out["zeta1"] = chain.zeta1;
            out["zeta2"] = chain.zeta2;
            out["zeta3"] = chain.zeta3;
            out["eta1"] = chain.eta1;
            out["eta2"] = chain.eta2;
            out["eta3"] = chain.eta3;
            out["gamma"] = chain.gamma;
            out["xi"] = chain.xi;
            return out;
        },
        py::arg("laplacian"), py::arg("rates"), py::arg("params"),
        py::arg("xi"));

    py::class_<Trace>(m, "Trace")
        .def_readonly("nodes", &Trace::nodes)
        .def_readonly("tau", &Trace::tau)
        .def_readonly("rows", &Trace::rows)
        .def_readonly("node_ids", &Trace::node_ids)
        .def_readonly("reference_index", &Trace::reference_index)
        .def_readonly("diverged_at_step", &Trace::diverged_at_step)
        .def_property_readonly("diverged",
                               [](const Trace& t) {
                                   return t.status == RunStatus::Diverged;
                               })
        .def_property_readonly(
            "x", [](const Trace& t) { return trace_matrix(t, t.x); })
        .def_property_readonly(
            "s", [](const Trace& t) { return trace_matrix(t, t.s); })
        .def_property_readonly(
            "y", [](const Trace& t) { return trace_matrix(t, t.y); })
        .def_property_readonly("offsets",
                               [](const Trace& t) {
                                   Eigen::MatrixXd m(t.rows, t.nodes);
                                   for (int row = 0; row < t.rows; ++row) {
                                       for (int col = 0; col < t.nodes; ++col) {
                                           m(row, col) = t.offset(row, col);
                                       }
                                   }
                                   return m;
                               })
        .def_readonly("noises", &Trace::noises,
                      "realized per-edge measurement perturbations per step");

    m.def(
        "run_config_text",
        [](const std::string& text) { return run(parse_config_text(text)); },
        py::arg("config_json"), "parse a config document and run it");
    m.def(
        "analyze_config_text",
        [](const std::string& text) {
            const SimulationConfig config = parse_config_text(text);
            return full_stability_report(final_topology(config),
                                         rates_of(config), config.params);
        },
        py::arg("config_json"));
    m.def("canonicalize_config", [](const std::string& text) {
        return canonical_dump(config_to_json(parse_config_text(text)));
    });
    m.def("trace_csv", &trace_csv, py::arg("trace"));

    m.def(
        "mean_relative_deviation",
        [](const Trace& trace, int begin, int end) {
            return mean_relative_deviation(trace, {begin, end});
        },
        py::arg("trace"), py::arg("begin"), py::arg("end"));
    m.def(
        "confidence_interval",
        [](const Trace& trace, int begin, int end, double percentile) {
            return confidence_interval(trace, {begin, end}, percentile);
        },
        py::arg("trace"), py::arg("begin"), py::arg("end"),
        py::arg("percentile"));
    m.def(
        "fit_synchronized_line",
        [](const Trace& trace, int begin, int end) {
            const LineFit fit = fit_synchronized_line(trace, {begin, end});
            return py::make_tuple(fit.r_hat, fit.x_hat, fit.slope_spread,
                                  fit.intercept_spread);
        },
        py::arg("trace"), py::arg("begin"), py::arg("end"));
    m.def(
        "detect_convergence",
        [](const Trace& trace, double threshold, int hold) {
            const ConvergenceResult conv =
                detect_convergence(trace, threshold, hold);
            return py::make_tuple(conv.converged, conv.first_step);
        },
        py::arg("trace"), py::arg("threshold"), py::arg("hold"));

    m.def("params_profile", &params_profile, py::arg("name"));
    m.def("profile_names", &profile_names);
    m.def("preset_names", [] {
        std::vector<std::string> names;
        for (const auto& descriptor : preset_list()) names.push_back(descriptor.name);
        return names;
    });
    m.def(
        "preset_config_text",
        [](const std::string& name, std::optional<std::uint64_t> seed) {
            return canonical_dump(config_to_json(make_preset(name, seed)));
        },
        py::arg("name"), py::arg("seed") = std::nullopt);
    m.def(
        "run_experiment_two",
        [](int k, double jitter_max, std::uint64_t seed) {
            return run_experiment_two(k, jitter_max, seed);
        },
        py::arg("k"), py::arg("jitter_max") = 10e-3, py::arg("seed") = 1001);

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<DisconnectedGraphError>(m, "DisconnectedGraphError");
}
