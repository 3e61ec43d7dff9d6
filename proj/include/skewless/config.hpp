#pragma once

#include <string>

#include <json.hpp>

#include "skewless/metrics.hpp"
#include "skewless/sim.hpp"
#include "skewless/stability.hpp"

namespace skewless {

/// Thrown on malformed configuration documents; the message carries the
/// offending location ("line N" for syntax errors, a JSON pointer-ish path
/// otherwise).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parses a version-1 configuration document. Node ids are mapped onto
/// internal indices in declaration order.
SimulationConfig parse_config(const nlohmann::json& doc);
SimulationConfig parse_config_text(const std::string& text);
SimulationConfig load_config(const std::string& path);

/// Inverse of parse_config, emitting the canonical field order.
nlohmann::json config_to_json(const SimulationConfig& config);

/// The topology in force once all scheduled events have fired (the base
/// topology when there are none); analysis targets this one.
const Topology& final_topology(const SimulationConfig& config);

/// Canonical serialization: fixed key order, two-space indentation and
/// round-trip ("%.17g") number formatting; canonicalizing twice is
/// byte-identical.
std::string canonical_dump(const nlohmann::json& doc);

nlohmann::json stability_report_to_json(const StabilityReport& report);
nlohmann::json metrics_to_json(const MetricsSummary& metrics);

/// Report documents produced by the command line tool.
nlohmann::json analysis_report(const SimulationConfig& config,
                               const StabilityReport& report);
nlohmann::json simulation_report(const SimulationConfig& config,
                                 const StabilityReport& report,
                                 const Trace& trace,
                                 const MetricsSummary& metrics);

/// Structural validation against the documented report schema
/// (docs/report-schema.md). Returns false and fills `error` on the first
/// violation.
bool validate_report(const nlohmann::json& report, std::string* error);

}  // namespace skewless
