#pragma once

#include <optional>
#include <string>
#include <vector>

#include "skewless/sim.hpp"

namespace skewless {

/// Named gain profiles: "default" (k1=1.1, k2=1.0, p=0.99, c=0.7),
/// "long-poll" (k1=1.388, k2=1.374, p=1.98, tau=16) and "fast-poll"
/// (k1=0.1385, k2=0.1363, p=0.62, tau=0.25). Throws on unknown names.
ProtocolParams params_profile(const std::string& name);
std::vector<std::string> profile_names();

/// Frozen experiment presets (see docs/presets.md):
///   exp1-star           two nodes, tau = 1 s, stable
///   exp1-loop-unstable  loop forms mid-run at step 60, tau = 1 s, diverges
///   exp1-loop-fixed     same loop from step 0, tau = 0.5 s, stable
///   exp2-wheel-K        9 clients + noisy leader, ring degree 2K (K=0..4)
///   naive-instability   two nodes, skew-only offset feedback, oscillates
struct PresetDescriptor {
    std::string name;
    std::string summary;
};

std::vector<PresetDescriptor> preset_list();
bool is_preset(const std::string& name);
SimulationConfig make_preset(const std::string& name,
                             std::optional<std::uint64_t> seed = {});

/// One acceptance check of a reproduction run.
struct PresetCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ReproductionResult {
    std::string preset;
    std::vector<PresetCheck> checks;
    Trace trace;
    SimulationConfig config;

    bool all_pass() const;
};

/// Runs a preset and evaluates its frozen pass/fail checks. "exp2-wheel"
/// runs the whole K = 0..4 sweep and checks the deviation trend.
std::vector<ReproductionResult> reproduce_preset(const std::string& name,
                                                 std::optional<std::uint64_t> seed = {});

}  // namespace skewless
