#pragma once

#include "skewless/sim.hpp"

namespace skewless {

/// Half-open row range [begin, end) of a trace.
struct Window {
    int begin = 0;
    int end = 0;

    int size() const { return end - begin; }
};

/// Rows after the initial 20% transient.
Window default_window(const Trace& trace);

/// Root mean square of the non-reference nodes' offsets to the reference,
/// averaged over the window: sqrt( 1/(n-1) * sum_i <offset_i^2> ).
double mean_relative_deviation(const Trace& trace, Window window);

/// Nearest-rank percentile of |offset| pooled over non-reference nodes and
/// the window; percentile = 100 gives the maximum.
double confidence_interval(const Trace& trace, Window window,
                           double percentile);

/// Per-node least-squares line x_i(t) ~ slope*t + intercept over the tail
/// (t anchored at row 0), averaged across nodes; the spreads measure how
/// far nodes are from a single shared line.
struct LineFit {
    double r_hat = 0.0;
    double x_hat = 0.0;
    double slope_spread = 0.0;
    double intercept_spread = 0.0;
};

LineFit fit_synchronized_line(const Trace& trace, Window tail);

struct ConvergenceResult {
    bool converged = false;
    int first_step = -1;
};

/// Converged when max_i x_i - min_i x_i stays below threshold for `hold`
/// consecutive rows; reports the first row of the earliest such stretch.
ConvergenceResult detect_convergence(const Trace& trace, double threshold,
                                     int hold);

struct MetricsSummary {
    double sqrt_s_n = 0.0;
    double ci99 = 0.0;
    double ci100 = 0.0;
    bool converged = false;
    int first_converged_step = -1;
    double empirical_r_star = 0.0;
    double empirical_x_star = 0.0;
    Window window;
};

MetricsSummary summarize(const Trace& trace, Window window,
                         double convergence_threshold, int hold);

}  // namespace skewless
