#include "skewless/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace skewless {

namespace {

void require_window(const Trace& trace, Window window) {
    if (window.begin < 0 || window.end > trace.rows ||
        window.begin >= window.end) {
        throw std::invalid_argument("empty or out-of-range window");
    }
}

}  // namespace

Window default_window(const Trace& trace) {
    const int skip = trace.rows / 5;
    return {skip, trace.rows};
}

double mean_relative_deviation(const Trace& trace, Window window) {
    require_window(trace, window);
    if (trace.nodes < 2) {
        throw std::invalid_argument("at least two nodes are required");
    }
    double total = 0.0;
    const int samples = window.size();
    for (int i = 0; i < trace.nodes; ++i) {
        if (i == trace.reference_index) continue;
        double acc = 0.0;
        for (int row = window.begin; row < window.end; ++row) {
            const double d = trace.offset(row, i);
            acc += d * d;
        }
        total += acc / samples;
    }
    return std::sqrt(total / (trace.nodes - 1));
}

double confidence_interval(const Trace& trace, Window window,
                           double percentile) {
    require_window(trace, window);
    if (!(percentile > 0.0) || percentile > 100.0) {
        throw std::invalid_argument("percentile must lie in (0, 100]");
    }
    std::vector<double> pool;
    pool.reserve(static_cast<size_t>(window.size()) * trace.nodes);
    for (int row = window.begin; row < window.end; ++row) {
        for (int i = 0; i < trace.nodes; ++i) {
            if (i == trace.reference_index) continue;
            pool.push_back(std::abs(trace.offset(row, i)));
        }
    }
    if (pool.empty()) throw std::invalid_argument("empty sample pool");
    std::sort(pool.begin(), pool.end());
    // Nearest-rank: the ceil(q/100 * N)-th smallest sample.
    const size_t rank = static_cast<size_t>(
        std::ceil(percentile / 100.0 * static_cast<double>(pool.size())));
    return pool[std::max<size_t>(rank, 1) - 1];
}

LineFit fit_synchronized_line(const Trace& trace, Window tail) {
    require_window(trace, tail);
    if (tail.size() < 2) {
        throw std::invalid_argument("line fit needs at least two rows");
    }
    const int m = tail.size();
    double t_mean = 0.0;
    for (int row = tail.begin; row < tail.end; ++row) t_mean += row * trace.tau;
    t_mean /= m;
    double t_var = 0.0;
    for (int row = tail.begin; row < tail.end; ++row) {
        const double dt = row * trace.tau - t_mean;
        t_var += dt * dt;
    }

    std::vector<double> slopes(trace.nodes), intercepts(trace.nodes);
    for (int i = 0; i < trace.nodes; ++i) {
        double x_mean = 0.0;
        for (int row = tail.begin; row < tail.end; ++row) {
            x_mean += trace.at_x(row, i);
        }
        x_mean /= m;
        double cov = 0.0;
        for (int row = tail.begin; row < tail.end; ++row) {
            cov += (row * trace.tau - t_mean) * (trace.at_x(row, i) - x_mean);
        }
        slopes[i] = cov / t_var;
        intercepts[i] = x_mean - slopes[i] * t_mean;
    }

    LineFit fit;
    for (int i = 0; i < trace.nodes; ++i) {
        fit.r_hat += slopes[i];
        fit.x_hat += intercepts[i];
    }
    fit.r_hat /= trace.nodes;
    fit.x_hat /= trace.nodes;
    for (int i = 0; i < trace.nodes; ++i) {
        fit.slope_spread = std::max(fit.slope_spread,
                                    std::abs(slopes[i] - fit.r_hat));
        fit.intercept_spread = std::max(fit.intercept_spread,
                                        std::abs(intercepts[i] - fit.x_hat));
    }
    return fit;
}

ConvergenceResult detect_convergence(const Trace& trace, double threshold,
                                     int hold) {
    if (!(threshold > 0.0)) {
        throw std::invalid_argument("threshold must be positive");
    }
    if (hold < 1) throw std::invalid_argument("hold must be at least one row");
    int streak = 0;
    for (int row = 0; row < trace.rows; ++row) {
        if (trace.spread(row) < threshold) {
            ++streak;
            if (streak >= hold) return {true, row - hold + 1};
        } else {
            streak = 0;
        }
    }
    return {false, -1};
}

MetricsSummary summarize(const Trace& trace, Window window,
                         double convergence_threshold, int hold) {
    MetricsSummary summary;
    summary.window = window;
    summary.sqrt_s_n = mean_relative_deviation(trace, window);
    summary.ci99 = confidence_interval(trace, window, 99.0);
    summary.ci100 = confidence_interval(trace, window, 100.0);
    const ConvergenceResult conv =
        detect_convergence(trace, convergence_threshold, hold);
    summary.converged = conv.converged;
    summary.first_converged_step = conv.first_step;
    const LineFit fit = fit_synchronized_line(trace, window);
    summary.empirical_r_star = fit.r_hat;
    summary.empirical_x_star = fit.x_hat;
    return summary;
}

}  // namespace skewless
