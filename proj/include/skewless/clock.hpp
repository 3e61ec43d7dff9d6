#pragma once

#include <stdexcept>

namespace skewless {

/// Protocol gains shared by every node: offset gain kappa1, damping gain
/// kappa2, averaging factor p, poll interval tau (seconds) and commit
/// factor c used to scale edge weights.
struct ProtocolParams {
    double kappa1 = 1.1;
    double kappa2 = 1.0;
    double p = 0.99;
    double tau = 1.0;
    double c = 0.7;

    /// kappa1 - kappa2, always recomputed from the stored gains.
    double delta_kappa() const { return kappa1 - kappa2; }

    /// Throws std::invalid_argument on non-finite values, tau <= 0 or c <= 0.
    void validate() const;
};

/// Per-node clock state. r is the true (hidden) rate of the hardware clock
/// relative to the reference, x the steered time estimate in seconds, s the
/// multiplicative skew correction and y the exponential average of past
/// weighted offsets.
struct ClockState {
    int node_id = 0;
    double r = 1.0;
    double x = 0.0;
    double s = 1.0;
    double y = 0.0;
};

/// One update's offset correction (seconds) and skew correction.
struct CorrectionPair {
    double u_x = 0.0;
    double u_s = 0.0;
};

enum class BaselineKind {
    OffsetOnly,      // u_x = k1*D
    OffsetPlusFreq,  // u_x = k1*D + k2*f_err
    SkewOnly,        // u_s = k1*D + k2*f_err
    SkewAndOffset,   // u_x = k1*D, u_s = k2*D
    NaiveSkew,       // u_s = k1*D (unstable)
};

/// A simplified correction rule from the standard protocol families, with
/// its own gains.
struct BaselineScheme {
    BaselineKind kind = BaselineKind::OffsetOnly;
    double kappa1 = 0.0;
    double kappa2 = 0.0;
};

/// Advances the clock by one poll interval: x' = x + tau*r*s + u_x,
/// s' = s + u_s. r and y are untouched. Throws std::domain_error if any
/// input is non-finite.
ClockState advance(const ClockState& state, const ProtocolParams& params,
                   const CorrectionPair& corr = {});

/// Skewless rule: s' = s + kappa1*wo - kappa2*y, y' = p*wo + (1-p)*y, where
/// wo is the already-aggregated weighted offset sum over neighbors. Never
/// touches x (offset corrections are identically zero by design).
ClockState skewless_update(const ClockState& state, double weighted_offset,
                           const ProtocolParams& params);

/// (d_now - d_prev) / (x_now - x_prev); equals (1 - r*s) / (r*s) for an
/// unsteered clock observed over one poll interval. Throws
/// std::domain_error when x_now == x_prev.
double relative_frequency_error(double d_now, double d_prev, double x_now,
                                double x_prev);

/// Correction pair for one of the baseline schemes given the measured
/// offset (seconds) and the relative frequency error. Only SkewOnly and
/// OffsetPlusFreq read freq_error.
CorrectionPair baseline_correction(const BaselineScheme& scheme, double offset,
                                   double freq_error);

}  // namespace skewless
