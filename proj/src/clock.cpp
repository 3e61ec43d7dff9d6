#include "skewless/clock.hpp"

#include <cmath>

namespace skewless {

namespace {

bool finite(double v) { return std::isfinite(v); }

void require_finite_state(const ClockState& state) {
    if (!finite(state.r) || !finite(state.x) || !finite(state.s) ||
        !finite(state.y)) {
        throw std::domain_error("clock state has non-finite fields");
    }
    if (state.r <= 0.0) {
        throw std::domain_error("clock rate r must be positive");
    }
}

}  // namespace

void ProtocolParams::validate() const {
    if (!finite(kappa1) || !finite(kappa2) || !finite(p) || !finite(tau) ||
        !finite(c)) {
        throw std::invalid_argument("protocol parameters must be finite");
    }
    if (tau <= 0.0) {
        throw std::invalid_argument("poll interval tau must be positive");
    }
    if (c <= 0.0) {
        throw std::invalid_argument("commit factor c must be positive");
    }
}

ClockState advance(const ClockState& state, const ProtocolParams& params,
                   const CorrectionPair& corr) {
    require_finite_state(state);
    if (!finite(corr.u_x) || !finite(corr.u_s)) {
        throw std::domain_error("corrections must be finite");
    }
    if (!finite(params.tau)) {
        throw std::domain_error("poll interval must be finite");
    }
    ClockState next = state;
    next.x = state.x + params.tau * state.r * state.s + corr.u_x;
    next.s = state.s + corr.u_s;
    return next;
}

ClockState skewless_update(const ClockState& state, double weighted_offset,
                           const ProtocolParams& params) {
    require_finite_state(state);
    if (!finite(weighted_offset)) {
        throw std::domain_error("weighted offset must be finite");
    }
    ClockState next = state;
    next.s = state.s + params.kappa1 * weighted_offset - params.kappa2 * state.y;
    next.y = params.p * weighted_offset + (1.0 - params.p) * state.y;
    return next;
}

double relative_frequency_error(double d_now, double d_prev, double x_now,
                                double x_prev) {
    if (!finite(d_now) || !finite(d_prev) || !finite(x_now) || !finite(x_prev)) {
        throw std::domain_error("frequency error inputs must be finite");
    }
    if (x_now == x_prev) {
        throw std::domain_error(
            "degenerate interval: clock did not advance between measurements");
    }
    return (d_now - d_prev) / (x_now - x_prev);
}

CorrectionPair baseline_correction(const BaselineScheme& scheme, double offset,
                                   double freq_error) {
    switch (scheme.kind) {
        case BaselineKind::OffsetOnly:
            return {scheme.kappa1 * offset, 0.0};
        case BaselineKind::OffsetPlusFreq:
            return {scheme.kappa1 * offset + scheme.kappa2 * freq_error, 0.0};
        case BaselineKind::SkewOnly:
            return {0.0, scheme.kappa1 * offset + scheme.kappa2 * freq_error};
        case BaselineKind::SkewAndOffset:
            return {scheme.kappa1 * offset, scheme.kappa2 * offset};
        case BaselineKind::NaiveSkew:
            return {0.0, scheme.kappa1 * offset};
    }
    throw std::domain_error("unknown baseline scheme");
}

}  // namespace skewless
