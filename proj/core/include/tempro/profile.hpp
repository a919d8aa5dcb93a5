#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tempro/simulator.hpp"

namespace tempro::profile {

/// Gray values of one spatial pixel across all frames.
struct TemporalProfile {
    std::vector<double> values;
    std::int64_t x = 0, y = 0;
    std::string source;
};

/// Discrete autocorrelation over lags -(T-1)..(T-1).
struct CorrelationCurve {
    std::vector<std::int64_t> lags;
    std::vector<double> values;
    std::vector<double> smoothed;  // empty until smooth() is applied

    std::int64_t lag_count() const { return static_cast<std::int64_t>(lags.size()); }
    double at_lag(std::int64_t lag) const;
};

TemporalProfile extract_profile(const sim::Sequence& seq, std::int64_t x, std::int64_t y);

/// Mean-removed zero-extension autocorrelation R(tau) = sum_t f(t) f(t-tau).
CorrelationCurve correlation(const TemporalProfile& profile);

/// Centered moving average with shrinking windows at the edges; window odd.
CorrelationCurve smooth(const CorrelationCurve& curve, int window);

/// Mean-removes `interference`, rescales it to standard deviation `sigma`,
/// adds it to `target`, and returns the smoothed correlation of the mixture.
CorrelationCurve mix_and_analyze(const TemporalProfile& target, const TemporalProfile& interference,
                                 double sigma, int smooth_window = 5);

/// CSV writers (columns: "t,value" and "lag,value,smoothed[,...]").
std::string profile_csv(const TemporalProfile& profile);
std::string correlation_csv(const CorrelationCurve& curve, bool with_normalized = false);

}  // namespace tempro::profile
