#include "tempro/profile.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tempro::profile {

double CorrelationCurve::at_lag(std::int64_t lag) const {
    const std::int64_t T = (static_cast<std::int64_t>(values.size()) + 1) / 2;
    const std::int64_t idx = lag + (T - 1);
    if (idx < 0 || idx >= static_cast<std::int64_t>(values.size()))
        throw ShapeError("CorrelationCurve: lag out of range");
    return values[static_cast<std::size_t>(idx)];
}

TemporalProfile extract_profile(const sim::Sequence& seq, std::int64_t x, std::int64_t y) {
    const std::int64_t T = seq.frames_count(), H = seq.height(), W = seq.width();
    if (x < 0 || x >= W || y < 0 || y >= H)
        throw ShapeError("extract_profile: pixel (" + std::to_string(x) + "," + std::to_string(y) + ") out of bounds");
    TemporalProfile p;
    p.x = x;
    p.y = y;
    p.source = seq.name;
    p.values.resize(static_cast<std::size_t>(T));
    const auto d = seq.frames.data();
    for (std::int64_t t = 0; t < T; ++t)
        p.values[static_cast<std::size_t>(t)] = d[static_cast<std::size_t>((t * H + y) * W + x)];
    return p;
}

CorrelationCurve correlation(const TemporalProfile& profile) {
    const std::int64_t T = static_cast<std::int64_t>(profile.values.size());
    if (T == 0) throw ShapeError("correlation: empty profile");
    double mean = 0.0;
    for (double v : profile.values) mean += v;
    mean /= static_cast<double>(T);
    std::vector<double> f(profile.values.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = profile.values[i] - mean;

    CorrelationCurve c;
    c.lags.resize(static_cast<std::size_t>(2 * T - 1));
    c.values.resize(static_cast<std::size_t>(2 * T - 1));
    for (std::int64_t tau = -(T - 1); tau <= T - 1; ++tau) {
        double acc = 0.0;
        const std::int64_t t0 = std::max<std::int64_t>(0, tau);
        const std::int64_t t1 = std::min<std::int64_t>(T, T + tau);
        for (std::int64_t t = t0; t < t1; ++t)
            acc += f[static_cast<std::size_t>(t)] * f[static_cast<std::size_t>(t - tau)];
        const std::size_t idx = static_cast<std::size_t>(tau + T - 1);
        c.lags[idx] = tau;
        c.values[idx] = acc;
    }
    return c;
}

CorrelationCurve smooth(const CorrelationCurve& curve, int window) {
    if (window < 1 || window % 2 == 0) throw ShapeError("smooth: window must be odd and positive");
    if (window > static_cast<int>(curve.values.size())) throw ShapeError("smooth: window larger than curve");
    CorrelationCurve out = curve;
    const std::int64_t n = static_cast<std::int64_t>(curve.values.size());
    const std::int64_t half = window / 2;
    out.smoothed.resize(curve.values.size());
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t lo = std::max<std::int64_t>(0, i - half);
        const std::int64_t hi = std::min<std::int64_t>(n - 1, i + half);
        double acc = 0.0;
        for (std::int64_t k = lo; k <= hi; ++k) acc += curve.values[static_cast<std::size_t>(k)];
        out.smoothed[static_cast<std::size_t>(i)] = acc / static_cast<double>(hi - lo + 1);
    }
    return out;
}

CorrelationCurve mix_and_analyze(const TemporalProfile& target, const TemporalProfile& interference,
                                 double sigma, int smooth_window) {
    if (target.values.size() != interference.values.size())
        throw ShapeError("mix_and_analyze: profiles must have equal length");
    const std::size_t n = target.values.size();
    if (n == 0) throw ShapeError("mix_and_analyze: empty profiles");

    TemporalProfile mixed = target;
    if (sigma != 0.0) {
        double mean = 0.0;
        for (double v : interference.values) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : interference.values) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        if (var <= 0.0) throw NumericError("mix_and_analyze: zero-variance interference with sigma > 0");
        const double k = sigma / std::sqrt(var);
        for (std::size_t i = 0; i < n; ++i) mixed.values[i] += k * (interference.values[i] - mean);
    }
    return smooth(correlation(mixed), smooth_window);
}

std::string profile_csv(const TemporalProfile& profile) {
    std::ostringstream os;
    os << "t,value\n";
    for (std::size_t t = 0; t < profile.values.size(); ++t) os << t << ',' << profile.values[t] << '\n';
    return os.str();
}

std::string correlation_csv(const CorrelationCurve& curve, bool with_normalized) {
    std::ostringstream os;
    os << "lag,value,smoothed";
    if (with_normalized) os << ",value_norm,smoothed_norm";
    os << '\n';
    const double r0 = curve.at_lag(0);
    const double denom = r0 != 0.0 ? r0 : 1.0;
    for (std::size_t i = 0; i < curve.values.size(); ++i) {
        const double sm = curve.smoothed.empty() ? curve.values[i] : curve.smoothed[i];
        os << curve.lags[i] << ',' << curve.values[i] << ',' << sm;
        if (with_normalized) os << ',' << curve.values[i] / denom << ',' << sm / denom;
        os << '\n';
    }
    return os.str();
}

}  // namespace tempro::profile
