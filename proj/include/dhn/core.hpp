#ifndef DHN_CORE_HPP
#define DHN_CORE_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dhn {

/// Mathematical constant pi, spelled out so no feature-test macro is needed.
inline constexpr double kPi = 3.14159265358979323846;

/// Absolute tolerance used when comparing times that come from step counters.
inline constexpr double kTimeEps = 1e-9;

/**
 * @brief Error thrown when a model or scenario fails structural validation.
 */
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

/**
 * @brief Error thrown when two recordings cannot be laid over a shared time
 *        span (still a validation failure, but worth telling apart: callers
 *        report it as a data mismatch rather than a malformed input).
 */
class span_error : public validation_error {
public:
    explicit span_error(const std::string& what) : validation_error(what) {}
};

/**
 * @brief Error thrown when a numeric routine cannot produce a usable result
 *        (non-convergence, infeasible operating point, unstable step size).
 */
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

/**
 * @brief Piecewise-linear function of time.
 *
 * Breakpoints must be strictly increasing in time.  Evaluation clamps to the
 * first/last value outside the covered range, so a single breakpoint behaves
 * as a constant.
 */
class PiecewiseLinear {
public:
    PiecewiseLinear() = default;

    /** @brief Constant profile. */
    explicit PiecewiseLinear(double value) { points_.emplace_back(0.0, value); }

    explicit PiecewiseLinear(std::vector<std::pair<double, double>> points)
        : points_(std::move(points)) {
        if (points_.empty())
            throw std::invalid_argument("piecewise profile needs at least one point");
        for (std::size_t i = 1; i < points_.size(); ++i)
            if (!(points_[i].first > points_[i - 1].first))
                throw std::invalid_argument("piecewise profile times must be strictly increasing");
    }

    bool empty() const { return points_.empty(); }

    const std::vector<std::pair<double, double>>& points() const { return points_; }

    double operator()(double t) const {
        if (points_.empty())
            throw std::logic_error("evaluating an empty piecewise profile");
        if (t <= points_.front().first) return points_.front().second;
        if (t >= points_.back().first) return points_.back().second;
        auto hi = std::upper_bound(points_.begin(), points_.end(), t,
                                   [](double x, const auto& p) { return x < p.first; });
        auto lo = hi - 1;
        const double w = (t - lo->first) / (hi->first - lo->first);
        return lo->second + w * (hi->second - lo->second);
    }

    /// True when every breakpoint holds the same value.
    bool is_constant() const {
        for (const auto& p : points_)
            if (p.second != points_.front().second) return false;
        return true;
    }

private:
    std::vector<std::pair<double, double>> points_;
};

/** @brief Clamp @p x into [lo, hi]. */
inline double clamp(double x, double lo, double hi) {
    return std::min(std::max(x, lo), hi);
}

/** @brief Relative difference |a-b| / max(|a|,|b|,floor). */
inline double rel_diff(double a, double b, double floor_ = 1e-300) {
    const double scale = std::max({std::fabs(a), std::fabs(b), floor_});
    return std::fabs(a - b) / scale;
}

}  // namespace dhn

#endif  // DHN_CORE_HPP
