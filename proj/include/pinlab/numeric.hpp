#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

// Small numerical toolbox: compensated summation, streaming log-sum-exp,
// online mean/variance, least squares, and the Euler-Maclaurin tail used to
// evaluate power-law transform sums over astronomically long supports.

namespace pinlab {

/// Neumaier-compensated accumulator.
class KahanSum {
  public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Streaming log(sum(exp(x_i))) with running-max rescaling; no allocation.
class LogSumExp {
  public:
    void add(double x) {
        if (x == -std::numeric_limits<double>::infinity()) return;
        if (x <= max_) {
            acc_ += std::exp(x - max_);
        } else {
            acc_ = acc_ * std::exp(max_ - x) + 1.0;
            max_ = x;
        }
    }
    bool empty() const { return acc_ == 0.0; }
    double value() const {
        if (empty()) return -std::numeric_limits<double>::infinity();
        return max_ + std::log(acc_);
    }

  private:
    double max_ = -std::numeric_limits<double>::infinity();
    double acc_ = 0.0;
};

/// Welford online mean and standard error.
class MeanAccumulator {
  public:
    void add(double x) {
        ++n_;
        double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    std::uint64_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const {
        return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
    }
    double stderror() const {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }

  private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Point estimate with standard error, as produced by the Monte Carlo drivers.
struct MCEstimate {
    double estimate = 0.0;
    double stderror = 0.0;
    std::uint64_t n_samples = 0;
};

inline MCEstimate to_estimate(const MeanAccumulator& acc) {
    return MCEstimate{acc.mean(), acc.stderror(), acc.count()};
}

/// Ordinary least squares slope of y against x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("ols_slope: need two or more paired points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) { mx += x[i]; my += y[i]; }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw std::invalid_argument("ols_slope: degenerate abscissae");
    return sxy / sxx;
}

/// Upper incomplete gamma for negative parameter: Gamma(-a, z), a in (0,1),
/// via one step of the recurrence Gamma(s+1,z) = s*Gamma(s,z) + z^s e^{-z}.
inline double upper_gamma_neg(double a, double z) {
    if (!(a > 0.0 && a < 1.0) || !(z > 0.0))
        throw std::domain_error("upper_gamma_neg: need a in (0,1), z > 0");
    return (std::pow(z, -a) * std::exp(-z) - boost::math::tgamma(1.0 - a, z)) / a;
}

/// sum_{n=1}^{n_max} e^{-n x} n^{-(1+a)} for x >= 0, supporting horizons far
/// beyond what can be summed directly: brute force (compensated) up to
/// n_brute, then Euler-Maclaurin with the incomplete-gamma integral
///   int_{n0}^{n_max} e^{-x t} t^{-(1+a)} dt = x^a [Gamma(-a,x n0) - Gamma(-a,x n_max)].
inline double exp_power_sum(double a, double x, std::uint64_t n_max,
                            std::uint64_t n_brute = 1000000) {
    if (!(a > 0.0 && a < 1.0)) throw std::domain_error("exp_power_sum: a outside (0,1)");
    if (x < 0.0) throw std::domain_error("exp_power_sum: negative x");
    const auto n0 = static_cast<double>(n_brute < n_max ? n_brute : n_max);
    KahanSum brute;
    for (double n = n0; n >= 1.0; n -= 1.0) {
        // e^{-nx} underflows long before the power factor matters
        if (n * x < 745.0) brute.add(std::exp(-n * x) * std::pow(n, -(1.0 + a)));
    }
    if (n_brute >= n_max) return brute.value();

    const auto nm = static_cast<double>(n_max);
    const auto f = [&](double t) { return std::exp(-x * t) * std::pow(t, -(1.0 + a)); };
    const auto fp = [&](double t) {
        return -std::exp(-x * t) * (x * std::pow(t, -(1.0 + a)) + (1.0 + a) * std::pow(t, -(2.0 + a)));
    };
    double integral;
    if (x == 0.0) {
        integral = (std::pow(n0, -a) - std::pow(nm, -a)) / a;
    } else {
        const double hi = x * nm < 700.0 ? upper_gamma_neg(a, x * nm) : 0.0;
        integral = std::pow(x, a) * (upper_gamma_neg(a, x * n0) - hi);
    }
    const double fm = x * nm < 745.0 ? f(nm) : 0.0;
    const double fpm = x * nm < 745.0 ? fp(nm) : 0.0;
    // sum_{n0..n_max} f(n) ~ integral + (f(n0)+f(n_max))/2 + (f'(n_max)-f'(n0))/12,
    // minus f(n0) because the brute-force part already owns it.
    const double tail = integral - 0.5 * f(n0) + 0.5 * fm + (fpm - fp(n0)) / 12.0;
    return brute.value() + tail;
}

} // namespace pinlab
