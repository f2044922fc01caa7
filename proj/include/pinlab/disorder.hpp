#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pinlab/rng.hpp"

// Heavy-tailed environment: a zero-mean shifted Pareto law with support
// [-a, inf) and tail index gamma in (1,2), plus its size-biased tilt
// (1 + beta x) dP, with exact CDF/tail queries and exact samplers.

namespace pinlab {

struct EnvironmentLaw {
    double gamma = 0.0; // tail index, in (1,2)
    double a = 0.0;     // support edge: omega >= -a almost surely
    double c = 0.0;     // scale, c = a (gamma - 1)
    double c_p = 0.0;   // tail constant: tail(x) x^gamma -> c_p

    // omega = c (Y - y0) with Y Pareto(gamma) on [1, inf); y0 makes the mean 0
    double y0() const { return gamma / (gamma - 1.0); }
    double support_min() const { return -a; }

    // map omega-value to the underlying Pareto coordinate
    double pareto_coord(double x) const { return x / c + y0(); }

    /// P[omega >= x]; returns 1 below the support edge.
    double tail(double x) const {
        const double y = pareto_coord(x);
        if (y <= 1.0) return 1.0;
        return std::pow(y, -gamma);
    }

    double cdf(double x) const { return 1.0 - tail(x); }

    /// Exact quantile: smallest x with cdf(x) >= u, for u in [0,1).
    double quantile(double u) const {
        return c * (std::pow(1.0 - u, -1.0 / gamma) - y0());
    }

    double median() const { return quantile(0.5); }

    /// One exact inverse-CDF draw: Y = U^{-1/gamma} with U uniform on (0,1).
    double sample(RngStream& rng) const {
        return c * (std::pow(rng.next_open(), -1.0 / gamma) - y0());
    }
};

inline EnvironmentLaw make_env_law(double gamma, double a) {
    if (!(gamma > 1.0 && gamma < 2.0))
        throw std::domain_error("make_env_law: gamma outside (1,2)");
    if (!(a > 0.0 && a < 1.0))
        throw std::domain_error("make_env_law: a outside (0,1)");
    EnvironmentLaw law;
    law.gamma = gamma;
    law.a = a;
    law.c = a * (gamma - 1.0);
    law.c_p = std::pow(law.c, gamma);
    return law;
}

inline double env_tail(const EnvironmentLaw& law, double x) { return law.tail(x); }

/// Size-biased law (1 + beta x) dP; total mass 1 because the base mean is 0.
/// The density ratio is bounded below by 1 - beta a > 0.
struct TiltedLaw {
    EnvironmentLaw base;
    double beta = 0.0;

    // With y the Pareto coordinate and q = a beta gamma:
    //   cdf = (1-q)(1 - y^{-gamma}) + q (1 - y^{1-gamma}).
    // q may exceed 1; the expression stays a valid increasing CDF because the
    // tilted density (1 + beta x) f(x) is positive everywhere on the support.
    double cdf(double x) const {
        const double y = base.pareto_coord(x);
        if (y <= 1.0) return 0.0;
        const double q = base.a * beta * base.gamma;
        return (1.0 - q) * (1.0 - std::pow(y, -base.gamma)) +
               q * (1.0 - std::pow(y, 1.0 - base.gamma));
    }

    /// tilted P[omega >= x].
    double tail(double x) const {
        const double y = base.pareto_coord(x);
        if (y <= 1.0) return 1.0;
        const double q = base.a * beta * base.gamma;
        return (1.0 - q) * std::pow(y, -base.gamma) + q * std::pow(y, 1.0 - base.gamma);
    }

    /// Inverse-CDF draw by bracketed bisection/secant on the Pareto coordinate;
    /// stops when the CDF value is within 1e-12 of the target probability.
    double sample(RngStream& rng) const {
        const double u = rng.next_double();
        const double q = base.a * beta * base.gamma;
        const auto G = [&](double y) {
            return (1.0 - q) * (1.0 - std::pow(y, -base.gamma)) +
                   q * (1.0 - std::pow(y, 1.0 - base.gamma));
        };
        double lo = 1.0, hi = 2.0;
        while (G(hi) < u) {
            lo = hi;
            hi *= 2.0;
        }
        double g_lo = G(lo), g_hi = G(hi);
        double y = hi;
        for (int iter = 0; iter < 500; ++iter) {
            // secant proposal, midpoint when it falls outside the bracket
            y = (g_hi > g_lo) ? lo + (u - g_lo) * (hi - lo) / (g_hi - g_lo)
                              : 0.5 * (lo + hi);
            if (!(y > lo && y < hi)) y = 0.5 * (lo + hi);
            const double g = G(y);
            if (std::abs(g - u) <= 1e-12) break;
            if (g < u) {
                lo = y;
                g_lo = g;
            } else {
                hi = y;
                g_hi = g;
            }
            if (hi - lo <= 1e-15 * hi) break;
        }
        return base.c * (y - base.y0());
    }
};

inline TiltedLaw make_tilted(const EnvironmentLaw& law, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0))
        throw std::domain_error("make_tilted: beta outside [0,1]");
    return TiltedLaw{law, beta};
}

inline double tilted_cdf(const EnvironmentLaw& law, double beta, double x) {
    return make_tilted(law, beta).cdf(x);
}

inline double sample_tilted(const EnvironmentLaw& law, double beta, RngStream& rng) {
    return make_tilted(law, beta).sample(rng);
}

/// One environment realization with its seed kept for provenance.
struct EnvironmentSample {
    std::vector<double> omega;
    std::uint64_t seed = 0;
};

inline EnvironmentSample sample_env(const EnvironmentLaw& law, std::uint64_t n,
                                    std::uint64_t seed) {
    if (n < 1) throw std::domain_error("sample_env: N < 1");
    EnvironmentSample out;
    out.seed = seed;
    out.omega.resize(n);
    RngStream rng(seed);
    for (auto& w : out.omega) w = law.sample(rng);
    return out;
}

} // namespace pinlab
