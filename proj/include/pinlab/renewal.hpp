#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "pinlab/numeric.hpp"
#include "pinlab/rng.hpp"

// Power-law renewal processes: the inter-arrival law K(n) ~ c_k n^{-(1+alpha)}
// on a truncated support, the renewal mass function u(n) = P[n in tau], free
// and bridge samplers, and an exhaustive-enumeration oracle for small horizons.

namespace pinlab {

/// Supports larger than this are kept implicit: K(n) and tail sums are
/// evaluated by formula (+ Euler-Maclaurin) instead of materialized arrays.
inline constexpr std::uint64_t dense_support_limit = 10000000;

struct InterArrivalLaw {
    double alpha = 0.0;             // tail exponent in (0,1)
    std::uint64_t n_max = 0;        // truncation horizon
    std::vector<double> probs;      // K(1..n_max); empty in implicit mode
    std::vector<double> tails;      // tails[d] = P[gap > d], d = 0..n_max; dense mode only
    double c_k = 0.0;               // effective tail constant: K(n) = c_k * n^{-(1+alpha)}

    bool implicit_support() const { return probs.empty(); }

    double K(std::uint64_t n) const {
        if (n == 0 || n > n_max) return 0.0;
        if (!probs.empty()) return probs[n - 1];
        return c_k * std::pow(static_cast<double>(n), -(1.0 + alpha));
    }

    double log_K(std::uint64_t n) const {
        if (n == 0 || n > n_max) return -std::numeric_limits<double>::infinity();
        if (!probs.empty()) return std::log(probs[n - 1]);
        return std::log(c_k) - (1.0 + alpha) * std::log(static_cast<double>(n));
    }

    /// P[gap > d].
    double gap_tail(std::uint64_t d) const {
        if (d == 0) return 1.0;
        if (d >= n_max) return 0.0;
        if (!tails.empty()) return tails[d];
        return c_k * (exp_power_sum(alpha, 0.0, n_max) - exp_power_sum(alpha, 0.0, d));
    }

    /// Draw one gap by inverse CDF (dense mode only).
    std::uint64_t sample_gap(RngStream& rng) const {
        if (tails.empty())
            throw std::logic_error("sample_gap: sampling needs a dense-support law");
        const double target = 1.0 - rng.next_double(); // in (0,1]
        // smallest d in [1, n_max] with tails[d] < target (tails is non-increasing)
        std::uint64_t lo = 1, hi = n_max;
        while (lo < hi) {
            std::uint64_t mid = lo + (hi - lo) / 2;
            if (tails[mid] < target)
                hi = mid;
            else
                lo = mid + 1;
        }
        return lo;
    }
};

/// Truncated-and-renormalized zeta law: K(n) = n^{-(1+alpha)} / Z on 1..n_max,
/// Z = sum of the weights, c_k = 1/Z.
inline InterArrivalLaw make_zeta_law(double alpha, std::uint64_t n_max) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("make_zeta_law: alpha outside (0,1)");
    if (n_max < 2)
        throw std::domain_error("make_zeta_law: n_max < 2");
    InterArrivalLaw law;
    law.alpha = alpha;
    law.n_max = n_max;
    if (n_max <= dense_support_limit) {
        law.probs.resize(n_max);
        KahanSum z;
        for (std::uint64_t n = n_max; n >= 1; --n) // ascending magnitude
            z.add(std::pow(static_cast<double>(n), -(1.0 + alpha)));
        const double Z = z.value();
        law.c_k = 1.0 / Z;
        for (std::uint64_t n = 1; n <= n_max; ++n)
            law.probs[n - 1] = std::pow(static_cast<double>(n), -(1.0 + alpha)) / Z;
        law.tails.resize(n_max + 1);
        law.tails[n_max] = 0.0;
        KahanSum t;
        for (std::uint64_t d = n_max; d >= 1; --d) {
            t.add(law.probs[d - 1]);
            law.tails[d - 1] = t.value();
        }
        // exact unit total in the tail table, whatever rounding says
        law.tails[0] = 1.0;
    } else {
        law.c_k = 1.0 / exp_power_sum(alpha, 0.0, n_max);
    }
    return law;
}

/// Renewal mass function u(0..N); holds a non-owning reference to the law,
/// which must outlive the table.
struct RenewalMassTable {
    std::vector<double> u;
    const InterArrivalLaw* law = nullptr;

    double at(std::uint64_t n) const { return u[n]; }
    std::uint64_t horizon() const { return u.size() - 1; }
};

/// u(n) = sum_{k=1}^{min(n,n_max)} K(k) u(n-k), u(0) = 1.
/// O(N * min(N, n_max)) time; linear domain (u in (0,1], no underflow here).
inline RenewalMassTable renewal_mass(const InterArrivalLaw& law, std::uint64_t N) {
    if (N < 1) throw std::domain_error("renewal_mass: N < 1");
    const std::uint64_t kern_max = std::min(N, law.n_max);
    std::vector<double> kvec(kern_max);
    for (std::uint64_t k = 1; k <= kern_max; ++k) kvec[k - 1] = law.K(k);

    std::vector<double> u(N + 1, 0.0), ur(N + 1, 0.0);
    u[0] = 1.0;
    ur[N] = 1.0; // ur[N - m] mirrors u[m] so the inner product is contiguous
    for (std::uint64_t n = 1; n <= N; ++n) {
        const std::uint64_t kern = std::min(n, kern_max);
        const double* kv = kvec.data();
        const double* uv = ur.data() + (N - n + 1);
        double acc = 0.0;
        for (std::uint64_t k = 0; k < kern; ++k) acc += kv[k] * uv[k];
        u[n] = acc;
        ur[N - n] = acc;
    }
    RenewalMassTable table;
    table.u = std::move(u);
    table.law = &law;
    return table;
}

/// Constant in the mass-function asymptote u(n) ~ doney_constant * (n+1)^{alpha-1}.
inline double doney_constant(const InterArrivalLaw& law) {
    return law.alpha * std::sin(std::numbers::pi * law.alpha) / (std::numbers::pi * law.c_k);
}

/// Contact set of one trajectory, always starting at 0, truncated at N.
struct RenewalPath {
    std::vector<std::uint64_t> contacts;
    bool pinned = false; // last contact equals the horizon
};

/// Free renewal trajectory: iid gaps until the horizon is passed.
inline RenewalPath sample_path(const InterArrivalLaw& law, std::uint64_t N, RngStream& rng) {
    if (N < 1) throw std::domain_error("sample_path: N < 1");
    RenewalPath path;
    path.contacts.push_back(0);
    std::uint64_t t = 0;
    while (t < N) {
        const std::uint64_t gap = law.sample_gap(rng);
        t += gap;
        if (t <= N) path.contacts.push_back(t);
    }
    path.pinned = (path.contacts.back() == N);
    return path;
}

/// Bridge trajectory with law P[. | N in tau], sampled exactly with the
/// h-transform rule P[next gap = k | at t] = K(k) u(N-t-k) / u(N-t).
inline RenewalPath sample_bridge(const InterArrivalLaw& law, const RenewalMassTable& mass,
                                 std::uint64_t N, RngStream& rng) {
    if (mass.horizon() < N) throw std::domain_error("sample_bridge: mass table too short");
    RenewalPath path;
    path.contacts.push_back(0);
    std::uint64_t t = 0;
    while (t < N) {
        const std::uint64_t left = N - t;
        const std::uint64_t kern = std::min(left, law.n_max);
        const double u_left = mass.u[left];
        const double target = rng.next_double() * u_left;
        double acc = 0.0;
        std::uint64_t gap = kern;
        for (std::uint64_t k = 1; k <= kern; ++k) {
            acc += law.K(k) * mass.u[left - k];
            if (acc > target) { gap = k; break; }
        }
        t += gap;
        path.contacts.push_back(t);
    }
    path.pinned = true;
    return path;
}

/// Exhaustive enumeration of trajectories on a small window.
/// pinned: all contact sets {0} + S + {N}, S subset of {1..N-1}, with exact
/// probability prod K(gap); probabilities total u(N).
/// free: atoms tau cap [1,N] = S subset of {1..N}, probability
/// prod K(gap) * P[gap > N - max S]; probabilities total 1.
/// Zero-probability sets (a gap beyond n_max) are omitted.
inline std::vector<std::pair<RenewalPath, double>>
enumerate_paths(const InterArrivalLaw& law, std::uint64_t N, bool pinned) {
    if (N > 16) throw std::domain_error("enumerate_paths: N > 16 (combinatorial blowup)");
    if (N < 1) throw std::domain_error("enumerate_paths: N < 1");
    std::vector<std::pair<RenewalPath, double>> out;
    const std::uint64_t free_sites = pinned ? N - 1 : N;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << free_sites); ++mask) {
        RenewalPath path;
        path.contacts.push_back(0);
        double prob = 1.0;
        std::uint64_t last = 0;
        for (std::uint64_t site = 1; site <= free_sites; ++site) {
            if (mask & (std::uint64_t{1} << (site - 1))) {
                prob *= law.K(site - last);
                last = site;
                path.contacts.push_back(site);
            }
        }
        if (pinned) {
            prob *= law.K(N - last);
            path.contacts.push_back(N);
        } else {
            prob *= law.gap_tail(N - last);
        }
        if (prob == 0.0) continue;
        path.pinned = (path.contacts.back() == N);
        out.emplace_back(std::move(path), prob);
    }
    return out;
}

/// Exact bridge marginal P[n in tau | N in tau] = u(n) u(N-n) / u(N).
inline double bridge_marginal(const RenewalMassTable& mass, std::uint64_t n, std::uint64_t N) {
    return mass.u[n] * mass.u[N - n] / mass.u[N];
}

} // namespace pinlab
