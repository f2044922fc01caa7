#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pinlab/disorder.hpp"
#include "pinlab/numeric.hpp"
#include "pinlab/parallel.hpp"
#include "pinlab/renewal.hpp"
#include "pinlab/rng.hpp"

// Quenched pinning partition functions in the log domain, window partition
// functions, contact profiles, the homogeneous free energy by inversion of g,
// and schedule-independent Monte Carlo free-energy estimation.

namespace pinlab {

struct PolymerParams {
    double beta = 0.0; // disorder coupling, in [0,1]
    double h = 0.0;    // pinning field
    std::uint64_t N = 0;
    const InterArrivalLaw* law = nullptr;     // non-owning; must outlive the params
    const EnvironmentLaw* env_law = nullptr;  // non-owning; must outlive the params
};

inline PolymerParams make_polymer_params(double beta, double h, std::uint64_t N,
                                         const InterArrivalLaw& law,
                                         const EnvironmentLaw& env_law) {
    if (!(beta >= 0.0 && beta <= 1.0))
        throw std::domain_error("make_polymer_params: beta outside [0,1]");
    if (N < 1) throw std::domain_error("make_polymer_params: N < 1");
    if (!(1.0 - beta * env_law.a > 0.0))
        throw std::domain_error("make_polymer_params: pinning weights not positive");
    return PolymerParams{beta, h, N, &law, &env_law};
}

/// log of the site weight e^h (1 + beta omega_n), n in 1..N.
inline double site_log_weight(const PolymerParams& p, const EnvironmentSample& env,
                              std::uint64_t n) {
    const double factor = 1.0 + p.beta * env.omega[n - 1];
    if (!(factor > 0.0))
        throw std::runtime_error("site_log_weight: nonpositive pinning weight");
    return p.h + std::log1p(p.beta * env.omega[n - 1]);
}

/// Bidirectional log partition values for one environment.
/// log_z_fwd(n) is the log pinned partition on [0,n]; the site-n weight lives
/// in the forward factor, so fwd(n) + bwd(n) - fwd(N) composes exactly.
struct PartitionTable {
    std::vector<double> log_z_fwd;
    std::vector<double> log_z_bwd;
    PolymerParams params;

    double log_partition() const { return log_z_fwd.back(); }
};

namespace detail {

inline std::vector<double> log_kernel(const InterArrivalLaw& law, std::uint64_t N) {
    const std::uint64_t kern = std::min(N, law.n_max);
    std::vector<double> logk(kern);
    for (std::uint64_t k = 1; k <= kern; ++k) logk[k - 1] = law.log_K(k);
    return logk;
}

// Z(n) = w(n) sum_k K(k) Z(n-k) in the log domain; logw indexed 1..N.
inline std::vector<double> forward_sweep(const InterArrivalLaw& law,
                                         const std::vector<double>& logw,
                                         std::uint64_t N) {
    const auto logk = log_kernel(law, N);
    std::vector<double> fwd(N + 1);
    fwd[0] = 0.0;
    for (std::uint64_t n = 1; n <= N; ++n) {
        const std::uint64_t kern = std::min<std::uint64_t>(n, logk.size());
        LogSumExp lse;
        for (std::uint64_t k = 1; k <= kern; ++k) lse.add(logk[k - 1] + fwd[n - k]);
        fwd[n] = logw[n] + lse.value();
    }
    return fwd;
}

} // namespace detail

inline PartitionTable forward_partition(const PolymerParams& p, const EnvironmentSample& env) {
    if (env.omega.size() < p.N)
        throw std::domain_error("forward_partition: environment shorter than N");
    std::vector<double> logw(p.N + 1, 0.0);
    for (std::uint64_t n = 1; n <= p.N; ++n) logw[n] = site_log_weight(p, env, n);

    PartitionTable table;
    table.params = p;
    table.log_z_fwd = detail::forward_sweep(*p.law, logw, p.N);

    const auto logk = detail::log_kernel(*p.law, p.N);
    table.log_z_bwd.assign(p.N + 1, 0.0);
    for (std::uint64_t n = p.N; n-- > 0;) {
        const std::uint64_t kern = std::min<std::uint64_t>(p.N - n, logk.size());
        LogSumExp lse;
        for (std::uint64_t k = 1; k <= kern; ++k)
            lse.add(logk[k - 1] + logw[n + k] + table.log_z_bwd[n + k]);
        table.log_z_bwd[n] = lse.value();
    }
    return table;
}

/// Forward value only: log Z^{beta,omega}_{N,h} (pinned at N).
inline double log_pinned_partition(const PolymerParams& p, const EnvironmentSample& env) {
    if (env.omega.size() < p.N)
        throw std::domain_error("log_pinned_partition: environment shorter than N");
    std::vector<double> logw(p.N + 1, 0.0);
    for (std::uint64_t n = 1; n <= p.N; ++n) logw[n] = site_log_weight(p, env, n);
    return detail::forward_sweep(*p.law, logw, p.N).back();
}

/// Homogeneous (all site weights e^h) log pinned partition.
inline double hom_log_pinned_partition(const InterArrivalLaw& law, std::uint64_t N, double h) {
    std::vector<double> logw(N + 1, h);
    logw[0] = 0.0;
    return detail::forward_sweep(law, logw, N).back();
}

/// Normalized window partition function in log form: the pinned partition on
/// [a,b] (site weights at a+1..b, both ends in tau) divided by u(b-a).
/// An optional mass table for the same law (horizon >= b-a) avoids recomputing u.
inline double window_log_partition(const PolymerParams& p, const EnvironmentSample& env,
                                   std::uint64_t a, std::uint64_t b,
                                   const RenewalMassTable* mass = nullptr) {
    if (b <= a) throw std::domain_error("window_log_partition: b <= a");
    if (env.omega.size() < b)
        throw std::domain_error("window_log_partition: environment shorter than b");
    const std::uint64_t len = b - a;
    std::vector<double> logw(len + 1, 0.0);
    for (std::uint64_t j = 1; j <= len; ++j) logw[j] = site_log_weight(p, env, a + j);
    const double log_pinned = detail::forward_sweep(*p.law, logw, len).back();
    double u_len;
    if (mass != nullptr) {
        if (mass->horizon() < len)
            throw std::domain_error("window_log_partition: mass table too short");
        u_len = mass->at(len);
    } else {
        u_len = renewal_mass(*p.law, len).at(len);
    }
    return log_pinned - std::log(u_len);
}

/// Quenched contact probabilities under the pinned polymer measure.
/// prob[0] = 1 (the origin is always a contact), prob[n] = P[n in tau] for
/// n = 1..N, and expected_contacts = sum of prob[1..N].
struct ContactProfile {
    std::vector<double> prob;
    double expected_contacts = 0.0;
};

inline ContactProfile contact_profile(const PartitionTable& table) {
    const std::uint64_t N = table.params.N;
    ContactProfile out;
    out.prob.assign(N + 1, 0.0);
    out.prob[0] = 1.0;
    const double log_z = table.log_z_fwd[N];
    KahanSum s;
    for (std::uint64_t n = 1; n <= N; ++n) {
        out.prob[n] = std::exp(table.log_z_fwd[n] + table.log_z_bwd[n] - log_z);
        s.add(out.prob[n]);
    }
    out.expected_contacts = s.value();
    return out;
}

/// g(x) = -log sum_n e^{-n x} K(n), exact over the truncated support.
inline double homogeneous_g(const InterArrivalLaw& law, double x) {
    if (!(x >= 0.0)) throw std::domain_error("homogeneous_g: x < 0");
    if (law.implicit_support())
        return -std::log(law.c_k * exp_power_sum(law.alpha, x, law.n_max));
    KahanSum s;
    const double decay_tail = (x > 0.0) ? std::exp(-x) / (1.0 - std::exp(-x)) : 0.0;
    for (std::uint64_t n = 1; n <= law.n_max; ++n) {
        const double term = std::exp(-static_cast<double>(n) * x) * law.probs[n - 1];
        s.add(term);
        // terms decrease in n; stop once the geometric tail bound is negligible
        if (x > 0.0 && term * decay_tail < s.value() * 1e-18) break;
    }
    return -std::log(s.value());
}

/// F(h): 0 for h <= 0, otherwise the unique root of g(x) = h.
/// Since g(0) = 0 and g(x) >= x, bisection on [0, h] always brackets.
inline double homogeneous_free_energy(const InterArrivalLaw& law, double h) {
    if (h <= 0.0) return 0.0;
    double lo = 0.0, hi = h;
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        (homogeneous_g(law, mid) < h ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct FreeEnergyEstimate {
    double estimate = 0.0;
    double stderror = 0.0;
    std::uint64_t n_samples = 0;
    std::uint64_t N = 0;
};

/// Mean and standard error of (1/N) log Z over iid environments.
/// Replica r uses the stream derived from (master_seed, r); reduction is in
/// replica order, so the result is identical for every worker count.
inline FreeEnergyEstimate quenched_free_energy_mc(const PolymerParams& p,
                                                  std::uint64_t n_samples,
                                                  std::uint64_t master_seed,
                                                  unsigned workers = 1) {
    if (n_samples < 2) throw std::domain_error("quenched_free_energy_mc: n_samples < 2");
    const auto values = parallel_map<double>(n_samples, workers, [&](std::uint64_t r) {
        RngStream rng = RngStream::for_replica(master_seed, r);
        EnvironmentSample env;
        env.seed = master_seed;
        env.omega.resize(p.N);
        for (auto& w : env.omega) w = p.env_law->sample(rng);
        return log_pinned_partition(p, env) / static_cast<double>(p.N);
    });
    MeanAccumulator acc;
    for (double v : values) acc.add(v);
    const auto mc = to_estimate(acc);
    return FreeEnergyEstimate{mc.estimate, mc.stderror, n_samples, p.N};
}

struct CriticalScanRow {
    double h = 0.0;
    double estimate = 0.0;
    double stderror = 0.0;
    bool flagged = false; // first grid point clearing the finite-size floor
};

/// Exploratory scan of the quenched free energy along an h grid, with a flag
/// at the first point whose estimate exceeds the zero-field pinned baseline
/// (1/N) log u(N) by more than 3 standard errors. Environments are shared
/// across grid points, so estimates are pathwise monotone in h.
inline std::vector<CriticalScanRow> critical_point_scan(
    const InterArrivalLaw& law, const EnvironmentLaw& env_law, double beta,
    const std::vector<double>& h_grid, std::uint64_t N, std::uint64_t n_samples,
    std::uint64_t master_seed, unsigned workers = 1) {
    if (!std::is_sorted(h_grid.begin(), h_grid.end()))
        throw std::domain_error("critical_point_scan: h grid not sorted");
    const double floor = hom_log_pinned_partition(law, N, 0.0) / static_cast<double>(N);
    std::vector<CriticalScanRow> rows;
    rows.reserve(h_grid.size());
    bool flagged_already = false;
    for (const double h : h_grid) {
        const auto params = make_polymer_params(beta, h, N, law, env_law);
        const auto est = quenched_free_energy_mc(params, n_samples, master_seed, workers);
        CriticalScanRow row;
        row.h = h;
        row.estimate = est.estimate;
        row.stderror = est.stderror;
        row.flagged = !flagged_already && (est.estimate > floor + 3.0 * est.stderror);
        flagged_already = flagged_already || row.flagged;
        rows.push_back(row);
    }
    return rows;
}

} // namespace pinlab
