#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pinlab/disorder.hpp"
#include "pinlab/numeric.hpp"
#include "pinlab/parallel.hpp"
#include "pinlab/polymer.hpp"
#include "pinlab/renewal.hpp"
#include "pinlab/rng.hpp"

// Proof machinery for the heavy-tailed pinning model: fractional moments,
// coarse-grained block partition functions, the dual-peak penalization and its
// cost/benefit estimators, and the exact renewal statistics used to compare
// contact counts against their mass-function predictions.

namespace pinlab {

struct PenaltyConfig {
    double M = 0.0;          // penalty strength; the peak threshold carries e^{M^2}
    std::uint64_t ell = 0;   // block length
    double gamma = 0.0;      // environment tail index
    double eta = 0.0;        // minimal window fraction, in (0,1)
    double theta = 0.0;      // fractional moment exponent, in (0,1)
    double A = 0.0;          // block-growth constant: ell from beta
    double ell_exponent = 0.0; // exponent of beta in the block-growth rule
};

inline PenaltyConfig make_penalty_config(double M, std::uint64_t ell, double gamma,
                                         double eta, double theta, double A,
                                         double ell_exponent = 0.0) {
    if (!(M >= 0.0)) throw std::domain_error("make_penalty_config: M < 0");
    if (ell < 1) throw std::domain_error("make_penalty_config: ell < 1");
    if (!(gamma > 1.0 && gamma < 2.0))
        throw std::domain_error("make_penalty_config: gamma outside (1,2)");
    if (!(eta > 0.0 && eta < 1.0))
        throw std::domain_error("make_penalty_config: eta outside (0,1)");
    if (!(theta > 0.0 && theta < 1.0))
        throw std::domain_error("make_penalty_config: theta outside (0,1)");
    if (!(A > 0.0)) throw std::domain_error("make_penalty_config: A <= 0");
    PenaltyConfig cfg{M, ell, gamma, eta, theta, A, ell_exponent};
    if (cfg.ell_exponent == 0.0) cfg.ell_exponent = -2.0 * gamma;
    return cfg;
}

/// The fractional-moment machinery needs theta above gamma/(2 gamma - 1).
inline bool theta_in_proposition_range(const PenaltyConfig& cfg) {
    return cfg.theta > cfg.gamma / (2.0 * cfg.gamma - 1.0) && cfg.theta < 1.0;
}

/// Dual-peak height threshold V(n) = e^{M^2} (ell log(ell) n)^{1/(2 gamma)}.
/// Requires ell >= 3 so that log(ell) > 1 and V is nondegenerate.
inline double v_threshold(const PenaltyConfig& cfg, std::uint64_t n) {
    if (cfg.ell <= 2) throw std::domain_error("v_threshold: ell <= 2");
    if (n < 1) throw std::domain_error("v_threshold: n < 1");
    const double ell = static_cast<double>(cfg.ell);
    return std::exp(cfg.M * cfg.M) *
           std::pow(ell * std::log(ell) * static_cast<double>(n), 0.5 / cfg.gamma);
}

/// Block length from the coupling: h_beta = exp(A beta^exponent) is the
/// target field scale and ell_beta = ceil(1/h_beta), capped to keep runs
/// tractable at small beta.
struct BlockLength {
    double h_beta = 0.0;
    std::uint64_t ell = 0;
    bool capped = false;
};

inline BlockLength block_length_from_beta(const PenaltyConfig& cfg, double beta,
                                          std::uint64_t cap = (1u << 20)) {
    if (!(beta > 0.0)) throw std::domain_error("block_length_from_beta: beta <= 0");
    BlockLength out;
    out.h_beta = std::exp(-cfg.A * std::pow(beta, cfg.ell_exponent));
    const double raw = std::ceil(1.0 / out.h_beta);
    if (raw > static_cast<double>(cap)) {
        out.ell = cap;
        out.capped = true;
    } else {
        out.ell = static_cast<std::uint64_t>(raw);
    }
    return out;
}

struct DualPeakReport {
    bool occurred = false;
    bool has_witness = false;
    std::uint64_t i = 0; // witness pair, 1-based sites, i < j
    std::uint64_t j = 0;
    std::uint64_t scan_cost = 0; // exact pair comparisons performed
};

/// Reference O(ell^2) scan for the dual-peak event
/// { exists i < j <= ell : min(omega_i, omega_j) >= V(j - i) }.
inline DualPeakReport detect_dual_peak_naive(const PenaltyConfig& cfg,
                                             const std::vector<double>& omega) {
    if (omega.size() != cfg.ell)
        throw std::domain_error("detect_dual_peak: environment length != ell");
    DualPeakReport rep;
    for (std::uint64_t i = 1; i <= cfg.ell; ++i) {
        for (std::uint64_t j = i + 1; j <= cfg.ell; ++j) {
            ++rep.scan_cost;
            if (std::min(omega[i - 1], omega[j - 1]) >= v_threshold(cfg, j - i)) {
                rep.occurred = true;
                rep.has_witness = true;
                rep.i = i;
                rep.j = j;
                return rep;
            }
        }
    }
    return rep;
}

/// Same event via the candidate/window shortcut: only sites above V(1) can be
/// peaks, and a pair at distance d qualifies only if d is under the window
/// (min e^{-M^2})^{2 gamma} / (ell log ell). The final decision always uses the
/// exact V comparison, so the flag and witness match the naive scan.
inline DualPeakReport detect_dual_peak(const PenaltyConfig& cfg,
                                       const std::vector<double>& omega) {
    if (omega.size() != cfg.ell)
        throw std::domain_error("detect_dual_peak: environment length != ell");
    const double v1 = v_threshold(cfg, 1);
    std::vector<std::uint64_t> candidates;
    for (std::uint64_t i = 1; i <= cfg.ell; ++i)
        if (omega[i - 1] >= v1) candidates.push_back(i);

    const double ell = static_cast<double>(cfg.ell);
    const double log_norm = ell * std::log(ell);
    DualPeakReport rep;
    for (std::size_t p = 0; p < candidates.size(); ++p) {
        const std::uint64_t i = candidates[p];
        const double w_i = omega[i - 1];
        // conservative window (slack absorbs rounding; V decides exactly)
        const double window =
            std::pow(w_i * std::exp(-cfg.M * cfg.M), 2.0 * cfg.gamma) / log_norm *
                (1.0 + 1e-12) + 1.0;
        for (std::size_t q = p + 1; q < candidates.size(); ++q) {
            const std::uint64_t j = candidates[q];
            if (static_cast<double>(j - i) > window) break;
            ++rep.scan_cost;
            if (std::min(w_i, omega[j - 1]) >= v_threshold(cfg, j - i)) {
                rep.occurred = true;
                rep.has_witness = true;
                rep.i = i;
                rep.j = j;
                return rep;
            }
        }
    }
    return rep;
}

/// Penalty factor g = exp(-M 1{dual peak}).
inline double g_penalty(const PenaltyConfig& cfg, const std::vector<double>& omega) {
    return detect_dual_peak(cfg, omega).occurred ? std::exp(-cfg.M) : 1.0;
}

/// P[dual peak on one block] under iid environment draws.
inline MCEstimate dual_peak_probability_mc(const PenaltyConfig& cfg,
                                           const EnvironmentLaw& env_law,
                                           std::uint64_t n_samples,
                                           std::uint64_t master_seed,
                                           unsigned workers = 1) {
    const auto values = parallel_map<double>(n_samples, workers, [&](std::uint64_t r) {
        RngStream rng = RngStream::for_replica(master_seed, r);
        std::vector<double> omega(cfg.ell);
        for (auto& w : omega) w = env_law.sample(rng);
        return detect_dual_peak(cfg, omega).occurred ? 1.0 : 0.0;
    });
    MeanAccumulator acc;
    for (double v : values) acc.add(v);
    return to_estimate(acc);
}

/// E[g^{-theta/(1-theta)}] per block. Shares the replica-stream convention
/// with dual_peak_probability_mc, so on equal (n_samples, master_seed) the
/// two-point identity estimate = 1 + (e^{M theta/(1-theta)} - 1) P[peak]
/// holds exactly between the empirical values.
inline MCEstimate penalty_cost_mc(const PenaltyConfig& cfg, const EnvironmentLaw& env_law,
                                  std::uint64_t n_samples, std::uint64_t master_seed,
                                  unsigned workers = 1) {
    const double spike = std::exp(cfg.M * cfg.theta / (1.0 - cfg.theta));
    const auto values = parallel_map<double>(n_samples, workers, [&](std::uint64_t r) {
        RngStream rng = RngStream::for_replica(master_seed, r);
        std::vector<double> omega(cfg.ell);
        for (auto& w : omega) w = env_law.sample(rng);
        return detect_dual_peak(cfg, omega).occurred ? spike : 1.0;
    });
    MeanAccumulator acc;
    for (double v : values) acc.add(v);
    return to_estimate(acc);
}

/// Sorted subset of blocks {1..m}; block i covers sites (i-1) ell + 1 .. i ell.
struct BlockSet {
    std::uint64_t m = 0;
    std::vector<std::uint64_t> members;
};

inline BlockSet make_block_set(std::uint64_t m, std::vector<std::uint64_t> members) {
    if (m < 1) throw std::domain_error("make_block_set: m < 1");
    std::sort(members.begin(), members.end());
    if (std::adjacent_find(members.begin(), members.end()) != members.end())
        throw std::domain_error("make_block_set: duplicate members");
    for (std::uint64_t b : members)
        if (b < 1 || b > m) throw std::domain_error("make_block_set: member outside 1..m");
    return BlockSet{m, std::move(members)};
}

inline std::uint64_t block_mask(const BlockSet& blocks) {
    std::uint64_t mask = 0;
    for (std::uint64_t b : blocks.members) mask |= std::uint64_t{1} << (b - 1);
    return mask;
}

namespace detail {

inline std::uint64_t block_count(std::uint64_t N, std::uint64_t ell) {
    if (ell < 1 || N % ell != 0)
        throw std::domain_error("coarse graining: N is not a multiple of ell");
    const std::uint64_t m = N / ell;
    if (m > 12)
        throw std::domain_error("coarse graining: more than 12 blocks is intractable");
    return m;
}

} // namespace detail

/// Log partition values of every block-visit class at once: entry [mask] is
/// the log of the partition restricted to trajectories whose visited-block
/// set is exactly mask. Only masks containing the last block are reachable,
/// and the values sum (in linear domain) to the full pinned partition.
inline std::vector<double> coarse_grained_all(const PolymerParams& p,
                                              const EnvironmentSample& env,
                                              std::uint64_t ell) {
    const std::uint64_t m = detail::block_count(p.N, ell);
    if (env.omega.size() < p.N)
        throw std::domain_error("coarse_grained_all: environment shorter than N");
    const std::uint64_t n_masks = std::uint64_t{1} << m;
    const double neg_inf = -std::numeric_limits<double>::infinity();
    const auto logk = detail::log_kernel(*p.law, p.N);

    std::vector<std::vector<double>> f(p.N + 1, std::vector<double>(n_masks, neg_inf));
    f[0][0] = 0.0;
    std::vector<LogSumExp> acc(n_masks);
    for (std::uint64_t n = 1; n <= p.N; ++n) {
        for (auto& a : acc) a = LogSumExp{};
        const std::uint64_t bit = std::uint64_t{1} << ((n - 1) / ell);
        const std::uint64_t kern = std::min<std::uint64_t>(n, logk.size());
        for (std::uint64_t k = 1; k <= kern; ++k) {
            const auto& prev = f[n - k];
            for (std::uint64_t mask = 0; mask < n_masks; ++mask)
                if (prev[mask] != neg_inf) acc[mask | bit].add(logk[k - 1] + prev[mask]);
        }
        const double logw = site_log_weight(p, env, n);
        for (std::uint64_t mask = 0; mask < n_masks; ++mask)
            if (!acc[mask].empty()) f[n][mask] = logw + acc[mask].value();
    }
    return f[p.N];
}

/// Log partition restricted to trajectories visiting exactly the given blocks.
/// Returns -infinity when the set cannot carry any trajectory (in particular
/// whenever the last block is missing).
inline double coarse_grained_partition(const PolymerParams& p, const EnvironmentSample& env,
                                       std::uint64_t ell, const BlockSet& blocks) {
    const std::uint64_t m = detail::block_count(p.N, ell);
    if (blocks.m != m)
        throw std::domain_error("coarse_grained_partition: block count mismatch");
    if (blocks.members.empty() ||
        std::find(blocks.members.begin(), blocks.members.end(), m) == blocks.members.end())
        return -std::numeric_limits<double>::infinity();
    return coarse_grained_all(p, env, ell)[block_mask(blocks)];
}

/// Product of per-block penalties over the chosen blocks:
/// G = prod_{i in I} exp(-M 1{dual peak on block i}).
inline double block_penalty_product(const PenaltyConfig& cfg, const EnvironmentSample& env,
                                    const BlockSet& blocks) {
    if (env.omega.size() < blocks.m * cfg.ell)
        throw std::domain_error("block_penalty_product: environment too short");
    double g = 1.0;
    for (std::uint64_t b : blocks.members) {
        const auto first = env.omega.begin() + static_cast<std::ptrdiff_t>((b - 1) * cfg.ell);
        const std::vector<double> slice(first, first + static_cast<std::ptrdiff_t>(cfg.ell));
        g *= g_penalty(cfg, slice);
    }
    return g;
}

/// E[Z^theta] by Monte Carlo over environments.
inline MCEstimate fractional_moment_mc(const PolymerParams& p, double theta,
                                       std::uint64_t n_samples, std::uint64_t master_seed,
                                       unsigned workers = 1) {
    if (!(theta > 0.0 && theta < 1.0))
        throw std::domain_error("fractional_moment_mc: theta outside (0,1)");
    const auto values = parallel_map<double>(n_samples, workers, [&](std::uint64_t r) {
        RngStream rng = RngStream::for_replica(master_seed, r);
        EnvironmentSample env;
        env.omega.resize(p.N);
        for (auto& w : env.omega) w = p.env_law->sample(rng);
        return std::exp(theta * log_pinned_partition(p, env));
    });
    MeanAccumulator acc;
    for (double v : values) acc.add(v);
    return to_estimate(acc);
}

/// E[(Z^I)^theta] for every block class I, plus the whole-partition moment
/// computed from the same samples (total Z assembled as the sum over classes,
/// so the subadditivity comparison is exact sample by sample).
struct BlockMomentReport {
    MCEstimate total;                 // E[Z^theta]
    std::vector<MCEstimate> by_mask;  // E[(Z^I)^theta], indexed by block mask
};

inline BlockMomentReport fractional_moment_blocks_mc(const PolymerParams& p, double theta,
                                                     std::uint64_t ell,
                                                     std::uint64_t n_samples,
                                                     std::uint64_t master_seed,
                                                     unsigned workers = 1) {
    if (!(theta > 0.0 && theta < 1.0))
        throw std::domain_error("fractional_moment_blocks_mc: theta outside (0,1)");
    const std::uint64_t m = detail::block_count(p.N, ell);
    const std::uint64_t n_masks = std::uint64_t{1} << m;
    const auto rows =
        parallel_map<std::vector<double>>(n_samples, workers, [&](std::uint64_t r) {
            RngStream rng = RngStream::for_replica(master_seed, r);
            EnvironmentSample env;
            env.omega.resize(p.N);
            for (auto& w : env.omega) w = p.env_law->sample(rng);
            const auto log_by_mask = coarse_grained_all(p, env, ell);
            std::vector<double> row(n_masks + 1);
            LogSumExp total;
            for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
                row[mask] = std::exp(theta * log_by_mask[mask]); // exp(-inf) = 0
                total.add(log_by_mask[mask]);
            }
            row[n_masks] = std::exp(theta * total.value());
            return row;
        });
    std::vector<MeanAccumulator> accs(n_masks + 1);
    for (const auto& row : rows)
        for (std::uint64_t idx = 0; idx <= n_masks; ++idx) accs[idx].add(row[idx]);
    BlockMomentReport report;
    report.total = to_estimate(accs[n_masks]);
    report.by_mask.reserve(n_masks);
    for (std::uint64_t mask = 0; mask < n_masks; ++mask)
        report.by_mask.push_back(to_estimate(accs[mask]));
    return report;
}

namespace detail {

inline void check_penalized_window(const PenaltyConfig& cfg, std::uint64_t d,
                                   std::uint64_t f) {
    if (d < 1 || f > cfg.ell || d >= f)
        throw std::domain_error("penalized window: need 1 <= d < f <= ell");
    if (static_cast<double>(f - d) < cfg.eta * static_cast<double>(cfg.ell))
        throw std::domain_error("penalized window: shorter than eta * ell");
}

} // namespace detail

/// E[g(omega_1..omega_ell) Z0_[d,f]] with Z0 the field-free (h = 0) normalized
/// window partition; the benefit side of the change-of-measure argument.
inline MCEstimate penalized_block_mc(const PolymerParams& p, const PenaltyConfig& cfg,
                                     std::uint64_t d, std::uint64_t f,
                                     std::uint64_t n_samples, std::uint64_t master_seed,
                                     unsigned workers = 1) {
    detail::check_penalized_window(cfg, d, f);
    PolymerParams p0 = p;
    p0.h = 0.0;
    p0.N = cfg.ell;
    const auto mass = renewal_mass(*p.law, f - d);
    const auto values = parallel_map<double>(n_samples, workers, [&](std::uint64_t r) {
        RngStream rng = RngStream::for_replica(master_seed, r);
        EnvironmentSample env;
        env.omega.resize(cfg.ell);
        for (auto& w : env.omega) w = p.env_law->sample(rng);
        return g_penalty(cfg, env.omega) *
               std::exp(window_log_partition(p0, env, d, f, &mass));
    });
    MeanAccumulator acc;
    for (double v : values) acc.add(v);
    return to_estimate(acc);
}

/// Dual-peak check restricted to contact sites inside [d,f]: true when some
/// contact pair i < j there has min(omega_i, omega_j) >= V(j - i). Site 0
/// carries no environment value, so d = 0 scans contacts from 1 on.
inline bool peak_on_contacts(const PenaltyConfig& cfg, const std::vector<double>& omega,
                             const std::vector<std::uint64_t>& contacts, std::uint64_t d,
                             std::uint64_t f) {
    std::vector<std::uint64_t> inside;
    for (std::uint64_t c : contacts)
        if (c >= std::max<std::uint64_t>(d, 1) && c <= f && c <= omega.size())
            inside.push_back(c);
    std::sort(inside.begin(), inside.end());
    for (std::size_t a = 0; a < inside.size(); ++a)
        for (std::size_t b = a + 1; b < inside.size(); ++b)
            if (std::min(omega[inside[a] - 1], omega[inside[b] - 1]) >=
                v_threshold(cfg, inside[b] - inside[a]))
                return true;
    return false;
}

/// The tilted representation of the no-peak benefit: sample a renewal bridge
/// on [d,f], give every interior contact (and f) a size-biased draw and d a
/// base draw, and estimate the probability that no contact pair in [d,f]
/// forms a dual peak. Matches E[1{no peak on contacts} Z0_[d,f]] in mean.
inline MCEstimate tilted_no_peak_mc(const PolymerParams& p, const PenaltyConfig& cfg,
                                    std::uint64_t d, std::uint64_t f,
                                    std::uint64_t n_samples, std::uint64_t master_seed,
                                    unsigned workers = 1) {
    detail::check_penalized_window(cfg, d, f);
    const auto mass = renewal_mass(*p.law, f - d);
    const auto tilt = make_tilted(*p.env_law, p.beta);
    const auto values = parallel_map<double>(n_samples, workers, [&](std::uint64_t r) {
        RngStream rng = RngStream::for_replica(master_seed, r);
        const auto bridge = sample_bridge(*p.law, mass, f - d, rng);
        std::vector<double> omega(cfg.ell, -p.env_law->a);
        std::vector<std::uint64_t> contacts;
        contacts.reserve(bridge.contacts.size());
        for (std::uint64_t c : bridge.contacts) {
            const std::uint64_t site = d + c;
            contacts.push_back(site);
            // the window weight covers sites d+1..f, so d keeps the base law
            omega[site - 1] = (site == d) ? p.env_law->sample(rng) : tilt.sample(rng);
        }
        return peak_on_contacts(cfg, omega, contacts, d, f) ? 0.0 : 1.0;
    });
    MeanAccumulator acc;
    for (double v : values) acc.add(v);
    return to_estimate(acc);
}

/// Count of contact pairs (i, i+j), i <= r, j <= floor(r^{alpha/4}), whose
/// environment values both reach V(j). A count >= 1 is the two-peak contact
/// event on scale r.
struct YStatistic {
    std::uint64_t r = 0;
    std::uint64_t value = 0;         // number of qualifying pairs
    std::uint64_t pairs_scanned = 0; // size of the scanned rectangle
};

/// Largest j in the short-range sums: floor(r^{alpha/4}), inclusive at ties.
inline std::uint64_t short_range_span(double alpha, std::uint64_t r) {
    return static_cast<std::uint64_t>(
        std::floor(std::pow(static_cast<double>(r), alpha / 4.0) + 1e-12));
}

inline YStatistic y_statistic(const PenaltyConfig& cfg, double alpha,
                              const std::vector<double>& omega, const RenewalPath& path,
                              std::uint64_t r) {
    const std::uint64_t jmax = short_range_span(alpha, r);
    if (omega.size() < r + jmax)
        throw std::domain_error("y_statistic: environment shorter than r + r^{alpha/4}");
    std::vector<bool> in_tau(r + jmax + 1, false);
    for (std::uint64_t c : path.contacts)
        if (c <= r + jmax) in_tau[c] = true;
    YStatistic y;
    y.r = r;
    for (std::uint64_t i = 1; i <= r; ++i) {
        for (std::uint64_t j = 1; j <= jmax; ++j) {
            ++y.pairs_scanned;
            if (in_tau[i] && in_tau[i + j] &&
                std::min(omega[i - 1], omega[i + j - 1]) >= v_threshold(cfg, j))
                ++y.value;
        }
    }
    return y;
}

/// Exact check of the contact-pair factorization P[i, i+j in tau] =
/// u(i) u(j) (and the triple version) by exhaustive enumeration up to r.
struct MarginalCheck {
    double max_pair_error = 0.0;
    double max_triple_error = 0.0;
};

inline MarginalCheck pair_marginal_check(const InterArrivalLaw& law, std::uint64_t r) {
    if (r < 2 || r > 14)
        throw std::domain_error("pair_marginal_check: r outside 2..14");
    const auto atoms = enumerate_paths(law, r, /*pinned=*/false);
    const auto mass = renewal_mass(law, r);
    std::vector<std::vector<bool>> hit;
    std::vector<double> probs;
    hit.reserve(atoms.size());
    for (const auto& [path, prob] : atoms) {
        std::vector<bool> in_tau(r + 1, false);
        for (std::uint64_t c : path.contacts) in_tau[c] = true;
        hit.push_back(std::move(in_tau));
        probs.push_back(prob);
    }
    MarginalCheck out;
    for (std::uint64_t i = 1; i < r; ++i) {
        for (std::uint64_t j = 1; i + j <= r; ++j) {
            KahanSum s;
            for (std::size_t t = 0; t < atoms.size(); ++t)
                if (hit[t][i] && hit[t][i + j]) s.add(probs[t]);
            out.max_pair_error = std::max(
                out.max_pair_error, std::abs(s.value() - mass.at(i) * mass.at(j)));
            for (std::uint64_t k = 1; i + j + k <= r; ++k) {
                KahanSum s3;
                for (std::size_t t = 0; t < atoms.size(); ++t)
                    if (hit[t][i] && hit[t][i + j] && hit[t][i + j + k]) s3.add(probs[t]);
                out.max_triple_error =
                    std::max(out.max_triple_error,
                             std::abs(s3.value() - mass.at(i) * mass.at(j) * mass.at(k)));
            }
        }
    }
    return out;
}

/// The three exact sums controlling the second moment of the pair statistic:
/// s1  = sum_{i<=r, j<=jmax} u(i) u(j) j^{-alpha},
/// s3a = sum_{i<=r, 1<=j<k<=jmax} u(i) u(j) u(k-j) j^{-alpha/2} k^{-alpha},
/// s3b = sum_{i<=r, j,k<=jmax} u(i) u(j) u(k) (j k)^{-alpha/2} max(j,k)^{-alpha/2}.
struct MomentSums {
    double s1 = 0.0;
    double s3a = 0.0;
    double s3b = 0.0;
};

inline MomentSums exact_moment_sums(const InterArrivalLaw& law, std::uint64_t r) {
    if (r < 1) throw std::domain_error("exact_moment_sums: r < 1");
    const double alpha = law.alpha;
    const std::uint64_t jmax = short_range_span(alpha, r);
    const auto mass = renewal_mass(law, std::max<std::uint64_t>(r, jmax));
    KahanSum u_head; // sum_{i<=r} u(i), shared across all three sums
    for (std::uint64_t i = r; i >= 1; --i) u_head.add(mass.at(i));

    KahanSum s1, s3a, s3b;
    for (std::uint64_t j = 1; j <= jmax; ++j)
        s1.add(mass.at(j) * std::pow(static_cast<double>(j), -alpha));
    for (std::uint64_t j = 1; j <= jmax; ++j)
        for (std::uint64_t k = j + 1; k <= jmax; ++k)
            s3a.add(mass.at(j) * mass.at(k - j) *
                    std::pow(static_cast<double>(j), -alpha / 2.0) *
                    std::pow(static_cast<double>(k), -alpha));
    for (std::uint64_t j = 1; j <= jmax; ++j)
        for (std::uint64_t k = 1; k <= jmax; ++k)
            s3b.add(mass.at(j) * mass.at(k) *
                    std::pow(static_cast<double>(j * k), -alpha / 2.0) *
                    std::pow(static_cast<double>(std::max(j, k)), -alpha / 2.0));
    MomentSums out;
    out.s1 = u_head.value() * s1.value();
    out.s3a = u_head.value() * s3a.value();
    out.s3b = u_head.value() * s3b.value();
    return out;
}

/// E[(X1 - X2)^2] where X1 = r^{-alpha} sum_{i<=r} delta_i counts contacts and
/// X2 is its short-range pair refinement with the exact normalizer
/// (sum_{k<=jmax} k^{-alpha} u(k))^{-1}.
inline MCEstimate x_discrepancy_mc(const InterArrivalLaw& law, std::uint64_t r,
                                   std::uint64_t n_samples, std::uint64_t master_seed,
                                   unsigned workers = 1) {
    if (r < 2) throw std::domain_error("x_discrepancy_mc: r < 2");
    const double alpha = law.alpha;
    const std::uint64_t jmax = short_range_span(alpha, r);
    const std::uint64_t horizon = r + jmax;
    const auto mass = renewal_mass(law, jmax);
    KahanSum norm;
    for (std::uint64_t k = jmax; k >= 1; --k)
        norm.add(std::pow(static_cast<double>(k), -alpha) * mass.at(k));
    const double inv_norm = 1.0 / norm.value();
    std::vector<double> jweight(jmax + 1, 0.0);
    for (std::uint64_t j = 1; j <= jmax; ++j)
        jweight[j] = std::pow(static_cast<double>(j), -alpha);
    const double r_scale = std::pow(static_cast<double>(r), -alpha);

    const auto values = parallel_map<double>(n_samples, workers, [&](std::uint64_t rep) {
        RngStream rng = RngStream::for_replica(master_seed, rep);
        const auto path = sample_path(law, horizon, rng);
        std::vector<bool> in_tau(horizon + 1, false);
        for (std::uint64_t c : path.contacts) in_tau[c] = true;
        double x1 = 0.0, x2 = 0.0;
        for (std::uint64_t i = 1; i <= r; ++i) {
            if (!in_tau[i]) continue;
            x1 += 1.0;
            for (std::uint64_t j = 1; j <= jmax; ++j)
                if (in_tau[i + j]) x2 += jweight[j];
        }
        x1 *= r_scale;
        x2 *= r_scale * inv_norm;
        return (x1 - x2) * (x1 - x2);
    });
    MeanAccumulator acc;
    for (double v : values) acc.add(v);
    return to_estimate(acc);
}

/// Exact covariance checks for U_i = delta_i sum_{j<=jmax} j^{-alpha}
/// (delta_{i+j} - u(j)): separated pairs are exactly uncorrelated, and the
/// diagonal stays under the r^{alpha/2} i^{alpha-1} envelope.
struct OrthogonalityReport {
    double max_offdiag_abs = 0.0; // over pairs i2 - i1 >= jmax
    double max_diag_value = 0.0;  // max E[U_i^2]
    double max_diag_ratio = 0.0;  // max E[U_i^2] / (r^{alpha/2} i^{alpha-1})
    std::uint64_t pairs_checked = 0;
};

inline OrthogonalityReport u_orthogonality_check(const InterArrivalLaw& law,
                                                 std::uint64_t r) {
    if (r < 2) throw std::domain_error("u_orthogonality_check: r < 2");
    const double alpha = law.alpha;
    const std::uint64_t jmax = short_range_span(alpha, r);
    const std::uint64_t horizon = r + jmax;
    if (horizon > 14)
        throw std::domain_error("u_orthogonality_check: r + r^{alpha/4} > 14");
    const auto atoms = enumerate_paths(law, horizon, /*pinned=*/false);
    const auto mass = renewal_mass(law, horizon);

    const auto u_value = [&](const std::vector<bool>& in_tau, std::uint64_t i) {
        if (!in_tau[i]) return 0.0;
        double s = 0.0;
        for (std::uint64_t j = 1; j <= jmax; ++j)
            s += std::pow(static_cast<double>(j), -alpha) *
                 ((in_tau[i + j] ? 1.0 : 0.0) - mass.at(j));
        return s;
    };

    std::vector<std::vector<bool>> hits;
    std::vector<double> probs;
    hits.reserve(atoms.size());
    for (const auto& [path, prob] : atoms) {
        std::vector<bool> in_tau(horizon + 1, false);
        for (std::uint64_t c : path.contacts) in_tau[c] = true;
        hits.push_back(std::move(in_tau));
        probs.push_back(prob);
    }

    OrthogonalityReport out;
    for (std::uint64_t i1 = 1; i1 <= r; ++i1) {
        KahanSum diag;
        for (std::size_t t = 0; t < atoms.size(); ++t) {
            const double u1 = u_value(hits[t], i1);
            diag.add(probs[t] * u1 * u1);
        }
        out.max_diag_value = std::max(out.max_diag_value, diag.value());
        const double envelope = std::pow(static_cast<double>(r), alpha / 2.0) *
                                std::pow(static_cast<double>(i1), alpha - 1.0);
        out.max_diag_ratio = std::max(out.max_diag_ratio, diag.value() / envelope);
        for (std::uint64_t i2 = i1 + jmax; i2 <= r; ++i2) {
            KahanSum cross;
            for (std::size_t t = 0; t < atoms.size(); ++t)
                cross.add(probs[t] * u_value(hits[t], i1) * u_value(hits[t], i2));
            out.max_offdiag_abs = std::max(out.max_offdiag_abs, std::abs(cross.value()));
            ++out.pairs_checked;
        }
    }
    return out;
}

/// Best constant in E[F(tau) | N in tau] <= C E[F(tau)] over functions of
/// tau cap [0, N/2]: the largest likelihood ratio across the atoms, which
/// collapses to a one-dimensional scan over the last contact t <= N/2.
inline double conditioning_constant(const InterArrivalLaw& law, std::uint64_t N) {
    if (N < 2) throw std::domain_error("conditioning_constant: N < 2");
    const std::uint64_t mid = N / 2;
    const auto mass = renewal_mass(law, N);
    double best = 0.0;
    for (std::uint64_t t = 0; t <= mid; ++t) {
        const double denom = law.gap_tail(mid - t); // P[next gap > mid - t]
        if (denom <= 0.0) continue;                 // atom not reachable
        KahanSum numer;                             // P[next gap > mid - t, N in tau]
        const std::uint64_t k_hi = std::min(N - t, law.n_max);
        for (std::uint64_t k = k_hi; k >= mid - t + 1 && k >= 1; --k)
            numer.add(law.K(k) * mass.at(N - t - k));
        const double ratio = numer.value() / (mass.at(N) * denom);
        best = std::max(best, ratio);
    }
    return best;
}

} // namespace pinlab
