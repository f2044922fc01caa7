#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "pinlab/disorder.hpp"
#include "pinlab/numeric.hpp"
#include "pinlab/polymer.hpp"
#include "pinlab/relevance.hpp"
#include "pinlab/renewal.hpp"
#include "pinlab/rng.hpp"

using namespace pinlab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// deterministic single-gap law for edge-case checks (make_zeta_law needs n_max >= 2)
InterArrivalLaw unit_gap_law() {
    InterArrivalLaw law;
    law.alpha = 0.5;
    law.n_max = 1;
    law.probs = {1.0};
    law.tails = {1.0, 0.0};
    law.c_k = 1.0;
    return law;
}

PenaltyConfig base_config(double M, std::uint64_t ell) {
    return make_penalty_config(M, ell, 1.5, 0.5, 0.8, 1.0);
}

} // namespace

TEST_CASE("penalty config validation and proposition range") {
    CHECK_THROWS_AS(make_penalty_config(-0.1, 8, 1.5, 0.5, 0.8, 1.0), std::domain_error);
    CHECK_THROWS_AS(make_penalty_config(1.0, 0, 1.5, 0.5, 0.8, 1.0), std::domain_error);
    CHECK_THROWS_AS(make_penalty_config(1.0, 8, 1.0, 0.5, 0.8, 1.0), std::domain_error);
    CHECK_THROWS_AS(make_penalty_config(1.0, 8, 2.0, 0.5, 0.8, 1.0), std::domain_error);
    CHECK_THROWS_AS(make_penalty_config(1.0, 8, 1.5, 0.0, 0.8, 1.0), std::domain_error);
    CHECK_THROWS_AS(make_penalty_config(1.0, 8, 1.5, 0.5, 1.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(make_penalty_config(1.0, 8, 1.5, 0.5, 0.8, 0.0), std::domain_error);

    const auto cfg = base_config(1.0, 8);
    CHECK(cfg.ell_exponent == -3.0); // default -2 gamma
    CHECK(theta_in_proposition_range(cfg)); // 0.8 > 1.5/2 = 0.75
    auto low = cfg;
    low.theta = 0.7;
    CHECK_FALSE(theta_in_proposition_range(low));
}

TEST_CASE("peak threshold closed form and monotonicity") {
    auto cfg = base_config(1.0, 3);
    // e^{M^2} (ell log ell n)^{1/(2 gamma)} at M=1, ell=3, gamma=1.5, n=1
    CHECK_THAT(v_threshold(cfg, 1), WithinRel(4.0452905287422185, 1e-13));
    CHECK_THAT(v_threshold(cfg, 8) / v_threshold(cfg, 1), WithinRel(2.0, 1e-13));

    cfg.M = 0.0;
    CHECK_THAT(v_threshold(cfg, 1), WithinRel(std::pow(3.0 * std::log(3.0), 1.0 / 3.0), 1e-13));
    for (std::uint64_t n = 1; n < 40; ++n)
        CHECK(v_threshold(cfg, n + 1) > v_threshold(cfg, n));

    auto degenerate = base_config(1.0, 2);
    CHECK_THROWS_AS(v_threshold(degenerate, 1), std::domain_error);
    CHECK_THROWS_AS(v_threshold(cfg, 0), std::domain_error);
}

TEST_CASE("block length follows the coupling scale") {
    const auto cfg = base_config(1.0, 8); // A = 1, gamma = 1.5, exponent -3
    const auto at_one = block_length_from_beta(cfg, 1.0);
    CHECK_THAT(at_one.h_beta, WithinRel(std::exp(-1.0), 1e-15));
    CHECK(at_one.ell == 3); // ceil(e)
    CHECK_FALSE(at_one.capped);

    const auto small = block_length_from_beta(cfg, 0.5); // beta^{-3} = 8
    CHECK(small.ell == static_cast<std::uint64_t>(std::ceil(std::exp(8.0))));
    CHECK_FALSE(small.capped);

    const auto capped = block_length_from_beta(cfg, 0.5, 100);
    CHECK(capped.ell == 100);
    CHECK(capped.capped);

    auto knob = cfg;
    knob.ell_exponent = -1.0;
    CHECK_THAT(block_length_from_beta(knob, 0.25).h_beta, WithinRel(std::exp(-4.0), 1e-15));

    CHECK_THROWS_AS(block_length_from_beta(cfg, 0.0), std::domain_error);
}

TEST_CASE("dual peak fast path equals the quadratic scan") {
    const auto cfg = base_config(0.5, 64);
    const auto env_law = make_env_law(1.5, 0.95);
    const double v1 = v_threshold(cfg, 1);
    RngStream rng(20240611);

    std::uint64_t occurred = 0;
    for (int rep = 0; rep < 10000; ++rep) {
        std::vector<double> omega(cfg.ell);
        for (auto& w : omega) w = env_law.sample(rng);
        if (rep % 20 == 0) {
            // plant a marginal pair at a random distance to hit the window edge
            const auto i = 1 + rng.next_u64() % 32;
            const auto d = 1 + rng.next_u64() % 16;
            const double level = v_threshold(cfg, d) * (0.9 + 0.2 * rng.next_double());
            omega[i - 1] = level;
            omega[i + d - 1] = level;
        }
        const auto fast = detect_dual_peak(cfg, omega);
        const auto naive = detect_dual_peak_naive(cfg, omega);
        REQUIRE(fast.occurred == naive.occurred);
        REQUIRE(fast.has_witness == naive.has_witness);
        if (fast.has_witness) {
            REQUIRE(fast.i == naive.i);
            REQUIRE(fast.j == naive.j);
        }
        CHECK(fast.scan_cost <= naive.scan_cost);
        occurred += fast.occurred ? 1 : 0;
    }
    CHECK(occurred > 100); // the sweep genuinely exercises both branches

    SECTION("boundary pair at the exact threshold is inclusive") {
        std::vector<double> omega(cfg.ell, -0.95);
        omega[0] = v1;
        omega[1] = v1;
        const auto rep = detect_dual_peak(cfg, omega);
        REQUIRE(rep.occurred);
        CHECK(rep.i == 1);
        CHECK(rep.j == 2);
        CHECK(rep.occurred == detect_dual_peak_naive(cfg, omega).occurred);
    }
    SECTION("all-low environment has no candidates and zero cost") {
        std::vector<double> omega(cfg.ell, -0.95);
        const auto rep = detect_dual_peak(cfg, omega);
        CHECK_FALSE(rep.occurred);
        CHECK(rep.scan_cost == 0);
    }
    SECTION("environment length must match the block") {
        std::vector<double> omega(cfg.ell - 1, 0.0);
        CHECK_THROWS_AS(detect_dual_peak(cfg, omega), std::domain_error);
    }
}

TEST_CASE("penalty factor and cost estimator identities") {
    const auto env_law = make_env_law(1.5, 0.95);

    SECTION("g is the two-valued penalty") {
        const auto cfg = base_config(0.7, 16);
        std::vector<double> omega(cfg.ell, -0.95);
        CHECK(g_penalty(cfg, omega) == 1.0);
        omega[2] = omega[3] = v_threshold(cfg, 1) * 1.01;
        CHECK_THAT(g_penalty(cfg, omega), WithinRel(std::exp(-0.7), 1e-15));
    }

    SECTION("zero penalty strength gives a constant estimator") {
        auto cfg = base_config(0.5, 16);
        cfg.M = 0.0;
        const auto cost = penalty_cost_mc(cfg, env_law, 500, 99);
        CHECK(cost.estimate == 1.0);
        CHECK(cost.stderror == 0.0);
    }

    SECTION("cost ties to the peak probability through the two-point identity") {
        const auto cfg = base_config(0.3, 16); // theta = 0.8 -> spike e^{1.2}
        const std::uint64_t n = 20000, seed = 5150;
        const auto cost = penalty_cost_mc(cfg, env_law, n, seed);
        const auto prob = dual_peak_probability_mc(cfg, env_law, n, seed);
        CHECK(prob.estimate > 0.0); // nondegenerate configuration
        const double spike = std::exp(cfg.M * cfg.theta / (1.0 - cfg.theta));
        CHECK_THAT(cost.estimate, WithinRel(1.0 + (spike - 1.0) * prob.estimate, 1e-12));
        CHECK(cost.estimate <= 1.0 + spike * prob.estimate + 1e-12);
    }

    SECTION("large blocks keep the cost below two") {
        const auto cfg = base_config(1.5, 1024);
        const auto cost = penalty_cost_mc(cfg, env_law, 20000, 8927);
        CHECK(cost.estimate <= 2.0);
        CHECK(cost.estimate >= 1.0);
    }
}

TEST_CASE("dual peak probability drops like the squared-exponential threshold") {
    const auto cfg_base = base_config(1.0, 1024);
    const auto env_law = make_env_law(1.5, 0.95);
    const std::uint64_t n = 100000, seed = 424242;

    std::vector<double> msq, logp, probs;
    for (double M : {1.0, 1.25, 1.5}) {
        auto cfg = cfg_base;
        cfg.M = M;
        const auto prob = dual_peak_probability_mc(cfg, env_law, n, seed + 7);
        REQUIRE(prob.estimate > 0.0);
        probs.push_back(prob.estimate);
        msq.push_back(M * M);
        logp.push_back(std::log(prob.estimate));
    }
    CHECK(probs[0] > probs[1]);
    CHECK(probs[1] > probs[2]);
    // log P[peak] ~ -2 gamma M^2 + const; require the fitted slope at or below
    // the predicted decay up to statistical slack
    const double slope = ols_slope(msq, logp);
    CHECK(slope <= -2.0 * cfg_base.gamma + 0.2);
}

TEST_CASE("block classes partition the pinned partition function") {
    const auto law = make_zeta_law(0.5, 1000);
    const auto env_law = make_env_law(1.5, 0.5);

    SECTION("classes sum to the full partition and impossible classes vanish") {
        for (const auto& [N, ell] : std::vector<std::pair<std::uint64_t, std::uint64_t>>{
                 {16, 4}, {18, 6}, {4, 2}}) {
            const std::uint64_t m = N / ell;
            const auto p = make_polymer_params(0.7, -0.2, N, law, env_law);
            for (int rep = 0; rep < 20; ++rep) {
                const auto env = sample_env(env_law, N, 1000 + 31 * rep);
                const auto by_mask = coarse_grained_all(p, env, ell);
                LogSumExp total;
                for (double v : by_mask) total.add(v);
                CHECK_THAT(total.value(), WithinRel(log_pinned_partition(p, env), 1e-10));
                const std::uint64_t last_bit = std::uint64_t{1} << (m - 1);
                for (std::uint64_t mask = 0; mask < by_mask.size(); ++mask)
                    if (!(mask & last_bit))
                        CHECK(by_mask[mask] == -std::numeric_limits<double>::infinity());
            }
        }
    }

    SECTION("misaligned horizon and oversized block counts are refused") {
        const auto p = make_polymer_params(0.5, 0.0, 15, law, env_law);
        const auto env = sample_env(env_law, 15, 7);
        CHECK_THROWS_AS(coarse_grained_all(p, env, 4), std::domain_error);
        const auto p2 = make_polymer_params(0.5, 0.0, 26, law, env_law);
        const auto env2 = sample_env(env_law, 26, 7);
        CHECK_THROWS_AS(coarse_grained_all(p2, env2, 2), std::domain_error); // m = 13
    }
}

TEST_CASE("single block class matches hand recursion and enumeration") {
    const auto law = make_zeta_law(0.5, 1000);
    const auto env_law = make_env_law(1.5, 0.5);

    SECTION("last block alone follows the two-site hand formula") {
        const std::uint64_t N = 6, ell = 2, m = 3;
        const auto p = make_polymer_params(0.6, 0.15, N, law, env_law);
        const auto env = sample_env(env_law, N, 12345);
        const auto w = [&](std::uint64_t n) { return std::exp(site_log_weight(p, env, n)); };
        const double hand = law.K(6) * w(6) + law.K(5) * w(5) * law.K(1) * w(6);
        const auto blocks = make_block_set(m, {m});
        CHECK_THAT(std::exp(coarse_grained_partition(p, env, ell, blocks)),
                   WithinRel(hand, 1e-12));
    }

    SECTION("every class agrees with grouped exhaustive enumeration") {
        const std::uint64_t N = 12, ell = 3, m = 4;
        const auto p = make_polymer_params(0.7, -0.2, N, law, env_law);
        const auto env = sample_env(env_law, N, 777);
        std::vector<KahanSum> grouped(std::uint64_t{1} << m);
        for (const auto& [path, prob] : enumerate_paths(law, N, /*pinned=*/true)) {
            double weight = prob;
            std::uint64_t mask = 0;
            for (std::uint64_t c : path.contacts) {
                if (c == 0) continue;
                weight *= std::exp(site_log_weight(p, env, c));
                mask |= std::uint64_t{1} << ((c - 1) / ell);
            }
            grouped[mask].add(weight);
        }
        const auto by_mask = coarse_grained_all(p, env, ell);
        for (std::uint64_t mask = 0; mask < grouped.size(); ++mask) {
            if (grouped[mask].value() == 0.0)
                CHECK(by_mask[mask] == -std::numeric_limits<double>::infinity());
            else
                CHECK_THAT(std::exp(by_mask[mask]), WithinRel(grouped[mask].value(), 1e-10));
        }
    }

    SECTION("classes missing the last block are empty, mismatches are refused") {
        const std::uint64_t N = 8, ell = 2, m = 4;
        const auto p = make_polymer_params(0.5, 0.0, N, law, env_law);
        const auto env = sample_env(env_law, N, 5);
        const double neg_inf = -std::numeric_limits<double>::infinity();
        CHECK(coarse_grained_partition(p, env, ell, make_block_set(m, {1, 2})) == neg_inf);
        CHECK(coarse_grained_partition(p, env, ell, make_block_set(m, {})) == neg_inf);
        CHECK_THROWS_AS(coarse_grained_partition(p, env, ell, make_block_set(3, {3})),
                        std::domain_error);
        CHECK_THROWS_AS(make_block_set(4, {2, 2, 4}), std::domain_error);
        CHECK_THROWS_AS(make_block_set(4, {0, 4}), std::domain_error);
        CHECK_THROWS_AS(make_block_set(4, {5}), std::domain_error);
    }
}

TEST_CASE("fractional moments: exact degenerate case and convexity directions") {
    const auto law = make_zeta_law(0.5, 1000);
    const auto env_law = make_env_law(1.5, 0.5);

    SECTION("beta = 0 collapses to the homogeneous value with zero spread") {
        const auto p = make_polymer_params(0.0, 0.3, 40, law, env_law);
        const auto est = fractional_moment_mc(p, 0.7, 50, 11);
        CHECK(est.estimate == std::exp(0.7 * hom_log_pinned_partition(law, 40, 0.3)));
        CHECK(est.stderror == 0.0);
    }

    SECTION("per-sample concavity: mean of Z^theta under the mean of Z") {
        const auto p = make_polymer_params(0.6, 0.1, 24, law, env_law);
        const double theta = 0.6;
        const std::uint64_t n = 400, seed = 90210;
        MeanAccumulator acc_pow, acc_z;
        for (std::uint64_t r = 0; r < n; ++r) {
            RngStream rng = RngStream::for_replica(seed, r);
            EnvironmentSample env;
            env.omega.resize(p.N);
            for (auto& w : env.omega) w = env_law.sample(rng);
            const double z = std::exp(log_pinned_partition(p, env));
            acc_pow.add(std::pow(z, theta));
            acc_z.add(z);
        }
        const auto est = fractional_moment_mc(p, theta, n, seed);
        CHECK_THAT(est.estimate, WithinRel(acc_pow.mean(), 1e-12)); // same stream contract
        CHECK(acc_pow.mean() <= std::pow(acc_z.mean(), theta) + 1e-12);
        CHECK_THROWS_AS(fractional_moment_mc(p, 1.0, n, seed), std::domain_error);
    }

    SECTION("block classes are subadditive sample by sample") {
        const auto p = make_polymer_params(0.8, 0.05, 12, law, env_law);
        const auto report = fractional_moment_blocks_mc(p, 0.6, 4, 300, 31337);
        KahanSum class_sum;
        for (const auto& est : report.by_mask) class_sum.add(est.estimate);
        CHECK(report.total.estimate <= class_sum.value() + 1e-12);
        CHECK(report.total.estimate > 0.0);
        // classes missing the last block carry exactly zero mass
        for (std::uint64_t mask = 0; mask < 4; ++mask) {
            CHECK(report.by_mask[mask].estimate == 0.0);
            CHECK(report.by_mask[mask].stderror == 0.0);
        }
    }
}

TEST_CASE("empirical moments respect the interpolation inequality") {
    const auto law = make_zeta_law(0.5, 1000);
    const auto env_law = make_env_law(1.5, 0.5);
    const std::uint64_t N = 48, ell = 16, m = 3;
    const auto p = make_polymer_params(0.8, 0.1, N, law, env_law);
    const auto cfg = make_penalty_config(0.4, ell, 1.5, 0.5, 0.8, 1.0);
    const double theta = cfg.theta;
    const auto blocks = make_block_set(m, {1, 3});
    const std::uint64_t target_mask = block_mask(blocks);

    std::uint64_t penalized_draws = 0;
    for (std::uint64_t batch = 0; batch < 5; ++batch) {
        MeanAccumulator lhs, cost, benefit;
        for (std::uint64_t r = 0; r < 200; ++r) {
            RngStream rng = RngStream::for_replica(1000 + batch, r);
            EnvironmentSample env;
            env.omega.resize(N);
            for (auto& w : env.omega) w = env_law.sample(rng);
            const double z_class = std::exp(coarse_grained_all(p, env, ell)[target_mask]);
            const double g = block_penalty_product(cfg, env, blocks);
            if (g < 1.0) ++penalized_draws;
            lhs.add(std::pow(z_class, theta));
            cost.add(std::pow(g, -theta / (1.0 - theta)));
            benefit.add(g * z_class);
        }
        CHECK(lhs.mean() <= std::pow(cost.mean(), 1.0 - theta) *
                                    std::pow(benefit.mean(), theta) * (1.0 + 1e-9));
    }
    CHECK(penalized_draws > 0); // the penalty is genuinely active in the sweep
}

TEST_CASE("penalized window benefit: identities and bounds") {
    const auto law = make_zeta_law(0.5, 1000);
    const auto env_law = make_env_law(1.5, 0.95);
    const std::uint64_t ell = 16;
    const auto p = make_polymer_params(0.5, 0.4, ell, law, env_law);

    SECTION("window preconditions") {
        const auto cfg = base_config(1.0, ell);
        CHECK_THROWS_AS(penalized_block_mc(p, cfg, 1, 4, 10, 1), std::domain_error);
        CHECK_THROWS_AS(penalized_block_mc(p, cfg, 0, 16, 10, 1), std::domain_error);
        CHECK_THROWS_AS(penalized_block_mc(p, cfg, 9, 17, 10, 1), std::domain_error);
        CHECK_THROWS_AS(penalized_block_mc(p, cfg, 9, 9, 10, 1), std::domain_error);
    }

    SECTION("zero penalty reduces to the mean-one window estimator") {
        auto cfg = base_config(1.0, ell);
        cfg.M = 0.0;
        const std::uint64_t n = 10000, seed = 1618;
        // a milder environment tail keeps the sample mean of the heavy-tailed
        // window weight close to its expectation at this replica count
        const auto mild_env = make_env_law(1.5, 0.4);
        const auto pm = make_polymer_params(0.4, 0.4, ell, law, mild_env);
        const auto est = penalized_block_mc(pm, cfg, 1, 16, n, seed);
        // manual replay with the same stream contract, h forced to zero
        auto p0 = pm;
        p0.h = 0.0;
        const auto mass = renewal_mass(law, 15);
        MeanAccumulator replay;
        for (std::uint64_t r = 0; r < n; ++r) {
            RngStream rng = RngStream::for_replica(seed, r);
            EnvironmentSample env;
            env.omega.resize(ell);
            for (auto& w : env.omega) w = mild_env.sample(rng);
            replay.add(std::exp(window_log_partition(p0, env, 1, 16, &mass)));
        }
        CHECK_THAT(est.estimate, WithinRel(replay.mean(), 1e-12));
        CHECK_THAT(est.estimate, WithinAbs(1.0, 3.0 * est.stderror)); // E[Z0] = 1
    }

    SECTION("penalty only lowers the benefit, with the exact two-term split") {
        const auto cfg = base_config(1.0, ell);
        auto cfg0 = cfg;
        cfg0.M = 0.0;
        const std::uint64_t n = 4000, seed = 2718;
        const auto with_penalty = penalized_block_mc(p, cfg, 1, 16, n, seed);
        const auto without = penalized_block_mc(p, cfg0, 1, 16, n, seed);
        CHECK(with_penalty.estimate <= without.estimate + 1e-15);
        CHECK(with_penalty.estimate <= 1.0 + 3.0 * without.stderror);

        // g Z = e^{-M} Z + (1 - e^{-M}) 1{no peak} Z sample by sample
        auto p0 = p;
        p0.h = 0.0;
        const auto mass = renewal_mass(law, 15);
        MeanAccumulator no_peak_part;
        for (std::uint64_t r = 0; r < n; ++r) {
            RngStream rng = RngStream::for_replica(seed, r);
            EnvironmentSample env;
            env.omega.resize(ell);
            for (auto& w : env.omega) w = env_law.sample(rng);
            const double z = std::exp(window_log_partition(p0, env, 1, 16, &mass));
            no_peak_part.add(detect_dual_peak(cfg, env.omega).occurred ? 0.0 : z);
        }
        const double split = std::exp(-cfg.M) * without.estimate +
                             (1.0 - std::exp(-cfg.M)) * no_peak_part.mean();
        CHECK_THAT(with_penalty.estimate, WithinRel(split, 1e-12));
    }
}

TEST_CASE("tilted representation matches the direct benefit estimate") {
    const auto law = make_zeta_law(0.5, 1000);
    const auto env_law = make_env_law(1.5, 0.95);
    const std::uint64_t ell = 16;
    const auto p = make_polymer_params(1.0, 0.4, ell, law, env_law);
    const auto cfg = make_penalty_config(1.0, ell, 1.5, 0.5, 0.8, 1.0);
    const std::uint64_t n = 10000;

    const auto direct = penalized_block_mc(p, cfg, 1, 16, n, 555);
    const auto no_peak = tilted_no_peak_mc(p, cfg, 1, 16, n, 556);
    const double companion =
        std::exp(-cfg.M) + (1.0 - std::exp(-cfg.M)) * no_peak.estimate;
    const double sigma = std::sqrt(direct.stderror * direct.stderror +
                                   std::pow((1.0 - std::exp(-cfg.M)) * no_peak.stderror, 2));
    // the contact-pair event is a subset of the full-block event, so the
    // companion can only sit above the direct estimate
    CHECK(direct.estimate <= companion + 3.0 * sigma);
    CHECK_THAT(direct.estimate, WithinAbs(companion, 3.0 * sigma));
}

TEST_CASE("benefit and tilted no-peak probability fall as blocks grow") {
    const auto law = make_zeta_law(0.5, 100000);
    const auto env_law = make_env_law(1.5, 0.95);

    SECTION("direct benefit trend") {
        std::vector<MCEstimate> ests;
        for (std::uint64_t ell : {16, 32, 64, 128}) {
            const auto p = make_polymer_params(1.0, 0.0, ell, law, env_law);
            const auto cfg = make_penalty_config(1.0, ell, 1.5, 0.5, 0.8, 1.0);
            ests.push_back(penalized_block_mc(p, cfg, 1, ell, 2000, 606060));
        }
        for (std::size_t k = 0; k + 1 < ests.size(); ++k) {
            const double sigma = std::sqrt(ests[k].stderror * ests[k].stderror +
                                           ests[k + 1].stderror * ests[k + 1].stderror);
            CHECK(ests[k + 1].estimate < ests[k].estimate + 3.0 * sigma);
        }
        CHECK(ests.back().estimate < ests.front().estimate);
    }

    SECTION("tilted no-peak trend over wide blocks") {
        std::vector<MCEstimate> ests;
        for (std::uint64_t ell : {64, 256, 1024, 4096}) {
            const auto p = make_polymer_params(1.0, 0.0, ell, law, env_law);
            const auto cfg = make_penalty_config(1.0, ell, 1.5, 0.5, 0.8, 1.0);
            ests.push_back(tilted_no_peak_mc(p, cfg, 1, ell, 4000, 313131));
        }
        for (std::size_t k = 0; k + 1 < ests.size(); ++k) {
            const double sigma = std::sqrt(ests[k].stderror * ests[k].stderror +
                                           ests[k + 1].stderror * ests[k + 1].stderror);
            CHECK(ests[k + 1].estimate < ests[k].estimate + 3.0 * sigma);
        }
        CHECK(ests.back().estimate < ests.front().estimate);
    }
}

TEST_CASE("contact-pair events nest into the block event") {
    const auto law = make_zeta_law(0.5, 1000);
    const auto env_law = make_env_law(1.5, 0.95);
    const std::uint64_t ell = 32;
    const auto p = make_polymer_params(1.0, 0.0, ell, law, env_law);
    const auto cfg = make_penalty_config(0.2, ell, 1.5, 0.5, 0.8, 1.0);
    const auto tilt = make_tilted(env_law, p.beta);
    const auto mass = renewal_mass(law, ell - 1);

    SECTION("window event implies the full-block event on joint samples") {
        RngStream rng(97531);
        std::uint64_t hits = 0;
        for (int rep = 0; rep < 2000; ++rep) {
            const auto bridge = sample_bridge(law, mass, ell - 1, rng);
            std::vector<double> omega(ell);
            for (auto& w : omega) w = env_law.sample(rng);
            std::vector<std::uint64_t> contacts;
            for (std::uint64_t c : bridge.contacts) {
                const std::uint64_t site = 1 + c;
                contacts.push_back(site);
                if (site > 1) omega[site - 1] = tilt.sample(rng);
            }
            if (peak_on_contacts(cfg, omega, contacts, 1, ell)) {
                ++hits;
                REQUIRE(detect_dual_peak(cfg, omega).occurred);
            }
        }
        CHECK(hits > 20); // the implication was actually exercised
    }

    SECTION("pair-count event implies the window event when f >= 4r") {
        const std::uint64_t r = 8, f = 32;
        RngStream rng(86420);
        std::uint64_t hits = 0;
        for (int rep = 0; rep < 2000; ++rep) {
            const auto path = sample_path(law, ell, rng);
            std::vector<double> omega(ell);
            for (auto& w : omega) w = env_law.sample(rng);
            if (rep % 4 == 0 && path.contacts.size() >= 3) {
                // plant a qualifying pair on genuine neighbouring contacts
                const auto c1 = path.contacts[1];
                const auto c2 = path.contacts[2];
                if (c1 >= 1 && c2 <= r + short_range_span(law.alpha, r) &&
                    c2 - c1 <= short_range_span(law.alpha, r)) {
                    const double lvl = v_threshold(cfg, c2 - c1) * 1.01;
                    omega[c1 - 1] = lvl;
                    omega[c2 - 1] = lvl;
                }
            }
            const auto y = y_statistic(cfg, law.alpha, omega, path, r);
            if (y.value >= 1) {
                ++hits;
                REQUIRE(peak_on_contacts(cfg, omega, path.contacts, 0, f));
            }
        }
        CHECK(hits > 20);
    }
}

TEST_CASE("pair-count statistic counts exactly what it should") {
    const auto cfg = make_penalty_config(0.5, 64, 1.5, 0.5, 0.8, 1.0);
    const double alpha = 0.5;
    const std::uint64_t r = 5; // jmax = floor(5^{1/8}) = 1

    SECTION("empty path and low environments give zero") {
        std::vector<double> omega(6, 10.0);
        RenewalPath empty;
        empty.contacts = {0};
        CHECK(y_statistic(cfg, alpha, omega, empty, r).value == 0);

        RenewalPath full;
        full.contacts = {0, 1, 2, 3, 4, 5, 6};
        std::vector<double> low(6, -0.5);
        CHECK(y_statistic(cfg, alpha, low, full, r).value == 0);
    }

    SECTION("constructed witness at the inclusive threshold") {
        RenewalPath path;
        path.contacts = {0, 2, 3, 6};
        std::vector<double> omega(6, -0.5);
        omega[1] = v_threshold(cfg, 1); // site 2
        omega[2] = v_threshold(cfg, 1); // site 3
        const auto y = y_statistic(cfg, alpha, omega, path, r);
        CHECK(y.value == 1);
        CHECK(y.pairs_scanned == 5); // r * jmax
    }

    SECTION("count is exact on a handcrafted configuration") {
        RenewalPath path;
        path.contacts = {0, 1, 2, 3, 5, 6};
        std::vector<double> omega(6, 20.0);
        omega[3] = -0.5; // site 4 not a contact anyway
        // pairs (i, i+1), i <= 5, both contacts: (1,2), (2,3), (5,6) all high
        CHECK(y_statistic(cfg, alpha, omega, path, r).value == 3);
        omega[1] = 0.0; // site 2 low kills pairs (1,2) and (2,3)
        CHECK(y_statistic(cfg, alpha, omega, path, r).value == 1);
    }

    SECTION("environment must cover the scanned range") {
        RenewalPath path;
        path.contacts = {0, 1};
        std::vector<double> omega(5, 0.0); // needs r + jmax = 6
        CHECK_THROWS_AS(y_statistic(cfg, alpha, omega, path, r), std::domain_error);
    }
}

TEST_CASE("pair and triple contact marginals factorize exactly") {
    SECTION("wide-support law") {
        const auto law = make_zeta_law(0.5, 1000000);
        const auto check = pair_marginal_check(law, 12);
        CHECK(check.max_pair_error <= 1e-12);
        CHECK(check.max_triple_error <= 1e-12);
    }
    SECTION("short-support law exercises the tail atoms") {
        const auto law = make_zeta_law(0.7, 3);
        const auto check = pair_marginal_check(law, 10);
        CHECK(check.max_pair_error <= 1e-12);
        CHECK(check.max_triple_error <= 1e-12);
    }
    SECTION("range guard") {
        const auto law = make_zeta_law(0.5, 100);
        CHECK_THROWS_AS(pair_marginal_check(law, 15), std::domain_error);
    }
}

TEST_CASE("moment sums: closed forms and scaling envelopes") {
    const auto law = make_zeta_law(0.5, 1000000);

    SECTION("single-site closed form") {
        const auto sums = exact_moment_sums(law, 1);
        const double u1 = law.c_k;
        CHECK_THAT(sums.s1, WithinRel(u1 * u1, 1e-13));
        CHECK(sums.s3a == 0.0);
        CHECK_THAT(sums.s3b, WithinRel(u1 * u1 * u1, 1e-13));
    }

    SECTION("frozen reference values") {
        const auto at16 = exact_moment_sums(law, 16);
        CHECK_THAT(at16.s1, WithinRel(1.0361178480072168, 1e-9));
        CHECK(at16.s3a == 0.0);
        CHECK_THAT(at16.s3b, WithinRel(0.3969229361327347, 1e-9));
        const auto at256 = exact_moment_sums(law, 256);
        CHECK_THAT(at256.s3a, WithinRel(1.3209147217545225, 1e-9));
        const auto top = exact_moment_sums(law, 16384);
        CHECK_THAT(top.s1, WithinRel(81.02183658968104, 1e-9));
        CHECK_THAT(top.s3a, WithinRel(24.690595059539234, 1e-9));
        CHECK_THAT(top.s3b, WithinRel(60.78949068674542, 1e-9));
    }

    SECTION("normalized sequences stay within a factor of ten") {
        const double alpha = law.alpha;
        std::vector<double> n1, n3a, n3b;
        for (std::uint64_t k = 4; k <= 14; ++k) {
            const std::uint64_t r = std::uint64_t{1} << k;
            const auto sums = exact_moment_sums(law, r);
            const double lr = std::log(static_cast<double>(r));
            n1.push_back(sums.s1 / (std::pow(static_cast<double>(r), alpha) * lr));
            if (sums.s3a > 0.0)
                n3a.push_back(sums.s3a /
                              (std::pow(static_cast<double>(r), 1.5 * alpha) * lr));
            else
                CHECK(k <= 7); // short ranges have no second neighbour to pair
            n3b.push_back(sums.s3b / (std::pow(static_cast<double>(r), 1.5 * alpha) * lr));
        }
        const auto ratio = [](const std::vector<double>& v) {
            const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
            return *hi / *lo;
        };
        CHECK(ratio(n1) <= 10.0);
        CHECK(ratio(n3a) <= 10.0);
        CHECK(ratio(n3b) <= 10.0);
    }
}

TEST_CASE("contact count refinement discrepancy shrinks with scale") {
    SECTION("deterministic renewal gives an exactly zero discrepancy") {
        const auto law = unit_gap_law();
        const auto est = x_discrepancy_mc(law, 9, 100, 42);
        CHECK(est.estimate == 0.0);
        CHECK(est.stderror == 0.0);
    }

    SECTION("preconditions") {
        const auto law = unit_gap_law();
        CHECK_THROWS_AS(x_discrepancy_mc(law, 1, 10, 1), std::domain_error);
    }

    SECTION("decreasing trend across scales") {
        const auto law = make_zeta_law(0.5, 1000000);
        std::vector<MCEstimate> ests;
        for (std::uint64_t r : {64, 256, 1024, 4096})
            ests.push_back(x_discrepancy_mc(law, r, 10000, 777000));
        for (std::size_t k = 0; k + 1 < ests.size(); ++k) {
            const double sigma = std::sqrt(ests[k].stderror * ests[k].stderror +
                                           ests[k + 1].stderror * ests[k + 1].stderror);
            CHECK(ests[k + 1].estimate < ests[k].estimate - 3.0 * sigma);
        }
        CHECK(ests.front().estimate > 0.0);
    }
}

TEST_CASE("compensated contact sums are exactly orthogonal when separated") {
    SECTION("wide-support law") {
        const auto law = make_zeta_law(0.5, 1000000);
        const auto report = u_orthogonality_check(law, 12);
        CHECK(report.pairs_checked > 0);
        CHECK(report.max_offdiag_abs <= 1e-12);
        CHECK(report.max_diag_value <= std::pow(12.0, 0.25)); // crude r^{alpha/2} cap
        CHECK(report.max_diag_ratio > 0.0);
    }

    SECTION("deterministic renewal has vanishing compensated sums") {
        const auto law = unit_gap_law();
        const auto report = u_orthogonality_check(law, 10);
        CHECK(report.max_offdiag_abs == 0.0);
        CHECK(report.max_diag_value == 0.0);
    }

    SECTION("enumeration guard") {
        const auto law = make_zeta_law(0.5, 1000);
        CHECK_THROWS_AS(u_orthogonality_check(law, 14), std::domain_error);
    }
}

TEST_CASE("conditioning on a far contact inflates local probabilities boundedly") {
    SECTION("deterministic renewal is unaffected by conditioning") {
        const auto law = unit_gap_law();
        CHECK(conditioning_constant(law, 10) == 1.0);
    }

    SECTION("frozen values and uniform boundedness across horizons") {
        const auto law = make_zeta_law(0.5, 1000000);
        CHECK_THAT(conditioning_constant(law, 10), WithinRel(1.4009998686721634, 1e-10));
        std::vector<double> cs;
        for (std::uint64_t N : {6, 8, 10, 12, 14}) {
            cs.push_back(conditioning_constant(law, N));
            CHECK(cs.back() >= 1.0);
        }
        const auto [lo, hi] = std::minmax_element(cs.begin(), cs.end());
        CHECK(*hi / *lo <= 3.0);
    }

    SECTION("grouped enumeration oracle agrees with the collapsed formula") {
        const auto law = make_zeta_law(0.5, 1000000);
        const std::uint64_t N = 10, mid = 5;
        const auto mass = renewal_mass(law, N);
        std::map<std::uint64_t, double> free_atom, pinned_atom;
        for (const auto& [path, prob] : enumerate_paths(law, N, /*pinned=*/false)) {
            std::uint64_t atom = 0;
            for (std::uint64_t c : path.contacts)
                if (c >= 1 && c <= mid) atom |= std::uint64_t{1} << c;
            free_atom[atom] += prob;
        }
        for (const auto& [path, prob] : enumerate_paths(law, N, /*pinned=*/true)) {
            std::uint64_t atom = 0;
            for (std::uint64_t c : path.contacts)
                if (c >= 1 && c <= mid) atom |= std::uint64_t{1} << c;
            pinned_atom[atom] += prob;
        }
        double best = 0.0;
        for (const auto& [atom, pf] : free_atom) {
            const auto it = pinned_atom.find(atom);
            if (it == pinned_atom.end()) continue;
            best = std::max(best, it->second / mass.at(N) / pf);
        }
        CHECK_THAT(conditioning_constant(law, N), WithinRel(best, 1e-12));
    }
}
