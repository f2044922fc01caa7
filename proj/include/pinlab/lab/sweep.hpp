#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pinlab/disorder.hpp"
#include "pinlab/lab/store.hpp"
#include "pinlab/polymer.hpp"
#include "pinlab/relevance.hpp"
#include "pinlab/renewal.hpp"
#include "pinlab/rng.hpp"

// Reproducible sweep orchestration: a config describes one estimator and a
// cartesian parameter grid; every grid point gets a deterministic seed derived
// from the master seed and the point's position, so reruns and different
// worker counts produce byte-identical result files.

namespace pinlab::lab {

/// Validation failure carrying one message per offending field.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(std::vector<std::string> items)
        : std::runtime_error(join(items)), items_(std::move(items)) {}
    const std::vector<std::string>& items() const { return items_; }

  private:
    static std::string join(const std::vector<std::string>& items) {
        std::string all = "invalid config:";
        for (const auto& item : items) all += "\n  - " + item;
        return all;
    }
    std::vector<std::string> items_;
};

struct SweepConfig {
    std::string op;
    std::uint64_t n_max = 1000000;
    std::uint64_t replicas = 0;
    std::uint64_t master_seed = 1;
    std::vector<double> alpha, gamma, a, beta, h, theta, M, eta, A;
    std::vector<std::uint64_t> N, ell;
    json raw; // canonical config, hashed into the experiment id
};

/// One expanded grid point; only the fields used by the operation are set.
struct GridPoint {
    double alpha = 0.5, gamma = 1.5, a = 0.5, beta = 0.0, h = 0.0;
    double theta = 0.8, M = 0.0, eta = 0.5, A = 1.0;
    std::uint64_t N = 1, ell = 3;
    json point; // serialized parameter point, canonical key order
};

namespace detail {

inline const std::set<std::string>& known_ops() {
    static const std::set<std::string> ops{"free-energy", "frac-moment", "dual-peak",
                                           "penalty-cost", "block-benefit"};
    return ops;
}

/// Grid keys consumed by each operation, in the fixed enumeration order.
inline std::vector<std::string> op_keys(const std::string& op) {
    if (op == "free-energy") return {"alpha", "gamma", "a", "beta", "h", "N"};
    if (op == "frac-moment") return {"alpha", "gamma", "a", "beta", "h", "N", "theta"};
    if (op == "dual-peak") return {"gamma", "a", "M", "eta", "theta", "A", "ell"};
    if (op == "penalty-cost") return {"gamma", "a", "M", "eta", "theta", "A", "ell"};
    if (op == "block-benefit")
        return {"alpha", "gamma", "a", "beta", "M", "eta", "theta", "A", "ell"};
    throw std::logic_error("op_keys: unknown op " + op);
}

/// Keys that get a single default value when the operation needs them but the
/// config leaves them out.
inline std::optional<double> default_value(const std::string& key) {
    if (key == "eta") return 0.5;
    if (key == "theta") return 0.8;
    if (key == "A") return 1.0;
    return std::nullopt;
}

inline std::vector<double> as_double_grid(const json& value, const std::string& key,
                                          std::vector<std::string>& errors) {
    std::vector<double> out;
    const json arr = value.is_array() ? value : json::array({value});
    for (const auto& v : arr) {
        if (!v.is_number()) {
            errors.push_back(key + ": expected a number or array of numbers");
            return {};
        }
        out.push_back(v.get<double>());
    }
    return out;
}

inline std::vector<std::uint64_t> as_index_grid(const json& value, const std::string& key,
                                                std::vector<std::string>& errors) {
    std::vector<std::uint64_t> out;
    const json arr = value.is_array() ? value : json::array({value});
    for (const auto& v : arr) {
        if (!v.is_number_integer() || v.get<long long>() < 0) {
            errors.push_back(key + ": expected a nonnegative integer or array of them");
            return {};
        }
        out.push_back(v.get<std::uint64_t>());
    }
    return out;
}

} // namespace detail

/// Parses and validates a sweep config, reporting every violation at once.
/// Scalars are accepted wherever a grid is expected. `forced_op` lets the
/// single-estimator CLI commands reuse the same schema without an "op" key.
inline SweepConfig parse_sweep_config(const json& j, const std::string& forced_op = "") {
    std::vector<std::string> errors;
    if (!j.is_object()) throw ConfigError({"config must be a JSON object"});

    static const std::set<std::string> known_keys{
        "op",   "alpha", "gamma", "a", "beta",     "h",   "N",    "theta",
        "M",    "eta",   "A",     "ell", "n_max",  "replicas", "seed"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known_keys.count(it.key())) errors.push_back("unknown key: " + it.key());

    SweepConfig cfg;
    cfg.raw = j;
    if (!forced_op.empty()) {
        cfg.op = forced_op;
        if (j.contains("op") && j.at("op") != forced_op)
            errors.push_back("op: conflicts with the invoked command");
    } else if (j.contains("op") && j.at("op").is_string()) {
        cfg.op = j.at("op").get<std::string>();
    } else {
        errors.push_back("op: required string");
    }
    if (!cfg.op.empty() && !detail::known_ops().count(cfg.op))
        errors.push_back("op: unknown operation '" + cfg.op + "'");

    if (j.contains("n_max")) {
        auto g = detail::as_index_grid(j.at("n_max"), "n_max", errors);
        if (g.size() == 1)
            cfg.n_max = g.front();
        else if (!g.empty())
            errors.push_back("n_max: must be a single value");
    }
    if (j.contains("seed")) {
        auto g = detail::as_index_grid(j.at("seed"), "seed", errors);
        if (g.size() == 1)
            cfg.master_seed = g.front();
        else if (!g.empty())
            errors.push_back("seed: must be a single value");
    }
    if (j.contains("replicas")) {
        auto g = detail::as_index_grid(j.at("replicas"), "replicas", errors);
        if (g.size() == 1)
            cfg.replicas = g.front();
        else if (!g.empty())
            errors.push_back("replicas: must be a single value");
    } else {
        errors.push_back("replicas: required");
    }
    if (cfg.replicas < 2 && j.contains("replicas"))
        errors.push_back("replicas: need at least 2 for a standard error");
    if (cfg.n_max < 2) errors.push_back("n_max: must be >= 2");

    const auto load_doubles = [&](const char* key, std::vector<double>& into) {
        if (j.contains(key)) into = detail::as_double_grid(j.at(key), key, errors);
    };
    load_doubles("alpha", cfg.alpha);
    load_doubles("gamma", cfg.gamma);
    load_doubles("a", cfg.a);
    load_doubles("beta", cfg.beta);
    load_doubles("h", cfg.h);
    load_doubles("theta", cfg.theta);
    load_doubles("M", cfg.M);
    load_doubles("eta", cfg.eta);
    load_doubles("A", cfg.A);
    if (j.contains("N")) cfg.N = detail::as_index_grid(j.at("N"), "N", errors);
    if (j.contains("ell")) cfg.ell = detail::as_index_grid(j.at("ell"), "ell", errors);

    for (double v : cfg.alpha)
        if (!(v > 0.0 && v < 1.0)) errors.push_back("alpha: " + std::to_string(v) + " outside (0,1)");
    for (double v : cfg.gamma)
        if (!(v > 1.0 && v < 2.0)) errors.push_back("gamma: " + std::to_string(v) + " outside (1,2)");
    for (double v : cfg.a)
        if (!(v > 0.0 && v < 1.0)) errors.push_back("a: " + std::to_string(v) + " outside (0,1)");
    for (double v : cfg.beta)
        if (!(v >= 0.0 && v <= 1.0)) errors.push_back("beta: " + std::to_string(v) + " outside [0,1]");
    for (double v : cfg.theta)
        if (!(v > 0.0 && v < 1.0)) errors.push_back("theta: " + std::to_string(v) + " outside (0,1)");
    for (double v : cfg.M)
        if (!(v >= 0.0)) errors.push_back("M: " + std::to_string(v) + " negative");
    for (double v : cfg.eta)
        if (!(v > 0.0 && v < 1.0)) errors.push_back("eta: " + std::to_string(v) + " outside (0,1)");
    for (double v : cfg.A)
        if (!(v > 0.0)) errors.push_back("A: " + std::to_string(v) + " not positive");
    for (std::uint64_t v : cfg.N)
        if (v < 1) errors.push_back("N: must be >= 1");

    if (!cfg.op.empty() && detail::known_ops().count(cfg.op)) {
        const bool needs_peaks = cfg.op != "free-energy" && cfg.op != "frac-moment";
        if (needs_peaks)
            for (std::uint64_t v : cfg.ell)
                if (v < 3) errors.push_back("ell: must be >= 3 for peak thresholds");
        for (const auto& key : detail::op_keys(cfg.op)) {
            if (j.contains(key)) continue;
            if (const auto dflt = detail::default_value(key)) {
                if (key == "eta") cfg.eta = {*dflt};
                if (key == "theta") cfg.theta = {*dflt};
                if (key == "A") cfg.A = {*dflt};
            } else {
                errors.push_back(key + ": required by op '" + cfg.op + "'");
            }
        }
    }

    if (!errors.empty()) throw ConfigError(std::move(errors));
    return cfg;
}

/// Cartesian grid in the fixed key order returned by op_keys. Any empty grid
/// makes the whole product empty.
inline std::vector<GridPoint> expand_grid(const SweepConfig& cfg) {
    const auto keys = detail::op_keys(cfg.op);
    std::vector<GridPoint> points;
    points.emplace_back();
    for (const auto& key : keys) {
        std::vector<GridPoint> next;
        const auto extend_double = [&](const std::vector<double>& grid,
                                       void (*apply)(GridPoint&, double)) {
            for (const auto& base : points)
                for (double v : grid) {
                    GridPoint g = base;
                    apply(g, v);
                    g.point[key] = v;
                    next.push_back(std::move(g));
                }
        };
        const auto extend_index = [&](const std::vector<std::uint64_t>& grid,
                                      void (*apply)(GridPoint&, std::uint64_t)) {
            for (const auto& base : points)
                for (std::uint64_t v : grid) {
                    GridPoint g = base;
                    apply(g, v);
                    g.point[key] = v;
                    next.push_back(std::move(g));
                }
        };
        if (key == "alpha") extend_double(cfg.alpha, [](GridPoint& g, double v) { g.alpha = v; });
        else if (key == "gamma") extend_double(cfg.gamma, [](GridPoint& g, double v) { g.gamma = v; });
        else if (key == "a") extend_double(cfg.a, [](GridPoint& g, double v) { g.a = v; });
        else if (key == "beta") extend_double(cfg.beta, [](GridPoint& g, double v) { g.beta = v; });
        else if (key == "h") extend_double(cfg.h, [](GridPoint& g, double v) { g.h = v; });
        else if (key == "theta") extend_double(cfg.theta, [](GridPoint& g, double v) { g.theta = v; });
        else if (key == "M") extend_double(cfg.M, [](GridPoint& g, double v) { g.M = v; });
        else if (key == "eta") extend_double(cfg.eta, [](GridPoint& g, double v) { g.eta = v; });
        else if (key == "A") extend_double(cfg.A, [](GridPoint& g, double v) { g.A = v; });
        else if (key == "N") extend_index(cfg.N, [](GridPoint& g, std::uint64_t v) { g.N = v; });
        else if (key == "ell") extend_index(cfg.ell, [](GridPoint& g, std::uint64_t v) { g.ell = v; });
        points = std::move(next);
    }
    return points;
}

/// Deterministic per-point seed: the same splitmix64 split used for replica
/// streams, applied to the point's position in the expanded grid.
inline std::uint64_t derive_point_seed(std::uint64_t master_seed, std::uint64_t index) {
    std::uint64_t key = master_seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    return splitmix64_next(key);
}

namespace detail {

/// Laws are cheap but not free to build (the dense zeta law fills n_max
/// entries), so consecutive grid points reuse them when unchanged.
struct LawCache {
    std::optional<std::pair<double, std::uint64_t>> law_key;
    std::optional<InterArrivalLaw> law;
    std::optional<std::pair<double, double>> env_key;
    std::optional<EnvironmentLaw> env;

    const InterArrivalLaw& inter_arrival(double alpha, std::uint64_t n_max) {
        if (!law_key || *law_key != std::make_pair(alpha, n_max)) {
            law = make_zeta_law(alpha, n_max);
            law_key = {alpha, n_max};
        }
        return *law;
    }
    const EnvironmentLaw& environment(double gamma, double a) {
        if (!env_key || *env_key != std::make_pair(gamma, a)) {
            env = make_env_law(gamma, a);
            env_key = {gamma, a};
        }
        return *env;
    }
};

} // namespace detail

/// Evaluates the configured estimator at one grid point.
inline MCEstimate evaluate_point(const SweepConfig& cfg, const GridPoint& g,
                                 std::uint64_t point_seed, unsigned workers,
                                 detail::LawCache& cache) {
    if (cfg.op == "free-energy") {
        const auto& law = cache.inter_arrival(g.alpha, cfg.n_max);
        const auto& env = cache.environment(g.gamma, g.a);
        const auto p = make_polymer_params(g.beta, g.h, g.N, law, env);
        const auto f = quenched_free_energy_mc(p, cfg.replicas, point_seed, workers);
        return MCEstimate{f.estimate, f.stderror, f.n_samples};
    }
    if (cfg.op == "frac-moment") {
        const auto& law = cache.inter_arrival(g.alpha, cfg.n_max);
        const auto& env = cache.environment(g.gamma, g.a);
        const auto p = make_polymer_params(g.beta, g.h, g.N, law, env);
        return fractional_moment_mc(p, g.theta, cfg.replicas, point_seed, workers);
    }
    if (cfg.op == "dual-peak") {
        const auto pc = make_penalty_config(g.M, g.ell, g.gamma, g.eta, g.theta, g.A);
        const auto& env = cache.environment(g.gamma, g.a);
        return dual_peak_probability_mc(pc, env, cfg.replicas, point_seed, workers);
    }
    if (cfg.op == "penalty-cost") {
        const auto pc = make_penalty_config(g.M, g.ell, g.gamma, g.eta, g.theta, g.A);
        const auto& env = cache.environment(g.gamma, g.a);
        return penalty_cost_mc(pc, env, cfg.replicas, point_seed, workers);
    }
    if (cfg.op == "block-benefit") {
        const auto pc = make_penalty_config(g.M, g.ell, g.gamma, g.eta, g.theta, g.A);
        const auto& law = cache.inter_arrival(g.alpha, cfg.n_max);
        const auto& env = cache.environment(g.gamma, g.a);
        const auto p = make_polymer_params(g.beta, 0.0, g.ell, law, env);
        return penalized_block_mc(p, pc, 1, g.ell, cfg.replicas, point_seed, workers);
    }
    throw std::logic_error("evaluate_point: unknown op " + cfg.op);
}

/// Runs (or resumes) a sweep: every grid point not yet present in the store is
/// evaluated and appended. Returns the newly appended records.
inline std::vector<ResultRecord> run_sweep(ResultStore& store, const SweepConfig& cfg,
                                           unsigned workers = 1) {
    const std::string id = experiment_id_for(cfg.raw);
    ExperimentManifest manifest;
    manifest.id = id;
    manifest.created = utc_timestamp();
    manifest.version = tool_version;
    manifest.master_seed = cfg.master_seed;
    manifest.config = cfg.raw;
    store.register_experiment(manifest);

    const auto existing = store.existing_keys();
    const auto points = expand_grid(cfg);
    detail::LawCache cache;
    std::vector<ResultRecord> fresh;
    for (std::size_t index = 0; index < points.size(); ++index) {
        const auto& g = points[index];
        if (existing.count(record_key(id, cfg.op, g.point))) continue;
        const std::uint64_t point_seed = derive_point_seed(cfg.master_seed, index);
        const auto t0 = std::chrono::steady_clock::now();
        const auto est = evaluate_point(cfg, g, point_seed, workers, cache);
        const auto t1 = std::chrono::steady_clock::now();

        ResultRecord record;
        record.experiment_id = id;
        record.op = cfg.op;
        record.point = g.point;
        record.estimate = est.estimate;
        record.stderror = est.stderror;
        record.n_samples = est.n_samples;
        record.point_seed = point_seed;
        store.append(record);
        store.append_timing(id, cfg.op, g.point,
                            std::chrono::duration<double, std::milli>(t1 - t0).count());
        fresh.push_back(std::move(record));
    }
    return fresh;
}

// ---------------------------------------------------------------------------
// Marginal scan: couple the block geometry to beta through the field scale
// h_beta = exp(-A beta^exponent) and report the penalization diagnostics.

struct MarginalScanConfig {
    std::vector<double> beta;
    double alpha = 0.5, gamma = 1.5, a = 0.5;
    double A = 1.0, M = 1.0, eta = 0.5, theta = 0.8;
    std::uint64_t n_max = 1000000;
    std::uint64_t replicas = 100;
    std::uint64_t master_seed = 1;
    std::uint64_t ell_cap = 256;
    json raw;
};

inline MarginalScanConfig parse_marginal_scan_config(const json& j) {
    std::vector<std::string> errors;
    if (!j.is_object()) throw ConfigError({"config must be a JSON object"});
    static const std::set<std::string> known_keys{"beta", "alpha", "gamma", "a", "A",
                                                  "M",    "eta",   "theta", "n_max",
                                                  "replicas", "seed", "ell_cap"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known_keys.count(it.key())) errors.push_back("unknown key: " + it.key());

    MarginalScanConfig cfg;
    cfg.raw = j;
    if (j.contains("beta"))
        cfg.beta = detail::as_double_grid(j.at("beta"), "beta", errors);
    else
        errors.push_back("beta: required");
    const auto scalar = [&](const char* key, double& into, auto check, const char* range) {
        if (!j.contains(key)) return;
        auto g = detail::as_double_grid(j.at(key), key, errors);
        if (g.size() != 1) {
            errors.push_back(std::string(key) + ": must be a single value");
            return;
        }
        into = g.front();
        if (!check(into)) errors.push_back(std::string(key) + ": outside " + range);
    };
    scalar("alpha", cfg.alpha, [](double v) { return v > 0 && v < 1; }, "(0,1)");
    scalar("gamma", cfg.gamma, [](double v) { return v > 1 && v < 2; }, "(1,2)");
    scalar("a", cfg.a, [](double v) { return v > 0 && v < 1; }, "(0,1)");
    scalar("A", cfg.A, [](double v) { return v > 0; }, "(0,inf)");
    scalar("M", cfg.M, [](double v) { return v >= 0; }, "[0,inf)");
    scalar("eta", cfg.eta, [](double v) { return v > 0 && v < 1; }, "(0,1)");
    scalar("theta", cfg.theta, [](double v) { return v > 0 && v < 1; }, "(0,1)");
    for (double v : cfg.beta)
        if (!(v > 0.0 && v <= 1.0)) errors.push_back("beta: " + std::to_string(v) + " outside (0,1]");
    const auto index = [&](const char* key, std::uint64_t& into) {
        if (!j.contains(key)) return;
        auto g = detail::as_index_grid(j.at(key), key, errors);
        if (g.size() == 1)
            into = g.front();
        else if (!g.empty())
            errors.push_back(std::string(key) + ": must be a single value");
    };
    index("n_max", cfg.n_max);
    index("replicas", cfg.replicas);
    index("seed", cfg.master_seed);
    index("ell_cap", cfg.ell_cap);
    if (cfg.replicas < 2) errors.push_back("replicas: need at least 2");
    if (cfg.n_max < 2) errors.push_back("n_max: must be >= 2");
    if (cfg.ell_cap < 3) errors.push_back("ell_cap: must be >= 3");
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return cfg;
}

struct MarginalRow {
    double beta = 0.0;
    double h_beta = 0.0;
    std::uint64_t ell = 0;
    bool capped = false;
    MCEstimate cost, benefit, moment;
};

/// For each beta: h = h_beta, ell = ceil(1/h) (capped, flagged, floored at 3),
/// then the penalty cost, the penalized window benefit, and the two-block
/// fractional moment at horizon 2 ell with field h_beta.
inline std::vector<MarginalRow> marginal_scan(ResultStore& store,
                                              const MarginalScanConfig& cfg,
                                              unsigned workers = 1) {
    const std::string id = experiment_id_for(cfg.raw);
    ExperimentManifest manifest;
    manifest.id = id;
    manifest.created = utc_timestamp();
    manifest.version = tool_version;
    manifest.master_seed = cfg.master_seed;
    manifest.config = cfg.raw;
    store.register_experiment(manifest);

    const auto existing = store.existing_keys();
    const auto env = make_env_law(cfg.gamma, cfg.a);
    const auto law = make_zeta_law(cfg.alpha, cfg.n_max);

    std::vector<MarginalRow> rows;
    for (std::size_t i = 0; i < cfg.beta.size(); ++i) {
        MarginalRow row;
        row.beta = cfg.beta[i];
        const auto probe = make_penalty_config(cfg.M, 3, cfg.gamma, cfg.eta, cfg.theta, cfg.A);
        const auto length = block_length_from_beta(probe, row.beta, cfg.ell_cap);
        row.h_beta = length.h_beta;
        row.ell = std::max<std::uint64_t>(length.ell, 3); // peak thresholds need >= 3
        row.capped = length.capped;
        const auto pc = make_penalty_config(cfg.M, row.ell, cfg.gamma, cfg.eta, cfg.theta, cfg.A);

        const std::uint64_t point_seed = derive_point_seed(cfg.master_seed, i);
        const auto p0 = make_polymer_params(row.beta, 0.0, row.ell, law, env);
        const auto ph = make_polymer_params(row.beta, row.h_beta, 2 * row.ell, law, env);

        std::uint64_t sub = 0;
        const auto diag_seed = [&]() { return derive_point_seed(point_seed, sub++); };
        row.cost = penalty_cost_mc(pc, env, cfg.replicas, diag_seed(), workers);
        row.benefit = penalized_block_mc(p0, pc, 1, row.ell, cfg.replicas, diag_seed(), workers);
        row.moment = fractional_moment_blocks_mc(ph, cfg.theta, row.ell, cfg.replicas,
                                                 diag_seed(), workers)
                         .total;

        const auto record_row = [&](const char* diagnostic, const MCEstimate& est) {
            json point{{"beta", row.beta},   {"h_beta", row.h_beta}, {"ell", row.ell},
                       {"capped", row.capped}, {"diagnostic", diagnostic}};
            if (existing.count(record_key(id, "marginal-scan", point))) return;
            ResultRecord record;
            record.experiment_id = id;
            record.op = "marginal-scan";
            record.point = point;
            record.estimate = est.estimate;
            record.stderror = est.stderror;
            record.n_samples = est.n_samples;
            record.point_seed = point_seed;
            store.append(record);
        };
        record_row("penalty-cost", row.cost);
        record_row("block-benefit", row.benefit);
        record_row("frac-moment", row.moment);
        rows.push_back(row);
    }
    return rows;
}

} // namespace pinlab::lab
