// pinlab: numerical laboratory for the disordered pinning model with
// heavy-tailed environment. Subcommands either run one estimator over a
// parameter grid, orchestrate a sweep from a config file, export stored
// results, or run the built-in verification checks.
//
// Exit codes: 0 success, 1 a verification check failed, 2 usage/config error.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pinlab/lab/store.hpp"
#include "pinlab/lab/sweep.hpp"
#include "pinlab/lab/verify.hpp"
#include "pinlab/version.hpp"

namespace lab = pinlab::lab;
using nlohmann::json;

namespace {

struct CommonFlags {
    std::string store;
    unsigned workers = 1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--store", f.store,
                    "store directory (default: $PINLAB_STORE, else ./pinlab-store)");
    cmd->add_option("--workers", f.workers, "worker threads (results are identical for any count)")
        ->check(CLI::Range(1u, 256u));
}

CLI::App* add_command(CLI::App& app, const char* name, const char* description) {
    CLI::App* cmd = app.add_subcommand(name, description);
    cmd->set_help_flag("--help", "print help and exit"); // keep -h free for the field flag
    return cmd;
}

/// Inline grid flags for the single-estimator commands. Only flags the user
/// actually sets are copied into the config, so the shared validation layer
/// reports anything missing or out of range.
struct GridFlags {
    std::vector<double> alpha, gamma, a, beta, h, theta, M, eta, A;
    std::vector<std::uint64_t> N, ell;
    std::uint64_t n_max = 1000000, replicas = 0, seed = 1;
};

void add_grid_options(CLI::App* cmd, GridFlags& f, const std::vector<std::string>& keys) {
    const auto want = [&](const char* k) {
        return std::find(keys.begin(), keys.end(), k) != keys.end();
    };
    if (want("alpha"))
        cmd->add_option("--alpha", f.alpha, "renewal tail exponent(s), in (0,1)");
    if (want("gamma"))
        cmd->add_option("--gamma", f.gamma, "environment tail index(es), in (1,2)");
    if (want("a")) cmd->add_option("--a", f.a, "environment support edge(s), in (0,1)");
    if (want("beta")) cmd->add_option("--beta", f.beta, "disorder strength(s), in [0,1]");
    if (want("h")) cmd->add_option("--h", f.h, "pinning field(s)");
    if (want("N")) cmd->add_option("--N", f.N, "system size(s)");
    if (want("theta")) cmd->add_option("--theta", f.theta, "fractional exponent(s), in (0,1)");
    if (want("M")) cmd->add_option("--M", f.M, "peak threshold shift(s), >= 0");
    if (want("eta")) cmd->add_option("--eta", f.eta, "minimal window fraction(s), in (0,1)");
    if (want("A")) cmd->add_option("--A", f.A, "block length amplitude(s), > 0");
    if (want("ell")) cmd->add_option("--ell", f.ell, "block length(s), >= 3");
    cmd->add_option("--n-max", f.n_max, "inter-arrival truncation horizon (default 1e6)");
    cmd->add_option("--replicas", f.replicas, "Monte Carlo replicas per grid point");
    cmd->add_option("--seed", f.seed, "master seed (default 1)");
}

json grid_config(const CLI::App* cmd, const GridFlags& f) {
    json cfg;
    const auto was_set = [&](const char* flag) {
        const CLI::Option* opt = cmd->get_option_no_throw(flag);
        return opt != nullptr && opt->count() > 0;
    };
    const auto put_d = [&](const char* flag, const char* key, const std::vector<double>& v) {
        if (was_set(flag)) cfg[key] = v;
    };
    const auto put_u = [&](const char* flag, const char* key,
                           const std::vector<std::uint64_t>& v) {
        if (was_set(flag)) cfg[key] = v;
    };
    put_d("--alpha", "alpha", f.alpha);
    put_d("--gamma", "gamma", f.gamma);
    put_d("--a", "a", f.a);
    put_d("--beta", "beta", f.beta);
    put_d("--h", "h", f.h);
    put_u("--N", "N", f.N);
    put_d("--theta", "theta", f.theta);
    put_d("--M", "M", f.M);
    put_d("--eta", "eta", f.eta);
    put_d("--A", "A", f.A);
    put_u("--ell", "ell", f.ell);
    cfg["n_max"] = f.n_max;
    cfg["seed"] = f.seed;
    if (cmd->count("--replicas") > 0) cfg["replicas"] = f.replicas;
    return cfg;
}

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw lab::ConfigError({"cannot read config file: " + path});
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw lab::ConfigError({std::string("config is not valid JSON: ") + e.what()});
    }
}

void print_records(const std::vector<lab::ResultRecord>& fresh, std::size_t skipped,
                   const lab::ResultStore& store) {
    for (const auto& r : fresh) {
        std::printf("%s  %.10g +- %.3g  (n = %llu)\n", lab::canonical_dump(r.point).c_str(),
                    r.estimate, r.stderror, static_cast<unsigned long long>(r.n_samples));
    }
    std::printf("%zu new record(s), %zu already present; store: %s\n", fresh.size(), skipped,
                store.root().string().c_str());
}

int run_grid_command(const std::string& op, const CLI::App* cmd, const GridFlags& flags,
                     const CommonFlags& common) {
    const json cfg_json = grid_config(cmd, flags);
    const auto cfg = lab::parse_sweep_config(cfg_json, op);
    lab::ResultStore store(lab::resolve_store_root(common.store));
    const std::size_t grid = lab::expand_grid(cfg).size();
    const auto fresh = lab::run_sweep(store, cfg, common.workers);
    std::printf("experiment %s, op %s, %zu grid point(s)\n",
                lab::experiment_id_for(cfg.raw).c_str(), op.c_str(), grid);
    print_records(fresh, grid - fresh.size(), store);
    return 0;
}

int run_verify(const std::string& level_name, unsigned workers, const std::string& json_out) {
    const auto level =
        level_name == "fast" ? lab::VerifyLevel::fast : lab::VerifyLevel::full;
    const auto results = lab::run_verification(level, workers);
    int failures = 0;
    for (const auto& r : results) {
        std::printf("[%s] check %2d: %s — %s\n", r.passed ? "PASS" : "FAIL", r.number,
                    r.name.c_str(), r.detail.c_str());
        if (!r.passed) ++failures;
    }
    std::printf("%d of %zu checks passed (%s level)\n",
                static_cast<int>(results.size()) - failures, results.size(),
                level_name.c_str());
    if (!json_out.empty()) {
        json arr = json::array();
        for (const auto& r : results)
            arr.push_back({{"number", r.number},
                           {"name", r.name},
                           {"passed", r.passed},
                           {"detail", r.detail},
                           {"level", level_name}});
        std::ofstream out(json_out);
        if (!out) {
            std::cerr << "error: cannot write " << json_out << "\n";
            return 2;
        }
        out << arr.dump(2) << "\n";
    }
    return failures == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for the disordered pinning model "
                 "with heavy-tailed environment"};
    // the physical field parameter is spelled --h, so help is --help only
    app.set_help_flag("--help", "print help and exit");
    app.set_version_flag("--version", pinlab::tool_version);
    app.require_subcommand(1);

    // verify ------------------------------------------------------------
    auto* verify_cmd = add_command(app, "verify", "run the built-in verification checks");
    std::string verify_level = "full";
    unsigned verify_workers = 1;
    std::string verify_json;
    verify_cmd->add_option("--level", verify_level, "fast | full (default full)")
        ->check(CLI::IsMember({"fast", "full"}));
    verify_cmd->add_option("--workers", verify_workers, "worker threads")
        ->check(CLI::Range(1u, 256u));
    verify_cmd->add_option("--json", verify_json, "also write results as JSON to this file");

    // single-estimator grid commands --------------------------------------
    struct GridCommand {
        const char* name;
        const char* description;
        std::vector<std::string> keys;
        CLI::App* cmd = nullptr;
        GridFlags flags;
        CommonFlags common;
    };
    std::vector<GridCommand> grid_commands{
        {"free-energy", "quenched free energy over a parameter grid",
         {"alpha", "gamma", "a", "beta", "h", "N"}, nullptr, {}, {}},
        {"frac-moment", "fractional moment of the partition function",
         {"alpha", "gamma", "a", "beta", "h", "N", "theta"}, nullptr, {}, {}},
        {"dual-peak", "probability that a block carries two coupled peaks",
         {"gamma", "a", "M", "eta", "theta", "A", "ell"}, nullptr, {}, {}},
        {"block-benefit", "penalized block partition mean",
         {"alpha", "gamma", "a", "beta", "M", "eta", "theta", "A", "ell"}, nullptr, {}, {}},
    };
    for (auto& g : grid_commands) {
        g.cmd = add_command(app, g.name, g.description);
        add_grid_options(g.cmd, g.flags, g.keys);
        add_common(g.cmd, g.common);
    }

    // marginal-scan -------------------------------------------------------
    auto* scan_cmd = add_command(
        app, "marginal-scan", "couple block length to beta and scan the penalization diagnostics");
    std::vector<double> scan_beta;
    double scan_alpha = 0.5, scan_gamma = 1.5, scan_a = 0.5, scan_A = 1.0, scan_M = 1.0,
           scan_eta = 0.5, scan_theta = 0.8;
    std::uint64_t scan_nmax = 1000000, scan_replicas = 100, scan_seed = 1, scan_cap = 256;
    CommonFlags scan_common;
    scan_cmd->add_option("--beta", scan_beta, "disorder strengths, in (0,1]")->required();
    scan_cmd->add_option("--alpha", scan_alpha, "renewal tail exponent (default 0.5)");
    scan_cmd->add_option("--gamma", scan_gamma, "environment tail index (default 1.5)");
    scan_cmd->add_option("--a", scan_a, "environment support edge (default 0.5)");
    scan_cmd->add_option("--A", scan_A, "block length amplitude (default 1)");
    scan_cmd->add_option("--M", scan_M, "peak threshold shift (default 1)");
    scan_cmd->add_option("--eta", scan_eta, "minimal window fraction (default 0.5)");
    scan_cmd->add_option("--theta", scan_theta, "fractional exponent (default 0.8)");
    scan_cmd->add_option("--n-max", scan_nmax, "truncation horizon (default 1e6)");
    scan_cmd->add_option("--replicas", scan_replicas, "replicas per diagnostic (default 100)");
    scan_cmd->add_option("--seed", scan_seed, "master seed (default 1)");
    scan_cmd->add_option("--ell-cap", scan_cap, "hard cap on the block length (default 256)");
    add_common(scan_cmd, scan_common);

    // sweep -----------------------------------------------------------------
    auto* sweep_cmd = add_command(app, "sweep", "run a parameter sweep from a config file");
    std::string sweep_config;
    CommonFlags sweep_common;
    sweep_cmd->add_option("--config", sweep_config, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    add_common(sweep_cmd, sweep_common);

    // plot-data ---------------------------------------------------------------
    auto* plot_cmd = add_command(app, "plot-data", "export stored results as tidy CSV");
    std::string plot_id, plot_op, plot_out, plot_store;
    plot_cmd->add_option("--id", plot_id, "experiment id")->required();
    plot_cmd->add_option("--op", plot_op, "restrict to one operation");
    plot_cmd->add_option("--out", plot_out, "output file (default: stdout)");
    plot_cmd->add_option("--store", plot_store, "store directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (verify_cmd->parsed()) return run_verify(verify_level, verify_workers, verify_json);

        for (auto& g : grid_commands)
            if (g.cmd->parsed()) return run_grid_command(g.name, g.cmd, g.flags, g.common);

        if (scan_cmd->parsed()) {
            json cfg_json{{"beta", scan_beta},   {"alpha", scan_alpha}, {"gamma", scan_gamma},
                          {"a", scan_a},         {"A", scan_A},         {"M", scan_M},
                          {"eta", scan_eta},     {"theta", scan_theta}, {"n_max", scan_nmax},
                          {"replicas", scan_replicas}, {"seed", scan_seed},
                          {"ell_cap", scan_cap}};
            const auto cfg = lab::parse_marginal_scan_config(cfg_json);
            lab::ResultStore store(lab::resolve_store_root(scan_common.store));
            const auto rows = lab::marginal_scan(store, cfg, scan_common.workers);
            std::printf("experiment %s: %zu beta value(s)\n",
                        lab::experiment_id_for(cfg.raw).c_str(), rows.size());
            std::printf("%10s %12s %8s %6s %14s %14s %14s\n", "beta", "h_beta", "ell", "cap",
                        "penalty-cost", "block-benefit", "frac-moment");
            for (const auto& row : rows)
                std::printf("%10.6g %12.6g %8llu %6s %14.6g %14.6g %14.6g\n", row.beta,
                            row.h_beta, static_cast<unsigned long long>(row.ell),
                            row.capped ? "yes" : "no", row.cost.estimate, row.benefit.estimate,
                            row.moment.estimate);
            std::printf("store: %s\n", store.root().string().c_str());
            return 0;
        }

        if (sweep_cmd->parsed()) {
            const auto cfg = lab::parse_sweep_config(load_config_file(sweep_config));
            lab::ResultStore store(lab::resolve_store_root(sweep_common.store));
            const std::size_t grid = lab::expand_grid(cfg).size();
            const auto fresh = lab::run_sweep(store, cfg, sweep_common.workers);
            std::printf("experiment %s, op %s, %zu grid point(s)\n",
                        lab::experiment_id_for(cfg.raw).c_str(), cfg.op.c_str(), grid);
            print_records(fresh, grid - fresh.size(), store);
            return 0;
        }

        if (plot_cmd->parsed()) {
            lab::ResultStore store(lab::resolve_store_root(plot_store));
            const auto records = store.load_results();
            bool known = false;
            for (const auto& r : records) known = known || r.experiment_id == plot_id;
            if (!known) {
                std::set<std::string> ids;
                for (const auto& r : records) ids.insert(r.experiment_id);
                std::cerr << "error: no results for experiment id '" << plot_id << "'";
                if (ids.empty()) {
                    std::cerr << "; the store at " << store.root().string() << " is empty\n";
                } else {
                    std::cerr << "; known ids:";
                    for (const auto& id : ids) std::cerr << ' ' << id;
                    std::cerr << '\n';
                }
                return 2;
            }
            const std::string csv = lab::export_csv(records, plot_id, plot_op);
            if (plot_out.empty()) {
                std::cout << csv;
            } else {
                std::ofstream out(plot_out);
                if (!out) {
                    std::cerr << "error: cannot write " << plot_out << "\n";
                    return 2;
                }
                out << csv;
            }
            return 0;
        }
    } catch (const lab::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2; // no subcommand matched (require_subcommand should prevent this)
}
