#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pinlab/version.hpp"

// Persistent result storage: an append-only JSON Lines store with one line per
// estimate, a manifest line per experiment, and wall-clock timings kept in a
// separate sidecar so the result file stays a pure function of
// (config, master seed, tool version).

namespace pinlab::lab {

using json = nlohmann::json;

/// Canonical serialization used for hashing and resume keys: nlohmann::json
/// objects keep their keys sorted, so dump() of the parsed value is stable
/// under re-serialization, whitespace, and key order in the source text.
inline std::string canonical_dump(const json& value) { return value.dump(); }

/// FNV-1a 64-bit over the canonical config dump, as 16 hex characters.
inline std::string experiment_id_for(const json& config) {
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    for (unsigned char c : canonical_dump(config)) {
        hash ^= c;
        hash *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return std::string(buf);
}

struct ExperimentManifest {
    std::string id;
    std::string created;  // ISO 8601 UTC; provenance only, never hashed
    std::string version;
    std::uint64_t master_seed = 0;
    json config;
};

struct ResultRecord {
    std::string experiment_id;
    std::string op;
    json point;              // parameter point (canonical key order)
    double estimate = 0.0;
    double stderror = 0.0;
    std::uint64_t n_samples = 0;
    std::uint64_t point_seed = 0; // per-point master; replicas use indices 0..n-1

    json to_json() const {
        return json{{"id", experiment_id}, {"op", op},  {"point", point},
                    {"estimate", estimate}, {"stderr", stderror},
                    {"n", n_samples},       {"seed", point_seed}};
    }
    static ResultRecord from_json(const json& j) {
        ResultRecord r;
        r.experiment_id = j.at("id").get<std::string>();
        r.op = j.at("op").get<std::string>();
        r.point = j.at("point");
        r.estimate = j.at("estimate").get<double>();
        r.stderror = j.at("stderr").get<double>();
        r.n_samples = j.at("n").get<std::uint64_t>();
        r.point_seed = j.at("seed").get<std::uint64_t>();
        if (r.stderror < 0.0) throw std::runtime_error("result record: stderr < 0");
        return r;
    }
};

/// Resume key: one record per (experiment, operation, parameter point).
inline std::string record_key(const std::string& experiment_id, const std::string& op,
                              const json& point) {
    return experiment_id + '\x1f' + op + '\x1f' + canonical_dump(point);
}

/// Store root resolution: explicit path, else PINLAB_STORE, else ./pinlab-store.
inline std::filesystem::path resolve_store_root(const std::string& explicit_path = "") {
    if (!explicit_path.empty()) return explicit_path;
    if (const char* env = std::getenv("PINLAB_STORE"); env != nullptr && *env != '\0')
        return env;
    return "pinlab-store";
}

class ResultStore {
  public:
    /// Opens (creating if needed) the store directory and verifies it is
    /// writable before any computation starts.
    explicit ResultStore(const std::filesystem::path& root) : root_(root) {
        std::error_code ec;
        std::filesystem::create_directories(root_, ec);
        if (ec) throw std::runtime_error("store: cannot create " + root_.string());
        std::ofstream probe(results_path(), std::ios::app);
        if (!probe) throw std::runtime_error("store: cannot write " + results_path().string());
    }

    std::filesystem::path root() const { return root_; }
    std::filesystem::path results_path() const { return root_ / "results.jsonl"; }
    std::filesystem::path manifests_path() const { return root_ / "manifests.jsonl"; }
    std::filesystem::path timings_path() const { return root_ / "timings.jsonl"; }

    void append(const ResultRecord& record) {
        append_line(results_path(), record.to_json().dump());
    }

    /// Records the manifest once; repeat registrations of the same id are no-ops.
    void register_experiment(const ExperimentManifest& manifest) {
        for (const auto& existing : load_manifests())
            if (existing.id == manifest.id) return;
        const json j{{"id", manifest.id},
                     {"created", manifest.created},
                     {"version", manifest.version},
                     {"seed", manifest.master_seed},
                     {"config", manifest.config}};
        append_line(manifests_path(), j.dump());
    }

    void append_timing(const std::string& experiment_id, const std::string& op,
                       const json& point, double milliseconds) {
        const json j{{"id", experiment_id}, {"op", op}, {"point", point},
                     {"ms", milliseconds}};
        append_line(timings_path(), j.dump());
    }

    std::vector<ResultRecord> load_results() const {
        std::vector<ResultRecord> out;
        for (const auto& line : read_lines(results_path()))
            out.push_back(ResultRecord::from_json(json::parse(line)));
        return out;
    }

    std::vector<ExperimentManifest> load_manifests() const {
        std::vector<ExperimentManifest> out;
        for (const auto& line : read_lines(manifests_path())) {
            const json j = json::parse(line);
            ExperimentManifest m;
            m.id = j.at("id").get<std::string>();
            m.created = j.at("created").get<std::string>();
            m.version = j.at("version").get<std::string>();
            m.master_seed = j.at("seed").get<std::uint64_t>();
            m.config = j.at("config");
            out.push_back(std::move(m));
        }
        return out;
    }

    std::set<std::string> existing_keys() const {
        std::set<std::string> keys;
        for (const auto& r : load_results())
            keys.insert(record_key(r.experiment_id, r.op, r.point));
        return keys;
    }

  private:
    static void append_line(const std::filesystem::path& path, const std::string& line) {
        std::ofstream out(path, std::ios::app);
        if (!out) throw std::runtime_error("store: cannot write " + path.string());
        out << line << '\n';
        if (!out) throw std::runtime_error("store: write failed for " + path.string());
    }

    static std::vector<std::string> read_lines(const std::filesystem::path& path) {
        std::vector<std::string> lines;
        std::ifstream in(path);
        if (!in) return lines; // absent file reads as empty store
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) lines.push_back(line);
        return lines;
    }

    std::filesystem::path root_;
};

inline std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace detail {

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_cell(const json& v) {
    if (v.is_string()) return csv_escape(v.get<std::string>());
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    if (v.is_number_float()) return csv_number(v.get<double>());
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return csv_escape(v.dump());
}

} // namespace detail

/// Column name of the estimate in exported tables, per operation.
inline std::string estimate_column_name(const std::string& op) {
    return op == "free-energy" ? "f_hat" : "estimate";
}

/// Tidy CSV for one experiment (optionally one operation): parameter columns
/// in sorted key order, then the estimate and its standard error. Numbers are
/// printed with 17 significant digits so a re-parse reproduces the stored
/// values exactly.
inline std::string export_csv(const std::vector<ResultRecord>& records,
                              const std::string& experiment_id,
                              const std::string& op_filter = "") {
    std::vector<const ResultRecord*> selected;
    for (const auto& r : records)
        if (r.experiment_id == experiment_id && (op_filter.empty() || r.op == op_filter))
            selected.push_back(&r);

    std::set<std::string> param_keys;
    for (const auto* r : selected)
        for (const auto& [key, value] : r->point.items()) param_keys.insert(key);

    std::string value_col = "estimate";
    if (!selected.empty())
        value_col = estimate_column_name(op_filter.empty() ? selected.front()->op : op_filter);

    std::ostringstream out;
    bool first = true;
    for (const auto& key : param_keys) {
        if (!first) out << ',';
        out << detail::csv_escape(key);
        first = false;
    }
    if (!first) out << ',';
    out << value_col << ",stderr\n";

    for (const auto* r : selected) {
        for (const auto& key : param_keys) {
            if (r->point.contains(key)) out << detail::csv_cell(r->point.at(key));
            out << ',';
        }
        out << detail::csv_number(r->estimate) << ',' << detail::csv_number(r->stderror)
            << '\n';
    }
    return out.str();
}

} // namespace pinlab::lab
