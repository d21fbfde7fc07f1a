#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fracito/path_space.hpp"

namespace fracito {

// Environment variable naming the default output directory of the CLI.
inline constexpr const char* kOutDirEnv = "FRACITO_OUT_DIR";

std::string version();

struct ExperimentConfig {
    std::string experiment;
    std::optional<double> hurst;  // experiment default when empty
    double horizon = 1.0;
    std::vector<std::size_t> grid;  // experiment default when empty
    std::optional<std::size_t> paths;
    std::uint64_t seed = 1;
    std::string functional;  // experiment default when empty
    std::string driver = "zero";  // BSDE driver: zero, constant:<c>, linear:<a>
    std::optional<std::size_t> iterations;
    std::optional<double> beta;
    double ridge = 0.0;
    std::size_t workers = 0;
    std::string out;
    std::string format = "json";
};

// Parses a JSON config object. Throws std::invalid_argument naming the
// offending field.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);

enum class Verdict { pass, fail, info };
std::string to_string(Verdict v);

struct ReportRow {
    std::string experiment;
    std::size_t n = 0;
    std::size_t M = 0;
    double H = 0.0;
    std::string statistic;
    double value = 0.0;
    double se = 0.0;         // NaN when not a statistical quantity
    double threshold = 0.0;  // NaN when no verdict applies
    Verdict verdict = Verdict::info;
    double target = 0.0;  // NaN when there is no reference value
};

struct ErrorRecord {
    std::string kind;  // "numerical", "invalid_argument", ...
    std::string message;
};

struct ExperimentReport {
    ExperimentConfig config;  // with defaults resolved
    std::string version;
    double wall_clock_seconds = 0.0;
    std::vector<ReportRow> rows;
    std::vector<std::string> notes;
    std::optional<ErrorRecord> error;

    bool passed() const;
    bool has_failure() const;
};

struct CatalogEntry {
    std::string id;
    std::string anchor;
    std::string description;
    bool statistical = true;
    std::string default_functional;
};

std::vector<CatalogEntry> list_experiments();
const CatalogEntry& catalog_entry(const std::string& id);

// Functionals addressable by id from configs and the CLI.
std::vector<std::string> functional_ids();
FunctionalPtr make_functional(const std::string& id);

// Dispatches to the experiment. Unknown ids and invalid configs throw
// std::invalid_argument; numerical failures inside the experiment are
// caught and stored in report.error.
ExperimentReport run(const ExperimentConfig& config);

std::string to_json(const ExperimentReport& report, int indent = 2);
ExperimentReport report_from_json(const std::string& text);
std::string to_csv(const ExperimentReport& report);
std::string summarize(const ExperimentReport& report);

// Statistics part of the report only (rows and notes), serialized; equal
// strings mean identical statistics.
std::string statistics_fingerprint(const ExperimentReport& report);

}  // namespace fracito
