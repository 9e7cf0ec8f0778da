#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metastab/similarity.hpp"
#include "metastab/solver.hpp"

namespace metastab {

/// Difference of two Gaussians, negative on the left and positive on the
/// right, scaled so that pq_functionals returns (p, q), then amplitudes
/// jittered by a seeded factor in [1 - jitter, 1 + jitter].
struct BumpSpec {
    double p = 1.0;
    double q = 0.5;
    double sigma = 0.4;
    double center_minus = -1.0;
    double center_plus = 1.0;
    double jitter = 0.1;
};
Field bump_data(const Grid& grid, const BumpSpec& spec, std::uint64_t seed);

/// Two or three positive Gaussians with seeded centers, widths and weights.
Field positive_bump_data(const Grid& grid, std::uint64_t seed);

struct ExperimentConfig {
    std::string name;
    std::vector<double> mu_list;  // empty: study default
    std::optional<double> mass;
    std::optional<double> p;
    std::optional<double> q;
    std::optional<double> m;  // study default: 3 for decay-rates, else 2
    std::optional<std::size_t> grid_n;
    std::optional<double> grid_l;
    SolverConfig solver;
    std::filesystem::path output_dir = "results";
    std::uint64_t seed = 1;
    /// Study knobs not covered above (sigma, center_minus, delta, pq_mode, ...).
    std::map<std::string, std::string> extra;
};

struct ResultRow {
    std::string experiment;
    double mu;
    double tau;
    std::string metric;
    double value;
    std::string config_hash;
};

struct StudyResult {
    std::string experiment;
    std::string config_hash;
    std::vector<ResultRow> rows;
    std::map<std::string, std::string> provenance;  // grid, tolerances, ...
    std::vector<std::string> failures;
    bool numerical_failure = false;
};

std::vector<std::string> registered_studies();
std::string study_summary(const std::string& name);

/// Throws ConfigError for unknown names, mu <= 0 or m <= 3/2.
void validate(const ExperimentConfig& config);

/// Canonical "key=value" lines, sorted by key.
std::string canonical_config(const ExperimentConfig& config);
/// FNV-1a 64 of canonical_config, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

/// Applies one "key=value" setting; throws ConfigError for bad values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
/// Flat key=value file, '#' starts a comment.
void load_config_file(ExperimentConfig& config, const std::filesystem::path& path);

StudyResult run(const ExperimentConfig& config);

/// 17 significant digits: re-parses to the identical double.
std::string format_value(double v);

/// Writes <dir>/<experiment>.csv with all rows, one <experiment>.<metric>.csv
/// per metric, and <experiment>.provenance.json. Throws std::runtime_error
/// naming the path on I/O failure.
void emit_csv(const StudyResult& result, const std::filesystem::path& dir);

/// Reads a CSV written by emit_csv; config_hash is left empty.
std::vector<ResultRow> parse_csv(const std::filesystem::path& path);

}  // namespace metastab
