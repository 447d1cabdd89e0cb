#pragma once

#include "qlb/errors.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qlb {

inline constexpr int kSchemaVersion = 1;

enum class Task {
    verify_transform,
    check_hypotheses,
    solve_radial,
    sweep_family,
    sandwich,
    ball_solve,
    full_pipeline
};
const char* to_string(Task t);

struct ConfigIssue {
    std::string path;      // JSON pointer of the offending field, "" for the root
    std::string message;
};

/// Every problem found while validating a config, reported together.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<ConfigIssue> issues);
    const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

private:
    std::vector<ConfigIssue> issues_;
};

struct DecaySpec {
    double c0{1.0};
    double c1{0.0};
    double decay{0.0};
};

struct NonlinearitySpec {
    std::string kind;                     // power | power_log | tabulated
    double lambda{1.0};
    double q{1.0};
    std::vector<double> xs, ys;           // tabulated samples
    std::string csv_path;                 // tabulated samples from file (resolved)
    std::optional<double> delta;
};

struct AngularTerm {
    DecaySpec amplitude;
    int frequency{1};
};

struct PotentialSpec {
    std::string kind;                     // radial_profile | radial_times_angular | general_sampled
    DecaySpec base;
    std::vector<AngularTerm> terms;       // one term for radial_times_angular
    int angular_samples{256};
};

struct RunConfig {
    int schema_version{kSchemaVersion};
    Task task{Task::full_pipeline};
    double p{2}, gamma{1};
    int dim{1};
    std::optional<NonlinearitySpec> nonlinearity;
    std::optional<PotentialSpec> potential;

    double tol{1e-8};
    double r_max{100};
    std::size_t nodes{4097};
    double grading{3.0};
    std::optional<double> alpha;
    std::vector<double> alphas;
    double epsilon{0.5};
    std::optional<double> beta;
    std::optional<double> hbar_radius;    // budget ∫_0^R ℋ instead of H̄
    double mesh_h{0.1};
    std::vector<int> ball_radii;
    std::vector<std::pair<double, double>> probes;
    double limit_tol{1e-3};
    double transform_accuracy{1e-10};
    double grid_lo{1e-6}, grid_hi{1e8};
    std::size_t grid_points{241};
    double residual_lo{0.1};
    double threshold_r_max{0};

    std::filesystem::path out_dir{"out"};
    nlohmann::json raw;                   // the validated input, echoed in the report
};

/// Parses, defaults and range-checks a config. Unknown keys, missing
/// task-required fields and out-of-range values are all collected into one
/// ConfigError; malformed JSON is reported at the root path. Relative CSV
/// paths are resolved against `base_dir`.
RunConfig validate_config(const std::string& raw, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

struct EmittedFile {
    std::string name;     // relative to the output directory
    std::string sha256;
    std::uintmax_t bytes{0};
};

struct ErrorRecord {
    std::string stage;
    std::string module;
    std::string type;
    std::string message;
};

enum class RunStatus { ok, hypothesis_blocked, compute_error };

struct RunReport {
    RunStatus status{RunStatus::ok};
    bool theorem_covered{true};
    bool override_used{false};
    nlohmann::json body;                  // the JSON report without the file list
    std::vector<EmittedFile> files;
    std::vector<ErrorRecord> errors;
    std::filesystem::path report_path;

    int exit_code() const noexcept;
};

struct RunOptions {
    bool override_hypotheses{false};
    unsigned threads{1};
    bool record_timing{true};
};

/// Executes the task graph of `config`, writes CSV profiles, gnuplot data and
/// report.json into config.out_dir. Compute errors are recorded, never thrown;
/// the report is written in every case.
RunReport run(const RunConfig& config, const RunOptions& options = {});

/// Report for a run that never reached the task graph (unreadable or invalid
/// config); written to out_dir/report.json.
RunReport write_failure_report(const std::filesystem::path& out_dir, const std::exception& error);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Locale-independent formatting with 17 significant digits.
std::string format_number(double v);

}  // namespace qlb
