#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qkd/protocol.hpp"

namespace qkd {

enum class OutputFormat { json, csv };

struct ExperimentSpec {
    enum class Mode { single, sweep };

    Mode mode = Mode::single;
    std::vector<int> d_values{3};
    int n_rounds = 100;
    int n_sessions = 100;
    bool eve = false;
    ProtectionKind protection = ProtectionKind::none;
    std::filesystem::path unitary_file;
    /// Loaded from unitary_file for custom protection.
    std::optional<CMatrix<double>> custom_unitary;
    int sample_m = 1;
    std::uint64_t seed = 0;
    OutputFormat format = OutputFormat::json;
    std::optional<std::filesystem::path> output;
    bool snapshots = false;
    std::filesystem::path snapshot_output = "snapshots.json";
    /// 0 = hardware concurrency (or QKD_WORKERS).
    int workers = 0;

    /// Throws ConfigError naming the field.
    void validate() const;
};

/// `--help` was requested; carries the usage text.
struct HelpRequested {
    std::string text;
};

/// Parses command-line arguments (without the program name). Throws
/// ConfigError for unknown flags, bad values, unreadable or non-unitary
/// custom matrices, and HelpRequested for --help.
ExperimentSpec parse_spec(const std::vector<std::string>& args);

/// Reads a JSON matrix of [re, im] pairs and checks unitarity (tol 1e-8).
/// Throws ConfigError.
CMatrix<double> load_unitary_file(const std::filesystem::path& path);

struct DimensionRecord {
    int d = 0;
    double qber_round1 = 0;
    double qber_from_round2 = 0;
    double theoretical_qber = 0;
    double eve_info_bits = 0;
    int key_ambiguity = 0;
    double detection_prob_observed = 0;
    double detection_prob_theoretical = 0;
    int n_sessions = 0;
    std::uint64_t seed = 0;

    // Self-documenting tolerances (3 binomial standard errors).
    double qber_from_round2_tolerance = 0;
    double detection_prob_tolerance = 0;
    bool protection_flat = false;
};

struct SnapshotDump {
    int d = 0;
    std::vector<RoundTranscript> rounds;
};

struct ExperimentReport {
    std::vector<DimensionRecord> records;
    std::vector<SnapshotDump> snapshots;
};

/// Worker count: explicit value if > 0, else QKD_WORKERS, else hardware
/// concurrency.
int resolve_workers(int requested);

/// Runs n_sessions independent sessions per d. Session s of dimension d uses
/// the stream CounterRng(seed).split(d).split(s), so the report does not
/// depend on `workers`.
ExperimentReport execute(const ExperimentSpec& spec, int workers);

inline ExperimentReport execute(const ExperimentSpec& spec) { return execute(spec, resolve_workers(spec.workers)); }

inline constexpr const char* kCsvHeader =
    "d,qber_round1,qber_from_round2,theoretical_qber,eve_info_bits,key_ambiguity,"
    "detection_prob_observed,detection_prob_theoretical,n_sessions,seed";

nlohmann::ordered_json report_to_json(const ExperimentReport& report, const ExperimentSpec& spec);
std::string report_to_csv(const ExperimentReport& report);
nlohmann::ordered_json snapshots_to_json(const ExperimentReport& report);

/// I/O failure while writing a report.
class OutputError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Writes the report to spec.output (or `out` when unset) and the snapshot
/// dump when enabled. Throws OutputError.
void emit(const ExperimentReport& report, const ExperimentSpec& spec, std::ostream& out);

/// Full CLI: parse, execute, emit. Returns 0 on success, 2 for
/// configuration errors, 3 for I/O errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace qkd
