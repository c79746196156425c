#include "qkd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "qkd/analysis.hpp"
#include "qkd/state_io.hpp"

namespace qkd {

namespace {

constexpr int kMaxDimension = 64;

struct SessionResult {
    std::vector<RoundTranscript> transcripts;
    bool detected = false;
};

ProtocolConfig make_config(const ExperimentSpec& spec, int d) {
    ProtocolConfig cfg;
    cfg.d = d;
    cfg.n_rounds = spec.n_rounds;
    cfg.eve = spec.eve ? EveStrategy::shift_intercept : EveStrategy::absent;
    cfg.seed = spec.seed;
    switch (spec.protection) {
    case ProtectionKind::none:
        cfg.protection = Protection::none();
        break;
    case ProtectionKind::hadamard:
        cfg.protection = Protection::hadamard();
        break;
    case ProtectionKind::custom:
        cfg.protection = Protection::custom(*spec.custom_unitary);
        break;
    }
    return cfg;
}

SessionResult run_session(const ExperimentSpec& spec, const ProtocolConfig& base, int session_index) {
    CounterRng stream = CounterRng(spec.seed).split(static_cast<std::uint64_t>(base.d)).split(
        static_cast<std::uint64_t>(session_index));
    CounterRng key_rng = stream.split(0);
    CounterRng measure_rng = stream.split(1);
    CounterRng sample_rng = stream.split(2);

    ProtocolConfig cfg = base;
    cfg.snapshot_states = spec.snapshots && session_index == 0;

    SessionResult out;
    const std::vector<int> key = random_key(cfg.d, cfg.n_rounds, key_rng);
    out.transcripts = run_protocol(cfg, key, measure_rng);

    // Sample from rounds >= 2 when they exist; the first round is immune.
    std::span<RoundTranscript> pool(out.transcripts);
    if (pool.size() >= 2) {
        pool = pool.subspan(1);
    }
    out.detected = compare_sample(pool, spec.sample_m, sample_rng).detected;
    return out;
}

std::vector<SessionResult> run_sessions(const ExperimentSpec& spec, const ProtocolConfig& cfg, int workers) {
    std::vector<SessionResult> results(static_cast<std::size_t>(spec.n_sessions));
    const int n_workers = std::max(1, std::min(workers, spec.n_sessions));
    if (n_workers == 1) {
        for (int s = 0; s < spec.n_sessions; ++s) {
            results[static_cast<std::size_t>(s)] = run_session(spec, cfg, s);
        }
        return results;
    }

    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (int s = next++; s < spec.n_sessions; s = next++) {
            try {
                results[static_cast<std::size_t>(s)] = run_session(spec, cfg, s);
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next = spec.n_sessions;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    return results;
}

DimensionRecord aggregate(const ExperimentSpec& spec, const ProtocolConfig& cfg, std::vector<SessionResult>& results) {
    const Dimension d(cfg.d);
    DimensionRecord rec;
    rec.d = cfg.d;
    rec.n_sessions = spec.n_sessions;
    rec.seed = spec.seed;

    std::vector<std::vector<RoundTranscript>> sessions;
    sessions.reserve(results.size());
    long long detected = 0;
    for (auto& r : results) {
        detected += r.detected ? 1 : 0;
        sessions.push_back(std::move(r.transcripts));
    }
    const QberReport q = qber(std::span<const std::vector<RoundTranscript>>(sessions), d);
    rec.qber_round1 = q.per_round_error.empty() ? 0.0 : q.per_round_error.front();
    rec.qber_from_round2 = q.aggregate_from_round2;
    rec.theoretical_qber = q.theoretical;

    const CMatrix<double> g = cfg.protection_matrix();
    rec.protection_flat = cfg.protection.active() && is_flat(g, 1e-8);

    if (spec.eve) {
        std::vector<std::pair<int, int>> pairs;
        for (const auto& s : sessions) {
            for (const auto& t : s) {
                if (t.eve_measured) {
                    pairs.emplace_back(t.q_sent, *t.eve_measured);
                }
            }
        }
        rec.eve_info_bits = pairs.empty() ? 0.0 : empirical_mutual_information(pairs, d);
        rec.key_ambiguity = key_ambiguity(eve_record(sessions.front()), d, spec.n_rounds);
    }

    rec.detection_prob_observed = static_cast<double>(detected) / spec.n_sessions;

    // Per-dit error the attack is expected to cause from round 2 on.
    double expected_error = 0;
    if (spec.eve && cfg.protection.active() && spec.n_rounds >= 2) {
        expected_error = rec.protection_flat ? q.theoretical : round2_error_rate(d, g);
    }
    if (expected_error > 0) {
        rec.detection_prob_theoretical =
            rec.protection_flat ? detection_probability(d, spec.sample_m)
                                : 1.0 - std::pow(1.0 - expected_error, spec.sample_m);
    }
    if (q.samples_from_round2 > 0) {
        rec.qber_from_round2_tolerance = 3.0 * binomial_sigma(expected_error, q.samples_from_round2);
    }
    rec.detection_prob_tolerance = 3.0 * binomial_sigma(rec.detection_prob_theoretical, spec.n_sessions);

    if (spec.snapshots) {
        // Only session 0 records snapshots; keep its transcripts for the dump.
        results.front().transcripts = std::move(sessions.front());
    }
    return rec;
}

std::string csv_number(double v) { return nlohmann::json(v).dump(); }

} // namespace

void ExperimentSpec::validate() const {
    if (d_values.empty()) {
        throw ConfigError("d_values: at least one dimension is required");
    }
    for (int d : d_values) {
        if (d < 2 || d > kMaxDimension) {
            throw ConfigError("d: " + std::to_string(d) + " is outside [2, " + std::to_string(kMaxDimension) + "]");
        }
    }
    if (n_rounds < 1) {
        throw ConfigError("rounds: must be >= 1");
    }
    if (n_sessions < 1) {
        throw ConfigError("sessions: must be >= 1");
    }
    const int pool = n_rounds >= 2 ? n_rounds - 1 : 1;
    if (sample_m < 1 || sample_m > pool) {
        throw ConfigError("sample: must be in [1, " + std::to_string(pool) + "] for " + std::to_string(n_rounds) +
                          " rounds");
    }
    if (protection == ProtectionKind::custom) {
        if (!custom_unitary) {
            throw ConfigError("unitary-file: custom protection requires a unitary matrix file");
        }
        for (int d : d_values) {
            if (custom_unitary->rows() != d) {
                throw ConfigError("unitary-file: matrix is " + std::to_string(custom_unitary->rows()) + "x" +
                                  std::to_string(custom_unitary->cols()) + " but d = " + std::to_string(d));
            }
        }
    }
    if (workers < 0) {
        throw ConfigError("workers: must be >= 0");
    }
}

CMatrix<double> load_unitary_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("unitary-file: cannot read '" + path.string() + "'");
    }
    CMatrix<double> m;
    try {
        m = matrix_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("unitary-file: '" + path.string() + "' is not valid JSON: " + e.what());
    } catch (const DomainError& e) {
        throw ConfigError("unitary-file: '" + path.string() + "': " + e.what());
    }
    const double defect = unitarity_defect(m);
    if (!(defect <= ProtocolConfig::kCustomUnitaryTolerance)) {
        throw ConfigError("unitary-file: matrix in '" + path.string() + "' is not unitary (max |U^dag U - 1| = " +
                          std::to_string(defect) + ")");
    }
    return m;
}

ExperimentSpec parse_spec(const std::vector<std::string>& args) {
    ExperimentSpec spec;
    CLI::App app{"Seeded Monte-Carlo runs of the qudit Bell-state key distribution scheme", "qkdsim"};
    app.set_config("--config", "", "TOML/INI file with the same option names");

    int d = 3;
    std::vector<int> sweep;
    std::string protect = "none";
    std::string format = "json";
    std::string unitary_file;
    std::string output;
    std::string snapshot_output = spec.snapshot_output.string();

    auto* d_opt = app.add_option("--d", d, "Qudit dimension (default 3)");
    auto* sweep_opt = app.add_option("--sweep", sweep, "Comma-separated list of dimensions")->delimiter(',');
    d_opt->excludes(sweep_opt);
    app.add_option("--rounds", spec.n_rounds, "Dits per session (default 100)");
    app.add_option("--sessions", spec.n_sessions, "Independent sessions per dimension (default 100)");
    app.add_flag("--eve", spec.eve, "Enable the shift-intercept eavesdropper");
    app.add_option("--protect", protect, "Protection: none | hadamard | custom")
        ->check(CLI::IsMember({"none", "hadamard", "custom"}));
    app.add_option("--unitary-file", unitary_file, "JSON matrix of [re, im] pairs for --protect custom");
    app.add_option("--sample", spec.sample_m, "Rounds compared publicly per session (default 1)");
    app.add_option("--seed", spec.seed, "Master seed (default 0)");
    app.add_option("--format", format, "Report format: json | csv")->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--out", output, "Report path (default stdout)");
    app.add_flag("--snapshots", spec.snapshots, "Dump labeled states of session 0 per dimension");
    app.add_option("--snapshot-out", snapshot_output, "Snapshot dump path (default snapshots.json)");
    app.add_option("--workers", spec.workers, "Worker threads (default: QKD_WORKERS or hardware)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested{app.help()};
    } catch (const CLI::ParseError& e) {
        throw ConfigError(std::string(e.get_name()) + ": " + e.what());
    }

    if (!sweep.empty()) {
        spec.mode = ExperimentSpec::Mode::sweep;
        spec.d_values = sweep;
    } else {
        spec.d_values = {d};
    }
    spec.protection = protect == "hadamard" ? ProtectionKind::hadamard
                      : protect == "custom" ? ProtectionKind::custom
                                            : ProtectionKind::none;
    spec.format = format == "csv" ? OutputFormat::csv : OutputFormat::json;
    if (!output.empty()) {
        spec.output = output;
    }
    spec.snapshot_output = snapshot_output;
    if (!unitary_file.empty()) {
        if (spec.protection != ProtectionKind::custom) {
            throw ConfigError("unitary-file: only valid with --protect custom");
        }
        spec.unitary_file = unitary_file;
        spec.custom_unitary = load_unitary_file(spec.unitary_file);
    }
    spec.validate();
    return spec;
}

int resolve_workers(int requested) {
    if (requested > 0) {
        return requested;
    }
    if (const char* env = std::getenv("QKD_WORKERS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) {
                return v;
            }
        } catch (const std::exception&) {
            throw ConfigError("QKD_WORKERS: '" + std::string(env) + "' is not a positive integer");
        }
        throw ConfigError("QKD_WORKERS: '" + std::string(env) + "' is not a positive integer");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

ExperimentReport execute(const ExperimentSpec& spec, int workers) {
    spec.validate();
    ExperimentReport report;
    for (int d : spec.d_values) {
        const ProtocolConfig cfg = make_config(spec, d);
        try {
            cfg.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("d=") + std::to_string(d) + ": " + e.what());
        }
        std::vector<SessionResult> results = run_sessions(spec, cfg, workers);
        report.records.push_back(aggregate(spec, cfg, results));
        if (spec.snapshots) {
            report.snapshots.push_back({d, std::move(results.front().transcripts)});
        }
    }
    return report;
}

nlohmann::ordered_json report_to_json(const ExperimentReport& report, const ExperimentSpec& spec) {
    nlohmann::ordered_json j;
    j["spec"] = {
        {"mode", spec.mode == ExperimentSpec::Mode::sweep ? "sweep" : "single"},
        {"d_values", spec.d_values},
        {"n_rounds", spec.n_rounds},
        {"n_sessions", spec.n_sessions},
        {"eve", spec.eve},
        {"protection", to_string(spec.protection)},
        {"sample_m", spec.sample_m},
        {"seed", spec.seed},
    };
    nlohmann::ordered_json records = nlohmann::ordered_json::array();
    for (const auto& r : report.records) {
        records.push_back({
            {"d", r.d},
            {"qber_round1", r.qber_round1},
            {"qber_from_round2", r.qber_from_round2},
            {"theoretical_qber", r.theoretical_qber},
            {"eve_info_bits", r.eve_info_bits},
            {"key_ambiguity", r.key_ambiguity},
            {"detection_prob_observed", r.detection_prob_observed},
            {"detection_prob_theoretical", r.detection_prob_theoretical},
            {"n_sessions", r.n_sessions},
            {"seed", r.seed},
            {"protection_flat", r.protection_flat},
            {"tolerances",
             {{"qber_from_round2", r.qber_from_round2_tolerance}, {"detection_prob", r.detection_prob_tolerance}}},
        });
    }
    j["records"] = std::move(records);
    return j;
}

std::string report_to_csv(const ExperimentReport& report) {
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const auto& r : report.records) {
        out << r.d << ',' << csv_number(r.qber_round1) << ',' << csv_number(r.qber_from_round2) << ','
            << csv_number(r.theoretical_qber) << ',' << csv_number(r.eve_info_bits) << ',' << r.key_ambiguity << ','
            << csv_number(r.detection_prob_observed) << ',' << csv_number(r.detection_prob_theoretical) << ','
            << r.n_sessions << ',' << r.seed << '\n';
    }
    return out.str();
}

nlohmann::ordered_json snapshots_to_json(const ExperimentReport& report) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& dump : report.snapshots) {
        nlohmann::ordered_json rounds = nlohmann::ordered_json::array();
        for (const auto& t : dump.rounds) {
            nlohmann::ordered_json states = nlohmann::ordered_json::array();
            for (const auto& s : t.snapshots) {
                states.push_back({{"label", s.label}, {"n_wires", s.state.wires()}, {"amplitudes", to_json(s.state)}});
            }
            nlohmann::ordered_json round = {{"round", t.round}, {"q_sent", t.q_sent}, {"bob_measured", t.bob_measured}};
            round["eve_measured"] = t.eve_measured ? nlohmann::ordered_json(*t.eve_measured) : nlohmann::ordered_json();
            round["states"] = std::move(states);
            rounds.push_back(std::move(round));
        }
        out.push_back({{"d", dump.d}, {"rounds", std::move(rounds)}});
    }
    return out;
}

void emit(const ExperimentReport& report, const ExperimentSpec& spec, std::ostream& out) {
    const std::string body =
        spec.format == OutputFormat::csv ? report_to_csv(report) : report_to_json(report, spec).dump(2) + "\n";
    if (spec.output) {
        std::ofstream file(*spec.output, std::ios::binary | std::ios::trunc);
        if (!file || !(file << body) || !file.flush()) {
            throw OutputError("cannot write report to '" + spec.output->string() + "'");
        }
    } else {
        out << body;
        out.flush();
    }
    if (spec.snapshots) {
        std::ofstream file(spec.snapshot_output, std::ios::binary | std::ios::trunc);
        if (!file || !(file << snapshots_to_json(report).dump(1) << '\n') || !file.flush()) {
            throw OutputError("cannot write snapshots to '" + spec.snapshot_output.string() + "'");
        }
    }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    ExperimentSpec spec;
    try {
        spec = parse_spec(args);
    } catch (const HelpRequested& help) {
        out << help.text;
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    }
    ExperimentReport report;
    try {
        report = execute(spec);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    try {
        emit(report, spec, out);
    } catch (const OutputError& e) {
        err << "io error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}

} // namespace qkd
