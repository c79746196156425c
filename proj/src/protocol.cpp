#include "qkd/protocol.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

namespace qkd {

struct Session::Gates {
    Gate<double> alice_protect;  // G on a
    Gate<double> bob_protect;    // G* on b
    Gate<double> right_c;
    Gate<double> left_c;
};

namespace {

std::shared_ptr<const Session::Gates> build_gates(const ProtocolConfig& config) {
    const Dimension d(config.d);
    const Gate<double> g(d, 1, config.protection_matrix(), "G", ProtocolConfig::kCustomUnitaryTolerance);
    return std::make_shared<const Session::Gates>(Session::Gates{
        g,
        g.conjugate(),
        controlled_gate(shift_gate<double>(d, ShiftDirection::right)),
        controlled_gate(shift_gate<double>(d, ShiftDirection::left)),
    });
}

} // namespace

void ProtocolConfig::validate() const {
    if (d < 2) {
        throw ConfigError("d must be >= 2, got " + std::to_string(d));
    }
    if (n_rounds < 1) {
        throw ConfigError("n_rounds must be >= 1, got " + std::to_string(n_rounds));
    }
    if (eve_initial < 0 || eve_initial >= d) {
        throw ConfigError("eve_initial must be in [0, d), got " + std::to_string(eve_initial));
    }
    if (protection.kind == ProtectionKind::custom) {
        const auto& u = protection.unitary;
        if (u.rows() != d || u.cols() != d) {
            throw ConfigError("protection: custom matrix must be " + std::to_string(d) + "x" + std::to_string(d) +
                              ", got " + std::to_string(u.rows()) + "x" + std::to_string(u.cols()));
        }
        const double defect = unitarity_defect(u);
        if (!(defect <= kCustomUnitaryTolerance)) {
            throw ConfigError("protection: custom matrix is not unitary (max |U^dag U - 1| = " +
                              std::to_string(defect) + ")");
        }
    }
}

CMatrix<double> ProtocolConfig::protection_matrix() const {
    switch (protection.kind) {
    case ProtectionKind::none:
        return CMatrix<double>::Identity(d, d);
    case ProtectionKind::hadamard:
        return fourier_gate<double>(Dimension(d)).matrix();
    case ProtectionKind::custom:
        return protection.unitary;
    }
    throw InternalError("unknown protection kind");
}

Session::Session(std::shared_ptr<const ProtocolConfig> config, std::shared_ptr<const Gates> gates, State state)
    : config_(std::move(config)), gates_(std::move(gates)), state_(std::move(state)) {}

void Session::snapshot(const char* label) {
    if (config_->snapshot_states) {
        snapshots_.push_back({label, state_});
    }
}

Session init_session(const ProtocolConfig& config) {
    config.validate();
    const Dimension d(config.d);
    State initial = tensor(bell_state<double>(d, 0, 0), basis_state<double>(d, {config.eve_initial}));
    return Session(std::make_shared<const ProtocolConfig>(config), build_gates(config), std::move(initial));
}

Session alice_send(Session s, int q) {
    const ProtocolConfig& cfg = s.config();
    if (s.stage_ != RoundStage::idle) {
        throw UsageError("alice_send: a key dit is already in flight");
    }
    if (q < 0 || q >= cfg.d) {
        throw DomainError("alice_send: dit " + std::to_string(q) + " is outside [0, " + std::to_string(cfg.d) + ")");
    }
    s.snapshots_.clear();
    const bool first = s.round_ == 0;
    const bool protect = cfg.protection.active();

    if (protect) {
        if (!first) {
            s.snapshot("Chi");
        }
        s.state_ = apply_gate(s.state_, s.gates_->alice_protect, {kAliceWire});
        s.state_ = apply_gate(s.state_, s.gates_->bob_protect, {kBobWire});
        if (!first) {
            s.snapshot("ChiTilde");
        }
    }
    s.state_ = adjoin_wire(s.state_, kKeyWire, q);
    s.snapshot(first ? "Phi0" : (protect ? "PsiHat0" : "Psi0"));
    s.state_ = apply_gate(s.state_, s.gates_->right_c, {kAliceWire, kKeyWire});
    s.snapshot(first ? "Phi1" : (protect ? "PsiHat1" : "Psi1"));

    s.q_sent_ = q;
    s.stage_ = RoundStage::sent;
    return s;
}

EveStep eve_intervene(Session s, CounterRng& rng) {
    const ProtocolConfig& cfg = s.config();
    if (cfg.eve != EveStrategy::shift_intercept) {
        throw UsageError("eve_intervene: no eavesdropper configured");
    }
    if (s.stage_ != RoundStage::sent) {
        throw UsageError("eve_intervene: must be called between alice_send and bob_receive");
    }
    const std::vector<int> key_to_eve{kKeyWire, kEveWireInFlight};
    std::optional<int> measured;

    if (s.eve_phase_ == EvePhase::first_round) {
        s.state_ = apply_gate(s.state_, s.gates_->right_c, key_to_eve);
        s.snapshot("Phi2");
        s.eve_phase_ = EvePhase::steady;
    } else {
        const bool protect = cfg.protection.active();
        s.state_ = apply_gate(s.state_, s.gates_->left_c, key_to_eve);
        s.snapshot(protect ? "eve_disentangled" : "Psi2");
        MeasurementOutcome<double> outcome = measure(s.state_, kEveWireInFlight, rng);
        s.state_ = std::move(outcome.post_state);
        measured = outcome.value;
        s.snapshot(protect ? "Phi3" : "eve_measured");
        s.state_ = apply_gate(s.state_, s.gates_->right_c, key_to_eve);
        s.snapshot("eve_restored");
    }
    s.stage_ = RoundStage::intercepted;
    return {std::move(s), measured};
}

BobStep bob_receive(Session s, CounterRng& rng) {
    const ProtocolConfig& cfg = s.config();
    if (s.stage_ == RoundStage::idle) {
        throw UsageError("bob_receive: no key dit in flight");
    }
    s.state_ = apply_gate(s.state_, s.gates_->left_c, {kBobWire, kKeyWire});
    const bool first = s.round_ == 0;
    const bool eve_later_round = s.stage_ == RoundStage::intercepted && !first;
    if (first) {
        s.snapshot("Phi3");
    } else if (eve_later_round && cfg.protection.active()) {
        s.snapshot("Phi4");
    } else {
        s.snapshot("bob_decoded");
    }
    MeasurementOutcome<double> outcome = measure(s.state_, kKeyWire, rng);
    s.state_ = discard_wire(outcome.post_state, kKeyWire);
    s.stage_ = RoundStage::idle;
    ++s.round_;
    return {std::move(s), outcome.value};
}

std::vector<int> random_key(int d, int n, CounterRng& rng) {
    if (d < 2 || n < 0) {
        throw DomainError("random_key: need d >= 2 and n >= 0");
    }
    std::vector<int> key(static_cast<std::size_t>(n));
    for (int& q : key) {
        q = static_cast<int>(rng.below(static_cast<std::uint64_t>(d)));
    }
    return key;
}

std::vector<RoundTranscript> run_protocol(const ProtocolConfig& config, std::span<const int> key, CounterRng& rng) {
    if (static_cast<int>(key.size()) != config.n_rounds) {
        throw DomainError("run_protocol: key has " + std::to_string(key.size()) + " dits but n_rounds = " +
                          std::to_string(config.n_rounds));
    }
    Session s = init_session(config);
    std::vector<RoundTranscript> out;
    out.reserve(key.size());
    const bool eve = config.eve == EveStrategy::shift_intercept;
    for (int q : key) {
        RoundTranscript t;
        t.round = s.round() + 1;
        t.q_sent = q;
        s = alice_send(std::move(s), q);
        if (eve) {
            EveStep step = eve_intervene(std::move(s), rng);
            s = std::move(step.session);
            t.eve_measured = step.measured;
        }
        BobStep bob = bob_receive(std::move(s), rng);
        s = std::move(bob.session);
        t.bob_measured = bob.measured;
        if (config.snapshot_states) {
            t.snapshots = s.snapshots();
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<RoundTranscript> run_protocol(const ProtocolConfig& config, std::span<const int> key) {
    CounterRng rng(config.seed);
    return run_protocol(config, key, rng);
}

DetectionReport compare_sample(std::span<RoundTranscript> transcripts, int m, CounterRng& rng) {
    const int n = static_cast<int>(transcripts.size());
    if (m < 1 || m > n) {
        throw DomainError("compare_sample: m = " + std::to_string(m) + " must be in [1, " + std::to_string(n) + "]");
    }
    // Partial Fisher-Yates: the first m entries become a uniform m-subset.
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < m; ++i) {
        const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(m));

    DetectionReport report;
    report.compared = m;
    for (int i : idx) {
        RoundTranscript& t = transcripts[static_cast<std::size_t>(i)];
        if (t.bob_measured != t.q_sent) {
            ++report.mismatches;
        }
        t.consumed = true;
    }
    report.detected = report.mismatches > 0;
    report.sampled = std::move(idx);
    return report;
}

std::vector<int> delivered_key(std::span<const RoundTranscript> transcripts) {
    std::vector<int> key;
    for (const auto& t : transcripts) {
        if (!t.consumed) {
            key.push_back(t.bob_measured);
        }
    }
    return key;
}

EveRecord eve_record(std::span<const RoundTranscript> transcripts) {
    EveRecord rec;
    for (const auto& t : transcripts) {
        if (t.eve_measured) {
            rec.values.push_back(*t.eve_measured);
        }
    }
    return rec;
}

std::string to_string(ProtectionKind kind) {
    switch (kind) {
    case ProtectionKind::none:
        return "none";
    case ProtectionKind::hadamard:
        return "hadamard";
    case ProtectionKind::custom:
        return "custom";
    }
    return "unknown";
}

std::string to_string(EveStrategy eve) {
    return eve == EveStrategy::shift_intercept ? "shift_intercept" : "absent";
}

} // namespace qkd
