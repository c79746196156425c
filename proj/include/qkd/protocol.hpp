#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qkd/gates.hpp"
#include "qkd/measure.hpp"
#include "qkd/random.hpp"
#include "qkd/state.hpp"

namespace qkd {

// Register layout. Between rounds the persistent register is (a, b, e);
// while a dit is in flight the key wire is inserted at position 2, giving
// (a, b, k, e) as in the textbook presentation of the scheme.
inline constexpr int kAliceWire = 0;
inline constexpr int kBobWire = 1;
inline constexpr int kKeyWire = 2;
inline constexpr int kEveWireInFlight = 3;
inline constexpr int kEveWireAtRest = 2;

enum class ProtectionKind { none, hadamard, custom };

/// Local unitary G applied by Alice (G) and Bob (G*) to the shared pair
/// before every dit.
struct Protection {
    ProtectionKind kind = ProtectionKind::none;
    CMatrix<double> unitary;  // only for custom

    static Protection none() { return {}; }
    static Protection hadamard() { return {ProtectionKind::hadamard, {}}; }
    static Protection custom(CMatrix<double> u) { return {ProtectionKind::custom, std::move(u)}; }

    [[nodiscard]] bool active() const noexcept { return kind != ProtectionKind::none; }
};

enum class EveStrategy { absent, shift_intercept };

struct ProtocolConfig {
    int d = 3;
    int n_rounds = 1;
    Protection protection;
    EveStrategy eve = EveStrategy::absent;
    std::uint64_t seed = 0;
    bool snapshot_states = false;
    /// Eve's ancilla starts in |eve_initial>.
    int eve_initial = 0;

    /// Custom protection matrices are accepted within this unitarity defect.
    static constexpr double kCustomUnitaryTolerance = 1e-8;

    /// Throws ConfigError naming the offending field.
    void validate() const;

    /// The protection matrix G (identity when protection is off).
    [[nodiscard]] CMatrix<double> protection_matrix() const;
};

struct LabeledState {
    std::string label;
    State state;
};

enum class EvePhase { first_round, steady };
enum class RoundStage { idle, sent, intercepted };

/// Live protocol state. Owned by one thread; the stepping functions take it
/// by value and return the advanced session.
class Session {
  public:
    [[nodiscard]] const ProtocolConfig& config() const noexcept { return *config_; }
    [[nodiscard]] const State& state() const noexcept { return state_; }
    /// Completed rounds.
    [[nodiscard]] int round() const noexcept { return round_; }
    [[nodiscard]] EvePhase eve_phase() const noexcept { return eve_phase_; }
    [[nodiscard]] RoundStage stage() const noexcept { return stage_; }
    [[nodiscard]] bool key_in_flight() const noexcept { return stage_ != RoundStage::idle; }
    [[nodiscard]] int eve_wire() const noexcept { return key_in_flight() ? kEveWireInFlight : kEveWireAtRest; }
    /// Snapshots of the current (or just finished) round, if enabled.
    [[nodiscard]] const std::vector<LabeledState>& snapshots() const noexcept { return snapshots_; }
    /// Dit Alice sent in the current round.
    [[nodiscard]] int q_sent() const noexcept { return q_sent_; }

    struct Gates;

  private:
    friend Session init_session(const ProtocolConfig&);
    friend Session alice_send(Session, int);
    friend struct EveStep eve_intervene(Session, CounterRng&);
    friend struct BobStep bob_receive(Session, CounterRng&);

    Session(std::shared_ptr<const ProtocolConfig> config, std::shared_ptr<const Gates> gates, State state);
    void snapshot(const char* label);

    std::shared_ptr<const ProtocolConfig> config_;
    std::shared_ptr<const Gates> gates_;
    State state_;
    int round_ = 0;
    EvePhase eve_phase_ = EvePhase::first_round;
    RoundStage stage_ = RoundStage::idle;
    int q_sent_ = -1;
    std::vector<LabeledState> snapshots_;
};

struct EveStep {
    Session session;
    std::optional<int> measured;
};

struct BobStep {
    Session session;
    int measured;
};

/// |Psi_00>_{a,b} (x) |eve_initial>_e, round 0. Throws ConfigError for an
/// invalid config.
Session init_session(const ProtocolConfig& config);

/// Applies the protection pair (G on a, G* on b) if enabled, adjoins |q>_k
/// and entangles it with R_c (control a, target k).
///
/// Snapshot labels: round 1 "Phi0" (key adjoined), "Phi1" (after R_c);
/// later rounds "Psi0", "Psi1" unprotected, or "Chi", "ChiTilde" (before
/// and after the protection pair), "PsiHat0", "PsiHat1" protected.
Session alice_send(Session session, int q);

/// Eve's intercept on the flying key wire. First round: R_c (control k,
/// target e), nothing measured. Later rounds: L_c (k -> e), measure e,
/// R_c (k -> e), returning the measured dit.
///
/// Snapshot labels: "Phi2" in round 1. Later rounds unprotected: "Psi2",
/// "eve_measured", "eve_restored"; protected: "eve_disentangled", "Phi3"
/// (post-measurement), "eve_restored".
EveStep eve_intervene(Session session, CounterRng& rng);

/// L_c (control b, target k), measure k, drop the key wire.
///
/// Snapshot labels: "Phi3" in round 1, "Phi4" in protected later rounds
/// with Eve present, otherwise "bob_decoded".
BobStep bob_receive(Session session, CounterRng& rng);

struct RoundTranscript {
    int round = 0;  // 1-based
    int q_sent = 0;
    int bob_measured = 0;
    std::optional<int> eve_measured;
    std::vector<LabeledState> snapshots;
    /// Set once the round has been disclosed by compare_sample.
    bool consumed = false;
};

/// Uniform random key of n dits.
std::vector<int> random_key(int d, int n, CounterRng& rng);

/// init, then per round alice_send -> eve_intervene (if configured) ->
/// bob_receive. key.size() must equal config.n_rounds.
std::vector<RoundTranscript> run_protocol(const ProtocolConfig& config, std::span<const int> key, CounterRng& rng);

/// As above with a measurement stream seeded from config.seed.
std::vector<RoundTranscript> run_protocol(const ProtocolConfig& config, std::span<const int> key);

struct DetectionReport {
    int compared = 0;
    int mismatches = 0;
    bool detected = false;
    /// Indices into the transcript span that was sampled.
    std::vector<int> sampled;
};

/// Publicly compares m distinct rounds drawn uniformly from `transcripts`
/// and marks them consumed.
DetectionReport compare_sample(std::span<RoundTranscript> transcripts, int m, CounterRng& rng);

/// Bob's dits of the rounds not consumed by sampling.
std::vector<int> delivered_key(std::span<const RoundTranscript> transcripts);

/// Eve's intercepted dits, one per round >= 2.
struct EveRecord {
    std::vector<int> values;
};

EveRecord eve_record(std::span<const RoundTranscript> transcripts);

std::string to_string(ProtectionKind kind);
std::string to_string(EveStrategy eve);

} // namespace qkd
