#pragma once

#include <span>
#include <utility>
#include <vector>

#include "qkd/density.hpp"
#include "qkd/protocol.hpp"
#include "qkd/random.hpp"

namespace qkd {

// ---------------------------------------------------------------------------
// Closed-form density matrices for the protected second round.
//
// Setting: round 1 carried q1 past Eve's first-round entangling step; in
// round 2 Alice and Bob apply U and U* to the shared pair, Alice sends q2.
// ---------------------------------------------------------------------------

/// rho_{k,e} while the second dit is in flight:
///   (1/d) sum_{i,j} |U_ij|^2 |i+q2, j+q1><i+q2, j+q1|   over wires (k, e).
/// Equals 1/d^2 whenever U is flat. Throws DomainError for non-unitary U.
Density rho_key_eve_closed_form(Dimension d, int q1, int q2, const CMatrix<double>& u);

/// Probability that Eve's second-round measurement yields `q_eve`:
///   (1/d) sum_i |U_{i, i+c}|^2,  c = q2 - q1 + q_eve.
double eve_outcome_probability(Dimension d, int q1, int q2, int q_eve, const CMatrix<double>& u);

/// Bob's key-wire state after his L_c in round 2, conditioned on Eve having
/// measured `q_eve`:
///   sum_{i,k} |U_{i,i+c}|^2 |U_{k,i+c}|^2 |i+q2-k><i+q2-k|
/// normalized to unit trace (the normalizer is d * eve_outcome_probability).
/// 1/d for flat U. Throws DomainError when the conditioning outcome has zero
/// probability or U is not unitary.
Density rho_bob_key_closed_form(Dimension d, int q1, int q2, int q_eve, const CMatrix<double>& u);

/// Unnormalized variant: the same sum with prefactor 1/d, i.e. the joint
/// P(q_eve) * rho_k|q_eve. Summing it over q_eve gives Bob's unconditional
/// key state.
CMatrix<double> rho_bob_key_joint(Dimension d, int q1, int q2, int q_eve, const CMatrix<double>& u);

/// Exact probability that Bob decodes the second dit wrongly, averaged over
/// uniform q1, q2 and Eve's outcome. (d-1)/d for flat U.
double round2_error_rate(Dimension d, const CMatrix<double>& u);

/// Every | |U_ij|^2 - 1/d | <= tol.
bool is_flat(const CMatrix<double>& u, double tol = 1e-10);

/// D1 * H * D2 with independent uniform phases on the diagonals of D1, D2.
CMatrix<double> flat_unitary(Dimension d, CounterRng& rng);

/// Haar-random unitary (QR of a complex Gaussian matrix, phases fixed).
CMatrix<double> random_unitary(Dimension d, CounterRng& rng);

// ---------------------------------------------------------------------------
// Information gain
// ---------------------------------------------------------------------------

/// p(r | i): row i is the distribution of Eve's value r given Alice sent i.
class ConditionalDistribution {
  public:
    /// Throws DomainError unless the matrix is d x d, non-negative and each
    /// row sums to 1 within 1e-10.
    explicit ConditionalDistribution(Eigen::MatrixXd p_r_given_i);

    /// Row-normalized counts; every row needs at least one observation.
    static ConditionalDistribution from_counts(const Eigen::MatrixXd& counts);
    static ConditionalDistribution from_pairs(std::span<const std::pair<int, int>> pairs, Dimension d);

    [[nodiscard]] int d() const noexcept { return static_cast<int>(p_.rows()); }
    [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return p_; }
    [[nodiscard]] double operator()(int i, int r) const { return p_(i, r); }

  private:
    Eigen::MatrixXd p_;
};

/// Eve's outcome law in round 2, read off the closed-form rho_{k,e}: her
/// value is r = e - k after the L_c she applies.
ConditionalDistribution exact_eve_conditional(Dimension d, int q1, const CMatrix<double>& u);

struct InfoGainReport {
    double h_apriori = 0;
    double h_aposteriori = 0;
    double gain = 0;
};

/// Shannon-entropy difference log2 d - H(i | r), uniform prior p(i) = 1/d,
/// posterior p(i|r) from Bayes.
InfoGainReport info_gain_analytic(const ConditionalDistribution& cond);

/// Plug-in (maximum likelihood) mutual information in bits, no bias
/// correction.
double empirical_mutual_information(std::span<const std::pair<int, int>> pairs, Dimension d);

// ---------------------------------------------------------------------------
// Error rates and detection
// ---------------------------------------------------------------------------

struct QberReport {
    /// Fraction of sessions whose round r+1 dit was received wrongly.
    std::vector<double> per_round_error;
    /// Pooled error over all rounds >= 2 (0 when there is no such round).
    double aggregate_from_round2 = 0;
    /// Number of (session, round >= 2) samples in the aggregate.
    long long samples_from_round2 = 0;
    double theoretical = 0;  // (d-1)/d
};

QberReport qber(std::span<const RoundTranscript> transcripts, Dimension d);

/// Averages over independent sessions; rounds missing from shorter sessions
/// are skipped.
QberReport qber(std::span<const std::vector<RoundTranscript>> sessions, Dimension d);

/// Full keys consistent with an unprotected-attack record r_i = q1 - q_{i+2}:
/// one candidate per guess of q1. Throws DomainError unless
/// record.size() == key_length - 1.
std::vector<std::vector<int>> candidate_keys(const EveRecord& record, Dimension d, int key_length);

int key_ambiguity(const EveRecord& record, Dimension d, int key_length);

/// 1 - (1/d)^m.
double detection_probability(Dimension d, int m);

/// Standard error sqrt(p (1 - p) / n) of a binomial proportion.
double binomial_sigma(double p, long long n);

} // namespace qkd
