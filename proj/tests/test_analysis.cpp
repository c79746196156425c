#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "qkd/analysis.hpp"

using namespace qkd;

namespace {

ProtocolConfig protected_config(int d, int rounds, CMatrix<double> g, bool snapshots = false) {
    ProtocolConfig c;
    c.d = d;
    c.n_rounds = rounds;
    c.eve = EveStrategy::shift_intercept;
    c.protection = Protection::custom(std::move(g));
    c.snapshot_states = snapshots;
    return c;
}

const State& snap(const RoundTranscript& t, const std::string& label) {
    for (const auto& s : t.snapshots) {
        if (s.label == label) {
            return s.state;
        }
    }
    FAIL("missing snapshot " << label);
    throw std::logic_error("unreachable");
}

double three_sigma(double p, long long n) { return 3 * std::sqrt(p * (1 - p) / static_cast<double>(n)); }

// Bob's second-round error probability by exact projection over every Eve
// outcome, starting from the closed-form in-flight state.
double round2_error_by_projection(int d, const CMatrix<double>& g) {
    const Dimension dim(d);
    const auto rc = controlled_gate(shift_gate(dim, ShiftDirection::right));
    const auto lc = controlled_gate(shift_gate(dim, ShiftDirection::left));
    double err = 0;
    for (int q1 = 0; q1 < d; ++q1) {
        for (int q2 = 0; q2 < d; ++q2) {
            test::Terms hat1(d, 4);
            for (int i = 0; i < d; ++i) {
                for (int j = 0; j < d; ++j) {
                    for (int k = 0; k < d; ++k) {
                        hat1.add({i, k, i + q2, j + q1}, g(i, j) * std::conj(g(k, j)) / std::sqrt(double(d)));
                    }
                }
            }
            const State s = apply_gate(hat1.state(), lc, {2, 3});
            const auto pe = outcome_probabilities(s, 3);
            for (int q = 0; q < d; ++q) {
                if (pe[static_cast<std::size_t>(q)] < 1e-12) {
                    continue;
                }
                State t = project(s, 3, q).post_state;
                t = apply_gate(apply_gate(t, rc, {2, 3}), lc, {1, 2});
                const auto pb = outcome_probabilities(t, 2);
                err += pe[static_cast<std::size_t>(q)] * (1 - pb[static_cast<std::size_t>(q2)]);
            }
        }
    }
    return err / (d * d);
}

} // namespace

TEST_CASE("rho_key_eve_closed_form examples") {
    const Dimension d(3);
    for (int q1 = 0; q1 < 3; ++q1) {
        for (int q2 = 0; q2 < 3; ++q2) {
            const Density rho = rho_key_eve_closed_form(d, q1, q2, fourier_gate(d).matrix());
            CHECK(test::max_abs(rho.entries() - CMatrix<double>::Identity(9, 9) / 9.0) <= 1e-12);
        }
    }
    const Density id = rho_key_eve_closed_form(d, 1, 2, CMatrix<double>::Identity(3, 3));
    CMatrix<double> expect = CMatrix<double>::Zero(9, 9);
    for (int i = 0; i < 3; ++i) {
        const int idx = mod(i + 2, 3) * 3 + mod(i + 1, 3);
        expect(idx, idx) = 1.0 / 3;
    }
    CHECK(test::max_abs(id.entries() - expect) <= 1e-15);
    CMatrix<double> bad = CMatrix<double>::Identity(3, 3) * 2.0;
    CHECK_THROWS_AS((void)rho_key_eve_closed_form(d, 0, 0, bad), DomainError);
}

TEST_CASE("rho_bob_key_closed_form examples") {
    const Dimension d5(5);
    for (int q1 = 0; q1 < 5; ++q1) {
        for (int q = 0; q < 5; ++q) {
            const Density rho = rho_bob_key_closed_form(d5, q1, 3, q, fourier_gate(d5).matrix());
            CHECK(max_entry_distance(rho, maximally_mixed(d5, 1)) <= 1e-12);
        }
    }
    const Dimension d3(3);
    const CMatrix<double> id = CMatrix<double>::Identity(3, 3);
    for (int q1 = 0; q1 < 3; ++q1) {
        for (int q2 = 0; q2 < 3; ++q2) {
            const int q = mod(q1 - q2, 3);
            const Density rho = rho_bob_key_closed_form(d3, q1, q2, q, id);
            CHECK(std::abs(rho.entries()(q2, q2) - 1.0) <= 1e-15);
            CHECK(rho.entries().cwiseAbs().sum() == doctest::Approx(1.0));
            CHECK_THROWS_AS((void)rho_bob_key_closed_form(d3, q1, q2, mod(q + 1, 3), id), DomainError);
        }
    }
}

TEST_CASE("joint Bob state sums over Eve's outcomes to a density matrix") {
    CounterRng rng(1);
    for (int d : {2, 3, 4}) {
        const Dimension dim(d);
        const CMatrix<double> u = random_unitary(dim, rng);
        CMatrix<double> total = CMatrix<double>::Zero(d, d);
        for (int q = 0; q < d; ++q) {
            const CMatrix<double> joint = rho_bob_key_joint(dim, 1 % d, 0, q, u);
            const double p = eve_outcome_probability(dim, 1 % d, 0, q, u);
            CHECK(std::abs(joint.trace() - p) <= 1e-12);
            if (p > 1e-12) {
                CHECK(test::max_abs(joint / p - rho_bob_key_closed_form(dim, 1 % d, 0, q, u).entries()) <= 1e-12);
            }
            total += joint;
        }
        CHECK(std::abs(total.trace() - 1.0) <= 1e-12);
    }
}

TEST_CASE("closed forms agree with simulated partial traces") {
    CounterRng urng(2);
    for (int d : {2, 3}) {
        const Dimension dim(d);
        std::vector<CMatrix<double>> us{fourier_gate(dim).matrix(), CMatrix<double>::Identity(d, d)};
        for (int t = 0; t < 3; ++t) {
            us.push_back(flat_unitary(dim, urng));
            us.push_back(random_unitary(dim, urng));
        }
        for (const auto& u : us) {
            for (int q1 = 0; q1 < d; ++q1) {
                for (int q2 = 0; q2 < d; ++q2) {
                    for (std::uint64_t seed = 0; seed < 3; ++seed) {
                        CounterRng rng(seed * 31 + static_cast<std::uint64_t>(q1 * d + q2));
                        const std::vector<int> key{q1, q2};
                        const auto tr = run_protocol(protected_config(d, 2, u, true), key, rng);
                        const int q = *tr[1].eve_measured;
                        const Density ke = partial_trace(snap(tr[1], "PsiHat1"), {2, 3});
                        CHECK(max_entry_distance(ke, rho_key_eve_closed_form(dim, q1, q2, u)) <= 1e-10);
                        const Density k = partial_trace(snap(tr[1], "Phi4"), {2});
                        CHECK(max_entry_distance(k, rho_bob_key_closed_form(dim, q1, q2, q, u)) <= 1e-10);
                    }
                }
            }
        }
    }
}

TEST_CASE("round2_error_rate") {
    CounterRng rng(3);
    for (int d : {2, 3, 4}) {
        const Dimension dim(d);
        CHECK(round2_error_rate(dim, fourier_gate(dim).matrix()) == doctest::Approx((d - 1.0) / d).epsilon(1e-12));
        CHECK(round2_error_rate(dim, CMatrix<double>::Identity(d, d)) == doctest::Approx(0.0));
        for (int t = 0; t < 3; ++t) {
            const CMatrix<double> u = random_unitary(dim, rng);
            CHECK(std::abs(round2_error_rate(dim, u) - round2_error_by_projection(d, u)) <= 1e-10);
        }
    }
}

TEST_CASE("is_flat and flat_unitary") {
    CounterRng rng(4);
    for (int d : {2, 3, 5, 8}) {
        CHECK(is_flat(fourier_gate(Dimension(d)).matrix()));
        CHECK_FALSE(is_flat(CMatrix<double>::Identity(d, d)));
    }
    const Dimension d4(4);
    for (int t = 0; t < 5; ++t) {
        const CMatrix<double> f = flat_unitary(d4, rng);
        CHECK(is_flat(f, 1e-10));
        CHECK(is_unitary(f));
        CHECK(test::max_abs(rho_key_eve_closed_form(d4, t % 4, 1, f).entries() - CMatrix<double>::Identity(16, 16) / 16.0) <=
              1e-10);
        CHECK(max_entry_distance(rho_bob_key_closed_form(d4, 2, t % 4, 1, f), maximally_mixed(d4, 1)) <= 1e-10);
    }
    const CMatrix<double> g = random_unitary(Dimension(3), rng);
    CHECK(is_unitary(g));
    CHECK_FALSE(is_flat(g));
}

TEST_CASE("ConditionalDistribution validation") {
    CHECK_THROWS_AS(ConditionalDistribution(Eigen::MatrixXd::Constant(2, 3, 1.0 / 3)), DomainError);
    Eigen::MatrixXd p(2, 2);
    p << 0.5, 0.6, 0.5, 0.5;
    CHECK_THROWS_AS(ConditionalDistribution{p}, DomainError);
    p << 1.2, -0.2, 0.5, 0.5;
    CHECK_THROWS_AS(ConditionalDistribution{p}, DomainError);
    Eigen::MatrixXd counts(2, 2);
    counts << 3, 1, 0, 0;
    CHECK_THROWS_AS((void)ConditionalDistribution::from_counts(counts), DomainError);
    counts << 3, 1, 0, 2;
    CHECK(ConditionalDistribution::from_counts(counts)(0, 0) == doctest::Approx(0.75));
}

TEST_CASE("info_gain_analytic examples") {
    const InfoGainReport uniform = info_gain_analytic(ConditionalDistribution(Eigen::MatrixXd::Constant(4, 4, 0.25)));
    CHECK(std::abs(uniform.gain) <= 1e-12);
    const InfoGainReport perfect = info_gain_analytic(ConditionalDistribution(Eigen::MatrixXd::Identity(4, 4)));
    CHECK(perfect.gain == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(perfect.h_aposteriori == doctest::Approx(0.0));

    CounterRng rng(5);
    for (int t = 0; t < 20; ++t) {
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 3);
        for (int i = 0; i < 3; ++i) {
            for (int r = 0; r < 3; ++r) {
                p(i, r) = rng.uniform() + 1e-3;
            }
            p.row(i) /= p.row(i).sum();
        }
        const InfoGainReport rep = info_gain_analytic(ConditionalDistribution(p));
        CHECK(std::abs(rep.gain - (rep.h_apriori - rep.h_aposteriori)) <= 1e-10);
        CHECK(rep.gain >= -1e-10);
        CHECK(rep.gain <= std::log2(3.0) + 1e-10);
    }
}

TEST_CASE("exact round-2 conditional gives Eve nothing under flat protection") {
    CounterRng rng(6);
    for (int d : {2, 3, 5}) {
        const Dimension dim(d);
        for (int q1 = 0; q1 < d; ++q1) {
            const auto cond = exact_eve_conditional(dim, q1, fourier_gate(dim).matrix());
            CHECK(std::abs(info_gain_analytic(cond).gain) <= 1e-12);
            CHECK(std::abs(info_gain_analytic(exact_eve_conditional(dim, q1, flat_unitary(dim, rng))).gain) <= 1e-12);
        }
        // Without protection Eve's value is a bijection of the dit for a known q1.
        const auto id = exact_eve_conditional(dim, 0, CMatrix<double>::Identity(d, d));
        CHECK(info_gain_analytic(id).gain == doctest::Approx(std::log2(double(d))).epsilon(1e-12));
    }
}

TEST_CASE("empirical_mutual_information") {
    CounterRng rng(7);
    std::vector<std::pair<int, int>> same, indep;
    for (int t = 0; t < 10000; ++t) {
        const int x = static_cast<int>(rng.below(3));
        same.emplace_back(x, x);
        indep.emplace_back(x, static_cast<int>(rng.below(3)));
    }
    CHECK(empirical_mutual_information(same, Dimension(3)) == doctest::Approx(std::log2(3.0)).epsilon(1e-3));
    CHECK(empirical_mutual_information(indep, Dimension(3)) < 0.01);
    const std::vector<std::pair<int, int>> deterministic{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
    CHECK(empirical_mutual_information(deterministic, Dimension(4)) == doctest::Approx(2.0));
    const std::vector<std::pair<int, int>> empty;
    CHECK_THROWS_AS((void)empirical_mutual_information(empty, Dimension(3)), DomainError);
    const std::vector<std::pair<int, int>> out_of_range{{0, 3}};
    CHECK_THROWS_AS((void)empirical_mutual_information(out_of_range, Dimension(3)), DomainError);
}

TEST_CASE("protected rounds leak under 0.02 bits empirically at d=3") {
    const int d = 3, n = 10000;
    std::vector<std::pair<int, int>> pairs;
    CounterRng keys(8);
    for (int t = 0; t < n; ++t) {
        CounterRng rng = CounterRng(9).split(static_cast<std::uint64_t>(t));
        const auto key = random_key(d, 2, keys);
        const auto tr = run_protocol(protected_config(d, 2, fourier_gate(Dimension(d)).matrix()), key, rng);
        pairs.emplace_back(key[1], *tr[1].eve_measured);
    }
    CHECK(empirical_mutual_information(pairs, Dimension(d)) < 0.02);
    CHECK(info_gain_analytic(ConditionalDistribution::from_pairs(pairs, Dimension(d))).gain < 0.02);
}

TEST_CASE("qber") {
    CounterRng rng(10);
    SUBCASE("no Eve and unprotected Eve are error-free") {
        for (EveStrategy eve : {EveStrategy::absent, EveStrategy::shift_intercept}) {
            ProtocolConfig c;
            c.d = 4;
            c.n_rounds = 6;
            c.eve = eve;
            std::vector<std::vector<RoundTranscript>> sessions;
            for (int s = 0; s < 20; ++s) {
                sessions.push_back(run_protocol(c, random_key(4, 6, rng), rng));
            }
            const QberReport r = qber(std::span<const std::vector<RoundTranscript>>(sessions), Dimension(4));
            CHECK(r.per_round_error == std::vector<double>(6, 0.0));
            CHECK(r.aggregate_from_round2 == 0.0);
            CHECK(r.samples_from_round2 == 100);
            CHECK(r.theoretical == doctest::Approx(0.75));
        }
    }
    SUBCASE("single session: per-round indicators") {
        std::vector<RoundTranscript> tr(3);
        for (int i = 0; i < 3; ++i) {
            tr[static_cast<std::size_t>(i)].round = i + 1;
            tr[static_cast<std::size_t>(i)].q_sent = 1;
            tr[static_cast<std::size_t>(i)].bob_measured = i == 2 ? 0 : 1;
        }
        const QberReport r = qber(std::span<const RoundTranscript>(tr), Dimension(2));
        CHECK(r.per_round_error == std::vector<double>{0, 0, 1});
        CHECK(r.aggregate_from_round2 == doctest::Approx(0.5));
    }
    SUBCASE("Hadamard protection at d=8, 10^4 two-round sessions") {
        const int d = 8, n = 10000;
        ProtocolConfig c;
        c.d = d;
        c.n_rounds = 2;
        c.eve = EveStrategy::shift_intercept;
        c.protection = Protection::hadamard();
        std::vector<std::vector<RoundTranscript>> sessions;
        for (int s = 0; s < n; ++s) {
            sessions.push_back(run_protocol(c, random_key(d, 2, rng), rng));
        }
        const QberReport r = qber(std::span<const std::vector<RoundTranscript>>(sessions), Dimension(d));
        const double p = 7.0 / 8;
        CHECK(r.per_round_error[0] == 0.0);
        CHECK(std::abs(r.per_round_error[1] - p) <= three_sigma(p, n));
        for (double e : r.per_round_error) {
            CHECK((e >= 0 && e <= 1));
        }
    }
}

TEST_CASE("key_ambiguity") {
    CounterRng rng(11);
    SUBCASE("unprotected record at d=5 leaves 5 candidates, each reproducing the record") {
        ProtocolConfig c;
        c.d = 5;
        c.n_rounds = 8;
        c.eve = EveStrategy::shift_intercept;
        const auto key = random_key(5, 8, rng);
        const auto tr = run_protocol(c, key, rng);
        const EveRecord rec = eve_record(tr);
        CHECK(key_ambiguity(rec, Dimension(5), 8) == 5);
        const auto cands = candidate_keys(rec, Dimension(5), 8);
        CHECK(std::find(cands.begin(), cands.end(), key) != cands.end());
        for (const auto& k : cands) {
            for (int i = 1; i < 8; ++i) {
                CHECK(mod(k[0] - k[static_cast<std::size_t>(i)], 5) == rec.values[static_cast<std::size_t>(i - 1)]);
            }
        }
    }
    SUBCASE("empty record for a one-dit key") { CHECK(key_ambiguity(EveRecord{}, Dimension(2), 1) == 2); }
    SUBCASE("brute force over every key agrees") {
        for (int d : {2, 3}) {
            for (int len = 1; len <= 4; ++len) {
                const long total = test::ipow(d, len);
                for (long r = 0; r < test::ipow(d, len - 1); ++r) {
                    EveRecord rec;
                    rec.values = test::decode(r, d, len - 1);
                    int count = 0;
                    for (long kidx = 0; kidx < total; ++kidx) {
                        const auto k = test::decode(kidx, d, len);
                        bool ok = true;
                        for (int i = 1; i < len; ++i) {
                            ok = ok && mod(k[0] - k[static_cast<std::size_t>(i)], d) ==
                                           rec.values[static_cast<std::size_t>(i - 1)];
                        }
                        count += ok ? 1 : 0;
                    }
                    CHECK(key_ambiguity(rec, Dimension(d), len) == count);
                }
            }
        }
    }
    SUBCASE("length mismatch") {
        EveRecord rec;
        rec.values = {1, 2};
        CHECK_THROWS_AS((void)key_ambiguity(rec, Dimension(3), 2), DomainError);
        CHECK_THROWS_AS((void)key_ambiguity(rec, Dimension(3), 4), DomainError);
    }
}

TEST_CASE("detection_probability") {
    CHECK(detection_probability(Dimension(2), 1) == doctest::Approx(0.5));
    CHECK(detection_probability(Dimension(10), 2) == doctest::Approx(0.99));
    CHECK(detection_probability(Dimension(5), 3) == doctest::Approx(0.992));
    CHECK_THROWS_AS((void)detection_probability(Dimension(3), 0), DomainError);
    for (int d : {2, 3, 7}) {
        double prev = 0;
        for (int m = 1; m < 10; ++m) {
            const double p = detection_probability(Dimension(d), m);
            CHECK(p > prev);
            CHECK(p < 1.0);
            prev = p;
        }
    }
    CHECK(binomial_sigma(0.5, 100) == doctest::Approx(0.05));
}
