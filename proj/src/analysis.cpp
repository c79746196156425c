#include "qkd/analysis.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/QR>

#include "qkd/gates.hpp"

namespace qkd {

namespace {

void require_unitary(Dimension d, const CMatrix<double>& u, const char* who) {
    if (u.rows() != d.value() || u.cols() != d.value()) {
        throw DomainError(std::string(who) + ": U must be " + std::to_string(d.value()) + "x" +
                          std::to_string(d.value()));
    }
    if (!is_unitary(u, 1e-10)) {
        throw DomainError(std::string(who) + ": U is not unitary");
    }
}

void require_dit(const char* what, int v, Dimension d) {
    if (v < 0 || v >= d.value()) {
        throw DomainError(std::string(what) + " = " + std::to_string(v) + " is outside [0, " +
                          std::to_string(d.value()) + ")");
    }
}

double entropy_bits(const Eigen::VectorXd& p) {
    double h = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p(i) > 0) {
            h -= p(i) * std::log2(p(i));
        }
    }
    return h;
}

double gaussian(CounterRng& rng) {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - rng.uniform();
    const double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace

Density rho_key_eve_closed_form(Dimension d, int q1, int q2, const CMatrix<double>& u) {
    require_unitary(d, u, "rho_key_eve_closed_form");
    require_dit("q1", q1, d);
    require_dit("q2", q2, d);
    const int n = d.value();
    const RegisterLayout layout(d, 2);
    CMatrix<double> rho = CMatrix<double>::Zero(n * n, n * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const int digits[2] = {mod(i + q2, n), mod(j + q1, n)};
            const auto idx = static_cast<Eigen::Index>(layout.index_of(digits));
            rho(idx, idx) += std::norm(u(i, j)) / n;
        }
    }
    return {d, 2, std::move(rho), detail::unchecked};
}

double eve_outcome_probability(Dimension d, int q1, int q2, int q_eve, const CMatrix<double>& u) {
    require_unitary(d, u, "eve_outcome_probability");
    require_dit("q1", q1, d);
    require_dit("q2", q2, d);
    require_dit("q_eve", q_eve, d);
    const int n = d.value();
    const int c = q2 - q1 + q_eve;
    double p = 0;
    for (int i = 0; i < n; ++i) {
        p += std::norm(u(i, mod(i + c, n)));
    }
    return p / n;
}

CMatrix<double> rho_bob_key_joint(Dimension d, int q1, int q2, int q_eve, const CMatrix<double>& u) {
    require_unitary(d, u, "rho_bob_key_joint");
    require_dit("q1", q1, d);
    require_dit("q2", q2, d);
    require_dit("q_eve", q_eve, d);
    const int n = d.value();
    const int c = q2 - q1 + q_eve;
    CMatrix<double> rho = CMatrix<double>::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const int col = mod(i + c, n);
        for (int k = 0; k < n; ++k) {
            const int out = mod(i + q2 - k, n);
            rho(out, out) += std::norm(u(i, col)) * std::norm(u(k, col)) / n;
        }
    }
    return rho;
}

Density rho_bob_key_closed_form(Dimension d, int q1, int q2, int q_eve, const CMatrix<double>& u) {
    const double p = eve_outcome_probability(d, q1, q2, q_eve, u);
    if (p < 1e-12) {
        throw DomainError("rho_bob_key_closed_form: Eve's outcome " + std::to_string(q_eve) +
                          " has zero probability for this U");
    }
    return {d, 1, rho_bob_key_joint(d, q1, q2, q_eve, u) / p, detail::unchecked};
}

double round2_error_rate(Dimension d, const CMatrix<double>& u) {
    const int n = d.value();
    double correct = 0;
    for (int q1 = 0; q1 < n; ++q1) {
        for (int q2 = 0; q2 < n; ++q2) {
            for (int q = 0; q < n; ++q) {
                correct += rho_bob_key_joint(d, q1, q2, q, u)(q2, q2).real();
            }
        }
    }
    return 1.0 - correct / (static_cast<double>(n) * n);
}

bool is_flat(const CMatrix<double>& u, double tol) {
    if (u.rows() != u.cols() || u.rows() == 0) {
        return false;
    }
    const double target = 1.0 / static_cast<double>(u.rows());
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        for (Eigen::Index j = 0; j < u.cols(); ++j) {
            if (std::abs(std::norm(u(i, j)) - target) > tol) {
                return false;
            }
        }
    }
    return true;
}

CMatrix<double> flat_unitary(Dimension d, CounterRng& rng) {
    const int n = d.value();
    auto phases = [&] {
        CVector<double> v(n);
        for (int i = 0; i < n; ++i) {
            v(i) = std::polar(1.0, 2.0 * std::numbers::pi * rng.uniform());
        }
        return v;
    };
    const CVector<double> left = phases();
    const CVector<double> right = phases();
    return left.asDiagonal() * fourier_gate<double>(d).matrix() * right.asDiagonal();
}

CMatrix<double> random_unitary(Dimension d, CounterRng& rng) {
    const int n = d.value();
    CMatrix<double> z(n, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double re = gaussian(rng);
            const double im = gaussian(rng);
            z(i, j) = Complex<double>(re, im) / std::sqrt(2.0);
        }
    }
    Eigen::HouseholderQR<CMatrix<double>> qr(z);
    const CMatrix<double> q = qr.householderQ() * CMatrix<double>::Identity(n, n);
    const CMatrix<double> r = qr.matrixQR().triangularView<Eigen::Upper>();
    CVector<double> fix(n);
    for (int i = 0; i < n; ++i) {
        const double mag = std::abs(r(i, i));
        fix(i) = mag > 0 ? r(i, i) / mag : Complex<double>(1);
    }
    return q * fix.asDiagonal();
}

ConditionalDistribution::ConditionalDistribution(Eigen::MatrixXd p_r_given_i) : p_(std::move(p_r_given_i)) {
    if (p_.rows() < 2 || p_.rows() != p_.cols()) {
        throw DomainError("conditional distribution must be d x d with d >= 2");
    }
    for (Eigen::Index i = 0; i < p_.rows(); ++i) {
        if ((p_.row(i).array() < 0).any()) {
            throw DomainError("conditional distribution row " + std::to_string(i) + " has a negative entry");
        }
        const double sum = p_.row(i).sum();
        if (std::abs(sum - 1.0) > 1e-10) {
            throw DomainError("conditional distribution row " + std::to_string(i) + " sums to " + std::to_string(sum));
        }
    }
}

ConditionalDistribution ConditionalDistribution::from_counts(const Eigen::MatrixXd& counts) {
    Eigen::MatrixXd p = counts;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double total = p.row(i).sum();
        if (!(total > 0)) {
            throw DomainError("no observations for input value " + std::to_string(i));
        }
        p.row(i) /= total;
    }
    return ConditionalDistribution(std::move(p));
}

ConditionalDistribution ConditionalDistribution::from_pairs(std::span<const std::pair<int, int>> pairs, Dimension d) {
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(d.value(), d.value());
    for (const auto& [i, r] : pairs) {
        require_dit("input value", i, d);
        require_dit("observed value", r, d);
        counts(i, r) += 1;
    }
    return from_counts(counts);
}

ConditionalDistribution exact_eve_conditional(Dimension d, int q1, const CMatrix<double>& u) {
    const int n = d.value();
    const RegisterLayout layout(d, 2);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const Density rho = rho_key_eve_closed_form(d, q1, i, u);
        for (int k = 0; k < n; ++k) {
            for (int r = 0; r < n; ++r) {
                const int digits[2] = {k, mod(k + r, n)};
                const auto idx = static_cast<Eigen::Index>(layout.index_of(digits));
                p(i, r) += rho.entries()(idx, idx).real();
            }
        }
    }
    return ConditionalDistribution(std::move(p));
}

InfoGainReport info_gain_analytic(const ConditionalDistribution& cond) {
    const int n = cond.d();
    const double prior = 1.0 / n;
    InfoGainReport out;
    out.h_apriori = std::log2(static_cast<double>(n));
    double h_post = 0;
    for (int r = 0; r < n; ++r) {
        double p_r = 0;
        for (int i = 0; i < n; ++i) {
            p_r += prior * cond(i, r);
        }
        if (p_r <= 0) {
            continue;
        }
        Eigen::VectorXd posterior(n);
        for (int i = 0; i < n; ++i) {
            posterior(i) = prior * cond(i, r) / p_r;
        }
        h_post += p_r * entropy_bits(posterior);
    }
    out.h_aposteriori = h_post;
    out.gain = out.h_apriori - out.h_aposteriori;
    return out;
}

double empirical_mutual_information(std::span<const std::pair<int, int>> pairs, Dimension d) {
    if (pairs.empty()) {
        throw DomainError("empirical_mutual_information: no samples");
    }
    const int n = d.value();
    Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(n, n);
    for (const auto& [x, y] : pairs) {
        require_dit("x", x, d);
        require_dit("y", y, d);
        joint(x, y) += 1;
    }
    joint /= static_cast<double>(pairs.size());
    const Eigen::VectorXd px = joint.rowwise().sum();
    const Eigen::VectorXd py = joint.colwise().sum().transpose();
    double mi = 0;
    for (int x = 0; x < n; ++x) {
        for (int y = 0; y < n; ++y) {
            const double pxy = joint(x, y);
            if (pxy > 0) {
                mi += pxy * std::log2(pxy / (px(x) * py(y)));
            }
        }
    }
    return mi;
}

QberReport qber(std::span<const RoundTranscript> transcripts, Dimension d) {
    const std::vector<RoundTranscript> one(transcripts.begin(), transcripts.end());
    return qber(std::span<const std::vector<RoundTranscript>>(&one, 1), d);
}

QberReport qber(std::span<const std::vector<RoundTranscript>> sessions, Dimension d) {
    QberReport out;
    out.theoretical = static_cast<double>(d.value() - 1) / d.value();
    std::vector<long long> errors;
    std::vector<long long> counts;
    long long late_errors = 0;
    for (const auto& session : sessions) {
        for (std::size_t r = 0; r < session.size(); ++r) {
            if (errors.size() <= r) {
                errors.resize(r + 1, 0);
                counts.resize(r + 1, 0);
            }
            const bool wrong = session[r].bob_measured != session[r].q_sent;
            errors[r] += wrong ? 1 : 0;
            counts[r] += 1;
            if (r >= 1) {
                late_errors += wrong ? 1 : 0;
                out.samples_from_round2 += 1;
            }
        }
    }
    out.per_round_error.resize(errors.size());
    for (std::size_t r = 0; r < errors.size(); ++r) {
        out.per_round_error[r] = static_cast<double>(errors[r]) / static_cast<double>(counts[r]);
    }
    if (out.samples_from_round2 > 0) {
        out.aggregate_from_round2 = static_cast<double>(late_errors) / static_cast<double>(out.samples_from_round2);
    }
    return out;
}

std::vector<std::vector<int>> candidate_keys(const EveRecord& record, Dimension d, int key_length) {
    if (key_length < 1 || static_cast<int>(record.values.size()) != key_length - 1) {
        throw DomainError("candidate_keys: record has " + std::to_string(record.values.size()) +
                          " values, expected key_length - 1 = " + std::to_string(key_length - 1));
    }
    const int n = d.value();
    for (int r : record.values) {
        require_dit("record value", r, d);
    }
    std::vector<std::vector<int>> out;
    for (int q1 = 0; q1 < n; ++q1) {
        std::vector<int> key(static_cast<std::size_t>(key_length));
        key[0] = q1;
        for (int i = 1; i < key_length; ++i) {
            key[static_cast<std::size_t>(i)] = mod(q1 - record.values[static_cast<std::size_t>(i - 1)], n);
        }
        bool consistent = true;
        for (int i = 1; i < key_length && consistent; ++i) {
            consistent = mod(key[0] - key[static_cast<std::size_t>(i)], n) == record.values[static_cast<std::size_t>(i - 1)];
        }
        if (consistent) {
            out.push_back(std::move(key));
        }
    }
    return out;
}

int key_ambiguity(const EveRecord& record, Dimension d, int key_length) {
    return static_cast<int>(candidate_keys(record, d, key_length).size());
}

double detection_probability(Dimension d, int m) {
    if (m < 1) {
        throw DomainError("detection_probability: m must be >= 1, got " + std::to_string(m));
    }
    return 1.0 - std::pow(1.0 / d.value(), m);
}

double binomial_sigma(double p, long long n) {
    if (n <= 0) {
        throw DomainError("binomial_sigma: n must be positive");
    }
    return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

} // namespace qkd
