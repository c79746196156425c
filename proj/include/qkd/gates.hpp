#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qkd/state.hpp"

namespace qkd {

/// Largest entry of |M^dagger M - 1|; infinity for non-square input.
template <class Real> Real unitarity_defect(const CMatrix<Real>& m) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        return std::numeric_limits<Real>::infinity();
    }
    const CMatrix<Real> id = CMatrix<Real>::Identity(m.rows(), m.cols());
    return (m.adjoint() * m - id).cwiseAbs().maxCoeff();
}

template <class Real>
bool is_unitary(const CMatrix<Real>& m, Real tol = equality_tolerance<Real>()) {
    return unitarity_defect(m) <= tol;
}

/// Unitary acting on `arity` wires of a register of dimension d.
template <class Real> class Gate {
  public:
    using Matrix = CMatrix<Real>;

    /// Throws DomainError if the matrix is not d^arity square or not unitary
    /// within `tol`.
    Gate(Dimension d, int arity, Matrix matrix, std::string label, Real tol = equality_tolerance<Real>())
        : Gate(d, arity, std::move(matrix), std::move(label), detail::unchecked) {
        const Real defect = unitarity_defect(matrix_);
        if (!(defect <= tol)) {
            throw DomainError("gate '" + label_ + "' is not unitary (max |U^dag U - 1| = " +
                              std::to_string(defect) + ")");
        }
    }

    Gate(Dimension d, int arity, Matrix matrix, std::string label, detail::Unchecked)
        : d_(d), arity_(arity), matrix_(std::move(matrix)), label_(std::move(label)) {
        if (arity < 1) {
            throw DomainError("gate arity must be >= 1");
        }
        const RegisterLayout layout(d, arity);
        if (static_cast<std::size_t>(matrix_.rows()) != layout.size() ||
            static_cast<std::size_t>(matrix_.cols()) != layout.size()) {
            throw DomainError("gate '" + label_ + "' matrix must be " + std::to_string(layout.size()) +
                              " square for arity " + std::to_string(arity) + " at d=" +
                              std::to_string(d.value()));
        }
        detect_monomial();
    }

    [[nodiscard]] Dimension dim() const noexcept { return d_; }
    [[nodiscard]] int d() const noexcept { return d_.value(); }
    [[nodiscard]] int arity() const noexcept { return arity_; }
    [[nodiscard]] const Matrix& matrix() const noexcept { return matrix_; }
    [[nodiscard]] const std::string& label() const noexcept { return label_; }

    /// True when every column has exactly one nonzero entry (permutations,
    /// shifts, controlled shifts, Weyl operators).
    [[nodiscard]] bool is_monomial() const noexcept { return !monomial_rows_.empty(); }
    /// Row of the nonzero entry in column c (monomial gates only).
    [[nodiscard]] const std::vector<Eigen::Index>& monomial_rows() const noexcept { return monomial_rows_; }
    [[nodiscard]] const std::vector<Complex<Real>>& monomial_values() const noexcept { return monomial_values_; }

    [[nodiscard]] Gate adjoint() const {
        return {d_, arity_, matrix_.adjoint(), label_ + "^dag", detail::unchecked};
    }
    /// Entrywise complex conjugate (not the adjoint).
    [[nodiscard]] Gate conjugate() const {
        return {d_, arity_, matrix_.conjugate(), label_ + "*", detail::unchecked};
    }

  private:
    void detect_monomial() {
        std::vector<Eigen::Index> rows;
        std::vector<Complex<Real>> values;
        for (Eigen::Index c = 0; c < matrix_.cols(); ++c) {
            Eigen::Index row = -1;
            for (Eigen::Index r = 0; r < matrix_.rows(); ++r) {
                if (matrix_(r, c) != Complex<Real>(0)) {
                    if (row >= 0) {
                        return;
                    }
                    row = r;
                }
            }
            if (row < 0) {
                return;
            }
            rows.push_back(row);
            values.push_back(matrix_(row, c));
        }
        std::vector<bool> hit(rows.size(), false);
        for (Eigen::Index r : rows) {
            if (hit[static_cast<std::size_t>(r)]) {
                return;
            }
            hit[static_cast<std::size_t>(r)] = true;
        }
        monomial_rows_ = std::move(rows);
        monomial_values_ = std::move(values);
    }

    Dimension d_;
    int arity_;
    Matrix matrix_;
    std::string label_;
    std::vector<Eigen::Index> monomial_rows_;
    std::vector<Complex<Real>> monomial_values_;
};

namespace detail {
inline void check_index(const char* what, int v, int d) {
    if (v < 0 || v >= d) {
        throw DomainError(std::string(what) + " = " + std::to_string(v) + " is outside [0, " +
                          std::to_string(d) + ")");
    }
}
} // namespace detail

/// (1/sqrt d) sum_j zeta^(n j) |j, j+m> on two wires.
template <class Real = double> PureState<Real> bell_state(Dimension d, int m, int n) {
    const int dd = d.value();
    detail::check_index("m", m, dd);
    detail::check_index("n", n, dd);
    const RegisterLayout layout(d, 2);
    CVector<Real> amps = CVector<Real>::Zero(static_cast<Eigen::Index>(layout.size()));
    const Real scale = Real(1) / std::sqrt(Real(dd));
    for (int j = 0; j < dd; ++j) {
        const int digits[2] = {j, mod(j + m, dd)};
        amps(static_cast<Eigen::Index>(layout.index_of(digits))) =
            scale * root_of_unity<Real>(dd, static_cast<long long>(n) * j);
    }
    return {d, 2, std::move(amps), detail::unchecked};
}

/// Weyl operator sum_j zeta^(n j) |j+m><j|.
template <class Real = double> Gate<Real> generalized_pauli(Dimension d, int m, int n) {
    const int dd = d.value();
    detail::check_index("m", m, dd);
    detail::check_index("n", n, dd);
    CMatrix<Real> u = CMatrix<Real>::Zero(dd, dd);
    for (int j = 0; j < dd; ++j) {
        u(mod(j + m, dd), j) = root_of_unity<Real>(dd, static_cast<long long>(n) * j);
    }
    return {d, 1, std::move(u), "U(" + std::to_string(m) + "," + std::to_string(n) + ")", detail::unchecked};
}

/// Discrete Fourier matrix, H_ij = zeta^(i j) / sqrt d.
template <class Real = double> Gate<Real> fourier_gate(Dimension d) {
    const int dd = d.value();
    CMatrix<Real> h(dd, dd);
    const Real scale = Real(1) / std::sqrt(Real(dd));
    for (int i = 0; i < dd; ++i) {
        for (int j = 0; j < dd; ++j) {
            h(i, j) = scale * root_of_unity<Real>(dd, static_cast<long long>(i) * j);
        }
    }
    return {d, 1, std::move(h), "H", detail::unchecked};
}

enum class ShiftDirection { right, left };

/// R|j> = |j+1 mod d>, L|j> = |j-1 mod d>.
template <class Real = double> Gate<Real> shift_gate(Dimension d, ShiftDirection dir) {
    const int dd = d.value();
    const int step = dir == ShiftDirection::right ? 1 : -1;
    CMatrix<Real> s = CMatrix<Real>::Zero(dd, dd);
    for (int j = 0; j < dd; ++j) {
        s(mod(j + step, dd), j) = Real(1);
    }
    return {d, 1, std::move(s), dir == ShiftDirection::right ? "R" : "L", detail::unchecked};
}

template <class Real = double> Gate<Real> identity_gate(Dimension d, int arity = 1) {
    const RegisterLayout layout(d, arity);
    const auto n = static_cast<Eigen::Index>(layout.size());
    return {d, arity, CMatrix<Real>::Identity(n, n), "I", detail::unchecked};
}

/// Two-wire gate |i>|j> -> |i> U^i |j>: the target gets U applied once per
/// unit of the control digit.
template <class Real> Gate<Real> controlled_gate(const Gate<Real>& u) {
    if (u.arity() != 1) {
        throw DomainError("controlled_gate needs a single-wire gate, '" + u.label() + "' has arity " +
                          std::to_string(u.arity()));
    }
    if (!is_unitary(u.matrix())) {
        throw DomainError("controlled_gate: '" + u.label() + "' is not unitary");
    }
    const int dd = u.d();
    CMatrix<Real> out = CMatrix<Real>::Zero(dd * dd, dd * dd);
    CMatrix<Real> power = CMatrix<Real>::Identity(dd, dd);
    for (int i = 0; i < dd; ++i) {
        out.block(i * dd, i * dd, dd, dd) = power;
        power = u.matrix() * power;
    }
    return {u.dim(), 2, std::move(out), u.label() + "_c", detail::unchecked};
}

/// Embeds `g` on `wires` (wires[0] is the gate's most significant wire) and
/// applies it, identity elsewhere.
template <class Real>
PureState<Real> apply_gate(const PureState<Real>& s, const Gate<Real>& g, std::span<const int> wires) {
    if (g.dim() != s.dim()) {
        throw DomainError("gate '" + g.label() + "' has d=" + std::to_string(g.d()) + " but the register has d=" +
                          std::to_string(s.d()));
    }
    if (static_cast<int>(wires.size()) != g.arity()) {
        throw DomainError("gate '" + g.label() + "' has arity " + std::to_string(g.arity()) + " but " +
                          std::to_string(wires.size()) + " wires were given");
    }
    const RegisterLayout& layout = s.layout();
    layout.check_wires(wires);

    const std::vector<std::size_t> target = layout.offsets(wires);
    const std::vector<int> rest_wires = layout.complement(wires);
    const std::vector<std::size_t> rest = layout.offsets(rest_wires);

    const auto& in = s.amplitudes();
    const auto& m = g.matrix();
    const auto k = static_cast<Eigen::Index>(target.size());
    CVector<Real> out(in.size());
    if (g.is_monomial()) {
        const auto& rows = g.monomial_rows();
        const auto& vals = g.monomial_values();
        for (std::size_t base : rest) {
            for (std::size_t c = 0; c < target.size(); ++c) {
                const auto dst = base + target[static_cast<std::size_t>(rows[c])];
                out(static_cast<Eigen::Index>(dst)) = vals[c] * in(static_cast<Eigen::Index>(base + target[c]));
            }
        }
        return {s.dim(), s.wires(), std::move(out), detail::unchecked};
    }
    CVector<Real> local(k);
    for (std::size_t base : rest) {
        for (Eigen::Index t = 0; t < k; ++t) {
            local(t) = in(static_cast<Eigen::Index>(base + target[static_cast<std::size_t>(t)]));
        }
        const CVector<Real> mapped = m * local;
        for (Eigen::Index t = 0; t < k; ++t) {
            out(static_cast<Eigen::Index>(base + target[static_cast<std::size_t>(t)])) = mapped(t);
        }
    }
    return {s.dim(), s.wires(), std::move(out), detail::unchecked};
}

template <class Real>
PureState<Real> apply_gate(const PureState<Real>& s, const Gate<Real>& g, std::initializer_list<int> wires) {
    return apply_gate(s, g, std::span<const int>(wires.begin(), wires.size()));
}

/// R_c (H (x) 1) |n, m>, which equals bell_state(d, m, n). Note the swapped
/// argument order in the input basis state.
template <class Real = double> PureState<Real> bell_via_circuit(Dimension d, int m, int n) {
    const int dd = d.value();
    detail::check_index("m", m, dd);
    detail::check_index("n", n, dd);
    auto s = basis_state<Real>(d, {n, m});
    s = apply_gate(s, fourier_gate<Real>(d), {0});
    return apply_gate(s, controlled_gate(shift_gate<Real>(d, ShiftDirection::right)), {0, 1});
}

} // namespace qkd
