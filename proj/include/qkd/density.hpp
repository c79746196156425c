#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qkd/state.hpp"

namespace qkd {

/// Measured deviations from the density-matrix invariants.
template <class Real> struct DensityDefects {
    Real hermiticity = 0;  // max |rho - rho^dag|
    Real trace_error = 0;  // |tr rho - 1|
    Real min_eigenvalue = 0;

    [[nodiscard]] bool ok(Real tol = equality_tolerance<Real>(), Real psd_tol = psd_tolerance<Real>()) const {
        return hermiticity <= tol && trace_error <= tol && min_eigenvalue >= -psd_tol;
    }
};

/// Hermitian, unit-trace, positive semidefinite matrix over n wires.
template <class Real> class DensityMatrix {
  public:
    using Matrix = CMatrix<Real>;

    /// Validating constructor.
    DensityMatrix(Dimension d, int n_wires, Matrix entries)
        : DensityMatrix(d, n_wires, std::move(entries), detail::unchecked) {
        const DensityDefects<Real> def = defects();
        if (!def.ok()) {
            throw DomainError("not a density matrix (hermiticity " + std::to_string(def.hermiticity) +
                              ", trace error " + std::to_string(def.trace_error) + ", min eigenvalue " +
                              std::to_string(def.min_eigenvalue) + ")");
        }
    }

    DensityMatrix(Dimension d, int n_wires, Matrix entries, detail::Unchecked)
        : layout_(d, n_wires), entries_(std::move(entries)) {
        if (static_cast<std::size_t>(entries_.rows()) != layout_.size() ||
            static_cast<std::size_t>(entries_.cols()) != layout_.size()) {
            throw DomainError("density matrix must be " + std::to_string(layout_.size()) + " square");
        }
    }

    [[nodiscard]] Dimension dim() const noexcept { return layout_.dim(); }
    [[nodiscard]] int d() const noexcept { return layout_.dim().value(); }
    [[nodiscard]] int wires() const noexcept { return layout_.wires(); }
    [[nodiscard]] const RegisterLayout& layout() const noexcept { return layout_; }
    [[nodiscard]] const Matrix& entries() const noexcept { return entries_; }
    [[nodiscard]] Complex<Real> trace() const { return entries_.trace(); }

    /// Eigenvalues of the Hermitian part, ascending.
    [[nodiscard]] Eigen::Matrix<Real, Eigen::Dynamic, 1> eigenvalues() const {
        const Matrix herm = (entries_ + entries_.adjoint()) / Real(2);
        Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }

    [[nodiscard]] DensityDefects<Real> defects() const {
        DensityDefects<Real> out;
        out.hermiticity = (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff();
        out.trace_error = std::abs(entries_.trace() - Complex<Real>(1));
        out.min_eigenvalue = eigenvalues().minCoeff();
        return out;
    }

  private:
    RegisterLayout layout_;
    Matrix entries_;
};

using Density = DensityMatrix<double>;

/// |s><s|.
template <class Real> DensityMatrix<Real> to_density(const PureState<Real>& s) {
    const auto& v = s.amplitudes();
    return {s.dim(), s.wires(), v * v.adjoint(), detail::unchecked};
}

/// 1/d^n over n wires.
template <class Real = double> DensityMatrix<Real> maximally_mixed(Dimension d, int n_wires) {
    const RegisterLayout layout(d, n_wires);
    const auto n = static_cast<Eigen::Index>(layout.size());
    return {d, n_wires, CMatrix<Real>::Identity(n, n) / Real(n), detail::unchecked};
}

/// Reduced matrix over `keep` (output wire order = order in `keep`), tracing
/// out every other wire.
template <class Real>
DensityMatrix<Real> partial_trace(const DensityMatrix<Real>& rho, std::span<const int> keep) {
    if (keep.empty()) {
        throw DomainError("partial_trace needs at least one wire to keep");
    }
    const RegisterLayout& layout = rho.layout();
    layout.check_wires(keep);
    const std::vector<std::size_t> kept = layout.offsets(keep);
    const std::vector<std::size_t> traced = layout.offsets(layout.complement(keep));
    const auto n = static_cast<Eigen::Index>(kept.size());
    CMatrix<Real> out = CMatrix<Real>::Zero(n, n);
    const auto& m = rho.entries();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            Complex<Real> acc(0);
            for (std::size_t r : traced) {
                acc += m(static_cast<Eigen::Index>(kept[static_cast<std::size_t>(i)] + r),
                         static_cast<Eigen::Index>(kept[static_cast<std::size_t>(j)] + r));
            }
            out(i, j) = acc;
        }
    }
    return {rho.dim(), static_cast<int>(keep.size()), std::move(out), detail::unchecked};
}

/// Same result as partial_trace(to_density(s), keep) without forming the
/// full d^n x d^n matrix: reshape the amplitudes to (kept x traced) and take
/// M M^dagger.
template <class Real>
DensityMatrix<Real> partial_trace(const PureState<Real>& s, std::span<const int> keep) {
    if (keep.empty()) {
        throw DomainError("partial_trace needs at least one wire to keep");
    }
    const RegisterLayout& layout = s.layout();
    layout.check_wires(keep);
    const std::vector<std::size_t> kept = layout.offsets(keep);
    const std::vector<std::size_t> traced = layout.offsets(layout.complement(keep));
    CMatrix<Real> m(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(traced.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
        for (std::size_t r = 0; r < traced.size(); ++r) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)) = s[kept[i] + traced[r]];
        }
    }
    return {s.dim(), static_cast<int>(keep.size()), m * m.adjoint(), detail::unchecked};
}

template <class Real>
DensityMatrix<Real> partial_trace(const DensityMatrix<Real>& rho, std::initializer_list<int> keep) {
    return partial_trace(rho, std::span<const int>(keep.begin(), keep.size()));
}

template <class Real>
DensityMatrix<Real> partial_trace(const PureState<Real>& s, std::initializer_list<int> keep) {
    return partial_trace(s, std::span<const int>(keep.begin(), keep.size()));
}

/// Largest entrywise difference; infinity if the shapes differ.
template <class Real> Real max_entry_distance(const DensityMatrix<Real>& a, const DensityMatrix<Real>& b) {
    if (a.dim() != b.dim() || a.wires() != b.wires()) {
        return std::numeric_limits<Real>::infinity();
    }
    return (a.entries() - b.entries()).cwiseAbs().maxCoeff();
}

template <class Real>
bool approx_equal(const DensityMatrix<Real>& a, const DensityMatrix<Real>& b, Real tol = equality_tolerance<Real>()) {
    return max_entry_distance(a, b) <= tol;
}

} // namespace qkd
