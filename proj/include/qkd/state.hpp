#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qkd/types.hpp"

namespace qkd {

/// Flat-index layout of an n-wire register of d-level qudits.
///
/// Wire 0 is the most significant base-d digit: the basis state
/// |x_0, x_1, ..., x_{n-1}> sits at index sum_w x_w * d^(n-1-w).
class RegisterLayout {
  public:
    RegisterLayout(Dimension d, int n_wires) : d_(d), n_(n_wires) {
        if (n_wires < 1) {
            throw DomainError("register needs at least one wire, got " + std::to_string(n_wires));
        }
        strides_.resize(static_cast<std::size_t>(n_wires));
        std::size_t s = 1;
        for (int w = n_wires - 1; w >= 0; --w) {
            strides_[static_cast<std::size_t>(w)] = s;
            if (s > kMaxSize / d.size()) {
                throw DomainError("register of " + std::to_string(n_wires) + " wires at d=" +
                                  std::to_string(d.value()) + " is too large for a dense state");
            }
            s *= d.size();
        }
        size_ = s;
    }

    [[nodiscard]] Dimension dim() const noexcept { return d_; }
    [[nodiscard]] int wires() const noexcept { return n_; }
    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] std::size_t stride(int wire) const { return strides_.at(static_cast<std::size_t>(wire)); }

    [[nodiscard]] int digit(std::size_t index, int wire) const {
        return static_cast<int>((index / stride(wire)) % d_.size());
    }

    [[nodiscard]] std::size_t index_of(std::span<const int> digits) const {
        if (static_cast<int>(digits.size()) != n_) {
            throw DomainError("expected " + std::to_string(n_) + " digits, got " +
                              std::to_string(digits.size()));
        }
        std::size_t idx = 0;
        for (int w = 0; w < n_; ++w) {
            const int v = digits[static_cast<std::size_t>(w)];
            if (v < 0 || v >= d_.value()) {
                throw DomainError("digit " + std::to_string(v) + " on wire " + std::to_string(w) +
                                  " is outside [0, " + std::to_string(d_.value()) + ")");
            }
            idx += static_cast<std::size_t>(v) * stride(w);
        }
        return idx;
    }

    [[nodiscard]] std::vector<int> digits_of(std::size_t index) const {
        std::vector<int> out(static_cast<std::size_t>(n_));
        for (int w = 0; w < n_; ++w) {
            out[static_cast<std::size_t>(w)] = digit(index, w);
        }
        return out;
    }

    /// Throws unless `wires` are distinct and in range.
    void check_wires(std::span<const int> wires) const {
        for (std::size_t i = 0; i < wires.size(); ++i) {
            if (wires[i] < 0 || wires[i] >= n_) {
                throw DomainError("wire " + std::to_string(wires[i]) + " out of range for a " +
                                  std::to_string(n_) + "-wire register");
            }
            for (std::size_t j = 0; j < i; ++j) {
                if (wires[j] == wires[i]) {
                    throw DomainError("wire " + std::to_string(wires[i]) + " listed twice");
                }
            }
        }
    }

    /// Offsets of every basis configuration of `wires` (first listed wire
    /// most significant), as contributions to the flat index.
    [[nodiscard]] std::vector<std::size_t> offsets(std::span<const int> wires) const {
        std::vector<std::size_t> out{0};
        for (int w : wires) {
            std::vector<std::size_t> next;
            next.reserve(out.size() * d_.size());
            for (std::size_t base : out) {
                for (std::size_t v = 0; v < d_.size(); ++v) {
                    next.push_back(base + v * stride(w));
                }
            }
            out = std::move(next);
        }
        return out;
    }

    /// Wires not in `wires`, ascending.
    [[nodiscard]] std::vector<int> complement(std::span<const int> wires) const {
        std::vector<int> rest;
        for (int w = 0; w < n_; ++w) {
            if (std::find(wires.begin(), wires.end(), w) == wires.end()) {
                rest.push_back(w);
            }
        }
        return rest;
    }

  private:
    static constexpr std::size_t kMaxSize = std::size_t{1} << 30;

    Dimension d_;
    int n_;
    std::size_t size_ = 1;
    std::vector<std::size_t> strides_;
};

/// Normalized amplitude vector over n qudits of dimension d.
template <class Real> class PureState {
  public:
    using RealScalar = Real;
    using Vector = CVector<Real>;

    /// Validating constructor: size must be d^n_wires and the norm 1.
    PureState(Dimension d, int n_wires, Vector amplitudes)
        : PureState(d, n_wires, std::move(amplitudes), detail::unchecked) {
        const Real err = std::abs(amplitudes_.squaredNorm() - Real(1));
        if (!(err <= equality_tolerance<Real>())) {
            throw DomainError("state is not normalized (|norm^2 - 1| = " + std::to_string(err) + ")");
        }
    }

    PureState(Dimension d, int n_wires, Vector amplitudes, detail::Unchecked)
        : layout_(d, n_wires), amplitudes_(std::move(amplitudes)) {
        if (static_cast<std::size_t>(amplitudes_.size()) != layout_.size()) {
            throw DomainError("amplitude vector has " + std::to_string(amplitudes_.size()) +
                              " entries, register needs " + std::to_string(layout_.size()));
        }
    }

    [[nodiscard]] Dimension dim() const noexcept { return layout_.dim(); }
    [[nodiscard]] int d() const noexcept { return layout_.dim().value(); }
    [[nodiscard]] int wires() const noexcept { return layout_.wires(); }
    [[nodiscard]] const RegisterLayout& layout() const noexcept { return layout_; }
    [[nodiscard]] const Vector& amplitudes() const noexcept { return amplitudes_; }
    [[nodiscard]] Complex<Real> operator[](std::size_t i) const { return amplitudes_(static_cast<Eigen::Index>(i)); }
    [[nodiscard]] Complex<Real> amplitude(std::span<const int> digits) const {
        return (*this)[layout_.index_of(digits)];
    }
    [[nodiscard]] Real norm() const { return amplitudes_.norm(); }

  private:
    RegisterLayout layout_;
    Vector amplitudes_;
};

using State = PureState<double>;

/// |digits> with wire 0 = digits[0].
template <class Real = double> PureState<Real> basis_state(Dimension d, std::span<const int> digits) {
    const RegisterLayout layout(d, static_cast<int>(digits.size()));
    CVector<Real> amps = CVector<Real>::Zero(static_cast<Eigen::Index>(layout.size()));
    amps(static_cast<Eigen::Index>(layout.index_of(digits))) = Real(1);
    return {d, layout.wires(), std::move(amps), detail::unchecked};
}

template <class Real = double> PureState<Real> basis_state(Dimension d, std::initializer_list<int> digits) {
    return basis_state<Real>(d, std::span<const int>(digits.begin(), digits.size()));
}

/// a (x) b; a's wires come first.
template <class Real> PureState<Real> tensor(const PureState<Real>& a, const PureState<Real>& b) {
    if (a.dim() != b.dim()) {
        throw DomainError("tensor of registers with different dimensions (" + std::to_string(a.d()) +
                          " vs " + std::to_string(b.d()) + ")");
    }
    const auto& x = a.amplitudes();
    const auto& y = b.amplitudes();
    CVector<Real> out(x.size() * y.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        out.segment(i * y.size(), y.size()) = x(i) * y;
    }
    return {a.dim(), a.wires() + b.wires(), std::move(out), detail::unchecked};
}

/// Inserts a fresh wire in basis state |digit> so that it becomes wire
/// `position` of the result.
template <class Real> PureState<Real> adjoin_wire(const PureState<Real>& s, int position, int digit) {
    if (position < 0 || position > s.wires()) {
        throw DomainError("cannot insert wire at position " + std::to_string(position) + " of a " +
                          std::to_string(s.wires()) + "-wire register");
    }
    if (digit < 0 || digit >= s.d()) {
        throw DomainError("digit " + std::to_string(digit) + " for new wire " + std::to_string(position) +
                          " is outside [0, " + std::to_string(s.d()) + ")");
    }
    const RegisterLayout out_layout(s.dim(), s.wires() + 1);
    const std::size_t d = s.dim().size();
    // Old index splits into high digits (wires < position) and low digits.
    const std::size_t low_size = out_layout.stride(position);
    CVector<Real> out = CVector<Real>::Zero(static_cast<Eigen::Index>(out_layout.size()));
    const auto& in = s.amplitudes();
    for (std::size_t i = 0; i < static_cast<std::size_t>(in.size()); ++i) {
        const std::size_t high = i / low_size;
        const std::size_t low = i % low_size;
        const std::size_t j = (high * d + static_cast<std::size_t>(digit)) * low_size + low;
        out(static_cast<Eigen::Index>(j)) = in(static_cast<Eigen::Index>(i));
    }
    return {s.dim(), s.wires() + 1, std::move(out), detail::unchecked};
}

/// Removes `wire`, which must hold a definite basis digit (e.g. right after
/// a measurement). Throws DomainError if the wire is entangled or in
/// superposition.
template <class Real> PureState<Real> discard_wire(const PureState<Real>& s, int wire) {
    if (s.wires() < 2) {
        throw DomainError("cannot discard the only wire of a register");
    }
    const std::vector<int> target{wire};
    s.layout().check_wires(target);
    const std::size_t d = s.dim().size();
    const std::size_t low_size = s.layout().stride(wire);
    const auto& in = s.amplitudes();

    std::vector<Real> weight(d, Real(0));
    for (std::size_t i = 0; i < static_cast<std::size_t>(in.size()); ++i) {
        weight[static_cast<std::size_t>(s.layout().digit(i, wire))] += std::norm(in(static_cast<Eigen::Index>(i)));
    }
    const auto best = std::max_element(weight.begin(), weight.end());
    if (std::abs(*best - Real(1)) > equality_tolerance<Real>()) {
        throw DomainError("wire " + std::to_string(wire) + " is not in a definite basis state");
    }
    const std::size_t keep = static_cast<std::size_t>(best - weight.begin());

    const std::size_t out_size = static_cast<std::size_t>(in.size()) / d;
    CVector<Real> out(static_cast<Eigen::Index>(out_size));
    for (std::size_t j = 0; j < out_size; ++j) {
        const std::size_t high = j / low_size;
        const std::size_t low = j % low_size;
        out(static_cast<Eigen::Index>(j)) = in(static_cast<Eigen::Index>((high * d + keep) * low_size + low));
    }
    return {s.dim(), s.wires() - 1, std::move(out), detail::unchecked};
}

/// Largest entrywise amplitude difference; infinity if the registers differ.
template <class Real> Real max_amplitude_distance(const PureState<Real>& a, const PureState<Real>& b) {
    if (a.dim() != b.dim() || a.wires() != b.wires()) {
        return std::numeric_limits<Real>::infinity();
    }
    return (a.amplitudes() - b.amplitudes()).cwiseAbs().maxCoeff();
}

/// Amplitude-wise equality. No global-phase quotient.
template <class Real>
bool approx_equal(const PureState<Real>& a, const PureState<Real>& b, Real tol = equality_tolerance<Real>()) {
    return max_amplitude_distance(a, b) <= tol;
}

/// Equality up to a global phase, for diagnostics: |<a|b>| = 1 within tol.
template <class Real>
bool equal_up_to_phase(const PureState<Real>& a, const PureState<Real>& b, Real tol = equality_tolerance<Real>()) {
    if (a.dim() != b.dim() || a.wires() != b.wires()) {
        return false;
    }
    return std::abs(std::abs(a.amplitudes().dot(b.amplitudes())) - Real(1)) <= tol;
}

} // namespace qkd
