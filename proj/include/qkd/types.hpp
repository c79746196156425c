#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qkd {

/// Precondition violated by a caller-supplied value (digit out of range,
/// wire repeated, matrix not unitary, ...).
class DomainError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Operation invoked in the wrong protocol phase.
class UsageError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/// Invalid protocol or experiment configuration.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A state that should be impossible for valid inputs.
class InternalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Number of levels per qudit. Every wire of a register shares one Dimension.
class Dimension {
  public:
    explicit Dimension(int d) : d_(d) {
        if (d < 2) {
            throw DomainError("dimension must be >= 2, got " + std::to_string(d));
        }
    }
    [[nodiscard]] int value() const noexcept { return d_; }
    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(d_); }
    friend bool operator==(Dimension, Dimension) = default;

  private:
    int d_;
};

template <class Real> using Complex = std::complex<Real>;
template <class Real> using CVector = Eigen::Matrix<Complex<Real>, Eigen::Dynamic, 1>;
template <class Real> using CMatrix = Eigen::Matrix<Complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

/// Equality tolerance for amplitudes, traces and unitarity checks.
template <class Real> constexpr Real equality_tolerance() {
    if constexpr (sizeof(Real) <= sizeof(float)) {
        return Real(1e-5);
    } else {
        return Real(1e-10);
    }
}

/// Floor for the smallest eigenvalue of a density matrix.
template <class Real> constexpr Real psd_tolerance() {
    if constexpr (sizeof(Real) <= sizeof(float)) {
        return Real(1e-4);
    } else {
        return Real(1e-9);
    }
}

/// zeta^k with zeta = exp(2 pi i / d), evaluated directly from the reduced
/// exponent so large d does not accumulate phase error.
template <class Real> Complex<Real> root_of_unity(int d, long long k) {
    long long r = k % d;
    if (r < 0) {
        r += d;
    }
    const long double angle = 2.0L * 3.14159265358979323846264338327950288L *
                              static_cast<long double>(r) / static_cast<long double>(d);
    return {static_cast<Real>(std::cos(angle)), static_cast<Real>(std::sin(angle))};
}

/// Non-negative residue of v modulo d.
constexpr int mod(long long v, int d) {
    long long r = v % d;
    return static_cast<int>(r < 0 ? r + d : r);
}

namespace detail {
struct Unchecked {};
inline constexpr Unchecked unchecked{};
} // namespace detail

} // namespace qkd
