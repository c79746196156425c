#pragma once

// Test-only oracles. These avoid RegisterLayout and apply_gate entirely:
// indices are decoded digit by digit and operators are built as explicit
// full matrices.

#include <algorithm>
#include <cmath>
#include <vector>

#include "qkd/analysis.hpp"
#include "qkd/density.hpp"
#include "qkd/gates.hpp"
#include "qkd/random.hpp"

namespace qkd::test {

inline std::vector<int> decode(long idx, int d, int n) {
    std::vector<int> digits(static_cast<std::size_t>(n));
    for (int w = n - 1; w >= 0; --w) {
        digits[static_cast<std::size_t>(w)] = static_cast<int>(idx % d);
        idx /= d;
    }
    return digits;
}

inline long encode(const std::vector<int>& digits, int d) {
    long idx = 0;
    for (int v : digits) {
        idx = idx * d + v;
    }
    return idx;
}

inline long ipow(int d, int n) {
    long r = 1;
    for (int i = 0; i < n; ++i) {
        r *= d;
    }
    return r;
}

inline State random_state(Dimension d, int n, CounterRng& rng) {
    const long size = ipow(d.value(), n);
    CVector<double> v(size);
    for (long i = 0; i < size; ++i) {
        v(i) = Complex<double>(rng.uniform() - 0.5, rng.uniform() - 0.5);
    }
    v.normalize();
    return {d, n, v};
}

/// Full d^n x d^n operator of `g` on `wires`, built entry by entry.
inline CMatrix<double> embed_brute_force(const Gate<double>& g, const std::vector<int>& wires, int n) {
    const int d = g.d();
    const long size = ipow(d, n);
    CMatrix<double> full = CMatrix<double>::Zero(size, size);
    for (long x = 0; x < size; ++x) {
        const auto dx = decode(x, d, n);
        for (long y = 0; y < size; ++y) {
            const auto dy = decode(y, d, n);
            bool rest_equal = true;
            for (int w = 0; w < n; ++w) {
                const bool target = std::find(wires.begin(), wires.end(), w) != wires.end();
                if (!target && dx[static_cast<std::size_t>(w)] != dy[static_cast<std::size_t>(w)]) {
                    rest_equal = false;
                }
            }
            if (!rest_equal) {
                continue;
            }
            std::vector<int> sx, sy;
            for (int w : wires) {
                sx.push_back(dx[static_cast<std::size_t>(w)]);
                sy.push_back(dy[static_cast<std::size_t>(w)]);
            }
            full(x, y) = g.matrix()(encode(sx, d), encode(sy, d));
        }
    }
    return full;
}

/// Partial trace by summing rho over index pairs whose traced digits agree.
inline CMatrix<double> partial_trace_brute_force(const CMatrix<double>& rho, int d, int n, const std::vector<int>& keep) {
    const long size = ipow(d, n);
    const long out_size = ipow(d, static_cast<int>(keep.size()));
    CMatrix<double> out = CMatrix<double>::Zero(out_size, out_size);
    for (long x = 0; x < size; ++x) {
        const auto dx = decode(x, d, n);
        for (long y = 0; y < size; ++y) {
            const auto dy = decode(y, d, n);
            bool traced_equal = true;
            for (int w = 0; w < n; ++w) {
                const bool kept = std::find(keep.begin(), keep.end(), w) != keep.end();
                if (!kept && dx[static_cast<std::size_t>(w)] != dy[static_cast<std::size_t>(w)]) {
                    traced_equal = false;
                }
            }
            if (!traced_equal) {
                continue;
            }
            std::vector<int> kx, ky;
            for (int w : keep) {
                kx.push_back(dx[static_cast<std::size_t>(w)]);
                ky.push_back(dy[static_cast<std::size_t>(w)]);
            }
            out(encode(kx, d), encode(ky, d)) += rho(x, y);
        }
    }
    return out;
}

/// Closed-form state built from a list of (digits, amplitude) terms.
struct Terms {
    int d;
    int n;
    CVector<double> v;
    Terms(int d_, int n_) : d(d_), n(n_), v(CVector<double>::Zero(ipow(d_, n_))) {}
    void add(std::vector<int> digits, Complex<double> amp) {
        for (auto& x : digits) {
            x = ((x % d) + d) % d;
        }
        v(encode(digits, d)) += amp;
    }
    [[nodiscard]] State state() const { return {Dimension(d), n, v}; }
};

inline double max_abs(const CMatrix<double>& m) { return m.cwiseAbs().maxCoeff(); }

} // namespace qkd::test
