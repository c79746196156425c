#pragma once

#include <string>
#include <vector>

#include "qkd/random.hpp"
#include "qkd/state.hpp"

namespace qkd {

template <class Real> struct MeasurementOutcome {
    int wire;
    int value;
    Real probability;
    PureState<Real> post_state;
};

/// Born probabilities of each digit on `wire`.
template <class Real> std::vector<Real> outcome_probabilities(const PureState<Real>& s, int wire) {
    const std::vector<int> target{wire};
    s.layout().check_wires(target);
    std::vector<Real> p(s.dim().size(), Real(0));
    const auto& a = s.amplitudes();
    for (std::size_t i = 0; i < static_cast<std::size_t>(a.size()); ++i) {
        p[static_cast<std::size_t>(s.layout().digit(i, wire))] += std::norm(a(static_cast<Eigen::Index>(i)));
    }
    return p;
}

/// Projects `wire` onto |value> and renormalizes. Throws DomainError when
/// that outcome has (numerically) zero probability.
template <class Real> MeasurementOutcome<Real> project(const PureState<Real>& s, int wire, int value) {
    const std::vector<Real> p = outcome_probabilities(s, wire);
    if (value < 0 || value >= s.d()) {
        throw DomainError("outcome " + std::to_string(value) + " outside [0, " + std::to_string(s.d()) + ")");
    }
    const Real pv = p[static_cast<std::size_t>(value)];
    if (pv < Real(1e-12)) {
        throw DomainError("outcome " + std::to_string(value) + " on wire " + std::to_string(wire) +
                          " has zero probability");
    }
    CVector<Real> out = CVector<Real>::Zero(s.amplitudes().size());
    const Real scale = Real(1) / std::sqrt(pv);
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (s.layout().digit(static_cast<std::size_t>(i), wire) == value) {
            out(i) = s.amplitudes()(i) * scale;
        }
    }
    return {wire, value, pv, PureState<Real>(s.dim(), s.wires(), std::move(out), detail::unchecked)};
}

/// Samples a computational-basis measurement of `wire` with one uniform draw
/// from `rng`.
template <class Real> MeasurementOutcome<Real> measure(const PureState<Real>& s, int wire, CounterRng& rng) {
    const std::vector<Real> p = outcome_probabilities(s, wire);
    Real total = 0;
    for (Real v : p) {
        total += v;
    }
    if (!(total >= Real(1e-12))) {
        throw InternalError("measurement of wire " + std::to_string(wire) + " has no outcome with nonzero weight");
    }
    const double u = rng.uniform() * static_cast<double>(total);
    double acc = 0;
    int chosen = -1;
    for (std::size_t v = 0; v < p.size(); ++v) {
        // Roundoff-level weights are never selected.
        if (p[v] <= Real(1e-13)) {
            continue;
        }
        chosen = static_cast<int>(v);
        acc += static_cast<double>(p[v]);
        if (u < acc) {
            break;
        }
    }
    // Falls through to the last admissible outcome if roundoff leaves u >= acc.
    return project(s, wire, chosen);
}

} // namespace qkd
