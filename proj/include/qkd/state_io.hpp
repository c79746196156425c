#pragma once

#include <string>

#include <json.hpp>

#include "qkd/density.hpp"
#include "qkd/gates.hpp"
#include "qkd/state.hpp"

namespace qkd {

/// JSON array of [re, im] pairs in flat-index order.
template <class Real> nlohmann::json amplitudes_to_json(const CVector<Real>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back({static_cast<double>(v(i).real()), static_cast<double>(v(i).imag())});
    }
    return out;
}

template <class Real> nlohmann::json to_json(const PureState<Real>& s) { return amplitudes_to_json(s.amplitudes()); }

/// Row-major JSON matrix of [re, im] pairs.
template <class Real> nlohmann::json matrix_to_json(const CMatrix<Real>& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        rows.push_back(amplitudes_to_json<Real>(m.row(i).transpose()));
    }
    return rows;
}

namespace detail {
inline Complex<double> complex_from_json(const nlohmann::json& j, const std::string& where) {
    if (j.is_number()) {
        return {j.get<double>(), 0.0};
    }
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw DomainError(where + ": expected a [re, im] pair");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}
} // namespace detail

/// Inverse of amplitudes_to_json; size and normalization are validated by
/// PureState.
inline State state_from_json(Dimension d, int n_wires, const nlohmann::json& j) {
    if (!j.is_array()) {
        throw DomainError("state: expected an array of [re, im] pairs");
    }
    CVector<double> v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = detail::complex_from_json(j[i], "amplitude " + std::to_string(i));
    }
    return {d, n_wires, std::move(v)};
}

/// Parses a square row-major matrix of [re, im] pairs (plain numbers are
/// accepted as real entries).
inline CMatrix<double> matrix_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty()) {
        throw DomainError("matrix: expected a non-empty array of rows");
    }
    const std::size_t n = j.size();
    CMatrix<double> m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
        if (!j[r].is_array() || j[r].size() != n) {
            throw DomainError("matrix: row " + std::to_string(r) + " must have " + std::to_string(n) + " entries");
        }
        for (std::size_t c = 0; c < n; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                detail::complex_from_json(j[r][c], "entry (" + std::to_string(r) + "," + std::to_string(c) + ")");
        }
    }
    return m;
}

} // namespace qkd
