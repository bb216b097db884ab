#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sskf/errors.hpp"
#include "sskf/partition.hpp"
#include "sskf/rng.hpp"

namespace sskf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Family { gaussian, binomial };

inline std::string to_string(Family f) { return f == Family::gaussian ? "gaussian" : "binomial"; }

inline Family family_from_string(const std::string& s) {
    if (s == "gaussian") return Family::gaussian;
    if (s == "binomial") return Family::binomial;
    throw ParameterError("unknown outcome family '" + s + "'");
}

namespace detail {

inline void check_outcome(const Vector& y, Family family) {
    if (family != Family::binomial) return;
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (y[i] != 0.0 && y[i] != 1.0) throw DataError("binomial outcome must be 0/1");
}

inline std::vector<std::string> default_names(const std::string& prefix, std::size_t k) {
    std::vector<std::string> names(k);
    for (std::size_t i = 0; i < k; ++i) names[i] = prefix + std::to_string(i + 1);
    return names;
}

}  // namespace detail

/// Observations of explanatory variables, outcome and covariates.
struct Dataset {
    Matrix x;  // n x p
    Vector y;  // n
    Matrix z;  // n x m
    Family family = Family::gaussian;
    std::vector<std::string> x_names;
    std::vector<std::string> z_names;

    std::size_t n() const { return static_cast<std::size_t>(x.rows()); }
    std::size_t p() const { return static_cast<std::size_t>(x.cols()); }
    std::size_t m() const { return static_cast<std::size_t>(z.cols()); }

    void validate() const {
        if (x.rows() < 1 || x.cols() < 1) throw ShapeError("dataset needs n >= 1 and p >= 1");
        if (y.size() != x.rows() || z.rows() != x.rows()) throw ShapeError("dataset row counts differ");
        if (!x_names.empty() && x_names.size() != p()) throw ShapeError("x_names size differs from p");
        if (!z_names.empty() && z_names.size() != m()) throw ShapeError("z_names size differs from m");
        detail::check_outcome(y, family);
    }

    std::vector<std::string> variable_names() const { return x_names.empty() ? detail::default_names("X", p()) : x_names; }
    std::vector<std::string> covariate_names() const { return z_names.empty() ? detail::default_names("Z", m()) : z_names; }

    /// Rows in the given order.
    Dataset rows(const std::vector<std::size_t>& idx) const;
};

/// Dataset with the knockoff block appended: columns 0..p-1 are the real
/// variables, p..2p-1 their knockoffs.
struct AugmentedData {
    Matrix xx;  // n x 2p
    Vector y;
    Matrix z;
    Family family = Family::gaussian;
    std::vector<std::string> x_names;
    std::vector<std::string> z_names;

    std::size_t n() const { return static_cast<std::size_t>(xx.rows()); }
    std::size_t p() const { return static_cast<std::size_t>(xx.cols() / 2); }
    std::size_t m() const { return static_cast<std::size_t>(z.cols()); }

    void validate() const {
        if (xx.cols() % 2 != 0 || xx.cols() == 0) throw ShapeError("augmented matrix needs exactly 2p columns");
        if (y.size() != xx.rows() || z.rows() != xx.rows()) throw ShapeError("augmented data row counts differ");
        detail::check_outcome(y, family);
    }

    std::vector<std::string> variable_names() const { return x_names.empty() ? detail::default_names("X", p()) : x_names; }
    std::vector<std::string> covariate_names() const { return z_names.empty() ? detail::default_names("Z", m()) : z_names; }

    AugmentedData rows(const std::vector<std::size_t>& idx) const;
};

namespace detail {

inline Matrix take_rows(const Matrix& a, const std::vector<std::size_t>& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), a.cols());
    for (Eigen::Index c = 0; c < a.cols(); ++c)
        for (std::size_t r = 0; r < idx.size(); ++r) out(static_cast<Eigen::Index>(r), c) = a(static_cast<Eigen::Index>(idx[r]), c);
    return out;
}

inline Vector take_rows(const Vector& a, const std::vector<std::size_t>& idx) {
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) out[static_cast<Eigen::Index>(r)] = a[static_cast<Eigen::Index>(idx[r])];
    return out;
}

}  // namespace detail

inline Dataset Dataset::rows(const std::vector<std::size_t>& idx) const {
    return {detail::take_rows(x, idx), detail::take_rows(y, idx), detail::take_rows(z, idx), family, x_names, z_names};
}

inline AugmentedData AugmentedData::rows(const std::vector<std::size_t>& idx) const {
    return {detail::take_rows(xx, idx), detail::take_rows(y, idx), detail::take_rows(z, idx), family, x_names, z_names};
}

/// Combines a dataset with its knockoffs.
inline AugmentedData augment(const Dataset& d, const Matrix& knockoffs) {
    if (knockoffs.rows() != d.x.rows() || knockoffs.cols() != d.x.cols())
        throw ShapeError("knockoff matrix must match X");
    AugmentedData a;
    a.xx.resize(d.x.rows(), 2 * d.x.cols());
    a.xx << d.x, knockoffs;
    a.y = d.y;
    a.z = d.z;
    a.family = d.family;
    a.x_names = d.x_names;
    a.z_names = d.z_names;
    return a;
}

/// Binary n x p matrix of per-observation swaps.
struct SwapMask {
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> v;

    SwapMask() = default;
    SwapMask(std::size_t n, std::size_t p, std::uint8_t fill = 0)
        : v(Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Constant(
              static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p), fill)) {}

    std::size_t n() const { return static_cast<std::size_t>(v.rows()); }
    std::size_t p() const { return static_cast<std::size_t>(v.cols()); }

    bool operator()(std::size_t i, std::size_t j) const {
        return v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0;
    }
    void set(std::size_t i, std::size_t j, bool on) {
        v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = on ? 1 : 0;
    }

    SwapMask complement() const {
        SwapMask out = *this;
        for (Eigen::Index k = 0; k < out.v.size(); ++k) out.v.data()[k] = out.v.data()[k] ? 0 : 1;
        return out;
    }

    /// Entrywise exclusive or.
    SwapMask operator^(const SwapMask& other) const {
        if (other.n() != n() || other.p() != p()) throw ShapeError("swap masks differ in shape");
        SwapMask out = *this;
        for (Eigen::Index k = 0; k < out.v.size(); ++k) out.v.data()[k] = (out.v.data()[k] != 0) != (other.v.data()[k] != 0);
        return out;
    }

    SwapMask rows(const std::vector<std::size_t>& idx) const {
        SwapMask out(idx.size(), p());
        for (std::size_t j = 0; j < p(); ++j)
            for (std::size_t r = 0; r < idx.size(); ++r) out.set(r, j, (*this)(idx[r], j));
        return out;
    }

    bool operator==(const SwapMask& o) const { return v == o.v; }
};

/// Each entry independently 1 with probability `prob`.
inline SwapMask make_swap_mask(std::size_t n, std::size_t p, double prob, const RngSeed& seed) {
    if (!(prob >= 0.0 && prob <= 1.0)) throw ParameterError("swap probability must lie in [0, 1]");
    auto eng = seed.child("swapmask").engine();
    SwapMask mask(n, p);
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t i = 0; i < n; ++i) mask.set(i, j, bernoulli(eng, prob));
    return mask;
}

inline SwapMask make_swap_mask(std::size_t n, std::size_t p, const RngSeed& seed) {
    return make_swap_mask(n, p, 0.5, seed);
}

/// Exchanges entries (i, j) and (i, j + p) wherever the mask is set.
inline AugmentedData swap_by_mask(const AugmentedData& a, const SwapMask& mask) {
    const auto p = static_cast<Eigen::Index>(a.p());
    if (mask.n() != a.n() || mask.p() != a.p()) throw ShapeError("swap mask must be n x p");
    AugmentedData out = a;
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index i = 0; i < a.xx.rows(); ++i)
            if (mask.v(i, j)) std::swap(out.xx(i, j), out.xx(i, j + p));
    return out;
}

/// Subgroup index of every row for variable j.
inline std::vector<std::size_t> subgroup_labels(const PartitionFunction& psi, const Matrix& z, std::size_t j) {
    const auto& splits = psi.splits(j);
    for (const auto& s : splits)
        if (static_cast<Eigen::Index>(s.covariate) >= z.cols()) throw IndexError("partition refers to a missing covariate");
    std::vector<std::size_t> labels(static_cast<std::size_t>(z.rows()), 0);
    for (const auto& s : splits) {
        const auto col = z.col(static_cast<Eigen::Index>(s.covariate));
        for (Eigen::Index i = 0; i < z.rows(); ++i)
            labels[static_cast<std::size_t>(i)] = (labels[static_cast<std::size_t>(i)] << 1) | (col[i] > s.threshold ? 1u : 0u);
    }
    return labels;
}

/// Rows whose covariates map to group g of variable j.
inline std::vector<std::size_t> subgroup_rows(const PartitionFunction& psi, const Matrix& z, std::size_t j, std::size_t g) {
    psi.check_group(j, g);
    const auto labels = subgroup_labels(psi, z, j);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == g) rows.push_back(i);
    return rows;
}

/// Mask that is set exactly on the sub-columns named by `s`.
inline SwapMask hypotheses_mask(const PartitionFunction& psi, const Matrix& z, const std::set<HypothesisId>& s) {
    SwapMask mask(static_cast<std::size_t>(z.rows()), psi.variables());
    std::size_t last = psi.variables();
    std::vector<std::size_t> labels;
    for (const auto& id : s) {
        if (!psi.valid(id)) throw IndexError("invalid hypothesis id");
        if (id.variable != last) {
            labels = subgroup_labels(psi, z, id.variable);
            last = id.variable;
        }
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == id.group) mask.set(i, id.variable, true);
    }
    return mask;
}

/// Swaps the sub-columns X_j^(g) with their knockoffs for every (j, g) in s.
inline AugmentedData swap_by_hypotheses(const AugmentedData& a, const PartitionFunction& psi,
                                        const std::set<HypothesisId>& s) {
    if (psi.variables() != a.p()) throw ShapeError("partition and data disagree on p");
    return swap_by_mask(a, hypotheses_mask(psi, a.z, s));
}

}  // namespace sskf
