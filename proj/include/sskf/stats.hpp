#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "sskf/csv.hpp"
#include "sskf/errors.hpp"
#include "sskf/glm.hpp"
#include "sskf/partition.hpp"
#include "sskf/rng.hpp"
#include "sskf/tabular.hpp"

namespace sskf {

/// zeta(t) = 1 / (offset + t).
inline double zeta(double t, double offset = 0.05) { return 1.0 / (offset + t); }

struct PriorWeights {
    Vector pi;            // p, one per variable (shared by X_j and its knockoff)
    Vector covariate_pi;  // m
    Vector t_prior;       // p
    Vector t_prior_knockoff;
    bool degenerate = false;

    /// Penalty weights for the design [xx | z].
    Vector design_weights() const {
        const auto p = pi.size();
        Vector w(2 * p + covariate_pi.size());
        w.head(p) = pi;
        w.segment(p, p) = pi;
        w.tail(covariate_pi.size()) = covariate_pi;
        return w;
    }
};

struct StatOptions {
    double zeta_offset = 0.05;
    bool weight_covariates = true;
    WeightedPathOptions path;
};

/// Prior importances from a cross-validated lasso of y on [masked xx | z].
inline PriorWeights prior_weights_from_masked(const AugmentedData& masked, const RngSeed& seed, const StatOptions& opts = {}) {
    masked.validate();
    const auto p = static_cast<Eigen::Index>(masked.p());
    const auto m = masked.z.cols();
    Matrix raw(masked.xx.rows(), 2 * p + m);
    raw << masked.xx, masked.z;
    const auto cv = cv_lasso(standardize(raw), masked.y, masked.family, seed.child("prior"), opts.path.cv);
    PriorWeights w;
    w.degenerate = cv.degenerate;
    w.t_prior = cv.fit.coefficients.head(p).cwiseAbs();
    w.t_prior_knockoff = cv.fit.coefficients.segment(p, p).cwiseAbs();
    w.pi.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) w.pi[j] = zeta(w.t_prior[j] + w.t_prior_knockoff[j], opts.zeta_offset);
    w.covariate_pi.resize(m);
    for (Eigen::Index l = 0; l < m; ++l)
        w.covariate_pi[l] = opts.weight_covariates ? zeta(std::abs(cv.fit.coefficients[2 * p + l]), opts.zeta_offset) : 1.0;
    return w;
}

inline PriorWeights prior_weights(const AugmentedData& a, const SwapMask& v, const RngSeed& seed, const StatOptions& opts = {}) {
    return prior_weights_from_masked(swap_by_mask(a, v), seed, opts);
}

struct HypothesisStat {
    HypothesisId id;
    double t = 0.0;
    double t_knockoff = 0.0;
    double w = 0.0;
    std::size_t n_rows = 0;
    bool degenerate = false;
    bool tied_columns = false;
    double lambda = 0.0;
    double xi = 0.0;
};

namespace detail {

// Lexicographic comparison of two columns restricted to the given rows.
inline bool column_less(const Matrix& a, Eigen::Index c1, Eigen::Index c2) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        if (a(i, c1) < a(i, c2)) return true;
        if (a(i, c1) > a(i, c2)) return false;
    }
    return false;
}

}  // namespace detail

/// Statistic for hypothesis (j, g). Rows of subgroup g are used; columns j
/// and j+p carry their true identities there while every other column stays
/// masked. The pair is placed in a canonical order before fitting so that
/// exchanging X_j and X~_j on the subgroup exchanges T and T~ exactly.
inline HypothesisStat hypothesis_statistic(const AugmentedData& a, const SwapMask& v, const PartitionFunction& psi,
                                           const PriorWeights& prior, const HypothesisId& id, const RngSeed& seed,
                                           const StatOptions& opts = {}) {
    if (!psi.valid(id)) throw IndexError("invalid hypothesis id");
    if (psi.variables() != a.p()) throw ShapeError("partition and data disagree on p");
    const auto masked = swap_by_mask(a, v);
    const auto rows = subgroup_rows(psi, a.z, id.variable, id.group);
    HypothesisStat st;
    st.id = id;
    st.n_rows = rows.size();
    if (rows.size() < std::max<std::size_t>(opts.path.cv.folds, 2)) {
        st.degenerate = true;
        return st;
    }
    const auto p = static_cast<Eigen::Index>(a.p());
    const auto j = static_cast<Eigen::Index>(id.variable);
    const auto m = a.z.cols();
    Matrix raw(static_cast<Eigen::Index>(rows.size()), 2 * p + m);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto i = static_cast<Eigen::Index>(rows[r]);
        raw.row(static_cast<Eigen::Index>(r)).head(2 * p) = masked.xx.row(i);
        raw(static_cast<Eigen::Index>(r), j) = a.xx(i, j);
        raw(static_cast<Eigen::Index>(r), j + p) = a.xx(i, j + p);
        raw.row(static_cast<Eigen::Index>(r)).tail(m) = a.z.row(i);
    }
    if (raw.col(j) == raw.col(j + p)) st.tied_columns = true;
    const bool flipped = detail::column_less(raw, j + p, j);
    if (flipped) raw.col(j).swap(raw.col(j + p));

    const Vector y = detail::take_rows(a.y, rows);
    const auto design = standardize(raw);
    const auto fit = fit_weighted_path(design, y, a.family, prior.design_weights(), seed, opts.path);
    double t_first = std::abs(fit.fit.coefficients[j]);
    double t_second = std::abs(fit.fit.coefficients[j + p]);
    if (flipped) std::swap(t_first, t_second);
    st.lambda = fit.lambda;
    st.xi = fit.xi;
    if (st.tied_columns) {
        const double mid = 0.5 * (t_first + t_second);
        st.t = st.t_knockoff = mid;
        st.w = 0.0;
    } else {
        st.t = t_first;
        st.t_knockoff = t_second;
        st.w = st.t - st.t_knockoff;
    }
    return st;
}

/// Statistics for every hypothesis of the partition.
struct StatVector {
    std::vector<HypothesisStat> entries;

    std::size_t size() const { return entries.size(); }

    const HypothesisStat& at(const HypothesisId& id) const {
        for (const auto& e : entries)
            if (e.id == id) return e;
        throw IndexError("hypothesis not present in the statistic vector");
    }

    std::vector<double> w() const {
        std::vector<double> out;
        out.reserve(entries.size());
        for (const auto& e : entries) out.push_back(e.w);
        return out;
    }

    std::string to_csv(const PartitionFunction& psi) const {
        csv::Writer wr({"variable", "subgroup_label", "subgroup_definition", "T", "Ttilde", "W", "n_rows"});
        for (const auto& e : entries)
            wr.row({std::to_string(e.id.variable + 1), std::to_string(e.id.group + 1), psi.definition(e.id.variable, e.id.group),
                    csv::format(e.t), csv::format(e.t_knockoff), csv::format(e.w), std::to_string(e.n_rows)});
        return wr.str();
    }
};

inline RngSeed hypothesis_seed(const RngSeed& seed, const HypothesisId& id) {
    return seed.child("hyp", id.variable).child(std::to_string(id.group));
}

/// Evaluates hypotheses in the given order; every entry uses its own child
/// stream, so the result does not depend on the order.
inline StatVector all_statistics(const AugmentedData& a, const SwapMask& v, const PartitionFunction& psi, const PriorWeights& prior,
                                 const RngSeed& seed, const StatOptions& opts, const std::vector<HypothesisId>& order) {
    std::map<HypothesisId, HypothesisStat> by_id;
    for (const auto& id : order) by_id[id] = hypothesis_statistic(a, v, psi, prior, id, hypothesis_seed(seed, id), opts);
    StatVector out;
    for (const auto& id : psi.hypotheses()) {
        auto it = by_id.find(id);
        if (it != by_id.end()) out.entries.push_back(it->second);
    }
    return out;
}

inline StatVector all_statistics(const AugmentedData& a, const SwapMask& v, const PartitionFunction& psi, const PriorWeights& prior,
                                 const RngSeed& seed, const StatOptions& opts = {}) {
    return all_statistics(a, v, psi, prior, seed, opts, psi.hypotheses());
}

}  // namespace sskf
