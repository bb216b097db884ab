#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sskf/errors.hpp"
#include "sskf/glm.hpp"
#include "sskf/partition.hpp"
#include "sskf/rng.hpp"
#include "sskf/tabular.hpp"

namespace sskf {

struct InteractionOptions {
    bool discretize = true;
    /// Covariates allowed to interact. Empty means every covariate.
    std::vector<std::size_t> candidates;
};

/// Where each interaction column of the design came from.
struct InteractionLayout {
    std::size_t p = 0;
    std::size_t m = 0;
    std::vector<std::size_t> candidates;
    std::vector<double> thresholds;  // per covariate
    std::vector<bool> binary;        // per covariate

    std::size_t main_columns() const { return 2 * p; }
    std::size_t covariate_column(std::size_t l) const { return 2 * p + l; }
    /// Column of z_{candidates[c]} * xx_j.
    std::size_t interaction_column(std::size_t c, std::size_t j) const { return 2 * p + m + c * 2 * p + j; }
    std::size_t columns() const { return 2 * p + m + candidates.size() * 2 * p; }
};

namespace detail {

inline bool is_binary_column(const Eigen::Ref<const Vector>& col) {
    for (Eigen::Index i = 0; i < col.size(); ++i)
        if (col[i] != 0.0 && col[i] != 1.0) return false;
    return true;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Binary covariates split at 0.5, others at their sample median.
inline InteractionLayout interaction_layout(const Matrix& z, std::size_t p, const InteractionOptions& opts = {}) {
    InteractionLayout lay;
    lay.p = p;
    lay.m = static_cast<std::size_t>(z.cols());
    lay.thresholds.assign(lay.m, 0.5);
    lay.binary.assign(lay.m, true);
    for (std::size_t l = 0; l < lay.m; ++l) {
        const auto col = z.col(static_cast<Eigen::Index>(l));
        if (!detail::is_binary_column(col)) {
            lay.binary[l] = false;
            lay.thresholds[l] = detail::median(std::vector<double>(col.data(), col.data() + col.size()));
        }
    }
    if (opts.candidates.empty()) {
        for (std::size_t l = 0; l < lay.m; ++l) lay.candidates.push_back(l);
    } else {
        lay.candidates = opts.candidates;
        std::sort(lay.candidates.begin(), lay.candidates.end());
        lay.candidates.erase(std::unique(lay.candidates.begin(), lay.candidates.end()), lay.candidates.end());
        for (auto l : lay.candidates)
            if (l >= lay.m) throw IndexError("interaction candidate outside the covariate range");
    }
    return lay;
}

/// [xx | z | z_l * xx_j for each candidate l and each of the 2p columns],
/// standardized. Interaction columns use binarized covariates when
/// `discretize` is set.
inline DesignMatrix build_interaction_design(const Matrix& xx, const Matrix& z, const InteractionLayout& lay,
                                             bool discretize = true) {
    if (xx.rows() != z.rows()) throw ShapeError("xx and z row counts differ");
    if (static_cast<std::size_t>(xx.cols()) != 2 * lay.p || static_cast<std::size_t>(z.cols()) != lay.m)
        throw ShapeError("design layout does not match inputs");
    const auto n = xx.rows();
    Matrix raw(n, static_cast<Eigen::Index>(lay.columns()));
    raw.leftCols(xx.cols()) = xx;
    raw.middleCols(xx.cols(), z.cols()) = z;
    std::vector<std::string> names;
    for (std::size_t j = 0; j < 2 * lay.p; ++j)
        names.push_back(j < lay.p ? "X" + std::to_string(j + 1) : "Xk" + std::to_string(j - lay.p + 1));
    for (std::size_t l = 0; l < lay.m; ++l) names.push_back("Z" + std::to_string(l + 1));
    for (std::size_t c = 0; c < lay.candidates.size(); ++c) {
        const auto l = lay.candidates[c];
        Vector zl = z.col(static_cast<Eigen::Index>(l));
        if (discretize && !lay.binary[l]) zl = (zl.array() > lay.thresholds[l]).cast<double>();
        for (std::size_t j = 0; j < 2 * lay.p; ++j) {
            raw.col(static_cast<Eigen::Index>(lay.interaction_column(c, j))) = zl.cwiseProduct(xx.col(static_cast<Eigen::Index>(j)));
            names.push_back("Z" + std::to_string(l + 1) + ":" + names[j]);
        }
    }
    return standardize(raw, std::move(names));
}

/// Coefficients of the interaction lasso, split by role.
struct InteractionFit {
    Vector main;        // 2p
    Matrix gamma;       // m x 2p, zero rows for non-candidates
    Vector covariates;  // m
    double lambda = 0.0;
    bool degenerate = false;
};

inline InteractionFit unpack_interaction_fit(const GlmFit& fit, const InteractionLayout& lay) {
    InteractionFit out;
    const auto p2 = static_cast<Eigen::Index>(2 * lay.p);
    out.main = fit.coefficients.head(p2);
    out.covariates = fit.coefficients.segment(p2, static_cast<Eigen::Index>(lay.m));
    out.gamma = Matrix::Zero(static_cast<Eigen::Index>(lay.m), p2);
    for (std::size_t c = 0; c < lay.candidates.size(); ++c)
        for (std::size_t j = 0; j < 2 * lay.p; ++j)
            out.gamma(static_cast<Eigen::Index>(lay.candidates[c]), static_cast<Eigen::Index>(j)) =
                fit.coefficients[static_cast<Eigen::Index>(lay.interaction_column(c, j))];
    out.lambda = fit.lambda;
    return out;
}

/// Per variable, up to g_max covariates with the largest nonzero
/// |gamma_{l,j}| + |gamma_{l,j+p}|; ties in random order. Each set is
/// returned in ascending covariate order.
inline std::vector<std::vector<std::size_t>> select_interactions(const InteractionFit& fit, std::size_t g_max, const RngSeed& seed) {
    const auto p = static_cast<std::size_t>(fit.gamma.cols() / 2);
    const auto m = static_cast<std::size_t>(fit.gamma.rows());
    std::vector<std::vector<std::size_t>> out(p);
    for (std::size_t j = 0; j < p; ++j) {
        auto eng = seed.child("ties", j).engine();
        const auto rank = permutation(eng, m);
        std::vector<std::size_t> tiebreak(m);
        for (std::size_t k = 0; k < m; ++k) tiebreak[rank[k]] = k;
        std::vector<std::pair<double, std::size_t>> scored;
        for (std::size_t l = 0; l < m; ++l) {
            const double s = std::abs(fit.gamma(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j))) +
                             std::abs(fit.gamma(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j + p)));
            if (s > 0.0) scored.push_back({s, l});
        }
        std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return tiebreak[a.second] < tiebreak[b.second];
        });
        for (std::size_t k = 0; k < std::min(g_max, scored.size()); ++k) out[j].push_back(scored[k].second);
        std::sort(out[j].begin(), out[j].end());
    }
    return out;
}

inline PartitionFunction build_partition(const std::vector<std::vector<std::size_t>>& i_hat, const std::vector<double>& thresholds,
                                         const std::vector<bool>& binary, std::vector<std::string> covariate_names = {}) {
    std::vector<std::vector<CovariateSplit>> splits(i_hat.size());
    for (std::size_t j = 0; j < i_hat.size(); ++j) {
        auto sorted = i_hat[j];
        std::sort(sorted.begin(), sorted.end());
        for (auto l : sorted) {
            if (l >= thresholds.size() || l >= binary.size()) throw IndexError("selected covariate has no threshold");
            splits[j].push_back({l, thresholds[l], static_cast<bool>(binary[l])});
        }
    }
    return PartitionFunction(std::move(splits), std::move(covariate_names));
}

/// All covariates binary, split at 0.5.
inline PartitionFunction build_partition(const std::vector<std::vector<std::size_t>>& i_hat, std::size_t m,
                                         std::vector<std::string> covariate_names = {}) {
    return build_partition(i_hat, std::vector<double>(m, 0.5), std::vector<bool>(m, true), std::move(covariate_names));
}

struct LearnOptions {
    std::size_t g_max = 2;
    InteractionOptions interactions;
    CvOptions cv;
};

struct LearnResult {
    PartitionFunction psi;
    InteractionFit fit;
    std::vector<std::vector<std::size_t>> selected;
};

/// Learns the partition from an already masked augmented matrix. This is the
/// only data the procedure ever sees.
inline LearnResult learn_partition_from_masked(const AugmentedData& masked, const LearnOptions& opts, const RngSeed& seed) {
    masked.validate();
    const auto lay = interaction_layout(masked.z, masked.p(), opts.interactions);
    const auto design = build_interaction_design(masked.xx, masked.z, lay, opts.interactions.discretize);
    const auto cv = cv_lasso(design, masked.y, masked.family, seed.child("cv"), opts.cv);
    LearnResult res;
    res.fit = unpack_interaction_fit(cv.fit, lay);
    res.fit.degenerate = cv.degenerate;
    res.selected = select_interactions(res.fit, opts.g_max, seed.child("select"));
    res.psi = build_partition(res.selected, lay.thresholds, lay.binary, masked.covariate_names());
    return res;
}

/// Knockoff-invariant partition: depends on (a, v) only through swap_by_mask(a, v).
inline LearnResult learn_partition(const AugmentedData& a, const SwapMask& v, const LearnOptions& opts, const RngSeed& seed) {
    return learn_partition_from_masked(swap_by_mask(a, v), opts, seed);
}

}  // namespace sskf
