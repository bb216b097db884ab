#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sskf/errors.hpp"
#include "sskf/filter.hpp"
#include "sskf/glm.hpp"
#include "sskf/knockoffs.hpp"
#include "sskf/metrics.hpp"
#include "sskf/stats.hpp"
#include "sskf/subgroup.hpp"
#include "sskf/tabular.hpp"

namespace sskf {

/// How knockoffs are drawn for a design.
struct KnockoffModel {
    enum class Kind { iid_product, discrete_joint } kind = Kind::iid_product;
    std::vector<MarginalPmf> marginals;
    DiscreteJointSpec joint;
    KnockoffKernel kernel = KnockoffKernel::metropolized;

    Matrix generate(const Matrix& x, const RngSeed& seed) const {
        if (kind == Kind::iid_product) return knockoffs_iid_product(x, marginals, seed);
        return knockoffs_discrete_joint(x, joint, seed, kernel);
    }
};

struct MethodOptions {
    double q = 0.1;
    double swap_probability = 0.5;
    std::size_t r = 2;  // partial conjunction
    LearnOptions learn;
    StatOptions stats;
};

struct MethodResult {
    std::string method;
    RejectionSet rejections;
    PartitionFunction psi;
    StatVector stats;
    std::vector<std::vector<double>> w_rows;
    std::optional<RobustResult> robust;
    std::vector<std::size_t> rows;  // rows the statistics were computed on
};

enum class Method { sskf, naive, split, vanilla, robust_sskf, robust_split };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::sskf: return "sskf";
        case Method::naive: return "naive";
        case Method::split: return "split";
        case Method::vanilla: return "vanilla";
        case Method::robust_sskf: return "robust-sskf";
        case Method::robust_split: return "robust-split";
    }
    return "?";
}

inline Method method_from_string(const std::string& s) {
    for (auto m : {Method::sskf, Method::naive, Method::split, Method::vanilla, Method::robust_sskf, Method::robust_split})
        if (to_string(m) == s) return m;
    throw ConfigError("unknown method '" + s + "'");
}

inline bool is_robust(Method m) { return m == Method::robust_sskf || m == Method::robust_split; }

namespace detail {

inline std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = i;
    return r;
}

// Partition from the given mask, statistics, SeqStep+.
inline MethodResult masked_pipeline(const AugmentedData& a, const SwapMask& v, const MethodOptions& opts, const RngSeed& seed) {
    MethodResult res;
    res.psi = learn_partition(a, v, opts.learn, seed.child("learn")).psi;
    const auto prior = prior_weights(a, v, seed.child("prior"), opts.stats);
    res.stats = all_statistics(a, v, res.psi, prior, seed.child("stats"), opts.stats);
    res.rejections = seqstep_plus(res.stats, opts.q);
    res.rows = all_rows(a.n());
    return res;
}

inline void apply_robust(MethodResult& res, const MethodOptions& opts, const RngSeed& seed) {
    const std::size_t g = std::size_t{1} << opts.learn.g_max;
    res.w_rows = statistic_rows(res.stats, res.psi, g);
    res.robust = robust_filter(res.w_rows, std::min(opts.r, g), opts.q, seed.child("robust"));
    res.rejections = res.robust->rejections;
}

}  // namespace detail

inline MethodResult run_sskf(const AugmentedData& a, const MethodOptions& opts, const RngSeed& seed) {
    const auto v = make_swap_mask(a.n(), a.p(), opts.swap_probability, seed.child("mask"));
    auto res = detail::masked_pipeline(a, v, opts, seed);
    res.method = "sskf";
    return res;
}

/// Partition learnt from the unmasked data, then tested on the same data.
inline MethodResult run_naive(const AugmentedData& a, const MethodOptions& opts, const RngSeed& seed) {
    const SwapMask v(a.n(), a.p());
    auto res = detail::masked_pipeline(a, v, opts, seed);
    res.method = "naive";
    return res;
}

/// Partition from a random half, statistics on the other half.
inline MethodResult run_split(const AugmentedData& a, const MethodOptions& opts, const RngSeed& seed) {
    auto eng = seed.child("split").engine();
    const auto perm = permutation(eng, a.n());
    const auto half = a.n() / 2;
    std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(half));
    std::vector<std::size_t> test(perm.begin() + static_cast<std::ptrdiff_t>(half), perm.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    const auto a_train = a.rows(train);
    const auto a_test = a.rows(test);
    const SwapMask none(train.size(), a.p());
    MethodResult res;
    res.method = "split";
    res.psi = learn_partition(a_train, none, opts.learn, seed.child("learn")).psi;
    const auto v = make_swap_mask(a_test.n(), a.p(), opts.swap_probability, seed.child("mask"));
    const auto prior = prior_weights(a_test, v, seed.child("prior"), opts.stats);
    res.stats = all_statistics(a_test, v, res.psi, prior, seed.child("stats"), opts.stats);
    res.rejections = seqstep_plus(res.stats, opts.q);
    res.rows = std::move(test);
    return res;
}

/// Population-wide knockoff filter: lasso on [x, x~, z], W_j = |b_j| - |b~_j|.
inline MethodResult run_vanilla(const AugmentedData& a, const MethodOptions& opts, const RngSeed& seed) {
    a.validate();
    const auto p = static_cast<Eigen::Index>(a.p());
    Matrix raw(a.xx.rows(), 2 * p + a.z.cols());
    raw << a.xx, a.z;
    const auto cv = cv_lasso(standardize(raw), a.y, a.family, seed.child("vanilla"), opts.learn.cv);
    MethodResult res;
    res.method = "vanilla";
    res.psi = PartitionFunction::trivial(a.p(), a.covariate_names());
    for (Eigen::Index j = 0; j < p; ++j) {
        HypothesisStat st;
        st.id = {static_cast<std::size_t>(j), 0};
        st.t = std::abs(cv.fit.coefficients[j]);
        st.t_knockoff = std::abs(cv.fit.coefficients[j + p]);
        st.w = st.t - st.t_knockoff;
        if (a.xx.col(j) == a.xx.col(j + p)) {
            st.tied_columns = true;
            st.t = st.t_knockoff = 0.5 * (st.t + st.t_knockoff);
            st.w = 0.0;
        }
        st.n_rows = a.n();
        st.lambda = cv.chosen_lambda;
        st.degenerate = cv.degenerate;
        res.stats.entries.push_back(st);
    }
    res.rejections = seqstep_plus(res.stats, opts.q);
    res.rows = detail::all_rows(a.n());
    return res;
}

/// SSKF statistics combined per variable by the partial-conjunction filter.
inline MethodResult run_robust_sskf(const AugmentedData& a, const MethodOptions& opts, const RngSeed& seed) {
    auto res = run_sskf(a, opts, seed);
    detail::apply_robust(res, opts, seed);
    res.method = "robust-sskf";
    return res;
}

inline MethodResult run_robust_split(const AugmentedData& a, const MethodOptions& opts, const RngSeed& seed) {
    auto res = run_split(a, opts, seed);
    detail::apply_robust(res, opts, seed);
    res.method = "robust-split";
    return res;
}

inline MethodResult run_method(Method m, const AugmentedData& a, const MethodOptions& opts, const RngSeed& seed) {
    switch (m) {
        case Method::sskf: return run_sskf(a, opts, seed);
        case Method::naive: return run_naive(a, opts, seed);
        case Method::split: return run_split(a, opts, seed);
        case Method::vanilla: return run_vanilla(a, opts, seed);
        case Method::robust_sskf: return run_robust_sskf(a, opts, seed);
        case Method::robust_split: return run_robust_split(a, opts, seed);
    }
    throw ParameterError("unknown method");
}

/// Evaluates a method on the rows its statistics were computed on.
inline EvalReport evaluate_method(const MethodResult& res, const GroundTruthModel& truth, const Matrix& z, const MethodOptions& opts,
                                  const Matrix* shifted_z = nullptr) {
    const Matrix zr = res.rows.size() == static_cast<std::size_t>(z.rows()) ? z : detail::take_rows(z, res.rows);
    EvalOptions eo;
    eo.shifted_z = shifted_z;
    if (res.robust) eo.pc_r = res.robust->pvalues.empty() ? opts.r : res.robust->pvalues.front().r;
    return evaluate(res.rejections, res.robust ? nullptr : &res.stats, res.psi, truth, zr, eo);
}

}  // namespace sskf
