#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "sskf/csv.hpp"
#include "sskf/errors.hpp"
#include "sskf/partition.hpp"
#include "sskf/rng.hpp"
#include "sskf/stats.hpp"

namespace sskf {

struct SeqStepResult {
    std::vector<std::size_t> rejected;  // indices into the statistic list, ascending
    double threshold = std::numeric_limits<double>::infinity();
};

/// Selective SeqStep+ / knockoff+ threshold:
///   tau = min{ t in {|W|: W != 0} : (1 + #{W <= -t}) / max(1, #{W >= t}) <= q }
/// and rejection of every W >= tau.
inline SeqStepResult seqstep_plus(const std::vector<double>& w, double q) {
    if (!(q > 0.0 && q < 1.0)) throw ParameterError("q must lie in (0, 1)");
    std::vector<double> cand;
    for (double x : w)
        if (x != 0.0) cand.push_back(std::abs(x));
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    SeqStepResult res;
    for (double t : cand) {
        std::size_t neg = 0, pos = 0;
        for (double x : w) {
            neg += x <= -t;
            pos += x >= t;
        }
        if ((1.0 + static_cast<double>(neg)) / static_cast<double>(std::max<std::size_t>(1, pos)) <= q) {
            res.threshold = t;
            break;
        }
    }
    if (std::isfinite(res.threshold))
        for (std::size_t k = 0; k < w.size(); ++k)
            if (w[k] >= res.threshold) res.rejected.push_back(k);
    return res;
}

/// Rejected hypotheses, or rejected variables when `variable_level` is set.
struct RejectionSet {
    std::vector<HypothesisId> rejected;
    double threshold = std::numeric_limits<double>::infinity();
    double q = 0.1;
    bool variable_level = false;

    std::size_t size() const { return rejected.size(); }
    bool contains(const HypothesisId& id) const { return std::find(rejected.begin(), rejected.end(), id) != rejected.end(); }
};

inline RejectionSet seqstep_plus(const StatVector& stats, double q) {
    const auto res = seqstep_plus(stats.w(), q);
    RejectionSet out;
    out.q = q;
    out.threshold = res.threshold;
    for (auto k : res.rejected) out.rejected.push_back(stats.entries[k].id);
    return out;
}

inline std::string rejections_csv(const RejectionSet& rs, const StatVector& stats, const PartitionFunction& psi) {
    csv::Writer w({"variable", "subgroup_definition", "W", "threshold"});
    for (const auto& id : rs.rejected) {
        const auto& e = stats.at(id);
        w.row({std::to_string(id.variable + 1), psi.definition(id.variable, id.group), csv::format(e.w), csv::format(rs.threshold)});
    }
    return w.str();
}

namespace detail {

inline double binom_pmf_half(long k, long m) {
    if (k < 0 || k > m) return 0.0;
    return std::exp(std::lgamma(m + 1.0) - std::lgamma(k + 1.0) - std::lgamma(m - k + 1.0) - static_cast<double>(m) * std::log(2.0));
}

inline double binom_cdf_half(long k, long m) {
    if (k < 0) return 0.0;
    if (k >= m) return 1.0;
    double s = 0.0;
    for (long i = 0; i <= k; ++i) s += binom_pmf_half(i, m);
    return std::min(1.0, s);
}

}  // namespace detail

struct PcPValue {
    std::size_t variable = 0;
    std::size_t r = 1;
    double value = 1.0;
    double order_stat = 0.0;
    std::size_t n_negative = 0;
    std::size_t n_zero = 0;
};

/// Partial-conjunction p-value from the signs of one variable's statistics:
///   p = Psi(n- - 1; M) + u * psi(n-; M),  M = max(G - r + 1 - n0, 0),
/// with Psi/psi the Binomial(M, 1/2) cdf/pmf.
inline PcPValue pc_pvalue(const std::vector<double>& w_row, std::size_t r, double u) {
    const auto g = w_row.size();
    if (r < 1 || r > g) throw ParameterError("partial-conjunction r must lie in [1, G]");
    if (!(u >= 0.0 && u <= 1.0)) throw ParameterError("u must lie in [0, 1]");
    PcPValue out;
    out.r = r;
    for (double x : w_row) {
        out.n_negative += x < 0.0;
        out.n_zero += x == 0.0;
    }
    const long big_m = std::max<long>(static_cast<long>(g) - static_cast<long>(r) + 1 - static_cast<long>(out.n_zero), 0);
    const long neg = static_cast<long>(out.n_negative);
    const double v = detail::binom_cdf_half(neg - 1, big_m) + u * detail::binom_pmf_half(neg, big_m);
    out.value = std::clamp(v, 0.0, 1.0);
    return out;
}

/// Product of the r largest |W|.
inline double pc_order_stat(const std::vector<double>& abs_w_row, std::size_t r) {
    if (r < 1 || r > abs_w_row.size()) throw ParameterError("partial-conjunction r must lie in [1, G]");
    std::vector<double> a;
    for (double x : abs_w_row) a.push_back(std::abs(x));
    std::sort(a.begin(), a.end(), std::greater<>());
    double prod = 1.0;
    for (std::size_t k = 0; k < r; ++k) prod *= a[k];
    return prod;
}

struct RobustResult {
    RejectionSet rejections;  // variable level: group index is 0
    std::vector<PcPValue> pvalues;
    std::vector<std::size_t> order;  // variables by decreasing order statistic
    std::size_t k = 0;
};

/// Selective SeqStep+ over partial-conjunction p-values ordered by the
/// order statistic, cutoff c = 1/2. Rows shorter than G are padded with 0.
inline RobustResult robust_filter(const std::vector<std::vector<double>>& w, std::size_t r, double q, const RngSeed& seed,
                                  double c = 0.5) {
    if (!(q > 0.0 && q < 1.0)) throw ParameterError("q must lie in (0, 1)");
    std::size_t g = 0;
    for (const auto& row : w) g = std::max(g, row.size());
    RobustResult res;
    res.rejections.q = q;
    res.rejections.variable_level = true;
    const auto p = w.size();
    if (p == 0) return res;
    if (r < 1 || r > g) throw ParameterError("partial-conjunction r must lie in [1, G]");
    auto eng = seed.child("pc").engine();
    const auto tiebreak = permutation(eng, p);
    for (std::size_t j = 0; j < p; ++j) {
        auto row = w[j];
        row.resize(g, 0.0);
        auto u_eng = seed.child("u", j).engine();
        auto pv = pc_pvalue(row, r, uniform01(u_eng));
        pv.variable = j;
        pv.order_stat = pc_order_stat(row, r);
        res.pvalues.push_back(pv);
    }
    res.order.resize(p);
    std::iota(res.order.begin(), res.order.end(), std::size_t{0});
    std::sort(res.order.begin(), res.order.end(), [&](std::size_t a, std::size_t b) {
        if (res.pvalues[a].order_stat != res.pvalues[b].order_stat) return res.pvalues[a].order_stat > res.pvalues[b].order_stat;
        return tiebreak[a] < tiebreak[b];
    });
    const double bound = q * (1.0 - c) / c;
    std::size_t above = 0, below = 0;
    for (std::size_t k = 0; k < p; ++k) {
        const double pv = res.pvalues[res.order[k]].value;
        (pv > c ? above : below) += 1;
        if ((1.0 + static_cast<double>(above)) / static_cast<double>(std::max<std::size_t>(1, below)) <= bound) res.k = k + 1;
    }
    for (std::size_t k = 0; k < res.k; ++k) {
        const auto j = res.order[k];
        if (res.pvalues[j].value <= c) res.rejections.rejected.push_back({j, 0});
    }
    std::sort(res.rejections.rejected.begin(), res.rejections.rejected.end());
    res.rejections.threshold = c;
    return res;
}

/// Variable-by-group statistic rows from a StatVector.
inline std::vector<std::vector<double>> statistic_rows(const StatVector& stats, const PartitionFunction& psi, std::size_t pad_to = 0) {
    std::vector<std::vector<double>> rows(psi.variables());
    for (std::size_t j = 0; j < psi.variables(); ++j) rows[j].assign(std::max(pad_to, psi.groups(j)), 0.0);
    for (const auto& e : stats.entries) rows[e.id.variable][e.id.group] = e.w;
    return rows;
}

}  // namespace sskf
