#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "sskf/csv.hpp"
#include "sskf/errors.hpp"
#include "sskf/rng.hpp"
#include "sskf/tabular.hpp"

namespace sskf {

/// Finite marginal distribution of one coordinate.
struct MarginalPmf {
    std::vector<double> values;
    std::vector<double> probs;

    void validate() const {
        if (values.empty() || values.size() != probs.size()) throw ParameterError("marginal needs matching values and probabilities");
        double total = 0.0;
        for (double q : probs) {
            if (!(q >= 0.0)) throw ParameterError("marginal probabilities must be nonnegative");
            total += q;
        }
        if (std::abs(total - 1.0) > 1e-12) throw ParameterError("marginal probabilities must sum to 1");
    }

    bool contains(double v) const { return std::find(values.begin(), values.end(), v) != values.end(); }
};

inline MarginalPmf bernoulli_marginal(double prob) {
    if (!(prob >= 0.0 && prob <= 1.0)) throw ParameterError("Bernoulli probability must lie in [0, 1]");
    return {{0.0, 1.0}, {1.0 - prob, prob}};
}

namespace detail {

inline double draw_from(Engine& eng, const std::vector<double>& values, const std::vector<double>& probs) {
    const double u = uniform01(eng);
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        if (probs[k] <= 0.0) continue;
        last = k;
        acc += probs[k];
        if (u < acc) return values[k];
    }
    return values[last];
}

}  // namespace detail

/// Knockoffs for mutually independent coordinates: fresh independent draws
/// from each marginal. Never looks at the outcome.
inline Matrix knockoffs_iid_product(const Matrix& x, const std::vector<MarginalPmf>& marginals, const RngSeed& seed) {
    if (static_cast<Eigen::Index>(marginals.size()) != x.cols()) throw ShapeError("one marginal per column required");
    for (const auto& m : marginals) m.validate();
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const auto& m = marginals[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            if (!m.contains(x(i, j))) throw DataError("value outside the marginal support in column " + std::to_string(j + 1));
        auto eng = seed.child("iid", static_cast<std::size_t>(j)).engine();
        for (Eigen::Index i = 0; i < x.rows(); ++i) out(i, j) = detail::draw_from(eng, m.values, m.probs);
    }
    return out;
}

/// Distribution over finitely many p-vectors.
struct DiscreteJointSpec {
    std::vector<std::vector<double>> support;
    std::vector<double> pmf;

    std::size_t dimension() const { return support.empty() ? 0 : support.front().size(); }

    void validate() const {
        if (support.empty()) throw ParameterError("discrete joint needs at least one support point");
        if (support.size() != pmf.size()) throw ParameterError("support and pmf sizes differ");
        const auto p = dimension();
        double total = 0.0;
        for (std::size_t k = 0; k < support.size(); ++k) {
            if (support[k].size() != p) throw ParameterError("support vectors differ in length");
            if (!(pmf[k] >= 0.0)) throw ParameterError("pmf entries must be nonnegative");
            total += pmf[k];
            for (std::size_t r = 0; r < k; ++r)
                if (support[r] == support[k]) throw ParameterError("support vectors must be distinct");
        }
        if (std::abs(total - 1.0) > 1e-12) throw ParameterError("pmf must sum to 1");
    }

    /// Product of independent marginals as a joint over the Cartesian product.
    static DiscreteJointSpec product(const std::vector<MarginalPmf>& marginals) {
        DiscreteJointSpec spec;
        spec.support.push_back({});
        spec.pmf.push_back(1.0);
        for (const auto& m : marginals) {
            m.validate();
            DiscreteJointSpec next;
            for (std::size_t k = 0; k < spec.support.size(); ++k)
                for (std::size_t v = 0; v < m.values.size(); ++v) {
                    auto s = spec.support[k];
                    s.push_back(m.values[v]);
                    next.support.push_back(std::move(s));
                    next.pmf.push_back(spec.pmf[k] * m.probs[v]);
                }
            spec = std::move(next);
        }
        return spec;
    }
};

/// Transition used at each step of the sequential construction.
///   metropolized: propose uniformly among the coordinate's values and accept
///                 by the Metropolis ratio of the running joint density;
///                 the variable order is a fresh random permutation per row.
///   conditional:  draw from the exact conditional given everything so far
///                 (sequential conditional independent pairs, natural order).
enum class KnockoffKernel { metropolized, conditional };

inline std::string to_string(KnockoffKernel k) { return k == KnockoffKernel::metropolized ? "metropolized" : "conditional"; }

inline KnockoffKernel kernel_from_string(const std::string& s) {
    if (s == "metropolized") return KnockoffKernel::metropolized;
    if (s == "conditional") return KnockoffKernel::conditional;
    throw ParameterError("unknown knockoff kernel '" + s + "'");
}

namespace detail {

/// Coordinates encoded as value indices in a mixed-radix integer.
class JointCoder {
public:
    explicit JointCoder(const DiscreteJointSpec& spec) {
        const auto p = spec.dimension();
        values_.resize(p);
        for (const auto& s : spec.support)
            for (std::size_t j = 0; j < p; ++j) values_[j].push_back(s[j]);
        for (auto& v : values_) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
        radix_.assign(p, 1);
        for (std::size_t j = 1; j < p; ++j) {
            radix_[j] = radix_[j - 1] * values_[j - 1].size();
            if (radix_[j] > (std::uint64_t{1} << 40)) throw ParameterError("discrete joint support too large");
        }
        for (std::size_t k = 0; k < spec.support.size(); ++k) pmf_[encode(spec.support[k])] += spec.pmf[k];
    }

    std::size_t dimension() const { return values_.size(); }
    std::size_t levels(std::size_t j) const { return values_[j].size(); }
    double value(std::size_t j, std::size_t idx) const { return values_[j][idx]; }

    std::size_t index_of(std::size_t j, double v) const {
        const auto& vals = values_[j];
        auto it = std::lower_bound(vals.begin(), vals.end(), v);
        if (it == vals.end() || *it != v) return vals.size();
        return static_cast<std::size_t>(it - vals.begin());
    }

    std::uint64_t encode(const std::vector<double>& row) const {
        std::uint64_t code = 0;
        for (std::size_t j = 0; j < row.size(); ++j) code += radix_[j] * index_of(j, row[j]);
        return code;
    }

    std::size_t digit(std::uint64_t code, std::size_t j) const { return static_cast<std::size_t>((code / radix_[j]) % values_[j].size()); }

    std::uint64_t with_digit(std::uint64_t code, std::size_t j, std::size_t idx) const {
        return code - radix_[j] * digit(code, j) + radix_[j] * idx;
    }

    double pmf(std::uint64_t code) const {
        auto it = pmf_.find(code);
        return it == pmf_.end() ? 0.0 : it->second;
    }

private:
    std::vector<std::vector<double>> values_;
    std::vector<std::uint64_t> radix_;
    std::unordered_map<std::uint64_t, double> pmf_;
};

/// Running joint density f_k(x, xt_{1:k}) of one row as a function of the
/// observed coordinates, with the already sampled knockoff entries fixed.
class SequentialDensity {
public:
    SequentialDensity(const JointCoder& coder, KnockoffKernel kernel, std::vector<std::size_t> order)
        : coder_(coder), kernel_(kernel), order_(std::move(order)), drawn_(order_.size()), memo_(order_.size() + 1) {}

    /// Transition probabilities at step k (0-based) for each value index.
    std::vector<double> transition(std::size_t k, std::uint64_t state) {
        const std::size_t j = order_[k];
        const std::size_t levels = coder_.levels(j);
        std::vector<double> probs(levels, 0.0);
        const double here = density(k, state);
        if (here <= 0.0) return probs;
        const std::size_t a = coder_.digit(state, j);
        if (kernel_ == KnockoffKernel::conditional) {
            double total = 0.0;
            for (std::size_t b = 0; b < levels; ++b) {
                probs[b] = density(k, coder_.with_digit(state, j, b));
                total += probs[b];
            }
            for (auto& q : probs) q /= total;
        } else {
            double moved = 0.0;
            for (std::size_t b = 0; b < levels; ++b) {
                if (b == a) continue;
                const double other = density(k, coder_.with_digit(state, j, b));
                probs[b] = std::min(1.0, other / here) / static_cast<double>(levels);
                moved += probs[b];
            }
            probs[a] = std::max(0.0, 1.0 - moved);
        }
        return probs;
    }

    void record(std::size_t k, std::size_t value_index) { drawn_[k] = value_index; }

    /// f_k at the given observed state (k steps already drawn).
    double density(std::size_t k, std::uint64_t state) {
        if (k == 0) return coder_.pmf(state);
        auto& memo = memo_[k];
        auto it = memo.find(state);
        if (it != memo.end()) return it->second;
        const double prev = density(k - 1, state);
        double val = 0.0;
        if (prev > 0.0) val = prev * transition(k - 1, state)[drawn_[k - 1]];
        memo.emplace(state, val);
        return val;
    }

private:
    const JointCoder& coder_;
    KnockoffKernel kernel_;
    std::vector<std::size_t> order_;
    std::vector<std::size_t> drawn_;
    std::vector<std::unordered_map<std::uint64_t, double>> memo_;
};

}  // namespace detail

/// Exact knockoffs for a small-support discrete distribution. Each row is
/// processed independently with its own derived random stream.
inline Matrix knockoffs_discrete_joint(const Matrix& x, const DiscreteJointSpec& spec, const RngSeed& seed,
                                       KnockoffKernel kernel = KnockoffKernel::metropolized) {
    spec.validate();
    const auto p = spec.dimension();
    if (static_cast<std::size_t>(x.cols()) != p) throw ShapeError("knockoff spec dimension differs from X");
    detail::JointCoder coder(spec);
    Matrix out(x.rows(), x.cols());
    std::vector<double> row(p);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            row[j] = x(i, static_cast<Eigen::Index>(j));
            if (coder.index_of(j, row[j]) == coder.levels(j)) throw DataError("row " + std::to_string(i + 1) + " is outside the support");
        }
        const auto state = coder.encode(row);
        if (coder.pmf(state) <= 0.0) throw DataError("row " + std::to_string(i + 1) + " is outside the support");
        auto eng = seed.child("row", static_cast<std::size_t>(i)).engine();
        std::vector<std::size_t> order(p);
        if (kernel == KnockoffKernel::metropolized)
            order = permutation(eng, p);
        else
            for (std::size_t j = 0; j < p; ++j) order[j] = j;
        detail::SequentialDensity dens(coder, kernel, order);
        for (std::size_t k = 0; k < p; ++k) {
            const auto probs = dens.transition(k, state);
            const double u = uniform01(eng);
            double acc = 0.0;
            std::size_t pick = coder.digit(state, order[k]);
            for (std::size_t b = 0; b < probs.size(); ++b) {
                if (probs[b] <= 0.0) continue;
                acc += probs[b];
                pick = b;
                if (u < acc) break;
            }
            dens.record(k, pick);
            out(i, static_cast<Eigen::Index>(order[k])) = coder.value(order[k], pick);
        }
    }
    return out;
}

/// Means, standard deviations and correlations of [X, X~].
struct KnockoffDiagnostics {
    std::vector<std::string> names;
    Vector means;
    Vector sds;
    Matrix corr;
    std::vector<bool> constant;

    std::string summary_csv() const {
        csv::Writer w({"column", "mean", "sd"});
        for (Eigen::Index c = 0; c < means.size(); ++c)
            w.row({names[static_cast<std::size_t>(c)], csv::format(means[c]), csv::format(sds[c])});
        return w.str();
    }

    std::string correlation_csv() const {
        std::vector<std::string> header{"column"};
        header.insert(header.end(), names.begin(), names.end());
        csv::Writer w(header);
        for (Eigen::Index r = 0; r < corr.rows(); ++r) {
            std::vector<std::string> fields{names[static_cast<std::size_t>(r)]};
            for (Eigen::Index c = 0; c < corr.cols(); ++c) fields.push_back(csv::format(corr(r, c)));
            w.row(fields);
        }
        return w.str();
    }
};

inline KnockoffDiagnostics knockoff_diagnostics(const Matrix& x, const Matrix& xt, std::vector<std::string> names = {}) {
    if (x.rows() != xt.rows() || x.cols() != xt.cols()) throw ShapeError("X and knockoffs differ in shape");
    if (x.rows() < 2) throw InsufficientDataError("diagnostics need at least two rows");
    const auto p = x.cols();
    Matrix both(x.rows(), 2 * p);
    both << x, xt;
    if (names.empty()) {
        for (Eigen::Index j = 0; j < p; ++j) names.push_back("X" + std::to_string(j + 1));
        for (Eigen::Index j = 0; j < p; ++j) names.push_back("Xk" + std::to_string(j + 1));
    }
    if (static_cast<Eigen::Index>(names.size()) != 2 * p) throw ShapeError("diagnostic names must cover 2p columns");
    KnockoffDiagnostics d;
    d.names = std::move(names);
    const double n = static_cast<double>(x.rows());
    d.means = both.colwise().mean().transpose();
    Matrix centered = both.rowwise() - d.means.transpose();
    const Matrix cov = centered.transpose() * centered / (n - 1.0);
    d.sds = cov.diagonal().cwiseSqrt();
    d.constant.assign(static_cast<std::size_t>(2 * p), false);
    for (Eigen::Index c = 0; c < 2 * p; ++c) d.constant[static_cast<std::size_t>(c)] = !(d.sds[c] > 0.0);
    d.corr = Matrix::Identity(2 * p, 2 * p);
    for (Eigen::Index r = 0; r < 2 * p; ++r)
        for (Eigen::Index c = r + 1; c < 2 * p; ++c) {
            const bool degenerate = d.constant[static_cast<std::size_t>(r)] || d.constant[static_cast<std::size_t>(c)];
            const double v = degenerate ? 0.0 : std::clamp(cov(r, c) / (d.sds[r] * d.sds[c]), -1.0, 1.0);
            d.corr(r, c) = v;
            d.corr(c, r) = v;
        }
    return d;
}

}  // namespace sskf
