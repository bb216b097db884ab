#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sskf/csv.hpp"
#include "sskf/errors.hpp"
#include "sskf/filter.hpp"
#include "sskf/partition.hpp"
#include "sskf/stats.hpp"
#include "sskf/tabular.hpp"

namespace sskf {

/// Requires covariate `covariate` (binarized at 0.5) to equal `value`.
struct TruthLiteral {
    std::size_t covariate = 0;
    int value = 1;
    bool operator==(const TruthLiteral&) const = default;
};

/// weight * prod of literal indicators.
struct TruthTerm {
    double weight = 0.0;
    std::vector<TruthLiteral> literals;
    bool operator==(const TruthTerm&) const = default;
};

/// Individual coefficients beta_j(z) = sum over terms of weight * prod [z_l binarized == v].
struct GroundTruthModel {
    std::vector<std::vector<TruthTerm>> terms;  // one list per variable
    std::vector<double> covariate_effects;
    std::vector<std::string> variable_names;

    std::size_t p() const { return terms.size(); }

    static bool literal_holds(const TruthLiteral& lit, double zl) { return (zl > 0.5 ? 1 : 0) == lit.value; }

    double beta(std::size_t j, std::span<const double> z) const {
        double b = 0.0;
        for (const auto& t : terms.at(j)) {
            bool on = true;
            for (const auto& lit : t.literals) {
                if (lit.covariate >= z.size()) throw IndexError("truth refers to a missing covariate");
                if (!literal_holds(lit, z[lit.covariate])) {
                    on = false;
                    break;
                }
            }
            if (on) b += t.weight;
        }
        return b;
    }

    Vector beta_column(std::size_t j, const Matrix& z) const {
        Vector out(z.rows());
        std::vector<double> row(static_cast<std::size_t>(z.cols()));
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            for (Eigen::Index l = 0; l < z.cols(); ++l) row[static_cast<std::size_t>(l)] = z(i, l);
            out[i] = beta(j, row);
        }
        return out;
    }

    std::vector<std::size_t> relevant_covariates(std::size_t j) const {
        std::vector<std::size_t> out;
        for (const auto& t : terms.at(j))
            for (const auto& lit : t.literals) out.push_back(lit.covariate);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    /// beta_j over every configuration of its relevant covariates, with
    /// `fixed` covariates pinned. Returns true if any configuration is nonzero.
    bool any_nonzero(std::size_t j, const std::map<std::size_t, int>& fixed) const {
        const auto rel = relevant_covariates(j);
        std::vector<std::size_t> free;
        for (auto l : rel)
            if (!fixed.count(l)) free.push_back(l);
        if (free.size() > 24) throw ParameterError("too many free covariates to enumerate");
        std::size_t width = 0;
        for (auto l : rel) width = std::max(width, l + 1);
        for (const auto& [l, v] : fixed) width = std::max(width, l + 1);
        std::vector<double> z(width, 0.0);
        for (const auto& [l, v] : fixed) z[l] = v;
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << free.size()); ++mask) {
            for (std::size_t k = 0; k < free.size(); ++k) z[free[k]] = static_cast<double>((mask >> k) & 1u);
            if (std::abs(beta(j, z)) > 1e-12) return true;
        }
        return false;
    }

    bool affected(std::size_t j) const { return any_nonzero(j, {}); }

    nlohmann::json to_json() const {
        nlohmann::json vars = nlohmann::json::array();
        for (std::size_t j = 0; j < p(); ++j) {
            nlohmann::json ts = nlohmann::json::array();
            for (const auto& t : terms[j]) {
                nlohmann::json lits = nlohmann::json::array();
                for (const auto& lit : t.literals) lits.push_back({{"covariate", lit.covariate}, {"value", lit.value}});
                ts.push_back({{"weight", t.weight}, {"literals", lits}});
            }
            nlohmann::json v{{"variable", j + 1}, {"terms", ts}};
            if (j < variable_names.size()) v["name"] = variable_names[j];
            vars.push_back(v);
        }
        return {{"variables", vars}, {"covariate_effects", covariate_effects}};
    }

    static GroundTruthModel from_json(const nlohmann::json& doc) {
        GroundTruthModel g;
        for (const auto& v : doc.at("variables")) {
            std::vector<TruthTerm> ts;
            for (const auto& t : v.at("terms")) {
                TruthTerm term;
                term.weight = t.at("weight").get<double>();
                for (const auto& lit : t.at("literals")) term.literals.push_back({lit.at("covariate").get<std::size_t>(), lit.at("value").get<int>()});
                ts.push_back(std::move(term));
            }
            g.terms.push_back(std::move(ts));
            if (v.contains("name")) g.variable_names.push_back(v.at("name").get<std::string>());
        }
        g.covariate_effects = doc.value("covariate_effects", std::vector<double>{});
        return g;
    }
};

/// Null iff no covariate configuration inside the region gives beta_j != 0.
/// Binary splits pin their covariate; covariates split at other thresholds
/// are left free.
inline bool hypothesis_is_null(const GroundTruthModel& truth, const PartitionFunction& psi, const HypothesisId& id) {
    if (!psi.valid(id)) throw IndexError("invalid hypothesis id");
    std::map<std::size_t, int> fixed;
    const auto bits = psi.configuration(id.variable, id.group);
    const auto& splits = psi.splits(id.variable);
    for (std::size_t k = 0; k < splits.size(); ++k)
        if (splits[k].binary) fixed[splits[k].covariate] = bits[k];
    return !truth.any_nonzero(id.variable, fixed);
}

/// Partial-conjunction null: fewer than r groups of the variable are non-null.
inline bool partial_conjunction_is_null(const GroundTruthModel& truth, const PartitionFunction& psi, std::size_t j, std::size_t r) {
    std::size_t nonnull = 0;
    for (std::size_t g = 0; g < psi.groups(j); ++g) nonnull += !hypothesis_is_null(truth, psi, {j, g});
    return nonnull < r;
}

struct DiscoveryRow {
    HypothesisId id;
    std::string definition;
    bool is_null = false;
    double w = 0.0;
    double homogeneity = 0.0;
    double heterogeneity = 0.0;
    std::size_t samples = 0;
};

struct EvalReport {
    double fdp = 0.0;
    double power = 0.0;
    double homogeneity = std::numeric_limits<double>::quiet_NaN();
    double heterogeneity = std::numeric_limits<double>::quiet_NaN();
    double variable_power = 0.0;
    std::size_t discoveries = 0;
    std::size_t false_discoveries = 0;
    std::size_t nonnull_hypotheses = 0;
    // Only filled when a shifted covariate sample is supplied.
    double shift_fdp = std::numeric_limits<double>::quiet_NaN();
    double shift_power = std::numeric_limits<double>::quiet_NaN();
    std::vector<DiscoveryRow> rows;

    std::string discoveries_csv(const GroundTruthModel& truth) const {
        csv::Writer w({"variable", "subgroup_definition", "truth", "W", "homogeneity", "heterogeneity", "samples"});
        for (const auto& r : rows) {
            const auto name = r.id.variable < truth.variable_names.size() ? truth.variable_names[r.id.variable]
                                                                           : "X" + std::to_string(r.id.variable + 1);
            w.row({name, r.definition, r.is_null ? "Null" : "Non-null", csv::format(r.w), csv::format(r.homogeneity),
                   csv::format(r.heterogeneity), std::to_string(r.samples)});
        }
        return w.str();
    }
};

namespace detail {

inline void subgroup_informativeness(const Vector& beta, const std::vector<std::size_t>& rows, double& homogeneity, double& heterogeneity) {
    if (rows.empty()) {
        homogeneity = std::numeric_limits<double>::quiet_NaN();
        heterogeneity = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    double nonzero = 0.0, sum = 0.0;
    for (auto i : rows) {
        const double b = beta[static_cast<Eigen::Index>(i)];
        nonzero += std::abs(b) > 1e-12;
        sum += b;
    }
    const double n = static_cast<double>(rows.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (auto i : rows) ss += (beta[static_cast<Eigen::Index>(i)] - mean) * (beta[static_cast<Eigen::Index>(i)] - mean);
    homogeneity = nonzero / n;
    heterogeneity = rows.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

}  // namespace detail

struct EvalOptions {
    /// Set for variable-level rejections from the partial-conjunction filter.
    std::size_t pc_r = 0;
    /// Covariates of a shifted population; variables with beta != 0 on some
    /// shifted row count as true discoveries under shift.
    const Matrix* shifted_z = nullptr;
};

/// Discovery-level metrics. For subgroup rejections the null status comes from
/// hypothesis_is_null; for variable-level rejections (pc_r > 0) from the
/// partial-conjunction null with the given r.
inline EvalReport evaluate(const RejectionSet& rejections, const StatVector* stats, const PartitionFunction& psi,
                           const GroundTruthModel& truth, const Matrix& z, const EvalOptions& opts = {}) {
    if (truth.p() != psi.variables()) throw ShapeError("truth and partition disagree on p");
    EvalReport rep;
    const auto p = psi.variables();
    std::vector<Vector> beta(p);
    for (std::size_t j = 0; j < p; ++j) beta[j] = truth.beta_column(j, z);

    std::vector<std::size_t> all_rows(static_cast<std::size_t>(z.rows()));
    for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;

    std::vector<bool> touched(p, false);
    double homog_sum = 0.0, heter_sum = 0.0;
    std::size_t informative = 0;
    for (const auto& id : rejections.rejected) {
        DiscoveryRow row;
        row.id = id;
        std::vector<std::size_t> rows;
        if (rejections.variable_level) {
            row.definition = "All individuals";
            row.is_null = partial_conjunction_is_null(truth, psi, id.variable, std::max<std::size_t>(opts.pc_r, 1));
            rows = all_rows;
        } else {
            row.definition = psi.definition(id.variable, id.group);
            row.is_null = hypothesis_is_null(truth, psi, id);
            rows = subgroup_rows(psi, z, id.variable, id.group);
        }
        if (stats && !rejections.variable_level) row.w = stats->at(id).w;
        row.samples = rows.size();
        detail::subgroup_informativeness(beta[id.variable], rows, row.homogeneity, row.heterogeneity);
        if (!std::isnan(row.homogeneity)) {
            homog_sum += row.homogeneity;
            heter_sum += row.heterogeneity;
            ++informative;
        }
        rep.false_discoveries += row.is_null;
        touched[id.variable] = true;
        rep.rows.push_back(std::move(row));
    }
    rep.discoveries = rep.rows.size();
    rep.fdp = static_cast<double>(rep.false_discoveries) / static_cast<double>(std::max<std::size_t>(1, rep.discoveries));

    if (rejections.variable_level) {
        for (std::size_t j = 0; j < p; ++j)
            rep.nonnull_hypotheses += !partial_conjunction_is_null(truth, psi, j, std::max<std::size_t>(opts.pc_r, 1));
    } else {
        for (const auto& id : psi.hypotheses()) rep.nonnull_hypotheses += !hypothesis_is_null(truth, psi, id);
    }
    const std::size_t true_disc = rep.discoveries - rep.false_discoveries;
    rep.power = static_cast<double>(true_disc) / static_cast<double>(std::max<std::size_t>(1, rep.nonnull_hypotheses));
    if (informative > 0) {
        rep.homogeneity = homog_sum / static_cast<double>(informative);
        rep.heterogeneity = heter_sum / static_cast<double>(informative);
    }

    std::size_t affected = 0, affected_hit = 0;
    for (std::size_t j = 0; j < p; ++j) {
        if (!truth.affected(j)) continue;
        ++affected;
        affected_hit += touched[j];
    }
    rep.variable_power = static_cast<double>(affected_hit) / static_cast<double>(std::max<std::size_t>(1, affected));

    if (opts.shifted_z) {
        std::size_t robust = 0, rejected = 0, false_shift = 0, robust_hit = 0;
        for (std::size_t j = 0; j < p; ++j) {
            const bool keeps = (truth.beta_column(j, *opts.shifted_z).array().abs() > 1e-12).any();
            robust += keeps;
            if (!touched[j]) continue;
            ++rejected;
            if (keeps)
                ++robust_hit;
            else
                ++false_shift;
        }
        rep.shift_fdp = static_cast<double>(false_shift) / static_cast<double>(std::max<std::size_t>(1, rejected));
        rep.shift_power = static_cast<double>(robust_hit) / static_cast<double>(std::max<std::size_t>(1, robust));
    }
    return rep;
}

}  // namespace sskf
