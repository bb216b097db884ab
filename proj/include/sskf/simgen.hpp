#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sskf/csv.hpp"
#include "sskf/errors.hpp"
#include "sskf/glm.hpp"
#include "sskf/knockoffs.hpp"
#include "sskf/metrics.hpp"
#include "sskf/rng.hpp"
#include "sskf/tabular.hpp"

namespace sskf {

/// Linear model with heterogeneous effects. Each non-null variable has
/// beta_j(z) = bar_beta_j * z_{l1} * z_{l2} with l1, l2 drawn from the binary
/// covariates, unless it is one of the `constant_fraction` variables whose
/// effect does not depend on z.
struct SyntheticConfig {
    std::size_t n = 1000;
    std::size_t p = 20;
    std::size_t m = 80;
    std::size_t binary_covariates = 20;
    double rho = 0.5;
    double magnitude = 4.0;
    double noise_sd = 1.0;
    double null_fraction = 0.5;
    double null_continuous_fraction = 0.5;
    double constant_fraction = 0.0;
    double x_prob = 0.5;
    std::uint64_t seed = 1;

    void validate() const {
        if (n < 1 || p < 1) throw ParameterError("synthetic design needs n >= 1 and p >= 1");
        if (binary_covariates < 1 || binary_covariates > m) throw ParameterError("binary covariate count must lie in [1, m]");
        if (!(rho > -1.0 && rho < 1.0)) throw ParameterError("AR(1) correlation must lie in (-1, 1)");
        for (double f : {null_fraction, null_continuous_fraction, constant_fraction})
            if (!(f >= 0.0 && f <= 1.0)) throw ParameterError("fractions must lie in [0, 1]");
        if (!(x_prob > 0.0 && x_prob < 1.0)) throw ParameterError("X probability must lie in (0, 1)");
        if (!(noise_sd >= 0.0)) throw ParameterError("noise SD must be nonnegative");
    }

    std::size_t nonnull_count() const { return p - static_cast<std::size_t>(std::floor(static_cast<double>(p) * null_fraction)); }
};

/// 40 variables, 160 covariates (40 binary), every variable non-null, half of
/// them with constant effects.
inline SyntheticConfig transfer_defaults() {
    SyntheticConfig c;
    c.p = 40;
    c.m = 160;
    c.binary_covariates = 40;
    c.null_fraction = 0.0;
    c.constant_fraction = 0.5;
    return c;
}

struct SimulatedData {
    Dataset data;
    GroundTruthModel truth;
    std::vector<MarginalPmf> x_marginals;
    std::vector<std::string> flags;
    std::optional<Dataset> shifted;
};

namespace detail {

struct SyntheticStructure {
    GroundTruthModel truth;
    Vector gamma;
};

inline SyntheticStructure synthetic_structure(const SyntheticConfig& cfg, const RngSeed& seed) {
    auto eng = seed.engine();
    SyntheticStructure s;
    s.truth.terms.assign(cfg.p, {});
    const auto order = permutation(eng, cfg.p);
    const auto k = cfg.nonnull_count();
    const auto constant = static_cast<std::size_t>(std::floor(static_cast<double>(k) * cfg.constant_fraction));
    for (std::size_t r = 0; r < k; ++r) {
        const auto j = order[r];
        const double sign = bernoulli(eng, 0.5) ? 1.0 : -1.0;
        TruthTerm t{sign * cfg.magnitude, {}};
        if (r >= constant) {
            const auto l1 = uniform_index(eng, cfg.binary_covariates);
            const auto l2 = uniform_index(eng, cfg.binary_covariates);
            t.literals.push_back({l1, 1});
            if (l2 != l1) t.literals.push_back({l2, 1});
            std::sort(t.literals.begin(), t.literals.end(), [](auto& a, auto& b) { return a.covariate < b.covariate; });
        }
        s.truth.terms[j].push_back(std::move(t));
    }
    const auto cont = cfg.m - cfg.binary_covariates;
    s.gamma = Vector::Zero(static_cast<Eigen::Index>(cfg.m));
    const auto corder = permutation(eng, cont);
    const auto active = cont - static_cast<std::size_t>(std::floor(static_cast<double>(cont) * cfg.null_continuous_fraction));
    for (std::size_t r = 0; r < active; ++r) {
        const double sign = bernoulli(eng, 0.5) ? 1.0 : -1.0;
        s.gamma[static_cast<Eigen::Index>(cfg.binary_covariates + corder[r])] = sign * cfg.magnitude;
    }
    s.truth.covariate_effects.assign(s.gamma.data(), s.gamma.data() + s.gamma.size());
    return s;
}

inline Matrix synthetic_covariates(const SyntheticConfig& cfg, std::size_t n, const RngSeed& seed, bool binary_zero = false) {
    Matrix z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg.m));
    auto eng = seed.engine();
    const double innov = std::sqrt(1.0 - cfg.rho * cfg.rho);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (std::size_t l = 0; l < cfg.binary_covariates; ++l) {
            const double b = bernoulli(eng, 0.5) ? 1.0 : 0.0;
            z(i, static_cast<Eigen::Index>(l)) = binary_zero ? 0.0 : b;
        }
        double prev = 0.0;
        for (std::size_t l = cfg.binary_covariates; l < cfg.m; ++l) {
            const double e = standard_normal(eng);
            prev = l == cfg.binary_covariates ? e : cfg.rho * prev + innov * e;
            z(i, static_cast<Eigen::Index>(l)) = prev;
        }
    }
    return z;
}

inline Dataset synthetic_draw(const SyntheticConfig& cfg, const SyntheticStructure& s, std::size_t n, const RngSeed& seed,
                              bool binary_zero) {
    Dataset d;
    d.family = Family::gaussian;
    d.z = synthetic_covariates(cfg, n, seed.child("z"), binary_zero);
    d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg.p));
    auto xe = seed.child("x").engine();
    for (Eigen::Index i = 0; i < d.x.rows(); ++i)
        for (Eigen::Index j = 0; j < d.x.cols(); ++j) d.x(i, j) = bernoulli(xe, cfg.x_prob) ? 1.0 : 0.0;
    d.y = d.z * s.gamma;
    for (std::size_t j = 0; j < cfg.p; ++j) d.y += d.x.col(static_cast<Eigen::Index>(j)).cwiseProduct(s.truth.beta_column(j, d.z));
    auto ye = seed.child("y").engine();
    for (Eigen::Index i = 0; i < d.y.size(); ++i) d.y[i] += cfg.noise_sd * standard_normal(ye);
    d.x_names = detail::default_names("X", cfg.p);
    d.z_names = detail::default_names("Z", cfg.m);
    return d;
}

}  // namespace detail

inline SimulatedData gen_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    const RngSeed seed(cfg.seed);
    auto s = detail::synthetic_structure(cfg, seed.child("structure"));
    SimulatedData out;
    out.data = detail::synthetic_draw(cfg, s, cfg.n, seed, false);
    out.truth = s.truth;
    out.truth.variable_names = out.data.x_names;
    out.x_marginals.assign(cfg.p, bernoulli_marginal(cfg.x_prob));
    return out;
}

/// Training data plus a shifted sample in which every binary covariate is 0.
inline SimulatedData gen_transfer(const SyntheticConfig& cfg) {
    auto out = gen_synthetic(cfg);
    const RngSeed seed(cfg.seed);
    const auto s = detail::synthetic_structure(cfg, seed.child("structure"));
    out.shifted = detail::synthetic_draw(cfg, s, cfg.n, seed.child("shift"), true);
    return out;
}

/// Indices of the variables whose effect survives the shift.
inline std::vector<std::size_t> robust_variables(const GroundTruthModel& truth, const Matrix& shifted_z) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < truth.p(); ++j)
        if ((truth.beta_column(j, shifted_z).array().abs() > 1e-12).any()) out.push_back(j);
    return out;
}

// Blood-donation semi-synthetic design.

enum class BloodIndicator : std::size_t {
    male,
    married,
    resident,
    age_under_25,
    student,
    education_under_16,
    rh_negative,
    blood_type_not_o,
    recent_donation,
};
inline constexpr std::size_t blood_indicator_count = 9;

inline const std::array<std::string, blood_indicator_count>& blood_default_columns() {
    static const std::array<std::string, blood_indicator_count> names{
        "Male", "Married", "Resident", "Age<25", "Student", "Education<16", "Rh-negative", "Blood type not O",
        "Donation within 12 months"};
    return names;
}

inline const std::vector<std::string>& blood_treatment_names() {
    static const std::vector<std::string> names{"Reminder", "Individual reward", "Friends request", "Group reward", "Gift"};
    return names;
}

struct BloodConfig {
    std::vector<double> group_sizes{14000, 11000, 11000, 11000, 11000, 11000, 11000};
    double a = 0.4;
    double b = 0.2;
    /// NaN: calibrate on the sample so that half the outcomes are 1.
    double intercept = std::numeric_limits<double>::quiet_NaN();
    /// Group 5 treatment row exactly as in the assignment table, (0,1,1,1,0).
    bool group5_as_printed = false;
    /// Friend-request effect keyed on marital status instead of student status.
    bool friend_uses_married = false;
    std::array<std::string, blood_indicator_count> columns = blood_default_columns();

    void validate() const {
        if (group_sizes.size() != 7) throw ParameterError("blood design needs 7 group sizes");
        for (double s : group_sizes)
            if (!(s >= 0.0)) throw ParameterError("group sizes must be nonnegative");
        if (!(std::accumulate(group_sizes.begin(), group_sizes.end(), 0.0) > 0.0)) throw ParameterError("group sizes sum to zero");
    }

    std::vector<std::vector<double>> treatment_vectors() const {
        std::vector<std::vector<double>> v{{0, 0, 0, 0, 0}, {1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 0, 1, 0, 0},
                                           {1, 1, 1, 0, 0}, {1, 0, 1, 1, 0}, {1, 1, 1, 0, 1}};
        if (group5_as_printed) v[5] = {0, 1, 1, 1, 0};
        return v;
    }

    DiscreteJointSpec treatment_spec() const {
        validate();
        const double total = std::accumulate(group_sizes.begin(), group_sizes.end(), 0.0);
        DiscreteJointSpec spec;
        spec.support = treatment_vectors();
        for (double s : group_sizes) spec.pmf.push_back(s / total);
        return spec;
    }
};

struct TreatmentAssignment {
    Matrix x;
    std::vector<std::size_t> group;
    DiscreteJointSpec spec;
};

/// Each row joins a group independently with probability proportional to its size.
inline TreatmentAssignment assign_treatments(std::size_t n, const BloodConfig& cfg, const RngSeed& seed) {
    TreatmentAssignment t;
    t.spec = cfg.treatment_spec();
    t.x.resize(static_cast<Eigen::Index>(n), 5);
    t.group.resize(n);
    std::vector<double> idx(t.spec.pmf.size());
    std::iota(idx.begin(), idx.end(), 0.0);
    auto eng = seed.engine();
    for (std::size_t i = 0; i < n; ++i) {
        const auto g = static_cast<std::size_t>(detail::draw_from(eng, idx, t.spec.pmf));
        t.group[i] = g;
        for (Eigen::Index j = 0; j < 5; ++j) t.x(static_cast<Eigen::Index>(i), j) = t.spec.support[g][static_cast<std::size_t>(j)];
    }
    return t;
}

/// Stand-in for the donor covariates when the real table is unavailable.
/// Marginals are rough frequencies for the donor population; marital status
/// and age depend on student status.
inline Matrix synthetic_blood_covariates(std::size_t n, const RngSeed& seed) {
    Matrix z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(blood_indicator_count));
    auto eng = seed.engine();
    auto bit = [&](double q) { return bernoulli(eng, q) ? 1.0 : 0.0; };
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double student = bit(0.327);
        z(i, 0) = bit(0.607);
        z(i, 1) = bit(student > 0 ? 0.0103 : 0.426);
        z(i, 2) = bit(0.345);
        z(i, 3) = bit(student > 0 ? 0.6 : 0.155);
        z(i, 4) = student;
        z(i, 5) = bit(0.45);
        z(i, 6) = bit(0.0055);
        z(i, 7) = bit(0.7);
        z(i, 8) = bit(0.365);
    }
    return z;
}

/// c with mean(logistic(phi0 - c)) = 1/2.
inline double calibrate_intercept(const Vector& phi0, double tol = 1e-4) {
    if (phi0.size() == 0) throw ParameterError("calibration needs a nonempty sample");
    auto mean_prob = [&](double c) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < phi0.size(); ++i) s += detail::sigmoid(phi0[i] - c);
        return s / static_cast<double>(phi0.size());
    };
    double lo = phi0.minCoeff() - 1.0, hi = phi0.maxCoeff() + 1.0;
    double c = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        c = 0.5 * (lo + hi);
        const double m = mean_prob(c);
        if (std::abs(m - 0.5) <= tol * 1e-3 || hi - lo < 1e-14) break;
        (m > 0.5 ? lo : hi) = c;
    }
    return c;
}

/// Truth terms of the treatment effects, indexed by covariate column.
inline GroundTruthModel blood_truth(const BloodConfig& cfg, const std::array<std::size_t, blood_indicator_count>& col) {
    auto at = [&](BloodIndicator k) { return col[static_cast<std::size_t>(k)]; };
    using B = BloodIndicator;
    const double a = cfg.a;
    GroundTruthModel g;
    g.terms = {
        {{a, {{at(B::resident), 0}}}, {a, {{at(B::recent_donation), 0}}}},
        {{a, {{at(B::student), 1}}}, {a, {{at(B::student), 1}, {at(B::male), 1}}}},
        {{a, {{at(B::male), 0}}}, {a, {{cfg.friend_uses_married ? at(B::married) : at(B::student), 0}}}},
        {{a, {{at(B::student), 1}}}, {a, {{at(B::male), 1}}}},
        {{a, {{at(B::education_under_16), 0}}}},
    };
    for (auto& terms : g.terms)
        for (auto& t : terms)
            std::sort(t.literals.begin(), t.literals.end(), [](auto& x, auto& y) { return x.covariate < y.covariate; });
    g.variable_names = blood_treatment_names();
    return g;
}

inline std::array<std::size_t, blood_indicator_count> blood_columns(const std::vector<std::string>& z_names, const BloodConfig& cfg) {
    std::array<std::size_t, blood_indicator_count> col{};
    for (std::size_t k = 0; k < blood_indicator_count; ++k) {
        auto it = std::find(z_names.begin(), z_names.end(), cfg.columns[k]);
        if (it == z_names.end()) throw DataError("covariates lack the indicator column '" + cfg.columns[k] + "'");
        col[k] = static_cast<std::size_t>(it - z_names.begin());
    }
    return col;
}

struct BloodOutcome {
    Vector y;
    Vector phi;  // linear predictor including -c
    double intercept = 0.0;
    GroundTruthModel truth;
};

/// Covariate part of the linear predictor, without the intercept.
inline double blood_covariate_effect(const BloodConfig& cfg, const Matrix& z, Eigen::Index i,
                                     const std::array<std::size_t, blood_indicator_count>& col) {
    static constexpr std::array<double, 8> sign{-1, 1, 1, -1, -1, -1, 1, -1};
    double s = 0.0;
    for (std::size_t k = 0; k < 8; ++k) s += sign[k] * (z(i, static_cast<Eigen::Index>(col[k])) > 0.5 ? 1.0 : 0.0);
    return cfg.b * s;
}

inline BloodOutcome gen_blood_outcomes(const Matrix& x, const Matrix& z, const std::vector<std::string>& z_names, const BloodConfig& cfg,
                                       const RngSeed& seed) {
    if (x.cols() != 5) throw ShapeError("blood design needs 5 treatments");
    if (x.rows() != z.rows()) throw ShapeError("treatment and covariate rows differ");
    if (static_cast<Eigen::Index>(z_names.size()) != z.cols()) throw ShapeError("one name per covariate column required");
    const auto col = blood_columns(z_names, cfg);
    BloodOutcome out;
    out.truth = blood_truth(cfg, col);
    out.truth.covariate_effects.assign(static_cast<std::size_t>(z.cols()), 0.0);
    static constexpr std::array<double, 8> sign{-1, 1, 1, -1, -1, -1, 1, -1};
    for (std::size_t k = 0; k < 8; ++k) out.truth.covariate_effects[col[k]] = cfg.b * sign[k];
    Vector phi0(x.rows());
    std::vector<double> row(static_cast<std::size_t>(z.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index l = 0; l < z.cols(); ++l) row[static_cast<std::size_t>(l)] = z(i, l);
        double v = blood_covariate_effect(cfg, z, i, col);
        for (std::size_t j = 0; j < 5; ++j) v += x(i, static_cast<Eigen::Index>(j)) * out.truth.beta(j, row);
        phi0[i] = v;
    }
    out.intercept = std::isnan(cfg.intercept) ? calibrate_intercept(phi0) : cfg.intercept;
    out.phi = phi0.array() - out.intercept;
    out.y.resize(x.rows());
    auto eng = seed.engine();
    for (Eigen::Index i = 0; i < x.rows(); ++i) out.y[i] = bernoulli(eng, detail::sigmoid(out.phi[i])) ? 1.0 : 0.0;
    return out;
}

/// Full semi-synthetic dataset. Without `covariates` the synthetic stand-in is
/// used and the result is flagged "synthetic-covariates".
inline SimulatedData gen_blood(std::size_t n, const BloodConfig& cfg, const RngSeed& seed, const Matrix* covariates = nullptr,
                               const std::vector<std::string>* covariate_names = nullptr) {
    SimulatedData out;
    Dataset& d = out.data;
    if (covariates) {
        if (!covariate_names) throw ParameterError("covariate names required with a covariate matrix");
        if (static_cast<std::size_t>(covariates->rows()) < n) throw DataError("covariate table has fewer rows than requested");
        d.z = covariates->topRows(static_cast<Eigen::Index>(n));
        d.z_names = *covariate_names;
    } else {
        d.z = synthetic_blood_covariates(n, seed.child("z"));
        d.z_names.assign(cfg.columns.begin(), cfg.columns.end());
        out.flags.push_back("synthetic-covariates");
    }
    auto t = assign_treatments(n, cfg, seed.child("x"));
    d.x = std::move(t.x);
    d.x_names = blood_treatment_names();
    d.family = Family::binomial;
    auto o = gen_blood_outcomes(d.x, d.z, d.z_names, cfg, seed.child("y"));
    d.y = std::move(o.y);
    out.truth = std::move(o.truth);
    return out;
}

// Covariate ingestion.

enum class ColumnKind { binary, numeric, categorical };

inline ColumnKind column_kind_from_string(const std::string& s) {
    if (s == "binary") return ColumnKind::binary;
    if (s == "numeric") return ColumnKind::numeric;
    if (s == "categorical") return ColumnKind::categorical;
    throw ConfigError("unknown column kind '" + s + "'");
}

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
};

struct CovariateTable {
    Matrix z;
    std::vector<std::string> names;
};

namespace detail {

inline bool is_missing(const std::string& s) {
    std::string_view v(s);
    while (!v.empty() && v.front() == ' ') v.remove_prefix(1);
    while (!v.empty() && v.back() == ' ') v.remove_suffix(1);
    return v.empty() || v == "NA" || v == "NaN" || v == "nan";
}

}  // namespace detail

/// Parses covariates from CSV text. Categorical columns become one indicator
/// per level ("name=level", levels sorted); missing numeric cells take the
/// column median, missing binary and categorical cells the mode.
inline CovariateTable ingest_covariates_text(std::string_view text, const std::vector<ColumnSchema>& schema) {
    const auto table = csv::parse(text);
    CovariateTable out;
    std::vector<std::vector<double>> cols;
    const auto n = table.rows.size();
    for (std::size_t r = 0; r < n; ++r)
        if (table.rows[r].size() != table.header.size())
            throw IngestionError("row has " + std::to_string(table.rows[r].size()) + " fields, header has " +
                                     std::to_string(table.header.size()),
                                 r + 2, "");
    for (const auto& col : schema) {
        const auto k = table.column(col.name);
        if (k == table.header.size()) throw IngestionError("column not found in the header", 1, col.name);
        if (col.kind == ColumnKind::categorical) {
            std::map<std::string, std::size_t> counts;
            for (const auto& row : table.rows)
                if (!detail::is_missing(row[k])) ++counts[row[k]];
            if (counts.empty()) throw IngestionError("column has no observed values", 2, col.name);
            std::string mode;
            std::size_t best = 0;
            for (const auto& [level, c] : counts)
                if (c > best) {
                    best = c;
                    mode = level;
                }
            for (const auto& [level, c] : counts) {
                std::vector<double> v(n);
                for (std::size_t r = 0; r < n; ++r) {
                    const auto& cell = detail::is_missing(table.rows[r][k]) ? mode : table.rows[r][k];
                    v[r] = cell == level ? 1.0 : 0.0;
                }
                cols.push_back(std::move(v));
                out.names.push_back(col.name + "=" + level);
            }
            continue;
        }
        std::vector<double> v(n, std::numeric_limits<double>::quiet_NaN());
        std::vector<double> observed;
        for (std::size_t r = 0; r < n; ++r) {
            const auto& cell = table.rows[r][k];
            if (detail::is_missing(cell)) continue;
            double d = 0.0;
            if (!csv::parse_double(cell, d) || !std::isfinite(d)) throw IngestionError("cannot parse '" + cell + "'", r + 2, col.name);
            if (col.kind == ColumnKind::binary && d != 0.0 && d != 1.0)
                throw IngestionError("binary column holds '" + cell + "'", r + 2, col.name);
            v[r] = d;
            observed.push_back(d);
        }
        if (observed.empty()) throw IngestionError("column has no observed values", 2, col.name);
        double fill = 0.0;
        if (col.kind == ColumnKind::numeric) {
            std::sort(observed.begin(), observed.end());
            const auto h = observed.size() / 2;
            fill = observed.size() % 2 ? observed[h] : 0.5 * (observed[h - 1] + observed[h]);
        } else {
            const auto ones = std::count(observed.begin(), observed.end(), 1.0);
            fill = 2 * static_cast<std::size_t>(ones) > observed.size() ? 1.0 : 0.0;
        }
        for (auto& x : v)
            if (std::isnan(x)) x = fill;
        cols.push_back(std::move(v));
        out.names.push_back(col.name);
    }
    out.z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
        for (std::size_t r = 0; r < n; ++r) out.z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = cols[c][r];
    return out;
}

inline CovariateTable ingest_covariates(const std::filesystem::path& path, const std::vector<ColumnSchema>& schema) {
    return ingest_covariates_text(csv::read_file(path), schema);
}

inline std::string matrix_csv(const Matrix& a, const std::vector<std::string>& names) {
    if (static_cast<Eigen::Index>(names.size()) != a.cols()) throw ShapeError("one name per column required");
    csv::Writer w(names);
    std::vector<std::string> row(names.size());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) row[static_cast<std::size_t>(j)] = csv::format(a(i, j));
        w.row(row);
    }
    return w.str();
}

// Dataset export: one CSV with X columns, y, Z columns, plus a JSON sidecar
// carrying shapes, names, family and the truth model.

inline std::string dataset_csv(const Dataset& d) {
    Matrix all(d.x.rows(), d.x.cols() + 1 + d.z.cols());
    all << d.x, d.y, d.z;
    auto names = d.variable_names();
    names.push_back("y");
    for (const auto& z : d.covariate_names()) names.push_back(z);
    return matrix_csv(all, names);
}

inline nlohmann::json dataset_sidecar(const Dataset& d, const GroundTruthModel* truth, const std::vector<std::string>& flags = {}) {
    nlohmann::json j{{"n", d.n()},
                     {"p", d.p()},
                     {"m", d.m()},
                     {"family", to_string(d.family)},
                     {"x_names", d.variable_names()},
                     {"z_names", d.covariate_names()},
                     {"flags", flags}};
    if (truth) j["truth"] = truth->to_json();
    return j;
}

inline Dataset read_dataset(std::string_view csv_text, const nlohmann::json& sidecar) {
    const auto p = sidecar.at("p").get<std::size_t>();
    const auto m = sidecar.at("m").get<std::size_t>();
    std::vector<ColumnSchema> schema;
    Dataset d;
    d.x_names = sidecar.at("x_names").get<std::vector<std::string>>();
    d.z_names = sidecar.at("z_names").get<std::vector<std::string>>();
    if (d.x_names.size() != p || d.z_names.size() != m) throw IngestionError("sidecar names disagree with p and m", 0, "");
    for (const auto& s : d.x_names) schema.push_back({s, ColumnKind::numeric});
    schema.push_back({"y", ColumnKind::numeric});
    for (const auto& s : d.z_names) schema.push_back({s, ColumnKind::numeric});
    const auto t = ingest_covariates_text(csv_text, schema);
    d.family = family_from_string(sidecar.at("family").get<std::string>());
    d.x = t.z.leftCols(static_cast<Eigen::Index>(p));
    d.y = t.z.col(static_cast<Eigen::Index>(p));
    d.z = t.z.rightCols(static_cast<Eigen::Index>(m));
    d.validate();
    return d;
}

}  // namespace sskf
