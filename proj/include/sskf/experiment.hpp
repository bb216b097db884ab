#pragma once

#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "sskf/benchmarks.hpp"
#include "sskf/csv.hpp"
#include "sskf/errors.hpp"
#include "sskf/knockoffs.hpp"
#include "sskf/metrics.hpp"
#include "sskf/simgen.hpp"

namespace sskf {

enum class Design { synthetic, transfer, blood };

inline std::string to_string(Design d) {
    switch (d) {
        case Design::synthetic: return "synthetic";
        case Design::transfer: return "transfer";
        case Design::blood: return "blood";
    }
    return "?";
}

inline Design design_from_string(const std::string& s) {
    if (s == "synthetic") return Design::synthetic;
    if (s == "transfer") return Design::transfer;
    if (s == "blood") return Design::blood;
    throw ConfigError("unknown design '" + s + "'");
}

struct ExperimentConfig {
    Design design = Design::synthetic;
    std::vector<Method> methods{Method::sskf, Method::naive, Method::split, Method::vanilla};
    std::vector<std::size_t> n_grid{1000};
    std::size_t repetitions = 1;
    std::uint64_t seed = 1;
    std::string output = "sskf_out";
    MethodOptions method;
    SyntheticConfig synthetic;
    BloodConfig blood;
    KnockoffKernel kernel = KnockoffKernel::metropolized;
    /// "binary", "all" or explicit indices.
    std::optional<std::vector<std::size_t>> candidates;
    std::string candidates_rule = "binary";
    std::string covariate_path;
    std::vector<ColumnSchema> covariate_schema;

    void validate() const {
        if (!(method.q > 0.0 && method.q < 1.0)) throw ConfigError("q must lie in (0, 1)");
        if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
        if (methods.empty()) throw ConfigError("at least one method is required");
        if (n_grid.empty()) throw ConfigError("the n grid is empty");
        for (auto n : n_grid)
            if (n < 2 * method.learn.cv.folds) throw ConfigError("every n must be at least twice the fold count");
        if (method.learn.g_max > 10) throw ConfigError("g_max above 10 is not supported");
        if (method.learn.cv.folds < 2) throw ConfigError("folds must be at least 2");
        if (!(method.swap_probability > 0.0 && method.swap_probability < 1.0)) throw ConfigError("swap probability must lie in (0, 1)");
        for (auto m : methods)
            if (is_robust(m)) {
                const std::size_t g = std::size_t{1} << method.learn.g_max;
                if (method.r < 1 || method.r > g) throw ConfigError("r must lie in [1, 2^g_max]");
            }
        if (design != Design::blood) {
            try {
                synthetic.validate();
            } catch (const Error& e) {
                throw ConfigError(e.what());
            }
        }
        if (!covariate_path.empty() && covariate_schema.empty()) throw ConfigError("a covariate file needs a schema");
    }
};

namespace detail {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("bad value for '") + key + "'");
    }
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (auto k : keys) ok = ok || it.key() == k;
        if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    detail::reject_unknown(j,
                           {"design", "methods", "n", "repetitions", "seed", "output", "q", "g_max", "r", "swap_probability",
                            "folds", "grid", "kernel", "candidates", "discretize", "synthetic", "blood", "covariates"},
                           "config");
    ExperimentConfig c;
    c.design = design_from_string(detail::get_or<std::string>(j, "design", "synthetic"));
    if (c.design == Design::transfer) {
        c.synthetic = transfer_defaults();
        c.method.r = 2;
    }
    if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& m : j.at("methods")) {
            if (!m.is_string()) throw ConfigError("methods must be strings");
            c.methods.push_back(method_from_string(m.get<std::string>()));
        }
    } else if (c.design == Design::transfer) {
        c.methods = {Method::robust_sskf, Method::robust_split};
    }
    if (j.contains("n")) {
        const auto& n = j.at("n");
        c.n_grid.clear();
        if (n.is_array()) {
            for (const auto& v : n) {
                if (!v.is_number_unsigned()) throw ConfigError("n entries must be positive integers");
                c.n_grid.push_back(v.get<std::size_t>());
            }
        } else if (n.is_number_unsigned()) {
            c.n_grid.push_back(n.get<std::size_t>());
        } else {
            throw ConfigError("n must be a positive integer or a list of them");
        }
    } else if (c.design == Design::blood) {
        c.n_grid = {80000};
    }
    if (j.contains("repetitions") && !j.at("repetitions").is_number_integer()) throw ConfigError("repetitions must be an integer");
    const auto reps = detail::get_or<long long>(j, "repetitions", 1);
    if (reps < 1) throw ConfigError("repetitions must be at least 1");
    c.repetitions = static_cast<std::size_t>(reps);
    c.seed = detail::get_or<std::uint64_t>(j, "seed", 1);
    c.output = detail::get_or<std::string>(j, "output", c.output);
    c.method.q = detail::get_or<double>(j, "q", 0.1);
    c.method.learn.g_max = detail::get_or<std::size_t>(j, "g_max", 2);
    c.method.r = detail::get_or<std::size_t>(j, "r", c.method.r);
    c.method.swap_probability = detail::get_or<double>(j, "swap_probability", 0.5);
    c.method.learn.cv.folds = detail::get_or<std::size_t>(j, "folds", 10);
    c.method.learn.cv.grid_size = detail::get_or<std::size_t>(j, "grid", 100);
    c.method.stats.path.cv = c.method.learn.cv;
    c.method.learn.interactions.discretize = detail::get_or<bool>(j, "discretize", true);
    try {
        c.kernel = kernel_from_string(detail::get_or<std::string>(j, "kernel", "metropolized"));
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (j.contains("candidates")) {
        const auto& cand = j.at("candidates");
        if (cand.is_string()) {
            c.candidates_rule = cand.get<std::string>();
            if (c.candidates_rule != "binary" && c.candidates_rule != "all") throw ConfigError("candidates must be 'binary', 'all' or a list");
        } else if (cand.is_array()) {
            std::vector<std::size_t> v;
            for (const auto& x : cand) {
                if (!x.is_number_unsigned()) throw ConfigError("candidate indices must be nonnegative integers");
                v.push_back(x.get<std::size_t>());
            }
            c.candidates = v;
        } else {
            throw ConfigError("candidates must be 'binary', 'all' or a list");
        }
    }
    if (j.contains("synthetic")) {
        const auto& s = j.at("synthetic");
        if (!s.is_object()) throw ConfigError("'synthetic' must be an object");
        detail::reject_unknown(s,
                               {"p", "m", "binary_covariates", "rho", "magnitude", "noise_sd", "null_fraction", "null_continuous_fraction",
                                "constant_fraction", "x_prob"},
                               "synthetic");
        auto& y = c.synthetic;
        y.p = detail::get_or<std::size_t>(s, "p", y.p);
        y.m = detail::get_or<std::size_t>(s, "m", y.m);
        y.binary_covariates = detail::get_or<std::size_t>(s, "binary_covariates", y.binary_covariates);
        y.rho = detail::get_or<double>(s, "rho", y.rho);
        y.magnitude = detail::get_or<double>(s, "magnitude", y.magnitude);
        y.noise_sd = detail::get_or<double>(s, "noise_sd", y.noise_sd);
        y.null_fraction = detail::get_or<double>(s, "null_fraction", y.null_fraction);
        y.null_continuous_fraction = detail::get_or<double>(s, "null_continuous_fraction", y.null_continuous_fraction);
        y.constant_fraction = detail::get_or<double>(s, "constant_fraction", y.constant_fraction);
        y.x_prob = detail::get_or<double>(s, "x_prob", y.x_prob);
    }
    if (j.contains("blood")) {
        const auto& b = j.at("blood");
        if (!b.is_object()) throw ConfigError("'blood' must be an object");
        detail::reject_unknown(b, {"a", "b", "intercept", "group_sizes", "group5_as_printed", "friend_uses_married"}, "blood");
        c.blood.a = detail::get_or<double>(b, "a", c.blood.a);
        c.blood.b = detail::get_or<double>(b, "b", c.blood.b);
        if (b.contains("intercept")) c.blood.intercept = detail::get_or<double>(b, "intercept", 0.0);
        c.blood.group_sizes = detail::get_or<std::vector<double>>(b, "group_sizes", c.blood.group_sizes);
        c.blood.group5_as_printed = detail::get_or<bool>(b, "group5_as_printed", false);
        c.blood.friend_uses_married = detail::get_or<bool>(b, "friend_uses_married", false);
        try {
            c.blood.validate();
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
    if (j.contains("covariates")) {
        const auto& cv = j.at("covariates");
        if (!cv.is_object()) throw ConfigError("'covariates' must be an object");
        detail::reject_unknown(cv, {"path", "schema", "columns"}, "covariates");
        c.covariate_path = detail::get_or<std::string>(cv, "path", "");
        if (cv.contains("schema")) {
            const auto& sc = cv.at("schema");
            if (!sc.is_object()) throw ConfigError("covariate schema must map column names to kinds");
            for (auto it = sc.begin(); it != sc.end(); ++it) {
                if (!it.value().is_string()) throw ConfigError("column kinds must be strings");
                c.covariate_schema.push_back({it.key(), column_kind_from_string(it.value().get<std::string>())});
            }
        }
        if (cv.contains("columns")) {
            const auto cols = detail::get_or<std::vector<std::string>>(cv, "columns", {});
            if (cols.size() != blood_indicator_count) throw ConfigError("'columns' must name the 9 indicator columns");
            std::copy(cols.begin(), cols.end(), c.blood.columns.begin());
        }
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = csv::read_file(path);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

/// One simulated dataset with everything needed to run and score methods.
struct CellData {
    SimulatedData sim;
    AugmentedData augmented;
    KnockoffModel knockoffs;
};

struct CellKey {
    std::size_t n = 0;
    std::size_t rep = 0;
};

inline RngSeed cell_seed(const ExperimentConfig& c, const CellKey& k) {
    return RngSeed(c.seed).child("n", k.n).child("rep", k.rep);
}

inline std::vector<std::size_t> interaction_candidates(const ExperimentConfig& c, const Matrix& z) {
    if (c.candidates) return *c.candidates;
    std::vector<std::size_t> out;
    for (Eigen::Index l = 0; l < z.cols(); ++l)
        if (c.candidates_rule == "all" || detail::is_binary_column(z.col(l))) out.push_back(static_cast<std::size_t>(l));
    return out;
}

/// Covariate table for the blood design, read once.
struct CovariateCache {
    std::once_flag once;
    CovariateTable table;
};

inline CellData make_cell(const ExperimentConfig& c, const CellKey& k, CovariateCache* cache = nullptr) {
    const auto seed = cell_seed(c, k);
    CellData cell;
    if (c.design == Design::blood) {
        const Matrix* z = nullptr;
        const std::vector<std::string>* names = nullptr;
        if (!c.covariate_path.empty()) {
            if (!cache) throw ParameterError("blood design with a covariate file needs a cache");
            std::call_once(cache->once, [&] { cache->table = ingest_covariates(c.covariate_path, c.covariate_schema); });
            z = &cache->table.z;
            names = &cache->table.names;
        }
        cell.sim = gen_blood(k.n, c.blood, seed.child("data"), z, names);
        cell.knockoffs.kind = KnockoffModel::Kind::discrete_joint;
        cell.knockoffs.joint = c.blood.treatment_spec();
        cell.knockoffs.kernel = c.kernel;
    } else {
        auto sc = c.synthetic;
        sc.n = k.n;
        sc.seed = seed.child("data").derived();
        cell.sim = c.design == Design::transfer ? gen_transfer(sc) : gen_synthetic(sc);
        cell.knockoffs.kind = KnockoffModel::Kind::iid_product;
        cell.knockoffs.marginals = cell.sim.x_marginals;
    }
    cell.augmented = augment(cell.sim.data, cell.knockoffs.generate(cell.sim.data.x, seed.child("knockoffs")));
    return cell;
}

inline MethodOptions cell_method_options(const ExperimentConfig& c, const CellData& cell) {
    auto o = c.method;
    o.learn.interactions.candidates = interaction_candidates(c, cell.sim.data.z);
    o.stats.path.cv = o.learn.cv;
    return o;
}

struct CellOutcome {
    Method method = Method::sskf;
    CellKey key;
    std::uint64_t seed = 0;
    EvalReport report;
    std::string discoveries_csv;
    std::vector<std::string> flags;
};

inline CellOutcome run_cell_method(const ExperimentConfig& c, const CellData& cell, const CellKey& k, Method m) {
    const auto opts = cell_method_options(c, cell);
    const auto seed = cell_seed(c, k);
    const auto res = run_method(m, cell.augmented, opts, seed.child("method"));
    CellOutcome out;
    out.method = m;
    out.key = k;
    out.seed = seed.derived();
    const Matrix* shifted = cell.sim.shifted ? &cell.sim.shifted->z : nullptr;
    out.report = evaluate_method(res, cell.sim.truth, cell.sim.data.z, opts, shifted);
    if (c.design == Design::transfer) {
        // The transfer design scores discoveries against the shifted population.
        out.report.fdp = out.report.shift_fdp;
        out.report.power = out.report.shift_power;
    }
    out.discoveries_csv = out.report.discoveries_csv(cell.sim.truth);
    out.flags = cell.sim.flags;
    return out;
}

/// Runs fn(0..count-1) on `jobs` threads. The first exception is rethrown.
inline void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex mu;
    auto worker = [&] {
        while (true) {
            const auto i = next.fetch_add(1);
            if (i >= count) return;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (error) return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
}

/// Runtime failure tied to one cell.
class CellError : public Error {
public:
    CellError(const std::string& cell, const std::string& what) : Error("cell " + cell + ": " + what), cell_(cell) {}
    const std::string& cell() const noexcept { return cell_; }

private:
    std::string cell_;
};

inline std::string cell_name(Method m, const CellKey& k) {
    return to_string(m) + "_n" + std::to_string(k.n) + "_rep" + std::to_string(k.rep + 1);
}

/// Every (n, repetition) dataset, each scored by every method. Results are in
/// (method, n, repetition) order regardless of the number of jobs.
inline std::vector<CellOutcome> run_experiment(const ExperimentConfig& c, std::size_t jobs = 1,
                                               const std::function<void(const CellOutcome&)>& on_done = {}) {
    std::vector<CellKey> keys;
    for (auto n : c.n_grid)
        for (std::size_t r = 0; r < c.repetitions; ++r) keys.push_back({n, r});
    std::vector<std::vector<CellOutcome>> per_key(keys.size());
    CovariateCache cache;
    std::mutex done_mu;
    parallel_for(keys.size(), jobs, [&](std::size_t i) {
        const auto& k = keys[i];
        CellData cell;
        try {
            cell = make_cell(c, k, &cache);
        } catch (const std::exception& e) {
            throw CellError("data_n" + std::to_string(k.n) + "_rep" + std::to_string(k.rep + 1), e.what());
        }
        for (auto m : c.methods) {
            CellOutcome o;
            try {
                o = run_cell_method(c, cell, k, m);
            } catch (const std::exception& e) {
                throw CellError(cell_name(m, k), e.what());
            }
            if (on_done) {
                std::lock_guard<std::mutex> lock(done_mu);
                on_done(o);
            }
            per_key[i].push_back(std::move(o));
        }
    });
    std::vector<CellOutcome> out;
    for (std::size_t mi = 0; mi < c.methods.size(); ++mi)
        for (std::size_t i = 0; i < keys.size(); ++i) out.push_back(per_key[i][mi]);
    return out;
}

inline std::string timestamp_line() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[64];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "generated %Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string metrics_csv(const std::vector<CellOutcome>& rows, bool timestamp) {
    csv::Writer w;
    if (timestamp) w.comment(timestamp_line());
    w.row({"method", "n", "seed", "fdp", "power", "homogeneity", "heterogeneity"});
    for (const auto& r : rows)
        w.row({to_string(r.method), std::to_string(r.key.n), std::to_string(r.seed), csv::format(r.report.fdp),
               csv::format(r.report.power), csv::format(r.report.homogeneity), csv::format(r.report.heterogeneity)});
    return w.str();
}

inline std::string metrics_extended_csv(const std::vector<CellOutcome>& rows, bool timestamp) {
    csv::Writer w;
    if (timestamp) w.comment(timestamp_line());
    w.row({"method", "n", "rep", "seed", "fdp", "power", "homogeneity", "heterogeneity", "variable_power", "discoveries",
           "false_discoveries", "nonnull_hypotheses", "shift_fdp", "shift_power", "flags"});
    for (const auto& r : rows) {
        std::string flags;
        for (const auto& f : r.flags) flags += (flags.empty() ? "" : ";") + f;
        const auto& e = r.report;
        w.row({to_string(r.method), std::to_string(r.key.n), std::to_string(r.key.rep + 1), std::to_string(r.seed), csv::format(e.fdp),
               csv::format(e.power), csv::format(e.homogeneity), csv::format(e.heterogeneity), csv::format(e.variable_power),
               std::to_string(e.discoveries), std::to_string(e.false_discoveries), std::to_string(e.nonnull_hypotheses),
               csv::format(e.shift_fdp), csv::format(e.shift_power), flags});
    }
    return w.str();
}

/// Runs the experiment and writes metrics.csv, metrics_extended.csv and one
/// discoveries file per cell under `out`.
inline std::vector<CellOutcome> run_and_write(const ExperimentConfig& c, const std::filesystem::path& out, std::size_t jobs,
                                              bool timestamp) {
    const auto rows = run_experiment(c, jobs, [&](const CellOutcome& o) {
        csv::write_atomic(out / "discoveries" / (cell_name(o.method, o.key) + ".csv"), o.discoveries_csv);
    });
    csv::write_atomic(out / "metrics.csv", metrics_csv(rows, timestamp));
    csv::write_atomic(out / "metrics_extended.csv", metrics_extended_csv(rows, timestamp));
    return rows;
}

/// Knockoff diagnostics for the first n of the grid and the first repetition.
inline KnockoffDiagnostics diagnose_knockoffs(const ExperimentConfig& c) {
    const CellKey k{c.n_grid.front(), 0};
    CovariateCache cache;
    const auto cell = make_cell(c, k, &cache);
    const auto p = static_cast<Eigen::Index>(cell.augmented.p());
    auto names = cell.sim.data.variable_names();
    std::vector<std::string> all = names;
    for (const auto& s : names) all.push_back(s + " knockoff");
    return knockoff_diagnostics(cell.augmented.xx.leftCols(p), cell.augmented.xx.rightCols(p), all);
}

/// Writes every generated dataset with its sidecar under out/data.
inline void simulate_and_write(const ExperimentConfig& c, const std::filesystem::path& out) {
    CovariateCache cache;
    for (auto n : c.n_grid)
        for (std::size_t r = 0; r < c.repetitions; ++r) {
            const CellKey k{n, r};
            const auto cell = make_cell(c, k, &cache);
            const auto base = to_string(c.design) + "_n" + std::to_string(n) + "_rep" + std::to_string(r + 1);
            csv::write_atomic(out / "data" / (base + ".csv"), dataset_csv(cell.sim.data));
            csv::write_atomic(out / "data" / (base + ".json"), dataset_sidecar(cell.sim.data, &cell.sim.truth, cell.sim.flags).dump(2) + "\n");
            const auto p = static_cast<Eigen::Index>(cell.augmented.p());
            csv::write_atomic(out / "data" / (base + "_knockoffs.csv"),
                              matrix_csv(cell.augmented.xx.rightCols(p), cell.sim.data.variable_names()));
            if (cell.sim.shifted) {
                csv::write_atomic(out / "data" / (base + "_shifted.csv"), dataset_csv(*cell.sim.shifted));
            }
        }
}

}  // namespace sskf
