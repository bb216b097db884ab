// End-to-end acceptance run. One PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <boost/math/distributions/chi_squared.hpp>

#include "sskf/sskf.hpp"

using namespace sskf;

namespace {

struct Verdict {
    int id;
    bool pass;
    std::string detail;
};

std::string fmt(double x, int prec = 3) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << x;
    return s.str();
}

class Clock {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

struct Summary {
    double fdr = 0.0, power = 0.0, homogeneity = std::numeric_limits<double>::quiet_NaN();
    std::size_t reps = 0, with_discoveries = 0;
};

Summary summarize(const std::vector<CellOutcome>& rows, Method m, std::size_t n) {
    Summary s;
    double h = 0.0;
    for (const auto& r : rows) {
        if (r.method != m || r.key.n != n) continue;
        ++s.reps;
        s.fdr += r.report.fdp;
        s.power += r.report.power;
        if (!std::isnan(r.report.homogeneity)) {
            h += r.report.homogeneity;
            ++s.with_discoveries;
        }
    }
    if (s.reps) {
        s.fdr /= static_cast<double>(s.reps);
        s.power /= static_cast<double>(s.reps);
    }
    if (s.with_discoveries) s.homogeneity = h / static_cast<double>(s.with_discoveries);
    return s;
}

ExperimentConfig small_synthetic() {
    ExperimentConfig c;
    c.design = Design::synthetic;
    c.synthetic.p = 10;
    c.synthetic.m = 30;
    c.synthetic.binary_covariates = 10;
    c.method.q = 0.1;
    c.method.learn.g_max = 2;
    c.repetitions = 100;
    return c;
}

std::vector<Verdict> synthetic_block(std::size_t jobs) {
    auto c = small_synthetic();
    c.n_grid = {600, 1000, 2000};
    c.methods = {Method::sskf, Method::split, Method::vanilla};
    auto rows = run_experiment(c, jobs);
    auto cn = small_synthetic();
    cn.n_grid = {1000};
    cn.methods = {Method::naive};
    const auto naive_rows = run_experiment(cn, jobs);
    rows.insert(rows.end(), naive_rows.begin(), naive_rows.end());

    std::vector<Verdict> out;
    const auto s1000 = summarize(rows, Method::sskf, 1000);
    out.push_back({1, s1000.fdr <= 0.15,
                   "SSKF FDR " + fmt(s1000.fdr) + " (limit 0.15), reps with discoveries " + std::to_string(s1000.with_discoveries)});
    const auto nv = summarize(rows, Method::naive, 1000);
    out.push_back({2, nv.fdr >= 0.18, "naive FDR " + fmt(nv.fdr) + " (needs >= 0.18)"});

    bool ordered = true;
    std::string d3;
    for (auto n : c.n_grid) {
        const auto a = summarize(rows, Method::sskf, n), b = summarize(rows, Method::split, n);
        ordered = ordered && a.power >= b.power;
        d3 += "n=" + std::to_string(n) + " sskf " + fmt(a.power) + " split " + fmt(b.power) + "; ";
    }
    const double gap = summarize(rows, Method::sskf, 2000).power - summarize(rows, Method::split, 2000).power;
    out.push_back({3, ordered && gap >= 0.05, d3 + "gap at 2000 " + fmt(gap) + " (needs >= 0.05)"});

    const double h600 = summarize(rows, Method::sskf, 600).homogeneity;
    const double h1000 = summarize(rows, Method::sskf, 1000).homogeneity;
    const double h2000 = summarize(rows, Method::sskf, 2000).homogeneity;
    const double v600 = summarize(rows, Method::vanilla, 600).homogeneity;
    const double v1000 = summarize(rows, Method::vanilla, 1000).homogeneity;
    const double v2000 = summarize(rows, Method::vanilla, 2000).homogeneity;
    const bool mono = h1000 >= h600 - 0.02 && h2000 >= h1000 - 0.02;
    const bool above = h2000 - v2000 >= 0.2;
    const bool flat = std::abs(v1000 - v600) <= 0.1 && std::abs(v2000 - v600) <= 0.1;
    out.push_back({4, mono && above && flat,
                   "sskf homogeneity " + fmt(h600) + "/" + fmt(h1000) + "/" + fmt(h2000) + ", vanilla " + fmt(v600) + "/" + fmt(v1000) + "/" +
                       fmt(v2000) + " (NaN = no discoveries in any rep)"});
    return out;
}

MethodOptions cell_options(const ExperimentConfig& c, const CellData& cell) { return cell_method_options(c, cell); }

Verdict flip_sign() {
    auto c = small_synthetic();
    c.synthetic.null_fraction = 1.0;
    std::vector<double> w;
    std::size_t rep = 0;
    while (w.size() < 500) {
        const CellKey k{1000, rep++};
        const auto cell = make_cell(c, k);
        const auto res = run_sskf(cell.augmented, cell_options(c, cell), cell_seed(c, k).child("method"));
        for (const auto& e : res.stats.entries)
            if (e.w != 0.0 && w.size() < 500) w.push_back(e.w);
    }
    const double n = static_cast<double>(w.size());
    double pos = 0.0;
    for (double x : w) pos += x > 0.0;
    const double frac = pos / n;
    const double se = std::sqrt(0.25 / n);

    // sign balance within each |W| decile
    std::vector<std::size_t> idx(w.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return std::abs(w[a]) < std::abs(w[b]); });
    double chi = 0.0;
    const std::size_t bins = 10;
    for (std::size_t b = 0; b < bins; ++b) {
        const std::size_t lo = b * w.size() / bins, hi = (b + 1) * w.size() / bins;
        double pb = 0.0;
        for (std::size_t i = lo; i < hi; ++i) pb += w[idx[i]] > 0.0;
        const double nb = static_cast<double>(hi - lo);
        chi += (pb - nb / 2) * (pb - nb / 2) / (nb / 4);
    }
    const double pval = boost::math::cdf(boost::math::complement(boost::math::chi_squared(static_cast<double>(bins)), chi));

    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double s = (w[i] > 0 ? 1.0 : -1.0) - (2 * frac - 1);
        den += s * s;
        if (i + 1 < w.size()) num += s * ((w[i + 1] > 0 ? 1.0 : -1.0) - (2 * frac - 1));
    }
    const double lag1 = den > 0 ? num / den : 0.0;
    const bool pass = std::abs(frac - 0.5) <= 3 * se && pval > 0.001 && std::abs(lag1) < 0.1;
    return {5, pass,
            std::to_string(w.size()) + " null W from " + std::to_string(rep) + " reps: positive " + fmt(frac) + " (3 SE " + fmt(3 * se) +
                "), decile chi-square p " + fmt(pval, 4) + ", lag-1 sign correlation " + fmt(lag1)};
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

Verdict swap_equivariance() {
    auto c = small_synthetic();
    std::size_t checked = 0, mismatches = 0, trials = 0;
    for (std::size_t t = 0; t < 3; ++t) {
        const CellKey k{600, 500 + t};
        const auto cell = make_cell(c, k);
        const auto opts = cell_options(c, cell);
        const auto& a = cell.augmented;
        const auto v = make_swap_mask(a.n(), a.p(), RngSeed(t, "v"));
        const auto learned = learn_partition(a, v, opts.learn, RngSeed(t, "learn"));
        const auto ids = learned.psi.hypotheses();
        auto eng = RngSeed(t, "s").engine();
        for (std::size_t size : {std::size_t{1}, std::size_t{3}, ids.size()}) {
            ++trials;
            std::set<HypothesisId> s;
            const auto perm = permutation(eng, ids.size());
            for (std::size_t i = 0; i < std::min(size, ids.size()); ++i) s.insert(ids[perm[i]]);
            const auto a2 = swap_by_hypotheses(a, learned.psi, s);
            const auto v2 = v ^ hypotheses_mask(learned.psi, a.z, s);
            if (learn_partition(a2, v2, opts.learn, RngSeed(t, "learn")).psi.to_json() != learned.psi.to_json()) ++mismatches;
            const auto before = all_statistics(a, v, learned.psi, prior_weights(a, v, RngSeed(t, "prior"), opts.stats), RngSeed(t, "st"), opts.stats);
            const auto after = all_statistics(a2, v2, learned.psi, prior_weights(a2, v2, RngSeed(t, "prior"), opts.stats), RngSeed(t, "st"), opts.stats);
            for (std::size_t e = 0; e < before.size(); ++e) {
                const auto& b = before.entries[e];
                const auto& d = after.entries[e];
                ++checked;
                bool ok;
                if (s.count(b.id))
                    ok = same_bits(d.t, b.t_knockoff) && same_bits(d.t_knockoff, b.t) && same_bits(d.w, b.w == 0.0 ? 0.0 : -b.w);
                else
                    ok = same_bits(d.t, b.t) && same_bits(d.t_knockoff, b.t_knockoff) && same_bits(d.w, b.w);
                mismatches += !ok;
            }
        }
    }
    return {6, mismatches == 0,
            std::to_string(checked) + " statistics over " + std::to_string(trials) + " hypothesis sets, " + std::to_string(mismatches) + " mismatches"};
}

Verdict knockoff_exactness() {
    ExperimentConfig c;
    c.design = Design::blood;
    c.n_grid = {80000};
    const auto d = diagnose_knockoffs(c);
    const double means[10] = {0.825, 0.412, 0.550, 0.138, 0.138, 0.822, 0.411, 0.549, 0.139, 0.140};
    // X block, X-knockoff block, knockoff block; symmetric fill below
    const double cross[5][5] = {{.701, .385, .508, .185, .186},
                                {.389, .607, .197, -.337, .481},
                                {.514, .197, .612, .364, .365},
                                {.186, -.334, .362, .622, -.161},
                                {.186, .478, .362, -.161, .639}};
    const double xx[5][5] = {{1, .386, .509, .184, .184},
                             {.386, 1, .197, -.335, .477},
                             {.509, .197, 1, .361, .361},
                             {.184, -.335, .361, 1, -.159},
                             {.184, .477, .361, -.159, 1}};
    const double kk[5][5] = {{1, .371, .496, .187, .187},
                             {.371, 1, .189, -.319, .464},
                             {.496, .189, 1, .347, .347},
                             {.187, -.319, .347, 1, -.162},
                             {.187, .464, .347, -.162, 1}};
    Matrix ref(10, 10);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            ref(i, j) = xx[i][j];
            ref(i + 5, j + 5) = kk[i][j];
            ref(i, j + 5) = cross[i][j];
            ref(j + 5, i) = cross[i][j];
        }
    double mean_gap = 0.0, corr_gap = 0.0;
    for (int i = 0; i < 10; ++i) mean_gap = std::max(mean_gap, std::abs(d.means[i] - means[i]));
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) corr_gap = std::max(corr_gap, std::abs(d.corr(i, j) - ref(i, j)));
    return {7, mean_gap <= 0.01 && corr_gap <= 0.03,
            "max mean gap " + fmt(mean_gap) + " (0.01), max correlation gap " + fmt(corr_gap) + " (0.03), corr(X1, X1~) " + fmt(d.corr(0, 5))};
}

Verdict partial_conjunction(std::size_t jobs) {
    ExperimentConfig c;
    c.design = Design::transfer;
    c.synthetic = transfer_defaults();
    c.synthetic.p = 16;
    c.synthetic.m = 40;
    c.synthetic.binary_covariates = 16;
    c.method.q = 0.2;
    c.method.r = 2;
    c.method.learn.g_max = 2;
    c.n_grid = {2000};
    c.repetitions = 100;
    c.methods = {Method::robust_sskf, Method::robust_split};
    const auto rows = run_experiment(c, jobs);
    const auto a = summarize(rows, Method::robust_sskf, 2000), b = summarize(rows, Method::robust_split, 2000);
    return {8, a.fdr <= 0.25 && a.power > b.power,
            "shift FDR robust-sskf " + fmt(a.fdr) + " robust-split " + fmt(b.fdr) + " (0.25); power " + fmt(a.power) + " vs " + fmt(b.power)};
}

Verdict solver() {
    double soft_gap = 0.0, kkt = 0.0, fd_gap = 0.0;
    {
        const int n = 32, dims = 5;
        Matrix h(n, dims);
        for (int i = 0; i < n; ++i)
            for (int l = 0; l < dims; ++l) h(i, l) = (__builtin_popcount(i & (1 << l)) % 2) ? -1.0 : 1.0;
        DesignMatrix d;
        d.columns = h;
        d.center = Vector::Zero(dims);
        d.scale = Vector::Ones(dims);
        d.constant.assign(dims, false);
        d.names.assign(dims, "h");
        auto eng = RngSeed(1, "ortho").engine();
        for (int rep = 0; rep < 20; ++rep) {
            const Vector y = Vector::NullaryExpr(n, [&](Eigen::Index) { return 2.0 * standard_normal(eng); });
            Vector w = Vector::NullaryExpr(dims, [&](Eigen::Index) { return 2.0 * uniform01(eng); });
            const double lambda = 0.1 + uniform01(eng);
            const auto fit = fit_lasso(d, y, Family::gaussian, lambda, w);
            for (int l = 0; l < dims; ++l)
                soft_gap = std::max(soft_gap, std::abs(fit.coefficients[l] - detail::soft_threshold(h.col(l).dot(y) / n, lambda * w[l])));
        }
    }
    for (auto family : {Family::gaussian, Family::binomial})
        for (std::uint64_t s = 0; s < 5; ++s) {
            auto eng = RngSeed(s, "kkt").engine();
            const int n = 200, dims = 10;
            Matrix x = Matrix::NullaryExpr(n, dims, [&](Eigen::Index, Eigen::Index) { return standard_normal(eng); });
            Vector eta = 1.5 * x.col(0) - x.col(3) + 0.5 * x.col(7);
            Vector y(n);
            for (int i = 0; i < n; ++i)
                y[i] = family == Family::gaussian ? eta[i] + standard_normal(eng) : (bernoulli(eng, detail::sigmoid(eta[i])) ? 1.0 : 0.0);
            const auto d = standardize(x);
            for (double lambda : {0.2, 0.05, 0.01}) {
                const auto fit = fit_lasso(d, y, family, lambda);
                kkt = std::max(kkt, kkt_residuals(d.columns, y, family, fit).maxCoeff());
            }
        }
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto eng = RngSeed(s, "fd").engine();
        const int n = 50, dims = 6;
        Matrix x = Matrix::NullaryExpr(n, dims, [&](Eigen::Index, Eigen::Index) { return standard_normal(eng); });
        Vector y(n);
        for (int i = 0; i < n; ++i) y[i] = bernoulli(eng, 0.5) ? 1.0 : 0.0;
        const Vector beta = Vector::NullaryExpr(dims, [&](Eigen::Index) { return standard_normal(eng); });
        const double b0 = standard_normal(eng);
        const auto g = smooth_loss_gradient(x, y, Family::binomial, b0, beta);
        const double h = 1e-6;
        for (int k = 0; k <= dims; ++k) {
            double plus, minus;
            if (k == 0) {
                plus = smooth_loss(x, y, Family::binomial, b0 + h, beta);
                minus = smooth_loss(x, y, Family::binomial, b0 - h, beta);
            } else {
                Vector bp = beta, bm = beta;
                bp[k - 1] += h;
                bm[k - 1] -= h;
                plus = smooth_loss(x, y, Family::binomial, b0, bp);
                minus = smooth_loss(x, y, Family::binomial, b0, bm);
            }
            const double fd = (plus - minus) / (2 * h);
            fd_gap = std::max(fd_gap, std::abs(fd - g[k]) / std::max(1.0, std::abs(g[k])));
        }
    }
    std::ostringstream s;
    s << std::scientific << std::setprecision(2) << "soft-threshold gap " << soft_gap << ", max KKT residual " << kkt
      << ", gradient relative gap " << fd_gap;
    return {9, soft_gap <= 1e-6 && kkt <= 1e-5 && fd_gap <= 1e-5, s.str()};
}

Verdict pc_calibration() {
    auto eng = RngSeed(10, "pc").engine();
    const double ts[4] = {0.05, 0.1, 0.25, 0.5};
    double worst = -1.0;
    for (std::size_t r : {1u, 2u, 4u}) {
        int below[4] = {0, 0, 0, 0};
        const int trials = 10000;
        for (int k = 0; k < trials; ++k) {
            std::vector<double> w(4);
            for (auto& x : w) x = bernoulli(eng, 0.5) ? 1.0 : -1.0;
            const double p = pc_pvalue(w, r, uniform01(eng)).value;
            for (int t = 0; t < 4; ++t) below[t] += p <= ts[t];
        }
        for (int t = 0; t < 4; ++t) worst = std::max(worst, static_cast<double>(below[t]) / trials - ts[t]);
    }
    return {10, worst <= 0.01, "largest excess of P(p <= t) over t: " + fmt(worst, 4) + " (0.01)"};
}

Verdict blood(std::size_t jobs) {
    Clock clock;
    ExperimentConfig c;
    c.design = Design::blood;
    c.method.q = 0.1;
    c.methods = {Method::sskf};
    c.n_grid = {20000};
    c.repetitions = 25;
    const auto rows = run_experiment(c, jobs);
    const auto s = summarize(rows, Method::sskf, 20000);

    c.n_grid = {80000};
    c.repetitions = 1;
    const auto big = run_experiment(c, jobs);
    const auto t = csv::parse(big.front().discoveries_csv);
    const std::vector<std::string> schema{"variable", "subgroup_definition", "truth", "W", "homogeneity", "heterogeneity", "samples"};
    bool labelled = true;
    for (const auto& row : t.rows) labelled = labelled && (row[2] == "Null" || row[2] == "Non-null");
    const double secs = clock.seconds();
    return {11, s.fdr <= 0.15 && t.header == schema && labelled && secs <= 1800.0,
            "FDR " + fmt(s.fdr) + " (0.15) at n=20000 with power " + fmt(s.power) + "; n=80000 discoveries " + std::to_string(t.rows.size()) +
                (t.header == schema ? ", schema ok" : ", schema wrong") + (labelled ? ", labelled" : ", unlabelled") + "; " + fmt(secs, 0) +
                " s (1800)"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance run"};
    std::vector<int> only;
    std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    app.add_option("--jobs", jobs, "worker threads");
    CLI11_PARSE(app, argc, argv);
    auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };

    std::vector<Verdict> all;
    auto report = [&](const Verdict& v, double secs) {
        std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << v.id << ": " << v.detail << " [" << fmt(secs, 0) << " s]" << std::endl;
        all.push_back(v);
    };
    auto timed = [&](int id, auto fn) {
        if (!wanted(id)) return;
        Clock c;
        const Verdict v = fn();
        report(v, c.seconds());
    };
    if (wanted(1) || wanted(2) || wanted(3) || wanted(4)) {
        Clock c;
        const auto vs = synthetic_block(jobs);
        const double secs = c.seconds();
        for (const auto& v : vs)
            if (wanted(v.id)) report(v, secs);
    }
    timed(5, flip_sign);
    timed(6, swap_equivariance);
    timed(7, knockoff_exactness);
    timed(8, [&] { return partial_conjunction(jobs); });
    timed(9, solver);
    timed(10, pc_calibration);
    timed(11, [&] { return blood(jobs); });

    const auto failed = std::count_if(all.begin(), all.end(), [](const Verdict& v) { return !v.pass; });
    std::cout << all.size() - static_cast<std::size_t>(failed) << "/" << all.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
