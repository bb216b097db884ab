#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "sskf/errors.hpp"
#include "sskf/rng.hpp"
#include "sskf/tabular.hpp"

namespace sskf {

/// Regression design after column standardization.
struct DesignMatrix {
    Matrix columns;  // n x d, standardized
    std::vector<std::string> names;
    Vector center;
    Vector scale;
    std::vector<bool> constant;

    std::size_t n() const { return static_cast<std::size_t>(columns.rows()); }
    std::size_t d() const { return static_cast<std::size_t>(columns.cols()); }
};

/// Centers every non-constant column to mean 0 and scales it to unit sample
/// standard deviation. Constant columns become zeros and are flagged.
inline DesignMatrix standardize(const Matrix& raw, std::vector<std::string> names = {}) {
    const Eigen::Index n = raw.rows();
    if (n < 2) throw InsufficientDataError("standardize needs at least two rows");
    DesignMatrix out;
    out.columns.resize(n, raw.cols());
    out.center.resize(raw.cols());
    out.scale.resize(raw.cols());
    out.constant.assign(static_cast<std::size_t>(raw.cols()), false);
    for (Eigen::Index c = 0; c < raw.cols(); ++c) {
        const auto col = raw.col(c);
        const double mean = col.mean();
        const double ss = (col.array() - mean).square().sum();
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        out.center[c] = mean;
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
            out.scale[c] = 1.0;
            out.constant[static_cast<std::size_t>(c)] = true;
            out.columns.col(c).setZero();
        } else {
            out.scale[c] = sd;
            out.columns.col(c) = (col.array() - mean) / sd;
        }
    }
    if (names.empty()) names = detail::default_names("V", static_cast<std::size_t>(raw.cols()));
    if (names.size() != static_cast<std::size_t>(raw.cols())) throw ShapeError("design names size differs from column count");
    out.names = std::move(names);
    return out;
}

inline DesignMatrix standardize(const DesignMatrix& d) { return standardize(d.columns, d.names); }

/// Penalized GLM solution. `penalties` holds the absolute per-feature penalty
/// (lambda times weight); coefficients are on the scale of the design columns.
struct GlmFit {
    double intercept = 0.0;
    Vector coefficients;
    double lambda = 0.0;
    Vector penalties;
    Family family = Family::gaussian;
    int sweeps = 0;
    bool converged = true;
    std::vector<double> objective_trace;

    std::size_t nonzero() const {
        std::size_t k = 0;
        for (Eigen::Index l = 0; l < coefficients.size(); ++l) k += coefficients[l] != 0.0;
        return k;
    }
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, GlmFit last) : Error(what), last_(std::move(last)) {}
    const GlmFit& last_iterate() const noexcept { return last_; }

private:
    GlmFit last_;
};

struct SolverOptions {
    double tolerance = 1e-7;
    int max_sweeps = 10000;
    bool trace = false;
    double weight_floor = 1e-5;
};

namespace detail {

inline double soft_threshold(double u, double t) {
    if (u > t) return u - t;
    if (u < -t) return u + t;
    return 0.0;
}

inline double sigmoid(double eta) {
    if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

inline double log1pexp(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

}  // namespace detail

/// Mean loss: squared error / 2 (gaussian) or negative log-likelihood (binomial).
inline double smooth_loss(const Matrix& x, const Vector& y, Family family, double intercept, const Vector& beta) {
    const Vector eta = (x * beta).array() + intercept;
    const double n = static_cast<double>(y.size());
    if (family == Family::gaussian) return 0.5 * (y - eta).squaredNorm() / n;
    double s = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) s += detail::log1pexp(eta[i]) - y[i] * eta[i];
    return s / n;
}

/// Gradient of `smooth_loss` with respect to (intercept, beta); entry 0 is the intercept.
inline Vector smooth_loss_gradient(const Matrix& x, const Vector& y, Family family, double intercept, const Vector& beta) {
    const Vector eta = (x * beta).array() + intercept;
    Vector resid(y.size());  // d loss / d eta, times n
    for (Eigen::Index i = 0; i < y.size(); ++i)
        resid[i] = family == Family::gaussian ? eta[i] - y[i] : detail::sigmoid(eta[i]) - y[i];
    const double n = static_cast<double>(y.size());
    Vector g(beta.size() + 1);
    g[0] = resid.sum() / n;
    g.tail(beta.size()) = x.transpose() * resid / n;
    return g;
}

inline double penalized_objective(const Matrix& x, const Vector& y, Family family, const GlmFit& fit) {
    double pen = 0.0;
    for (Eigen::Index l = 0; l < fit.coefficients.size(); ++l)
        if (fit.coefficients[l] != 0.0) pen += fit.penalties[l] * std::abs(fit.coefficients[l]);
    return smooth_loss(x, y, family, fit.intercept, fit.coefficients) + pen;
}

/// Stationarity violations per feature: for zero coefficients how far |grad|
/// exceeds the penalty, for active ones |grad + penalty * sign|.
inline Vector kkt_residuals(const Matrix& x, const Vector& y, Family family, const GlmFit& fit) {
    const Vector g = smooth_loss_gradient(x, y, family, fit.intercept, fit.coefficients);
    Vector r(fit.coefficients.size());
    for (Eigen::Index l = 0; l < r.size(); ++l) {
        const double gl = g[l + 1];
        const double b = fit.coefficients[l];
        const double pen = fit.penalties[l];
        if (b == 0.0)
            r[l] = std::isinf(pen) ? 0.0 : std::max(0.0, std::abs(gl) - pen);
        else
            r[l] = std::abs(gl + pen * (b > 0 ? 1.0 : -1.0));
    }
    return r;
}

/// Coordinate-descent solver for the weighted lasso
///   (1/n) loss(y, b0 + X b) + sum_l penalty_l |b_l|
/// with an unpenalized intercept. Successive calls to `fit` warm-start from
/// the previous solution, which is how lambda paths are traversed.
///
/// Gaussian problems run in covariance mode: the gradient is maintained
/// exactly and centered Gram columns are computed the first time a feature
/// becomes active. Binomial problems use iteratively reweighted quadratic
/// approximations with an inner coordinate descent and a backtracking step
/// that keeps the penalized objective non-increasing.
class LassoSolver {
public:
    LassoSolver(const Matrix& x, const Vector& y, Family family, SolverOptions opts = {})
        : x_(x), y_(y), family_(family), opts_(opts), n_(static_cast<double>(x.rows())) {
        if (y.size() != x.rows()) throw ShapeError("solver: X and y row counts differ");
        if (x.rows() < 1) throw InsufficientDataError("solver: empty design");
        d_ = x.cols();
        beta_ = Vector::Zero(d_);
        if (family_ == Family::gaussian)
            init_gaussian();
        else
            init_binomial();
    }

    LassoSolver(const LassoSolver&) = delete;
    LassoSolver& operator=(const LassoSolver&) = delete;

    Eigen::Index features() const { return d_; }

    /// Gradient of the smooth part at beta = 0 (intercept-only model), used
    /// for the null-fit threshold.
    const Vector& null_gradient() const { return null_grad_; }

    /// Solve at the given absolute per-feature penalties (entries may be +inf).
    void fit(const Vector& penalties) {
        if (penalties.size() != d_) throw ShapeError("solver: penalty vector has wrong length");
        for (Eigen::Index l = 0; l < d_; ++l)
            if (!(penalties[l] >= 0.0)) throw ParameterError("penalties must be nonnegative");
        pen_ = penalties;
        for (Eigen::Index l = 0; l < d_; ++l)
            if (std::isinf(pen_[l]) && beta_[l] != 0.0) set_zero(l);
        trace_.clear();
        converged_ = true;
        sweeps_ = 0;
        if (family_ == Family::gaussian)
            solve_gaussian();
        else
            solve_binomial();
    }

    GlmFit result(double lambda) const {
        GlmFit f;
        f.intercept = intercept();
        f.coefficients = beta_;
        f.lambda = lambda;
        f.penalties = pen_;
        f.family = family_;
        f.sweeps = sweeps_;
        f.converged = converged_;
        f.objective_trace = trace_;
        return f;
    }

    double intercept() const {
        if (family_ == Family::gaussian) return ybar_ - mean_.dot(beta_);
        return b0_;
    }

    const Vector& coefficients() const { return beta_; }

    /// Linear predictor for new rows.
    Vector predict_link(const Matrix& xnew) const {
        Vector eta = Vector::Constant(xnew.rows(), intercept());
        for (Eigen::Index l = 0; l < d_; ++l)
            if (beta_[l] != 0.0) eta += xnew.col(l) * beta_[l];
        return eta;
    }

    double objective() const {
        double pen = 0.0;
        for (Eigen::Index l = 0; l < d_; ++l)
            if (beta_[l] != 0.0) pen += pen_[l] * std::abs(beta_[l]);
        if (family_ == Family::gaussian) {
            // (1/2n)|y - ybar - Xc b|^2 = (syy - b'g0 - b'g) / 2
            return 0.5 * (syy_ - beta_.dot(null_grad_) - beta_.dot(grad_)) + pen;
        }
        double s = 0.0;
        for (Eigen::Index i = 0; i < eta_.size(); ++i) s += cnt_[i] * detail::log1pexp(eta_[i]) - ys_[i] * eta_[i];
        return s / n_ + pen;
    }

private:
    // ---- gaussian -------------------------------------------------------
    void init_gaussian() {
        mean_ = x_.colwise().mean().transpose();
        ybar_ = y_.mean();
        curv_.resize(d_);
        for (Eigen::Index l = 0; l < d_; ++l) curv_[l] = (x_.col(l).array() - mean_[l]).square().sum() / n_;
        const Vector yc = y_.array() - ybar_;
        syy_ = yc.squaredNorm() / n_;
        null_grad_ = x_.transpose() * yc / n_;
        grad_ = null_grad_;
        if (d_ <= full_gram_limit) {
            full_gram_.noalias() = x_.transpose() * x_ / n_;
            full_gram_.noalias() -= mean_ * mean_.transpose();
        } else {
            gram_.assign(static_cast<std::size_t>(d_), Vector());
        }
    }

    // grad -= G[:, k] * delta
    void gram_update(Eigen::Index k, double delta) {
        if (full_gram_.size() > 0) {
            grad_.noalias() -= full_gram_.col(k) * delta;
            return;
        }
        auto& col = gram_[static_cast<std::size_t>(k)];
        if (col.size() == 0) {
            const Vector xc = x_.col(k).array() - mean_[k];
            col = x_.transpose() * xc / n_;
        }
        grad_.noalias() -= col * delta;
    }

    // Returns sqrt(curv) * |delta|.
    double update_gaussian(Eigen::Index l) {
        const double c = curv_[l];
        if (c <= 0.0 || std::isinf(pen_[l])) return 0.0;
        const double old = beta_[l];
        const double nb = detail::soft_threshold(grad_[l] + c * old, pen_[l]) / c;
        const double delta = nb - old;
        if (delta == 0.0) return 0.0;
        gram_update(l, delta);
        beta_[l] = nb;
        return std::sqrt(c) * std::abs(delta);
    }

    void solve_gaussian() {
        std::vector<Eigen::Index> active;
        while (true) {
            double change = 0.0;
            for (Eigen::Index l = 0; l < d_; ++l) change = std::max(change, update_gaussian(l));
            record_sweep();
            if (change <= opts_.tolerance) return;
            if (check_budget()) return;
            while (true) {
                active.clear();
                for (Eigen::Index l = 0; l < d_; ++l)
                    if (beta_[l] != 0.0) active.push_back(l);
                double ac = 0.0;
                for (auto l : active) ac = std::max(ac, update_gaussian(l));
                record_sweep();
                if (ac <= opts_.tolerance) break;
                if (check_budget()) return;
            }
        }
    }

    // ---- binomial -------------------------------------------------------
    // Identical rows are merged into counts and outcome sums when that
    // shrinks the problem enough; the loss is unchanged.
    void collapse_rows() {
        const auto n = x_.rows();
        std::vector<std::uint64_t> h(static_cast<std::size_t>(n), 1469598103934665603ULL);
        for (Eigen::Index l = 0; l < d_; ++l)
            for (Eigen::Index i = 0; i < n; ++i) {
                const double v = x_(i, l) == 0.0 ? 0.0 : x_(i, l);
                std::uint64_t bits;
                std::memcpy(&bits, &v, sizeof bits);
                auto& hi = h[static_cast<std::size_t>(i)];
                hi = (hi ^ bits) * 1099511628211ULL;
                hi ^= hi >> 29;
            }
        std::unordered_map<std::uint64_t, std::vector<Eigen::Index>> buckets;
        std::vector<Eigen::Index> first;
        std::vector<Eigen::Index> group(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            auto& b = buckets[h[static_cast<std::size_t>(i)]];
            Eigen::Index found = -1;
            for (auto u : b)
                if (x_.row(first[static_cast<std::size_t>(u)]) == x_.row(i)) {
                    found = u;
                    break;
                }
            if (found < 0) {
                found = static_cast<Eigen::Index>(first.size());
                first.push_back(i);
                b.push_back(found);
            }
            group[static_cast<std::size_t>(i)] = found;
        }
        const auto u = static_cast<Eigen::Index>(first.size());
        if (static_cast<double>(u) > collapse_ratio * static_cast<double>(n)) {
            cnt_ = Vector::Ones(n);
            ys_ = y_;
            return;
        }
        xu_.resize(u, d_);
        for (Eigen::Index k = 0; k < u; ++k) xu_.row(k) = x_.row(first[static_cast<std::size_t>(k)]);
        cnt_ = Vector::Zero(u);
        ys_ = Vector::Zero(u);
        for (Eigen::Index i = 0; i < n; ++i) {
            cnt_[group[static_cast<std::size_t>(i)]] += 1.0;
            ys_[group[static_cast<std::size_t>(i)]] += y_[i];
        }
        xb_ = &xu_;
    }

    void init_binomial() {
        collapse_rows();
        const double ybar = y_.mean();
        const double clipped = std::clamp(ybar, 1e-10, 1.0 - 1e-10);
        b0_ = std::log(clipped / (1.0 - clipped));
        const auto u = cnt_.size();
        eta_ = Vector::Constant(u, b0_);
        const Vector resid = ys_ - cnt_ * ybar;
        null_grad_ = xb_->transpose() * resid / n_;
        last_grad_ = null_grad_;
        w_.resize(u);
        r_.resize(u);
        curv_ = Vector::Zero(d_);
    }

    void refresh_eta() {
        eta_ = Vector::Constant(cnt_.size(), b0_);
        for (Eigen::Index l = 0; l < d_; ++l)
            if (beta_[l] != 0.0) eta_.noalias() += xb_->col(l) * beta_[l];
    }

    // Coordinate descent on the quadratic approximation at the current
    // weights, in covariance form over the working set:
    //   g = X_S' r / n, H = X_S' W X_S / n, h = X_S' w / n.
    // Leaves beta_, b0_ and eta_ at the new iterate. False if the sweep
    // budget ran out.
    bool inner_quadratic(const std::vector<Eigen::Index>& work) {
        const auto k = static_cast<Eigen::Index>(work.size());
        Matrix xs(xb_->rows(), k);
        for (Eigen::Index c = 0; c < k; ++c) xs.col(c) = xb_->col(work[static_cast<std::size_t>(c)]);
        const Vector sqw = w_.cwiseSqrt();
        const Matrix xw = xs.array().colwise() * sqw.array();
        Matrix h(k, k);
        h.setZero();
        h.selfadjointView<Eigen::Lower>().rankUpdate(xw.transpose(), 1.0 / n_);
        h = h.selfadjointView<Eigen::Lower>();
        const Vector h0 = xs.transpose() * w_ / n_;
        Vector g = xs.transpose() * r_ / n_;
        double g0 = r_.sum() / n_;
        const double sw = w_.sum() / n_;
        Vector b(k);
        for (Eigen::Index c = 0; c < k; ++c) {
            b[c] = beta_[work[static_cast<std::size_t>(c)]];
            curv_[work[static_cast<std::size_t>(c)]] = h(c, c);
        }
        const Vector b_start = b;
        const double b0_start = b0_;

        auto intercept_step = [&] {
            if (!(sw > 0.0)) return 0.0;
            const double delta = g0 / sw;
            if (delta == 0.0) return 0.0;
            g.noalias() -= h0 * delta;
            g0 -= sw * delta;
            b0_ += delta;
            return std::sqrt(sw) * std::abs(delta);
        };
        auto coord_step = [&](Eigen::Index c) {
            const double cc = h(c, c);
            if (cc <= 0.0) return 0.0;
            const auto l = work[static_cast<std::size_t>(c)];
            const double nb = detail::soft_threshold(g[c] + cc * b[c], pen_[l]) / cc;
            const double delta = nb - b[c];
            if (delta == 0.0) return 0.0;
            g.noalias() -= h.col(c) * delta;
            g0 -= h0[c] * delta;
            b[c] = nb;
            return std::sqrt(cc) * std::abs(delta);
        };

        bool ok = true;
        std::vector<Eigen::Index> active;
        while (ok) {
            double change = intercept_step();
            for (Eigen::Index c = 0; c < k; ++c) change = std::max(change, coord_step(c));
            ++sweeps_;
            if (change <= opts_.tolerance) break;
            if (check_budget()) {
                ok = false;
                break;
            }
            while (true) {
                active.clear();
                for (Eigen::Index c = 0; c < k; ++c)
                    if (b[c] != 0.0) active.push_back(c);
                double ac = intercept_step();
                for (auto c : active) ac = std::max(ac, coord_step(c));
                ++sweeps_;
                if (ac <= opts_.tolerance) break;
                if (check_budget()) {
                    ok = false;
                    break;
                }
            }
        }
        for (Eigen::Index c = 0; c < k; ++c) beta_[work[static_cast<std::size_t>(c)]] = b[c];
        if (k > 0) eta_.noalias() += xs * (b - b_start);
        eta_.array() += b0_ - b0_start;
        return ok;
    }

    // Reweighted quadratic fits restricted to the working set.
    // Returns false when the sweep budget ran out.
    bool irls_on(const std::vector<Eigen::Index>& work) {
        double prev_obj = objective();
        for (int outer = 0; outer < 200; ++outer) {
            const Vector beta_old = beta_;
            const double b0_old = b0_;
            for (Eigen::Index i = 0; i < eta_.size(); ++i) {
                const double pr = detail::sigmoid(eta_[i]);
                w_[i] = cnt_[i] * std::max(pr * (1.0 - pr), opts_.weight_floor);
                r_[i] = ys_[i] - cnt_[i] * pr;
            }
            const bool budget = !inner_quadratic(work);
            // Backtrack towards the previous iterate if the true objective rose.
            double obj = objective();
            const Vector beta_new = beta_;
            const double b0_new = b0_;
            double step = 1.0;
            while (obj > prev_obj + 1e-15 * std::max(1.0, std::abs(prev_obj)) && step > 1e-10) {
                step *= 0.5;
                beta_ = beta_old + step * (beta_new - beta_old);
                b0_ = b0_old + step * (b0_new - b0_old);
                refresh_eta();
                obj = objective();
            }
            if (step <= 1e-10) {
                beta_ = beta_old;
                b0_ = b0_old;
                refresh_eta();
                obj = prev_obj;
            }
            if (opts_.trace) trace_.push_back(obj);
            double move = std::sqrt(w_.sum() / n_) * std::abs(b0_ - b0_old);
            for (auto l : work) move = std::max(move, std::sqrt(curv_[l]) * std::abs(beta_[l] - beta_old[l]));
            prev_obj = obj;
            if (budget) return false;
            if (move <= opts_.tolerance) return true;
        }
        converged_ = false;
        return true;
    }

    void solve_binomial() {
        std::vector<bool> in(static_cast<std::size_t>(d_), false);
        for (Eigen::Index l = 0; l < d_; ++l) {
            if (beta_[l] != 0.0) in[static_cast<std::size_t>(l)] = true;
            // Sequential strong rule seeded by the previous solution.
            else if (std::abs(last_grad_[l]) >= 2.0 * pen_[l] - (last_pen_.size() == d_ ? last_pen_[l] : pen_[l]))
                in[static_cast<std::size_t>(l)] = true;
        }
        std::vector<Eigen::Index> work;
        Vector resid(cnt_.size());
        for (int round = 0; round <= d_ + 1; ++round) {
            work.clear();
            for (Eigen::Index l = 0; l < d_; ++l)
                if (in[static_cast<std::size_t>(l)] && !std::isinf(pen_[l])) work.push_back(l);
            if (!irls_on(work)) return;
            // KKT check over features outside the working set.
            for (Eigen::Index i = 0; i < resid.size(); ++i) resid[i] = ys_[i] - cnt_[i] * detail::sigmoid(eta_[i]);
            const Vector g = xb_->transpose() * resid / n_;
            last_grad_ = g;
            last_pen_ = pen_;
            bool added = false;
            for (Eigen::Index l = 0; l < d_; ++l) {
                if (in[static_cast<std::size_t>(l)] || std::isinf(pen_[l])) continue;
                if (std::abs(g[l]) > pen_[l]) {
                    in[static_cast<std::size_t>(l)] = true;
                    added = true;
                }
            }
            if (!added) return;
        }
        converged_ = false;
    }

    // ---- shared ---------------------------------------------------------
    void set_zero(Eigen::Index l) {
        const double delta = -beta_[l];
        if (family_ == Family::gaussian) {
            gram_update(l, delta);
        } else {
            eta_.noalias() += xb_->col(l) * delta;
        }
        beta_[l] = 0.0;
    }

    void record_sweep() {
        ++sweeps_;
        if (opts_.trace) trace_.push_back(objective());
    }

    bool check_budget() {
        if (sweeps_ >= opts_.max_sweeps) {
            converged_ = false;
            return true;
        }
        return false;
    }

    const Matrix& x_;
    const Vector& y_;
    Family family_;
    SolverOptions opts_;
    double n_;
    Eigen::Index d_ = 0;

    Vector beta_;
    Vector pen_;
    Vector curv_;
    Vector null_grad_;

    // gaussian
    Vector mean_;
    double ybar_ = 0.0;
    double syy_ = 0.0;
    Vector grad_;
    std::vector<Vector> gram_;
    Matrix full_gram_;
    static constexpr Eigen::Index full_gram_limit = 3000;

    // binomial
    double b0_ = 0.0;
    Vector eta_;
    Vector w_;
    Vector r_;
    Vector last_grad_;
    Vector last_pen_;
    const Matrix* xb_ = &x_;
    Matrix xu_;
    Vector cnt_;
    Vector ys_;
    static constexpr double collapse_ratio = 0.8;

    int sweeps_ = 0;
    bool converged_ = true;
    std::vector<double> trace_;
};

/// Weighted lasso at a single lambda. Throws ConvergenceError (carrying the
/// last iterate) when the sweep budget runs out.
inline GlmFit fit_lasso(const DesignMatrix& design, const Vector& y, Family family, double lambda,
                        const Vector& weights, const SolverOptions& opts = {}) {
    if (!(lambda >= 0.0)) throw ParameterError("lambda must be nonnegative");
    if (weights.size() != static_cast<Eigen::Index>(design.d())) throw ShapeError("one penalty weight per feature required");
    detail::check_outcome(y, family);
    LassoSolver solver(design.columns, y, family, opts);
    Vector pen(weights.size());
    for (Eigen::Index l = 0; l < weights.size(); ++l) {
        if (!(weights[l] >= 0.0)) throw ParameterError("penalty weights must be nonnegative");
        pen[l] = std::isinf(weights[l]) ? weights[l] : lambda * weights[l];
    }
    solver.fit(pen);
    GlmFit fit = solver.result(lambda);
    if (!fit.converged) throw ConvergenceError("lasso did not converge within the sweep budget", fit);
    return fit;
}

inline GlmFit fit_lasso(const DesignMatrix& design, const Vector& y, Family family, double lambda,
                        const SolverOptions& opts = {}) {
    return fit_lasso(design, y, family, lambda, Vector::Ones(static_cast<Eigen::Index>(design.d())), opts);
}

// ---------------------------------------------------------------------------
// Cross-validation

struct CvOptions {
    std::size_t folds = 10;
    std::size_t grid_size = 100;
    double min_ratio = 1e-3;
    SolverOptions solver;
};

struct CvResult {
    std::vector<double> lambdas;   // descending
    std::vector<double> cv_error;  // mean held-out error per lambda
    std::size_t chosen_index = 0;
    double chosen_lambda = 0.0;
    GlmFit fit;  // full-data fit at the chosen lambda
    bool degenerate = false;
};

/// Fold label per observation from a seeded permutation; binomial outcomes
/// are stratified so each fold gets a proportional share of each class.
inline std::vector<std::size_t> fold_assignment(const Vector& y, Family family, std::size_t k, const RngSeed& seed) {
    const auto n = static_cast<std::size_t>(y.size());
    if (k < 2) throw ParameterError("cross-validation needs at least two folds");
    if (n < k) throw InsufficientDataError("fewer observations than folds");
    auto eng = seed.child("folds").engine();
    const auto perm = permutation(eng, n);
    std::vector<std::size_t> fold(n);
    if (family == Family::binomial) {
        std::size_t pos = 0;
        for (double cls : {0.0, 1.0})
            for (auto i : perm)
                if (y[static_cast<Eigen::Index>(i)] == cls) fold[i] = pos++ % k;
    } else {
        for (std::size_t r = 0; r < n; ++r) fold[perm[r]] = r % k;
    }
    return fold;
}

/// Smallest uniform lambda that zeroes every feature with finite positive weight.
inline double lambda_max(const Vector& null_gradient, const Vector& weights) {
    double lm = 0.0;
    for (Eigen::Index l = 0; l < weights.size(); ++l)
        if (weights[l] > 0.0 && !std::isinf(weights[l])) lm = std::max(lm, std::abs(null_gradient[l]) / weights[l]);
    return lm;
}

inline std::vector<double> lambda_grid(double lmax, std::size_t count, double min_ratio) {
    std::vector<double> grid(count);
    if (count == 1) {
        grid[0] = lmax;
        return grid;
    }
    const double step = std::log(min_ratio) / static_cast<double>(count - 1);
    for (std::size_t k = 0; k < count; ++k) grid[k] = lmax * std::exp(step * static_cast<double>(k));
    grid.front() = lmax;
    return grid;
}

namespace detail {

inline double heldout_error(const Vector& y, const Vector& eta, Family family) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (family == Family::gaussian) {
            const double r = y[i] - eta[i];
            s += r * r;
        } else {
            const double pr = std::clamp(sigmoid(eta[i]), 1e-10, 1.0 - 1e-10);
            s += -2.0 * (y[i] * std::log(pr) + (1.0 - y[i]) * std::log(1.0 - pr));
        }
    }
    return s;
}

inline bool constant_outcome(const Vector& y) { return y.size() == 0 || (y.array() == y[0]).all(); }

inline Vector scaled_penalties(double lambda, const Vector& w) {
    Vector pen(w.size());
    for (Eigen::Index l = 0; l < w.size(); ++l) pen[l] = std::isinf(w[l]) ? w[l] : lambda * w[l];
    return pen;
}

struct FoldData {
    Matrix x_train, x_test;
    Vector y_train, y_test;
};

inline std::vector<FoldData> split_folds(const Matrix& x, const Vector& y, const std::vector<std::size_t>& fold, std::size_t k) {
    std::vector<FoldData> out(k);
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<std::size_t> tr, te;
        for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? te : tr).push_back(i);
        out[f].x_train = take_rows(x, tr);
        out[f].x_test = take_rows(x, te);
        out[f].y_train = take_rows(y, tr);
        out[f].y_test = take_rows(y, te);
    }
    return out;
}

inline GlmFit null_fit(const Vector& y, Family family, std::size_t d) {
    GlmFit f;
    const double ybar = y.size() ? y.mean() : 0.0;
    if (family == Family::gaussian) {
        f.intercept = ybar;
    } else {
        const double c = std::clamp(ybar, 1e-10, 1.0 - 1e-10);
        f.intercept = std::log(c / (1.0 - c));
    }
    f.coefficients = Vector::Zero(static_cast<Eigen::Index>(d));
    f.penalties = Vector::Zero(static_cast<Eigen::Index>(d));
    f.family = family;
    return f;
}

}  // namespace detail

/// K-fold cross-validated weighted lasso over a log-spaced grid of 100
/// lambdas from lambda_max down to 1e-3 lambda_max. The minimum-error lambda
/// is chosen, ties going to the larger lambda.
inline CvResult cv_lasso(const DesignMatrix& design, const Vector& y, Family family, const Vector& weights,
                         const RngSeed& seed, const CvOptions& opts = {}) {
    detail::check_outcome(y, family);
    if (weights.size() != static_cast<Eigen::Index>(design.d())) throw ShapeError("one penalty weight per feature required");
    CvResult res;
    const auto d = design.d();
    if (detail::constant_outcome(y)) {
        res.degenerate = true;
        res.fit = detail::null_fit(y, family, d);
        return res;
    }
    const auto fold = fold_assignment(y, family, opts.folds, seed);

    double lmax;
    {
        LassoSolver probe(design.columns, y, family, opts.solver);
        lmax = lambda_max(probe.null_gradient(), weights);
    }
    if (!(lmax > 0.0)) {
        res.degenerate = true;
        res.fit = detail::null_fit(y, family, d);
        return res;
    }
    res.lambdas = lambda_grid(lmax, opts.grid_size, opts.min_ratio);
    res.cv_error.assign(res.lambdas.size(), 0.0);

    const auto folds = detail::split_folds(design.columns, y, fold, opts.folds);
    for (const auto& fd : folds) {
        if (detail::constant_outcome(fd.y_train)) {
            // An intercept-only model is all a single-class fold can support.
            Vector eta = Vector::Constant(fd.y_test.size(), detail::null_fit(fd.y_train, family, d).intercept);
            const double e = detail::heldout_error(fd.y_test, eta, family);
            for (auto& err : res.cv_error) err += e;
            continue;
        }
        LassoSolver solver(fd.x_train, fd.y_train, family, opts.solver);
        for (std::size_t k = 0; k < res.lambdas.size(); ++k) {
            solver.fit(detail::scaled_penalties(res.lambdas[k], weights));
            res.cv_error[k] += detail::heldout_error(fd.y_test, solver.predict_link(fd.x_test), family);
        }
    }
    for (auto& err : res.cv_error) err /= static_cast<double>(y.size());

    std::size_t best = 0;
    for (std::size_t k = 1; k < res.cv_error.size(); ++k)
        if (res.cv_error[k] < res.cv_error[best]) best = k;
    res.chosen_index = best;
    res.chosen_lambda = res.lambdas[best];

    LassoSolver full(design.columns, y, family, opts.solver);
    for (std::size_t k = 0; k <= best; ++k) full.fit(detail::scaled_penalties(res.lambdas[k], weights));
    res.fit = full.result(res.chosen_lambda);
    return res;
}

inline CvResult cv_lasso(const DesignMatrix& design, const Vector& y, Family family, const RngSeed& seed,
                         const CvOptions& opts = {}) {
    return cv_lasso(design, y, family, Vector::Ones(static_cast<Eigen::Index>(design.d())), seed, opts);
}

// ---------------------------------------------------------------------------
// Prior-weighted penalties

struct WeightedPathOptions {
    CvOptions cv;
    std::vector<double> xi_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::optional<double> forced_xi;
};

struct WeightedPathResult {
    double lambda = 0.0;
    double xi = 0.0;
    GlmFit fit;
    CvResult cv;                   // the xi = 0 lambda search
    std::vector<double> xi_error;  // cv error per xi_grid entry (empty when xi is forced)
    bool degenerate = false;
};

/// Per-feature penalty lambda (1 - xi) + xi pi_l.
inline Vector mixed_penalties(double lambda, double xi, const Vector& pi) {
    Vector pen(pi.size());
    for (Eigen::Index l = 0; l < pi.size(); ++l) pen[l] = lambda * (1.0 - xi) + xi * pi[l];
    return pen;
}

/// Tunes lambda by cross-validation with xi = 0, then xi over its grid at that
/// lambda (same folds), and refits on all rows at the chosen pair.
inline WeightedPathResult fit_weighted_path(const DesignMatrix& design, const Vector& y, Family family, const Vector& pi,
                                            const RngSeed& seed, const WeightedPathOptions& opts = {}) {
    if (pi.size() != static_cast<Eigen::Index>(design.d())) throw ShapeError("one prior weight per feature required");
    for (Eigen::Index l = 0; l < pi.size(); ++l)
        if (!(pi[l] >= 0.0)) throw ParameterError("prior weights must be nonnegative");
    WeightedPathResult res;
    res.cv = cv_lasso(design, y, family, seed, opts.cv);
    res.degenerate = res.cv.degenerate;
    if (res.cv.degenerate) {
        res.fit = res.cv.fit;
        return res;
    }
    res.lambda = res.cv.chosen_lambda;

    auto refit = [&](double xi) {
        LassoSolver solver(design.columns, y, family, opts.cv.solver);
        solver.fit(mixed_penalties(res.lambda, xi, pi));
        return solver.result(res.lambda);
    };

    if (opts.forced_xi) {
        res.xi = *opts.forced_xi;
        res.fit = res.xi == 0.0 ? res.cv.fit : refit(res.xi);
        return res;
    }

    const auto fold = fold_assignment(y, family, opts.cv.folds, seed);
    const auto folds = detail::split_folds(design.columns, y, fold, opts.cv.folds);
    res.xi_error.assign(opts.xi_grid.size(), 0.0);
    const auto d = design.d();
    for (const auto& fd : folds) {
        if (detail::constant_outcome(fd.y_train)) {
            Vector eta = Vector::Constant(fd.y_test.size(), detail::null_fit(fd.y_train, family, d).intercept);
            const double e = detail::heldout_error(fd.y_test, eta, family);
            for (auto& err : res.xi_error) err += e;
            continue;
        }
        LassoSolver solver(fd.x_train, fd.y_train, family, opts.cv.solver);
        for (std::size_t k = 0; k < opts.xi_grid.size(); ++k) {
            solver.fit(mixed_penalties(res.lambda, opts.xi_grid[k], pi));
            res.xi_error[k] += detail::heldout_error(fd.y_test, solver.predict_link(fd.x_test), family);
        }
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < res.xi_error.size(); ++k)
        if (res.xi_error[k] < res.xi_error[best]) best = k;
    res.xi = opts.xi_grid[best];
    res.fit = res.xi == 0.0 ? res.cv.fit : refit(res.xi);
    return res;
}

}  // namespace sskf
