#include "coopperc/fd_fit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coopperc/core_math.hpp"
#include "coopperc/error.hpp"
#include "coopperc/rng.hpp"

namespace coopperc {

namespace {

struct Prepared {
    std::vector<double> v;
    std::vector<double> w;
    std::vector<double> logu;  // ln(rho / rho_j), all < 0
    std::size_t n_rejected = 0;
    double sum_w = 0.0;
    double tss = 0.0;  // weighted, about the weighted mean speed
};

Prepared prepare(std::span<const FDObservation> obs, double rho_j, std::size_t min_obs) {
    if (!(rho_j > 0.0) || !std::isfinite(rho_j)) {
        throw DomainError("rho_j must be positive, got " + std::to_string(rho_j));
    }
    Prepared prep;
    prep.v.reserve(obs.size());
    prep.w.reserve(obs.size());
    prep.logu.reserve(obs.size());
    double min_rho = 0.0, max_rho = 0.0;
    for (const FDObservation& o : obs) {
        if (!std::isfinite(o.rho) || !std::isfinite(o.v) || !std::isfinite(o.weight) ||
            o.rho <= 0.0 || o.weight <= 0.0) {
            throw DomainError("observations must have finite values, rho > 0, weight > 0");
        }
        if (o.rho >= rho_j) {
            ++prep.n_rejected;  // the model is undefined at and beyond jam density
            continue;
        }
        if (prep.v.empty()) {
            min_rho = max_rho = o.rho;
        } else {
            min_rho = std::min(min_rho, o.rho);
            max_rho = std::max(max_rho, o.rho);
        }
        prep.v.push_back(o.v);
        prep.w.push_back(o.weight);
        prep.logu.push_back(std::log(o.rho / rho_j));
        prep.sum_w += o.weight;
    }
    if (prep.v.size() < min_obs) {
        throw SampleError("need >= " + std::to_string(min_obs) + " observations with rho < rho_j, have " +
                          std::to_string(prep.v.size()));
    }
    if (min_rho == max_rho) {
        throw NumericError("degenerate data: all observations share one density");
    }
    double mv = 0.0;
    for (std::size_t i = 0; i < prep.v.size(); ++i) mv += prep.w[i] * prep.v[i];
    mv /= prep.sum_w;
    for (std::size_t i = 0; i < prep.v.size(); ++i) {
        double d = prep.v[i] - mv;
        prep.tss += prep.w[i] * d * d;
    }
    return prep;
}

// Closed-form v_f minimising the weighted residual sum at fixed g.
double profiled_vf(const Prepared& prep, std::span<const double> g) {
    double swvg = 0.0, swg2 = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        swvg += prep.w[i] * prep.v[i] * g[i];
        swg2 += prep.w[i] * g[i] * g[i];
    }
    if (!(swg2 > 0.0)) throw NumericError("profiled v_f undefined: zero model norm");
    return swvg / swg2;
}

struct Objective {
    const Prepared& prep;
    const VfPolicy& vf;
    mutable std::vector<double> g;  // scratch, one entry per observation

    void fill_g(double theta) const {
        g.resize(prep.logu.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = 1.0 - std::exp(theta * prep.logu[i]);
    }

    double vf_at() const {
        return vf.mode == VfPolicy::Mode::kProfile ? profiled_vf(prep, g) : vf.value;
    }

    // Weighted RSS at theta.
    double operator()(double theta) const {
        fill_g(theta);
        double v_f = vf_at();
        double rss = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            double r = prep.v[i] - v_f * g[i];
            rss += prep.w[i] * r * r;
        }
        return rss;
    }
};

struct BrentOutcome {
    double x;
    int iters;
    bool converged;
};

// Brent minimisation on a bracketing triplet ax < bx < cx: golden sections
// with parabolic steps where they are trustworthy.
template <typename F>
BrentOutcome brent_min(const F& f, double ax, double bx, double cx, double tol_rel, int itmax) {
    constexpr double kGold = 0.3819660112501051;
    double a = std::min(ax, cx), b = std::max(ax, cx);
    double x = bx, w = bx, v = bx;
    double fx = f(x), fw = fx, fv = fx;
    double d = 0.0, e = 0.0;
    for (int it = 0; it < itmax; ++it) {
        double xm = 0.5 * (a + b);
        double tol1 = tol_rel * std::abs(x) + 1e-12;
        double tol2 = 2.0 * tol1;
        if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) return {x, it, true};
        if (std::abs(e) > tol1) {
            double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0) p = -p;
            q = std::abs(q);
            double e_old = e;
            e = d;
            if (std::abs(p) >= std::abs(0.5 * q * e_old) || p <= q * (a - x) || p >= q * (b - x)) {
                e = x >= xm ? a - x : b - x;
                d = kGold * e;
            } else {
                d = p / q;
                double u = x + d;
                if (u - a < tol2 || b - u < tol2) d = std::copysign(tol1, xm - x);
            }
        } else {
            e = x >= xm ? a - x : b - x;
            d = kGold * e;
        }
        double u = std::abs(d) >= tol1 ? x + d : x + std::copysign(tol1, d);
        double fu = f(u);
        if (fu <= fx) {
            if (u >= x) a = x; else b = x;
            v = w; w = x; x = u;
            fv = fw; fw = fx; fx = fu;
        } else {
            if (u < x) a = u; else b = u;
            if (fu <= fw || w == x) {
                v = w; fv = fw;
                w = u; fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u; fv = fu;
            }
        }
    }
    return {x, itmax, false};
}

struct Metrics {
    double v_f;
    double rss;
    double r2;
    double rmse;
};

Metrics metrics_for_theta(const Prepared& prep, const Objective& obj, double theta) {
    obj.fill_g(theta);
    double v_f = obj.vf_at();
    double rss = 0.0;
    for (std::size_t i = 0; i < obj.g.size(); ++i) {
        double r = prep.v[i] - v_f * obj.g[i];
        rss += prep.w[i] * r * r;
    }
    if (!(prep.tss > 0.0)) throw DomainError("total speed variance is zero; R^2 undefined");
    return {v_f, rss, 1.0 - rss / prep.tss, std::sqrt(rss / prep.sum_w)};
}

double sigma_for_theta(const Prepared& prep, double theta, double v_f, double rss,
                       bool profiled) {
    double n = static_cast<double>(prep.v.size());
    // Jacobian columns at the optimum: g_i for v_f and -v_f logu_i e^{theta logu_i}
    // for theta.
    double a11 = 0.0, a12 = 0.0, a22 = 0.0;
    for (std::size_t i = 0; i < prep.v.size(); ++i) {
        double u_pow = std::exp(theta * prep.logu[i]);
        double a = 1.0 - u_pow;
        double b = -v_f * prep.logu[i] * u_pow;
        a11 += prep.w[i] * a * a;
        a12 += prep.w[i] * a * b;
        a22 += prep.w[i] * b * b;
    }
    if (profiled) {
        double det = a11 * a22 - a12 * a12;
        if (!(det > 1e-12 * a11 * a22)) {
            throw NumericError("singular normal matrix; theta and v_f are not jointly identifiable");
        }
        double dof = n - 2.0;
        if (!(dof > 0.0)) throw SampleError("not enough observations for a standard error");
        return std::sqrt(rss / dof * a11 / det);
    }
    if (!(a22 > 0.0)) throw NumericError("zero curvature; theta is not identifiable");
    double dof = n - 1.0;
    return std::sqrt(rss / dof / a22);
}

}  // namespace

ThetaFit fit_theta(std::span<const FDObservation> obs, double rho_j, const VfPolicy& vf,
                   const FitOptions& options) {
    if (!(options.theta_lo > 0.0) || !(options.theta_hi > options.theta_lo)) {
        throw DomainError("invalid theta search interval");
    }
    if (vf.mode == VfPolicy::Mode::kGiven && !(vf.value > 0.0)) {
        throw DomainError("given v_f must be positive");
    }
    Prepared prep = prepare(obs, rho_j, options.min_obs);
    Objective obj{prep, vf, {}};

    // Coarse scan, log-spaced, to bracket the optimum before polishing.
    constexpr int kScan = 81;
    double log_lo = std::log(options.theta_lo), log_hi = std::log(options.theta_hi);
    std::vector<double> grid(kScan);
    std::vector<double> vals(kScan);
    int best = 0;
    for (int i = 0; i < kScan; ++i) {
        grid[i] = std::exp(log_lo + (log_hi - log_lo) * i / (kScan - 1));
        vals[i] = obj(grid[i]);
        if (vals[i] < vals[best]) best = i;
    }

    double theta_hat;
    if (best == 0 || best == kScan - 1) {
        theta_hat = grid[best];  // optimum pinned at the search boundary
    } else {
        BrentOutcome out =
            brent_min(obj, grid[best - 1], grid[best], grid[best + 1], options.tol, 200);
        if (!out.converged) {
            throw NumericError("theta optimizer did not converge after " +
                               std::to_string(out.iters) + " iterations near theta=" +
                               std::to_string(out.x));
        }
        theta_hat = out.x;
    }

    Metrics m = metrics_for_theta(prep, obj, theta_hat);
    bool profiled = vf.mode == VfPolicy::Mode::kProfile;
    double sigma = sigma_for_theta(prep, theta_hat, m.v_f, m.rss, profiled);

    ThetaFit fit;
    fit.theta_hat = theta_hat;
    fit.sigma = sigma;
    fit.ci_lo = theta_hat - 1.96 * sigma;
    fit.ci_hi = theta_hat + 1.96 * sigma;
    fit.r2 = m.r2;
    fit.rmse = m.rmse;
    fit.v_f_used = m.v_f;
    fit.rho_j_used = rho_j;
    fit.n_obs = prep.v.size();
    fit.n_rejected = prep.n_rejected;
    return fit;
}

FixedThetaMetrics metrics_at(std::span<const FDObservation> obs, double theta, double rho_j,
                             const VfPolicy& vf) {
    if (!(theta > 0.0) || !std::isfinite(theta)) {
        throw DomainError("theta must be positive, got " + std::to_string(theta));
    }
    Prepared prep = prepare(obs, rho_j, FitOptions{}.min_obs);
    Objective obj{prep, vf, {}};
    Metrics m = metrics_for_theta(prep, obj, theta);
    return {theta, m.v_f, m.r2, m.rmse, prep.v.size(), prep.n_rejected};
}

double bootstrap_sigma(std::span<const FDObservation> obs, double rho_j, const VfPolicy& vf,
                       int resamples, std::uint64_t seed, const FitOptions& options) {
    if (resamples < 2) throw DomainError("bootstrap needs >= 2 resamples");
    CounterRng rng = CounterRng::keyed(seed, {0xB005});
    std::vector<FDObservation> draw(obs.size());
    std::vector<double> hats;
    hats.reserve(resamples);
    for (int b = 0; b < resamples; ++b) {
        for (std::size_t i = 0; i < obs.size(); ++i) draw[i] = obs[rng.next_below(obs.size())];
        hats.push_back(fit_theta(draw, rho_j, vf, options).theta_hat);
    }
    double mean = 0.0;
    for (double h : hats) mean += h;
    mean /= static_cast<double>(hats.size());
    double ss = 0.0;
    for (double h : hats) ss += (h - mean) * (h - mean);
    return std::sqrt(ss / (static_cast<double>(hats.size()) - 1.0));
}

std::vector<SensitivityRow> sensitivity_table(std::span<const FDObservation> obs,
                                              std::span<const double> rho_j_grid,
                                              const VfPolicy& vf, const FitOptions& options) {
    if (rho_j_grid.empty()) throw DomainError("rho_j grid is empty");
    std::vector<SensitivityRow> rows;
    rows.reserve(rho_j_grid.size());
    for (double rho_j : rho_j_grid) {
        ThetaFit fit = fit_theta(obs, rho_j, vf, options);
        FixedThetaMetrics m_ln3 = metrics_at(obs, kLn3, rho_j, vf);
        FixedThetaMetrics m_gs = metrics_at(obs, 1.0, rho_j, vf);
        rows.push_back({rho_j, fit.theta_hat, fit.sigma, fit.r2, m_ln3.r2, m_gs.r2,
                        std::abs(fit.theta_hat - kLn3) / fit.sigma});
    }
    return rows;
}

ModelComparison compare_models(std::span<const FDObservation> obs, double rho_j,
                               const VfPolicy& vf, const FitOptions& options) {
    ModelComparison cmp;
    cmp.best = fit_theta(obs, rho_j, vf, options);
    cmp.ln3 = metrics_at(obs, kLn3, rho_j, vf);
    cmp.greenshields = metrics_at(obs, 1.0, rho_j, vf);
    cmp.delta_r2_best_ln3 = cmp.best.r2 - cmp.ln3.r2;
    cmp.delta_rmse_best_ln3 = cmp.ln3.rmse - cmp.best.rmse;
    cmp.delta_r2_ln3_gs = cmp.ln3.r2 - cmp.greenshields.r2;
    cmp.delta_rmse_ln3_gs = cmp.greenshields.rmse - cmp.ln3.rmse;
    return cmp;
}

}  // namespace coopperc
