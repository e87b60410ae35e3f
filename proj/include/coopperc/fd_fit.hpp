#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace coopperc {

// One fundamental-diagram point.
struct FDObservation {
    double rho;           // density, veh/km
    double v;             // speed, km/h
    double weight = 1.0;  // bin support when aggregated; 1 for raw points
};

// Free-flow speed handling: either supplied, or profiled out in closed form
// (the model is linear in v_f, so for each theta the optimum is exact).
struct VfPolicy {
    enum class Mode { kGiven, kProfile };
    Mode mode = Mode::kProfile;
    double value = 0.0;

    static VfPolicy given(double v) { return {Mode::kGiven, v}; }
    static VfPolicy profile() { return {Mode::kProfile, 0.0}; }
};

struct ThetaFit {
    double theta_hat = 0.0;
    double sigma = 0.0;      // linearized (Gauss-Newton) standard error
    double ci_lo = 0.0;      // theta_hat - 1.96 sigma
    double ci_hi = 0.0;      // theta_hat + 1.96 sigma
    double r2 = 0.0;
    double rmse = 0.0;       // km/h
    double v_f_used = 0.0;   // km/h
    double rho_j_used = 0.0; // veh/km
    std::size_t n_obs = 0;       // observations used (0 < rho < rho_j)
    std::size_t n_rejected = 0;  // observations dropped for rho >= rho_j
};

struct FixedThetaMetrics {
    double theta = 0.0;
    double v_f_used = 0.0;
    double r2 = 0.0;
    double rmse = 0.0;
    std::size_t n_obs = 0;
    std::size_t n_rejected = 0;
};

struct FitOptions {
    double theta_lo = 0.05;
    double theta_hi = 10.0;
    double tol = 1e-10;        // relative tolerance on theta
    std::size_t min_obs = 10;
};

// Weighted least squares for v = v_f (1 - (rho/rho_j)^theta) over theta in
// [theta_lo, theta_hi]. Observations with rho >= rho_j are excluded and
// counted. sigma comes from the linearized Jacobian at the optimum with
// RSS/(n-k), k = 2 when v_f is profiled, 1 when given.
ThetaFit fit_theta(std::span<const FDObservation> obs, double rho_j, const VfPolicy& vf,
                   const FitOptions& options = {});

// R^2 and RMSE at a fixed exponent. R^2 is taken about the weighted mean
// speed; RMSE uses the weighted residual sum over total weight.
FixedThetaMetrics metrics_at(std::span<const FDObservation> obs, double theta, double rho_j,
                             const VfPolicy& vf);

// Bootstrap cross-check of the linearized sigma: standard deviation of
// theta_hat over observation resamples. Diagnostic only.
double bootstrap_sigma(std::span<const FDObservation> obs, double rho_j, const VfPolicy& vf,
                       int resamples, std::uint64_t seed, const FitOptions& options = {});

struct SensitivityRow {
    double rho_j;
    double theta_hat;
    double sigma;
    double r2_hat;
    double r2_ln3;
    double r2_gs;
    double deviation_sigmas;  // |theta_hat - ln 3| / sigma
};

// One unconstrained fit per jam-density value, with fixed-theta comparisons.
std::vector<SensitivityRow> sensitivity_table(std::span<const FDObservation> obs,
                                              std::span<const double> rho_j_grid,
                                              const VfPolicy& vf, const FitOptions& options = {});

struct ModelComparison {
    ThetaFit best;
    FixedThetaMetrics ln3;
    FixedThetaMetrics greenshields;
    double delta_r2_best_ln3;    // r2(best) - r2(ln3)
    double delta_rmse_best_ln3;  // rmse(ln3) - rmse(best)
    double delta_r2_ln3_gs;      // r2(ln3) - r2(greenshields)
    double delta_rmse_ln3_gs;    // rmse(greenshields) - rmse(ln3)
};

ModelComparison compare_models(std::span<const FDObservation> obs, double rho_j,
                               const VfPolicy& vf, const FitOptions& options = {});

}  // namespace coopperc
