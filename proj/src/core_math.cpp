#include "coopperc/core_math.hpp"

#include <cmath>
#include <string>

#include "coopperc/error.hpp"

namespace coopperc {

namespace {

// exp(x) overflows double just above this.
constexpr double kExpOverflow = 709.782712893384;

void require_positive_finite(double v, const char* name) {
    if (!std::isfinite(v) || v <= 0.0) {
        throw DomainError(std::string(name) + " must be positive and finite, got " +
                          std::to_string(v));
    }
}

// 1/x - 1/(e^x - 1), the dimensionless part of the conditional gap mean.
// Direct evaluation cancels catastrophically near 0; switch to the series
// 1/2 - x/12 + x^3/720 - x^5/30240 there.
double gap_mean_factor(double x) {
    if (x < 1e-5) {
        double x2 = x * x;
        return 0.5 - x / 12.0 + x * x2 / 720.0 - x * x2 * x2 / 30240.0;
    }
    if (x > kExpOverflow) return 1.0 / x;
    return 1.0 / x - 1.0 / std::expm1(x);
}

}  // namespace

ThresholdContext::ThresholdContext(double lambda_, double ell_)
    : lambda(lambda_), ell(ell_), x(lambda_ * ell_) {
    require_positive_finite(lambda_, "lambda");
    require_positive_finite(ell_, "ell");
}

ClusterLaw::ClusterLaw(double x) {
    require_positive_finite(x, "x");
    p = std::exp(-x);
    mean = expected_cluster_size(x);
}

double ClusterLaw::pmf(std::int64_t n) const {
    if (n < 1) throw DomainError("cluster size must be >= 1, got " + std::to_string(n));
    return p * std::pow(1.0 - p, static_cast<double>(n - 1));
}

double ClusterLaw::pgf(double z) const {
    if (!(z >= 0.0 && z <= 1.0)) {
        throw DomainError("pgf argument must lie in [0, 1], got " + std::to_string(z));
    }
    return p * z / (1.0 - (1.0 - p) * z);
}

double feasibility_ratio(double x) {
    require_positive_finite(x, "x");
    return 2.0 / std::expm1(x);
}

double solve_fixed_point(double tol) {
    require_positive_finite(tol, "tol");
    // g(x) = ratio(x) - 1 is strictly decreasing; g(lo) > 0 > g(hi).
    double lo = 1e-9, hi = 50.0;
    double g_lo = feasibility_ratio(lo) - 1.0;
    double g_hi = feasibility_ratio(hi) - 1.0;
    if (!(g_lo > 0.0 && g_hi < 0.0)) {
        throw NumericError("fixed-point bracket failure on [1e-9, 50]");
    }
    while (hi - lo > 1e-6) {
        double mid = 0.5 * (lo + hi);
        if (feasibility_ratio(mid) - 1.0 > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Secant polish inside the bracket.
    double a = lo, b = hi;
    double ga = feasibility_ratio(a) - 1.0;
    double gb = feasibility_ratio(b) - 1.0;
    for (int it = 0; it < 50 && a != b; ++it) {
        if (gb == ga) break;
        double c = b - gb * (b - a) / (gb - ga);
        if (c < lo) c = lo;
        if (c > hi) c = hi;
        a = b;
        ga = gb;
        b = c;
        gb = feasibility_ratio(b) - 1.0;
        if (gb == 0.0 || std::abs(b - a) < 1e-16) break;
    }
    return b;
}

double expected_cluster_size(double x) {
    require_positive_finite(x, "x");
    if (x > kExpOverflow) {
        throw RangeError("expected cluster size overflows for x = " + std::to_string(x));
    }
    return std::exp(x);
}

double cluster_pmf(std::int64_t n, double x) {
    return ClusterLaw(x).pmf(n);
}

double cluster_pgf(double z, double x) {
    return ClusterLaw(x).pgf(z);
}

double shannon_entropy(std::span<const double> probs) {
    double sum = 0.0;
    for (double pi : probs) {
        if (!std::isfinite(pi) || pi < 0.0) {
            throw DomainError("probabilities must be finite and >= 0");
        }
        sum += pi;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw DomainError("probabilities must sum to 1, got " + std::to_string(sum));
    }
    double h = 0.0;
    for (double pi : probs) {
        if (pi > 0.0) h -= pi * std::log(pi);
    }
    return h;
}

double conditional_gap_mean(double lambda, double ell) {
    require_positive_finite(lambda, "lambda");
    require_positive_finite(ell, "ell");
    return ell * gap_mean_factor(lambda * ell);
}

WavelengthBand wavelength_band(double lambda, double ell) {
    ThresholdContext ctx(lambda, ell);
    double gm = conditional_gap_mean(lambda, ell);
    double em1 = std::expm1(ctx.x);
    WavelengthBand band;
    band.lambda_a = 2.0 * gm;
    band.span = em1 * gm;
    band.lambda_min = 2.0 * ell;
    band.span_ell = em1 * ell;
    band.ratio = 2.0 / em1;  // the conditional mean cancels exactly
    band.feasible = ctx.x >= kLn3;
    return band;
}

PenetrationResult critical_penetration(double rho0, double ell) {
    require_positive_finite(rho0, "rho0");
    require_positive_finite(ell, "ell");
    double p_c = kLn3 / (rho0 * ell);
    return {p_c, p_c <= 1.0};
}

DisruptionResult critical_disruption_fraction(double sf) {
    require_positive_finite(sf, "sf");
    double f_c = 1.0 - kLn3 / sf;
    if (f_c < 0.0) return {0.0, true};
    return {f_c, false};
}

double lwr_speed(double rho, const LWRParams& params) {
    require_positive_finite(params.v_f, "v_f");
    require_positive_finite(params.rho_j, "rho_j");
    require_positive_finite(params.theta, "theta");
    if (!std::isfinite(rho) || rho < 0.0 || rho > params.rho_j) {
        throw DomainError("rho must lie in [0, rho_j], got " + std::to_string(rho));
    }
    if (rho == 0.0) return params.v_f;
    return params.v_f * (1.0 - std::pow(rho / params.rho_j, params.theta));
}

double lwr_critical_density_ratio(double theta) {
    require_positive_finite(theta, "theta");
    return std::pow(1.0 / (1.0 + theta), 1.0 / theta);
}

}  // namespace coopperc
