#pragma once

#include <cstdint>
#include <span>

namespace coopperc {

// Feasibility threshold for bidirectional coordination on a 1D Poisson
// proximity graph: the unique positive root of 2/(e^x - 1) = 1.
inline constexpr double kLn3 = 1.0986122886681098;

// The pair (intensity, range) and their dimensionless product. Every
// dimensionless quantity downstream depends on (lambda, ell) only through x;
// spans in metres scale linearly in ell.
struct ThresholdContext {
    double lambda;  // agents per metre, > 0
    double ell;     // interaction range in metres, > 0
    double x;       // lambda * ell

    ThresholdContext(double lambda_, double ell_);
};

// Geometric cluster-size law of the proximity graph: N ~ Geom(p) on {1,2,...}
// with p = e^{-x} and mean 1/p = e^{x}.
struct ClusterLaw {
    double p;     // success parameter, in (0, 1)
    double mean;  // expected cluster size, e^{x}

    explicit ClusterLaw(double x);
    double pmf(std::int64_t n) const;
    double pgf(double z) const;
};

// Wavelength feasibility band. Two unit conventions are carried side by side:
// the conditional-gap form (lambda_a, span) and the dimensional form
// (lambda_min = 2*ell, span_ell). Their ratio is identical; the conditional
// mean cancels exactly.
struct WavelengthBand {
    double lambda_a;    // 2 * E[d | d <= ell], metres
    double span;        // (e^x - 1) * E[d | d <= ell], metres
    double lambda_min;  // 2 * ell, metres
    double span_ell;    // (e^x - 1) * ell, metres
    double ratio;       // lambda_a / span = 2 / (e^x - 1)
    bool feasible;      // x >= ln 3; boundary counts as feasible
};

// Power-law speed-density relation v(rho) = v_f * (1 - (rho/rho_j)^theta).
struct LWRParams {
    double v_f;    // free-flow speed, km/h, > 0
    double rho_j;  // jam density, veh/km, > 0
    double theta;  // exponent, > 0
};

struct PenetrationResult {
    double p_c;      // ln3 / (rho0 * ell); may exceed 1
    bool achievable; // p_c <= 1
};

struct DisruptionResult {
    double f_c;           // max(0, 1 - ln3/sf)
    bool below_threshold; // sf < ln3: conduction already blocked, f_c clamped to 0
};

// 2 / (e^x - 1). Strictly decreasing on (0, inf).
double feasibility_ratio(double x);

// Root of feasibility_ratio(x) = 1 on [1e-9, 50]: bisection to bracket, then
// secant polish. |root - ln 3| <= tol.
double solve_fixed_point(double tol);

// e^x. Throws RangeError once the result would overflow a double.
double expected_cluster_size(double x);

// Geometric pmf e^{-x} (1 - e^{-x})^{n-1}, n >= 1.
double cluster_pmf(std::int64_t n, double x);

// Probability generating function p z / (1 - (1-p) z) with p = e^{-x},
// z in [0, 1].
double cluster_pgf(double z, double x);

// -sum p_i ln p_i in nats; 0 ln 0 = 0. Entries must be >= 0 and sum to 1
// within 1e-9.
double shannon_entropy(std::span<const double> probs);

// E[d | d <= ell] for d ~ Exp(lambda), in metres. Stable down to x -> 0
// (limit ell/2) and up to x -> inf (limit 1/lambda).
double conditional_gap_mean(double lambda, double ell);

WavelengthBand wavelength_band(double lambda, double ell);

// p_c = ln3 / (rho0 * ell); rho0 in veh/m, ell in m.
PenetrationResult critical_penetration(double rho0, double ell);

// f_c = 1 - ln3/sf, clamped at 0 when sf < ln3.
DisruptionResult critical_disruption_fraction(double sf);

// v(rho) for 0 <= rho <= rho_j. Throws DomainError outside that interval.
double lwr_speed(double rho, const LWRParams& params);

// Flow-maximising density fraction rho_c / rho_j = (1/(1+theta))^{1/theta}.
double lwr_critical_density_ratio(double theta);

}  // namespace coopperc
