#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace coopperc::stats {

double mean(std::span<const double> values);

// Unbiased (n-1) sample variance; requires >= 2 values.
double sample_variance(std::span<const double> values);
double sample_std(std::span<const double> values);

// sample_std / mean; requires a nonzero mean.
double coefficient_of_variation(std::span<const double> values);

// Linear-interpolated quantile of an unsorted sample, q in [0, 1].
double percentile(std::vector<double> values, double q);

// Regularized upper incomplete gamma Q(s, x) = Gamma(s, x)/Gamma(s),
// series + continued fraction.
double regularized_gamma_q(double s, double x);

// Survival function of the chi-square distribution with dof degrees of
// freedom: P(X > stat).
double chi_square_sf(double stat, int dof);

struct ChiSquareResult {
    double statistic;
    int dof;
    double p_value;
    bool reject;
    int n_bins;  // after tail pooling
};

// Goodness of fit of observed cluster-size counts against Geom(p) on
// {1, 2, ...}. size_counts[k] is the number of clusters of size k+1. Tail
// bins are pooled so every expected count is >= min_expected; the final bin
// absorbs the full geometric tail mass.
ChiSquareResult chi_square_geometric_gof(std::span<const std::uint64_t> size_counts, double p,
                                         double alpha, double min_expected = 5.0);

// Two-sided KS statistic of a sample against Exp(rate).
double ks_statistic_exponential(std::span<const double> sample, double rate);

// Isotonic (non-decreasing) least-squares fit by pool-adjacent-violators,
// with optional weights (empty = unit weights).
std::vector<double> isotonic_increasing(std::span<const double> y, std::span<const double> w = {});

}  // namespace coopperc::stats
