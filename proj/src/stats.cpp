#include "coopperc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "coopperc/error.hpp"

namespace coopperc::stats {

namespace {

// ln Gamma(x) for x > 0 (Lanczos).
double ln_gamma(double x) {
    static const double cof[6] = {76.18009172947146,  -86.50532032941677, 24.01409824083091,
                                  -1.231739572450155, 0.1208650973866179e-2, -0.5395239384953e-5};
    double y = x;
    double tmp = x + 5.5;
    tmp -= (x + 0.5) * std::log(tmp);
    double ser = 1.000000000190015;
    for (double c : cof) ser += c / ++y;
    return -tmp + std::log(2.5066282746310005 * ser / x);
}

// Lower regularized gamma P(s, x) by series; valid for x < s + 1.
double gamma_p_series(double s, double x) {
    double ap = s;
    double sum = 1.0 / s;
    double del = sum;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + s * std::log(x) - ln_gamma(s));
}

// Upper regularized gamma Q(s, x) by continued fraction; valid for x >= s + 1.
double gamma_q_cf(double s, double x) {
    const double tiny = std::numeric_limits<double>::min() / 1e-30;
    double b = x + 1.0 - s;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - s);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return std::exp(-x + s * std::log(x) - ln_gamma(s)) * h;
}

}  // namespace

double mean(std::span<const double> values) {
    if (values.empty()) throw SampleError("mean of an empty sample");
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
    if (values.size() < 2) throw SampleError("sample variance needs >= 2 values");
    double m = mean(values);
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return s / static_cast<double>(values.size() - 1);
}

double sample_std(std::span<const double> values) { return std::sqrt(sample_variance(values)); }

double coefficient_of_variation(std::span<const double> values) {
    double m = mean(values);
    if (m == 0.0) throw DomainError("coefficient of variation undefined for zero mean");
    return sample_std(values) / m;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw SampleError("percentile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    double pos = q * static_cast<double>(values.size() - 1);
    auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= values.size()) return values.back();
    double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

double regularized_gamma_q(double s, double x) {
    if (!(s > 0.0) || x < 0.0) throw DomainError("gamma_q requires s > 0, x >= 0");
    if (x == 0.0) return 1.0;
    if (x < s + 1.0) return 1.0 - gamma_p_series(s, x);
    return gamma_q_cf(s, x);
}

double chi_square_sf(double stat, int dof) {
    if (dof < 1) throw DomainError("chi-square dof must be >= 1");
    if (stat < 0.0) throw DomainError("chi-square statistic must be >= 0");
    return regularized_gamma_q(0.5 * dof, 0.5 * stat);
}

ChiSquareResult chi_square_geometric_gof(std::span<const std::uint64_t> size_counts, double p,
                                         double alpha, double min_expected) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("geometric parameter must lie in (0, 1)");
    std::uint64_t total = 0;
    for (auto c : size_counts) total += c;
    if (total == 0) throw SampleError("chi-square GoF on an empty sample");
    double n = static_cast<double>(total);

    // Individual bins for sizes 1..m-1, pooled tail bin for sizes >= m. The
    // tail expectation n (1-p)^{m-1} must also stay >= min_expected.
    std::vector<double> observed;
    std::vector<double> expected;
    double pmf = p;        // P(N = k)
    double tail = 1.0;     // P(N >= k)
    std::size_t k = 1;
    while (true) {
        double tail_next = tail - pmf;  // P(N >= k+1)
        bool can_split = n * pmf >= min_expected && n * tail_next >= min_expected &&
                         k <= size_counts.size();
        if (!can_split) break;
        observed.push_back(static_cast<double>(size_counts[k - 1]));
        expected.push_back(n * pmf);
        tail = tail_next;
        pmf *= (1.0 - p);
        ++k;
    }
    // Pooled tail: everything of size >= k.
    double obs_tail = 0.0;
    for (std::size_t i = k - 1; i < size_counts.size(); ++i) {
        obs_tail += static_cast<double>(size_counts[i]);
    }
    observed.push_back(obs_tail);
    expected.push_back(n * tail);

    if (observed.size() < 2) throw SampleError("chi-square GoF needs >= 2 bins after pooling");

    double stat = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        double d = observed[i] - expected[i];
        stat += d * d / expected[i];
    }
    int dof = static_cast<int>(observed.size()) - 1;
    double pv = chi_square_sf(stat, dof);
    return {stat, dof, pv, pv < alpha, static_cast<int>(observed.size())};
}

double ks_statistic_exponential(std::span<const double> sample, double rate) {
    if (sample.empty()) throw SampleError("KS statistic of an empty sample");
    if (!(rate > 0.0)) throw DomainError("exponential rate must be > 0");
    std::vector<double> s(sample.begin(), sample.end());
    std::sort(s.begin(), s.end());
    double n = static_cast<double>(s.size());
    double d = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        double cdf = -std::expm1(-rate * s[i]);
        double hi = static_cast<double>(i + 1) / n - cdf;
        double lo = cdf - static_cast<double>(i) / n;
        d = std::max({d, hi, lo});
    }
    return d;
}

std::vector<double> isotonic_increasing(std::span<const double> y, std::span<const double> w) {
    if (!w.empty() && w.size() != y.size()) {
        throw DomainError("isotonic regression: weight/value size mismatch");
    }
    struct Block {
        double value;
        double weight;
        std::size_t count;
    };
    std::vector<Block> blocks;
    blocks.reserve(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        blocks.push_back({y[i], w.empty() ? 1.0 : w[i], 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].value >= blocks.back().value) {
            Block b = blocks.back();
            blocks.pop_back();
            Block& a = blocks.back();
            double tw = a.weight + b.weight;
            a.value = (a.value * a.weight + b.value * b.weight) / tw;
            a.weight = tw;
            a.count += b.count;
        }
    }
    std::vector<double> out;
    out.reserve(y.size());
    for (const Block& b : blocks) out.insert(out.end(), b.count, b.value);
    return out;
}

}  // namespace coopperc::stats
