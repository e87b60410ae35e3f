#include "coopperc/percolation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "coopperc/core_math.hpp"
#include "coopperc/error.hpp"
#include "coopperc/rng.hpp"
#include "coopperc/stats.hpp"

namespace coopperc {

namespace {

constexpr std::uint64_t kStreamSample = 0x5A4D01;
constexpr std::uint64_t kStreamPoint = 0x5A4D02;
constexpr std::uint64_t kStreamBootstrap = 0x5A4D03;

ClusterStats stats_from_sizes(std::span<const std::uint32_t> sizes) {
    if (sizes.empty()) throw SampleError("cluster statistics on an empty cluster set");
    ClusterStats st;
    st.n_clusters = sizes.size();
    std::uint32_t max_size = 0;
    double sum = 0.0;
    double agents_ge3 = 0.0;
    std::size_t clusters_ge3 = 0;
    for (std::uint32_t s : sizes) {
        sum += s;
        max_size = std::max(max_size, s);
        if (s >= 3) {
            ++clusters_ge3;
            agents_ge3 += s;
        }
    }
    double n = static_cast<double>(sizes.size());
    st.mean_size = sum / n;
    double ss = 0.0;
    for (std::uint32_t s : sizes) {
        double d = static_cast<double>(s) - st.mean_size;
        ss += d * d;
    }
    st.stderr_mean = sizes.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
    st.pmf_hat.assign(max_size, 0.0);
    for (std::uint32_t s : sizes) st.pmf_hat[s - 1] += 1.0 / n;
    st.frac_ge3 = static_cast<double>(clusters_ge3) / n;
    st.frac_agents_ge3 = sum > 0.0 ? agents_ge3 / sum : 0.0;
    return st;
}

std::vector<std::uint32_t> filtered_sizes(const ClusterSet& cs, EdgePolicy policy) {
    std::vector<std::uint32_t> sizes;
    sizes.reserve(cs.clusters.size());
    for (const Cluster& c : cs.clusters) {
        if (policy == EdgePolicy::kDiscard && c.edge_touching) continue;
        sizes.push_back(static_cast<std::uint32_t>(c.size));
    }
    return sizes;
}

int resolve_threads(int requested, std::size_t jobs) {
    int t = requested;
    if (t <= 0) {
        if (const char* env = std::getenv("COOPPERC_THREADS")) t = std::atoi(env);
    }
    if (t <= 0) t = static_cast<int>(std::thread::hardware_concurrency());
    if (t <= 0) t = 1;
    return static_cast<int>(std::min<std::size_t>(t, jobs));
}

// Linear crossing of a non-decreasing curve through the level 3; isotonic
// regression first so Monte Carlo wiggles cannot create multiple roots.
std::optional<double> crossing_of(std::span<const double> xs, std::span<const double> means) {
    std::vector<double> iso = stats::isotonic_increasing(means);
    for (std::size_t i = 0; i + 1 < iso.size(); ++i) {
        if (iso[i] <= 3.0 && iso[i + 1] >= 3.0) {
            if (iso[i + 1] == iso[i]) return 0.5 * (xs[i] + xs[i + 1]);
            double t = (3.0 - iso[i]) / (iso[i + 1] - iso[i]);
            return xs[i] + t * (xs[i + 1] - xs[i]);
        }
    }
    return std::nullopt;
}

}  // namespace

double SimConfig::effective_window() const {
    return window > 0.0 ? window : 1e4 / lambda;
}

void SimConfig::validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw ConfigError("lambda must be positive, got " + std::to_string(lambda));
    }
    if (!(ell > 0.0) || !std::isfinite(ell)) {
        throw ConfigError("ell must be positive, got " + std::to_string(ell));
    }
    if (replicates < 1) {
        throw ConfigError("replicates must be >= 1, got " + std::to_string(replicates));
    }
    double w = effective_window();
    if (!std::isfinite(w) || !std::isfinite(lambda * w)) {
        throw ConfigError("window/lambda overflow");
    }
    if (w < 100.0 / lambda && !allow_small_window) {
        throw ConfigError("window " + std::to_string(w) + " m holds fewer than 100 expected " +
                          "points; set allow_small_window to override");
    }
}

std::vector<double> sample_points(const SimConfig& config, std::uint64_t replicate) {
    config.validate();
    double w = config.effective_window();
    CounterRng rng = CounterRng::keyed(config.seed, {kStreamSample, replicate});
    std::vector<double> positions;
    positions.reserve(static_cast<std::size_t>(config.lambda * w * 1.1) + 16);
    double pos = rng.next_exponential(config.lambda);
    while (pos <= w) {
        positions.push_back(pos);
        pos += rng.next_exponential(config.lambda);
    }
    return positions;
}

ClusterSet decompose(std::span<const double> positions, double ell,
                     std::optional<std::pair<double, double>> window) {
    if (!(ell > 0.0) || !std::isfinite(ell)) {
        throw DomainError("ell must be positive, got " + std::to_string(ell));
    }
    ClusterSet cs;
    cs.point_count = positions.size();
    if (positions.empty()) return cs;

    for (std::size_t i = 1; i < positions.size(); ++i) {
        if (positions[i] < positions[i - 1]) {
            throw DomainError("positions must be sorted ascending");
        }
    }

    std::size_t start = 0;
    for (std::size_t i = 1; i <= positions.size(); ++i) {
        bool breaks = i == positions.size() || positions[i] - positions[i - 1] > ell;
        if (!breaks) continue;
        Cluster c;
        c.start = start;
        c.size = i - start;
        c.left = positions[start];
        c.right = positions[i - 1];
        c.edge_touching = false;
        if (window) {
            c.edge_touching = (c.left - window->first) <= ell || (window->second - c.right) <= ell;
        }
        cs.clusters.push_back(c);
        start = i;
    }
    return cs;
}

ClusterStats cluster_stats(const ClusterSet& cs, EdgePolicy policy) {
    return stats_from_sizes(filtered_sizes(cs, policy));
}

std::vector<std::uint32_t> collect_cluster_sizes(const SimConfig& config, EdgePolicy policy) {
    config.validate();
    double w = config.effective_window();
    std::vector<std::uint32_t> sizes;
    for (int rep = 0; rep < config.replicates; ++rep) {
        auto positions = sample_points(config, static_cast<std::uint64_t>(rep));
        ClusterSet cs = decompose(positions, config.ell, std::make_pair(0.0, w));
        for (const Cluster& c : cs.clusters) {
            if (policy == EdgePolicy::kDiscard && c.edge_touching) continue;
            sizes.push_back(static_cast<std::uint32_t>(c.size));
        }
    }
    return sizes;
}

ClusterStats replicated_stats(const SimConfig& config, EdgePolicy policy) {
    return stats_from_sizes(collect_cluster_sizes(config, policy));
}

double agent_weighted_mean_size(const ClusterSet& cs, EdgePolicy policy) {
    auto sizes = filtered_sizes(cs, policy);
    if (sizes.empty()) throw SampleError("agent-weighted mean on an empty cluster set");
    double sum = 0.0, sum_sq = 0.0;
    for (std::uint32_t s : sizes) {
        sum += s;
        sum_sq += static_cast<double>(s) * s;
    }
    return sum_sq / sum;
}

double gap_cv(std::span<const double> positions) {
    if (positions.size() < 3) throw SampleError("gap CV needs >= 3 points");
    std::vector<double> gaps(positions.size() - 1);
    for (std::size_t i = 1; i < positions.size(); ++i) {
        if (positions[i] < positions[i - 1]) {
            throw DomainError("positions must be sorted ascending");
        }
        gaps[i - 1] = positions[i] - positions[i - 1];
    }
    return stats::coefficient_of_variation(gaps);
}

SweepResult sweep(std::span<const double> x_grid, const SimConfig& base,
                  const SweepOptions& options) {
    if (x_grid.empty()) throw ConfigError("sweep grid is empty");
    for (double x : x_grid) {
        if (!(x > 0.0) || !std::isfinite(x)) {
            throw ConfigError("sweep grid values must be positive");
        }
    }
    if (!(base.ell > 0.0)) throw ConfigError("base config needs ell > 0");
    if (options.clusters_per_point == 0) throw ConfigError("clusters_per_point must be >= 1");

    const std::size_t n_points = x_grid.size();
    std::vector<std::vector<std::uint32_t>> sizes_per_point(n_points);
    std::vector<SweepRow> rows(n_points);

    auto run_point = [&](std::size_t i) {
        SimConfig cfg = base;
        cfg.lambda = x_grid[i] / base.ell;
        cfg.seed = CounterRng::derive(base.seed, {kStreamPoint, i});
        double w = cfg.effective_window();
        auto& sizes = sizes_per_point[i];
        sizes.reserve(options.clusters_per_point + 64);
        int replicate = 0;
        while (sizes.size() < options.clusters_per_point) {
            if (replicate >= options.max_replicates) {
                throw NumericError("sweep point x=" + std::to_string(x_grid[i]) +
                                   " did not reach its cluster target");
            }
            auto positions = sample_points(cfg, static_cast<std::uint64_t>(replicate));
            ClusterSet cs = decompose(positions, cfg.ell, std::make_pair(0.0, w));
            for (const Cluster& c : cs.clusters) {
                if (options.edge_policy == EdgePolicy::kDiscard && c.edge_touching) continue;
                sizes.push_back(static_cast<std::uint32_t>(c.size));
            }
            ++replicate;
        }
        ClusterStats st = stats_from_sizes(sizes);
        rows[i] = {x_grid[i], st.mean_size, st.frac_agents_ge3, st.stderr_mean, st.n_clusters};
    };

    int n_threads = resolve_threads(options.threads, n_points);
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < n_points; ++i) run_point(i);
    } else {
        std::exception_ptr first_error;
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        std::mutex err_mutex;
        for (int t = 0; t < n_threads; ++t) {
            pool.emplace_back([&] {
                for (;;) {
                    std::size_t i = next.fetch_add(1);
                    if (i >= n_points) return;
                    try {
                        run_point(i);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(err_mutex);
                        if (!first_error) first_error = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    SweepResult result;
    result.rows = rows;
    if (n_points < 2) return result;

    std::vector<double> xs(x_grid.begin(), x_grid.end());
    std::vector<double> means(n_points);
    for (std::size_t i = 0; i < n_points; ++i) means[i] = rows[i].mean_size;
    auto point_estimate = crossing_of(xs, means);
    if (!point_estimate) return result;

    CounterRng boot_rng = CounterRng::keyed(base.seed, {kStreamBootstrap});
    std::vector<double> crossings;
    crossings.reserve(options.bootstrap_resamples);
    std::vector<double> resampled(n_points);
    for (int b = 0; b < options.bootstrap_resamples; ++b) {
        for (std::size_t i = 0; i < n_points; ++i) {
            const auto& sizes = sizes_per_point[i];
            double sum = 0.0;
            for (std::size_t k = 0; k < sizes.size(); ++k) {
                sum += sizes[boot_rng.next_below(sizes.size())];
            }
            resampled[i] = sum / static_cast<double>(sizes.size());
        }
        if (auto c = crossing_of(xs, resampled)) crossings.push_back(*c);
    }
    if (crossings.size() < static_cast<std::size_t>(options.bootstrap_resamples) / 2) {
        return result;  // crossing too unstable to report an interval
    }
    CrossingEstimate est;
    est.x_hat = *point_estimate;
    est.ci_lo = stats::percentile(crossings, 0.025);
    est.ci_hi = stats::percentile(crossings, 0.975);
    est.resamples = static_cast<int>(crossings.size());
    result.crossing = est;
    return result;
}

}  // namespace coopperc
