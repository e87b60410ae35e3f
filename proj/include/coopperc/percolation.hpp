#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace coopperc {

// One Monte Carlo window. The window defaults to 1e4/lambda so edge-discard
// bias stays below measurement noise; windows under 100/lambda are rejected
// unless allow_small_window is set.
struct SimConfig {
    double lambda = 0.0;       // agents per metre
    double ell = 0.0;          // interaction range, metres
    double window = 0.0;       // interval length in metres; <= 0 means default
    int replicates = 1;        // windows pooled by replicated_stats
    std::uint64_t seed = 0;
    bool allow_small_window = false;

    double effective_window() const;
    void validate() const;  // throws ConfigError
};

struct Cluster {
    std::size_t start;  // index of leftmost member in the position array
    std::size_t size;
    double left;        // metres
    double right;       // metres
    bool edge_touching;
};

struct ClusterSet {
    std::vector<Cluster> clusters;
    std::size_t point_count = 0;
};

enum class EdgePolicy { kDiscard, kKeep };

struct ClusterStats {
    double mean_size = 0.0;
    double stderr_mean = 0.0;       // sample std of sizes / sqrt(n_clusters)
    std::vector<double> pmf_hat;    // pmf_hat[k] = fraction of clusters of size k+1
    double frac_ge3 = 0.0;          // fraction of clusters with >= 3 members
    double frac_agents_ge3 = 0.0;   // fraction of agents in such clusters
    std::size_t n_clusters = 0;
};

// Samples one replicate of the Poisson process on [0, window] by cumulative
// exponential gaps, sorted, deterministic under (seed, replicate).
std::vector<double> sample_points(const SimConfig& config, std::uint64_t replicate = 0);

// Splits sorted positions into maximal runs with consecutive gaps <= ell
// (closed inequality: a gap of exactly ell connects). When window bounds are
// given, clusters whose extremal point lies within ell of a boundary are
// flagged edge_touching. Throws DomainError on unsorted input.
ClusterSet decompose(std::span<const double> positions, double ell,
                     std::optional<std::pair<double, double>> window = std::nullopt);

// Summary statistics under the given edge policy. Throws SampleError when the
// policy leaves no clusters.
ClusterStats cluster_stats(const ClusterSet& cs, EdgePolicy policy);

// Cluster sizes pooled over config.replicates independent windows
// (replicate indices 0..replicates-1), policy-filtered.
std::vector<std::uint32_t> collect_cluster_sizes(const SimConfig& config, EdgePolicy policy);

// cluster_stats over the pooled replicate windows.
ClusterStats replicated_stats(const SimConfig& config, EdgePolicy policy);

// Size-biased variant: average cluster size seen from a uniformly random
// agent. Not used for threshold estimation; exposed for sensitivity checks.
double agent_weighted_mean_size(const ClusterSet& cs, EdgePolicy policy);

// Coefficient of variation of consecutive gaps (n-1 std). Needs >= 3 points.
double gap_cv(std::span<const double> positions);

struct SweepRow {
    double x;
    double mean_size;
    double frac_agents_ge3;
    double stderr_mean;
    std::size_t n_clusters;
};

struct CrossingEstimate {
    double x_hat;   // where the isotonic mean-size curve crosses 3
    double ci_lo;   // bootstrap percentile CI
    double ci_hi;
    int resamples;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::optional<CrossingEstimate> crossing;
};

struct SweepOptions {
    std::size_t clusters_per_point = 10000;  // edge-filtered cluster target
    EdgePolicy edge_policy = EdgePolicy::kDiscard;
    int bootstrap_resamples = 200;
    int max_replicates = 100000;  // safety stop per grid point
    int threads = 0;              // 0 = COOPPERC_THREADS env or hardware default
};

// One ClusterStats summary per grid value of x = lambda*ell (lambda = x/ell
// with ell from the base config), each accumulated over as many replicate
// windows as needed to reach the per-point cluster target. Grid points are
// independent streams keyed by (seed, point index), so the result does not
// depend on thread scheduling. A crossing estimate is produced whenever the
// grid has >= 2 points and the mean-size curve straddles 3.
SweepResult sweep(std::span<const double> x_grid, const SimConfig& base,
                  const SweepOptions& options);

}  // namespace coopperc
