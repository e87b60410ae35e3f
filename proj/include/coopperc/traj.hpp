#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coopperc/fd_fit.hpp"

namespace coopperc {

// One trajectory row as ingested. Speeds are km/h after per-source scaling;
// positions are metres on a linear reference.
struct TrajRecord {
    std::string vehicle_id;
    double t = 0.0;      // seconds
    double s = 0.0;      // metres
    double speed = 0.0;  // km/h
    std::string segment_id;  // optional tag; pipelines segment by position, not by this
    std::string lane;        // optional lane/direction tag
};

struct TrajPoint {
    double t;
    double s;
    double speed;
};

struct Trajectory {
    std::string vehicle_id;
    std::string lane;  // per-vehicle direction/lane tag ("" when untagged)
    std::vector<TrajPoint> points;  // strictly increasing in t
};

struct IngestReport {
    std::size_t rows_in = 0;           // data rows seen (header excluded)
    std::size_t rows_parsed = 0;       // rows that reached the output
    std::size_t rows_quarantined = 0;  // malformed rows + rows of quarantined vehicles
    std::size_t vehicles_quarantined = 0;
    std::vector<std::string> notes;    // unit conversions and other metadata
};

struct TrajDataset {
    std::vector<Trajectory> trajectories;  // sorted by vehicle_id
    IngestReport report;
};

// ---------------------------------------------------------------------------
// Ingestion

struct FdColumnMap {
    std::string rho_col = "rho";
    std::string v_col = "v";
    std::string weight_col;       // empty = unit weights
    double speed_scale = 1.0;     // e.g. 0.1 for sources recording 0.1 km/h units
    double rho_cap = 200.0;       // veh/km physical cap
    std::size_t bad_row_budget = 100;
};

struct FdIngest {
    std::vector<FDObservation> observations;
    IngestReport report;
};

// Streaming core: invokes `sink` once per valid observation, holding only one
// record in memory. Malformed rows (unparsable, non-finite, rho <= 0,
// rho > cap, v < 0, weight <= 0) are counted; exceeding the budget raises
// IngestError with the offending line.
IngestReport for_each_fd_row(std::istream& in, const FdColumnMap& map,
                             const std::function<void(const FDObservation&)>& sink);

FdIngest read_fd_csv(std::istream& in, const FdColumnMap& map);

struct GenericTrajSchema {
    std::string vehicle_col = "vehicle_id";
    std::string t_col = "t";
    std::string s_col = "s";
    std::string speed_col = "speed";
    std::string segment_col;  // optional
    std::string lane_col;     // optional
    double speed_scale = 1.0;
    std::size_t bad_row_budget = 100;
};

// highD-style tracks file: columns (frame, id, x, xVelocity). Times come from
// the frame rate; xVelocity is m/s and signed, so speed = |xVelocity| * 3.6
// and the sign becomes the per-vehicle direction tag.
struct HighdTrajSchema {
    double frame_rate_hz = 25.0;
    std::size_t bad_row_budget = 100;
};

// Groups rows per vehicle and sorts by time. Vehicles with duplicate
// timestamps are quarantined (reported, never a global failure), which keeps
// the result independent of input file concatenation order.
TrajDataset read_traj_csv(std::istream& in, const GenericTrajSchema& schema);
TrajDataset read_traj_csv(std::istream& in, const HighdTrajSchema& schema);

// Frame rate from the recording's metadata sidecar: for XX_tracks.csv looks
// for XX_recordingMeta.csv next to it and reads its frameRate column.
// nullopt when no sidecar is present.
std::optional<double> highd_frame_rate_from_meta(const std::filesystem::path& tracks_path);

// Builds a dataset from in-memory records (same grouping and quarantine
// rules as the readers).
TrajDataset dataset_from_records(std::span<const TrajRecord> records);

// Linear interpolation of a trajectory's state; nullopt outside its life.
std::optional<TrajPoint> state_at(const Trajectory& traj, double t);

// ---------------------------------------------------------------------------
// Fundamental-diagram aggregation

struct FdAggregation {
    std::vector<FDObservation> observations;
    bool empty_warning = false;  // no bin reached 2 vehicles
    std::size_t n_snapshots = 0;
};

// Snapshots the fleet once per time bin (at the bin midpoint), partitions
// interpolated positions into space bins, and emits one observation per
// (snapshot, direction, bin) holding >= 2 vehicles: rho in veh/km, v = mean
// speed, weight = vehicle count.
FdAggregation trajectories_to_fd(const TrajDataset& data, double space_bin_m, double time_bin_s,
                                 const std::optional<std::string>& lane_filter = std::nullopt);

// ---------------------------------------------------------------------------
// Gap statistics

// CV of inter-vehicle spacings at one instant, vehicles restricted to
// positions in [s_lo, s_hi]. Needs >= 3 vehicles present.
double gap_cv_snapshot(const TrajDataset& data, double t_snap, double s_lo, double s_hi);

// ---------------------------------------------------------------------------
// Speed variance vs topological density

struct SnapshotSample {
    std::string segment_id;
    double t_snap;
    std::size_t n_vehicles;
    double segment_length;   // m
    double lambda;           // veh/m
    double x;                // lambda * ell
    double speed_variance;   // (km/h)^2, n-1 denominator
};

struct VarianceBinRow {
    double x_lo;
    double x_hi;
    std::size_t n_samples;
    double mean_variance;
};

struct VarianceSummary {
    double below_mean = 0.0;  // mean variance over samples with x < ln 3
    double above_mean = 0.0;  // mean variance over samples with x >= ln 3
    double ratio = 0.0;       // below / above
    std::size_t n_below = 0;
    std::size_t n_above = 0;
    bool partial = false;          // one side empty
    bool undefined_ratio = false;  // above-side mean is zero (or absent)
};

struct VarianceResult {
    std::vector<SnapshotSample> samples;
    std::vector<VarianceBinRow> bins;
    VarianceSummary summary;
};

struct VarianceConfig {
    double ell = 300.0;             // m
    double segment_length = 500.0;  // m
    double snapshot_period = 60.0;  // s
    std::vector<double> x_bin_edges;  // empty = 0, 0.25, ..., 3.0
    std::size_t min_vehicles = 2;
};

// Assembles (segment, snapshot) speed-variance samples on a position
// partition of the linear reference, bins them by x = lambda * ell
// (left-closed bins), and summarises the two sides of x = ln 3. The boundary
// sample x = ln 3 counts as "above".
VarianceResult variance_by_density(const TrajDataset& data, const VarianceConfig& config);

// ---------------------------------------------------------------------------
// Phantom-jam detection

struct JamConfig {
    double drop_threshold = 20.0;  // km/h
    double window = 120.0;         // s
    double jump_threshold = 200.0; // m; consecutive-record jump marking an artifact
};

struct JamEvent {
    std::string vehicle_id;
    double t_start;            // time of the pre-drop maximum
    double t_end;              // time of the post-drop minimum
    double v_before;           // km/h
    double v_after;            // km/h
    double drop;               // v_before - v_after, > drop_threshold
    double max_position_jump;  // largest consecutive |ds| inside the event
    bool artifact;             // position jump exceeded the threshold
};

// Sliding-window scan per vehicle; overlapping candidate windows of one
// braking episode are merged into a single event keeping the steepest pair.
// All detections are returned, artifacts flagged.
std::vector<JamEvent> detect_jams(const TrajDataset& data, const JamConfig& config = {});

}  // namespace coopperc
