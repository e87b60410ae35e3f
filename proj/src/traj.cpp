#include "coopperc/traj.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <string>
#include <utility>

#include "coopperc/core_math.hpp"
#include "coopperc/csv.hpp"
#include "coopperc/error.hpp"
#include "coopperc/stats.hpp"

namespace coopperc {

namespace {

constexpr double kMsToKmh = 3.6;

struct VehicleAccum {
    std::vector<TrajPoint> points;
    std::string lane;
    double dir_accum = 0.0;
};

// Sorts per-vehicle records by time and quarantines vehicles whose timeline
// contains duplicate timestamps: two states at one instant cannot be ordered,
// while mere out-of-order rows (file concatenation) sort cleanly.
TrajDataset finalize(std::map<std::string, VehicleAccum>&& vehicles, IngestReport report) {
    TrajDataset data;
    data.trajectories.reserve(vehicles.size());
    for (auto& [id, acc] : vehicles) {
        std::stable_sort(acc.points.begin(), acc.points.end(),
                         [](const TrajPoint& a, const TrajPoint& b) { return a.t < b.t; });
        bool duplicate = false;
        for (std::size_t i = 1; i < acc.points.size(); ++i) {
            if (acc.points[i].t == acc.points[i - 1].t) {
                duplicate = true;
                break;
            }
        }
        if (duplicate) {
            report.rows_parsed -= acc.points.size();
            report.rows_quarantined += acc.points.size();
            ++report.vehicles_quarantined;
            continue;
        }
        Trajectory traj;
        traj.vehicle_id = id;
        traj.lane = acc.lane;
        traj.points = std::move(acc.points);
        data.trajectories.push_back(std::move(traj));
    }
    data.report = std::move(report);
    return data;
}

struct QuarantineBudget {
    std::size_t budget;
    std::size_t count = 0;

    void add(std::size_t line) {
        if (++count > budget) {
            throw IngestError("bad-row budget of " + std::to_string(budget) + " exceeded", line);
        }
    }
};

}  // namespace

IngestReport for_each_fd_row(std::istream& in, const FdColumnMap& map,
                             const std::function<void(const FDObservation&)>& sink) {
    CsvReader reader(in);
    if (reader.header().empty()) throw IngestError("missing header row", 1);
    std::size_t rho_idx = column_index(reader.header(), map.rho_col);
    std::size_t v_idx = column_index(reader.header(), map.v_col);
    std::size_t w_idx = 0;
    bool has_weight = !map.weight_col.empty();
    if (has_weight) w_idx = column_index(reader.header(), map.weight_col);

    IngestReport report;
    if (map.speed_scale != 1.0) {
        report.notes.push_back("speeds scaled by " + std::to_string(map.speed_scale));
    }
    QuarantineBudget quarantine{map.bad_row_budget};
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        ++report.rows_in;
        std::size_t line = reader.record_line();
        try {
            std::size_t needed = std::max({rho_idx, v_idx, has_weight ? w_idx : 0});
            if (fields.size() <= needed) throw IngestError("short row", line);
            FDObservation obs;
            obs.rho = parse_double_field(fields[rho_idx], map.rho_col, line);
            obs.v = parse_double_field(fields[v_idx], map.v_col, line) * map.speed_scale;
            obs.weight = has_weight ? parse_double_field(fields[w_idx], map.weight_col, line) : 1.0;
            if (!std::isfinite(obs.rho) || obs.rho <= 0.0 || obs.rho > map.rho_cap ||
                !std::isfinite(obs.v) || obs.v < 0.0 || !std::isfinite(obs.weight) ||
                obs.weight <= 0.0) {
                throw IngestError("value out of range", line);
            }
            sink(obs);
            ++report.rows_parsed;
        } catch (const IngestError&) {
            ++report.rows_quarantined;
            quarantine.add(line);
        }
    }
    return report;
}

FdIngest read_fd_csv(std::istream& in, const FdColumnMap& map) {
    FdIngest result;
    result.report = for_each_fd_row(
        in, map, [&](const FDObservation& obs) { result.observations.push_back(obs); });
    return result;
}

TrajDataset read_traj_csv(std::istream& in, const GenericTrajSchema& schema) {
    CsvReader reader(in);
    if (reader.header().empty()) throw IngestError("missing header row", 1);
    std::size_t id_idx = column_index(reader.header(), schema.vehicle_col);
    std::size_t t_idx = column_index(reader.header(), schema.t_col);
    std::size_t s_idx = column_index(reader.header(), schema.s_col);
    std::size_t v_idx = column_index(reader.header(), schema.speed_col);
    bool has_lane = !schema.lane_col.empty();
    std::size_t lane_idx = has_lane ? column_index(reader.header(), schema.lane_col) : 0;
    if (!schema.segment_col.empty()) column_index(reader.header(), schema.segment_col);

    IngestReport report;
    if (schema.speed_scale != 1.0) {
        report.notes.push_back("speeds scaled by " + std::to_string(schema.speed_scale));
    }
    QuarantineBudget quarantine{schema.bad_row_budget};
    std::map<std::string, VehicleAccum> vehicles;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        ++report.rows_in;
        std::size_t line = reader.record_line();
        try {
            std::size_t needed = std::max({id_idx, t_idx, s_idx, v_idx, has_lane ? lane_idx : 0});
            if (fields.size() <= needed) throw IngestError("short row", line);
            const std::string& id = fields[id_idx];
            if (id.empty()) throw IngestError("empty vehicle id", line);
            TrajPoint p;
            p.t = parse_double_field(fields[t_idx], schema.t_col, line);
            p.s = parse_double_field(fields[s_idx], schema.s_col, line);
            p.speed = parse_double_field(fields[v_idx], schema.speed_col, line) * schema.speed_scale;
            if (!std::isfinite(p.t) || !std::isfinite(p.s) || !std::isfinite(p.speed) ||
                p.speed < 0.0) {
                throw IngestError("value out of range", line);
            }
            VehicleAccum& acc = vehicles[id];
            acc.points.push_back(p);
            if (has_lane && acc.lane.empty()) acc.lane = fields[lane_idx];
            ++report.rows_parsed;
        } catch (const IngestError&) {
            ++report.rows_quarantined;
            quarantine.add(line);
        }
    }
    return finalize(std::move(vehicles), std::move(report));
}

TrajDataset read_traj_csv(std::istream& in, const HighdTrajSchema& schema) {
    if (!(schema.frame_rate_hz > 0.0)) throw ConfigError("frame rate must be positive");
    CsvReader reader(in);
    if (reader.header().empty()) throw IngestError("missing header row", 1);
    std::size_t frame_idx = column_index(reader.header(), "frame");
    std::size_t id_idx = column_index(reader.header(), "id");
    std::size_t x_idx = column_index(reader.header(), "x");
    std::size_t xv_idx = column_index(reader.header(), "xVelocity");

    IngestReport report;
    report.notes.push_back("t = frame / " + std::to_string(schema.frame_rate_hz) + " Hz");
    report.notes.push_back("speed = |xVelocity| * 3.6 (m/s to km/h); direction from sign");
    QuarantineBudget quarantine{schema.bad_row_budget};
    std::map<std::string, VehicleAccum> vehicles;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        ++report.rows_in;
        std::size_t line = reader.record_line();
        try {
            std::size_t needed = std::max({frame_idx, id_idx, x_idx, xv_idx});
            if (fields.size() <= needed) throw IngestError("short row", line);
            const std::string& id = fields[id_idx];
            if (id.empty()) throw IngestError("empty vehicle id", line);
            double frame = parse_double_field(fields[frame_idx], "frame", line);
            double x = parse_double_field(fields[x_idx], "x", line);
            double xv = parse_double_field(fields[xv_idx], "xVelocity", line);
            if (!std::isfinite(frame) || frame < 0.0 || !std::isfinite(x) || !std::isfinite(xv)) {
                throw IngestError("value out of range", line);
            }
            TrajPoint p;
            p.t = frame / schema.frame_rate_hz;
            p.s = x;
            p.speed = std::abs(xv) * kMsToKmh;
            VehicleAccum& acc = vehicles[id];
            acc.points.push_back(p);
            acc.dir_accum += xv;
            ++report.rows_parsed;
        } catch (const IngestError&) {
            ++report.rows_quarantined;
            quarantine.add(line);
        }
    }
    for (auto& [id, acc] : vehicles) acc.lane = acc.dir_accum < 0.0 ? "neg" : "pos";
    return finalize(std::move(vehicles), std::move(report));
}

std::optional<double> highd_frame_rate_from_meta(const std::filesystem::path& tracks_path) {
    std::string name = tracks_path.filename().string();
    auto pos = name.rfind("tracks");
    if (pos == std::string::npos) return std::nullopt;
    std::filesystem::path meta =
        tracks_path.parent_path() / (name.substr(0, pos) + "recordingMeta" + name.substr(pos + 6));
    std::ifstream in(meta, std::ios::binary);
    if (!in) return std::nullopt;
    CsvReader reader(in);
    std::size_t idx = column_index(reader.header(), "frameRate");
    std::vector<std::string> fields;
    if (!reader.next(fields) || fields.size() <= idx) {
        throw IngestError("metadata sidecar has no data row: " + meta.string(), 2);
    }
    double rate = parse_double_field(fields[idx], "frameRate", reader.record_line());
    if (!(rate > 0.0)) throw IngestError("non-positive frameRate in " + meta.string(), 2);
    return rate;
}

TrajDataset dataset_from_records(std::span<const TrajRecord> records) {
    IngestReport report;
    std::map<std::string, VehicleAccum> vehicles;
    for (const TrajRecord& r : records) {
        ++report.rows_in;
        if (r.vehicle_id.empty() || !std::isfinite(r.t) || !std::isfinite(r.s) ||
            !std::isfinite(r.speed) || r.speed < 0.0) {
            ++report.rows_quarantined;
            continue;
        }
        VehicleAccum& acc = vehicles[r.vehicle_id];
        acc.points.push_back({r.t, r.s, r.speed});
        if (acc.lane.empty()) acc.lane = r.lane;
        ++report.rows_parsed;
    }
    return finalize(std::move(vehicles), std::move(report));
}

std::optional<TrajPoint> state_at(const Trajectory& traj, double t) {
    const auto& pts = traj.points;
    if (pts.empty() || t < pts.front().t || t > pts.back().t) return std::nullopt;
    auto it = std::lower_bound(pts.begin(), pts.end(), t,
                               [](const TrajPoint& p, double tt) { return p.t < tt; });
    if (it->t == t) return *it;
    const TrajPoint& b = *it;
    const TrajPoint& a = *(it - 1);
    double frac = (t - a.t) / (b.t - a.t);
    return TrajPoint{t, a.s + frac * (b.s - a.s), a.speed + frac * (b.speed - a.speed)};
}

namespace {

bool time_span(const TrajDataset& data, double& t_min, double& t_max) {
    bool any = false;
    for (const Trajectory& traj : data.trajectories) {
        if (traj.points.empty()) continue;
        if (!any) {
            t_min = traj.points.front().t;
            t_max = traj.points.back().t;
            any = true;
        } else {
            t_min = std::min(t_min, traj.points.front().t);
            t_max = std::max(t_max, traj.points.back().t);
        }
    }
    return any;
}

}  // namespace

FdAggregation trajectories_to_fd(const TrajDataset& data, double space_bin_m, double time_bin_s,
                                 const std::optional<std::string>& lane_filter) {
    if (!(space_bin_m > 0.0) || !(time_bin_s > 0.0)) {
        throw ConfigError("bin sizes must be positive");
    }
    FdAggregation agg;
    double t_min = 0.0, t_max = 0.0;
    if (!time_span(data, t_min, t_max)) {
        agg.empty_warning = true;
        return agg;
    }
    std::vector<double> snapshots;
    for (std::size_t k = 0;; ++k) {
        double t = t_min + (static_cast<double>(k) + 0.5) * time_bin_s;
        if (t > t_max) break;
        snapshots.push_back(t);
    }
    if (snapshots.empty()) snapshots.push_back(0.5 * (t_min + t_max));
    agg.n_snapshots = snapshots.size();

    struct BinAccum {
        std::size_t count = 0;
        double speed_sum = 0.0;
    };
    for (double t_snap : snapshots) {
        std::map<std::pair<std::string, long long>, BinAccum> bins;
        for (const Trajectory& traj : data.trajectories) {
            if (lane_filter && traj.lane != *lane_filter) continue;
            auto st = state_at(traj, t_snap);
            if (!st) continue;
            auto bin = static_cast<long long>(std::floor(st->s / space_bin_m));
            BinAccum& acc = bins[{traj.lane, bin}];
            ++acc.count;
            acc.speed_sum += st->speed;
        }
        for (const auto& [key, acc] : bins) {
            if (acc.count < 2) continue;
            FDObservation obs;
            obs.rho = static_cast<double>(acc.count) / (space_bin_m / 1000.0);
            obs.v = acc.speed_sum / static_cast<double>(acc.count);
            obs.weight = static_cast<double>(acc.count);
            agg.observations.push_back(obs);
        }
    }
    agg.empty_warning = agg.observations.empty();
    return agg;
}

double gap_cv_snapshot(const TrajDataset& data, double t_snap, double s_lo, double s_hi) {
    if (!(s_hi > s_lo)) throw DomainError("segment bounds must satisfy s_lo < s_hi");
    std::vector<double> positions;
    for (const Trajectory& traj : data.trajectories) {
        auto st = state_at(traj, t_snap);
        if (st && st->s >= s_lo && st->s <= s_hi) positions.push_back(st->s);
    }
    if (positions.size() < 3) {
        throw SampleError("gap CV needs >= 3 vehicles in the segment, have " +
                          std::to_string(positions.size()));
    }
    std::sort(positions.begin(), positions.end());
    std::vector<double> gaps(positions.size() - 1);
    for (std::size_t i = 1; i < positions.size(); ++i) gaps[i - 1] = positions[i] - positions[i - 1];
    return stats::coefficient_of_variation(gaps);
}

VarianceResult variance_by_density(const TrajDataset& data, const VarianceConfig& config) {
    if (!(config.ell > 0.0) || !(config.segment_length > 0.0) || !(config.snapshot_period > 0.0)) {
        throw ConfigError("ell, segment_length and snapshot_period must be positive");
    }
    if (config.min_vehicles < 2) throw ConfigError("min_vehicles must be >= 2 for a variance");
    std::vector<double> edges = config.x_bin_edges;
    if (edges.empty()) {
        for (int i = 0; i <= 12; ++i) edges.push_back(0.25 * i);
    }
    if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end())) {
        throw ConfigError("x bin edges must be sorted with >= 2 entries");
    }

    VarianceResult result;
    double t_min = 0.0, t_max = 0.0;
    if (!time_span(data, t_min, t_max)) {
        result.summary.partial = true;
        result.summary.undefined_ratio = true;
        return result;
    }

    for (std::size_t k = 0;; ++k) {
        double t_snap = t_min + static_cast<double>(k) * config.snapshot_period;
        if (t_snap > t_max) break;
        std::map<long long, std::vector<double>> segments;
        for (const Trajectory& traj : data.trajectories) {
            auto st = state_at(traj, t_snap);
            if (!st) continue;
            auto idx = static_cast<long long>(std::floor(st->s / config.segment_length));
            segments[idx].push_back(st->speed);
        }
        for (const auto& [idx, speeds] : segments) {
            if (speeds.size() < config.min_vehicles) continue;
            SnapshotSample sample;
            sample.segment_id = "seg" + std::to_string(idx);
            sample.t_snap = t_snap;
            sample.n_vehicles = speeds.size();
            sample.segment_length = config.segment_length;
            sample.lambda = static_cast<double>(speeds.size()) / config.segment_length;
            sample.x = sample.lambda * config.ell;
            sample.speed_variance = stats::sample_variance(speeds);
            result.samples.push_back(sample);
        }
    }

    result.bins.reserve(edges.size() - 1);
    std::vector<double> bin_sum(edges.size() - 1, 0.0);
    std::vector<std::size_t> bin_n(edges.size() - 1, 0);
    double below_sum = 0.0, above_sum = 0.0;
    for (const SnapshotSample& sample : result.samples) {
        auto it = std::upper_bound(edges.begin(), edges.end(), sample.x);
        if (it != edges.begin() && it != edges.end()) {
            std::size_t k = static_cast<std::size_t>(it - edges.begin()) - 1;
            bin_sum[k] += sample.speed_variance;
            ++bin_n[k];
        }
        if (sample.x < kLn3) {
            below_sum += sample.speed_variance;
            ++result.summary.n_below;
        } else {
            above_sum += sample.speed_variance;
            ++result.summary.n_above;
        }
    }
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
        result.bins.push_back({edges[k], edges[k + 1], bin_n[k],
                               bin_n[k] ? bin_sum[k] / static_cast<double>(bin_n[k]) : 0.0});
    }

    VarianceSummary& s = result.summary;
    s.below_mean = s.n_below ? below_sum / static_cast<double>(s.n_below) : 0.0;
    s.above_mean = s.n_above ? above_sum / static_cast<double>(s.n_above) : 0.0;
    s.partial = s.n_below == 0 || s.n_above == 0;
    if (s.n_above == 0 || s.above_mean == 0.0) {
        s.undefined_ratio = true;
    } else {
        s.ratio = s.below_mean / s.above_mean;
    }
    return result;
}

std::vector<JamEvent> detect_jams(const TrajDataset& data, const JamConfig& config) {
    if (!(config.drop_threshold > 0.0) || !(config.window > 0.0) ||
        !(config.jump_threshold > 0.0)) {
        throw ConfigError("jam thresholds must be positive");
    }
    std::vector<JamEvent> events;

    struct Candidate {
        std::size_t hi = 0;
        std::size_t lo = 0;
        double drop = 0.0;
    };

    for (const Trajectory& traj : data.trajectories) {
        const auto& pts = traj.points;
        std::deque<std::size_t> window;  // indices with decreasing speeds
        bool open = false;
        Candidate best;
        double episode_end = 0.0;

        auto flush = [&] {
            if (!open) return;
            open = false;
            JamEvent ev;
            ev.vehicle_id = traj.vehicle_id;
            ev.t_start = pts[best.hi].t;
            ev.t_end = pts[best.lo].t;
            ev.v_before = pts[best.hi].speed;
            ev.v_after = pts[best.lo].speed;
            ev.drop = best.drop;
            ev.max_position_jump = 0.0;
            for (std::size_t i = best.hi + 1; i <= best.lo; ++i) {
                ev.max_position_jump =
                    std::max(ev.max_position_jump, std::abs(pts[i].s - pts[i - 1].s));
            }
            ev.artifact = ev.max_position_jump > config.jump_threshold;
            events.push_back(std::move(ev));
        };

        for (std::size_t j = 0; j < pts.size(); ++j) {
            while (!window.empty() && pts[window.front()].t < pts[j].t - config.window) {
                window.pop_front();
            }
            while (!window.empty() && pts[window.back()].speed <= pts[j].speed) {
                window.pop_back();
            }
            window.push_back(j);
            std::size_t hi = window.front();
            double drop = pts[hi].speed - pts[j].speed;
            if (drop > config.drop_threshold) {
                if (open && pts[hi].t <= episode_end) {
                    episode_end = std::max(episode_end, pts[j].t);
                    if (drop > best.drop) best = {hi, j, drop};
                } else {
                    flush();
                    open = true;
                    best = {hi, j, drop};
                    episode_end = pts[j].t;
                }
            }
        }
        flush();
    }
    return events;
}

}  // namespace coopperc
