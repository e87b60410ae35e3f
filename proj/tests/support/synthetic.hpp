#pragma once

// Shared fixtures and independent oracles for the test suites. Oracles here
// deliberately avoid the library's closed-form code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "coopperc/fd_fit.hpp"
#include "coopperc/rng.hpp"
#include "coopperc/traj.hpp"

namespace coopperc::testsupport {

// ---------------------------------------------------------------------------
// Quadrature oracle: E[d | d <= ell] for d ~ Exp(lambda) by adaptive Simpson
// integration of t lambda e^{-lambda t} over [0, ell].

namespace detail {

inline double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double fa, double fm, double fb,
                        double whole, double eps, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = simpson(a, m, fa, flm, fm);
    double right = simpson(m, b, fm, frm, fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps) {
        return left + right + (left + right - whole) / 15.0;
    }
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}

}  // namespace detail

template <typename F>
double integrate(const F& f, double a, double b, double eps = 1e-12) {
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = detail::simpson(a, b, fa, fm, fb);
    return detail::adaptive_simpson(f, a, b, fa, fm, fb, whole, eps, 40);
}

inline double quad_conditional_gap_mean(double lambda, double ell) {
    auto density = [lambda](double t) { return t * lambda * std::exp(-lambda * t); };
    double mass = -std::expm1(-lambda * ell);
    return integrate(density, 0.0, ell) / mass;
}

// ---------------------------------------------------------------------------
// Grid-search oracle: argmax over r in (0, 1) of the normalised flow
// r (1 - r^theta), used to cross-check the critical-density formula.

inline double grid_argmax_flow_ratio(double theta, std::size_t n = 1000000) {
    double best_r = 0.0, best_q = -1.0;
    for (std::size_t i = 1; i < n; ++i) {
        double r = static_cast<double>(i) / static_cast<double>(n);
        double q = r * (1.0 - std::pow(r, theta));
        if (q > best_q) {
            best_q = q;
            best_r = r;
        }
    }
    return best_r;
}

// ---------------------------------------------------------------------------
// Synthetic fundamental-diagram data.

inline std::vector<FDObservation> fd_noise_free(std::size_t n, double theta, double rho_j,
                                                double v_f, double rho_lo, double rho_hi,
                                                std::uint64_t seed) {
    CounterRng rng = CounterRng::keyed(seed, {0xFD00});
    std::vector<FDObservation> obs;
    obs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double rho = rho_lo + (rho_hi - rho_lo) * rng.next_unit_co();
        double v = v_f * (1.0 - std::pow(rho / rho_j, theta));
        obs.push_back({rho, v, 1.0});
    }
    return obs;
}

inline std::vector<FDObservation> fd_noisy(std::size_t n, double theta, double rho_j, double v_f,
                                           double rho_lo, double rho_hi, double noise_sd,
                                           std::uint64_t seed) {
    CounterRng rng = CounterRng::keyed(seed, {0xFD01});
    std::vector<FDObservation> obs;
    obs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double rho = rho_lo + (rho_hi - rho_lo) * rng.next_unit_co();
        double v = v_f * (1.0 - std::pow(rho / rho_j, theta)) + rng.next_normal(0.0, noise_sd);
        obs.push_back({rho, v, 1.0});
    }
    return obs;
}

inline void write_fd_file(const std::filesystem::path& path,
                          const std::vector<FDObservation>& obs) {
    std::ofstream out(path, std::ios::binary);
    out << "rho,v\n";
    for (const FDObservation& o : obs) {
        out << o.rho << ',' << o.v << '\n';
    }
}

// ---------------------------------------------------------------------------
// Synthetic trajectories. Speeds in km/h, positions integrated in metres;
// consecutive position steps at motorway speeds stay far below any sane
// artifact threshold.

// Gentle sinusoidal speed around `base`: the worst drop inside a 120 s
// window is ~1.6 * amp, so amp <= 10 km/h stays clean for a 20 km/h rule.
inline std::vector<TrajPoint> smooth_points(double t0, double duration, double dt, double base,
                                            double amp, double period, double phase, double s0) {
    std::vector<TrajPoint> pts;
    double s = s0;
    for (double t = t0; t <= t0 + duration; t += dt) {
        double speed = base + amp * std::sin(6.283185307179586 * (t - t0) / period + phase);
        pts.push_back({t, s, speed});
        s += speed / 3.6 * dt;
    }
    return pts;
}

// Steady cruise, then a linear drop of `drop` km/h over `drop_duration`
// seconds starting at t0 + lead, then a steady tail.
inline std::vector<TrajPoint> drop_points(double t0, double lead, double drop_duration,
                                          double tail, double dt, double v_high, double drop,
                                          double s0) {
    std::vector<TrajPoint> pts;
    double s = s0;
    for (double t = t0; t <= t0 + lead + drop_duration + tail; t += dt) {
        double rel = t - t0;
        double speed;
        if (rel < lead) {
            speed = v_high;
        } else if (rel < lead + drop_duration) {
            speed = v_high - drop * (rel - lead) / drop_duration;
        } else {
            speed = v_high - drop;
        }
        pts.push_back({t, s, speed});
        s += speed / 3.6 * dt;
    }
    return pts;
}

// Same profile with the position teleporting by `jump` metres mid-descent.
inline std::vector<TrajPoint> teleport_points(double t0, double lead, double drop_duration,
                                              double tail, double dt, double v_high, double drop,
                                              double s0, double jump) {
    auto pts = drop_points(t0, lead, drop_duration, tail, dt, v_high, drop, s0);
    double t_jump = t0 + lead + 0.5 * drop_duration;
    for (TrajPoint& p : pts) {
        if (p.t >= t_jump) p.s += jump;
    }
    return pts;
}

// Assembles a dataset directly from point series, bypassing ingestion; used
// where fixture volume makes the CSV round trip pointless.
inline TrajDataset dataset_from_points(std::vector<std::pair<std::string, std::vector<TrajPoint>>> vehicles) {
    std::sort(vehicles.begin(), vehicles.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    TrajDataset data;
    data.trajectories.reserve(vehicles.size());
    for (auto& [id, pts] : vehicles) {
        Trajectory traj;
        traj.vehicle_id = id;
        traj.points = std::move(pts);
        data.report.rows_in += traj.points.size();
        data.report.rows_parsed += traj.points.size();
        data.trajectories.push_back(std::move(traj));
    }
    return data;
}

struct TrajBuilder {
    std::vector<TrajRecord> records;
    double dt = 1.0;  // s

    void append(const std::string& id, const std::vector<TrajPoint>& pts) {
        for (const TrajPoint& p : pts) records.push_back({id, p.t, p.s, p.speed, "", ""});
    }

    void add_smooth_vehicle(const std::string& id, double t0, double duration, double base,
                            double amp, double period, double s0) {
        append(id, smooth_points(t0, duration, dt, base, amp, period, 0.0, s0));
    }

    void add_drop_vehicle(const std::string& id, double t0, double lead, double drop_duration,
                          double tail, double v_high, double drop, double s0) {
        append(id, drop_points(t0, lead, drop_duration, tail, dt, v_high, drop, s0));
    }

    void add_teleport_vehicle(const std::string& id, double t0, double lead, double drop_duration,
                              double tail, double v_high, double drop, double s0, double jump) {
        append(id, teleport_points(t0, lead, drop_duration, tail, dt, v_high, drop, s0, jump));
    }
};

inline void write_traj_file(const std::filesystem::path& path,
                            const std::vector<TrajRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    out << "vehicle_id,t,s,speed\n";
    for (const TrajRecord& r : records) {
        out << r.vehicle_id << ',' << r.t << ',' << r.s << ',' << r.speed << '\n';
    }
}

// ---------------------------------------------------------------------------
// Two-regime variance construction. Vehicles are static; per-vehicle constant
// speeds are placed symmetrically around `base` so each (segment, snapshot)
// sample variance is *exactly* the target. Below-threshold segments hold 2
// vehicles, above-threshold segments 6; with 1000 m segments and ell = 300 m
// that puts x at 0.6 and 1.8.

struct TwoRegimeSpec {
    std::size_t segments_below = 20;
    std::size_t segments_above = 20;
    double var_below = 739.0;
    double var_above = 461.0;
    double segment_length = 1000.0;
    double base_speed = 50.0;
    double t_end = 120.0;
    double record_dt = 60.0;
};

inline std::vector<TrajRecord> two_regime_records(const TwoRegimeSpec& spec) {
    std::vector<TrajRecord> records;
    int vid = 0;
    auto add_static = [&](double s, double speed) {
        std::string id = "v" + std::to_string(vid++);
        for (double t = 0.0; t <= spec.t_end; t += spec.record_dt) {
            records.push_back({id, t, s, speed, "", ""});
        }
    };
    // n = 2: sample variance = 2 d^2 / 1, so d = sqrt(var / 2)
    double d2 = std::sqrt(spec.var_below / 2.0);
    for (std::size_t k = 0; k < spec.segments_below; ++k) {
        double s0 = static_cast<double>(k) * spec.segment_length;
        add_static(s0 + 300.0, spec.base_speed + d2);
        add_static(s0 + 600.0, spec.base_speed - d2);
    }
    // n = 6: sample variance = 6 d^2 / 5, so d = sqrt(5 var / 6)
    double d6 = std::sqrt(5.0 * spec.var_above / 6.0);
    for (std::size_t k = 0; k < spec.segments_above; ++k) {
        double s0 = static_cast<double>(spec.segments_below + k) * spec.segment_length;
        for (int j = 0; j < 6; ++j) {
            double s = s0 + 100.0 + 150.0 * j;
            add_static(s, spec.base_speed + (j % 2 == 0 ? d6 : -d6));
        }
    }
    return records;
}

// ---------------------------------------------------------------------------
// Streambuf that synthesizes CSV rows on demand; the full payload never
// exists in memory, so it exercises the reader's bounded-memory property.

class SyntheticCsvBuf : public std::streambuf {
  public:
    SyntheticCsvBuf(std::string header, std::string row, std::size_t rows)
        : header_(std::move(header)), row_(std::move(row)), rows_(rows) {}

  protected:
    int underflow() override {
        if (emitted_ > rows_) return traits_type::eof();
        if (emitted_ == 0) {
            chunk_ = header_;
        } else {
            chunk_ = row_;
        }
        ++emitted_;
        setg(chunk_.data(), chunk_.data(), chunk_.data() + chunk_.size());
        return traits_type::to_int_type(chunk_[0]);
    }

  private:
    std::string header_;
    std::string row_;
    std::size_t rows_;
    std::size_t emitted_ = 0;
    std::string chunk_;
};

// Scratch directory under the current working directory (the ctest cwd).
inline std::filesystem::path test_dir(const std::string& name) {
    std::filesystem::path dir = std::filesystem::current_path() / "test_tmp" / name;
    std::filesystem::create_directories(dir);
    return dir;
}

// Same, but wiped first; for cases whose assertions depend on files being
// absent.
inline std::filesystem::path fresh_test_dir(const std::string& name) {
    std::filesystem::path dir = std::filesystem::current_path() / "test_tmp" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace coopperc::testsupport
