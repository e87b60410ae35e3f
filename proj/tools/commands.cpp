#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coopperc/core_math.hpp"
#include "coopperc/error.hpp"
#include "coopperc/fd_fit.hpp"
#include "coopperc/io.hpp"
#include "coopperc/percolation.hpp"
#include "coopperc/stats.hpp"
#include "coopperc/traj.hpp"
#include "coopperc/version.hpp"

namespace coopperc::cli {

namespace {

using nlohmann::json;

// Buffers the artifact, then writes it whole; "-" targets stdout. Content is
// identical either way.
void write_text(const std::string& target, const std::string& content) {
    if (target == "-") {
        std::cout << content;
        std::cout.flush();
        return;
    }
    std::ofstream out(target, std::ios::binary);
    if (!out) throw Error("cannot open output file: " + target);
    out << content;
    if (!out) throw Error("write failed: " + target);
}

std::string summary_target(const std::string& explicit_target, const std::string& out_target) {
    if (!explicit_target.empty()) return explicit_target;
    if (out_target == "-") return "-";
    return out_target + ".summary.json";
}

void write_manifest_sidecar(const std::string& out_target, const RunManifest& manifest) {
    if (out_target == "-") return;
    std::ostringstream body;
    write_json_document(body, manifest.full_json());
    write_text(out_target + ".manifest.json", body.str());
}

std::string dump_json(const json& doc) {
    std::ostringstream out;
    write_json_document(out, doc);
    return out.str();
}

json summary_skeleton(const RunManifest& manifest) {
    json j;
    j["schema_version"] = kOutputSchemaVersion;
    j["manifest"] = manifest.invocation_json();
    return j;
}

json ingest_json(const IngestReport& report) {
    json j;
    j["rows_in"] = report.rows_in;
    j["rows_parsed"] = report.rows_parsed;
    j["rows_quarantined"] = report.rows_quarantined;
    j["vehicles_quarantined"] = report.vehicles_quarantined;
    j["notes"] = report.notes;
    return j;
}

double round_to(double v, int decimals) {
    double scale = std::pow(10.0, decimals);
    return std::round(v * scale) / scale;
}

// Shared trajectory-input flags for the variance and jams subcommands.
struct TrajInputArgs {
    std::string input;
    std::string schema = "generic";
    GenericTrajSchema generic;
    HighdTrajSchema highd;
    CLI::Option* frame_rate_opt = nullptr;
    std::string frame_rate_source = "default";

    void attach(CLI::App* cmd) {
        cmd->add_option("--input", input, "trajectory CSV file")->required();
        cmd->add_option("--schema", schema, "input schema: generic or highd_tracks")
            ->check(CLI::IsMember({"generic", "highd_tracks"}))
            ->capture_default_str();
        cmd->add_option("--vehicle-col", generic.vehicle_col)->capture_default_str();
        cmd->add_option("--t-col", generic.t_col)->capture_default_str();
        cmd->add_option("--s-col", generic.s_col)->capture_default_str();
        cmd->add_option("--speed-col", generic.speed_col)->capture_default_str();
        cmd->add_option("--segment-col", generic.segment_col);
        cmd->add_option("--lane-col", generic.lane_col);
        cmd->add_option("--speed-scale", generic.speed_scale,
                        "multiplier applied to raw speeds (e.g. 0.1 for 0.1 km/h units)")
            ->capture_default_str();
        frame_rate_opt = cmd->add_option("--frame-rate", highd.frame_rate_hz,
                                         "highd_tracks frame rate, Hz (default: recordingMeta "
                                         "sidecar, else 25)")
            ->capture_default_str();
        cmd->add_option("--bad-row-budget", generic.bad_row_budget)->capture_default_str();
    }

    // Resolves the frame rate (flag > metadata sidecar > default) and reads
    // the dataset; call before params_json.
    TrajDataset read(RunManifest& manifest) {
        manifest.add_input(input);
        std::ifstream in(input, std::ios::binary);
        if (!in) throw Error("cannot open input file: " + input);
        if (schema == "highd_tracks") {
            HighdTrajSchema hs = highd;
            hs.bad_row_budget = generic.bad_row_budget;
            if (frame_rate_opt && frame_rate_opt->count() > 0) {
                frame_rate_source = "flag";
            } else if (auto rate = highd_frame_rate_from_meta(input)) {
                hs.frame_rate_hz = *rate;
                highd.frame_rate_hz = *rate;
                frame_rate_source = "sidecar";
            }
            return read_traj_csv(in, hs);
        }
        return read_traj_csv(in, generic);
    }

    json params_json() const {
        json j;
        j["input"] = input;
        j["schema"] = schema;
        if (schema == "highd_tracks") {
            j["frame_rate"] = highd.frame_rate_hz;
            j["frame_rate_source"] = frame_rate_source;
        } else {
            j["vehicle_col"] = generic.vehicle_col;
            j["t_col"] = generic.t_col;
            j["s_col"] = generic.s_col;
            j["speed_col"] = generic.speed_col;
            j["speed_scale"] = generic.speed_scale;
            if (!generic.segment_col.empty()) j["segment_col"] = generic.segment_col;
            if (!generic.lane_col.empty()) j["lane_col"] = generic.lane_col;
        }
        j["bad_row_budget"] = generic.bad_row_budget;
        return j;
    }
};

// ---------------------------------------------------------------------------
// constants

struct ConstantsArgs {
    std::string out = "-";
    double sf = 5.0;
    double rho0 = 0.030;
    double ell = 300.0;
};

int cmd_constants(const ConstantsArgs& args) {
    auto t0 = std::chrono::steady_clock::now();
    RunManifest manifest;
    manifest.command = "constants";
    manifest.parameters = {{"sf", args.sf}, {"rho0", args.rho0}, {"ell", args.ell}};

    json doc = summary_skeleton(manifest);

    double root = solve_fixed_point(1e-12);
    double direct = std::log(3.0);
    doc["fixed_point"] = {{"solver_root", root},
                          {"direct_log3", direct},
                          {"abs_difference", std::abs(root - direct)}};

    const double third = 1.0 / 3.0;
    const double probs[] = {third, third, third};
    double entropy = shannon_entropy(probs);
    doc["entropy"] = {{"uniform3_nats", entropy},
                      {"abs_difference_from_threshold", std::abs(entropy - kLn3)}};

    doc["critical_density_ratio"] = {{"theta_ln3", lwr_critical_density_ratio(kLn3)},
                                     {"theta_1", lwr_critical_density_ratio(1.0)}};

    PenetrationResult pen = critical_penetration(args.rho0, args.ell);
    doc["critical_penetration"] = {{"rho0_veh_per_m", args.rho0},
                                   {"ell_m", args.ell},
                                   {"p_c", pen.p_c},
                                   {"p_c_percent", round_to(100.0 * pen.p_c, 1)},
                                   {"achievable", pen.achievable}};

    DisruptionResult dis = critical_disruption_fraction(args.sf);
    doc["critical_disruption_fraction"] = {
        {"sf", args.sf},
        {"formula_value", dis.f_c},
        {"formula_value_rounded", round_to(dis.f_c, 4)},
        {"below_threshold", dis.below_threshold},
        {"note",
         "1 - ln(3)/SF evaluates to 0.7803 (78.0%) at SF = 5, while the value quoted in the "
         "source literature for this case is 39.0% (which would correspond to SF of about "
         "1.80). The computed formula value is reported as-is; the discrepancy is surfaced "
         "rather than normalized."}};

    manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_text(args.out, dump_json(doc));
    write_manifest_sidecar(args.out, manifest);
    return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
    double x_min = 0.5;
    double x_max = 2.0;
    int points = 64;
    std::size_t clusters = 10000;
    std::uint64_t seed = 0;
    double ell = 300.0;
    double window = 0.0;
    std::string edge_policy = "discard";
    int threads = 0;
    std::string out = "-";
    std::string summary;
};

int cmd_sweep(const SweepArgs& args) {
    auto t0 = std::chrono::steady_clock::now();
    if (args.points < 1) throw ConfigError("--points must be >= 1");
    if (args.x_min <= 0.0 || (args.points > 1 && args.x_max <= args.x_min)) {
        throw ConfigError("need 0 < x-min < x-max");
    }

    RunManifest manifest;
    manifest.command = "sweep";
    manifest.has_seed = true;
    manifest.seed = args.seed;
    manifest.parameters = {{"x_min", args.x_min},   {"x_max", args.x_max},
                           {"points", args.points}, {"clusters", args.clusters},
                           {"ell", args.ell},       {"window", args.window},
                           {"edge_policy", args.edge_policy}};

    std::vector<double> grid(args.points);
    for (int i = 0; i < args.points; ++i) {
        grid[i] = args.points == 1
                      ? args.x_min
                      : args.x_min + (args.x_max - args.x_min) * i / (args.points - 1);
    }

    SimConfig base;
    base.lambda = grid.front() / args.ell;  // overwritten per point
    base.ell = args.ell;
    base.window = args.window;
    base.seed = args.seed;

    SweepOptions options;
    options.clusters_per_point = args.clusters;
    options.edge_policy =
        args.edge_policy == "keep" ? EdgePolicy::kKeep : EdgePolicy::kDiscard;
    options.threads = args.threads;

    SweepResult result = sweep(grid, base, options);

    std::ostringstream table;
    write_sweep_csv(table, result.rows);

    json doc = summary_skeleton(manifest);
    doc["n_points"] = result.rows.size();
    doc["clusters_per_point"] = args.clusters;
    doc["crossing"] = result.crossing ? crossing_json(*result.crossing) : json(nullptr);

    manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_text(args.out, table.str());
    write_text(summary_target(args.summary, args.out), dump_json(doc));
    write_manifest_sidecar(args.out, manifest);
    return 0;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
    std::string input;
    FdColumnMap map;
    std::vector<double> rho_j_grid;
    double rho_j = 0.0;
    double v_f = 0.0;
    bool v_f_given = false;
    double theta_fixed = 0.0;
    bool theta_given = false;
    std::string out = "-";
    std::string summary;
};

int cmd_fit(const FitArgs& args) {
    auto t0 = std::chrono::steady_clock::now();
    RunManifest manifest;
    manifest.command = "fit";
    manifest.add_input(args.input);
    manifest.parameters = {{"input", args.input},
                           {"rho_col", args.map.rho_col},
                           {"v_col", args.map.v_col},
                           {"rho_cap", args.map.rho_cap},
                           {"v_f", args.v_f_given ? json(args.v_f) : json("profile")}};
    if (!args.map.weight_col.empty()) manifest.parameters["weight_col"] = args.map.weight_col;
    if (args.theta_given) manifest.parameters["theta_fixed"] = args.theta_fixed;
    if (!args.rho_j_grid.empty()) {
        manifest.parameters["rho_j_grid"] = args.rho_j_grid;
    } else {
        manifest.parameters["rho_j"] = args.rho_j;
    }

    std::ifstream in(args.input, std::ios::binary);
    if (!in) throw Error("cannot open input file: " + args.input);
    FdIngest ingest = read_fd_csv(in, args.map);

    VfPolicy vf = args.v_f_given ? VfPolicy::given(args.v_f) : VfPolicy::profile();

    json doc = summary_skeleton(manifest);
    doc["ingest"] = ingest_json(ingest.report);

    std::string primary;
    if (!args.rho_j_grid.empty()) {
        if (args.theta_given) throw ConfigError("--theta-fixed cannot be combined with a grid");
        auto rows = sensitivity_table(ingest.observations, args.rho_j_grid, vf);
        std::ostringstream table;
        write_sensitivity_csv(table, rows);
        primary = table.str();
        doc["rows"] = rows.size();
    } else if (args.theta_given) {
        FixedThetaMetrics metrics = metrics_at(ingest.observations, args.theta_fixed, args.rho_j, vf);
        doc["metrics"] = fixed_theta_json(metrics);
        primary = dump_json(doc);
    } else {
        ModelComparison cmp = compare_models(ingest.observations, args.rho_j, vf);
        doc["fit"] = theta_fit_json(cmp.best);
        doc["comparison"] = comparison_json(cmp);
        primary = dump_json(doc);
    }

    manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_text(args.out, primary);
    if (!args.rho_j_grid.empty()) {
        write_text(summary_target(args.summary, args.out), dump_json(doc));
    } else if (!args.summary.empty()) {
        write_text(args.summary, dump_json(doc));
    }
    write_manifest_sidecar(args.out, manifest);
    return 0;
}

// ---------------------------------------------------------------------------
// variance

struct VarianceArgs {
    TrajInputArgs traj;
    VarianceConfig config;
    std::string table_format = "csv";
    std::string out = "-";
    std::string summary;
};

int cmd_variance(VarianceArgs& args) {
    auto t0 = std::chrono::steady_clock::now();
    RunManifest manifest;
    manifest.command = "variance";
    TrajDataset data = args.traj.read(manifest);
    manifest.parameters = args.traj.params_json();
    manifest.parameters["ell"] = args.config.ell;
    manifest.parameters["segment_length"] = args.config.segment_length;
    manifest.parameters["snapshot_period"] = args.config.snapshot_period;
    manifest.parameters["table_format"] = args.table_format;

    VarianceResult result = variance_by_density(data, args.config);

    std::ostringstream table;
    if (args.table_format == "jsonl") {
        write_variance_bins_jsonl(table, result.bins);
    } else {
        write_variance_bins_csv(table, result.bins);
    }

    json doc = summary_skeleton(manifest);
    doc["ingest"] = ingest_json(data.report);
    doc["n_samples"] = result.samples.size();
    doc["summary"] = variance_summary_json(result.summary);

    manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_text(args.out, table.str());
    write_text(summary_target(args.summary, args.out), dump_json(doc));
    write_manifest_sidecar(args.out, manifest);
    return 0;
}

// ---------------------------------------------------------------------------
// jams

struct JamsArgs {
    TrajInputArgs traj;
    JamConfig config;
    std::string table_format = "csv";
    std::string out = "-";
    std::string summary;
};

int cmd_jams(JamsArgs& args) {
    auto t0 = std::chrono::steady_clock::now();
    RunManifest manifest;
    manifest.command = "jams";
    TrajDataset data = args.traj.read(manifest);
    manifest.parameters = args.traj.params_json();
    manifest.parameters["drop"] = args.config.drop_threshold;
    manifest.parameters["window"] = args.config.window;
    manifest.parameters["jump"] = args.config.jump_threshold;
    manifest.parameters["table_format"] = args.table_format;

    std::vector<JamEvent> events = detect_jams(data, args.config);

    std::ostringstream table;
    if (args.table_format == "jsonl") {
        write_jam_events_jsonl(table, events);
    } else {
        write_jam_events_csv(table, events);
    }

    std::size_t artifacts = 0;
    std::vector<std::size_t> per_hour(24, 0);
    for (const JamEvent& e : events) {
        if (e.artifact) {
            ++artifacts;
            continue;
        }
        // t interpreted as seconds within a day for the histogram
        auto hour = static_cast<long long>(std::floor(e.t_start / 3600.0));
        per_hour[static_cast<std::size_t>(((hour % 24) + 24) % 24)] += 1;
    }

    json doc = summary_skeleton(manifest);
    doc["ingest"] = ingest_json(data.report);
    doc["n_events"] = events.size();
    doc["n_artifacts"] = artifacts;
    doc["n_non_artifact"] = events.size() - artifacts;
    doc["events_per_hour"] = per_hour;

    manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_text(args.out, table.str());
    write_text(summary_target(args.summary, args.out), dump_json(doc));
    write_manifest_sidecar(args.out, manifest);
    return 0;
}

// ---------------------------------------------------------------------------

const char* error_kind(const Error& e) {
    if (dynamic_cast<const IngestError*>(&e)) return "ingest_error";
    if (dynamic_cast<const DomainError*>(&e)) return "domain_error";
    if (dynamic_cast<const RangeError*>(&e)) return "range_error";
    if (dynamic_cast<const NumericError*>(&e)) return "numeric_error";
    if (dynamic_cast<const SampleError*>(&e)) return "sample_error";
    if (dynamic_cast<const ConfigError*>(&e)) return "config_error";
    return "error";
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"1D proximity-graph percolation toolkit: analytic thresholds, Monte Carlo "
                 "validation, fundamental-diagram exponent fitting, trajectory analytics"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    ConstantsArgs constants_args;
    auto* constants = app.add_subcommand("constants", "analytic constants and closed forms");
    constants->add_option("--out", constants_args.out)->capture_default_str();
    constants->add_option("--sf", constants_args.sf, "safety factor for the disruption fraction")
        ->capture_default_str();
    constants->add_option("--rho0", constants_args.rho0, "total density, veh/m")
        ->capture_default_str();
    constants->add_option("--ell", constants_args.ell, "interaction range, m")
        ->capture_default_str();

    SweepArgs sweep_args;
    auto* sweep_cmd = app.add_subcommand("sweep", "Monte Carlo sweep of cluster statistics vs x");
    sweep_cmd->add_option("--x-min", sweep_args.x_min)->capture_default_str();
    sweep_cmd->add_option("--x-max", sweep_args.x_max)->capture_default_str();
    sweep_cmd->add_option("--points", sweep_args.points)->capture_default_str();
    sweep_cmd->add_option("--clusters", sweep_args.clusters, "clusters per grid point")
        ->capture_default_str();
    sweep_cmd->add_option("--seed", sweep_args.seed)->capture_default_str();
    sweep_cmd->add_option("--ell", sweep_args.ell, "interaction range, m")->capture_default_str();
    sweep_cmd->add_option("--window", sweep_args.window, "window length, m (0 = 1e4/lambda)")
        ->capture_default_str();
    sweep_cmd->add_option("--edge-policy", sweep_args.edge_policy)
        ->check(CLI::IsMember({"discard", "keep"}))
        ->capture_default_str();
    sweep_cmd->add_option("--threads", sweep_args.threads, "0 = COOPPERC_THREADS or hardware")
        ->capture_default_str();
    sweep_cmd->add_option("--out", sweep_args.out)->capture_default_str();
    sweep_cmd->add_option("--summary", sweep_args.summary, "summary JSON target");

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "LWR exponent fit on FD observations");
    fit_cmd->add_option("--input", fit_args.input, "FD CSV file")->required();
    fit_cmd->add_option("--rho-col", fit_args.map.rho_col)->capture_default_str();
    fit_cmd->add_option("--v-col", fit_args.map.v_col)->capture_default_str();
    fit_cmd->add_option("--weight-col", fit_args.map.weight_col);
    fit_cmd->add_option("--speed-scale", fit_args.map.speed_scale)->capture_default_str();
    fit_cmd->add_option("--rho-cap", fit_args.map.rho_cap)->capture_default_str();
    fit_cmd->add_option("--bad-row-budget", fit_args.map.bad_row_budget)->capture_default_str();
    auto* rho_j_opt = fit_cmd->add_option("--rho-j", fit_args.rho_j, "jam density, veh/km");
    auto* grid_opt = fit_cmd->add_option("--rho-j-grid", fit_args.rho_j_grid,
                                         "sensitivity grid (default 70,80,90,100 when no --rho-j)")
                         ->delimiter(',')
                         ->expected(1, -1);
    rho_j_opt->excludes(grid_opt);
    auto* vf_opt = fit_cmd->add_option("--v-f", fit_args.v_f, "free-flow speed; omit to profile");
    auto* theta_opt = fit_cmd->add_option("--theta-fixed", fit_args.theta_fixed);
    fit_cmd->add_option("--out", fit_args.out)->capture_default_str();
    fit_cmd->add_option("--summary", fit_args.summary);

    VarianceArgs variance_args;
    auto* variance_cmd =
        app.add_subcommand("variance", "speed variance binned by topological density");
    variance_args.traj.attach(variance_cmd);
    variance_cmd->add_option("--ell", variance_args.config.ell)->capture_default_str();
    variance_cmd->add_option("--segment-length", variance_args.config.segment_length)
        ->capture_default_str();
    variance_cmd->add_option("--snapshot-period", variance_args.config.snapshot_period)
        ->capture_default_str();
    variance_cmd->add_option("--x-bins", variance_args.config.x_bin_edges)
        ->delimiter(',')
        ->expected(2, -1);
    variance_cmd->add_option("--table-format", variance_args.table_format)
        ->check(CLI::IsMember({"csv", "jsonl"}))
        ->capture_default_str();
    variance_cmd->add_option("--out", variance_args.out)->capture_default_str();
    variance_cmd->add_option("--summary", variance_args.summary);

    JamsArgs jams_args;
    auto* jams_cmd = app.add_subcommand("jams", "phantom-jam candidate detection");
    jams_args.traj.attach(jams_cmd);
    jams_cmd->add_option("--drop", jams_args.config.drop_threshold, "speed drop, km/h")
        ->capture_default_str();
    jams_cmd->add_option("--window", jams_args.config.window, "window, s")->capture_default_str();
    jams_cmd->add_option("--jump", jams_args.config.jump_threshold, "artifact jump, m")
        ->capture_default_str();
    jams_cmd->add_option("--table-format", jams_args.table_format)
        ->check(CLI::IsMember({"csv", "jsonl"}))
        ->capture_default_str();
    jams_cmd->add_option("--out", jams_args.out)->capture_default_str();
    jams_cmd->add_option("--summary", jams_args.summary);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        fit_args.v_f_given = vf_opt->count() > 0;
        fit_args.theta_given = theta_opt->count() > 0;
        if (constants->parsed()) return cmd_constants(constants_args);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_args);
        if (fit_cmd->parsed()) {
            if (fit_args.rho_j_grid.empty() && rho_j_opt->count() == 0) {
                if (fit_args.theta_given) throw ConfigError("--theta-fixed requires --rho-j");
                fit_args.rho_j_grid = {70.0, 80.0, 90.0, 100.0};  // default sensitivity grid
            }
            return cmd_fit(fit_args);
        }
        if (variance_cmd->parsed()) return cmd_variance(variance_args);
        if (jams_cmd->parsed()) return cmd_jams(jams_args);
    } catch (const Error& e) {
        json err = {{"error", {{"type", error_kind(e)}, {"message", e.what()}}}};
        if (const auto* ie = dynamic_cast<const IngestError*>(&e); ie && ie->line) {
            err["error"]["line"] = ie->line;
        }
        std::cerr << err.dump() << '\n';
        return 1;
    } catch (const std::exception& e) {
        json err = {{"error", {{"type", "internal_error"}, {"message", e.what()}}}};
        std::cerr << err.dump() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace coopperc::cli
