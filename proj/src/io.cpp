#include "coopperc/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include <openssl/evp.h>

#include "coopperc/error.hpp"
#include "coopperc/version.hpp"

namespace coopperc {

namespace {

// Shortest round-tripping decimal form with conventional notation (15
// significant digits cover most values exactly; 17 always do).
std::string fmt(double v) {
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open input file: " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw Error("digest context allocation failed");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in.read(buf, sizeof buf), in.gcount() > 0) {
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

void RunManifest::add_input(const std::filesystem::path& path) {
    inputs.emplace_back(path.string(), sha256_file(path));
}

nlohmann::json RunManifest::invocation_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["parameters"] = parameters;
    if (has_seed) j["seed"] = seed;
    nlohmann::json ins = nlohmann::json::array();
    for (const auto& [path, digest] : inputs) {
        ins.push_back({{"path", path}, {"sha256", digest}});
    }
    j["inputs"] = ins;
    j["version"] = version.empty() ? kVersion : version;
    return j;
}

nlohmann::json RunManifest::full_json() const {
    nlohmann::json j = invocation_json();
    j["duration_seconds"] = duration_seconds;
    return j;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
    out << "x,mean_size,frac_agents_ge3,stderr_mean,n_clusters\n";
    for (const SweepRow& r : rows) {
        out << fmt(r.x) << ',' << fmt(r.mean_size) << ',' << fmt(r.frac_agents_ge3) << ','
            << fmt(r.stderr_mean) << ',' << r.n_clusters << '\n';
    }
}

void write_sensitivity_csv(std::ostream& out, std::span<const SensitivityRow> rows) {
    out << "rho_j,theta_hat,sigma,r2_hat,r2_ln3,r2_gs,deviation_sigmas\n";
    for (const SensitivityRow& r : rows) {
        out << fmt(r.rho_j) << ',' << fmt(r.theta_hat) << ',' << fmt(r.sigma) << ','
            << fmt(r.r2_hat) << ',' << fmt(r.r2_ln3) << ',' << fmt(r.r2_gs) << ','
            << fmt(r.deviation_sigmas) << '\n';
    }
}

void write_jam_events_csv(std::ostream& out, std::span<const JamEvent> events) {
    out << "vehicle_id,t_start,t_end,v_before,v_after,drop,max_position_jump,artifact\n";
    for (const JamEvent& e : events) {
        out << e.vehicle_id << ',' << fmt(e.t_start) << ',' << fmt(e.t_end) << ','
            << fmt(e.v_before) << ',' << fmt(e.v_after) << ',' << fmt(e.drop) << ','
            << fmt(e.max_position_jump) << ',' << (e.artifact ? 1 : 0) << '\n';
    }
}

void write_jam_events_jsonl(std::ostream& out, std::span<const JamEvent> events) {
    for (const JamEvent& e : events) out << jam_event_json(e).dump() << '\n';
}

void write_variance_bins_csv(std::ostream& out, std::span<const VarianceBinRow> bins) {
    out << "x_lo,x_hi,n_samples,mean_variance\n";
    for (const VarianceBinRow& b : bins) {
        out << fmt(b.x_lo) << ',' << fmt(b.x_hi) << ',' << b.n_samples << ','
            << fmt(b.mean_variance) << '\n';
    }
}

void write_variance_bins_jsonl(std::ostream& out, std::span<const VarianceBinRow> bins) {
    for (const VarianceBinRow& b : bins) {
        nlohmann::json j;
        j["x_lo"] = b.x_lo;
        j["x_hi"] = b.x_hi;
        j["n_samples"] = b.n_samples;
        j["mean_variance"] = b.mean_variance;
        out << j.dump() << '\n';
    }
}

void write_fd_csv(std::ostream& out, std::span<const FDObservation> obs) {
    out << "rho,v,weight\n";
    for (const FDObservation& o : obs) {
        out << fmt(o.rho) << ',' << fmt(o.v) << ',' << fmt(o.weight) << '\n';
    }
}

nlohmann::json theta_fit_json(const ThetaFit& fit) {
    nlohmann::json j;
    j["theta_hat"] = fit.theta_hat;
    j["sigma"] = fit.sigma;
    j["ci95"] = {fit.ci_lo, fit.ci_hi};
    j["r2"] = fit.r2;
    j["rmse"] = fit.rmse;
    j["v_f_used"] = fit.v_f_used;
    j["rho_j_used"] = fit.rho_j_used;
    j["n_obs"] = fit.n_obs;
    j["n_rejected"] = fit.n_rejected;
    return j;
}

nlohmann::json fixed_theta_json(const FixedThetaMetrics& metrics) {
    nlohmann::json j;
    j["theta"] = metrics.theta;
    j["v_f_used"] = metrics.v_f_used;
    j["r2"] = metrics.r2;
    j["rmse"] = metrics.rmse;
    j["n_obs"] = metrics.n_obs;
    j["n_rejected"] = metrics.n_rejected;
    return j;
}

nlohmann::json comparison_json(const ModelComparison& cmp) {
    nlohmann::json j;
    j["best"] = theta_fit_json(cmp.best);
    j["ln3_fixed"] = fixed_theta_json(cmp.ln3);
    j["greenshields_fixed"] = fixed_theta_json(cmp.greenshields);
    j["delta_r2_best_ln3"] = cmp.delta_r2_best_ln3;
    j["delta_rmse_best_ln3"] = cmp.delta_rmse_best_ln3;
    j["delta_r2_ln3_gs"] = cmp.delta_r2_ln3_gs;
    j["delta_rmse_ln3_gs"] = cmp.delta_rmse_ln3_gs;
    return j;
}

nlohmann::json crossing_json(const CrossingEstimate& est) {
    nlohmann::json j;
    j["x_hat"] = est.x_hat;
    j["ci95"] = {est.ci_lo, est.ci_hi};
    j["bootstrap_resamples"] = est.resamples;
    return j;
}

nlohmann::json variance_summary_json(const VarianceSummary& summary) {
    nlohmann::json j;
    j["below_mean_variance"] = summary.below_mean;
    j["above_mean_variance"] = summary.above_mean;
    j["n_below"] = summary.n_below;
    j["n_above"] = summary.n_above;
    j["partial"] = summary.partial;
    j["undefined_ratio"] = summary.undefined_ratio;
    if (!summary.undefined_ratio) j["ratio"] = summary.ratio;
    return j;
}

nlohmann::json jam_event_json(const JamEvent& event) {
    nlohmann::json j;
    j["vehicle_id"] = event.vehicle_id;
    j["t_start"] = event.t_start;
    j["t_end"] = event.t_end;
    j["v_before"] = event.v_before;
    j["v_after"] = event.v_after;
    j["drop"] = event.drop;
    j["max_position_jump"] = event.max_position_jump;
    j["artifact"] = event.artifact;
    return j;
}

void write_json_document(std::ostream& out, const nlohmann::json& doc) {
    out << doc.dump(2) << '\n';
}

}  // namespace coopperc
