#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "coopperc/fd_fit.hpp"
#include "coopperc/percolation.hpp"
#include "coopperc/traj.hpp"

namespace coopperc {

// Hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

// Provenance record attached to every CLI run. The invocation part is fully
// deterministic (command, parameters, seed, input digests, version) so that
// artifacts embedding it stay byte-identical across reruns; wall-clock
// duration only appears in the sidecar manifest file.
struct RunManifest {
    std::string command;
    nlohmann::json parameters = nlohmann::json::object();
    bool has_seed = false;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> inputs;  // (path, sha256)
    std::string version;
    double duration_seconds = 0.0;

    void add_input(const std::filesystem::path& path);
    nlohmann::json invocation_json() const;
    nlohmann::json full_json() const;
};

// ---------------------------------------------------------------------------
// Table writers (CSV and JSON-lines). All numeric formatting is fixed so a
// rerun with equal inputs produces byte-identical artifacts.

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);
void write_sensitivity_csv(std::ostream& out, std::span<const SensitivityRow> rows);
void write_jam_events_csv(std::ostream& out, std::span<const JamEvent> events);
void write_jam_events_jsonl(std::ostream& out, std::span<const JamEvent> events);
void write_variance_bins_csv(std::ostream& out, std::span<const VarianceBinRow> bins);
void write_variance_bins_jsonl(std::ostream& out, std::span<const VarianceBinRow> bins);
void write_fd_csv(std::ostream& out, std::span<const FDObservation> obs);

// ---------------------------------------------------------------------------
// Summary-document builders. Every summary carries schema_version and the
// invocation manifest.

nlohmann::json theta_fit_json(const ThetaFit& fit);
nlohmann::json fixed_theta_json(const FixedThetaMetrics& metrics);
nlohmann::json comparison_json(const ModelComparison& cmp);
nlohmann::json crossing_json(const CrossingEstimate& est);
nlohmann::json variance_summary_json(const VarianceSummary& summary);
nlohmann::json jam_event_json(const JamEvent& event);

// Serializes with a stable layout (2-space indent, sorted keys via nlohmann
// object ordering) and a trailing newline.
void write_json_document(std::ostream& out, const nlohmann::json& doc);

}  // namespace coopperc
