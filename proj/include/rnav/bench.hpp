#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rnav/geodesic.hpp"
#include "rnav/neural.hpp"
#include "rnav/rmp.hpp"
#include "rnav/world.hpp"

namespace rnav {

enum class PlannerKind { baseline, expert, ffn, rnn };

const char* to_string(PlannerKind k);
PlannerKind planner_kind_from_string(const std::string& s);

struct PlannerSpec {
    PlannerKind kind = PlannerKind::baseline;
    /// Required for ffn and rnn.
    std::string checkpoint;

    std::string label() const { return to_string(kind); }
};

struct WorldSweep {
    WorldKind kind = WorldKind::sphere_box;
    std::vector<int> densities;
};

struct BenchmarkSpec {
    std::vector<PlannerSpec> planners;
    std::vector<WorldSweep> worlds;
    int runs = 30;
    std::vector<double> sigmas{0.0};
    RolloutParams rollout;
    StartGoalOptions start_goal;
    FieldOptions field;
    WorldGenConfig gen;
    std::uint64_t seed = 1;
    int threads = 1;

    void validate() const;

    /// Desk grid: sphere-box {0..200 step 40}, plane {0..100 step 20}, 30 runs.
    static BenchmarkSpec desk();
    /// Same grid at 100 runs per point.
    static BenchmarkSpec paper();
};

nlohmann::json to_json(const BenchmarkSpec& s);
BenchmarkSpec benchmark_spec_from_json(const nlohmann::json& j, BenchmarkSpec base = {});

/// One rollout. Run index `run` of a (world, density) pair uses the same world,
/// start and goal for every planner and every noise level.
struct RunRecord {
    std::string planner;
    WorldKind world = WorldKind::sphere_box;
    int density = 0;
    double sigma = 0.0;
    int run = 0;
    std::uint64_t world_seed = 0;
    Vec3 start = Vec3::Zero();
    Vec3 goal = Vec3::Zero();
    /// False when no start/goal pair without line of sight existed.
    bool no_los = true;
    RolloutStatus status = RolloutStatus::timeout;
    double length = 0.0;
    int steps = 0;
    double min_ray = 0.0;
    double tta_ms = 0.0;
    double qt_ms = 0.0;

    bool operator==(const RunRecord&) const = default;
};

/// Aggregates of one planner in one (world, density, sigma) cell. Length and
/// timing means cover the common-success subset of the cell group; they are
/// empty when that subset is empty.
struct CellStats {
    std::string planner;
    WorldKind world = WorldKind::sphere_box;
    int density = 0;
    double sigma = 0.0;
    int n = 0;
    int successes = 0;
    double success_rate = 0.0;
    int n_common = 0;
    std::optional<double> len_m;
    std::optional<double> tta_ms;
    std::optional<double> qt_ms;

    bool operator==(const CellStats&) const = default;
};

struct BenchmarkReport {
    nlohmann::json spec = nlohmann::json::object();
    std::vector<RunRecord> records;
    std::vector<CellStats> cells;

    bool operator==(const BenchmarkReport&) const = default;
};

/// Cells in planner-major order of first appearance, then world, density, sigma.
std::vector<CellStats> common_success_stats(const std::vector<RunRecord>& records);

using BenchProgress = std::function<void(const RunRecord&)>;

/// Paired rollouts for every planner over the density grid. Checkpoints are
/// loaded before any rollout; a bad one throws immediately.
BenchmarkReport run_success_sweep(const BenchmarkSpec& spec, const BenchProgress& progress = nullptr);

/// The same protocol repeated for each noise level in `spec.sigmas`.
BenchmarkReport run_noise_sweep(const BenchmarkSpec& spec, const BenchProgress& progress = nullptr);

enum class ReportFormat { csv, json, dat };

nlohmann::json to_json(const BenchmarkReport& r);
BenchmarkReport benchmark_report_from_json(const nlohmann::json& j);

std::string report_csv(const BenchmarkReport& r);
/// Gnuplot data: one block per (planner, world, sigma), columns density,
/// success rate, length, TTA, QT. Blocks are separated by two blank lines.
std::string report_dat(const BenchmarkReport& r);

void emit_report(const BenchmarkReport& r, const std::filesystem::path& path, ReportFormat format);
BenchmarkReport read_report(const std::filesystem::path& path);

}  // namespace rnav
