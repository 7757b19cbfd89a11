#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rnav/geodesic.hpp"
#include "rnav/neural.hpp"
#include "rnav/rmp.hpp"
#include "rnav/world.hpp"

namespace rnav {

/// Which procedural worlds a dataset draws from. Each world picks its class
/// with the given probability and an obstacle count uniform in [0, cap].
struct WorldMix {
    double sphere_box_fraction = 0.5;
    int sphere_box_max = 200;
    int plane_max = 100;
};

nlohmann::json to_json(const WorldMix& m);
WorldMix world_mix_from_json(const nlohmann::json& j, WorldMix base = {});

/// Where one world of a dataset came from: enough to rebuild it exactly.
struct WorldRecipe {
    int index = 0;
    std::uint64_t seed = 0;
    WorldKind kind = WorldKind::sphere_box;
    int n_obstacles = 0;

    World build(const WorldGenConfig& gen = {}) const { return gen_world(kind, seed, n_obstacles, gen); }
};

/// World `index` of a mix under a master seed.
WorldRecipe world_recipe(std::uint64_t seed, std::string_view stream, int index, const WorldMix& mix);

struct Provenance {
    WorldRecipe world;
    Vec3 position = Vec3::Zero();
    Vec3 goal = Vec3::Zero();
};

/// One supervised step. `label` is -1 on sequence steps the expert could not
/// label; those steps feed the recurrent state but carry no loss.
struct Sample {
    std::vector<float> rays_rel;
    Eigen::Vector4d goal = Eigen::Vector4d::Zero();
    int label = -1;
    Provenance prov;
    std::int64_t sequence = -1;
    std::int64_t step = -1;
};

struct Dataset {
    std::vector<Sample> samples;
    nlohmann::json meta = nlohmann::json::object();

    bool empty() const { return samples.empty(); }
    std::size_t size() const { return samples.size(); }
};

struct DatasetConfig {
    int n_worlds = 200;
    int samples_per_world = 256;
    WorldMix mix;
    FieldOptions field;
    WorldGenConfig gen;
    int n_rays = 1024;
    double max_range = 5.0;
    /// Goals keep this much clearance; sampled positions keep `position_clearance`.
    double goal_clearance = 0.3;
    double position_clearance = 0.1;
    /// Positions this close to the goal are not sampled.
    double goal_radius = 0.25;
    int attempts_per_sample = 200;
    std::uint64_t seed = 1;
    int threads = 1;

    /// Paper scale: 6400 worlds x 1024 samples.
    static DatasetConfig paper();
    /// Desk scale: 200 worlds x 256 samples.
    static DatasetConfig desk();
};

nlohmann::json to_json(const DatasetConfig& c);
DatasetConfig dataset_config_from_json(const nlohmann::json& j, DatasetConfig base = {});

/// FNV-1a over the canonical JSON of the config, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

/// Per world: a random goal, its geodesic field, and free reachable positions
/// labeled with the expert direction. Worlds with no usable space are skipped
/// and counted in the metadata.
Dataset generate_dense_dataset(const DatasetConfig& config, const std::function<void(const std::string&)>& log = nullptr);

/// Rebuilds a sample from its provenance and the dataset config. Used to
/// verify integrity; the caller may reuse `field` across samples of one world.
Sample rederive_sample(const Provenance& prov, const DatasetConfig& config,
                       std::shared_ptr<const GeodesicField> field = nullptr);

/// 90/10 split by world: worlds with index % 10 == 9 are validation.
struct Split {
    std::vector<std::size_t> train, val;
};
Split split_by_world(const Dataset& ds);

inline constexpr std::uint32_t kDatasetVersion = 1;

/// "RNDS", u32 version, u64 count, then per sample the tensors "rays" and
/// "goal" in checkpoint encoding followed by label, provenance and sequence
/// fields. Metadata goes to `<path>.json`.
void write_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);
std::string encode_dataset(const Dataset& ds);
Dataset decode_dataset(const std::string& bytes);

struct TrainConfig {
    int epochs = 20;
    int batch = 256;
    AdamParams adam;
    std::uint64_t seed = 1;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    Network net;
    std::vector<EpochStats> history;
    /// Mean loss of the initial parameters on the training split.
    double initial_loss = 0.0;
};

/// Mini-batch Adam on mean BCE. Deterministic given the seed. Throws
/// DivergenceError on a non-finite loss.
TrainResult train_ffn(const Dataset& ds, const Split& split, const NetworkConfig& config, const TrainConfig& hyper,
                      const std::function<void(const EpochStats&)>& progress = nullptr);

/// Mean per-sample BCE of a feed-forward network over the given indices.
double mean_loss(const Network& net, const Dataset& ds, const std::vector<std::size_t>& indices);
/// Top-1 accuracy (argmax logit == label).
double top1_accuracy(const Network& net, const Dataset& ds, const std::vector<std::size_t>& indices);

/// Mean BCE over the labeled steps. A recurrent network consumes each
/// sequence in step order from a zero state; a feed-forward one evaluates
/// every sample alone.
double sequence_loss(const Network& net, const Dataset& ds);

/// L(model) / L(reference) on the same data.
double loss_ratio(const Network& model, const Network& reference, const Dataset& data);

struct DaggerConfig {
    int iterations = 20;
    int rollouts_per_iteration = 50;
    int worlds_per_iteration = 10;
    int epochs_per_iteration = 1;
    int tbptt_window = 64;
    int batch_windows = 32;
    int max_steps = 400;
    /// Held-out rollouts labeled after training for the loss ratio.
    int val_rollouts = 30;
    AdamParams adam;
    RolloutParams rollout;
    WorldMix mix;
    FieldOptions field;
    double sigma = 0.0;
    std::uint64_t seed = 1;
    int threads = 1;
};

nlohmann::json to_json(const DaggerConfig& c);
DaggerConfig dagger_config_from_json(const nlohmann::json& j, DaggerConfig base = {});

struct DaggerIteration {
    int iteration = 0;
    std::size_t sequences = 0;
    std::size_t labeled_steps = 0;
    double train_loss = 0.0;
    /// Loss ratio recurrent / frozen feed-forward on the aggregated data after retraining.
    double train_ratio = 0.0;
    int successes = 0;
};

struct DaggerResult {
    Network net;
    std::vector<DaggerIteration> history;
    /// Learner rollouts on held-out worlds, labeled by the expert.
    Dataset validation;
    double loss_ratio = 0.0;
};

/// Stage two: inserts an LSTM after the frozen bottleneck and trains only
/// the recurrent tensors on aggregated, expert-labeled learner rollouts.
DaggerResult dagger_train(const Network& frozen, const DaggerConfig& config,
                          const std::function<void(const DaggerIteration&)>& progress = nullptr);

}  // namespace rnav
