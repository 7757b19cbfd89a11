#include "rnav/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "rnav/parallel.hpp"
#include "rnav/world_io.hpp"

namespace rnav {

using nlohmann::json;

namespace {

template <class T>
void get_opt(const json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

template <class F>
auto parse_guard(const char* what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    }
}

json adam_json(const AdamParams& a) {
    return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}};
}

void adam_from(const json& j, AdamParams& a) {
    get_opt(j, "lr", a.lr);
    get_opt(j, "beta1", a.beta1);
    get_opt(j, "beta2", a.beta2);
    get_opt(j, "eps", a.eps);
}

json field_json(const FieldOptions& f) { return {{"cell_size", f.cell_size}, {"dilation_cells", f.dilation_cells}}; }

void field_from(const json& j, FieldOptions& f) {
    get_opt(j, "cell_size", f.cell_size);
    get_opt(j, "dilation_cells", f.dilation_cells);
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

std::vector<float> to_float(const std::vector<double>& d, double scale) {
    std::vector<float> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = static_cast<float>(d[i] / scale);
    return out;
}

/// Packs samples into network input matrices.
void gather(const Dataset& ds, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end, int n_rays,
            MatrixXd& rays, MatrixXd& goal, std::vector<int>& labels) {
    const auto B = static_cast<Eigen::Index>(end - begin);
    rays.resize(n_rays, B);
    goal.resize(4, B);
    labels.resize(static_cast<std::size_t>(B));
    for (Eigen::Index j = 0; j < B; ++j) {
        const Sample& s = ds.samples[idx[begin + static_cast<std::size_t>(j)]];
        if (static_cast<int>(s.rays_rel.size()) != n_rays) {
            throw ShapeError("sample has " + std::to_string(s.rays_rel.size()) + " rays, network expects " +
                             std::to_string(n_rays));
        }
        rays.col(j) = Eigen::Map<const Eigen::VectorXf>(s.rays_rel.data(), n_rays).cast<double>();
        goal.col(j) = s.goal;
        labels[static_cast<std::size_t>(j)] = s.label;
    }
}

}  // namespace

json to_json(const WorldMix& m) {
    return {{"sphere_box_fraction", m.sphere_box_fraction},
            {"sphere_box_max", m.sphere_box_max},
            {"plane_max", m.plane_max}};
}

WorldMix world_mix_from_json(const json& j, WorldMix m) {
    return parse_guard("world mix", [&] {
        get_opt(j, "sphere_box_fraction", m.sphere_box_fraction);
        get_opt(j, "sphere_box_max", m.sphere_box_max);
        get_opt(j, "plane_max", m.plane_max);
        return m;
    });
}

WorldRecipe world_recipe(std::uint64_t seed, std::string_view stream, int index, const WorldMix& mix) {
    if (mix.sphere_box_max < 0 || mix.plane_max < 0) throw ConfigError("obstacle caps must be non-negative");
    Rng r(derive_seed(seed, stream, static_cast<std::uint64_t>(index)));
    WorldRecipe w;
    w.index = index;
    w.kind = r.uniform() < mix.sphere_box_fraction ? WorldKind::sphere_box : WorldKind::plane;
    const int cap = w.kind == WorldKind::sphere_box ? mix.sphere_box_max : mix.plane_max;
    w.n_obstacles = static_cast<int>(r.below(static_cast<std::uint64_t>(cap) + 1));
    w.seed = r.next_u64();
    return w;
}

DatasetConfig DatasetConfig::paper() {
    DatasetConfig c;
    c.n_worlds = 6400;
    c.samples_per_world = 1024;
    return c;
}

DatasetConfig DatasetConfig::desk() { return {}; }

json to_json(const DatasetConfig& c) {
    return {{"n_worlds", c.n_worlds},
            {"samples_per_world", c.samples_per_world},
            {"mix", to_json(c.mix)},
            {"field", field_json(c.field)},
            {"n_rays", c.n_rays},
            {"max_range", c.max_range},
            {"goal_clearance", c.goal_clearance},
            {"position_clearance", c.position_clearance},
            {"goal_radius", c.goal_radius},
            {"attempts_per_sample", c.attempts_per_sample},
            {"seed", c.seed}};
}

DatasetConfig dataset_config_from_json(const json& j, DatasetConfig c) {
    return parse_guard("dataset config", [&] {
        get_opt(j, "n_worlds", c.n_worlds);
        get_opt(j, "samples_per_world", c.samples_per_world);
        if (j.contains("mix")) c.mix = world_mix_from_json(j["mix"], c.mix);
        if (j.contains("field")) field_from(j["field"], c.field);
        get_opt(j, "n_rays", c.n_rays);
        get_opt(j, "max_range", c.max_range);
        get_opt(j, "goal_clearance", c.goal_clearance);
        get_opt(j, "position_clearance", c.position_clearance);
        get_opt(j, "goal_radius", c.goal_radius);
        get_opt(j, "attempts_per_sample", c.attempts_per_sample);
        get_opt(j, "seed", c.seed);
        return c;
    });
}

std::string config_hash(const json& config) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : config.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

namespace {

struct WorldSamples {
    std::vector<Sample> samples;
    bool skipped = false;
    std::string reason;
    std::size_t discarded = 0;
};

std::optional<int> expert_label(const GeodesicField& field, const Vec3& x, const DirectionSet& set) {
    try {
        return label_one_hot(field.expert_direction(x), set);
    } catch (const FieldQueryError&) {
        return std::nullopt;
    }
}

WorldSamples sample_world(const DatasetConfig& cfg, int w) {
    WorldSamples out;
    const WorldRecipe recipe = world_recipe(cfg.seed, "dataset.world", w, cfg.mix);
    const World world = recipe.build(cfg.gen);
    Rng rng(derive_seed(cfg.seed, "dataset.sample", static_cast<std::uint64_t>(w)));
    const auto goal = sample_free_point(world, rng, cfg.goal_clearance, 20000);
    if (!goal) {
        out.skipped = true;
        out.reason = "no free goal";
        return out;
    }
    std::optional<GeodesicField> field;
    try {
        field = compute_field(world, *goal, cfg.field);
    } catch (const GoalInObstacle& e) {
        out.skipped = true;
        out.reason = e.what();
        return out;
    }
    const auto set = shared_directions(static_cast<std::size_t>(cfg.n_rays));
    for (int s = 0; s < cfg.samples_per_world; ++s) {
        for (int attempt = 0; attempt < cfg.attempts_per_sample; ++attempt) {
            const auto x = sample_free_point(world, rng, cfg.position_clearance, cfg.attempts_per_sample);
            if (!x) break;
            if ((*x - *goal).norm() <= cfg.goal_radius) continue;
            const auto label = expert_label(*field, *x, *set);
            if (!label) {
                ++out.discarded;
                continue;
            }
            Sample smp;
            const RayBundle b = cast_bundle(world, *x, set, cfg.max_range);
            smp.rays_rel = to_float(b.distances, cfg.max_range);
            smp.goal = encode(b, *x, *goal).goal_features();
            smp.label = *label;
            smp.prov = {recipe, *x, *goal};
            out.samples.push_back(std::move(smp));
            break;
        }
    }
    if (out.samples.empty()) {
        out.skipped = true;
        out.reason = "no reachable free positions";
    }
    return out;
}

}  // namespace

Dataset generate_dense_dataset(const DatasetConfig& cfg, const std::function<void(const std::string&)>& log) {
    if (cfg.n_worlds < 1 || cfg.samples_per_world < 1) throw ConfigError("dataset counts must be >= 1");
    if (cfg.n_rays < 1 || !(cfg.max_range > 0.0)) throw ConfigError("invalid ray settings");
    std::vector<WorldSamples> per(static_cast<std::size_t>(cfg.n_worlds));
    parallel_for(per.size(), cfg.threads, [&](std::size_t w) { per[w] = sample_world(cfg, static_cast<int>(w)); });

    Dataset ds;
    std::size_t skipped = 0, discarded = 0, n_sb = 0, n_plane = 0;
    for (std::size_t w = 0; w < per.size(); ++w) {
        auto& ws = per[w];
        discarded += ws.discarded;
        if (ws.skipped) {
            ++skipped;
            if (log) log("world " + std::to_string(w) + " skipped: " + ws.reason);
            continue;
        }
        if (ws.samples.front().prov.world.kind == WorldKind::sphere_box)
            ++n_sb;
        else
            ++n_plane;
        for (auto& s : ws.samples) ds.samples.push_back(std::move(s));
    }
    const json config = to_json(cfg);
    ds.meta = {{"tool", kToolVersion},
               {"kind", "dense"},
               {"config", config},
               {"config_hash", config_hash(config)},
               {"n_rays", cfg.n_rays},
               {"max_range", cfg.max_range},
               {"cell_size", cfg.field.cell_size},
               {"label_source", "trilinear field interpolation, central-difference gradient"},
               {"worlds", {{"sphere_box", n_sb}, {"plane", n_plane}, {"skipped", skipped}}},
               {"discarded_samples", discarded},
               {"samples", ds.samples.size()}};
    return ds;
}

Sample rederive_sample(const Provenance& prov, const DatasetConfig& cfg, std::shared_ptr<const GeodesicField> field) {
    const World world = prov.world.build(cfg.gen);
    if (!field) field = std::make_shared<GeodesicField>(compute_field(world, prov.goal, cfg.field));
    const auto set = shared_directions(static_cast<std::size_t>(cfg.n_rays));
    Sample s;
    const RayBundle b = cast_bundle(world, prov.position, set, cfg.max_range);
    s.rays_rel = to_float(b.distances, cfg.max_range);
    s.goal = encode(b, prov.position, prov.goal).goal_features();
    s.label = expert_label(*field, prov.position, *set).value_or(-1);
    s.prov = prov;
    return s;
}

Split split_by_world(const Dataset& ds) {
    Split sp;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        if (ds.samples[i].label < 0) continue;
        (ds.samples[i].prov.world.index % 10 == 9 ? sp.val : sp.train).push_back(i);
    }
    return sp;
}

// ---- dataset files ----

std::string encode_dataset(const Dataset& ds) {
    ByteWriter w;
    w.bytes("RNDS");
    w.u32(kDatasetVersion);
    const std::string meta = ds.meta.dump();
    w.u64(meta.size());
    w.bytes(meta);
    w.u64(ds.samples.size());
    for (const auto& s : ds.samples) {
        VectorXd rays(static_cast<Eigen::Index>(s.rays_rel.size()));
        for (std::size_t i = 0; i < s.rays_rel.size(); ++i) rays[static_cast<Eigen::Index>(i)] = s.rays_rel[i];
        write_tensor(w, "rays", rays);
        write_tensor(w, "goal", VectorXd(s.goal));
        w.i64(s.label);
        w.u32(static_cast<std::uint32_t>(s.prov.world.index));
        w.u64(s.prov.world.seed);
        w.u32(static_cast<std::uint32_t>(s.prov.world.kind));
        w.u32(static_cast<std::uint32_t>(s.prov.world.n_obstacles));
        for (int a = 0; a < 3; ++a) w.f64(s.prov.position[a]);
        for (int a = 0; a < 3; ++a) w.f64(s.prov.goal[a]);
        w.i64(s.sequence);
        w.i64(s.step);
    }
    return w.str();
}

Dataset decode_dataset(const std::string& bytes) {
    ByteReader r(bytes);
    if (bytes.size() < 4 || r.bytes(4) != "RNDS") throw ParseError("not a dataset file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kDatasetVersion) {
        throw VersionError("dataset version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kDatasetVersion) + ")");
    }
    Dataset ds;
    const std::uint64_t mlen = r.u64();
    if (mlen > bytes.size()) throw ParseError("dataset metadata length exceeds file size");
    try {
        ds.meta = json::parse(r.bytes(static_cast<std::size_t>(mlen)));
    } catch (const json::exception& e) {
        throw ParseError(std::string("dataset metadata: ") + e.what());
    }
    const std::uint64_t count = r.u64();
    if (count > bytes.size()) throw ParseError("dataset sample count exceeds file size");
    ds.samples.reserve(static_cast<std::size_t>(count));
    for (std::uint64_t n = 0; n < count; ++n) {
        Sample s;
        const RawTensor rays = read_tensor(r);
        const RawTensor goal = read_tensor(r);
        if (rays.name != "rays" || rays.dims.size() != 1 || goal.name != "goal" || goal.dims.size() != 1 ||
            goal.dims[0] != 4) {
            throw ParseError("dataset record " + std::to_string(n) + " has unexpected tensors");
        }
        s.rays_rel.resize(rays.data.size());
        for (std::size_t i = 0; i < rays.data.size(); ++i) s.rays_rel[i] = static_cast<float>(rays.data[i]);
        for (int a = 0; a < 4; ++a) s.goal[a] = goal.data[static_cast<std::size_t>(a)];
        s.label = static_cast<int>(r.i64());
        s.prov.world.index = static_cast<int>(r.u32());
        s.prov.world.seed = r.u64();
        const std::uint32_t kind = r.u32();
        if (kind > static_cast<std::uint32_t>(WorldKind::imported)) throw ParseError("dataset record has bad world kind");
        s.prov.world.kind = static_cast<WorldKind>(kind);
        s.prov.world.n_obstacles = static_cast<int>(r.u32());
        for (int a = 0; a < 3; ++a) s.prov.position[a] = r.f64();
        for (int a = 0; a < 3; ++a) s.prov.goal[a] = r.f64();
        s.sequence = r.i64();
        s.step = r.i64();
        if (s.label >= static_cast<int>(s.rays_rel.size()) || s.label < -1) {
            throw ParseError("dataset record " + std::to_string(n) + " has label out of range");
        }
        ds.samples.push_back(std::move(s));
    }
    if (!r.done()) throw ParseError("trailing bytes after dataset records");
    return ds;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
    write_file(path, encode_dataset(ds));
    write_file(path.string() + ".json", ds.meta.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

// ---- feed-forward training ----

json to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs}, {"batch", c.batch}, {"adam", adam_json(c.adam)}, {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
    return parse_guard("train config", [&] {
        get_opt(j, "epochs", c.epochs);
        get_opt(j, "batch", c.batch);
        if (j.contains("adam")) adam_from(j["adam"], c.adam);
        get_opt(j, "seed", c.seed);
        return c;
    });
}

namespace {

constexpr std::size_t kEvalBatch = 512;

/// Runs the feed-forward network over indices in batches; `fn` sees (logits, labels).
template <class F>
void eval_batches(const Network& net, const Dataset& ds, const std::vector<std::size_t>& idx, F&& fn) {
    MatrixXd rays, goal;
    std::vector<int> labels;
    for (std::size_t b = 0; b < idx.size(); b += kEvalBatch) {
        const std::size_t e = std::min(idx.size(), b + kEvalBatch);
        gather(ds, idx, b, e, net.config.n_rays, rays, goal, labels);
        const MatrixXd lat = trunk_forward(net.params, net.config, rays, goal, nullptr);
        MatrixXd logits = net.params.dec_W * lat;
        logits.colwise() += net.params.dec_b;
        fn(logits, labels);
    }
}

}  // namespace

double mean_loss(const Network& net, const Dataset& ds, const std::vector<std::size_t>& idx) {
    if (net.params.has_lstm) throw ConfigError("mean_loss evaluates feed-forward networks; use sequence_loss");
    double total = 0.0;
    std::size_t n = 0;
    eval_batches(net, ds, idx, [&](const MatrixXd& logits, const std::vector<int>& labels) {
        std::size_t c = 0;
        total += bce_loss_sum(logits, labels, nullptr, 1.0, &c);
        n += c;
    });
    if (n == 0) throw ConfigError("no labeled samples to evaluate");
    return total / static_cast<double>(n);
}

double top1_accuracy(const Network& net, const Dataset& ds, const std::vector<std::size_t>& idx) {
    std::size_t hit = 0, n = 0;
    eval_batches(net, ds, idx, [&](const MatrixXd& logits, const std::vector<int>& labels) {
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
            if (labels[static_cast<std::size_t>(j)] < 0) continue;
            Eigen::Index arg;
            logits.col(j).maxCoeff(&arg);
            hit += arg == labels[static_cast<std::size_t>(j)];
            ++n;
        }
    });
    return n ? static_cast<double>(hit) / static_cast<double>(n) : 0.0;
}

TrainResult train_ffn(const Dataset& ds, const Split& split, const NetworkConfig& config, const TrainConfig& hyper,
                      const std::function<void(const EpochStats&)>& progress) {
    if (split.train.empty()) throw ConfigError("dataset has no training samples");
    if (hyper.epochs < 1 || hyper.batch < 1) throw ConfigError("epochs and batch must be >= 1");
    NetworkConfig cfg = config;
    cfg.use_lstm = false;
    cfg.validate();
    Rng init_rng(derive_seed(hyper.seed, "train.init"));
    TrainResult res;
    res.net = {cfg, init_params(cfg, init_rng)};
    Adam opt(res.net.params, hyper.adam);
    res.initial_loss = mean_loss(res.net, ds, split.train);

    std::vector<std::size_t> order = split.train;
    MatrixXd rays, goal, dlogits;
    std::vector<int> labels;
    TrunkTape ttape;
    HeadTape htape;
    const auto B = static_cast<std::size_t>(hyper.batch);
    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        Rng shuf(derive_seed(hyper.seed, "train.shuffle", static_cast<std::uint64_t>(epoch)));
        shuffle(order, shuf);
        double total = 0.0;
        for (std::size_t b = 0; b < order.size(); b += B) {
            const std::size_t e = std::min(order.size(), b + B);
            gather(ds, order, b, e, cfg.n_rays, rays, goal, labels);
            const MatrixXd lat = trunk_forward(res.net.params, cfg, rays, goal, &ttape);
            const auto logits = head_forward(res.net.params, cfg, {lat}, nullptr, &htape);
            const double n = static_cast<double>(e - b);
            const double loss = bce_loss_sum(logits[0], labels, &dlogits, 1.0 / n);
            if (!std::isfinite(loss)) {
                throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                      std::to_string(b / B));
            }
            total += loss;
            NetworkParams grad = zeros_like(res.net.params);
            const auto dlat = head_backward(res.net.params, cfg, htape, {dlogits}, grad);
            trunk_backward(res.net.params, cfg, ttape, dlat[0], grad);
            opt.step(res.net.params, grad);
        }
        EpochStats st{epoch, total / static_cast<double>(order.size()),
                      split.val.empty() ? std::nan("") : mean_loss(res.net, ds, split.val)};
        res.history.push_back(st);
        if (progress) progress(st);
    }
    return res;
}

// ---- sequence evaluation ----

namespace {

/// Sample indices grouped by sequence id, each in step order. Samples
/// without a sequence id form singleton sequences.
std::vector<std::vector<std::size_t>> sequences_of(const Dataset& ds) {
    std::map<std::int64_t, std::vector<std::size_t>> by_id;
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        if (ds.samples[i].sequence < 0)
            out.push_back({i});
        else
            by_id[ds.samples[i].sequence].push_back(i);
    }
    for (auto& [id, v] : by_id) {
        std::stable_sort(v.begin(), v.end(),
                         [&](std::size_t a, std::size_t b) { return ds.samples[a].step < ds.samples[b].step; });
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace

double sequence_loss(const Network& net, const Dataset& ds) {
    double total = 0.0;
    std::size_t n = 0;
    if (!net.params.has_lstm) {
        std::vector<std::size_t> all(ds.samples.size());
        std::iota(all.begin(), all.end(), 0);
        eval_batches(net, ds, all, [&](const MatrixXd& logits, const std::vector<int>& labels) {
            std::size_t c = 0;
            total += bce_loss_sum(logits, labels, nullptr, 1.0, &c);
            n += c;
        });
    } else {
        MatrixXd rays, goal;
        std::vector<int> labels;
        for (const auto& seq : sequences_of(ds)) {
            gather(ds, seq, 0, seq.size(), net.config.n_rays, rays, goal, labels);
            const MatrixXd lat = trunk_forward(net.params, net.config, rays, goal, nullptr);
            LstmState st = LstmState::zeros(net.config.bottleneck_width);
            std::vector<MatrixXd> steps;
            for (Eigen::Index t = 0; t < lat.cols(); ++t) steps.push_back(lat.col(t));
            const auto logits = head_forward(net.params, net.config, steps, &st, nullptr);
            for (std::size_t t = 0; t < logits.size(); ++t) {
                std::size_t c = 0;
                total += bce_loss_sum(logits[t], {labels[t]}, nullptr, 1.0, &c);
                n += c;
            }
        }
    }
    if (n == 0) throw ConfigError("no labeled samples to evaluate");
    return total / static_cast<double>(n);
}

double loss_ratio(const Network& model, const Network& reference, const Dataset& data) {
    return sequence_loss(model, data) / sequence_loss(reference, data);
}

// ---- DAgger ----

json to_json(const DaggerConfig& c) {
    return {{"iterations", c.iterations},
            {"rollouts_per_iteration", c.rollouts_per_iteration},
            {"worlds_per_iteration", c.worlds_per_iteration},
            {"epochs_per_iteration", c.epochs_per_iteration},
            {"tbptt_window", c.tbptt_window},
            {"batch_windows", c.batch_windows},
            {"max_steps", c.max_steps},
            {"val_rollouts", c.val_rollouts},
            {"adam", adam_json(c.adam)},
            {"rollout", to_json(c.rollout)},
            {"mix", to_json(c.mix)},
            {"field", field_json(c.field)},
            {"sigma", c.sigma},
            {"seed", c.seed}};
}

DaggerConfig dagger_config_from_json(const json& j, DaggerConfig c) {
    return parse_guard("dagger config", [&] {
        get_opt(j, "iterations", c.iterations);
        get_opt(j, "rollouts_per_iteration", c.rollouts_per_iteration);
        get_opt(j, "worlds_per_iteration", c.worlds_per_iteration);
        get_opt(j, "epochs_per_iteration", c.epochs_per_iteration);
        get_opt(j, "tbptt_window", c.tbptt_window);
        get_opt(j, "batch_windows", c.batch_windows);
        get_opt(j, "max_steps", c.max_steps);
        get_opt(j, "val_rollouts", c.val_rollouts);
        if (j.contains("adam")) adam_from(j["adam"], c.adam);
        if (j.contains("rollout")) c.rollout = rollout_params_from_json(j["rollout"], c.rollout);
        if (j.contains("mix")) c.mix = world_mix_from_json(j["mix"], c.mix);
        if (j.contains("field")) field_from(j["field"], c.field);
        get_opt(j, "sigma", c.sigma);
        get_opt(j, "seed", c.seed);
        return c;
    });
}

namespace {

/// Learner trajectory in latent space: the frozen trunk makes the pre-LSTM
/// latent a fixed function of the observation, so it is cached.
struct LatentSequence {
    MatrixXd latents;  // width x T
    std::vector<int> labels;
};

struct RolloutTask {
    std::size_t world_slot = 0;
    Vec3 start, goal;
};

struct WorldCase {
    std::unique_ptr<World> world;
    std::shared_ptr<const GeodesicField> field;
    Vec3 goal = Vec3::Zero();
    WorldRecipe recipe;
};

/// Builds worlds with a goal and field and draws `per_world` starts from which the goal is reachable.
std::vector<RolloutTask> plan_rollouts(const DaggerConfig& cfg, std::string_view stream, int first_world,
                                       int n_worlds, int n_rollouts, std::vector<WorldCase>& cases) {
    std::vector<RolloutTask> tasks;
    cases.clear();
    for (int w = 0; w < n_worlds; ++w) {
        WorldCase wc;
        wc.recipe = world_recipe(cfg.seed, stream, first_world + w, cfg.mix);
        wc.world = std::make_unique<World>(wc.recipe.build());
        Rng rng(derive_seed(cfg.seed, std::string(stream) + ".pairs", static_cast<std::uint64_t>(first_world + w)));
        StartGoalOptions opt;
        std::pair<Vec3, Vec3> pair;
        try {
            pair = sample_start_goal(*wc.world, rng, opt);
        } catch (const SamplingExhausted&) {
            opt.require_no_los = false;
            try {
                pair = sample_start_goal(*wc.world, rng, opt);
            } catch (const SamplingExhausted&) {
                continue;
            }
        }
        wc.goal = pair.second;
        try {
            wc.field = std::make_shared<GeodesicField>(compute_field(*wc.world, wc.goal, cfg.field));
        } catch (const GoalInObstacle&) {
            continue;
        }
        cases.push_back(std::move(wc));
        WorldCase& c = cases.back();
        const std::size_t slot = cases.size() - 1;
        const int quota = n_rollouts / n_worlds + (w < n_rollouts % n_worlds ? 1 : 0);
        std::vector<Vec3> starts{pair.first};
        for (int attempt = 0; static_cast<int>(starts.size()) < quota && attempt < 2000; ++attempt) {
            const auto s = sample_free_point(*c.world, rng, opt.clearance, 200);
            if (!s) break;
            if ((*s - c.goal).norm() < opt.min_separation || !c.field->reachable(*s)) continue;
            starts.push_back(*s);
        }
        for (int i = 0; i < quota && i < static_cast<int>(starts.size()); ++i) tasks.push_back({slot, starts[i], c.goal});
    }
    return tasks;
}

struct LabeledRollout {
    LatentSequence seq;
    std::vector<Sample> samples;  // filled only when keep_inputs
    bool success = false;
};

LabeledRollout labeled_rollout(const std::shared_ptr<const Network>& net, const WorldCase& wc, const RolloutTask& task,
                               const DaggerConfig& cfg, std::uint64_t noise_seed, bool keep_inputs,
                               std::int64_t sequence_id) {
    LearnedPlanner planner(net, cfg.rollout.goal);
    std::vector<VectorXd> lat;
    planner.set_latent_log(&lat);
    LabeledRollout out;
    const auto set = shared_directions(static_cast<std::size_t>(cfg.rollout.n_rays));
    auto observer = [&](const RobotState& s, const RayBundle& observed, int step) {
        const int label = expert_label(*wc.field, s.x, *set).value_or(-1);
        out.seq.labels.push_back(label);
        if (keep_inputs) {
            Sample smp;
            const EncodedInput in = encode(observed, s.x, task.goal);
            smp.rays_rel.resize(static_cast<std::size_t>(in.rays_rel.size()));
            for (Eigen::Index i = 0; i < in.rays_rel.size(); ++i)
                smp.rays_rel[static_cast<std::size_t>(i)] = static_cast<float>(in.rays_rel[i]);
            smp.goal = in.goal_features();
            smp.label = label;
            smp.prov = {wc.recipe, s.x, task.goal};
            smp.sequence = sequence_id;
            smp.step = step;
            out.samples.push_back(std::move(smp));
        }
    };
    RolloutParams rp = cfg.rollout;
    rp.max_steps = cfg.max_steps;
    rp.stuck_window = std::min(rp.stuck_window, std::max(1, cfg.max_steps - 1));
    Rng noise(noise_seed);
    const auto res = rollout(*wc.world, planner, task.start, task.goal, rp, cfg.sigma, noise, observer);
    out.success = res.status == RolloutStatus::success;
    if (lat.size() != out.seq.labels.size()) throw Error("internal", "latent log out of step with labels");
    out.seq.latents.resize(net->config.bottleneck_width, static_cast<Eigen::Index>(lat.size()));
    for (std::size_t t = 0; t < lat.size(); ++t) out.seq.latents.col(static_cast<Eigen::Index>(t)) = lat[t];
    return out;
}

/// One pass of truncated BPTT over every window of every sequence. Window
/// start states come from running the current LSTM over each sequence prefix.
double train_lstm_epoch(Network& net, Adam& opt, const std::vector<LatentSequence>& data, const DaggerConfig& cfg,
                        std::uint64_t shuffle_seed) {
    const auto& c = net.config;
    const int H = c.bottleneck_width;
    const int W = cfg.tbptt_window;
    struct Window {
        std::size_t seq;
        Eigen::Index start, len;
        VectorXd h0, c0;
    };
    std::vector<Window> windows;
    for (std::size_t s = 0; s < data.size(); ++s) {
        const auto& lat = data[s].latents;
        LstmState st = LstmState::zeros(H);
        for (Eigen::Index t0 = 0; t0 < lat.cols(); t0 += W) {
            const Eigen::Index len = std::min<Eigen::Index>(W, lat.cols() - t0);
            windows.push_back({s, t0, len, st.h.col(0), st.c.col(0)});
            for (Eigen::Index t = t0; t < t0 + len; ++t) lstm_step(net.params.lstm, lat.col(t), st, nullptr);
        }
    }
    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(shuffle_seed);
    shuffle(order, rng);

    const FreezeMask frozen = [](const std::string& n) { return !is_lstm_tensor(n); };
    double total = 0.0;
    std::size_t counted_total = 0;
    const auto BW = static_cast<std::size_t>(std::max(1, cfg.batch_windows));
    for (std::size_t b = 0; b < order.size(); b += BW) {
        const std::size_t e = std::min(order.size(), b + BW);
        const auto B = static_cast<Eigen::Index>(e - b);
        Eigen::Index T = 0;
        for (std::size_t k = b; k < e; ++k) T = std::max(T, windows[order[k]].len);
        std::vector<MatrixXd> lat(static_cast<std::size_t>(T), MatrixXd::Zero(H, B));
        std::vector<std::vector<int>> labels(static_cast<std::size_t>(T), std::vector<int>(static_cast<std::size_t>(B), -1));
        LstmState st{MatrixXd(H, B), MatrixXd(H, B)};
        std::size_t supervised = 0;
        for (Eigen::Index j = 0; j < B; ++j) {
            const Window& w = windows[order[b + static_cast<std::size_t>(j)]];
            st.h.col(j) = w.h0;
            st.c.col(j) = w.c0;
            const auto& seq = data[w.seq];
            for (Eigen::Index t = 0; t < w.len; ++t) {
                lat[static_cast<std::size_t>(t)].col(j) = seq.latents.col(w.start + t);
                const int l = seq.labels[static_cast<std::size_t>(w.start + t)];
                labels[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] = l;
                supervised += l >= 0;
            }
        }
        if (supervised == 0) continue;
        HeadTape tape;
        const auto logits = head_forward(net.params, c, lat, &st, &tape);
        std::vector<MatrixXd> dlogits(logits.size());
        double loss = 0.0;
        for (std::size_t t = 0; t < logits.size(); ++t)
            loss += bce_loss_sum(logits[t], labels[t], &dlogits[t], 1.0 / static_cast<double>(supervised));
        if (!std::isfinite(loss)) throw DivergenceError("non-finite loss during recurrent training");
        total += loss;
        counted_total += supervised;
        NetworkParams grad = zeros_like(net.params);
        head_backward(net.params, c, tape, dlogits, grad, false);
        opt.step(net.params, grad, frozen);
    }
    return counted_total ? total / static_cast<double>(counted_total) : 0.0;
}

/// (recurrent, feed-forward) mean loss over the labeled steps, each sequence from a zero state.
std::pair<double, double> latent_losses(const Network& net, const std::vector<LatentSequence>& data) {
    double rnn = 0.0, ffn = 0.0;
    std::size_t n = 0;
    for (const auto& seq : data) {
        std::vector<MatrixXd> steps;
        for (Eigen::Index t = 0; t < seq.latents.cols(); ++t) steps.push_back(seq.latents.col(t));
        LstmState st = LstmState::zeros(net.config.bottleneck_width);
        const auto logits = head_forward(net.params, net.config, steps, &st, nullptr);
        MatrixXd plain = net.params.dec_W * seq.latents;
        plain.colwise() += net.params.dec_b;
        std::size_t c = 0;
        for (std::size_t t = 0; t < logits.size(); ++t) rnn += bce_loss_sum(logits[t], {seq.labels[t]});
        ffn += bce_loss_sum(plain, seq.labels, nullptr, 1.0, &c);
        n += c;
    }
    return {n ? rnn / n : 0.0, n ? ffn / n : 0.0};
}

}  // namespace

DaggerResult dagger_train(const Network& frozen, const DaggerConfig& cfg,
                          const std::function<void(const DaggerIteration&)>& progress) {
    if (frozen.params.has_lstm) throw ConfigError("stage two starts from a feed-forward checkpoint");
    if (cfg.iterations < 1 || cfg.rollouts_per_iteration < 1 || cfg.worlds_per_iteration < 1 ||
        cfg.epochs_per_iteration < 1 || cfg.tbptt_window < 1 || cfg.max_steps < 2) {
        throw ConfigError("DAgger schedule values must be positive");
    }
    if (frozen.config.n_rays != cfg.rollout.n_rays) throw ShapeError("checkpoint and rollout ray counts differ");
    cfg.rollout.validate();

    DaggerResult res;
    res.net.config = frozen.config;
    res.net.config.use_lstm = true;
    res.net.config.lstm_width = frozen.config.bottleneck_width;
    res.net.params = frozen.params;
    Rng init(derive_seed(cfg.seed, "dagger.init"));
    insert_lstm(res.net.params, res.net.config, init);
    Adam opt(res.net.params, cfg.adam);

    std::vector<LatentSequence> data;
    std::size_t labeled = 0;
    for (int it = 0; it < cfg.iterations; ++it) {
        auto snapshot = std::make_shared<const Network>(res.net);
        std::vector<WorldCase> cases;
        const auto tasks = plan_rollouts(cfg, "dagger.world", it * cfg.worlds_per_iteration, cfg.worlds_per_iteration,
                                         cfg.rollouts_per_iteration, cases);
        std::vector<LabeledRollout> outs(tasks.size());
        parallel_for(tasks.size(), cfg.threads, [&](std::size_t r) {
            const std::uint64_t ns =
                derive_seed(cfg.seed, "dagger.noise", static_cast<std::uint64_t>(it) * 100000 + r);
            outs[r] = labeled_rollout(snapshot, cases[tasks[r].world_slot], tasks[r], cfg, ns, false, -1);
        });
        DaggerIteration rec;
        rec.iteration = it + 1;
        for (auto& o : outs) {
            rec.successes += o.success;
            const auto n = static_cast<std::size_t>(std::count_if(o.seq.labels.begin(), o.seq.labels.end(),
                                                                  [](int l) { return l >= 0; }));
            if (n == 0) continue;
            labeled += n;
            data.push_back(std::move(o.seq));
        }
        for (int e = 0; e < cfg.epochs_per_iteration; ++e) {
            rec.train_loss = train_lstm_epoch(
                res.net, opt, data, cfg,
                derive_seed(cfg.seed, "dagger.shuffle", static_cast<std::uint64_t>(it) * 1000 + static_cast<std::uint64_t>(e)));
        }
        rec.sequences = data.size();
        rec.labeled_steps = labeled;
        const auto [rl, fl] = latent_losses(res.net, data);
        rec.train_ratio = fl > 0.0 ? rl / fl : 0.0;
        res.history.push_back(rec);
        if (progress) progress(rec);
    }

    // Held-out learner rollouts on worlds from a separate stream.
    auto final_net = std::make_shared<const Network>(res.net);
    std::vector<WorldCase> cases;
    const int val_worlds = std::max(1, std::min(cfg.worlds_per_iteration, cfg.val_rollouts));
    const auto tasks = plan_rollouts(cfg, "dagger.val", 0, val_worlds, cfg.val_rollouts, cases);
    std::vector<LabeledRollout> outs(tasks.size());
    parallel_for(tasks.size(), cfg.threads, [&](std::size_t r) {
        outs[r] = labeled_rollout(final_net, cases[tasks[r].world_slot], tasks[r], cfg,
                                  derive_seed(cfg.seed, "dagger.val.noise", r), true, static_cast<std::int64_t>(r));
    });
    for (auto& o : outs)
        for (auto& s : o.samples) res.validation.samples.push_back(std::move(s));
    res.validation.meta = {{"tool", kToolVersion}, {"kind", "dagger_validation"}, {"config", to_json(cfg)}};
    Network reference = frozen;
    res.loss_ratio = loss_ratio(res.net, reference, res.validation);
    return res;
}

}  // namespace rnav
