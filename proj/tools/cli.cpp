#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rnav/bench.hpp"
#include "rnav/geodesic.hpp"
#include "rnav/neural.hpp"
#include "rnav/trainer.hpp"
#include "rnav/world_io.hpp"

namespace rnav::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : Error {
    explicit UsageError(const std::string& what) : Error("usage", what) {}
};

struct Globals {
    std::uint64_t seed = 1;
    int threads = 1;
    std::string profile = "desk";
    std::string config_path;
    json config = json::object();

    bool paper() const { return profile == "paper"; }
    json section(const char* name) const { return config.contains(name) ? config.at(name) : json::object(); }
    json effective() const { return {{"seed", seed}, {"threads", threads}, {"profile", profile}}; }
};

fs::path out_dir() {
    const char* env = std::getenv("RNAV_OUT_DIR");
    return env && *env ? fs::path(env) : fs::path(".");
}

fs::path out_or_default(const std::string& given, const char* name) {
    return given.empty() ? out_dir() / name : fs::path(given);
}

Vec3 parse_vec3(const std::string& s, const char* what) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw UsageError(std::string(what) + " expects x,y,z; got '" + s + "'");
        }
    }
    if (v.size() != 3) throw UsageError(std::string(what) + " expects x,y,z; got '" + s + "'");
    return {v[0], v[1], v[2]};
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (!part.empty()) out.push_back(part);
    }
    return out;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

WorldKind parse_kind(const std::string& s) {
    try {
        const WorldKind k = world_kind_from_string(s);
        if (k == WorldKind::imported) throw ConfigError("");
        return k;
    } catch (const Error&) {
        throw UsageError("unknown world kind '" + s + "' (sphere_box|plane)");
    }
}

int density_cap(WorldKind k) {
    const WorldGenConfig gen;
    return k == WorldKind::sphere_box ? gen.sphere_box_cap : gen.plane_cap;
}

void print_json_line(std::ostream& out, const json& j) { out << j.dump() << "\n"; }

// ---- gen-worlds ----

struct GenWorldsArgs {
    std::string kind;
    int n = 0;
    int count = 1;
    std::string out;
};

void cmd_gen_worlds(const Globals& g, const GenWorldsArgs& a, std::ostream& out) {
    const WorldKind kind = parse_kind(a.kind);
    if (a.n < 0 || a.n > density_cap(kind)) {
        throw UsageError("--n must be in [0, " + std::to_string(density_cap(kind)) + "] for " + a.kind);
    }
    if (a.count < 1) throw UsageError("--count must be >= 1");
    const fs::path dir = out_or_default(a.out, "worlds");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (int i = 0; i < a.count; ++i) {
        const std::uint64_t seed = derive_seed(g.seed, std::string("worldgen.") + to_string(kind), i);
        const World w = gen_world(kind, seed, a.n);
        json meta = {{"tool", kToolVersion},
                     {"command", "gen-worlds"},
                     {"config", g.effective()},
                     {"kind", to_string(kind)},
                     {"n", a.n},
                     {"index", i}};
        const fs::path path = dir / (std::string(to_string(kind)) + "_n" + std::to_string(a.n) + "_" +
                                     std::to_string(i) + ".json");
        export_world(w, path, meta);
        out << path.string() << " kind=" << to_string(kind) << " obstacles=" << w.primitives().size()
            << " seed=" << seed << "\n";
    }
}

// ---- field ----

struct FieldArgs {
    std::string world;
    std::string goal;
    std::string out;
    std::optional<double> cell_size;
    std::optional<int> dilation;
};

FieldOptions field_options(const Globals& g, std::optional<double> cell, std::optional<int> dil) {
    FieldOptions f;
    const json j = g.section("field");
    if (j.contains("cell_size")) f.cell_size = j.at("cell_size").get<double>();
    if (j.contains("dilation_cells")) f.dilation_cells = j.at("dilation_cells").get<int>();
    if (cell) f.cell_size = *cell;
    if (dil) f.dilation_cells = *dil;
    if (!(f.cell_size > 0.0) || f.dilation_cells < 0) throw UsageError("invalid field resolution or dilation");
    return f;
}

void cmd_field(const Globals& g, const FieldArgs& a, std::ostream& out) {
    const Vec3 goal = parse_vec3(a.goal, "--goal");
    const FieldOptions opt = field_options(g, a.cell_size, a.dilation);
    const World w = import_world(a.world);
    const GeodesicField f = compute_field(w, goal, opt);
    const fs::path path = out_or_default(a.out, "field.rngf");
    write_field(f, path);
    std::size_t reached = 0;
    double max_v = 0.0;
    for (double v : f.values()) {
        if (std::isfinite(v)) {
            ++reached;
            max_v = std::max(max_v, v);
        }
    }
    print_json_line(out, {{"field", path.string()},
                          {"dims", f.dims()},
                          {"cell_size", opt.cell_size},
                          {"dilation_cells", opt.dilation_cells},
                          {"reachable_cells", reached},
                          {"max_distance", max_v}});
}

// ---- rollout ----

struct RolloutArgs {
    std::string world;
    std::string planner = "baseline";
    std::string checkpoint;
    std::string start;
    std::string goal;
    double sigma = 0.0;
    std::optional<int> max_steps;
    std::string out;
};

RolloutParams rollout_params(const Globals& g) {
    return g.config.contains("rollout") ? rollout_params_from_json(g.config.at("rollout")) : RolloutParams{};
}

void cmd_rollout(const Globals& g, const RolloutArgs& a, std::ostream& out) {
    PlannerKind kind;
    try {
        kind = planner_kind_from_string(a.planner);
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
    const bool learned = kind == PlannerKind::ffn || kind == PlannerKind::rnn;
    if (learned && a.checkpoint.empty()) throw UsageError(std::string(to_string(kind)) + " planner requires --checkpoint");
    if (!(a.sigma >= 0.0)) throw UsageError("--sigma must be >= 0");

    RolloutParams rp = rollout_params(g);
    if (a.max_steps) rp.max_steps = *a.max_steps;
    rp.validate();

    std::shared_ptr<const Network> net;
    if (learned) {
        net = std::make_shared<const Network>(load_checkpoint(a.checkpoint));
        if (net->params.has_lstm != (kind == PlannerKind::rnn)) {
            throw UsageError(a.checkpoint + " does not hold a " + to_string(kind) + " network");
        }
        rp.n_rays = net->config.n_rays;
    }

    const World w = import_world(a.world);
    Vec3 start, goal;
    if (a.start.empty() != a.goal.empty()) throw UsageError("give both --start and --goal, or neither");
    if (a.start.empty()) {
        Rng rng(derive_seed(g.seed, "rollout.start_goal"));
        std::tie(start, goal) = sample_start_goal(w, rng);
    } else {
        start = parse_vec3(a.start, "--start");
        goal = parse_vec3(a.goal, "--goal");
    }

    std::unique_ptr<Planner> planner;
    switch (kind) {
        case PlannerKind::baseline: planner = std::make_unique<BaselinePlanner>(rp.goal); break;
        case PlannerKind::expert: {
            const FieldOptions fo = field_options(g, std::nullopt, std::nullopt);
            planner = std::make_unique<ExpertPlanner>(std::make_shared<const GeodesicField>(compute_field(w, goal, fo)),
                                                      rp.goal);
            break;
        }
        case PlannerKind::ffn:
        case PlannerKind::rnn: planner = std::make_unique<LearnedPlanner>(net, rp.goal); break;
    }

    Rng noise(derive_seed(g.seed, "rollout.noise"));
    const TrajectoryResult res = rollout(w, *planner, start, goal, rp, a.sigma, noise);
    const json header = {{"tool", kToolVersion},
                         {"command", "rollout"},
                         {"config", g.effective()},
                         {"world", a.world},
                         {"planner", to_string(kind)},
                         {"checkpoint", a.checkpoint},
                         {"start", vec_json(start)},
                         {"goal", vec_json(goal)},
                         {"sigma", a.sigma},
                         {"rollout", to_json(rp)}};
    const fs::path path = out_or_default(a.out, "trajectory.jsonl");
    write_trajectory_jsonl(res, path, header);
    print_json_line(out, {{"trajectory", path.string()},
                          {"planner", to_string(kind)},
                          {"sigma", a.sigma},
                          {"status", to_string(res.status)},
                          {"length", res.length},
                          {"steps", res.steps},
                          {"min_ray", res.min_ray},
                          {"tta_ms", res.tta_ms},
                          {"qt_ms", res.mean_qt_ms}});
}

// ---- gen-dataset / train ----

struct DatasetArgs {
    std::optional<int> worlds;
    std::optional<int> samples_per_world;
    std::string out;
};

DatasetConfig dataset_config(const Globals& g, const DatasetArgs& a) {
    DatasetConfig c = g.paper() ? DatasetConfig::paper() : DatasetConfig::desk();
    c = dataset_config_from_json(g.section("dataset"), c);
    c.seed = g.seed;
    c.threads = g.threads;
    if (a.worlds) c.n_worlds = *a.worlds;
    if (a.samples_per_world) c.samples_per_world = *a.samples_per_world;
    if (c.n_worlds < 1 || c.samples_per_world < 1) throw UsageError("dataset counts must be >= 1");
    return c;
}

Dataset make_dataset(const Globals& g, const DatasetArgs& a, std::ostream& out) {
    const DatasetConfig c = dataset_config(g, a);
    return generate_dense_dataset(c, [&](const std::string& line) { out << line << "\n"; });
}

void cmd_gen_dataset(const Globals& g, const DatasetArgs& a, std::ostream& out) {
    const Dataset ds = make_dataset(g, a, out);
    const fs::path path = out_or_default(a.out, "dataset.rnds");
    write_dataset(ds, path);
    print_json_line(out, {{"dataset", path.string()}, {"samples", ds.size()}, {"worlds", ds.meta.at("worlds")}});
}

struct TrainArgs {
    DatasetArgs data;
    std::string dataset;
    std::string save_dataset;
    std::optional<int> epochs;
    std::optional<int> batch;
    std::optional<double> lr;
    std::string out;
};

NetworkConfig network_config(const Globals& g) {
    NetworkConfig c = g.paper() ? NetworkConfig::paper() : NetworkConfig::desk();
    if (g.config.contains("network")) {
        json merged = to_json(c);
        merged.update(g.config.at("network"));
        c = network_config_from_json(merged);
    }
    c.use_lstm = false;
    c.validate();
    return c;
}

void cmd_train(const Globals& g, const TrainArgs& a, std::ostream& out) {
    Dataset ds;
    if (!a.dataset.empty()) {
        ds = read_dataset(a.dataset);
    } else {
        ds = make_dataset(g, a.data, out);
        if (!a.save_dataset.empty()) write_dataset(ds, a.save_dataset);
    }
    const NetworkConfig nc = network_config(g);
    TrainConfig tc = train_config_from_json(g.section("train"));
    tc.seed = g.seed;
    if (a.epochs) tc.epochs = *a.epochs;
    if (a.batch) tc.batch = *a.batch;
    if (a.lr) tc.adam.lr = *a.lr;
    if (tc.epochs < 1 || tc.batch < 1 || !(tc.adam.lr > 0.0)) throw UsageError("epochs, batch and lr must be positive");

    const Split split = split_by_world(ds);
    TrainResult res = train_ffn(ds, split, nc, tc, [&](const EpochStats& e) {
        print_json_line(out, {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
    });
    json history = json::array();
    for (const auto& e : res.history) {
        history.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
    }
    const json meta = {{"command", "train"},
                       {"config", g.effective()},
                       {"dataset",
                        {{"path", a.dataset},
                         {"config", ds.meta.value("config", json())},
                         {"config_hash", ds.meta.value("config_hash", "")},
                         {"samples", ds.size()}}},
                       {"train", to_json(tc)},
                       {"initial_loss", res.initial_loss},
                       {"history", history}};
    const fs::path path = out_or_default(a.out, "ffn.rnck");
    save_checkpoint(res.net, path, meta);
    print_json_line(out, {{"checkpoint", path.string()},
                          {"train_loss", res.history.back().train_loss},
                          {"val_loss", res.history.back().val_loss}});
}

// ---- dagger ----

struct DaggerArgs {
    std::string frozen;
    std::optional<int> iterations;
    std::optional<int> rollouts;
    std::optional<int> epochs;
    std::optional<double> sigma;
    std::string save_validation;
    std::string out;
};

void cmd_dagger(const Globals& g, const DaggerArgs& a, std::ostream& out) {
    if (a.frozen.empty()) throw UsageError("dagger requires --frozen");
    const Network frozen = load_checkpoint(a.frozen);
    DaggerConfig dc = dagger_config_from_json(g.section("dagger"));
    dc.seed = g.seed;
    dc.threads = g.threads;
    if (a.iterations) dc.iterations = *a.iterations;
    if (a.rollouts) dc.rollouts_per_iteration = *a.rollouts;
    if (a.epochs) dc.epochs_per_iteration = *a.epochs;
    if (a.sigma) dc.sigma = *a.sigma;
    const DaggerResult res = dagger_train(frozen, dc, [&](const DaggerIteration& it) {
        print_json_line(out, {{"iteration", it.iteration},
                              {"sequences", it.sequences},
                              {"labeled_steps", it.labeled_steps},
                              {"train_loss", it.train_loss},
                              {"train_ratio", it.train_ratio},
                              {"successes", it.successes}});
    });
    json history = json::array();
    for (const auto& it : res.history) {
        history.push_back({{"iteration", it.iteration},
                           {"sequences", it.sequences},
                           {"labeled_steps", it.labeled_steps},
                           {"train_loss", it.train_loss},
                           {"train_ratio", it.train_ratio},
                           {"successes", it.successes}});
    }
    const json meta = {{"command", "dagger"},
                       {"config", g.effective()},
                       {"frozen", a.frozen},
                       {"dagger", to_json(dc)},
                       {"history", history},
                       {"validation_samples", res.validation.size()},
                       {"loss_ratio", res.loss_ratio}};
    const fs::path path = out_or_default(a.out, "rnn.rnck");
    save_checkpoint(res.net, path, meta);
    if (!a.save_validation.empty()) write_dataset(res.validation, a.save_validation);
    print_json_line(out, {{"checkpoint", path.string()}, {"loss_ratio", res.loss_ratio}});
}

// ---- bench ----

struct BenchArgs {
    std::string planners = "baseline,expert";
    std::string worlds;
    std::string densities;
    std::optional<int> runs;
    std::string sigmas;
    std::string ffn;
    std::string rnn;
    std::string out;
};

void cmd_bench(const Globals& g, const BenchArgs& a, std::ostream& out) {
    BenchmarkSpec spec = g.paper() ? BenchmarkSpec::paper() : BenchmarkSpec::desk();
    if (g.config.contains("bench")) spec = benchmark_spec_from_json(g.config.at("bench"), spec);
    if (g.config.contains("rollout")) spec.rollout = rollout_params_from_json(g.config.at("rollout"), spec.rollout);
    spec.seed = g.seed;
    spec.threads = g.threads;

    try {
        if (!a.planners.empty()) {
            spec.planners.clear();
            for (const auto& p : split_list(a.planners)) {
                PlannerSpec ps{planner_kind_from_string(p), {}};
                if (ps.kind == PlannerKind::ffn) ps.checkpoint = a.ffn;
                if (ps.kind == PlannerKind::rnn) ps.checkpoint = a.rnn;
                spec.planners.push_back(ps);
            }
        }
        if (!a.worlds.empty() || !a.densities.empty()) {
            std::vector<WorldKind> kinds;
            if (!a.worlds.empty()) {
                for (const auto& w : split_list(a.worlds)) kinds.push_back(parse_kind(w));
            } else {
                for (const auto& w : spec.worlds) kinds.push_back(w.kind);
            }
            std::vector<WorldSweep> sweeps;
            for (WorldKind k : kinds) {
                WorldSweep s{k, {}};
                if (!a.densities.empty()) {
                    for (const auto& d : split_list(a.densities)) s.densities.push_back(std::stoi(d));
                } else {
                    s.densities = (k == WorldKind::sphere_box ? BenchmarkSpec::desk().worlds[0]
                                                              : BenchmarkSpec::desk().worlds[1])
                                      .densities;
                }
                sweeps.push_back(s);
            }
            spec.worlds = sweeps;
        }
        if (!a.sigmas.empty()) {
            spec.sigmas.clear();
            for (const auto& s : split_list(a.sigmas)) spec.sigmas.push_back(std::stod(s));
        }
        if (a.runs) spec.runs = *a.runs;
        spec.validate();
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    } catch (const std::logic_error& e) {
        throw UsageError(std::string("bad number in list: ") + e.what());
    }

    BenchmarkReport report = run_noise_sweep(spec);
    report.spec["config"] = g.effective();
    const fs::path prefix = out_or_default(a.out, "bench");
    const fs::path base = prefix.parent_path().empty() ? fs::path(".") : prefix.parent_path();
    std::error_code ec;
    fs::create_directories(base, ec);
    emit_report(report, prefix.string() + ".json", ReportFormat::json);
    emit_report(report, prefix.string() + ".csv", ReportFormat::csv);
    emit_report(report, prefix.string() + ".dat", ReportFormat::dat);
    out << report_csv(report);
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    const std::string text = read_file(path);
    try {
        json j = json::parse(text);
        if (!j.is_object()) throw ConfigError(path + ": config must be a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void error_record(std::ostream& err, const std::string& kind, const std::string& message, int code) {
    err << json{{"error", kind}, {"message", message}, {"exit", code}}.dump() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Reactive navigation toolkit: worlds, geodesic fields, learned planners, benchmarks."};
    app.name("rnav");
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    Globals g;
    app.add_option("--seed", g.seed, "Master seed; stages derive named sub-streams")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--profile", g.profile, "Scale preset")->check(CLI::IsMember({"desk", "paper"}))->capture_default_str();
    app.add_option("--config", g.config_path, "JSON config; flags override it");

    GenWorldsArgs gw;
    auto* c_gw = app.add_subcommand("gen-worlds", "Generate procedural worlds as JSON")->fallthrough();
    c_gw->add_option("--kind", gw.kind, "sphere_box or plane")->required();
    c_gw->add_option("--n", gw.n, "Obstacle count")->required();
    c_gw->add_option("--count", gw.count, "Number of worlds")->capture_default_str();
    c_gw->add_option("--out", gw.out, "Output directory (default $RNAV_OUT_DIR/worlds)");

    FieldArgs fa;
    auto* c_field = app.add_subcommand("field", "Compute the geodesic distance field of a world")->fallthrough();
    c_field->add_option("--world", fa.world, "World file (JSON or RNVX)")->required();
    c_field->add_option("--goal", fa.goal, "Goal x,y,z")->required();
    c_field->add_option("--cell-size", fa.cell_size, "Grid resolution in meters");
    c_field->add_option("--dilation", fa.dilation, "Obstacle dilation in cells");
    c_field->add_option("--out", fa.out, "Output RNGF file");

    RolloutArgs ra;
    auto* c_roll = app.add_subcommand("rollout", "Run one planner rollout and write its trajectory")->fallthrough();
    c_roll->add_option("--world", ra.world, "World file")->required();
    c_roll->add_option("--planner", ra.planner, "baseline, expert, ffn or rnn")->capture_default_str();
    c_roll->add_option("--checkpoint", ra.checkpoint, "Network checkpoint for ffn/rnn");
    c_roll->add_option("--start", ra.start, "Start x,y,z (sampled if omitted)");
    c_roll->add_option("--goal", ra.goal, "Goal x,y,z (sampled if omitted)");
    c_roll->add_option("--sigma", ra.sigma, "Relative ray noise")->capture_default_str();
    c_roll->add_option("--max-steps", ra.max_steps, "Step budget");
    c_roll->add_option("--out", ra.out, "Trajectory JSONL");

    DatasetArgs da;
    auto* c_ds = app.add_subcommand("gen-dataset", "Generate a dense expert-labeled dataset")->fallthrough();
    c_ds->add_option("--worlds", da.worlds, "Number of worlds");
    c_ds->add_option("--samples-per-world", da.samples_per_world, "Samples per world");
    c_ds->add_option("--out", da.out, "Dataset file");

    TrainArgs ta;
    auto* c_train = app.add_subcommand("train", "Train the feed-forward network")->fallthrough();
    c_train->add_option("--dataset", ta.dataset, "Existing dataset (generated from the profile if omitted)");
    c_train->add_option("--save-dataset", ta.save_dataset, "Also write the generated dataset here");
    c_train->add_option("--worlds", ta.data.worlds, "Number of worlds when generating");
    c_train->add_option("--samples-per-world", ta.data.samples_per_world, "Samples per world when generating");
    c_train->add_option("--epochs", ta.epochs, "Training epochs");
    c_train->add_option("--batch", ta.batch, "Mini-batch size");
    c_train->add_option("--lr", ta.lr, "Adam learning rate");
    c_train->add_option("--out", ta.out, "Checkpoint file");

    DaggerArgs dg;
    auto* c_dag = app.add_subcommand("dagger", "Stage two: train an inserted LSTM with DAgger")->fallthrough();
    c_dag->add_option("--frozen", dg.frozen, "Trained feed-forward checkpoint")->required();
    c_dag->add_option("--iterations", dg.iterations, "DAgger iterations");
    c_dag->add_option("--rollouts", dg.rollouts, "Rollouts per iteration");
    c_dag->add_option("--epochs", dg.epochs, "Epochs per iteration");
    c_dag->add_option("--sigma", dg.sigma, "Ray noise during rollouts");
    c_dag->add_option("--save-validation", dg.save_validation, "Write the held-out validation data");
    c_dag->add_option("--out", dg.out, "Checkpoint file");

    BenchArgs ba;
    auto* c_bench = app.add_subcommand("bench", "Paired success and noise sweeps")->fallthrough();
    c_bench->add_option("--planners", ba.planners, "Comma list of baseline, expert, ffn, rnn")->capture_default_str();
    c_bench->add_option("--worlds", ba.worlds, "Comma list of world kinds (default: both)");
    c_bench->add_option("--densities", ba.densities, "Comma list of obstacle counts (default: profile grid)");
    c_bench->add_option("--runs", ba.runs, "Runs per datapoint");
    c_bench->add_option("--sigmas", ba.sigmas, "Comma list of noise levels (default 0)");
    c_bench->add_option("--ffn", ba.ffn, "Checkpoint for the ffn planner");
    c_bench->add_option("--rnn", ba.rnn, "Checkpoint for the rnn planner");
    c_bench->add_option("--out", ba.out, "Output prefix; writes .json, .csv and .dat");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        error_record(err, "usage", e.what(), 2);
        return 2;
    }

    try {
        g.config = load_config(g.config_path);
        if (*c_gw) cmd_gen_worlds(g, gw, out);
        else if (*c_field) cmd_field(g, fa, out);
        else if (*c_roll) cmd_rollout(g, ra, out);
        else if (*c_ds) cmd_gen_dataset(g, da, out);
        else if (*c_train) cmd_train(g, ta, out);
        else if (*c_dag) cmd_dagger(g, dg, out);
        else if (*c_bench) cmd_bench(g, ba, out);
        return 0;
    } catch (const UsageError& e) {
        error_record(err, e.kind(), e.what(), 2);
        return 2;
    } catch (const ConfigError& e) {
        error_record(err, e.kind(), e.what(), 2);
        return 2;
    } catch (const Error& e) {
        error_record(err, e.kind(), e.what(), 1);
        return 1;
    } catch (const json::exception& e) {
        error_record(err, "config", e.what(), 2);
        return 2;
    } catch (const std::exception& e) {
        error_record(err, "internal", e.what(), 1);
        return 1;
    }
}

}  // namespace rnav::cli
