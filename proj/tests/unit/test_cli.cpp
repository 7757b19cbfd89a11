#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "rnav/neural.hpp"
#include "rnav/world_io.hpp"

using namespace rnav;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "rnav");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("rnav_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

/// A small network and short schedules so the training commands finish quickly.
fs::path tiny_config(const fs::path& dir) {
    const json cfg = {
        {"dataset", {{"n_worlds", 4}, {"samples_per_world", 8}, {"n_rays", 64}, {"field", {{"cell_size", 0.25}}}}},
        {"network",
         {{"n_rays", 64}, {"ray_widths", {16, 8}}, {"goal_width", 8}, {"bottleneck_width", 8}, {"lstm_width", 8},
          {"bottleneck_layers", 1}, {"k_top", 4}}},
        {"train", {{"epochs", 2}, {"batch", 16}}},
        {"dagger",
         {{"iterations", 1},
          {"rollouts_per_iteration", 2},
          {"worlds_per_iteration", 1},
          {"epochs_per_iteration", 1},
          {"max_steps", 30},
          {"val_rollouts", 1},
          {"rollout", {{"n_rays", 64}}},
          {"field", {{"cell_size", 0.25}}}}},
        {"rollout", {{"n_rays", 64}, {"max_steps", 400}}},
        {"bench", {{"field", {{"cell_size", 0.25}}}}},
        {"field", {{"cell_size", 0.25}}}};
    const fs::path p = dir / "tiny.json";
    std::ofstream(p) << cfg.dump(2);
    return p;
}

void check_error_record(const Result& r, int code) {
    CHECK(r.code == code);
    std::istringstream is(r.err);
    std::string line;
    std::getline(is, line);
    const json j = json::parse(line);
    CHECK(j.at("exit") == code);
    CHECK(j.contains("error"));
    CHECK(j.contains("message"));
}

}  // namespace

TEST_CASE("usage errors exit with 2 and one error record") {
    check_error_record(run_cli({}), 2);
    check_error_record(run_cli({"fly"}), 2);
    check_error_record(run_cli({"gen-worlds", "--kind", "sphere_box", "--n", "-1"}), 2);
    check_error_record(run_cli({"gen-worlds", "--kind", "donut", "--n", "3"}), 2);
    check_error_record(run_cli({"--profile", "laptop", "gen-worlds", "--kind", "plane", "--n", "3"}), 2);
    check_error_record(run_cli({"--config", "/nonexistent/config.json", "gen-worlds", "--kind", "plane", "--n", "1"}), 1);
    const fs::path dir = scratch_dir("usage");
    std::ofstream(dir / "bad.json") << "{not json";
    check_error_record(run_cli({"--config", (dir / "bad.json").string(), "gen-worlds", "--kind", "plane", "--n", "1"}),
                       2);
}

TEST_CASE("gen-worlds writes deterministic files") {
    const fs::path a = scratch_dir("gw_a"), b = scratch_dir("gw_b");
    const auto args = [](const fs::path& d, const char* seed) {
        return std::vector<std::string>{"--seed", seed, "gen-worlds", "--kind", "sphere_box", "--n", "120",
                                        "--count", "5", "--out", d.string()};
    };
    REQUIRE(run_cli(args(a, "9")).code == 0);
    REQUIRE(run_cli(args(b, "9")).code == 0);
    int files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        ++files;
        CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
        const json j = json::parse(slurp(e.path()));
        CHECK(j.dump().find("\"tool\"") != std::string::npos);
    }
    CHECK(files == 5);
    const fs::path c = scratch_dir("gw_c");
    REQUIRE(run_cli(args(c, "10")).code == 0);
    CHECK(slurp(c / "sphere_box_n120_0.json") != slurp(a / "sphere_box_n120_0.json"));
    CHECK(import_world(a / "sphere_box_n120_3.json").primitives().size() == 120);
}

TEST_CASE("the output directory defaults to the environment variable") {
    const fs::path dir = scratch_dir("env");
    ::setenv("RNAV_OUT_DIR", dir.string().c_str(), 1);
    const Result r = run_cli({"gen-worlds", "--kind", "plane", "--n", "4"});
    ::unsetenv("RNAV_OUT_DIR");
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "worlds" / "plane_n4_0.json"));
}

TEST_CASE("field and rollout commands") {
    const fs::path dir = scratch_dir("roll");
    REQUIRE(run_cli({"gen-worlds", "--kind", "sphere_box", "--n", "0", "--out", dir.string()}).code == 0);
    const std::string world = (dir / "sphere_box_n0_0.json").string();

    const Result f = run_cli({"field", "--world", world, "--goal", "7,5,5", "--cell-size", "0.25", "--out",
                              (dir / "f.rngf").string()});
    CHECK(f.code == 0);
    CHECK(slurp(dir / "f.rngf").substr(0, 4) == "RNGF");
    check_error_record(run_cli({"field", "--world", (dir / "none.json").string(), "--goal", "1,1,1"}), 1);
    check_error_record(run_cli({"field", "--world", world, "--goal", "-3,5,5"}), 1);
    check_error_record(run_cli({"field", "--world", world, "--goal", "1,2"}), 2);

    const Result r = run_cli({"rollout", "--world", world, "--start", "3,5,5", "--goal", "7,5,5", "--sigma", "0.3",
                              "--out", (dir / "t.jsonl").string()});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out).at("status") == "success");
    std::ifstream in(dir / "t.jsonl");
    std::string first;
    std::getline(in, first);
    const json header = json::parse(first);
    CHECK(header.at("type") == "header");
    CHECK(header.at("config").at("sigma") == 0.3);

    check_error_record(run_cli({"rollout", "--world", world, "--planner", "rnn"}), 2);
    check_error_record(run_cli({"rollout", "--world", world, "--planner", "ffn"}), 2);
    check_error_record(run_cli({"rollout", "--world", world, "--start", "3,5,5"}), 2);
}

TEST_CASE("train, dagger and bench end to end") {
    const fs::path dir = scratch_dir("train");
    const std::string cfg = tiny_config(dir).string();
    const std::string ffn_a = (dir / "a.rnck").string(), ffn_b = (dir / "b.rnck").string();
    REQUIRE(run_cli({"--config", cfg, "--seed", "1", "train", "--out", ffn_a}).code == 0);
    REQUIRE(run_cli({"--config", cfg, "--seed", "1", "train", "--out", ffn_b}).code == 0);
    CHECK(slurp(ffn_a) == slurp(ffn_b));
    json meta;
    load_checkpoint(ffn_a, nullptr, &meta);
    CHECK(meta.at("config").at("seed") == 1);
    CHECK(meta.at("train").at("epochs") == 2);

    const std::string rnn = (dir / "rnn.rnck").string();
    const Result d = run_cli({"--config", cfg, "dagger", "--frozen", ffn_a, "--out", rnn, "--save-validation",
                              (dir / "val.rnds").string()});
    REQUIRE(d.code == 0);
    const Network frozen = load_checkpoint(ffn_a);
    const Network rec = load_checkpoint(rnn);
    CHECK(rec.params.has_lstm);
    CHECK(tensors_equal(rec.params, frozen.params, true));
    CHECK(fs::exists(dir / "val.rnds"));
    check_error_record(run_cli({"--config", cfg, "dagger", "--frozen", rnn}), 2);

    REQUIRE(run_cli({"gen-worlds", "--kind", "plane", "--n", "10", "--out", dir.string()}).code == 0);
    const Result rr = run_cli({"--config", cfg, "rollout", "--world", (dir / "plane_n10_0.json").string(), "--planner",
                               "rnn", "--checkpoint", rnn, "--max-steps", "150", "--out", (dir / "r.jsonl").string()});
    REQUIRE(rr.code == 0);
    std::ifstream in(dir / "r.jsonl");
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    CHECK(json::parse(line).contains("lstm_influence"));
    check_error_record(run_cli({"--config", cfg, "rollout", "--world", (dir / "plane_n10_0.json").string(),
                                "--planner", "rnn", "--checkpoint", ffn_a}),
                       2);

    const std::string prefix = (dir / "bench").string();
    const Result b = run_cli({"--config", cfg, "bench", "--planners", "base,expert,ffn", "--ffn", ffn_a, "--worlds",
                              "plane", "--densities", "0,20", "--runs", "2", "--out", prefix});
    REQUIRE(b.code == 0);
    for (const char* planner : {"baseline,plane,0,", "expert,plane,20,", "ffn,plane,20,"})
        CHECK(b.out.find(planner) != std::string::npos);
    CHECK(slurp(prefix + ".csv") == b.out);
    CHECK(fs::exists(prefix + ".json"));
    CHECK(fs::exists(prefix + ".dat"));
    check_error_record(run_cli({"bench", "--planners", "ffn", "--runs", "1"}), 2);
    check_error_record(run_cli({"bench", "--planners", "baseline", "--runs", "0"}), 2);
}
