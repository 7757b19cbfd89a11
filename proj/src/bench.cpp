#include "rnav/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <tuple>

#include "rnav/parallel.hpp"
#include "rnav/world_io.hpp"

namespace rnav {

using nlohmann::json;

const char* to_string(PlannerKind k) {
    switch (k) {
        case PlannerKind::baseline: return "baseline";
        case PlannerKind::expert: return "expert";
        case PlannerKind::ffn: return "ffn";
        case PlannerKind::rnn: return "rnn";
    }
    return "?";
}

PlannerKind planner_kind_from_string(const std::string& s) {
    if (s == "baseline" || s == "base") return PlannerKind::baseline;
    if (s == "expert") return PlannerKind::expert;
    if (s == "ffn") return PlannerKind::ffn;
    if (s == "rnn") return PlannerKind::rnn;
    throw ConfigError("unknown planner '" + s + "'");
}

void BenchmarkSpec::validate() const {
    if (planners.empty()) throw ConfigError("benchmark needs at least one planner");
    if (worlds.empty()) throw ConfigError("benchmark needs at least one world class");
    if (runs < 1) throw ConfigError("runs must be >= 1");
    if (sigmas.empty()) throw ConfigError("benchmark needs at least one noise level");
    for (double s : sigmas) {
        if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("noise levels must be finite and >= 0");
    }
    const WorldGenConfig gen;
    for (const auto& w : worlds) {
        if (w.kind == WorldKind::imported) throw ConfigError("benchmark worlds must be procedural");
        if (w.densities.empty()) throw ConfigError(std::string("no densities for ") + to_string(w.kind));
        const int cap = w.kind == WorldKind::sphere_box ? gen.sphere_box_cap : gen.plane_cap;
        for (int d : w.densities) {
            if (d < 0 || d > cap) {
                throw ConfigError(std::string("density ") + std::to_string(d) + " outside [0, " +
                                  std::to_string(cap) + "] for " + to_string(w.kind));
            }
        }
    }
    for (const auto& p : planners) {
        if ((p.kind == PlannerKind::ffn || p.kind == PlannerKind::rnn) && p.checkpoint.empty()) {
            throw ConfigError(std::string(to_string(p.kind)) + " planner needs a checkpoint");
        }
    }
    rollout.validate();
}

BenchmarkSpec BenchmarkSpec::desk() {
    BenchmarkSpec s;
    s.planners = {{PlannerKind::baseline, {}}, {PlannerKind::expert, {}}};
    s.worlds = {{WorldKind::sphere_box, {0, 40, 80, 120, 160, 200}}, {WorldKind::plane, {0, 20, 40, 60, 80, 100}}};
    s.runs = 30;
    return s;
}

BenchmarkSpec BenchmarkSpec::paper() {
    BenchmarkSpec s = desk();
    s.runs = 100;
    return s;
}

json to_json(const BenchmarkSpec& s) {
    json planners = json::array();
    for (const auto& p : s.planners) {
        json e = {{"kind", to_string(p.kind)}};
        if (!p.checkpoint.empty()) e["checkpoint"] = p.checkpoint;
        planners.push_back(e);
    }
    json worlds = json::array();
    for (const auto& w : s.worlds) worlds.push_back({{"kind", to_string(w.kind)}, {"densities", w.densities}});
    return {{"planners", planners},
            {"worlds", worlds},
            {"runs", s.runs},
            {"sigmas", s.sigmas},
            {"rollout", to_json(s.rollout)},
            {"start_goal",
             {{"min_separation", s.start_goal.min_separation},
              {"require_no_los", s.start_goal.require_no_los},
              {"clearance", s.start_goal.clearance},
              {"max_attempts", s.start_goal.max_attempts}}},
            {"field", {{"cell_size", s.field.cell_size}, {"dilation_cells", s.field.dilation_cells}}},
            {"seed", s.seed}};
}

BenchmarkSpec benchmark_spec_from_json(const json& j, BenchmarkSpec s) {
    try {
        if (j.contains("planners")) {
            s.planners.clear();
            for (const auto& e : j.at("planners")) {
                PlannerSpec p;
                p.kind = planner_kind_from_string(e.at("kind").get<std::string>());
                if (e.contains("checkpoint")) p.checkpoint = e.at("checkpoint").get<std::string>();
                s.planners.push_back(p);
            }
        }
        if (j.contains("worlds")) {
            s.worlds.clear();
            for (const auto& e : j.at("worlds")) {
                s.worlds.push_back({world_kind_from_string(e.at("kind").get<std::string>()),
                                    e.at("densities").get<std::vector<int>>()});
            }
        }
        if (j.contains("runs")) s.runs = j.at("runs").get<int>();
        if (j.contains("sigmas")) s.sigmas = j.at("sigmas").get<std::vector<double>>();
        if (j.contains("rollout")) s.rollout = rollout_params_from_json(j.at("rollout"), s.rollout);
        if (j.contains("start_goal")) {
            const auto& g = j.at("start_goal");
            if (g.contains("min_separation")) s.start_goal.min_separation = g.at("min_separation").get<double>();
            if (g.contains("require_no_los")) s.start_goal.require_no_los = g.at("require_no_los").get<bool>();
            if (g.contains("clearance")) s.start_goal.clearance = g.at("clearance").get<double>();
            if (g.contains("max_attempts")) s.start_goal.max_attempts = g.at("max_attempts").get<int>();
        }
        if (j.contains("field")) {
            const auto& f = j.at("field");
            if (f.contains("cell_size")) s.field.cell_size = f.at("cell_size").get<double>();
            if (f.contains("dilation_cells")) s.field.dilation_cells = f.at("dilation_cells").get<int>();
        }
        if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("benchmark spec: ") + e.what());
    }
    return s;
}

// ---- aggregation ----

std::vector<CellStats> common_success_stats(const std::vector<RunRecord>& records) {
    using GroupKey = std::tuple<int, int, double>;
    std::vector<std::string> planners;
    std::vector<GroupKey> groups;
    std::map<GroupKey, std::map<std::string, std::vector<const RunRecord*>>> by_group;
    for (const auto& r : records) {
        if (std::find(planners.begin(), planners.end(), r.planner) == planners.end()) planners.push_back(r.planner);
        const GroupKey key{static_cast<int>(r.world), r.density, r.sigma};
        if (!by_group.contains(key)) groups.push_back(key);
        by_group[key][r.planner].push_back(&r);
    }

    std::vector<CellStats> cells;
    for (const auto& planner : planners) {
        for (const auto& key : groups) {
            const auto& members = by_group.at(key);
            const auto it = members.find(planner);
            if (it == members.end()) continue;

            // Common subset: run indices every planner of the group completed successfully.
            std::map<int, int> ok;
            for (const auto& [name, recs] : members) {
                for (const RunRecord* r : recs) {
                    if (r->status == RolloutStatus::success) ++ok[r->run];
                }
            }
            const int n_planners = static_cast<int>(members.size());

            CellStats c;
            c.planner = planner;
            c.world = static_cast<WorldKind>(std::get<0>(key));
            c.density = std::get<1>(key);
            c.sigma = std::get<2>(key);
            double len = 0.0, tta = 0.0, qt = 0.0;
            for (const RunRecord* r : it->second) {
                ++c.n;
                if (r->status == RolloutStatus::success) ++c.successes;
                const auto o = ok.find(r->run);
                if (o != ok.end() && o->second == n_planners) {
                    ++c.n_common;
                    len += r->length;
                    tta += r->tta_ms;
                    qt += r->qt_ms;
                }
            }
            c.success_rate = c.n > 0 ? static_cast<double>(c.successes) / c.n : 0.0;
            if (c.n_common > 0) {
                c.len_m = len / c.n_common;
                c.tta_ms = tta / c.n_common;
                c.qt_ms = qt / c.n_common;
            }
            cells.push_back(c);
        }
    }
    return cells;
}

// ---- sweeps ----

namespace {

struct LoadedPlanner {
    PlannerSpec spec;
    std::shared_ptr<const Network> net;
};

std::vector<LoadedPlanner> load_planners(const BenchmarkSpec& spec) {
    std::vector<LoadedPlanner> out;
    for (const auto& p : spec.planners) {
        LoadedPlanner lp{p, nullptr};
        if (p.kind == PlannerKind::ffn || p.kind == PlannerKind::rnn) {
            auto net = std::make_shared<Network>(load_checkpoint(p.checkpoint));
            if (net->params.has_lstm != (p.kind == PlannerKind::rnn)) {
                throw ConfigError(p.checkpoint + (net->params.has_lstm ? " is recurrent; use planner rnn"
                                                                       : " is feed-forward; use planner ffn"));
            }
            if (net->config.n_rays != spec.rollout.n_rays) {
                throw ConfigError(p.checkpoint + " expects " + std::to_string(net->config.n_rays) + " rays, rollout casts " +
                                  std::to_string(spec.rollout.n_rays));
            }
            lp.net = std::move(net);
        }
        out.push_back(std::move(lp));
    }
    return out;
}

struct Case {
    WorldKind kind;
    int density;
    int run;
};

std::uint64_t case_index(const Case& c) {
    return static_cast<std::uint64_t>(c.density) * 1000003ull + static_cast<std::uint64_t>(c.run);
}

std::string stream(const char* base, WorldKind k) { return std::string(base) + "." + to_string(k); }

}  // namespace

BenchmarkReport run_success_sweep(const BenchmarkSpec& spec, const BenchProgress& progress) {
    spec.validate();
    const auto planners = load_planners(spec);
    const bool need_field = std::any_of(planners.begin(), planners.end(),
                                        [](const LoadedPlanner& p) { return p.spec.kind == PlannerKind::expert; });

    std::vector<Case> cases;
    for (const auto& w : spec.worlds) {
        for (int d : w.densities) {
            for (int r = 0; r < spec.runs; ++r) cases.push_back({w.kind, d, r});
        }
    }

    const std::size_t per_case = spec.sigmas.size() * planners.size();
    std::vector<RunRecord> records(cases.size() * per_case);
    std::mutex progress_mu;

    parallel_for(cases.size(), spec.threads, [&](std::size_t ci) {
        const Case& c = cases[ci];
        const std::uint64_t idx = case_index(c);
        const std::uint64_t world_seed = derive_seed(spec.seed, stream("bench.world", c.kind), idx);
        const World world = gen_world(c.kind, world_seed, c.density);

        // Same start/goal for every planner and noise level of this run index.
        StartGoalOptions sg = spec.start_goal;
        bool no_los = sg.require_no_los && c.density > 0;
        sg.require_no_los = no_los;
        std::pair<Vec3, Vec3> pair;
        try {
            Rng rng(derive_seed(spec.seed, stream("bench.start_goal", c.kind), idx));
            pair = sample_start_goal(world, rng, sg);
        } catch (const SamplingExhausted&) {
            if (!no_los) throw;
            no_los = false;
            sg.require_no_los = false;
            Rng rng(derive_seed(spec.seed, stream("bench.start_goal", c.kind), idx));
            pair = sample_start_goal(world, rng, sg);
        }
        const auto [start, goal] = pair;

        std::shared_ptr<const GeodesicField> field;
        if (need_field) field = std::make_shared<const GeodesicField>(compute_field(world, goal, spec.field));

        for (std::size_t si = 0; si < spec.sigmas.size(); ++si) {
            for (std::size_t pi = 0; pi < planners.size(); ++pi) {
                const auto& lp = planners[pi];
                std::unique_ptr<Planner> planner;
                switch (lp.spec.kind) {
                    case PlannerKind::baseline: planner = std::make_unique<BaselinePlanner>(spec.rollout.goal); break;
                    case PlannerKind::expert: planner = std::make_unique<ExpertPlanner>(field, spec.rollout.goal); break;
                    case PlannerKind::ffn:
                    case PlannerKind::rnn: planner = std::make_unique<LearnedPlanner>(lp.net, spec.rollout.goal); break;
                }
                Rng noise(derive_seed(spec.seed, stream("bench.noise", c.kind), idx));
                const TrajectoryResult res = rollout(world, *planner, start, goal, spec.rollout, spec.sigmas[si], noise);

                RunRecord& r = records[ci * per_case + si * planners.size() + pi];
                r.planner = lp.spec.label();
                r.world = c.kind;
                r.density = c.density;
                r.sigma = spec.sigmas[si];
                r.run = c.run;
                r.world_seed = world_seed;
                r.start = start;
                r.goal = goal;
                r.no_los = no_los;
                r.status = res.status;
                r.length = res.length;
                r.steps = res.steps;
                r.min_ray = res.min_ray;
                r.tta_ms = res.tta_ms;
                r.qt_ms = res.mean_qt_ms;
                if (progress) {
                    std::lock_guard lock(progress_mu);
                    progress(r);
                }
            }
        }
    });

    BenchmarkReport report;
    report.spec = to_json(spec);
    report.spec["tool"] = kToolVersion;
    report.records = std::move(records);
    report.cells = common_success_stats(report.records);
    return report;
}

BenchmarkReport run_noise_sweep(const BenchmarkSpec& spec, const BenchProgress& progress) {
    if (spec.sigmas.empty()) throw ConfigError("noise sweep needs at least one sigma");
    return run_success_sweep(spec, progress);
}

// ---- report IO ----

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j) {
    if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt("%.6g", *v) : "NA"; }

}  // namespace

json to_json(const BenchmarkReport& r) {
    json records = json::array();
    for (const auto& x : r.records) {
        records.push_back({{"planner", x.planner},
                           {"world", to_string(x.world)},
                           {"density", x.density},
                           {"sigma", x.sigma},
                           {"run", x.run},
                           {"world_seed", x.world_seed},
                           {"start", vec_json(x.start)},
                           {"goal", vec_json(x.goal)},
                           {"no_los", x.no_los},
                           {"status", to_string(x.status)},
                           {"length", x.length},
                           {"steps", x.steps},
                           {"min_ray", x.min_ray},
                           {"tta_ms", x.tta_ms},
                           {"qt_ms", x.qt_ms}});
    }
    json cells = json::array();
    for (const auto& c : r.cells) {
        cells.push_back({{"planner", c.planner},
                         {"world", to_string(c.world)},
                         {"density", c.density},
                         {"sigma", c.sigma},
                         {"n", c.n},
                         {"successes", c.successes},
                         {"success_rate", c.success_rate},
                         {"n_common", c.n_common},
                         {"len_m", opt_json(c.len_m)},
                         {"tta_ms", opt_json(c.tta_ms)},
                         {"qt_ms", opt_json(c.qt_ms)}});
    }
    return {{"format", "rnav-bench"}, {"version", 1}, {"spec", r.spec}, {"cells", cells}, {"records", records}};
}

BenchmarkReport benchmark_report_from_json(const json& j) {
    try {
        if (j.value("format", "") != "rnav-bench") throw ParseError("not a benchmark report");
        if (j.at("version").get<int>() != 1) {
            throw VersionError("unsupported report version " + j.at("version").dump());
        }
        BenchmarkReport r;
        r.spec = j.at("spec");
        for (const auto& x : j.at("records")) {
            RunRecord rec;
            rec.planner = x.at("planner").get<std::string>();
            rec.world = world_kind_from_string(x.at("world").get<std::string>());
            rec.density = x.at("density").get<int>();
            rec.sigma = x.at("sigma").get<double>();
            rec.run = x.at("run").get<int>();
            rec.world_seed = x.at("world_seed").get<std::uint64_t>();
            rec.start = vec_from(x.at("start"));
            rec.goal = vec_from(x.at("goal"));
            rec.no_los = x.at("no_los").get<bool>();
            rec.status = rollout_status_from_string(x.at("status").get<std::string>());
            rec.length = x.at("length").get<double>();
            rec.steps = x.at("steps").get<int>();
            rec.min_ray = x.at("min_ray").get<double>();
            rec.tta_ms = x.at("tta_ms").get<double>();
            rec.qt_ms = x.at("qt_ms").get<double>();
            r.records.push_back(rec);
        }
        for (const auto& x : j.at("cells")) {
            CellStats c;
            c.planner = x.at("planner").get<std::string>();
            c.world = world_kind_from_string(x.at("world").get<std::string>());
            c.density = x.at("density").get<int>();
            c.sigma = x.at("sigma").get<double>();
            c.n = x.at("n").get<int>();
            c.successes = x.at("successes").get<int>();
            c.success_rate = x.at("success_rate").get<double>();
            c.n_common = x.at("n_common").get<int>();
            c.len_m = opt_from(x.at("len_m"));
            c.tta_ms = opt_from(x.at("tta_ms"));
            c.qt_ms = opt_from(x.at("qt_ms"));
            r.cells.push_back(c);
        }
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("benchmark report: ") + e.what());
    }
}

std::string report_csv(const BenchmarkReport& r) {
    std::string out = "planner,world,density,sigma_n,success_rate,len_m,tta_ms,qt_ms,n,n_common\n";
    for (const auto& c : r.cells) {
        out += c.planner + "," + to_string(c.world) + "," + std::to_string(c.density) + "," + fmt("%g", c.sigma) +
               "," + fmt("%.6f", c.success_rate) + "," + fmt_opt(c.len_m) + "," + fmt_opt(c.tta_ms) + "," +
               fmt_opt(c.qt_ms) + "," + std::to_string(c.n) + "," + std::to_string(c.n_common) + "\n";
    }
    return out;
}

std::string report_dat(const BenchmarkReport& r) {
    std::string out;
    std::string block;
    for (const auto& c : r.cells) {
        const std::string key = c.planner + " " + to_string(c.world) + " sigma=" + fmt("%g", c.sigma);
        if (key != block) {
            if (!block.empty()) out += "\n\n";
            out += "# " + key + "\n# density success_rate len_m tta_ms qt_ms\n";
            block = key;
        }
        auto num = [](const std::optional<double>& v) { return v ? fmt("%.6g", *v) : std::string("NaN"); };
        out += std::to_string(c.density) + " " + fmt("%.6f", c.success_rate) + " " + num(c.len_m) + " " +
               num(c.tta_ms) + " " + num(c.qt_ms) + "\n";
    }
    return out;
}

void emit_report(const BenchmarkReport& r, const std::filesystem::path& path, ReportFormat format) {
    switch (format) {
        case ReportFormat::csv: write_file(path, report_csv(r)); break;
        case ReportFormat::json: write_file(path, to_json(r).dump(1) + "\n"); break;
        case ReportFormat::dat: write_file(path, report_dat(r)); break;
    }
}

BenchmarkReport read_report(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return benchmark_report_from_json(j);
}

}  // namespace rnav
