#include "rnav/rmp.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "rnav/world_io.hpp"

namespace rnav {

using nlohmann::json;

Mat3 symmetric_pinv(const Mat3& A, double tolerance) {
    const Eigen::SelfAdjointEigenSolver<Mat3> es(A);
    const Vec3 ev = es.eigenvalues();
    const double max_abs = ev.cwiseAbs().maxCoeff();
    if (max_abs == 0.0) return Mat3::Zero();
    Vec3 inv = Vec3::Zero();
    for (int i = 0; i < 3; ++i) {
        if (std::abs(ev[i]) > tolerance * max_abs) inv[i] = 1.0 / ev[i];
    }
    const Mat3& V = es.eigenvectors();
    return V * inv.asDiagonal() * V.transpose();
}

Policy PolicyAccumulator::resolve() const {
    Policy p;
    p.A = A_;
    p.f = symmetric_pinv(A_) * Af_;
    return p;
}

Policy sum_policies(std::span<const Policy> policies) {
    PolicyAccumulator acc;
    for (const auto& p : policies) acc.add(p);
    return acc.resolve();
}

Vec3 soft_norm(const Vec3& v, double c) {
    const double z = v.norm();
    if (z == 0.0) return Vec3::Zero();
    const double eta = z + c * std::log1p(std::exp(-2.0 * z / c));
    return v / eta;
}

Policy obstacle_policy(const RobotState& state, const Vec3& direction, double distance, const ObstacleParams& p) {
    if (!(distance > 0.0)) throw CollisionError("obstacle at non-positive distance");
    Policy out;
    if (distance >= p.max_range) return out;
    const double toward = std::max(0.0, state.xdot.dot(direction));
    const double rep = p.eta_rep * std::exp(-distance / p.nu_rep);
    const double damp = p.eta_damp * toward * toward / distance;
    out.f = -(rep + damp) * direction;
    const double w = std::pow(1.0 - distance / p.max_range, 2);
    const Vec3 s = soft_norm(out.f, p.metric_softness);
    out.A = w * s * s.transpose();
    return out;
}

std::vector<Policy> obstacle_policies_from_bundle(const RobotState& state, const RayBundle& bundle,
                                                  const ObstacleParams& p) {
    std::vector<Policy> out;
    for (std::size_t i = 0; i < bundle.distances.size(); ++i) {
        if (bundle.distances[i] < bundle.max_range) {
            out.push_back(obstacle_policy(state, bundle.set->directions[i], bundle.distances[i], p));
        }
    }
    return out;
}

Policy directed_goal_policy(const RobotState& state, const Vec3& attractor, const GoalParams& p) {
    Policy out;
    out.f = p.alpha * soft_norm(attractor, p.softness) - p.beta * state.xdot;
    out.A = Mat3::Identity();
    return out;
}

Policy goal_policy(const RobotState& state, const Vec3& goal, const GoalParams& p) {
    return directed_goal_policy(state, goal - state.x, p);
}

Policy learned_goal_policy(const RobotState& state, const Vec3& goal, const Vec3& y_hat, const GoalParams& p) {
    return directed_goal_policy(state, (goal - state.x).norm() * y_hat, p);
}

GoalDecision BaselinePlanner::decide(const RobotState& state, const Vec3& goal, const RayBundle&) {
    GoalDecision d;
    d.policy = goal_policy(state, goal, params_);
    const Vec3 delta = goal - state.x;
    const double n = delta.norm();
    d.direction = n > 0.0 ? Vec3(delta / n) : Vec3::Zero();
    return d;
}

void RolloutParams::validate() const {
    if (!(dt > 0.0 && max_steps > 0 && goal_radius > 0.0 && v_max > 0.0 && stuck_window > 0 && stuck_speed > 0.0 &&
          collision_margin > 0.0 && n_rays > 0 && obstacle.max_range > 0.0)) {
        throw ConfigError("rollout parameters must all be positive");
    }
    if (stuck_window >= max_steps) throw ConfigError("stuck_window must be smaller than max_steps");
    if (robot_radius < 0.0) throw ConfigError("robot_radius must be non-negative");
}

json to_json(const RolloutParams& p) {
    return {{"dt", p.dt},
            {"max_steps", p.max_steps},
            {"goal_radius", p.goal_radius},
            {"v_max", p.v_max},
            {"stuck_window", p.stuck_window},
            {"stuck_speed", p.stuck_speed},
            {"collision_margin", p.collision_margin},
            {"robot_radius", p.robot_radius},
            {"n_rays", p.n_rays},
            {"obstacle",
             {{"eta_rep", p.obstacle.eta_rep},
              {"nu_rep", p.obstacle.nu_rep},
              {"eta_damp", p.obstacle.eta_damp},
              {"metric_softness", p.obstacle.metric_softness},
              {"max_range", p.obstacle.max_range}}},
            {"goal", {{"alpha", p.goal.alpha}, {"beta", p.goal.beta}, {"softness", p.goal.softness}}}};
}

RolloutParams rollout_params_from_json(const json& j, RolloutParams p) {
    auto get = [](const json& o, const char* key, auto& field) {
        if (o.contains(key)) field = o.at(key).get<std::decay_t<decltype(field)>>();
    };
    get(j, "dt", p.dt);
    get(j, "max_steps", p.max_steps);
    get(j, "goal_radius", p.goal_radius);
    get(j, "v_max", p.v_max);
    get(j, "stuck_window", p.stuck_window);
    get(j, "stuck_speed", p.stuck_speed);
    get(j, "collision_margin", p.collision_margin);
    get(j, "robot_radius", p.robot_radius);
    get(j, "n_rays", p.n_rays);
    if (j.contains("obstacle")) {
        const auto& o = j.at("obstacle");
        get(o, "eta_rep", p.obstacle.eta_rep);
        get(o, "nu_rep", p.obstacle.nu_rep);
        get(o, "eta_damp", p.obstacle.eta_damp);
        get(o, "metric_softness", p.obstacle.metric_softness);
        get(o, "max_range", p.obstacle.max_range);
    }
    if (j.contains("goal")) {
        const auto& g = j.at("goal");
        get(g, "alpha", p.goal.alpha);
        get(g, "beta", p.goal.beta);
        get(g, "softness", p.goal.softness);
    }
    return p;
}

const char* to_string(RolloutStatus s) {
    switch (s) {
        case RolloutStatus::success: return "success";
        case RolloutStatus::stuck: return "stuck";
        case RolloutStatus::collision: return "collision";
        case RolloutStatus::timeout: return "timeout";
    }
    return "?";
}

RolloutStatus rollout_status_from_string(const std::string& s) {
    if (s == "success") return RolloutStatus::success;
    if (s == "stuck") return RolloutStatus::stuck;
    if (s == "collision") return RolloutStatus::collision;
    if (s == "timeout") return RolloutStatus::timeout;
    throw ParseError("unknown rollout status '" + s + "'");
}

TrajectoryResult rollout(const World& world, Planner& planner, const Vec3& start, const Vec3& goal,
                         const RolloutParams& params, double sigma, Rng& noise_rng, const StepObserver& observer) {
    using clock = std::chrono::steady_clock;
    params.validate();
    const auto t0 = clock::now();
    const auto set = shared_directions(static_cast<std::size_t>(params.n_rays));
    const double L = params.obstacle.max_range;

    TrajectoryResult res;
    RobotState state{start, Vec3::Zero()};
    res.path.push_back(state.x);
    res.min_ray = L;
    planner.reset();

    auto finish = [&](RolloutStatus s) {
        res.status = s;
        res.tta_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        return res;
    };

    if (!planner.can_start(start)) return finish(RolloutStatus::stuck);

    double qt_total = 0.0;
    for (int k = 0;; ++k) {
        if ((state.x - goal).norm() <= params.goal_radius) return finish(RolloutStatus::success);
        if (k >= params.max_steps) return finish(RolloutStatus::timeout);

        const auto q0 = clock::now();
        RayBundle truth = cast_bundle(world, state.x, set, L, k);
        if (params.robot_radius > 0.0) {
            for (double& d : truth.distances) d = std::max(0.0, d - params.robot_radius);
        }
        const double min_ray = truth.min_distance();
        res.min_ray = std::min(res.min_ray, min_ray);
        if (min_ray < params.collision_margin) {
            res.records.push_back({k * params.dt, state.x, state.xdot, Vec3::Zero(), 0.0, min_ray, Vec3::Zero()});
            return finish(RolloutStatus::collision);
        }
        const RayBundle observed = apply_noise(truth, sigma, noise_rng);
        if (observer) observer(state, observed, k);

        PolicyAccumulator acc;
        for (std::size_t i = 0; i < observed.distances.size(); ++i) {
            if (observed.distances[i] < L) acc.add(obstacle_policy(state, set->directions[i], observed.distances[i], params.obstacle));
        }
        const GoalDecision decision = planner.decide(state, goal, observed);
        acc.add(decision.policy);
        const Policy combined = acc.resolve();
        qt_total += std::chrono::duration<double, std::milli>(clock::now() - q0).count();

        res.records.push_back({k * params.dt, state.x, state.xdot, combined.f, decision.lstm_influence, min_ray,
                               decision.direction});

        state.xdot += combined.f * params.dt;
        const double speed = state.xdot.norm();
        if (speed > params.v_max) state.xdot *= params.v_max / speed;
        state.x += state.xdot * params.dt;
        res.length += (state.x - res.path.back()).norm();
        res.path.push_back(state.x);
        res.steps = k + 1;
        res.mean_qt_ms = qt_total / res.steps;

        // stuck: mean velocity over the window (net displacement / time) below threshold
        if (res.steps >= params.stuck_window) {
            const Vec3& past = res.path[res.path.size() - 1 - static_cast<std::size_t>(params.stuck_window)];
            const double mean_speed = (state.x - past).norm() / (params.stuck_window * params.dt);
            if (mean_speed < params.stuck_speed && (state.x - goal).norm() > params.goal_radius) {
                return finish(RolloutStatus::stuck);
            }
        }
    }
}

void write_trajectory_jsonl(const TrajectoryResult& result, const std::filesystem::path& path, const json& header) {
    std::string out;
    auto v3 = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
    if (!header.is_null()) out += json{{"type", "header"}, {"config", header}}.dump() + "\n";
    for (const auto& r : result.records) {
        out += json{{"t", r.t},
                    {"x", v3(r.x)},
                    {"v", v3(r.v)},
                    {"f", v3(r.f)},
                    {"lstm_influence", r.lstm_influence},
                    {"min_ray", r.min_ray},
                    {"goal_dir", v3(r.goal_direction)}}
                   .dump() +
               "\n";
    }
    out += json{{"type", "summary"},
                {"status", to_string(result.status)},
                {"length", result.length},
                {"steps", result.steps},
                {"min_ray", result.min_ray},
                {"final", v3(result.path.back())},
                {"tta_ms", result.tta_ms},
                {"qt_ms", result.mean_qt_ms}}
               .dump() +
           "\n";
    write_file(path, out);
}

}  // namespace rnav
