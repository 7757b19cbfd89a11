#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "rnav/common.hpp"
#include "rnav/raycast.hpp"
#include "rnav/rng.hpp"
#include "rnav/world.hpp"

namespace rnav {

struct RobotState {
    Vec3 x = Vec3::Zero();
    Vec3 xdot = Vec3::Zero();
};

/// Acceleration f paired with a symmetric positive semi-definite metric A.
struct Policy {
    Vec3 f = Vec3::Zero();
    Mat3 A = Mat3::Zero();
};

/// Running sums of A and A f; resolve() applies the pseudoinverse once.
class PolicyAccumulator {
public:
    void add(const Policy& p) {
        A_ += p.A;
        Af_ += p.A * p.f;
    }
    void add(const PolicyAccumulator& o) {
        A_ += o.A_;
        Af_ += o.Af_;
    }
    Policy resolve() const;

private:
    Mat3 A_ = Mat3::Zero();
    Vec3 Af_ = Vec3::Zero();
};

inline constexpr double kPinvTolerance = 1e-8;

/// Moore-Penrose pseudoinverse of a symmetric matrix via eigen-decomposition;
/// eigenvalues below tolerance * max |eigenvalue| are truncated.
Mat3 symmetric_pinv(const Mat3& A, double tolerance = kPinvTolerance);

/// f_c = (sum A_i)^+ sum A_i f_i, A_c = sum A_i.
Policy sum_policies(std::span<const Policy> policies);

/// v / eta(|v|) with eta(z) = z + c log(1 + exp(-2z/c)).
Vec3 soft_norm(const Vec3& v, double c);

/// nu_rep and metric_softness are tuned for ~1000-ray bundles, where hundreds
/// of rays contribute a metric at once.
struct ObstacleParams {
    double eta_rep = 8.0;
    double nu_rep = 0.1;
    double eta_damp = 2.0;
    double metric_softness = 0.5;
    double max_range = 5.0;
};

/// Repulsor for one ray. `direction` points from the robot toward the obstacle.
///   f_rep  = eta_rep exp(-d / nu_rep) (-r)
///   f_damp = eta_damp max(0, xdot.r)^2 / d (-r)
///   A      = (1 - d/L)^2 s(f) s(f)^T
/// Returns the zero policy for d >= L; throws CollisionError for d <= 0.
Policy obstacle_policy(const RobotState& state, const Vec3& direction, double distance, const ObstacleParams& p);

/// One policy per ray shorter than the bundle's max range.
std::vector<Policy> obstacle_policies_from_bundle(const RobotState& state, const RayBundle& bundle,
                                                  const ObstacleParams& p);

struct GoalParams {
    double alpha = 1.0;
    double beta = 2.0;
    double softness = 0.1;
};

/// f = alpha s(x_g - x) - beta xdot, A = I.
Policy goal_policy(const RobotState& state, const Vec3& goal, const GoalParams& p);

/// Same form as goal_policy with x_g - x replaced by `attractor` (already scaled).
Policy directed_goal_policy(const RobotState& state, const Vec3& attractor, const GoalParams& p);

/// x_g - x replaced by |x_g - x| * y_hat, where y_hat is a network-decoded direction (|y_hat| <= 1).
Policy learned_goal_policy(const RobotState& state, const Vec3& goal, const Vec3& y_hat, const GoalParams& p);

/// What a planner contributes each step: the goal-flavored policy plus diagnostics.
struct GoalDecision {
    Policy policy;
    Vec3 direction = Vec3::Zero();
    double lstm_influence = 0.0;
};

/// Baseline, expert and learned planners differ only in the goal policy they emit.
class Planner {
public:
    virtual ~Planner() = default;
    virtual std::string name() const = 0;
    /// Called at rollout start (recurrent planners clear their state here).
    virtual void reset() {}
    /// False if the planner cannot operate from this start (rollout reports stuck).
    virtual bool can_start(const Vec3& /*start*/) const { return true; }
    virtual GoalDecision decide(const RobotState& state, const Vec3& goal, const RayBundle& observed) = 0;
};

class BaselinePlanner final : public Planner {
public:
    explicit BaselinePlanner(GoalParams p = {}) : params_(p) {}
    std::string name() const override { return "baseline"; }
    GoalDecision decide(const RobotState& state, const Vec3& goal, const RayBundle& observed) override;

private:
    GoalParams params_;
};

struct RolloutParams {
    double dt = 0.05;
    int max_steps = 2000;
    double goal_radius = 0.25;
    double v_max = 1.5;
    int stuck_window = 100;
    double stuck_speed = 0.02;
    double collision_margin = 0.05;
    /// Subtracted from every ray to model a spherical robot.
    double robot_radius = 0.0;
    int n_rays = 1024;
    ObstacleParams obstacle;
    GoalParams goal;

    void validate() const;
};

nlohmann::json to_json(const RolloutParams& p);
RolloutParams rollout_params_from_json(const nlohmann::json& j, RolloutParams base = {});

enum class RolloutStatus { success, stuck, collision, timeout };

const char* to_string(RolloutStatus s);
RolloutStatus rollout_status_from_string(const std::string& s);

struct StepRecord {
    double t = 0.0;
    Vec3 x = Vec3::Zero();
    Vec3 v = Vec3::Zero();
    Vec3 f = Vec3::Zero();
    double lstm_influence = 0.0;
    double min_ray = 0.0;
    Vec3 goal_direction = Vec3::Zero();
};

struct TrajectoryResult {
    RolloutStatus status = RolloutStatus::timeout;
    std::vector<Vec3> path;
    double length = 0.0;
    int steps = 0;
    std::vector<StepRecord> records;
    double min_ray = 0.0;
    double tta_ms = 0.0;
    double mean_qt_ms = 0.0;
};

/// Optional hook invoked on every step before integration (DAgger uses it to
/// label visited states). Receives the state and the observed (noisy) bundle.
using StepObserver = std::function<void(const RobotState&, const RayBundle&, int step)>;

/// Integrates the summed policy from rest with semi-implicit Euler.
/// Collision and stuck checks use the true (noise-free) rays; the planner and
/// obstacle policies see the noisy ones.
TrajectoryResult rollout(const World& world, Planner& planner, const Vec3& start, const Vec3& goal,
                         const RolloutParams& params, double sigma, Rng& noise_rng,
                         const StepObserver& observer = nullptr);

/// JSON Lines: an optional header record, one record per step, then a summary.
void write_trajectory_jsonl(const TrajectoryResult& result, const std::filesystem::path& path,
                            const nlohmann::json& header = nullptr);

}  // namespace rnav
