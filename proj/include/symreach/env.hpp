#pragma once

#include <optional>
#include <stdexcept>
#include <string_view>

#include <Eigen/Core>

#include "symreach/random.hpp"
#include "symreach/robot.hpp"

namespace symreach::env {

using robot::JointVector;
using robot::Point;

enum class TaskKind { P2P, P2PO };

std::string_view to_string(TaskKind kind);
TaskKind parse_task(std::string_view text);

enum class Boundary { Box, Disc };

/// Cylindrical workspace around the base, split into equal angular sectors.
struct Workspace {
    int partitions = 4;
    double rho_min = 0.3;
    double rho_max = 0.7;
    double z_min = 0.25;
    double z_max = 0.65;
    Boundary boundary = Boundary::Box;
    // Half-width of the square (Box) or radius (Disc) of the safety boundary.
    double extent = 0.9;

    /// Safety-boundary radius at an angle measured from the start of a sector.
    double boundary_radius(double sector_angle) const;
    void validate() const;
};

struct RewardParams {
    double alpha_distance = 2e-3;
    double alpha_effort = 1e-3;
    double reach_bonus = 10.0;
    double collision_penalty = 2.0;
    double epsilon = 0.05;

    void validate() const;
};

struct EnvParams {
    robot::RobotModel robot;
    Workspace workspace;
    RewardParams reward;
    double obstacle_half_size = 0.02;
    double collision_margin = 0.01;
    int max_steps = 400;

    void validate() const;
};

struct PolarPoint {
    double theta = 0.0;
    double rho = 0.0;
    double z = 0.0;
};

PolarPoint to_polar(const Point& p);
Point to_cartesian(const PolarPoint& p);

/// Flat state layout: q, sin q, cos q, qdot, goal, err [, obstacle].
struct Observation {
    JointVector q = JointVector::Zero();
    JointVector sin_q = JointVector::Zero();
    JointVector cos_q = JointVector::Zero();
    JointVector qdot = JointVector::Zero();
    Point goal = Point::Zero();
    Point err = Point::Zero();
    std::optional<Point> obstacle;

    int dim() const { return obstacle ? 25 : 22; }
    Eigen::VectorXd flatten() const;
    static Observation unflatten(const Eigen::VectorXd& flat);
};

constexpr int observation_dim(TaskKind kind) { return kind == TaskKind::P2PO ? 25 : 22; }

class OutOfWorkspace : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SamplingFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Angular sector of a point without any boundary check.
int sector_of(const Workspace& ws, const Point& p);

/// Sector index using [0, 2pi) labels; a point on a sector edge belongs to the higher sector.
/// Throws OutOfWorkspace outside the safety boundary or at z <= 0.
int partition_of(const Workspace& ws, const Point& p);

/// Closed-sector membership with an angular tolerance (rad), used for the
/// local-environment check during demonstration recording.
bool in_partition(const Workspace& ws, const Point& p, int partition, double tolerance = 1e-9);

/// Rotates a point about world z by quarter_turns * pi/2 using exact quarter-turn matrices.
Point rotate_quarter(const Point& p, int quarter_turns);

Observation phi_state(const Observation& obs, int quarter_turns);
Eigen::VectorXd phi_state(const Eigen::VectorXd& flat_obs, int quarter_turns);

inline JointVector psi_action(const JointVector& a) { return a; }

double reward(const RewardParams& params, const Point& err, const JointVector& tau_hat, bool collided);

/// Minimum distance from segment [a, b] to the axis-aligned cube.
double segment_box_distance(const Point& a, const Point& b, const Point& center, double half_size);

/// True when any link comes within `margin` of the cube, or any joint point dips below z = 0.
bool collision_check(const robot::ArmPose& pose, const std::optional<Point>& obstacle, double half_size,
                     double margin);

enum class Cause { Running, Reached, Timeout, Collision, LeftPartition };

std::string_view to_string(Cause cause);

struct EpisodeConfig {
    JointVector q0 = JointVector::Zero();
    Point goal = Point::Zero();
    std::optional<Point> obstacle;
    std::optional<int> partition;
};

/// Everything the simulator needs to advance; recoverable from an Observation.
struct SimState {
    robot::JointState joints;
    Point goal = Point::Zero();
    std::optional<Point> obstacle;
};

SimState sim_state_from(const Observation& obs);
Observation observe(const EnvParams& params, const SimState& state);

struct StepOutcome {
    Observation obs_next;
    double reward = 0.0;
    bool zeta = false;
    Cause cause = Cause::Running;
    JointVector tau_hat = JointVector::Zero();
    double err_norm = 0.0;
};

struct StepContext {
    int steps_taken = 0;                  // steps already executed in the episode
    std::optional<int> local_partition;   // enforced only while recording demos
};

/// Pure transition: advances `state` in place and reports the outcome.
StepOutcome env_step(const EnvParams& params, SimState& state, const JointVector& action, const StepContext& ctx);

/// Stateful episode wrapper around env_step.
class ReachEnv {
public:
    ReachEnv(EnvParams params, TaskKind task);

    Observation reset(const EpisodeConfig& config, bool enforce_partition = false);
    StepOutcome step(const JointVector& action);

    const EnvParams& params() const { return params_; }
    TaskKind task() const { return task_; }
    const SimState& state() const { return state_; }
    const EpisodeConfig& config() const { return config_; }
    int steps_taken() const { return steps_; }
    bool done() const { return done_; }

private:
    EnvParams params_;
    TaskKind task_;
    EpisodeConfig config_;
    SimState state_;
    int steps_ = 0;
    bool enforce_partition_ = false;
    bool done_ = true;
};

enum class Stage { DemoP2P, DemoP2PO, Train, TestP2P, TestP2PO };

/// Draws an episode for the given stage; demo stages pick the sector uniformly.
EpisodeConfig sample_episode(const EnvParams& params, Stage stage, TaskKind task, Rng& rng);

/// Demo episode for sector index k (k = 0..3 in the start-angle convention
/// theta0 = k*pi/2 - pi/4 for P2P, k*pi/2 for P2P-O).
EpisodeConfig sample_demo_episode(const EnvParams& params, TaskKind task, int k, Rng& rng);

/// Elbow-up joint seed used for all IK solves that start from scratch.
JointVector nominal_seed(double yaw);

}  // namespace symreach::env
