#include "symreach/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace symreach::env {

namespace {

constexpr double kPi = std::numbers::pi;

void require(bool ok, const std::string& field) {
    if (!ok) throw std::invalid_argument(field + " out of range");
}

double angle_in_turn(const Point& p) {
    double theta = std::atan2(p.y(), p.x());
    if (theta < 0.0) theta += 2.0 * kPi;
    return theta;
}

double point_box_distance(const Point& p, const Point& center, double half_size) {
    return ((p - center).cwiseAbs().array() - half_size).max(0.0).matrix().norm();
}

}  // namespace

std::string_view to_string(TaskKind kind) { return kind == TaskKind::P2P ? "p2p" : "p2p-o"; }

TaskKind parse_task(std::string_view text) {
    if (text == "p2p") return TaskKind::P2P;
    if (text == "p2p-o" || text == "p2po") return TaskKind::P2PO;
    throw std::invalid_argument("task must be p2p or p2p-o, got '" + std::string(text) + "'");
}

std::string_view to_string(Cause cause) {
    switch (cause) {
        case Cause::Running: return "running";
        case Cause::Reached: return "reached";
        case Cause::Timeout: return "timeout";
        case Cause::Collision: return "collision";
        case Cause::LeftPartition: return "left_partition";
    }
    return "unknown";
}

double Workspace::boundary_radius(double sector_angle) const {
    if (boundary == Boundary::Disc) return extent;
    return extent / std::max(std::cos(sector_angle), std::sin(sector_angle));
}

void Workspace::validate() const {
    require(partitions >= 2, "workspace.partitions");
    require(rho_min >= 0.0 && rho_min < rho_max, "workspace.rho_range");
    require(z_min < z_max, "workspace.z_range");
    require(extent > 0.0, "workspace.extent");
}

void RewardParams::validate() const {
    require(alpha_distance > 0.0, "reward.alpha_distance");
    require(alpha_effort > 0.0, "reward.alpha_effort");
    require(reach_bonus > 0.0, "reward.reach_bonus");
    require(collision_penalty > 0.0, "reward.collision_penalty");
    require(epsilon > 0.0, "reward.epsilon");
}

void EnvParams::validate() const {
    robot.validate();
    workspace.validate();
    reward.validate();
    require(obstacle_half_size > 0.0, "env.obstacle_half_size");
    require(collision_margin >= 0.0, "env.collision_margin");
    require(max_steps > 0, "env.max_steps");
}

PolarPoint to_polar(const Point& p) {
    return {std::atan2(p.y(), p.x()), std::hypot(p.x(), p.y()), p.z()};
}

Point to_cartesian(const PolarPoint& p) {
    return {p.rho * std::cos(p.theta), p.rho * std::sin(p.theta), p.z};
}

Eigen::VectorXd Observation::flatten() const {
    Eigen::VectorXd v(dim());
    v << q, sin_q, cos_q, qdot, goal, err;
    if (obstacle) v.tail<3>() = *obstacle;
    return v;
}

Observation Observation::unflatten(const Eigen::VectorXd& flat) {
    if (flat.size() != 22 && flat.size() != 25)
        throw std::invalid_argument("observation must have 22 or 25 entries, got " + std::to_string(flat.size()));
    Observation o;
    o.q = flat.segment<4>(0);
    o.sin_q = flat.segment<4>(4);
    o.cos_q = flat.segment<4>(8);
    o.qdot = flat.segment<4>(12);
    o.goal = flat.segment<3>(16);
    o.err = flat.segment<3>(19);
    if (flat.size() == 25) o.obstacle = Point(flat.segment<3>(22));
    return o;
}

int sector_of(const Workspace& ws, const Point& p) {
    const double width = 2.0 * kPi / ws.partitions;
    return std::min(static_cast<int>(std::floor(angle_in_turn(p) / width)), ws.partitions - 1);
}

int partition_of(const Workspace& ws, const Point& p) {
    const double width = 2.0 * kPi / ws.partitions;
    const double theta = angle_in_turn(p);
    const int k = sector_of(ws, p);
    const double rho = std::hypot(p.x(), p.y());
    if (!(p.z() > 0.0) || rho > ws.boundary_radius(theta - k * width))
        throw OutOfWorkspace("point outside the workspace boundary");
    return k;
}

bool in_partition(const Workspace& ws, const Point& p, int partition, double tolerance) {
    const double width = 2.0 * kPi / ws.partitions;
    const double center = (partition + 0.5) * width;
    return std::abs(robot::wrap_angle(angle_in_turn(p) - center)) <= 0.5 * width + tolerance;
}

Point rotate_quarter(const Point& p, int quarter_turns) {
    switch (((quarter_turns % 4) + 4) % 4) {
        case 1: return {-p.y(), p.x(), p.z()};
        case 2: return {-p.x(), -p.y(), p.z()};
        case 3: return {p.y(), -p.x(), p.z()};
        default: return p;
    }
}

Observation phi_state(const Observation& obs, int quarter_turns) {
    Observation out = obs;
    out.q[0] = robot::wrap_angle(obs.q[0] + quarter_turns * 0.5 * kPi);
    out.sin_q[0] = std::sin(out.q[0]);
    out.cos_q[0] = std::cos(out.q[0]);
    out.goal = rotate_quarter(obs.goal, quarter_turns);
    out.err = rotate_quarter(obs.err, quarter_turns);
    if (obs.obstacle) out.obstacle = rotate_quarter(*obs.obstacle, quarter_turns);
    return out;
}

Eigen::VectorXd phi_state(const Eigen::VectorXd& flat_obs, int quarter_turns) {
    return phi_state(Observation::unflatten(flat_obs), quarter_turns).flatten();
}

double reward(const RewardParams& params, const Point& err, const JointVector& tau_hat, bool collided) {
    const double dist = err.norm();
    double r = -params.alpha_distance * dist - params.alpha_effort * tau_hat.norm();
    if (dist < params.epsilon) r += params.reach_bonus;
    if (collided) r -= params.collision_penalty;
    return r;
}

double segment_box_distance(const Point& a, const Point& b, const Point& center, double half_size) {
    // Distance to a convex set is convex along the segment: golden-section search.
    const Point d = b - a;
    auto f = [&](double t) { return point_box_distance(a + t * d, center, half_size); };
    constexpr double inv_phi = 0.6180339887498949;
    double lo = 0.0;
    double hi = 1.0;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = f(x1);
    double f2 = f(x2);
    for (int i = 0; i < 90 && hi - lo > 1e-15; ++i) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    return std::min({f(0.0), f(1.0), f1, f2, f(0.5 * (lo + hi))});
}

bool collision_check(const robot::ArmPose& pose, const std::optional<Point>& obstacle, double half_size,
                     double margin) {
    for (const auto& p : pose.joint_points)
        if (p.z() < 0.0) return true;
    if (!obstacle) return false;
    for (int i = 0; i + 1 < static_cast<int>(pose.joint_points.size()); ++i)
        if (segment_box_distance(pose.joint_points[i], pose.joint_points[i + 1], *obstacle, half_size) < margin)
            return true;
    return false;
}

SimState sim_state_from(const Observation& obs) {
    SimState s;
    s.joints.q = obs.q;
    s.joints.qdot = obs.qdot;
    s.goal = obs.goal;
    s.obstacle = obs.obstacle;
    return s;
}

Observation observe(const EnvParams& params, const SimState& state) {
    Observation o;
    o.q = state.joints.q;
    o.sin_q = o.q.array().sin();
    o.cos_q = o.q.array().cos();
    o.qdot = state.joints.qdot;
    o.goal = state.goal;
    o.err = state.goal - robot::forward_kinematics(params.robot, o.q).end_effector();
    o.obstacle = state.obstacle;
    return o;
}

StepOutcome env_step(const EnvParams& params, SimState& state, const JointVector& action, const StepContext& ctx) {
    const robot::StepResult res = robot::step(params.robot, state.joints, action);
    state.joints = res.state;

    StepOutcome out;
    out.tau_hat = res.tau_hat;
    out.obs_next = observe(params, state);
    out.err_norm = out.obs_next.err.norm();

    const robot::ArmPose pose = robot::forward_kinematics(params.robot, state.joints.q);
    const bool collided = collision_check(pose, state.obstacle, params.obstacle_half_size, params.collision_margin);
    out.reward = reward(params.reward, out.obs_next.err, res.tau_hat, collided);

    if (collided)
        out.cause = Cause::Collision;
    else if (out.err_norm < params.reward.epsilon)
        out.cause = Cause::Reached;
    else if (ctx.steps_taken + 1 >= params.max_steps)
        out.cause = Cause::Timeout;
    else if (ctx.local_partition && !in_partition(params.workspace, pose.end_effector(), *ctx.local_partition))
        out.cause = Cause::LeftPartition;
    out.zeta = out.cause != Cause::Running;
    return out;
}

ReachEnv::ReachEnv(EnvParams params, TaskKind task) : params_(std::move(params)), task_(task) {}

Observation ReachEnv::reset(const EpisodeConfig& config, bool enforce_partition) {
    if ((task_ == TaskKind::P2PO) != config.obstacle.has_value())
        throw std::invalid_argument("episode obstacle does not match the task kind");
    if (enforce_partition && !config.partition)
        throw std::invalid_argument("partition enforcement needs an assigned partition");
    config_ = config;
    state_ = SimState{};
    state_.joints.q = config.q0;
    state_.goal = config.goal;
    state_.obstacle = config.obstacle;
    steps_ = 0;
    enforce_partition_ = enforce_partition;
    done_ = false;
    return observe(params_, state_);
}

StepOutcome ReachEnv::step(const JointVector& action) {
    if (done_) throw std::logic_error("step() called on a finished episode");
    StepContext ctx{steps_, enforce_partition_ ? config_.partition : std::nullopt};
    StepOutcome out = env_step(params_, state_, action, ctx);
    ++steps_;
    done_ = out.zeta;
    return out;
}

JointVector nominal_seed(double yaw) { return JointVector(yaw, 0.4, 1.1, 0.9); }

namespace {

constexpr int kMaxRetries = 20;

struct Draw {
    PolarPoint start;
    PolarPoint goal;
    std::optional<PolarPoint> obstacle;
    std::optional<int> partition;
    bool goal_must_be_reachable = false;
};

PolarPoint uniform_goal(const Workspace& ws, Rng& rng) {
    PolarPoint g;
    g.theta = uniform(rng, -kPi, kPi);
    g.rho = uniform(rng, ws.rho_min, ws.rho_max);
    g.z = uniform(rng, ws.z_min, ws.z_max);
    return g;
}

PolarPoint train_obstacle(const PolarPoint& goal, Rng& rng) {
    const double u = uniform(rng, 0.0, 1.0);
    const double v = uniform(rng, kPi / 12.0, kPi / 6.0);
    const double sign = u > 0.5 ? 1.0 : (u < 0.5 ? -1.0 : 0.0);
    PolarPoint o;
    o.theta = robot::wrap_angle(goal.theta + sign * v);
    o.rho = uniform(rng, 0.4, 0.6);
    o.z = uniform(rng, goal.z - 0.1, goal.z + 0.1);
    return o;
}

Draw draw_demo(TaskKind task, int k, Rng& rng) {
    Draw d;
    // Goal sectors [k*pi/2 - pi/2, k*pi/2) carry the [0, 2pi) label k-1.
    d.partition = (k + 3) % 4;
    d.goal_must_be_reachable = true;
    const double edge = k * kPi / 2.0;
    if (task == TaskKind::P2P) {
        d.start = {robot::wrap_angle(edge - kPi / 4.0), 0.52, 0.42};
        d.goal.theta = robot::wrap_angle(uniform(rng, edge - kPi / 2.0, edge));
    } else {
        d.start = {robot::wrap_angle(edge), 0.52, 0.42};
        d.goal.theta = robot::wrap_angle(uniform(rng, edge - kPi / 4.0, edge));
    }
    d.goal.rho = uniform(rng, 0.4, 0.6);
    d.goal.z = uniform(rng, 0.35, 0.55);
    if (task == TaskKind::P2PO) {
        PolarPoint o;
        o.theta = robot::wrap_angle(uniform(rng, d.goal.theta - kPi / 6.0, d.goal.theta - kPi / 12.0));
        o.rho = uniform(rng, 0.4, 0.6);
        o.z = uniform(rng, d.goal.z - 0.1, d.goal.z + 0.1);
        d.obstacle = o;
    }
    return d;
}

Draw draw_global(const Workspace& ws, Stage stage, TaskKind task, Rng& rng) {
    Draw d;
    switch (stage) {
        case Stage::Train: d.start = {kPi / 4.0, 0.52, 0.42}; break;
        case Stage::TestP2P: d.start = {-kPi / 4.0, 0.5, 0.45}; break;
        default: d.start = {-kPi / 2.0, 0.5, 0.45}; break;
    }
    d.goal = uniform_goal(ws, rng);
    if (task == TaskKind::P2PO) d.obstacle = train_obstacle(d.goal, rng);
    return d;
}

std::optional<EpisodeConfig> realize(const EnvParams& params, const Draw& d) {
    EpisodeConfig c;
    c.goal = to_cartesian(d.goal);
    if (d.obstacle) c.obstacle = to_cartesian(*d.obstacle);
    c.partition = d.partition;
    try {
        c.q0 = robot::inverse_kinematics(params.robot, to_cartesian(d.start), nominal_seed(d.start.theta));
        if (d.goal_must_be_reachable) robot::inverse_kinematics(params.robot, c.goal, c.q0);
    } catch (const robot::Unreachable&) {
        return std::nullopt;
    }
    const auto pose = robot::forward_kinematics(params.robot, c.q0);
    if (collision_check(pose, c.obstacle, params.obstacle_half_size, params.collision_margin)) return std::nullopt;
    return c;
}

}  // namespace

EpisodeConfig sample_demo_episode(const EnvParams& params, TaskKind task, int k, Rng& rng) {
    for (int attempt = 0; attempt <= kMaxRetries; ++attempt)
        if (auto c = realize(params, draw_demo(task, k, rng))) return *c;
    throw SamplingFailed("demo episode sampling exhausted its retries");
}

EpisodeConfig sample_episode(const EnvParams& params, Stage stage, TaskKind task, Rng& rng) {
    if (stage == Stage::DemoP2P || stage == Stage::DemoP2PO) {
        const TaskKind demo_task = stage == Stage::DemoP2P ? TaskKind::P2P : TaskKind::P2PO;
        return sample_demo_episode(params, demo_task, uniform_int(rng, 0, 3), rng);
    }
    for (int attempt = 0; attempt <= kMaxRetries; ++attempt)
        if (auto c = realize(params, draw_global(params.workspace, stage, task, rng))) return *c;
    throw SamplingFailed("episode sampling exhausted its retries");
}

}  // namespace symreach::env
