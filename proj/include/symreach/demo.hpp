#pragma once

#include <vector>

#include "symreach/env.hpp"
#include "symreach/replay.hpp"

namespace symreach::demo {

using robot::JointVector;

struct PidGains {
    JointVector kp = JointVector::Constant(2.0);
    JointVector ki = JointVector::Constant(0.02);
    JointVector kd = JointVector::Constant(0.1);
    double integral_limit = 1.0;

    void validate() const;
};

struct SetpointPlan {
    std::vector<JointVector> waypoints;
    double switch_tolerance = 0.1;
};

struct PidOutput {
    JointVector action;
    JointVector integral;
};

/// a = kp*e + ki*integral' - kd*qdot with e = q_sp - q, integral' clamped
/// per joint, and the action clamped to +-vel_limit.
PidOutput pid_action(const PidGains& gains, const JointVector& setpoint, const JointVector& q,
                     const JointVector& integral, const JointVector& qdot, double dt, double vel_limit);

struct PlanOptions {
    double switch_tolerance = 0.1;
    double clearance = 0.15;  // height above the obstacle centre for the via point
};

/// Joint-space setpoints: IK(goal) for P2P; for P2P-O an over-the-top via
/// point midway in azimuth precedes IK(goal). Propagates robot::Unreachable.
SetpointPlan plan_setpoints(const env::EpisodeConfig& config, const robot::RobotModel& model,
                            const PlanOptions& options = {});

/// Waypoint-following PID demonstrator.
class PidController {
public:
    PidController(PidGains gains, robot::RobotModel model, PlanOptions options = {});

    void reset(const env::EpisodeConfig& config);
    JointVector act(const env::Observation& obs);

    std::size_t active_waypoint() const { return waypoint_; }
    const SetpointPlan& plan() const { return plan_; }

private:
    PidGains gains_;
    robot::RobotModel model_;
    PlanOptions options_;
    SetpointPlan plan_;
    std::size_t waypoint_ = 0;
    JointVector integral_ = JointVector::Zero();
};

struct DemoOptions {
    bool discard_failed = false;
    PidGains gains;
    PlanOptions plan;
};

struct DemoStats {
    int episodes = 0;
    int stored_episodes = 0;
    std::size_t transitions = 0;         // original (non-duplicated) samples stored
    std::size_t stored_transitions = 0;  // per buffer, duplicates included
    int reached = 0;
    int timeout = 0;
    int collision = 0;
    int left_partition = 0;
    std::vector<int> episode_lengths;
};

/// Records PID demonstrations in randomly chosen sectors and stores every
/// sample plus its rotated counterparts in both buffers.
DemoStats record_demos(const env::EnvParams& params, env::TaskKind task, int n_demos,
                       replay::ReplayBuffer& demo_buffer, replay::ReplayBuffer& original_buffer, Rng& rng,
                       const DemoOptions& options = {});

}  // namespace symreach::demo
