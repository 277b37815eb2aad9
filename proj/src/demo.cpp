#include "symreach/demo.hpp"

#include <algorithm>
#include <string>

namespace symreach::demo {

void PidGains::validate() const {
    if (!(kp.array() > 0.0).all()) throw std::invalid_argument("pid.kp must be positive");
    if (!(ki.array() >= 0.0).all()) throw std::invalid_argument("pid.ki must be nonnegative");
    if (!(kd.array() >= 0.0).all()) throw std::invalid_argument("pid.kd must be nonnegative");
    if (!(integral_limit > 0.0)) throw std::invalid_argument("pid.integral_limit must be positive");
}

PidOutput pid_action(const PidGains& gains, const JointVector& setpoint, const JointVector& q,
                     const JointVector& integral, const JointVector& qdot, double dt, double vel_limit) {
    JointVector e = setpoint - q;
    // Yaw is continuous, so take the short way round.
    e[0] = robot::wrap_angle(e[0]);
    PidOutput out;
    out.integral = (integral + e * dt).cwiseMax(-gains.integral_limit).cwiseMin(gains.integral_limit);
    const JointVector a = gains.kp.cwiseProduct(e) + gains.ki.cwiseProduct(out.integral) - gains.kd.cwiseProduct(qdot);
    out.action = a.cwiseMax(-vel_limit).cwiseMin(vel_limit);
    return out;
}

SetpointPlan plan_setpoints(const env::EpisodeConfig& config, const robot::RobotModel& model,
                            const PlanOptions& options) {
    SetpointPlan plan;
    plan.switch_tolerance = options.switch_tolerance;
    JointVector seed = config.q0;
    if (config.obstacle) {
        const env::PolarPoint start = env::to_polar(robot::forward_kinematics(model, config.q0).end_effector());
        const env::PolarPoint goal = env::to_polar(config.goal);
        env::PolarPoint via;
        via.theta = start.theta + 0.5 * robot::wrap_angle(goal.theta - start.theta);
        via.z = std::max(goal.z, config.obstacle->z() + options.clearance);
        // A high via point can fall outside the reach; pull it inwards, and go
        // straight for the goal if that still fails.
        for (double shrink : {1.0, 0.75, 0.5}) {
            via.rho = shrink * goal.rho;
            try {
                seed = robot::inverse_kinematics(model, env::to_cartesian(via), seed);
                plan.waypoints.push_back(seed);
                break;
            } catch (const robot::Unreachable&) {
            }
        }
    }
    plan.waypoints.push_back(robot::inverse_kinematics(model, config.goal, seed));
    return plan;
}

PidController::PidController(PidGains gains, robot::RobotModel model, PlanOptions options)
    : gains_(std::move(gains)), model_(std::move(model)), options_(options) {}

void PidController::reset(const env::EpisodeConfig& config) {
    plan_ = plan_setpoints(config, model_, options_);
    waypoint_ = 0;
    integral_.setZero();
}

JointVector PidController::act(const env::Observation& obs) {
    if (plan_.waypoints.empty()) throw std::logic_error("PidController::act before reset");
    if (waypoint_ + 1 < plan_.waypoints.size()) {
        JointVector diff = plan_.waypoints[waypoint_] - obs.q;
        diff[0] = robot::wrap_angle(diff[0]);
        if (diff.norm() < plan_.switch_tolerance) ++waypoint_;
    }
    const PidOutput out =
        pid_action(gains_, plan_.waypoints[waypoint_], obs.q, integral_, obs.qdot, model_.dt, model_.vel_limit);
    integral_ = out.integral;
    return out.action;
}

DemoStats record_demos(const env::EnvParams& params, env::TaskKind task, int n_demos,
                       replay::ReplayBuffer& demo_buffer, replay::ReplayBuffer& original_buffer, Rng& rng,
                       const DemoOptions& options) {
    const int partitions = params.workspace.partitions;
    DemoStats stats;
    env::ReachEnv environment(params, task);
    PidController pid(options.gains, params.robot, options.plan);

    for (int episode = 0; episode < n_demos; ++episode) {
        env::EpisodeConfig config;
        for (int attempt = 0;; ++attempt) {
            const int k = uniform_int(rng, 0, partitions - 1);
            config = env::sample_demo_episode(params, task, k, rng);
            try {
                pid.reset(config);
                break;
            } catch (const robot::Unreachable&) {
                if (attempt >= 20) throw env::SamplingFailed("no plannable demo episode after 20 retries");
            }
        }

        std::vector<replay::Transition> samples;
        env::Observation obs = environment.reset(config, true);
        env::Cause cause = env::Cause::Running;
        while (!environment.done()) {
            const JointVector a = pid.act(obs);
            const env::StepOutcome out = environment.step(a);
            replay::Transition t;
            t.s = obs.flatten();
            t.a = a;
            t.r = out.reward;
            t.s_next = out.obs_next.flatten();
            t.zeta = out.zeta;
            t.partition = static_cast<std::uint8_t>(*config.partition);
            t.is_demo = true;
            samples.push_back(std::move(t));
            obs = out.obs_next;
            cause = out.cause;
        }

        ++stats.episodes;
        stats.episode_lengths.push_back(static_cast<int>(samples.size()));
        switch (cause) {
            case env::Cause::Reached: ++stats.reached; break;
            case env::Cause::Timeout: ++stats.timeout; break;
            case env::Cause::Collision: ++stats.collision; break;
            case env::Cause::LeftPartition: ++stats.left_partition; break;
            case env::Cause::Running: break;
        }
        if (options.discard_failed && cause != env::Cause::Reached) continue;

        ++stats.stored_episodes;
        for (const replay::Transition& t : samples) {
            for (int turn = 0; turn < partitions; ++turn) {
                replay::Transition copy = t;
                if (turn > 0) {
                    copy.s = env::phi_state(t.s, turn);
                    copy.s_next = env::phi_state(t.s_next, turn);
                    copy.a = env::psi_action(robot::JointVector(t.a));
                    copy.partition = static_cast<std::uint8_t>((t.partition + turn) % partitions);
                }
                demo_buffer.push(copy);
                original_buffer.push(std::move(copy));
                ++stats.stored_transitions;
            }
            ++stats.transitions;
        }
    }
    return stats;
}

}  // namespace symreach::demo
