#pragma once

#include <array>
#include <numbers>
#include <stdexcept>

#include <Eigen/Core>

namespace symreach::robot {

constexpr int kDof = 4;

using JointVector = Eigen::Matrix<double, kDof, 1>;
using Point = Eigen::Vector3d;
using Jacobian = Eigen::Matrix<double, 3, kDof>;

struct JointLimit {
    double lo;
    double hi;
};

/**
 * Kinematic and actuation parameters of a yaw + three-pitch arm.
 *
 * Joint 1 is a continuous base yaw about world z (its limit doubles as the
 * wrap interval). Joints 2-4 pitch about the yawed y axis; at q = 0 every
 * link points straight up.
 */
struct RobotModel {
    double base_height = 0.15;
    std::array<double, 3> link_lengths{0.30, 0.30, 0.25};
    std::array<JointLimit, kDof> joint_limits{{{-std::numbers::pi, std::numbers::pi}, {-2.4, 2.4}, {-2.4, 2.4}, {-2.4, 2.4}}};
    double vel_limit = 1.0;
    std::array<double, kDof> tau_max{39.0, 39.0, 39.0, 9.0};
    // Point masses: midpoints of the three arm links, then the gripper at the tip.
    std::array<double, kDof> link_masses{1.5, 1.2, 0.8, 0.9};
    std::array<double, kDof> damping{0.5, 0.5, 0.5, 0.2};
    double dt = 0.05;
    double velocity_time_constant = 0.1;
    double gravity = 9.81;

    double reach() const { return link_lengths[0] + link_lengths[1] + link_lengths[2]; }

    /// Throws std::invalid_argument naming the first violated field.
    void validate() const;
};

struct JointState {
    JointVector q = JointVector::Zero();
    JointVector qdot = JointVector::Zero();
};

/// Base, shoulder, elbow, wrist and end-effector positions.
struct ArmPose {
    std::array<Point, 5> joint_points;

    const Point& end_effector() const { return joint_points[4]; }
};

struct StepResult {
    JointState state;
    JointVector tau_hat;
};

class Unreachable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Wraps an angle into [-pi, pi).
double wrap_angle(double a);

ArmPose forward_kinematics(const RobotModel& model, const JointVector& q);

/// Analytic position Jacobian of the end-effector.
Jacobian jacobian(const RobotModel& model, const JointVector& q);

struct IkOptions {
    double damping = 0.05;
    double max_step = 0.2;
    int max_iterations = 200;
    double tolerance = 1e-4;
};

/**
 * Damped least-squares IK for the end-effector position.
 *
 * After the iteration converges the base yaw is corrected so the
 * end-effector azimuth matches the target exactly. Throws Unreachable when
 * the target lies beyond the chain reach or the residual stays above 1 mm.
 */
JointVector inverse_kinematics(const RobotModel& model, const Point& target, const JointVector& seed,
                               const IkOptions& options = {});

/// Gravity torque at each joint from the point-mass model (yaw entry is zero).
JointVector gravity_torques(const RobotModel& model, const JointVector& q);

/// Diagonal inertia seen by each joint from the distal point masses.
JointVector joint_inertias(const RobotModel& model, const JointVector& q);

/**
 * Integrates one control period of velocity commands.
 *
 * Velocity tracking is a first-order lag; the yaw wraps while pitch joints
 * stop (velocity zeroed) at their limits. tau_hat is the absolute torque
 * proxy divided by tau_max, per joint.
 */
StepResult step(const RobotModel& model, const JointState& state, const JointVector& command);

}  // namespace symreach::robot
