#include "symreach/robot.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

namespace symreach::robot {

namespace {

// Arm-plane coordinates (radial offset, height) of the joint points. They do
// not depend on the base yaw, which is what makes the arm rotation-symmetric.
struct PlanarChain {
    std::array<Eigen::Vector2d, 5> points;
};

PlanarChain planar_chain(const RobotModel& model, const JointVector& q) {
    PlanarChain c;
    c.points[0] = {0.0, 0.0};
    c.points[1] = {0.0, model.base_height};
    double pitch = 0.0;
    for (int i = 0; i < 3; ++i) {
        pitch += q[i + 1];
        c.points[i + 2] = c.points[i + 1] + model.link_lengths[i] * Eigen::Vector2d(std::sin(pitch), std::cos(pitch));
    }
    return c;
}

// Mass locations in the arm plane: link midpoints, then the tip.
std::array<Eigen::Vector2d, 4> mass_points(const PlanarChain& c) {
    return {0.5 * (c.points[1] + c.points[2]), 0.5 * (c.points[2] + c.points[3]),
            0.5 * (c.points[3] + c.points[4]), c.points[4]};
}

void require(bool ok, const std::string& field) {
    if (!ok) throw std::invalid_argument("robot." + field + " out of range");
}

}  // namespace

void RobotModel::validate() const {
    require(std::isfinite(base_height) && base_height >= 0.0, "base_height");
    for (double l : link_lengths) require(l > 0.0, "link_lengths");
    require(vel_limit > 0.0, "vel_limit");
    for (double t : tau_max) require(t > 0.0, "tau_max");
    for (const auto& lim : joint_limits) require(lim.lo < lim.hi, "joint_limits");
    for (double m : link_masses) require(m >= 0.0, "link_masses");
    for (double b : damping) require(b >= 0.0, "damping");
    require(dt > 0.0, "dt");
    require(velocity_time_constant > 0.0, "velocity_time_constant");
}

double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double w = a - two_pi * std::floor((a + std::numbers::pi) / two_pi);
    // floor() rounding can land exactly on +pi
    if (w >= std::numbers::pi) w -= two_pi;
    return w;
}

ArmPose forward_kinematics(const RobotModel& model, const JointVector& q) {
    const PlanarChain c = planar_chain(model, q);
    const double cy = std::cos(q[0]);
    const double sy = std::sin(q[0]);
    ArmPose pose;
    for (int i = 0; i < 5; ++i) {
        const double r = c.points[i].x();
        pose.joint_points[i] = Point(r * cy, r * sy, c.points[i].y());
    }
    return pose;
}

Jacobian jacobian(const RobotModel& model, const JointVector& q) {
    const ArmPose pose = forward_kinematics(model, q);
    const Point& tip = pose.end_effector();
    Jacobian jac;
    jac.col(0) = Point::UnitZ().cross(tip);
    const Point pitch_axis(-std::sin(q[0]), std::cos(q[0]), 0.0);
    for (int j = 1; j < kDof; ++j) jac.col(j) = pitch_axis.cross(tip - pose.joint_points[j]);
    return jac;
}

JointVector inverse_kinematics(const RobotModel& model, const Point& target, const JointVector& seed,
                               const IkOptions& options) {
    const Point shoulder(0.0, 0.0, model.base_height);
    if (!target.allFinite() || (target - shoulder).norm() > model.reach())
        throw Unreachable("target beyond chain reach");

    JointVector q = seed;
    q[0] = wrap_angle(q[0]);
    const double lambda2 = options.damping * options.damping;
    Point err = target - forward_kinematics(model, q).end_effector();
    for (int it = 0; it < options.max_iterations && err.norm() > options.tolerance; ++it) {
        const Jacobian jac = jacobian(model, q);
        const Eigen::Matrix3d jjt = jac * jac.transpose() + lambda2 * Eigen::Matrix3d::Identity();
        JointVector dq = jac.transpose() * jjt.ldlt().solve(err);
        const double biggest = dq.cwiseAbs().maxCoeff();
        if (biggest > options.max_step) dq *= options.max_step / biggest;
        q += dq;
        q[0] = wrap_angle(q[0]);
        for (int j = 1; j < kDof; ++j)
            q[j] = std::clamp(q[j], model.joint_limits[j].lo, model.joint_limits[j].hi);
        err = target - forward_kinematics(model, q).end_effector();
    }

    // Rotating about z only moves the tip along its circle, so aligning the
    // azimuth can never increase the error.
    const Point tip = forward_kinematics(model, q).end_effector();
    if (std::hypot(target.x(), target.y()) > 1e-9 && std::hypot(tip.x(), tip.y()) > 1e-9) {
        q[0] = wrap_angle(q[0] + std::atan2(target.y(), target.x()) - std::atan2(tip.y(), tip.x()));
        err = target - forward_kinematics(model, q).end_effector();
    }
    if (err.norm() > 1e-3) throw Unreachable("inverse kinematics did not converge");
    return q;
}

JointVector gravity_torques(const RobotModel& model, const JointVector& q) {
    const PlanarChain c = planar_chain(model, q);
    const auto masses = mass_points(c);
    JointVector g = JointVector::Zero();
    // Pitch joint j sits at planar point j and carries masses j-1 .. 3.
    for (int j = 1; j < kDof; ++j) {
        double torque = 0.0;
        for (int m = j - 1; m < kDof; ++m)
            torque += model.link_masses[m] * model.gravity * (masses[m].x() - c.points[j].x());
        g[j] = torque;
    }
    return g;
}

JointVector joint_inertias(const RobotModel& model, const JointVector& q) {
    const PlanarChain c = planar_chain(model, q);
    const auto masses = mass_points(c);
    JointVector inertia = JointVector::Zero();
    for (int m = 0; m < kDof; ++m) inertia[0] += model.link_masses[m] * masses[m].x() * masses[m].x();
    for (int j = 1; j < kDof; ++j)
        for (int m = j - 1; m < kDof; ++m)
            inertia[j] += model.link_masses[m] * (masses[m] - c.points[j]).squaredNorm();
    return inertia;
}

StepResult step(const RobotModel& model, const JointState& state, const JointVector& command) {
    const double gain = std::min(1.0, model.dt / model.velocity_time_constant);
    const JointVector cmd = command.cwiseMax(-model.vel_limit).cwiseMin(model.vel_limit);

    StepResult out;
    JointVector& qdot = out.state.qdot;
    JointVector& q = out.state.q;
    qdot = state.qdot + gain * (cmd - state.qdot);
    q = state.q + qdot * model.dt;
    q[0] = wrap_angle(q[0]);
    for (int j = 1; j < kDof; ++j) {
        const auto& lim = model.joint_limits[j];
        if (q[j] >= lim.hi || q[j] <= lim.lo) {
            q[j] = std::clamp(q[j], lim.lo, lim.hi);
            qdot[j] = 0.0;
        }
    }

    const JointVector qddot = (qdot - state.qdot) / model.dt;
    const JointVector inertia = joint_inertias(model, state.q);
    const JointVector gravity = gravity_torques(model, state.q);
    for (int j = 0; j < kDof; ++j) {
        const double tau = inertia[j] * qddot[j] + model.damping[j] * qdot[j] + gravity[j];
        out.tau_hat[j] = std::abs(tau) / model.tau_max[j];
    }
    return out;
}

}  // namespace symreach::robot
