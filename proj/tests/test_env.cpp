#include <doctest.h>

#include <cmath>
#include <numbers>

#include "symreach/env.hpp"

using namespace symreach;
using namespace symreach::env;

namespace {

constexpr double kPi = std::numbers::pi;

Point polar(double theta, double rho, double z) { return to_cartesian({theta, rho, z}); }

// Brute-force distance: sample the segment densely and clamp each sample into the cube.
double sampled_distance(const Point& a, const Point& b, const Point& c, double h, int samples) {
    double best = 1e300;
    for (int i = 0; i <= samples; ++i) {
        const Point p = a + (b - a) * (static_cast<double>(i) / samples);
        Point nearest;
        for (int k = 0; k < 3; ++k) nearest[k] = std::min(std::max(p[k], c[k] - h), c[k] + h);
        best = std::min(best, (p - nearest).norm());
    }
    return best;
}

JointVector random_q(const robot::RobotModel& m, Rng& rng) {
    JointVector q;
    for (int j = 0; j < robot::kDof; ++j) q[j] = uniform(rng, m.joint_limits[j].lo, m.joint_limits[j].hi);
    return q;
}

}  // namespace

TEST_CASE("partition labels follow the [0, 2pi) convention") {
    const Workspace ws;
    CHECK(partition_of(ws, polar(kPi / 4, 0.5, 0.4)) == 0);
    CHECK(partition_of(ws, polar(kPi / 2, 0.5, 0.4)) == 1);
    CHECK(partition_of(ws, polar(-kPi / 4, 0.5, 0.4)) == 3);
    CHECK(partition_of(ws, polar(kPi, 0.5, 0.4)) == 2);
}

TEST_CASE("partition_of rejects points outside the boundary") {
    const Workspace ws;  // square of half-width 0.9
    CHECK(partition_of(ws, Point(0.85, 0.85, 0.4)) == 0);
    CHECK_THROWS_AS(partition_of(ws, Point(0.95, 0.0, 0.4)), OutOfWorkspace);
    CHECK_THROWS_AS(partition_of(ws, Point(0.3, 0.3, -0.01)), OutOfWorkspace);
}

TEST_CASE("box boundary radius") {
    const Workspace ws;
    CHECK(ws.boundary_radius(0.0) == doctest::Approx(0.9));
    CHECK(ws.boundary_radius(kPi / 4) == doctest::Approx(0.9 * std::sqrt(2.0)));
    Workspace disc;
    disc.boundary = Boundary::Disc;
    CHECK(disc.boundary_radius(0.3) == doctest::Approx(0.9));
}

TEST_CASE("phi: quarter turn of the goal and norm preservation") {
    Observation o;
    o.q = JointVector(0.2, 0.4, 0.5, 0.6);
    o.sin_q = o.q.array().sin();
    o.cos_q = o.q.array().cos();
    o.goal = Point(0.5, 0, 0.4);
    o.err = Point(0.1, -0.2, 0.05);
    const Observation r = phi_state(o, 1);
    CHECK((r.goal - Point(0, 0.5, 0.4)).norm() < 1e-15);
    CHECK(r.err.norm() == doctest::Approx(o.err.norm()).epsilon(1e-15));
    CHECK(r.q[0] == doctest::Approx(0.2 + kPi / 2));
    CHECK(r.q.tail<3>() == o.q.tail<3>());
}

TEST_CASE("phi: four quarter turns restore the observation") {
    Rng rng(9);
    for (int trial = 0; trial < 1000; ++trial) {
        Eigen::VectorXd flat(25);
        for (int i = 0; i < 25; ++i) flat[i] = uniform(rng, -1, 1);
        flat[0] = uniform(rng, -kPi, kPi);
        flat[4] = std::sin(flat[0]);
        flat[8] = std::cos(flat[0]);
        Eigen::VectorXd x = flat;
        for (int k = 0; k < 4; ++k) x = phi_state(x, 1);
        REQUIRE((x - flat).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("psi is the identity") {
    const JointVector a(0.1, -0.2, 0.3, 0);
    CHECK(psi_action(a) == a);
    CHECK(psi_action(JointVector::Zero()) == JointVector::Zero());
}

TEST_CASE("reward terms") {
    const RewardParams p;
    JointVector tau = JointVector::Zero();
    tau[1] = 0.5;
    CHECK(reward(p, Point(0.1, 0, 0), tau, false) == doctest::Approx(-7e-4).epsilon(1e-12));
    CHECK(reward(p, Point(0.04, 0, 0), JointVector::Zero(), false) == doctest::Approx(10 - 8e-5).epsilon(1e-12));
    tau[1] = 1.0;
    CHECK(reward(p, Point(0, 0.3, 0), tau, true) == doctest::Approx(-2 - 6e-4 - 1e-3).epsilon(1e-12));
}

TEST_CASE("collision: separation and containment") {
    const robot::RobotModel m;
    const robot::ArmPose pose = robot::forward_kinematics(m, JointVector(0, 0.4, 1.1, 0.9));
    CHECK_FALSE(collision_check(pose, Point(-1.0, -1.0, 1.5), 0.02, 0.01));
    CHECK(collision_check(pose, pose.end_effector(), 0.02, 0.01));
    CHECK_FALSE(collision_check(pose, std::nullopt, 0.02, 0.01));
}

TEST_CASE("collision: joints below the floor") {
    const robot::RobotModel m;
    const robot::ArmPose pose = robot::forward_kinematics(m, JointVector(0, 2.0, 1.5, 0.0));
    REQUIRE(pose.end_effector().z() < 0.0);
    CHECK(collision_check(pose, std::nullopt, 0.02, 0.01));
}

TEST_CASE("segment-box distance agrees with a dense sampler") {
    Rng rng(21);
    const double h = 0.02, margin = 0.01;
    int agreements = 0;
    for (int scene = 0; scene < 1000; ++scene) {
        const Point c(uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2), uniform(rng, 0.2, 0.6));
        Point a, b;
        for (int k = 0; k < 3; ++k) {
            a[k] = c[k] + uniform(rng, -0.1, 0.1);
            b[k] = c[k] + uniform(rng, -0.1, 0.1);
        }
        const int samples = 20000;
        const double exact = segment_box_distance(a, b, c, h);
        const double brute = sampled_distance(a, b, c, h, samples);
        const double resolution = (b - a).norm() / samples;
        REQUIRE(exact <= brute + 1e-12);
        REQUIRE(brute - exact <= resolution);
        if (std::abs(brute - margin) > resolution) {
            REQUIRE((exact < margin) == (brute < margin));
            ++agreements;
        }
    }
    CHECK(agreements > 950);
}

TEST_CASE("step causes and termination flags") {
    EnvParams params;
    params.max_steps = 3;
    SimState s;
    s.joints.q = robot::inverse_kinematics(params.robot, polar(0.5, 0.5, 0.4), nominal_seed(0.5));
    s.goal = polar(-2.0, 0.5, 0.4);
    SUBCASE("timeout at the horizon") {
        const auto o1 = env_step(params, s, JointVector::Zero(), {0, std::nullopt});
        CHECK(o1.cause == Cause::Running);
        CHECK_FALSE(o1.zeta);
        const auto o3 = env_step(params, s, JointVector::Zero(), {2, std::nullopt});
        CHECK(o3.cause == Cause::Timeout);
        CHECK(o3.zeta);
    }
    SUBCASE("reaching pays the bonus") {
        s.goal = robot::forward_kinematics(params.robot, s.joints.q).end_effector() + Point(0.01, 0, 0);
        const auto o = env_step(params, s, JointVector::Zero(), {0, std::nullopt});
        CHECK(o.cause == Cause::Reached);
        CHECK(o.zeta);
        CHECK(o.reward > 9.9);
    }
    SUBCASE("leaving the local sector ends demo episodes") {
        s.joints.q = robot::inverse_kinematics(params.robot, polar(kPi / 2 - 0.01, 0.5, 0.4), nominal_seed(1.5));
        const auto inside = env_step(params, s, JointVector::Zero(), {0, 0});
        CHECK(inside.cause == Cause::Running);
        const auto out = env_step(params, s, JointVector(1, 0, 0, 0), {1, 0});
        CHECK(out.cause == Cause::LeftPartition);
        CHECK(out.zeta);
    }
    SUBCASE("collision takes priority over reaching") {
        const Point ee = robot::forward_kinematics(params.robot, s.joints.q).end_effector();
        s.goal = ee;
        s.obstacle = ee;
        const auto o = env_step(params, s, JointVector::Zero(), {2, std::nullopt});
        CHECK(o.cause == Cause::Collision);
        CHECK(o.reward < 8.1);
    }
}

TEST_CASE("ReachEnv refuses to step a finished episode") {
    EnvParams params;
    params.max_steps = 1;
    ReachEnv e(params, TaskKind::P2P);
    Rng rng(1);
    e.reset(sample_episode(params, Stage::Train, TaskKind::P2P, rng));
    e.step(JointVector::Zero());
    CHECK(e.done());
    CHECK_THROWS_AS(e.step(JointVector::Zero()), std::logic_error);
}

TEST_CASE("symmetry: rotating then stepping equals stepping then rotating") {
    const EnvParams params;
    const Workspace& ws = params.workspace;
    Rng rng(33);
    int checked = 0;
    while (checked < 1000) {
        SimState s;
        s.joints.q = random_q(params.robot, rng);
        for (int j = 0; j < 4; ++j) s.joints.qdot[j] = uniform(rng, -1, 1);
        s.goal = polar(uniform(rng, -kPi, kPi), uniform(rng, 0.3, 0.7), uniform(rng, 0.25, 0.65));
        if (checked % 2) s.obstacle = polar(uniform(rng, -kPi, kPi), uniform(rng, 0.4, 0.6), uniform(rng, 0.3, 0.6));
        const Point ee = robot::forward_kinematics(params.robot, s.joints.q).end_effector();
        if (ee.z() <= 0.0) continue;
        const int p = sector_of(ws, ee);
        JointVector a;
        for (int j = 0; j < 4; ++j) a[j] = uniform(rng, -1, 1);

        const Observation obs = observe(params, s);
        SimState s1 = s;
        const StepOutcome direct = env_step(params, s1, a, {0, std::nullopt});
        if (sector_of(ws, robot::forward_kinematics(params.robot, s1.joints.q).end_effector()) != p) continue;

        for (int turns = 1; turns < 4; ++turns) {
            SimState s2 = sim_state_from(phi_state(obs, turns));
            const StepOutcome rotated = env_step(params, s2, psi_action(a), {0, std::nullopt});
            const Eigen::VectorXd lhs = phi_state(direct.obs_next, turns).flatten();
            const Eigen::VectorXd rhs = rotated.obs_next.flatten();
            REQUIRE((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
            REQUIRE(std::abs(direct.reward - rotated.reward) < 1e-9);
            REQUIRE(direct.cause == rotated.cause);
        }
        ++checked;
    }
}

TEST_CASE("training goals stay inside the sampling ranges") {
    const EnvParams params;
    Rng rng(4);
    for (int i = 0; i < 10000; ++i) {
        const EpisodeConfig c = sample_episode(params, Stage::Train, TaskKind::P2P, rng);
        const PolarPoint g = to_polar(c.goal);
        REQUIRE(g.rho >= 0.3 - 1e-12);
        REQUIRE(g.rho < 0.7 + 1e-12);
        REQUIRE(g.z >= 0.25);
        REQUIRE(g.z < 0.65);
        REQUIRE_FALSE(c.partition.has_value());
    }
}

TEST_CASE("training starts from the fixed pose") {
    const EnvParams params;
    Rng rng(6);
    const EpisodeConfig c = sample_episode(params, Stage::Train, TaskKind::P2PO, rng);
    const Point ee = robot::forward_kinematics(params.robot, c.q0).end_effector();
    CHECK((ee - polar(kPi / 4, 0.52, 0.42)).norm() < 1e-3);
    REQUIRE(c.obstacle.has_value());
    const double dtheta = robot::wrap_angle(to_polar(*c.obstacle).theta - to_polar(c.goal).theta);
    CHECK(std::abs(dtheta) >= kPi / 12 - 1e-12);
    CHECK(std::abs(dtheta) < kPi / 6 + 1e-12);
}

TEST_CASE("test stages start at their own poses") {
    const EnvParams params;
    Rng rng(8);
    const EpisodeConfig p = sample_episode(params, Stage::TestP2P, TaskKind::P2P, rng);
    CHECK((robot::forward_kinematics(params.robot, p.q0).end_effector() - polar(-kPi / 4, 0.5, 0.45)).norm() < 1e-3);
    const EpisodeConfig o = sample_episode(params, Stage::TestP2PO, TaskKind::P2PO, rng);
    CHECK((robot::forward_kinematics(params.robot, o.q0).end_effector() - polar(-kPi / 2, 0.5, 0.45)).norm() < 1e-3);
}

TEST_CASE("demo episodes keep start and goal in one sector") {
    const EnvParams params;
    Rng rng(10);
    for (TaskKind task : {TaskKind::P2P, TaskKind::P2PO}) {
        for (int i = 0; i < 2000; ++i) {
            const int k = i % 4;
            const EpisodeConfig c = sample_demo_episode(params, task, k, rng);
            REQUIRE(c.partition.has_value());
            REQUIRE(*c.partition == (k + 3) % 4);
            const Point start = robot::forward_kinematics(params.robot, c.q0).end_effector();
            REQUIRE(in_partition(params.workspace, start, *c.partition));
            REQUIRE(in_partition(params.workspace, c.goal, *c.partition, 0.0));
            REQUIRE(partition_of(params.workspace, c.goal) == *c.partition);
        }
    }
}

TEST_CASE("demo P2P sector 0 draws goals below the x axis") {
    const EnvParams params;
    Rng rng(12);
    for (int i = 0; i < 1000; ++i) {
        const EpisodeConfig c = sample_demo_episode(params, TaskKind::P2P, 0, rng);
        const double theta = to_polar(c.goal).theta;
        REQUIRE(theta >= -kPi / 2);
        REQUIRE(theta < 0.0);
        const Point start = robot::forward_kinematics(params.robot, c.q0).end_effector();
        REQUIRE(to_polar(start).theta == doctest::Approx(-kPi / 4).epsilon(1e-12));
    }
}

TEST_CASE("observation flatten/unflatten round trip") {
    Observation o;
    o.q = JointVector(1, 2, 3, 4);
    o.sin_q = JointVector(5, 6, 7, 8);
    o.cos_q = JointVector(9, 10, 11, 12);
    o.qdot = JointVector(13, 14, 15, 16);
    o.goal = Point(17, 18, 19);
    o.err = Point(20, 21, 22);
    CHECK(o.flatten().size() == 22);
    CHECK(Observation::unflatten(o.flatten()).flatten() == o.flatten());
    o.obstacle = Point(23, 24, 25);
    CHECK(o.flatten().size() == 25);
    CHECK(Observation::unflatten(o.flatten()).flatten() == o.flatten());
}

TEST_CASE("task names") {
    CHECK(parse_task("p2p") == TaskKind::P2P);
    CHECK(parse_task("p2p-o") == TaskKind::P2PO);
    CHECK(to_string(TaskKind::P2PO) == "p2p-o");
    CHECK_THROWS(parse_task("reach"));
}
