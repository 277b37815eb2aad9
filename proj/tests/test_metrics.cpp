#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "symreach/metrics.hpp"

using namespace symreach;
using namespace symreach::metrics;

namespace {

struct HandTrial {
    double ret = 0.0;
    double effort = 0.0;
    std::vector<double> errors;
    bool reached = false;
};

// Rolls the script through the robot model directly and applies the reward
// and termination rules by hand, without touching ReachEnv.
HandTrial hand_rollout(const env::EnvParams& p, const env::EpisodeConfig& c, const std::vector<robot::JointVector>& script) {
    HandTrial h;
    robot::JointState s;
    s.q = c.q0;
    for (int t = 0; t < p.max_steps; ++t) {
        const robot::JointVector a = t < static_cast<int>(script.size()) ? script[t] : robot::JointVector::Zero();
        const robot::StepResult r = robot::step(p.robot, s, a);
        s = r.state;
        const double e = (c.goal - robot::forward_kinematics(p.robot, s.q).end_effector()).norm();
        h.reached = e < p.reward.epsilon;
        h.ret += -p.reward.alpha_distance * e - p.reward.alpha_effort * r.tau_hat.norm() +
                 (h.reached ? p.reward.reach_bonus : 0.0);
        h.effort += r.tau_hat.norm();
        h.errors.push_back(e);
        if (h.reached) break;
    }
    return h;
}

}  // namespace

TEST_CASE("training metrics: reference DDPG row") {
    // Segment means -0.56 and 0.32 with an arbitrary middle section.
    std::vector<double> curve(400, 0.0);
    for (int i = 0; i < 40; ++i) curve[i] = -0.56;
    for (int i = 40; i < 360; ++i) curve[i] = std::sin(0.1 * i);
    for (int i = 360; i < 400; ++i) curve[i] = 0.32;
    const TrainingMetrics m = training_metrics(curve);
    CHECK(m.r10 == doctest::Approx(-0.56).epsilon(1e-12));
    CHECK(m.r90 == doctest::Approx(0.32).epsilon(1e-12));
    CHECK(m.ir == doctest::Approx(0.88).epsilon(1e-12));
}

TEST_CASE("training metrics: constant curve") {
    const TrainingMetrics m = training_metrics(std::vector<double>(57, 2.5));
    CHECK(m.r10 == 2.5);
    CHECK(m.r90 == 2.5);
    CHECK(m.ir == 0.0);
    REQUIRE(m.t50);
    CHECK(*m.t50 == 0);
}

TEST_CASE("training metrics: linear ramp closed form") {
    std::vector<double> curve(1000);
    for (int i = 0; i < 1000; ++i) curve[i] = i / 999.0;
    const TrainingMetrics m = training_metrics(curve);
    CHECK(m.r10 == doctest::Approx(49.5 / 999).epsilon(1e-12));
    CHECK(m.r90 == doctest::Approx(949.5 / 999).epsilon(1e-12));
    CHECK(m.ir == doctest::Approx(900.0 / 999).epsilon(1e-12));
    // Smoothed value at i >= 49 is (i - 24.5)/999; it passes 474.75/999 first at i = 500.
    REQUIRE(m.t50);
    CHECK(*m.t50 == 500);
}

TEST_CASE("training metrics: segment size rounds up") {
    std::vector<double> curve(11, 0.0);
    curve[0] = 4.0;
    curve[1] = 2.0;  // ceil(10% of 11) = 2
    curve[10] = 6.0;
    curve[9] = 8.0;
    const TrainingMetrics m = training_metrics(curve);
    CHECK(m.r10 == 3.0);
    CHECK(m.r90 == 7.0);
}

TEST_CASE("training metrics: never crossing half of R90 leaves T50 empty") {
    std::vector<double> curve(20, -1.0);
    CHECK_FALSE(training_metrics(curve).t50);
}

TEST_CASE("training metrics need ten episodes") {
    CHECK_THROWS_AS(training_metrics(std::vector<double>(9, 1.0)), CurveTooShort);
    CHECK_NOTHROW(training_metrics(std::vector<double>(10, 1.0)));
}

TEST_CASE("moving average uses a growing window at the start") {
    const std::vector<double> v{1, 2, 3, 4};
    const std::vector<double> ma = moving_average(v, 2);
    CHECK(ma == std::vector<double>{1, 1.5, 2.5, 3.5});
}

TEST_CASE("zero policy times out everywhere") {
    env::EnvParams p;
    p.max_steps = 40;
    ZeroPolicy zero;
    const TestReport r = evaluate(zero, p, env::TaskKind::P2P, 20, 3);
    CHECK(r.p_scs == 0.0);
    CHECK(r.successes == 0);
    CHECK_FALSE(r.r_test);
    CHECK_FALSE(r.e95);
    for (const auto& t : r.trials) {
        CHECK(t.cause == env::Cause::Timeout);
        CHECK(t.steps == 40);
    }
}

TEST_CASE("single scripted trial matches a hand computation") {
    env::EnvParams p;
    p.max_steps = 20;
    const robot::JointVector step_cmd(1.0, 1.0, -1.0, 1.0);
    std::vector<robot::JointVector> script(6, step_cmd);

    env::EpisodeConfig c;
    c.q0 = robot::JointVector(0.3, 0.5, 0.9, 0.6);
    // Goal where the script leaves the end effector after 6 steps; the
    // reach test fires a little earlier, at whatever step the hand rollout says.
    {
        robot::JointState s;
        s.q = c.q0;
        for (const auto& a : script) s = robot::step(p.robot, s, a).state;
        c.goal = robot::forward_kinematics(p.robot, s.q).end_effector();
    }

    SUBCASE("reached during the script") {
        const HandTrial h = hand_rollout(p, c, script);
        REQUIRE(h.reached);
        const int n = static_cast<int>(h.errors.size());
        REQUIRE(n > 1);

        ScriptedPolicy policy(script);
        const TestReport r = evaluate_configs(policy, p, env::TaskKind::P2P, {c});
        REQUIRE(r.trials.size() == 1);
        const TrialRecord& t = r.trials[0];
        CHECK(t.cause == env::Cause::Reached);
        CHECK(t.success);
        CHECK(t.steps == n);
        CHECK(t.trial_return == doctest::Approx(h.ret).epsilon(1e-12));
        CHECK(t.effort_sum == doctest::Approx(h.effort).epsilon(1e-12));
        CHECK(t.final_error == doctest::Approx(h.errors.back()).epsilon(1e-12));
        CHECK(t.e95 == doctest::Approx(h.errors.back()).epsilon(1e-12));  // ceil(5% of n) = 1 step
        CHECK_FALSE(t.e95_fixed);  // the fixed window starts at step ceil(0.95*20) = 19
        CHECK(r.p_scs == 1.0);
        CHECK(r.t_eff == doctest::Approx(h.effort / 20).epsilon(1e-12));
        CHECK(r.t_eff_executed == doctest::Approx(h.effort / n).epsilon(1e-12));
        REQUIRE(r.r_test);
        CHECK(*r.r_test == doctest::Approx(h.ret).epsilon(1e-12));
    }
    SUBCASE("goal moved out of reach of the script") {
        c.goal.z() += 0.2;
        const HandTrial h = hand_rollout(p, c, script);
        REQUIRE_FALSE(h.reached);
        ScriptedPolicy policy(script);
        const TestReport r = evaluate_configs(policy, p, env::TaskKind::P2P, {c});
        const TrialRecord& t = r.trials[0];
        CHECK(t.cause == env::Cause::Timeout);
        CHECK(t.steps == 20);
        CHECK(t.trial_return == doctest::Approx(h.ret).epsilon(1e-12));
        CHECK(t.e95 == doctest::Approx(h.errors.back()).epsilon(1e-12));
        REQUIRE(t.e95_fixed);
        CHECK(*t.e95_fixed == doctest::Approx(h.errors.back()).epsilon(1e-12));
        CHECK(r.p_scs == 0.0);
        CHECK_FALSE(r.r_test);
    }
}

TEST_CASE("report aggregates do not depend on trial order") {
    env::EnvParams p;
    p.max_steps = 150;
    const auto configs = test_configs(p, env::TaskKind::P2P, 12, 8);
    auto reversed = configs;
    std::reverse(reversed.begin(), reversed.end());
    PidPolicy pid(p);
    const TestReport a = evaluate_configs(pid, p, env::TaskKind::P2P, configs);
    const TestReport b = evaluate_configs(pid, p, env::TaskKind::P2P, reversed);
    CHECK(a.successes == b.successes);
    CHECK(a.t_eff == doctest::Approx(b.t_eff).epsilon(1e-12));
    CHECK(a.r_test.has_value() == b.r_test.has_value());
    if (a.r_test) CHECK(*a.r_test == doctest::Approx(*b.r_test).epsilon(1e-12));
    for (std::size_t i = 0; i < configs.size(); ++i)
        CHECK(a.trials[i].trial_return == b.trials[configs.size() - 1 - i].trial_return);
}

TEST_CASE("test episodes are fixed by the seed and the trial index") {
    const env::EnvParams p;
    const auto five = test_configs(p, env::TaskKind::P2PO, 5, 4);
    const auto ten = test_configs(p, env::TaskKind::P2PO, 10, 4);
    for (int i = 0; i < 5; ++i) {
        CHECK(five[i].goal == ten[i].goal);
        CHECK(five[i].q0 == ten[i].q0);
    }
}

TEST_CASE("report json uses null for undefined means") {
    env::EnvParams p;
    p.max_steps = 10;
    ZeroPolicy zero;
    const TestReport r = evaluate(zero, p, env::TaskKind::P2P, 2, 1);
    const auto j = nlohmann::json::parse(report_json(r));
    CHECK(j["p_scs"] == 0.0);
    CHECK(j["r_test"].is_null());
    CHECK(j["n_trials"] == 2);
    std::ostringstream csv;
    write_trials_csv(csv, r);
    const std::string text = csv.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}
