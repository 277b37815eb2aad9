#pragma once

#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "symreach/demo.hpp"
#include "symreach/env.hpp"
#include "symreach/nn.hpp"

namespace symreach::metrics {

class CurveTooShort : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct TrainingMetrics {
    double r10 = 0.0;
    double r90 = 0.0;
    double ir = 0.0;
    std::optional<int> t50;  // episode index; empty if the smoothed curve never gets there
};

constexpr int kSmoothingWindow = 50;

/// Needs at least 10 returns.
TrainingMetrics training_metrics(const std::vector<double>& returns);

/// Trailing moving average with window min(window, i + 1).
std::vector<double> moving_average(const std::vector<double>& values, int window);

class Policy {
public:
    virtual ~Policy() = default;
    virtual void reset(const env::EpisodeConfig& config) = 0;
    virtual robot::JointVector act(const env::Observation& obs) = 0;
};

/// Noise-free actor network.
class ActorPolicy : public Policy {
public:
    explicit ActorPolicy(nn::Mlp actor) : actor_(std::move(actor)) {}
    void reset(const env::EpisodeConfig&) override {}
    robot::JointVector act(const env::Observation& obs) override;

private:
    nn::Mlp actor_;
};

class PidPolicy : public Policy {
public:
    PidPolicy(const env::EnvParams& params, demo::PidGains gains = {}, demo::PlanOptions plan = {})
        : controller_(std::move(gains), params.robot, plan) {}
    void reset(const env::EpisodeConfig& config) override { controller_.reset(config); }
    robot::JointVector act(const env::Observation& obs) override { return controller_.act(obs); }

private:
    demo::PidController controller_;
};

class ZeroPolicy : public Policy {
public:
    void reset(const env::EpisodeConfig&) override {}
    robot::JointVector act(const env::Observation&) override { return robot::JointVector::Zero(); }
};

/// Replays a fixed action sequence, then holds still.
class ScriptedPolicy : public Policy {
public:
    explicit ScriptedPolicy(std::vector<robot::JointVector> actions) : actions_(std::move(actions)) {}
    void reset(const env::EpisodeConfig&) override { next_ = 0; }
    robot::JointVector act(const env::Observation&) override;

private:
    std::vector<robot::JointVector> actions_;
    std::size_t next_ = 0;
};

struct TrialRecord {
    int trial = 0;
    int steps = 0;
    env::Cause cause = env::Cause::Running;
    bool success = false;
    double trial_return = 0.0;  // undiscounted
    double effort_sum = 0.0;    // sum over executed steps of |tau_hat|
    double final_error = 0.0;
    double e95 = 0.0;                  // mean error over the last ceil(5%) of executed steps
    std::optional<double> e95_fixed;   // mean error over steps [0.95 N_tau, N_tau) that were executed
};

struct TestReport {
    env::TaskKind task = env::TaskKind::P2P;
    int n_trials = 0;
    int n_tau = 0;
    std::uint64_t seed = 0;
    int successes = 0;
    double p_scs = 0.0;
    double t_eff = 0.0;           // divided by n_trials * n_tau
    double t_eff_executed = 0.0;  // divided by executed steps
    std::optional<double> r_test;          // mean over successful trials
    std::optional<double> e95;             // mean over successful trials, executed-length window
    std::optional<double> e95_fixed;       // same with the fixed N_tau window
    std::vector<TrialRecord> trials;
};

/// Runs one noise-free rollout per config; max_steps of params is the trial horizon.
TestReport evaluate_configs(Policy& policy, const env::EnvParams& params, env::TaskKind task,
                            const std::vector<env::EpisodeConfig>& configs);

/// Trial i draws its episode from test-stage sampling seeded by derive_seed(seed, i).
TestReport evaluate(Policy& policy, const env::EnvParams& params, env::TaskKind task, int n_trials,
                    std::uint64_t seed);

/// Test-stage episodes for trials 0..n_trials-1, independent of evaluation order.
std::vector<env::EpisodeConfig> test_configs(const env::EnvParams& params, env::TaskKind task, int n_trials,
                                             std::uint64_t seed);

std::string report_json(const TestReport& report);
void write_trials_csv(std::ostream& os, const TestReport& report);
std::string training_metrics_json(const TrainingMetrics& m, std::size_t episodes);

}  // namespace symreach::metrics
