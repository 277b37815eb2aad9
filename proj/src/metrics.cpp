#include "symreach/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

namespace symreach::metrics {

namespace {

double mean_of(std::vector<double>::const_iterator first, std::vector<double>::const_iterator last) {
    const auto n = std::distance(first, last);
    return std::accumulate(first, last, 0.0) / static_cast<double>(n);
}

nlohmann::json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::vector<double> moving_average(const std::vector<double>& values, int window) {
    if (window <= 0) throw std::invalid_argument("moving-average window must be positive");
    std::vector<double> out(values.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        sum += values[i];
        if (i >= static_cast<std::size_t>(window)) sum -= values[i - static_cast<std::size_t>(window)];
        out[i] = sum / static_cast<double>(std::min<std::size_t>(i + 1, static_cast<std::size_t>(window)));
    }
    return out;
}

TrainingMetrics training_metrics(const std::vector<double>& returns) {
    if (returns.size() < 10)
        throw CurveTooShort("training curve has " + std::to_string(returns.size()) + " episodes, need at least 10");
    const auto k = static_cast<std::ptrdiff_t>((returns.size() + 9) / 10);
    TrainingMetrics m;
    m.r10 = mean_of(returns.begin(), returns.begin() + k);
    m.r90 = mean_of(returns.end() - k, returns.end());
    m.ir = m.r90 - m.r10;
    const auto smooth = moving_average(returns, kSmoothingWindow);
    for (std::size_t i = 0; i < smooth.size(); ++i) {
        if (smooth[i] > 0.5 * m.r90) {
            m.t50 = static_cast<int>(i);
            break;
        }
    }
    return m;
}

robot::JointVector ActorPolicy::act(const env::Observation& obs) {
    return actor_.forward_one(obs.flatten());
}

robot::JointVector ScriptedPolicy::act(const env::Observation&) {
    if (next_ < actions_.size()) return actions_[next_++];
    return robot::JointVector::Zero();
}

TestReport evaluate_configs(Policy& policy, const env::EnvParams& params, env::TaskKind task,
                            const std::vector<env::EpisodeConfig>& configs) {
    TestReport report;
    report.task = task;
    report.n_trials = static_cast<int>(configs.size());
    report.n_tau = params.max_steps;
    env::ReachEnv environment(params, task);
    const double vel_limit = params.robot.vel_limit;
    const int fixed_start = static_cast<int>(std::ceil(0.95 * params.max_steps));

    double effort_total = 0.0;
    long long executed = 0;
    double return_sum = 0.0;
    double e95_sum = 0.0;
    double e95_fixed_sum = 0.0;
    int e95_fixed_count = 0;

    for (std::size_t i = 0; i < configs.size(); ++i) {
        TrialRecord rec;
        rec.trial = static_cast<int>(i);
        policy.reset(configs[i]);
        env::Observation obs = environment.reset(configs[i]);
        std::vector<double> errors;
        while (!environment.done()) {
            const robot::JointVector a = policy.act(obs).cwiseMax(-vel_limit).cwiseMin(vel_limit);
            const env::StepOutcome out = environment.step(a);
            rec.trial_return += out.reward;
            rec.effort_sum += out.tau_hat.norm();
            errors.push_back(out.err_norm);
            rec.cause = out.cause;
            obs = out.obs_next;
        }
        rec.steps = static_cast<int>(errors.size());
        rec.success = rec.cause == env::Cause::Reached;
        rec.final_error = errors.back();

        const auto window = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.05 * rec.steps)));
        rec.e95 = mean_of(errors.end() - static_cast<std::ptrdiff_t>(window), errors.end());
        if (rec.steps > fixed_start)
            rec.e95_fixed = mean_of(errors.begin() + fixed_start, errors.end());

        effort_total += rec.effort_sum;
        executed += rec.steps;
        if (rec.success) {
            ++report.successes;
            return_sum += rec.trial_return;
            e95_sum += rec.e95;
            if (rec.e95_fixed) {
                e95_fixed_sum += *rec.e95_fixed;
                ++e95_fixed_count;
            }
        }
        report.trials.push_back(rec);
    }

    if (report.n_trials > 0) {
        report.p_scs = static_cast<double>(report.successes) / report.n_trials;
        report.t_eff = effort_total / (static_cast<double>(report.n_trials) * report.n_tau);
        report.t_eff_executed = effort_total / static_cast<double>(executed);
    }
    if (report.successes > 0) {
        report.r_test = return_sum / report.successes;
        report.e95 = e95_sum / report.successes;
    }
    if (e95_fixed_count > 0) report.e95_fixed = e95_fixed_sum / e95_fixed_count;
    return report;
}

std::vector<env::EpisodeConfig> test_configs(const env::EnvParams& params, env::TaskKind task, int n_trials,
                                             std::uint64_t seed) {
    const env::Stage stage = task == env::TaskKind::P2P ? env::Stage::TestP2P : env::Stage::TestP2PO;
    std::vector<env::EpisodeConfig> configs;
    for (int i = 0; i < n_trials; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        configs.push_back(env::sample_episode(params, stage, task, rng));
    }
    return configs;
}

TestReport evaluate(Policy& policy, const env::EnvParams& params, env::TaskKind task, int n_trials,
                    std::uint64_t seed) {
    if (n_trials <= 0) throw std::invalid_argument("n_trials must be positive");
    TestReport report = evaluate_configs(policy, params, task, test_configs(params, task, n_trials, seed));
    report.seed = seed;
    return report;
}

std::string report_json(const TestReport& report) {
    nlohmann::ordered_json j;
    j["task"] = std::string(env::to_string(report.task));
    j["n_trials"] = report.n_trials;
    j["n_tau"] = report.n_tau;
    j["seed"] = report.seed;
    j["successes"] = report.successes;
    j["p_scs"] = report.p_scs;
    j["t_eff"] = report.t_eff;
    j["t_eff_executed"] = report.t_eff_executed;
    j["r_test"] = optional_number(report.r_test);
    j["e95"] = optional_number(report.e95);
    j["e95_fixed_window"] = optional_number(report.e95_fixed);
    return j.dump(2) + "\n";
}

void write_trials_csv(std::ostream& os, const TestReport& report) {
    os << "trial,steps,cause,success,return,effort_sum,final_error,e95,e95_fixed_window\n";
    for (const auto& t : report.trials) {
        os << t.trial << ',' << t.steps << ',' << env::to_string(t.cause) << ',' << (t.success ? 1 : 0) << ','
           << format_double(t.trial_return) << ',' << format_double(t.effort_sum) << ','
           << format_double(t.final_error) << ',' << format_double(t.e95) << ','
           << (t.e95_fixed ? format_double(*t.e95_fixed) : std::string()) << '\n';
    }
}

std::string training_metrics_json(const TrainingMetrics& m, std::size_t episodes) {
    nlohmann::ordered_json j;
    j["episodes"] = episodes;
    j["r10"] = m.r10;
    j["r90"] = m.r90;
    j["ir"] = m.ir;
    j["t50"] = m.t50 ? nlohmann::json(*m.t50) : nlohmann::json(nullptr);
    j["t50_window"] = kSmoothingWindow;
    return j.dump(2) + "\n";
}

}  // namespace symreach::metrics
