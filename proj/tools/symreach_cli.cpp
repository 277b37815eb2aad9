// Command-line front end: demo | train | eval.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "symreach/agent.hpp"
#include "symreach/config.hpp"
#include "symreach/demo.hpp"
#include "symreach/metrics.hpp"
#include "symreach/replay.hpp"

namespace fs = std::filesystem;
using namespace symreach;

namespace {

struct CommonFlags {
    std::string config_file;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    std::optional<std::string> task;
    std::optional<int> n_demos;
    std::optional<double> lambda_bc;
    std::optional<int> n_trials;
    std::optional<std::string> demo_file;
    std::optional<std::string> checkpoint;
    std::vector<std::string> overrides;
    int repeats = 1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_file, "INI config file")->check(CLI::ExistingFile);
    cmd->add_option("--preset", f.preset, "named preset applied before the config file")
        ->check(CLI::IsMember(config::preset_names()));
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--out-dir", f.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--task", f.task, "p2p or p2p-o")->check(CLI::IsMember({"p2p", "p2p-o"}));
    cmd->add_option("--set", f.overrides, "section.key=value override (repeatable)");
    cmd->add_option("--repeats", f.repeats, "run seeds seed..seed+k-1 on worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
}

config::RunConfig resolve(const CommonFlags& f) {
    config::RunConfig c;
    if (!f.preset.empty()) config::apply_preset(c, f.preset);
    if (!f.config_file.empty()) config::load_file(c, f.config_file);
    if (f.seed) c.seed = *f.seed;
    if (f.task) c.task = env::parse_task(*f.task);
    if (f.n_demos) c.train.n_demos = *f.n_demos;
    if (f.lambda_bc) c.train.lambda_bc = *f.lambda_bc;
    if (f.n_trials) c.n_trials = *f.n_trials;
    if (f.demo_file) c.paths.demo_file = *f.demo_file;
    if (f.checkpoint) c.paths.checkpoint = *f.checkpoint;
    config::apply_overrides(c, f.overrides);
    c.validate();
    return c;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << text;
}

void prepare_out_dir(const fs::path& dir, const config::RunConfig& c) {
    fs::create_directories(dir);
    write_text(dir / "resolved_config.ini", config::snapshot(c));
}

void run_demo(const config::RunConfig& c, const fs::path& dir, std::ostream& log) {
    prepare_out_dir(dir, c);
    const env::EnvParams params = c.env_params();
    replay::ReplayBuffer demo_buffer(c.train.demo_capacity(params.workspace.partitions), replay::BufferKind::AppendOnly);
    replay::ReplayBuffer original(c.train.demo_capacity(params.workspace.partitions), replay::BufferKind::Fifo);
    Rng rng(c.seed);
    const demo::DemoStats stats = demo::record_demos(params, c.task, c.train.n_demos, demo_buffer, original, rng, c.demo);
    const fs::path file = c.paths.demo_file.empty() ? dir / "demos.dez" : fs::path(c.paths.demo_file);
    demo_buffer.save(file);

    nlohmann::ordered_json j;
    j["task"] = std::string(env::to_string(c.task));
    j["seed"] = c.seed;
    j["episodes"] = stats.episodes;
    j["stored_episodes"] = stats.stored_episodes;
    j["transitions"] = stats.transitions;
    j["stored_transitions_per_buffer"] = stats.stored_transitions;
    j["reached"] = stats.reached;
    j["timeout"] = stats.timeout;
    j["collision"] = stats.collision;
    j["left_partition"] = stats.left_partition;
    j["episode_lengths"] = stats.episode_lengths;
    write_text(dir / "demo_stats.json", j.dump(2) + "\n");
    log << "demo: " << stats.episodes << " episodes, " << stats.reached << " reached, " << stats.stored_transitions
        << " transitions per buffer -> " << file.string() << "\n";
}

agent::Buffers load_buffers(const config::RunConfig& c) {
    const int partitions = c.env.workspace.partitions;
    agent::Buffers b{replay::ReplayBuffer(c.train.buffer_o, replay::BufferKind::Fifo),
                     replay::ReplayBuffer(c.train.demo_capacity(partitions), replay::BufferKind::AppendOnly)};
    if (c.train.n_demos == 0) return b;
    if (c.paths.demo_file.empty())
        throw config::ConfigError("train.n_demos > 0 requires a demo file (--demo-file or paths.demo_file)");
    if (!fs::exists(c.paths.demo_file)) throw config::ConfigError("demo file not found: " + c.paths.demo_file);
    b.demo = replay::ReplayBuffer::load(c.paths.demo_file, c.train.demo_capacity(partitions),
                                        replay::BufferKind::AppendOnly);
    for (std::size_t i = 0; i < b.demo.size(); ++i) b.original.push(b.demo[i]);
    return b;
}

void run_train(const config::RunConfig& c, const fs::path& dir, std::ostream& log) {
    prepare_out_dir(dir, c);
    const env::EnvParams params = c.env_params();
    agent::Buffers buffers = load_buffers(c);
    Rng rng(c.seed);

    agent::Agent ag;
    int start_epoch = 0;
    if (!c.paths.checkpoint.empty()) {
        agent::Checkpoint cp = agent::load_checkpoint(c.paths.checkpoint);
        ag = std::move(cp.agent);
        start_epoch = cp.epochs_done;
        rng.seed(derive_seed(c.seed, static_cast<std::uint64_t>(start_epoch)));
    } else {
        ag = agent::Agent::create(env::observation_dim(c.task), robot::kDof, params.robot.vel_limit, c.train, rng);
    }

    agent::TrainHooks hooks;
    hooks.on_epoch = [&](int epochs_done, const agent::Agent& a) {
        agent::save_checkpoint(dir / "checkpoint_latest.dezc", a, epochs_done);
    };
    const agent::TrainingLog tlog = agent::train(c.train, params, c.task, buffers, ag, rng, hooks,
                                                 agent::ActorObjective::CombinedWithCloning, start_epoch);
    agent::save_checkpoint(dir / "checkpoint.dezc", ag, c.train.n_ep);

    std::ofstream csv(dir / "training.csv", std::ios::binary);
    agent::write_training_csv(csv, tlog);
    if (tlog.episodes.size() >= 10) {
        const auto m = metrics::training_metrics(tlog.returns());
        write_text(dir / "metrics.json", metrics::training_metrics_json(m, tlog.episodes.size()));
        log << "train: " << tlog.episodes.size() << " episodes, R10 " << m.r10 << ", R90 " << m.r90 << ", IR "
            << m.ir << "\n";
    } else {
        log << "train: " << tlog.episodes.size() << " episodes (too few for training metrics)\n";
    }
}

void run_eval(const config::RunConfig& c, const std::string& policy_name, const fs::path& dir, std::ostream& log) {
    prepare_out_dir(dir, c);
    const env::EnvParams params = c.env_params();
    std::unique_ptr<metrics::Policy> policy;
    if (policy_name == "agent") {
        if (c.paths.checkpoint.empty()) throw config::ConfigError("--policy agent needs --checkpoint");
        agent::Checkpoint cp = agent::load_checkpoint(c.paths.checkpoint);
        if (cp.agent.actor.input_size() != env::observation_dim(c.task))
            throw config::ConfigError("checkpoint actor input size does not match task " +
                                      std::string(env::to_string(c.task)));
        policy = std::make_unique<metrics::ActorPolicy>(std::move(cp.agent.actor));
    } else if (policy_name == "pid") {
        policy = std::make_unique<metrics::PidPolicy>(params, c.demo.gains, c.demo.plan);
    } else {
        policy = std::make_unique<metrics::ZeroPolicy>();
    }
    const metrics::TestReport report = metrics::evaluate(*policy, params, c.task, c.n_trials, c.seed);
    write_text(dir / "test_report.json", metrics::report_json(report));
    std::ofstream csv(dir / "test_trials.csv", std::ios::binary);
    metrics::write_trials_csv(csv, report);
    log << "eval: P_scs " << report.p_scs << " over " << report.n_trials << " trials\n";
}

// Runs `body` once per seed; repeats land in <out-dir>/seed_<s> on separate threads.
int fan_out(const CommonFlags& f, const std::function<void(const config::RunConfig&, const fs::path&, std::ostream&)>& body) {
    const config::RunConfig base = resolve(f);
    if (f.repeats == 1) {
        body(base, f.out_dir, std::cout);
        return 0;
    }
    std::mutex io;
    int failures = 0;
    std::vector<std::thread> workers;
    for (int r = 0; r < f.repeats; ++r) {
        workers.emplace_back([&, r] {
            config::RunConfig c = base;
            c.seed = base.seed + static_cast<std::uint64_t>(r);
            std::ostringstream log;
            try {
                body(c, fs::path(f.out_dir) / ("seed_" + std::to_string(c.seed)), log);
            } catch (const std::exception& e) {
                log << "seed " << c.seed << ": error: " << e.what() << "\n";
                std::lock_guard lock(io);
                ++failures;
            }
            std::lock_guard lock(io);
            std::cout << log.str();
        });
    }
    for (auto& w : workers) w.join();
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"symmetric-partition demonstration RL for a 4-DoF reaching arm"};
    app.require_subcommand(1);

    CommonFlags demo_flags;
    auto* demo_cmd = app.add_subcommand("demo", "record PID demonstrations with quarter-turn duplication");
    add_common(demo_cmd, demo_flags);
    demo_cmd->add_option("--n-demos", demo_flags.n_demos, "number of recorded episodes")->check(CLI::NonNegativeNumber);
    demo_cmd->add_option("--out,--demo-file", demo_flags.demo_file, "demo buffer file to write");

    CommonFlags train_flags;
    auto* train_cmd = app.add_subcommand("train", "train an agent");
    add_common(train_cmd, train_flags);
    train_cmd->add_option("--n-demos", train_flags.n_demos, "demonstration episodes (0 disables)")
        ->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--lambda-bc", train_flags.lambda_bc, "behaviour-cloning weight");
    train_cmd->add_option("--demo-file", train_flags.demo_file, "demo buffer written by the demo command");
    train_cmd->add_option("--checkpoint", train_flags.checkpoint, "resume from this checkpoint");

    CommonFlags eval_flags;
    std::string policy = "agent";
    auto* eval_cmd = app.add_subcommand("eval", "noise-free test rollouts");
    add_common(eval_cmd, eval_flags);
    eval_cmd->add_option("--checkpoint", eval_flags.checkpoint, "trained checkpoint");
    eval_cmd->add_option("--n-trials", eval_flags.n_trials, "number of test trials")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--policy", policy, "agent, pid or zero")
        ->check(CLI::IsMember({"agent", "pid", "zero"}))
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*demo_cmd) {
            if (demo_flags.repeats > 1 && demo_flags.demo_file)
                throw config::ConfigError("--repeats writes one demo file per seed directory; drop --out");
            return fan_out(demo_flags, run_demo);
        }
        if (*train_cmd) return fan_out(train_flags, run_train);
        return fan_out(eval_flags, [&](const config::RunConfig& c, const fs::path& dir, std::ostream& log) {
            run_eval(c, policy, dir, log);
        });
    } catch (const config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
