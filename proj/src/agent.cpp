#include "symreach/agent.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "symreach/binary_io.hpp"

namespace symreach::agent {

namespace {

constexpr char kMagic[4] = {'D', 'E', 'Z', 'C'};
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::MatrixXd stack(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
    Eigen::MatrixXd out(top.rows() + bottom.rows(), top.cols());
    out << top, bottom;
    return out;
}

std::vector<int> with_io(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> sizes{in};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(out);
    return sizes;
}

void require(bool ok, const std::string& field) {
    if (!ok) throw std::invalid_argument("train." + field + " out of range");
}

// Gradient of -mean Q(s, pi(s)) with respect to the actor parameters.
nn::Gradients policy_gradient(const Agent& agent, const Batch& batch_o, double& policy_loss) {
    const int act_dim = agent.actor.output_size();
    nn::ForwardCache actor_cache;
    nn::ForwardCache critic_cache;
    const Eigen::MatrixXd a = agent.actor.forward(batch_o.s, actor_cache);
    const Eigen::MatrixXd q = agent.critic.forward(stack(batch_o.s, a), critic_cache);
    const double n = static_cast<double>(batch_o.size());
    policy_loss = -q.mean();
    Eigen::MatrixXd input_grad;
    agent.critic.backward(critic_cache, Eigen::MatrixXd::Constant(1, batch_o.size(), -1.0 / n), &input_grad);
    return agent.actor.backward(actor_cache, input_grad.bottomRows(act_dim));
}

}  // namespace

std::size_t TrainConfig::demo_capacity(int partitions) const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(partitions) * static_cast<std::size_t>(n_demos) *
                                        static_cast<std::size_t>(n_tau));
}

void TrainConfig::validate() const {
    require(gamma > 0.0 && gamma <= 1.0, "gamma");
    require(sigma >= 0.0, "sigma");
    require(lambda_bc >= 0.0, "lambda_bc");
    require(n_demos >= 0, "n_demos");
    require(n_ep >= 0, "n_ep");
    require(episodes_per_epoch > 0, "episodes_per_epoch");
    require(n_up > 0, "n_up");
    require(n_tau > 0, "n_tau");
    require(batch_o > 0, "batch_o");
    require(batch_d > 0, "batch_d");
    require(buffer_o >= batch_o, "buffer_o");
    require(lr_actor > 0.0, "lr_actor");
    require(lr_critic > 0.0, "lr_critic");
    require(omega >= 0.0 && omega <= 1.0, "omega");
    for (int h : actor_hidden) require(h > 0, "actor_hidden");
    for (int h : critic_hidden) require(h > 0, "critic_hidden");
    require(final_layer_scale > 0.0, "final_layer_scale");
    require(target_min < target_max, "target_min");
}

Agent Agent::create(int obs_dim, int act_dim, double vel_limit, const TrainConfig& config, Rng& rng) {
    Agent a;
    a.actor = nn::Mlp::random(with_io(obs_dim, config.actor_hidden, act_dim), nn::OutputActivation::Tanh, vel_limit,
                              rng, config.final_layer_scale);
    a.critic = nn::Mlp::random(with_io(obs_dim + act_dim, config.critic_hidden, 1), nn::OutputActivation::Identity,
                               1.0, rng);
    a.target_actor = a.actor;
    a.target_critic = a.critic;
    a.actor_opt = nn::AdamState::for_network(a.actor, config.lr_actor);
    a.critic_opt = nn::AdamState::for_network(a.critic, config.lr_critic);
    return a;
}

Batch Batch::gather(const replay::ReplayBuffer& buffer, const std::vector<std::size_t>& indices) {
    Batch b;
    const auto n = static_cast<Eigen::Index>(indices.size());
    if (n == 0) return b;
    const auto& first = buffer.slot(indices.front());
    b.s.resize(first.s.size(), n);
    b.a.resize(first.a.size(), n);
    b.r.resize(n);
    b.s_next.resize(first.s.size(), n);
    b.zeta.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& t = buffer.slot(indices[static_cast<std::size_t>(i)]);
        b.s.col(i) = t.s;
        b.a.col(i) = t.a;
        b.r[i] = t.r;
        b.s_next.col(i) = t.s_next;
        b.zeta[i] = t.zeta ? 1.0 : 0.0;
    }
    return b;
}

Batch Batch::from(const std::vector<replay::Transition>& transitions) {
    replay::ReplayBuffer tmp(std::max<std::size_t>(1, transitions.size()), replay::BufferKind::Fifo);
    std::vector<std::size_t> idx;
    for (const auto& t : transitions) {
        idx.push_back(tmp.size());
        tmp.push(t);
    }
    return gather(tmp, idx);
}

robot::JointVector act(const nn::Mlp& actor, const Eigen::VectorXd& s, double sigma, double vel_limit, Rng& rng) {
    robot::JointVector a = actor.forward_one(s);
    if (sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, sigma);
        for (int j = 0; j < a.size(); ++j) a[j] += noise(rng);
    }
    return a.cwiseMax(-vel_limit).cwiseMin(vel_limit);
}

CriticLoss critic_loss(const Agent& agent, const Batch& batch, double gamma, double target_min,
                       double target_max) {
    if (batch.size() == 0) throw EmptyBatch("critic loss needs a nonempty batch");
    const Eigen::MatrixXd next_a = agent.target_actor.forward(batch.s_next);
    const Eigen::VectorXd next_q = agent.target_critic.forward(stack(batch.s_next, next_a)).row(0).transpose();
    const Eigen::VectorXd target =
        (batch.r.array() + gamma * (1.0 - batch.zeta.array()) * next_q.array()).cwiseMax(target_min).cwiseMin(target_max);

    nn::ForwardCache cache;
    const Eigen::VectorXd q = agent.critic.forward(stack(batch.s, batch.a), cache).row(0).transpose();
    const Eigen::VectorXd diff = q - target;
    const double n = static_cast<double>(batch.size());
    CriticLoss out;
    out.loss = diff.squaredNorm() / n;
    out.grads = agent.critic.backward(cache, (2.0 / n) * diff.transpose());
    return out;
}

Eigen::VectorXd q_filter_mask(const nn::Mlp& critic, const Eigen::MatrixXd& s_d, const Eigen::MatrixXd& a_d,
                              const Eigen::MatrixXd& a_hat) {
    const Eigen::RowVectorXd q_policy = critic.forward(stack(s_d, a_hat)).row(0);
    const Eigen::RowVectorXd q_demo = critic.forward(stack(s_d, a_d)).row(0);
    return (q_policy.array() < q_demo.array()).cast<double>().transpose();
}

ActorLoss actor_loss(const Agent& agent, const Batch& batch_o, const Batch* batch_d, double lambda_bc) {
    if (batch_o.size() == 0) throw EmptyBatch("actor loss needs a nonempty original batch");
    ActorLoss out;
    out.grads = policy_gradient(agent, batch_o, out.policy_loss);
    out.loss = out.policy_loss;
    if (batch_d == nullptr || batch_d->size() == 0) return out;

    nn::ForwardCache cache;
    const Eigen::MatrixXd a_hat = agent.actor.forward(batch_d->s, cache);
    const Eigen::VectorXd mask = q_filter_mask(agent.critic, batch_d->s, batch_d->a, a_hat);
    const Eigen::MatrixXd diff = batch_d->a - a_hat;
    const double n = static_cast<double>(batch_d->size());
    out.bc_loss = diff.colwise().squaredNorm().dot(mask.transpose()) / n;
    out.mask_rate = mask.mean();
    out.loss += lambda_bc * out.bc_loss;

    const Eigen::MatrixXd upstream = (-2.0 * lambda_bc / n) * (diff * mask.asDiagonal());
    nn::accumulate(out.grads, agent.actor.backward(cache, upstream));
    return out;
}

ActorLoss reference_actor_loss(const Agent& agent, const Batch& batch_o) {
    if (batch_o.size() == 0) throw EmptyBatch("actor loss needs a nonempty batch");
    ActorLoss out;
    out.grads = policy_gradient(agent, batch_o, out.policy_loss);
    out.loss = out.policy_loss;
    return out;
}

namespace {

template <ActorObjective Objective>
UpdateStats update_impl(Agent& agent, const Batch& batch_o, const Batch* batch_d, const TrainConfig& config) {
    UpdateStats stats;
    const CriticLoss c = critic_loss(agent, batch_o, config.gamma, config.target_min, config.target_max);
    nn::adam_step(agent.critic, c.grads, agent.critic_opt);
    stats.critic_loss = c.loss;

    ActorLoss a;
    if constexpr (Objective == ActorObjective::ReferenceDdpg) {
        a = reference_actor_loss(agent, batch_o);
    } else {
        a = actor_loss(agent, batch_o, batch_d, config.lambda_bc);
    }
    nn::adam_step(agent.actor, a.grads, agent.actor_opt);
    stats.actor_loss = a.loss;
    stats.bc_loss = a.bc_loss;
    stats.mask_rate = a.mask_rate;

    nn::polyak_update(agent.target_critic, agent.critic, config.omega);
    nn::polyak_update(agent.target_actor, agent.actor, config.omega);
    return stats;
}

template <ActorObjective Objective>
TrainingLog train_impl(const TrainConfig& config, const env::EnvParams& env_params, env::TaskKind task,
                       Buffers& buffers, Agent& agent, Rng& rng, const TrainHooks& hooks, int start_epoch) {
    env::EnvParams params = env_params;
    params.max_steps = config.n_tau;
    env::ReachEnv environment(params, task);
    const double vel_limit = params.robot.vel_limit;

    TrainingLog log;
    int pending = 0;  // steps or episodes since the last update round

    auto run_updates = [&](int count, EpisodeLog& acc, int& done) {
        if (buffers.original.size() < config.batch_o) return;
        for (int u = 0; u < count; ++u) {
            const Batch batch_o = Batch::gather(buffers.original, buffers.original.sample_indices(config.batch_o, rng));
            UpdateStats s;
            if constexpr (Objective == ActorObjective::CombinedWithCloning) {
                if (!buffers.demo.empty()) {
                    const Batch batch_d = Batch::gather(buffers.demo, buffers.demo.sample_indices(config.batch_d, rng));
                    s = update_impl<Objective>(agent, batch_o, &batch_d, config);
                } else {
                    s = update_impl<Objective>(agent, batch_o, nullptr, config);
                }
            } else {
                s = update_impl<Objective>(agent, batch_o, nullptr, config);
            }
            acc.critic_loss += s.critic_loss;
            acc.actor_loss += s.actor_loss;
            acc.bc_loss += s.bc_loss;
            acc.mask_rate += s.mask_rate;
            ++done;
        }
    };

    for (int epoch = start_epoch; epoch < config.n_ep; ++epoch) {
        for (int e = 0; e < config.episodes_per_epoch; ++e) {
            EpisodeLog entry;
            entry.episode = epoch * config.episodes_per_epoch + e;
            int updates = 0;

            const env::EpisodeConfig episode = env::sample_episode(params, env::Stage::Train, task, rng);
            env::Observation obs = environment.reset(episode);
            double discount = 1.0;
            while (!environment.done()) {
                const Eigen::VectorXd s = obs.flatten();
                const robot::JointVector a = act(agent.actor, s, config.sigma, vel_limit, rng);
                const env::StepOutcome out = environment.step(a);
                replay::Transition t;
                t.s = s;
                t.a = a;
                t.r = out.reward;
                t.s_next = out.obs_next.flatten();
                t.zeta = out.zeta;
                t.partition = static_cast<std::uint8_t>(env::sector_of(
                    params.workspace, robot::forward_kinematics(params.robot, obs.q).end_effector()));
                buffers.original.push(std::move(t));

                entry.episode_return += discount * out.reward;
                discount *= config.gamma;
                ++entry.steps;
                entry.cause = out.cause;
                obs = out.obs_next;

                if (config.granularity == UpdateGranularity::Steps && ++pending >= config.n_up) {
                    pending = 0;
                    run_updates(config.n_up, entry, updates);
                }
            }
            if (config.granularity == UpdateGranularity::Episodes && ++pending >= config.n_up) {
                pending = 0;
                run_updates(1, entry, updates);
            }

            if (updates > 0) {
                entry.critic_loss /= updates;
                entry.actor_loss /= updates;
                entry.bc_loss /= updates;
                entry.mask_rate /= updates;
            } else {
                entry.critic_loss = entry.actor_loss = entry.bc_loss = entry.mask_rate = kNaN;
            }
            if (hooks.on_episode) hooks.on_episode(entry);
            log.episodes.push_back(entry);
        }
        if (hooks.on_epoch) hooks.on_epoch(epoch + 1, agent);
    }
    return log;
}

}  // namespace

UpdateStats update(Agent& agent, const Batch& batch_o, const Batch* batch_d, const TrainConfig& config) {
    return update_impl<ActorObjective::CombinedWithCloning>(agent, batch_o, batch_d, config);
}

std::vector<double> TrainingLog::returns() const {
    std::vector<double> r;
    r.reserve(episodes.size());
    for (const auto& e : episodes) r.push_back(e.episode_return);
    return r;
}

void write_training_csv(std::ostream& os, const TrainingLog& log) {
    os << "episode,steps,return,cause,critic_loss,actor_loss,bc_loss,mask_rate\n";
    char line[512];
    for (const auto& e : log.episodes) {
        std::snprintf(line, sizeof line, "%d,%d,%.17g,%s,%.17g,%.17g,%.17g,%.17g\n", e.episode, e.steps,
                      e.episode_return, std::string(env::to_string(e.cause)).c_str(), e.critic_loss, e.actor_loss,
                      e.bc_loss, e.mask_rate);
        os << line;
    }
}

TrainingLog train(const TrainConfig& config, const env::EnvParams& env_params, env::TaskKind task,
                  Buffers& buffers, Agent& agent, Rng& rng, const TrainHooks& hooks, ActorObjective objective,
                  int start_epoch) {
    config.validate();
    if (objective == ActorObjective::ReferenceDdpg)
        return train_impl<ActorObjective::ReferenceDdpg>(config, env_params, task, buffers, agent, rng, hooks,
                                                         start_epoch);
    return train_impl<ActorObjective::CombinedWithCloning>(config, env_params, task, buffers, agent, rng, hooks,
                                                           start_epoch);
}

void save_checkpoint(const std::filesystem::path& path, const Agent& agent, int epochs_done) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError(FormatErrorKind::Io, "cannot open " + path.string() + " for writing");
    LeWriter w(os);
    w.bytes(kMagic, 4);
    w.u32(kCheckpointVersion);
    w.u64(static_cast<std::uint64_t>(epochs_done));
    nn::write_mlp(w, agent.actor);
    nn::write_mlp(w, agent.critic);
    nn::write_mlp(w, agent.target_actor);
    nn::write_mlp(w, agent.target_critic);
    nn::write_adam(w, agent.actor_opt);
    nn::write_adam(w, agent.critic_opt);
    if (!os) throw FormatError(FormatErrorKind::Io, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError(FormatErrorKind::Io, "cannot open " + path.string());
    LeReader r(is);
    char magic[4];
    r.bytes(magic, 4);
    if (!std::equal(magic, magic + 4, kMagic))
        throw FormatError(FormatErrorKind::BadMagic, "BadMagic: " + path.string() + " is not a checkpoint file");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError(FormatErrorKind::VersionMismatch,
                          "VersionMismatch: file version " + std::to_string(version) + ", reader supports version " +
                              std::to_string(kCheckpointVersion));
    Checkpoint c;
    c.epochs_done = static_cast<int>(r.u64());
    c.agent.actor = nn::read_mlp(r);
    c.agent.critic = nn::read_mlp(r);
    c.agent.target_actor = nn::read_mlp(r);
    c.agent.target_critic = nn::read_mlp(r);
    if (!c.agent.target_actor.same_shape(c.agent.actor) || !c.agent.target_critic.same_shape(c.agent.critic))
        throw FormatError(FormatErrorKind::BadMagic, "checkpoint target networks do not match online networks");
    c.agent.actor_opt = nn::read_adam(r, c.agent.actor);
    c.agent.critic_opt = nn::read_adam(r, c.agent.critic);
    return c;
}

}  // namespace symreach::agent
