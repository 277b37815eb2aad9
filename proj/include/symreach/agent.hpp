#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "symreach/env.hpp"
#include "symreach/nn.hpp"
#include "symreach/replay.hpp"

namespace symreach::agent {

enum class UpdateGranularity { Steps, Episodes };

struct TrainConfig {
    double gamma = 0.99;
    double sigma = 0.1;
    double lambda_bc = 1.0;
    int n_demos = 80;
    int n_ep = 250;
    int episodes_per_epoch = 10;
    int n_up = 20;
    int n_tau = 400;
    std::size_t batch_o = 100;
    std::size_t batch_d = 100;
    std::size_t buffer_o = 1'000'000;
    double lr_actor = 1e-3;
    double lr_critic = 1e-3;
    double omega = 0.995;
    std::vector<int> actor_hidden{128, 512, 128};
    std::vector<int> critic_hidden{256, 1024, 256};
    double final_layer_scale = 0.1;
    UpdateGranularity granularity = UpdateGranularity::Steps;
    // Bounds on the TD target; infinite means no clipping.
    double target_min = -std::numeric_limits<double>::infinity();
    double target_max = std::numeric_limits<double>::infinity();

    int total_episodes() const { return n_ep * episodes_per_epoch; }
    /// Worst case for M-fold duplication of n_demos full-length episodes.
    std::size_t demo_capacity(int partitions) const;
    void validate() const;
};

struct Agent {
    nn::Mlp actor;
    nn::Mlp critic;
    nn::Mlp target_actor;
    nn::Mlp target_critic;
    nn::AdamState actor_opt;
    nn::AdamState critic_opt;

    /// Fresh networks with targets initialised as exact copies.
    static Agent create(int obs_dim, int act_dim, double vel_limit, const TrainConfig& config, Rng& rng);
};

/// Column-major training batch.
struct Batch {
    Eigen::MatrixXd s;
    Eigen::MatrixXd a;
    Eigen::VectorXd r;
    Eigen::MatrixXd s_next;
    Eigen::VectorXd zeta;

    Eigen::Index size() const { return s.cols(); }
    static Batch gather(const replay::ReplayBuffer& buffer, const std::vector<std::size_t>& indices);
    static Batch from(const std::vector<replay::Transition>& transitions);
};

class EmptyBatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Gaussian exploration around the deterministic policy, clamped to +-vel_limit.
robot::JointVector act(const nn::Mlp& actor, const Eigen::VectorXd& s, double sigma, double vel_limit, Rng& rng);

struct CriticLoss {
    double loss = 0.0;
    nn::Gradients grads;
};

/// Mean squared TD error using the stored actions and frozen target networks.
/// The target is clamped to [target_min, target_max].
CriticLoss critic_loss(const Agent& agent, const Batch& batch, double gamma,
                       double target_min = -std::numeric_limits<double>::infinity(),
                       double target_max = std::numeric_limits<double>::infinity());

/// 1 where the critic strictly prefers the demonstrated action over the policy action.
Eigen::VectorXd q_filter_mask(const nn::Mlp& critic, const Eigen::MatrixXd& s_d, const Eigen::MatrixXd& a_d,
                              const Eigen::MatrixXd& a_hat);

struct ActorLoss {
    double loss = 0.0;           // policy term + lambda * bc
    double policy_loss = 0.0;    // -mean Q(s, pi(s))
    double bc_loss = 0.0;        // unweighted, masked
    double mask_rate = 0.0;
    nn::Gradients grads;
};

/**
 * Combined actor objective. The mask is a constant per sample and the critic
 * is frozen, so gradients only reach the actor. A missing or empty demo batch
 * drops the cloning term.
 */
ActorLoss actor_loss(const Agent& agent, const Batch& batch_o, const Batch* batch_d, double lambda_bc);

/// Plain deterministic-policy-gradient actor loss, kept free of any cloning code.
ActorLoss reference_actor_loss(const Agent& agent, const Batch& batch_o);

struct UpdateStats {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double bc_loss = 0.0;
    double mask_rate = 0.0;
};

/// One critic step, one actor step, then Polyak updates of both targets.
UpdateStats update(Agent& agent, const Batch& batch_o, const Batch* batch_d, const TrainConfig& config);

struct EpisodeLog {
    int episode = 0;
    int steps = 0;
    double episode_return = 0.0;  // discounted with gamma
    env::Cause cause = env::Cause::Running;
    double critic_loss = 0.0;  // NaN when no update ran during the episode
    double actor_loss = 0.0;
    double bc_loss = 0.0;
    double mask_rate = 0.0;
};

struct TrainingLog {
    std::vector<EpisodeLog> episodes;

    std::vector<double> returns() const;
};

void write_training_csv(std::ostream& os, const TrainingLog& log);

struct Buffers {
    replay::ReplayBuffer original;
    replay::ReplayBuffer demo;
};

enum class ActorObjective { CombinedWithCloning, ReferenceDdpg };

struct TrainHooks {
    std::function<void(const EpisodeLog&)> on_episode;
    std::function<void(int epochs_done, const Agent&)> on_epoch;
};

/**
 * Off-policy training loop. Experience is collected with exploration noise
 * into the original buffer; with step granularity every n_up environment
 * steps trigger n_up updates, with episode granularity every n_up episodes
 * trigger one update.
 */
TrainingLog train(const TrainConfig& config, const env::EnvParams& env_params, env::TaskKind task,
                  Buffers& buffers, Agent& agent, Rng& rng, const TrainHooks& hooks = {},
                  ActorObjective objective = ActorObjective::CombinedWithCloning, int start_epoch = 0);

constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    Agent agent;
    int epochs_done = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Agent& agent, int epochs_done);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace symreach::agent
