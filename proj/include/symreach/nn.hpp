#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "symreach/binary_io.hpp"
#include "symreach/random.hpp"

namespace symreach::nn {

enum class OutputActivation : std::uint8_t { Identity = 0, Tanh = 1 };

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
};

/// Per-layer parameter gradients, shaped like Mlp::layers().
using Gradients = std::vector<DenseLayer>;

class DimensionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Activations retained by a forward pass for the matching backward pass.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> activations;  // layer inputs; activations[0] is the batch
    std::vector<Eigen::MatrixXd> pre_activations;
    Eigen::MatrixXd output;
};

/**
 * Dense network with ReLU hidden units. Batches are column-major: each
 * column of the input matrix is one sample.
 *
 * A Tanh output is scaled by output_scale so an actor maps straight into
 * [-vel_limit, vel_limit].
 */
class Mlp {
public:
    Mlp() = default;
    Mlp(std::vector<int> layer_sizes, OutputActivation output, double output_scale = 1.0);

    /// Uniform(+-1/sqrt(fan_in)) init; the last layer is further multiplied by final_layer_scale.
    static Mlp random(std::vector<int> layer_sizes, OutputActivation output, double output_scale, Rng& rng,
                      double final_layer_scale = 1.0);

    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    const std::vector<int>& layer_sizes() const { return sizes_; }
    OutputActivation output_activation() const { return output_; }
    double output_scale() const { return output_scale_; }

    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, ForwardCache& cache) const;
    Eigen::VectorXd forward_one(const Eigen::VectorXd& x) const;

    /// Reverse-mode gradients for upstream d(loss)/d(output); optionally
    /// writes d(loss)/d(input) into input_grad.
    Gradients backward(const ForwardCache& cache, const Eigen::MatrixXd& output_grad,
                       Eigen::MatrixXd* input_grad = nullptr) const;

    std::size_t parameter_count() const;
    Eigen::VectorXd flat_parameters() const;
    void set_flat_parameters(const Eigen::VectorXd& flat);

    bool same_shape(const Mlp& other) const { return sizes_ == other.sizes_; }

private:
    std::vector<int> sizes_;
    OutputActivation output_ = OutputActivation::Identity;
    double output_scale_ = 1.0;
    std::vector<DenseLayer> layers_;
};

Gradients zero_gradients(const Mlp& net);
Eigen::VectorXd flatten(const Gradients& grads);
void accumulate(Gradients& into, const Gradients& from);

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    Gradients first_moment;
    Gradients second_moment;

    static AdamState for_network(const Mlp& net, double learning_rate);
};

/// Bias-corrected adaptive-moment descent step.
void adam_step(Mlp& net, const Gradients& grads, AdamState& state);

/// target <- omega * target + (1 - omega) * online
void polyak_update(Mlp& target, const Mlp& online, double omega);

void write_mlp(LeWriter& w, const Mlp& net);
Mlp read_mlp(LeReader& r);
void write_adam(LeWriter& w, const AdamState& state);
AdamState read_adam(LeReader& r, const Mlp& net);

}  // namespace symreach::nn
