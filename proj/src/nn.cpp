#include "symreach/nn.hpp"

#include <cmath>
#include <string>

namespace symreach::nn {

namespace {

void check_sizes(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("an MLP needs at least input and output sizes");
    for (int s : sizes)
        if (s <= 0) throw std::invalid_argument("layer sizes must be positive");
}

void write_matrix(LeWriter& w, const Eigen::MatrixXd& m) {
    // column-major, matching Eigen's storage
    for (Eigen::Index i = 0; i < m.size(); ++i) w.f64(m.data()[i]);
}

void read_matrix(LeReader& r, Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
}

void write_layers(LeWriter& w, const std::vector<DenseLayer>& layers) {
    for (const auto& l : layers) {
        write_matrix(w, l.weight);
        write_matrix(w, l.bias);
    }
}

void read_layers(LeReader& r, std::vector<DenseLayer>& layers) {
    for (auto& l : layers) {
        read_matrix(r, l.weight);
        Eigen::MatrixXd b(l.bias.size(), 1);
        read_matrix(r, b);
        l.bias = b.col(0);
    }
}

}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes, OutputActivation output, double output_scale)
    : sizes_(std::move(layer_sizes)), output_(output), output_scale_(output_scale) {
    check_sizes(sizes_);
    for (std::size_t i = 0; i + 1 < sizes_.size(); ++i)
        layers_.push_back({Eigen::MatrixXd::Zero(sizes_[i + 1], sizes_[i]), Eigen::VectorXd::Zero(sizes_[i + 1])});
}

Mlp Mlp::random(std::vector<int> layer_sizes, OutputActivation output, double output_scale, Rng& rng,
                double final_layer_scale) {
    Mlp net(std::move(layer_sizes), output, output_scale);
    for (std::size_t l = 0; l < net.layers_.size(); ++l) {
        auto& layer = net.layers_[l];
        double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
        if (l + 1 == net.layers_.size()) bound *= final_layer_scale;
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = dist(rng);
    }
    return net;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
    ForwardCache cache;
    return forward(x, cache);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, ForwardCache& cache) const {
    if (x.rows() != input_size())
        throw DimensionMismatch("MLP expects " + std::to_string(input_size()) + " inputs, got " +
                                std::to_string(x.rows()));
    cache.activations.assign(1, x);
    cache.pre_activations.clear();
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        Eigen::MatrixXd z = layer.weight * cache.activations.back();
        z.colwise() += layer.bias;
        cache.pre_activations.push_back(z);
        if (l + 1 < layers_.size()) {
            cache.activations.push_back(z.cwiseMax(0.0));
        } else if (output_ == OutputActivation::Tanh) {
            cache.output = output_scale_ * z.array().tanh().matrix();
        } else {
            cache.output = z;
        }
    }
    return cache.output;
}

Eigen::VectorXd Mlp::forward_one(const Eigen::VectorXd& x) const { return forward(Eigen::MatrixXd(x)).col(0); }

Gradients Mlp::backward(const ForwardCache& cache, const Eigen::MatrixXd& output_grad,
                        Eigen::MatrixXd* input_grad) const {
    if (output_grad.rows() != output_size() || output_grad.cols() != cache.output.cols())
        throw DimensionMismatch("upstream gradient shape does not match the cached output");
    Gradients grads(layers_.size());
    Eigen::MatrixXd delta;
    if (output_ == OutputActivation::Tanh) {
        const Eigen::ArrayXXd t = cache.pre_activations.back().array().tanh();
        delta = (output_grad.array() * output_scale_ * (1.0 - t.square())).matrix();
    } else {
        delta = output_grad;
    }
    for (std::size_t l = layers_.size(); l-- > 0;) {
        grads[l].weight = delta * cache.activations[l].transpose();
        grads[l].bias = delta.rowwise().sum();
        if (l == 0 && input_grad == nullptr) break;
        Eigen::MatrixXd upstream = layers_[l].weight.transpose() * delta;
        if (l == 0) {
            *input_grad = std::move(upstream);
            break;
        }
        delta = (upstream.array() * (cache.pre_activations[l - 1].array() > 0.0).cast<double>()).matrix();
    }
    return grads;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

Eigen::VectorXd Mlp::flat_parameters() const { return flatten(layers_); }

void Mlp::set_flat_parameters(const Eigen::VectorXd& flat) {
    if (static_cast<std::size_t>(flat.size()) != parameter_count())
        throw DimensionMismatch("flat parameter vector has the wrong length");
    Eigen::Index offset = 0;
    for (auto& l : layers_) {
        l.weight = Eigen::Map<const Eigen::MatrixXd>(flat.data() + offset, l.weight.rows(), l.weight.cols());
        offset += l.weight.size();
        l.bias = flat.segment(offset, l.bias.size());
        offset += l.bias.size();
    }
}

Gradients zero_gradients(const Mlp& net) {
    Gradients g;
    for (const auto& l : net.layers())
        g.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    return g;
}

Eigen::VectorXd flatten(const Gradients& grads) {
    Eigen::Index n = 0;
    for (const auto& l : grads) n += l.weight.size() + l.bias.size();
    Eigen::VectorXd flat(n);
    Eigen::Index offset = 0;
    for (const auto& l : grads) {
        flat.segment(offset, l.weight.size()) = Eigen::Map<const Eigen::VectorXd>(l.weight.data(), l.weight.size());
        offset += l.weight.size();
        flat.segment(offset, l.bias.size()) = l.bias;
        offset += l.bias.size();
    }
    return flat;
}

void accumulate(Gradients& into, const Gradients& from) {
    if (into.size() != from.size()) throw DimensionMismatch("gradient layer counts differ");
    for (std::size_t i = 0; i < into.size(); ++i) {
        into[i].weight += from[i].weight;
        into[i].bias += from[i].bias;
    }
}

AdamState AdamState::for_network(const Mlp& net, double learning_rate) {
    AdamState s;
    s.learning_rate = learning_rate;
    s.first_moment = zero_gradients(net);
    s.second_moment = zero_gradients(net);
    return s;
}

void adam_step(Mlp& net, const Gradients& grads, AdamState& state) {
    auto& layers = net.layers();
    if (grads.size() != layers.size() || state.first_moment.size() != layers.size())
        throw DimensionMismatch("optimizer state does not match the network");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
        m = state.beta1 * m + (1.0 - state.beta1) * grad;
        v = state.beta2 * v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
        param.array() -= state.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
        update(layers[l].weight, grads[l].weight, state.first_moment[l].weight, state.second_moment[l].weight);
        update(layers[l].bias, grads[l].bias, state.first_moment[l].bias, state.second_moment[l].bias);
    }
}

void polyak_update(Mlp& target, const Mlp& online, double omega) {
    if (!target.same_shape(online)) throw DimensionMismatch("target and online networks differ in shape");
    if (omega < 0.0 || omega > 1.0) throw std::invalid_argument("polyak coefficient must lie in [0, 1]");
    for (std::size_t l = 0; l < target.layers().size(); ++l) {
        auto& t = target.layers()[l];
        const auto& o = online.layers()[l];
        t.weight = omega * t.weight + (1.0 - omega) * o.weight;
        t.bias = omega * t.bias + (1.0 - omega) * o.bias;
    }
}

void write_mlp(LeWriter& w, const Mlp& net) {
    w.u32(static_cast<std::uint32_t>(net.layer_sizes().size()));
    for (int s : net.layer_sizes()) w.u32(static_cast<std::uint32_t>(s));
    w.u8(static_cast<std::uint8_t>(net.output_activation()));
    w.f64(net.output_scale());
    write_layers(w, net.layers());
}

Mlp read_mlp(LeReader& r) {
    const std::uint32_t n = r.u32();
    if (n < 2 || n > 64) throw FormatError(FormatErrorKind::BadMagic, "implausible layer count in checkpoint");
    std::vector<int> sizes(n);
    for (auto& s : sizes) s = static_cast<int>(r.u32());
    const auto act = r.u8();
    if (act > 1) throw FormatError(FormatErrorKind::BadMagic, "unknown output activation in checkpoint");
    const double scale = r.f64();
    Mlp net(sizes, static_cast<OutputActivation>(act), scale);
    read_layers(r, net.layers());
    return net;
}

void write_adam(LeWriter& w, const AdamState& state) {
    w.f64(state.learning_rate);
    w.f64(state.beta1);
    w.f64(state.beta2);
    w.f64(state.epsilon);
    w.u64(state.step);
    write_layers(w, state.first_moment);
    write_layers(w, state.second_moment);
}

AdamState read_adam(LeReader& r, const Mlp& net) {
    AdamState s = AdamState::for_network(net, 0.0);
    s.learning_rate = r.f64();
    s.beta1 = r.f64();
    s.beta2 = r.f64();
    s.epsilon = r.f64();
    s.step = r.u64();
    read_layers(r, s.first_moment);
    read_layers(r, s.second_moment);
    return s;
}

}  // namespace symreach::nn
