#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "symreach/random.hpp"

namespace symreach::replay {

constexpr std::uint32_t kFormatVersion = 1;

struct Transition {
    Eigen::VectorXd s;
    Eigen::VectorXd a;
    double r = 0.0;
    Eigen::VectorXd s_next;
    bool zeta = false;
    std::uint8_t partition = 0;
    bool is_demo = false;
};

/// Fifo overwrites the oldest entry once full (original buffer); AppendOnly
/// refuses to evict and only accepts demonstrations (demo buffer).
enum class BufferKind { Fifo, AppendOnly };

class DemoBufferFull : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyBuffer : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, BufferKind kind);

    void push(Transition t);

    std::size_t size() const { return storage_.size(); }
    std::size_t capacity() const { return capacity_; }
    BufferKind kind() const { return kind_; }
    bool empty() const { return storage_.empty(); }

    /// i-th transition in insertion order (0 = oldest retained).
    const Transition& operator[](std::size_t i) const;

    /// Uniform draws with replacement, in the order they were drawn.
    std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;
    std::vector<Transition> sample_batch(std::size_t n, Rng& rng) const;

    /// Raw slot access for batch gathering; pairs with sample_indices().
    const Transition& slot(std::size_t index) const { return storage_[index]; }

    void save(const std::filesystem::path& path) const;

    /// Capacity becomes max(capacity, records in file).
    static ReplayBuffer load(const std::filesystem::path& path, std::size_t capacity, BufferKind kind);

private:
    std::size_t capacity_;
    BufferKind kind_;
    std::vector<Transition> storage_;
    std::size_t cursor_ = 0;  // next slot to overwrite once full
};

}  // namespace symreach::replay
