#include "symreach/replay.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "symreach/binary_io.hpp"

namespace symreach::replay {

namespace {

constexpr char kMagic[4] = {'D', 'E', 'Z', 'B'};

void write_vector(LeWriter& w, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) w.f64(v[i]);
}

Eigen::VectorXd read_vector(LeReader& r, std::uint32_t n) {
    Eigen::VectorXd v(n);
    for (std::uint32_t i = 0; i < n; ++i) v[i] = r.f64();
    return v;
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity, BufferKind kind) : capacity_(capacity), kind_(kind) {
    if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
    if (t.s.size() != t.s_next.size()) throw std::invalid_argument("s and s_next dimensions differ");
    if (kind_ == BufferKind::AppendOnly) {
        if (!t.is_demo) throw std::invalid_argument("demo buffer accepts demonstrations only");
        if (storage_.size() >= capacity_)
            throw DemoBufferFull("demo buffer full at " + std::to_string(capacity_) + " transitions");
    }
    if (storage_.size() < capacity_) {
        storage_.push_back(std::move(t));
        return;
    }
    storage_[cursor_] = std::move(t);
    cursor_ = (cursor_ + 1) % capacity_;
}

const Transition& ReplayBuffer::operator[](std::size_t i) const {
    return storage_[(cursor_ + i) % storage_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
    if (storage_.empty()) throw EmptyBuffer("cannot sample from an empty buffer");
    std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = pick(rng);
    return idx;
}

std::vector<Transition> ReplayBuffer::sample_batch(std::size_t n, Rng& rng) const {
    std::vector<Transition> batch;
    batch.reserve(n);
    for (std::size_t i : sample_indices(n, rng)) batch.push_back(storage_[i]);
    return batch;
}

void ReplayBuffer::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError(FormatErrorKind::Io, "cannot open " + path.string() + " for writing");
    const std::uint32_t obs_dim = empty() ? 0 : static_cast<std::uint32_t>(storage_.front().s.size());
    const std::uint32_t act_dim = empty() ? 0 : static_cast<std::uint32_t>(storage_.front().a.size());
    LeWriter w(os);
    w.bytes(kMagic, 4);
    w.u32(kFormatVersion);
    w.u32(obs_dim);
    w.u32(act_dim);
    w.u64(storage_.size());
    for (std::size_t i = 0; i < size(); ++i) {
        const Transition& t = (*this)[i];
        write_vector(w, t.s);
        write_vector(w, t.a);
        w.f64(t.r);
        write_vector(w, t.s_next);
        w.u8(t.zeta ? 1 : 0);
        w.u8(t.partition);
        w.u8(t.is_demo ? 1 : 0);
    }
    if (!os) throw FormatError(FormatErrorKind::Io, "write failed for " + path.string());
}

ReplayBuffer ReplayBuffer::load(const std::filesystem::path& path, std::size_t capacity, BufferKind kind) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError(FormatErrorKind::Io, "cannot open " + path.string());
    LeReader r(is);
    char magic[4];
    r.bytes(magic, 4);
    if (!std::equal(magic, magic + 4, kMagic))
        throw FormatError(FormatErrorKind::BadMagic, "BadMagic: " + path.string() + " is not a replay buffer file");
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion)
        throw FormatError(FormatErrorKind::VersionMismatch,
                          "VersionMismatch: file version " + std::to_string(version) + ", reader supports version " +
                              std::to_string(kFormatVersion));
    const std::uint32_t obs_dim = r.u32();
    const std::uint32_t act_dim = r.u32();
    const std::uint64_t count = r.u64();

    ReplayBuffer buf(std::max<std::size_t>({capacity, count, 1}), kind);
    for (std::uint64_t i = 0; i < count; ++i) {
        Transition t;
        t.s = read_vector(r, obs_dim);
        t.a = read_vector(r, act_dim);
        t.r = r.f64();
        t.s_next = read_vector(r, obs_dim);
        t.zeta = r.u8() != 0;
        t.partition = r.u8();
        t.is_demo = r.u8() != 0;
        buf.push(std::move(t));
    }
    return buf;
}

}  // namespace symreach::replay
