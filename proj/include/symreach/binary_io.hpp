#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace symreach {

/// Failure categories shared by the buffer and checkpoint file formats.
enum class FormatErrorKind { BadMagic, VersionMismatch, TruncatedFile, Io };

class FormatError : public std::runtime_error {
public:
    FormatError(FormatErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    FormatErrorKind kind() const noexcept { return kind_; }

private:
    FormatErrorKind kind_;
};

// Explicit little-endian encoding so files are portable across hosts.
class LeWriter {
public:
    explicit LeWriter(std::ostream& os) : os_(os) {}

    void bytes(const void* data, std::size_t n) {
        os_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { put_uint(v, 4); }
    void u64(std::uint64_t v) { put_uint(v, 8); }
    void f64(double v) { put_uint(std::bit_cast<std::uint64_t>(v), 8); }

private:
    void put_uint(std::uint64_t v, int n) {
        std::array<unsigned char, 8> buf{};
        for (int i = 0; i < n; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
        bytes(buf.data(), static_cast<std::size_t>(n));
    }
    std::ostream& os_;
};

class LeReader {
public:
    explicit LeReader(std::istream& is) : is_(is) {}

    void bytes(void* data, std::size_t n) {
        is_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is_.gcount()) != n)
            throw FormatError(FormatErrorKind::TruncatedFile, "TruncatedFile: unexpected end of file");
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get_uint(4)); }
    std::uint64_t u64() { return get_uint(8); }
    double f64() { return std::bit_cast<double>(get_uint(8)); }

private:
    std::uint64_t get_uint(int n) {
        std::array<unsigned char, 8> buf{};
        bytes(buf.data(), static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
        return v;
    }
    std::istream& is_;
};

}  // namespace symreach
