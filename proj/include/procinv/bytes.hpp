#pragma once

// Little-endian byte buffers and a stable 64-bit content hash.

#include "procinv/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace procinv {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

/// SplitMix64 finalizer; used to derive independent RNG seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class ByteWriter {
public:
    void u8(std::uint8_t v) { m_bytes.push_back(v); }
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void f32(float v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }

    void bytes(std::span<const std::uint8_t> data) { m_bytes.insert(m_bytes.end(), data.begin(), data.end()); }

    /// u32 length prefix followed by the data.
    void blob(std::span<const std::uint8_t> data) {
        u32(static_cast<std::uint32_t>(data.size()));
        bytes(data);
    }

    void string(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        m_bytes.insert(m_bytes.end(), s.begin(), s.end());
    }

    const std::vector<std::uint8_t> &data() const { return m_bytes; }
    std::vector<std::uint8_t> take() { return std::move(m_bytes); }

private:
    void raw(const void *p, std::size_t n) {
        const auto *b = static_cast<const std::uint8_t *>(p);
        m_bytes.insert(m_bytes.end(), b, b + n);
    }

    std::vector<std::uint8_t> m_bytes;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : m_data(data) {}

    std::uint8_t u8() {
        std::uint8_t v = 0;
        raw(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        raw(&v, sizeof v);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        raw(&v, sizeof v);
        return v;
    }
    float f32() {
        float v = 0;
        raw(&v, sizeof v);
        return v;
    }
    double f64() {
        double v = 0;
        raw(&v, sizeof v);
        return v;
    }

    std::span<const std::uint8_t> bytes(std::size_t n) {
        need(n);
        auto out = m_data.subspan(m_pos, n);
        m_pos += n;
        return out;
    }

    std::span<const std::uint8_t> blob() { return bytes(u32()); }

    std::string string() {
        const auto b = blob();
        return {reinterpret_cast<const char *>(b.data()), b.size()};
    }

    std::size_t remaining() const { return m_data.size() - m_pos; }
    bool done() const { return m_pos == m_data.size(); }

private:
    void need(std::size_t n) const {
        if (m_data.size() - m_pos < n) {
            throw IoError("unexpected end of data");
        }
    }
    void raw(void *p, std::size_t n) {
        need(n);
        std::memcpy(p, m_data.data() + m_pos, n);
        m_pos += n;
    }

    std::span<const std::uint8_t> m_data;
    std::size_t m_pos = 0;
};

} // namespace procinv
