#pragma once

#include "procinv/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace procinv {

using TokenId = std::uint32_t;

enum class GroupKind : std::uint8_t { continuous, discrete, control };

/// A contiguous block of token ids dedicated to one family of fields.
struct TokenGroup {
    std::string name;
    GroupKind kind = GroupKind::discrete;
    double lo = 0.0;
    double hi = 0.0;
    double resolution = 0.0;
    std::uint32_t cardinality = 0;
    TokenId offset = 0;

    static TokenGroup continuous(std::string name, double lo, double hi, double resolution) {
        TokenGroup g;
        g.name = std::move(name);
        g.kind = GroupKind::continuous;
        g.lo = lo;
        g.hi = hi;
        g.resolution = resolution;
        g.cardinality = static_cast<std::uint32_t>(std::llround((hi - lo) / resolution)) + 1;
        return g;
    }

    static TokenGroup discrete(std::string name, std::uint32_t cardinality) {
        TokenGroup g;
        g.name = std::move(name);
        g.kind = GroupKind::discrete;
        g.hi = cardinality == 0 ? 0.0 : static_cast<double>(cardinality - 1);
        g.resolution = 1.0;
        g.cardinality = cardinality;
        return g;
    }

    bool contains(TokenId id) const { return id >= offset && id < offset + cardinality; }

    friend bool operator==(const TokenGroup &, const TokenGroup &) = default;
};

/// Index within a continuous group: clamp(round((v - lo) / res), 0, cardinality - 1).
inline std::uint32_t quantize_local(double v, const TokenGroup &g) {
    if (std::isnan(v)) {
        return 0;
    }
    const double steps = std::round((v - g.lo) / g.resolution);
    const double clamped = std::clamp(steps, 0.0, static_cast<double>(g.cardinality - 1));
    return static_cast<std::uint32_t>(clamped);
}

inline TokenId quantize(double v, const TokenGroup &g) { return g.offset + quantize_local(v, g); }

inline double dequantize_local(std::uint32_t local, const TokenGroup &g) {
    return g.lo + static_cast<double>(local) * g.resolution;
}

inline double snap(double v, const TokenGroup &g) { return dequantize_local(quantize_local(v, g), g); }

/// True when clamping moves v by more than one resolution step (a warning, not an error).
inline bool far_out_of_range(double v, const TokenGroup &g) {
    return std::abs(v - std::clamp(v, g.lo, g.hi)) > g.resolution;
}

/// Group-blocked vocabulary. The control group always comes last and holds
/// END_REPEATED, PRESENT, ABSENT followed by one selector per oneof arm.
class Vocabulary {
public:
    static constexpr std::uint32_t kEndRepeated = 0;
    static constexpr std::uint32_t kPresent = 1;
    static constexpr std::uint32_t kAbsent = 2;
    static constexpr std::uint32_t kFixedControls = 3;

    Vocabulary() = default;

    Vocabulary(std::vector<TokenGroup> groups, std::uint32_t selector_count) : m_groups(std::move(groups)) {
        TokenGroup control;
        control.name = "control";
        control.kind = GroupKind::control;
        control.cardinality = kFixedControls + selector_count;
        control.hi = control.cardinality - 1;
        control.resolution = 1.0;
        m_groups.push_back(std::move(control));
        TokenId next = 0;
        for (TokenGroup &g : m_groups) {
            if (g.cardinality == 0) {
                throw ConfigError("token group '" + g.name + "' has no tokens");
            }
            g.offset = next;
            next += g.cardinality;
        }
        m_size = next;
    }

    std::uint32_t size() const { return m_size; }
    const std::vector<TokenGroup> &groups() const { return m_groups; }
    const TokenGroup &group(std::size_t index) const { return m_groups.at(index); }
    const TokenGroup &control() const { return m_groups.back(); }
    std::size_t control_index() const { return m_groups.size() - 1; }

    TokenId end_repeated() const { return control().offset + kEndRepeated; }
    TokenId present() const { return control().offset + kPresent; }
    TokenId absent() const { return control().offset + kAbsent; }
    TokenId selector(std::uint32_t index) const { return control().offset + kFixedControls + index; }

    std::size_t group_of(TokenId id) const {
        for (std::size_t i = 0; i < m_groups.size(); ++i) {
            if (m_groups[i].contains(id)) {
                return i;
            }
        }
        throw ConfigError("token id " + std::to_string(id) + " outside the vocabulary");
    }

    std::size_t find(const std::string &name) const {
        for (std::size_t i = 0; i < m_groups.size(); ++i) {
            if (m_groups[i].name == name) {
                return i;
            }
        }
        throw ConfigError("no token group named '" + name + "'");
    }

    std::string describe(TokenId id) const {
        const std::size_t gi = group_of(id);
        const TokenGroup &g = m_groups[gi];
        const std::uint32_t local = id - g.offset;
        if (g.kind == GroupKind::control) {
            switch (local) {
            case kEndRepeated:
                return "END_REPEATED";
            case kPresent:
                return "PRESENT";
            case kAbsent:
                return "ABSENT";
            default:
                return "SELECT#" + std::to_string(local - kFixedControls);
            }
        }
        return g.name + "#" + std::to_string(local);
    }

    friend bool operator==(const Vocabulary &, const Vocabulary &) = default;

private:
    std::vector<TokenGroup> m_groups;
    std::uint32_t m_size = 0;
};

/// Set of token ids as a bitmask over the vocabulary.
class TokenMask {
public:
    TokenMask() = default;
    explicit TokenMask(std::uint32_t size) : m_size(size), m_words((size + 63) / 64, 0) {}

    std::uint32_t size() const { return m_size; }

    void set(TokenId id) { m_words[id >> 6] |= (std::uint64_t{1} << (id & 63)); }
    void reset(TokenId id) { m_words[id >> 6] &= ~(std::uint64_t{1} << (id & 63)); }
    bool test(TokenId id) const { return id < m_size && ((m_words[id >> 6] >> (id & 63)) & 1U); }

    /// Sets [first, last] inclusive.
    void set_range(TokenId first, TokenId last) {
        if (first > last) {
            return;
        }
        std::size_t wf = first >> 6;
        std::size_t wl = last >> 6;
        const std::uint64_t head = ~std::uint64_t{0} << (first & 63);
        const std::uint64_t tail = ~std::uint64_t{0} >> (63 - (last & 63));
        if (wf == wl) {
            m_words[wf] |= head & tail;
            return;
        }
        m_words[wf] |= head;
        for (std::size_t w = wf + 1; w < wl; ++w) {
            m_words[w] = ~std::uint64_t{0};
        }
        m_words[wl] |= tail;
    }

    std::uint32_t count() const {
        std::uint32_t n = 0;
        for (std::uint64_t w : m_words) {
            n += static_cast<std::uint32_t>(__builtin_popcountll(w));
        }
        return n;
    }

    bool empty() const {
        return std::all_of(m_words.begin(), m_words.end(), [](std::uint64_t w) { return w == 0; });
    }

    template <typename F>
    void for_each(F &&f) const {
        for (std::size_t w = 0; w < m_words.size(); ++w) {
            std::uint64_t bits = m_words[w];
            while (bits != 0) {
                const int b = __builtin_ctzll(bits);
                f(static_cast<TokenId>(w * 64 + static_cast<std::size_t>(b)));
                bits &= bits - 1;
            }
        }
    }

    /// The k-th set id in increasing order (k < count()).
    TokenId nth(std::uint32_t k) const {
        for (std::size_t w = 0; w < m_words.size(); ++w) {
            const auto c = static_cast<std::uint32_t>(__builtin_popcountll(m_words[w]));
            if (k < c) {
                std::uint64_t bits = m_words[w];
                for (std::uint32_t i = 0; i < k; ++i) {
                    bits &= bits - 1;
                }
                return static_cast<TokenId>(w * 64 + static_cast<std::size_t>(__builtin_ctzll(bits)));
            }
            k -= c;
        }
        throw std::out_of_range("TokenMask::nth beyond count");
    }

    std::vector<TokenId> ids() const {
        std::vector<TokenId> out;
        for_each([&](TokenId id) { out.push_back(id); });
        return out;
    }

    friend bool operator==(const TokenMask &, const TokenMask &) = default;

private:
    std::uint32_t m_size = 0;
    std::vector<std::uint64_t> m_words;
};

} // namespace procinv
