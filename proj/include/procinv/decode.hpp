#pragma once

// Grammar-constrained autoregressive decoding on top of any token scorer.

#include "procinv/codec.hpp"

#include <json.hpp>

#include <atomic>
#include <cerrno>
#include <csignal>
#include <cstdio>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

#include <sys/wait.h>
#include <unistd.h>

namespace procinv {

class PolicyError : public Error {
public:
    explicit PolicyError(const std::string &message) : Error("policy", message) {}
};

/// Raised when max_length is reached before the grammar accepts.
class IncompleteRolloutError : public Error {
public:
    explicit IncompleteRolloutError(TokenSequence partial)
        : Error("incomplete_rollout",
                "rollout reached max_length (" + std::to_string(partial.size()) + " tokens) before completion"),
          m_partial(std::move(partial)) {}

    const TokenSequence &partial() const noexcept { return m_partial; }

private:
    TokenSequence m_partial;
};

/// Scores every vocabulary token for the next position. Higher is more likely;
/// -inf excludes a token, +inf forces it. Masking is never the policy's job.
class Policy {
public:
    virtual ~Policy() = default;
    virtual void scores(const std::string &conditioning, std::span<const TokenId> prefix, std::span<double> out) = 0;
    virtual std::string name() const = 0;
};

/// Equal scores everywhere: after masking, a uniform choice among valid tokens.
class UniformPolicy final : public Policy {
public:
    void scores(const std::string &, std::span<const TokenId>, std::span<double> out) override {
        std::fill(out.begin(), out.end(), 0.0);
    }
    std::string name() const override { return "uniform"; }
};

/// +inf on the target's next token, 0 elsewhere.
class OraclePolicy final : public Policy {
public:
    explicit OraclePolicy(TokenSequence target) : m_target(std::move(target)) {}

    void scores(const std::string &, std::span<const TokenId> prefix, std::span<double> out) override {
        std::fill(out.begin(), out.end(), 0.0);
        if (prefix.size() < m_target.size() && m_target[prefix.size()] < out.size()) {
            out[m_target[prefix.size()]] = std::numeric_limits<double>::infinity();
        }
    }
    std::string name() const override { return "oracle"; }

private:
    TokenSequence m_target;
};

/// External policy process speaking newline-delimited JSON on stdin/stdout:
///   request  {"id": n, "conditioning": "...", "prefix": [ids]}
///   response {"id": n, "scores": [vocab_size numbers]}   (null reads as -inf)
class BridgePolicy final : public Policy {
public:
    BridgePolicy(const std::string &command, std::uint32_t vocab_size) : m_command(command), m_vocab(vocab_size) {
        std::signal(SIGPIPE, SIG_IGN);
        int to_child[2];
        int from_child[2];
        if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) {
            throw PolicyError("cannot create pipes for '" + command + "'");
        }
        m_pid = ::fork();
        if (m_pid < 0) {
            throw PolicyError("cannot fork for '" + command + "'");
        }
        if (m_pid == 0) {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char *>(nullptr));
            ::_exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        m_in = ::fdopen(to_child[1], "w");
        m_out = ::fdopen(from_child[0], "r");
        if (!m_in || !m_out) {
            throw PolicyError("cannot open pipe streams for '" + command + "'");
        }
    }

    BridgePolicy(const BridgePolicy &) = delete;
    BridgePolicy &operator=(const BridgePolicy &) = delete;

    ~BridgePolicy() override {
        if (m_in) {
            std::fclose(m_in);
        }
        if (m_out) {
            std::fclose(m_out);
        }
        if (m_pid > 0) {
            int status = 0;
            ::waitpid(m_pid, &status, 0);
        }
    }

    void scores(const std::string &conditioning, std::span<const TokenId> prefix, std::span<double> out) override {
        const std::lock_guard<std::mutex> lock(m_mutex);
        if (out.size() != m_vocab) {
            throw PolicyError("score buffer has " + std::to_string(out.size()) + " entries, vocabulary has " +
                              std::to_string(m_vocab));
        }
        const std::uint64_t id = m_next_id++;
        const nlohmann::json request = {
            {"id", id}, {"conditioning", conditioning}, {"prefix", std::vector<TokenId>(prefix.begin(), prefix.end())}};
        const std::string line = request.dump() + "\n";
        if (std::fwrite(line.data(), 1, line.size(), m_in) != line.size() || std::fflush(m_in) != 0) {
            throw PolicyError("policy process '" + m_command + "' stopped reading requests");
        }
        char *buffer = nullptr;
        std::size_t capacity = 0;
        const ssize_t n = ::getline(&buffer, &capacity, m_out);
        const std::string reply = n > 0 ? std::string(buffer, static_cast<std::size_t>(n)) : std::string();
        std::free(buffer);
        if (n <= 0) {
            throw PolicyError("policy process '" + m_command + "' closed its output");
        }
        nlohmann::json response;
        try {
            response = nlohmann::json::parse(reply);
        } catch (const nlohmann::json::parse_error &) {
            throw PolicyError("policy reply is not JSON: " + reply.substr(0, 80));
        }
        if (response.contains("error")) {
            throw PolicyError("policy reported: " + response["error"].dump());
        }
        if (!response.contains("id") || response["id"] != id) {
            throw PolicyError("policy reply id does not match request " + std::to_string(id));
        }
        const auto &s = response.value("scores", nlohmann::json());
        if (!s.is_array() || s.size() != m_vocab) {
            throw PolicyError("policy reply must carry " + std::to_string(m_vocab) + " scores");
        }
        for (std::size_t i = 0; i < m_vocab; ++i) {
            if (s[i].is_null()) {
                out[i] = -std::numeric_limits<double>::infinity();
            } else if (s[i].is_number()) {
                out[i] = s[i].get<double>();
            } else {
                throw PolicyError("score " + std::to_string(i) + " is not a number");
            }
        }
    }

    std::string name() const override { return "bridge"; }

private:
    std::string m_command;
    std::uint32_t m_vocab;
    pid_t m_pid = -1;
    std::FILE *m_in = nullptr;
    std::FILE *m_out = nullptr;
    std::uint64_t m_next_id = 0;
    std::mutex m_mutex;
};

// ---------------------------------------------------------------------------

enum class DecodeMode { greedy, sample };

struct DecodeConfig {
    DecodeMode mode = DecodeMode::sample;
    double temperature = 1.0;
    std::size_t max_length = kMaxSequenceLength;
    std::uint64_t seed = 0;
};

inline void check(const DecodeConfig &c) {
    if (!(c.temperature > 0.0) || !std::isfinite(c.temperature)) {
        throw ConfigError("temperature must be positive");
    }
    if (c.max_length < 1 || c.max_length > kMaxSequenceLength) {
        throw ConfigError("max_length must lie in [1, " + std::to_string(kMaxSequenceLength) + "]");
    }
}

inline DecodeMode parse_decode_mode(const std::string &s) {
    if (s == "greedy") {
        return DecodeMode::greedy;
    }
    if (s == "sample") {
        return DecodeMode::sample;
    }
    throw ConfigError("decode mode must be 'greedy' or 'sample', got '" + s + "'");
}

inline const char *to_string(DecodeMode m) { return m == DecodeMode::greedy ? "greedy" : "sample"; }

/// A probability distribution over the valid tokens of one position.
struct MaskedDistribution {
    std::vector<TokenId> ids;
    std::vector<double> probs;
    double log_normalizer = 0.0; // log sum over valid ids of exp(score / temperature); +inf if a score is +inf
};

/// Renormalizes tempered scores over `mask`. Tokens scored +inf share all the
/// mass; NaN counts as -inf. Fails when every valid token is -inf.
inline MaskedDistribution masked_distribution(std::span<const double> scores, const TokenMask &mask,
                                              double temperature = 1.0) {
    MaskedDistribution d;
    d.ids = mask.ids();
    if (d.ids.empty()) {
        throw PolicyError("no valid token at this position");
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> z(d.ids.size());
    std::size_t forced = 0;
    double top = -inf;
    for (std::size_t i = 0; i < d.ids.size(); ++i) {
        const double s = scores[d.ids[i]];
        z[i] = std::isnan(s) ? -inf : s / temperature;
        forced += z[i] == inf ? 1 : 0;
        top = std::max(top, z[i]);
    }
    d.probs.assign(d.ids.size(), 0.0);
    if (forced > 0) {
        for (std::size_t i = 0; i < z.size(); ++i) {
            d.probs[i] = z[i] == inf ? 1.0 / static_cast<double>(forced) : 0.0;
        }
        d.log_normalizer = inf;
        return d;
    }
    if (top == -inf) {
        throw PolicyError("policy gave every valid token a score of -inf");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        d.probs[i] = std::exp(z[i] - top);
        sum += d.probs[i];
    }
    for (double &p : d.probs) {
        p /= sum;
    }
    d.log_normalizer = top + std::log(sum);
    return d;
}

struct RolloutResult {
    TokenSequence tokens;
    BuildingAbstraction building;
};

namespace detail {

inline TokenId choose(const MaskedDistribution &d, DecodeMode mode, std::mt19937_64 &rng) {
    if (mode == DecodeMode::greedy) {
        // Ties go to the smallest id.
        std::size_t best = 0;
        for (std::size_t i = 1; i < d.probs.size(); ++i) {
            if (d.probs[i] > d.probs[best]) {
                best = i;
            }
        }
        return d.ids[best];
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < d.probs.size(); ++i) {
        acc += d.probs[i];
        if (u < acc) {
            return d.ids[i];
        }
    }
    // Rounding left u above the total; take the last token with mass.
    for (std::size_t i = d.probs.size(); i-- > 0;) {
        if (d.probs[i] > 0.0) {
            return d.ids[i];
        }
    }
    return d.ids.back();
}

} // namespace detail

/// Samples one token sequence; every step is restricted to the grammar's valid
/// set, so a completed rollout always decodes.
inline RolloutResult rollout(Policy &policy, const std::string &conditioning, const DecodeConfig &cfg,
                             const BuildingCodec &codec) {
    check(cfg);
    std::mt19937_64 rng(cfg.seed);
    std::vector<double> scores(codec.vocabulary().size());
    RolloutResult r;
    BuildingCodec::State state = codec.start();
    while (!codec.is_accept(state)) {
        if (r.tokens.size() >= cfg.max_length) {
            throw IncompleteRolloutError(std::move(r.tokens));
        }
        policy.scores(conditioning, r.tokens, scores);
        const MaskedDistribution d = masked_distribution(scores, codec.valid_next(state), cfg.temperature);
        const TokenId next = detail::choose(d, cfg.mode, rng);
        codec.grammar().advance(state, next);
        r.tokens.push_back(next);
    }
    r.building = codec.decode(r.tokens);
    return r;
}

/// Outcome of one of many independent rollouts.
struct RolloutOutcome {
    std::optional<RolloutResult> result;
    std::optional<TokenSequence> incomplete; // partial sequence when max_length was hit
    std::string error;                       // any other failure (kind: message)
};

/// Runs `count` rollouts with seeds cfg.seed + i, spread over `threads` workers.
/// The policy must tolerate concurrent calls when threads > 1.
inline std::vector<RolloutOutcome> rollout_many(Policy &policy, const std::string &conditioning,
                                                const DecodeConfig &cfg, const BuildingCodec &codec, std::size_t count,
                                                unsigned threads = 1) {
    check(cfg);
    std::vector<RolloutOutcome> out(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            DecodeConfig c = cfg;
            c.seed = cfg.seed + i;
            try {
                out[i].result = rollout(policy, conditioning, c, codec);
            } catch (const IncompleteRolloutError &e) {
                out[i].incomplete = e.partial();
            } catch (const Error &e) {
                out[i].error = e.kind() + ": " + e.what();
            }
        }
    };
    const unsigned n = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n; ++t) {
            pool.emplace_back(worker);
        }
        for (std::thread &t : pool) {
            t.join();
        }
    }
    return out;
}

struct TeacherForcedScores {
    std::vector<double> target_scores;   // raw policy score of the target token
    std::vector<double> log_normalizers; // masked log partition function
    std::vector<double> log_probs;       // masked log-probability of the target token
    std::vector<std::uint32_t> valid_counts;
    double loss = 0.0; // sum of -log_probs
};

/// Per-position masked log-probabilities of `target` under the policy. The
/// target is parsed first, so an invalid target fails before any policy call.
inline TeacherForcedScores teacher_forced_scores(Policy &policy, const std::string &conditioning,
                                                 std::span<const TokenId> target, const BuildingCodec &codec) {
    codec.decode(target);
    TeacherForcedScores out;
    std::vector<double> scores(codec.vocabulary().size());
    BuildingCodec::State state = codec.start();
    for (std::size_t i = 0; i < target.size(); ++i) {
        policy.scores(conditioning, target.first(i), scores);
        const TokenMask mask = codec.valid_next(state);
        const MaskedDistribution d = masked_distribution(scores, mask);
        const auto at = std::lower_bound(d.ids.begin(), d.ids.end(), target[i]);
        const double p = d.probs[static_cast<std::size_t>(at - d.ids.begin())];
        out.target_scores.push_back(scores[target[i]]);
        out.log_normalizers.push_back(d.log_normalizer);
        out.log_probs.push_back(std::log(p));
        out.valid_counts.push_back(static_cast<std::uint32_t>(d.ids.size()));
        out.loss -= out.log_probs.back();
        codec.grammar().advance(state, target[i]);
    }
    return out;
}

} // namespace procinv
