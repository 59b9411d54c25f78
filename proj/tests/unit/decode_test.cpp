#include "fixtures.hpp"

#include "procinv/decode.hpp"
#include "procinv/prior.hpp"

#include <gtest/gtest.h>

#include <fstream>

#include <unistd.h>

using namespace procinv;

namespace {

const AssetCatalog &catalog() {
    static const AssetCatalog c = build_catalog(0, 64);
    return c;
}

const BuildingCodec &default_codec() {
    static const BuildingCodec c(catalog().material_counts());
    return c;
}

// Distinct scores per (prefix length, token): a fixed permutation rank.
class RankPolicy final : public Policy {
public:
    void scores(const std::string &, std::span<const TokenId> prefix, std::span<double> out) override {
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = static_cast<double>((i * 7919 + prefix.size() * 104729) % out.size());
        }
    }
    std::string name() const override { return "rank"; }
};

// Counts calls and returns small pseudo-random scores.
class CountingPolicy final : public Policy {
public:
    void scores(const std::string &, std::span<const TokenId> prefix, std::span<double> out) override {
        ++calls;
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = std::sin(static_cast<double>(i * 31 + prefix.size() * 17)) * 3.0;
        }
    }
    std::string name() const override { return "counting"; }
    int calls = 0;
};

std::string temp_path(const std::string &name) {
    return (std::filesystem::temp_directory_path() / ("procinv_" + name + "_" + std::to_string(::getpid()))).string();
}

std::string server(const std::string &args = "") { return std::string(PROCINV_FAKE_POLICY_PATH) + " " + args; }

TokenSequence sample_tokens(std::uint64_t seed) {
    return default_codec().encode(sample(seed, PriorConfig{}, catalog(), default_codec()));
}

} // namespace

TEST(MaskedDistribution, NormalizesOverTheMaskOnly) {
    TokenMask mask(8);
    mask.set(1);
    mask.set(4);
    mask.set(6);
    const std::vector<double> s = {100, 0, 100, 100, std::log(3.0), 100, 0, 100};
    const MaskedDistribution d = masked_distribution(s, mask);
    EXPECT_EQ(d.ids, (std::vector<TokenId>{1, 4, 6}));
    EXPECT_NEAR(d.probs[0], 0.2, 1e-12);
    EXPECT_NEAR(d.probs[1], 0.6, 1e-12);
    EXPECT_NEAR(d.log_normalizer, std::log(5.0), 1e-12);
}

TEST(MaskedDistribution, InfinitiesAndNan) {
    TokenMask mask(4);
    mask.set_range(0, 3);
    const double inf = std::numeric_limits<double>::infinity();
    const MaskedDistribution forced = masked_distribution(std::vector<double>{inf, 1.0, inf, 5.0}, mask);
    EXPECT_EQ(forced.probs, (std::vector<double>{0.5, 0.0, 0.5, 0.0}));
    const MaskedDistribution nan = masked_distribution(std::vector<double>{std::nan(""), 0.0, -inf, 0.0}, mask);
    EXPECT_EQ(nan.probs, (std::vector<double>{0.0, 0.5, 0.0, 0.5}));
    EXPECT_THROW(masked_distribution(std::vector<double>{-inf, -inf, -inf, std::nan("")}, mask), PolicyError);
}

TEST(MaskedDistribution, TemperatureSharpens) {
    TokenMask mask(2);
    mask.set_range(0, 1);
    const std::vector<double> s = {1.0, 0.0};
    EXPECT_NEAR(masked_distribution(s, mask, 1.0).probs[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
    EXPECT_NEAR(masked_distribution(s, mask, 0.5).probs[0], 1.0 / (1.0 + std::exp(-2.0)), 1e-12);
}

TEST(Rollout, UniformRolloutsAlwaysParse) {
    UniformPolicy uniform;
    const auto outcomes = rollout_many(uniform, "", DecodeConfig{}, default_codec(), 300);
    std::size_t complete = 0;
    for (const auto &o : outcomes) {
        EXPECT_TRUE(o.error.empty()) << o.error;
        if (o.result) {
            ++complete;
            EXPECT_LE(o.result->tokens.size(), kMaxSequenceLength);
            EXPECT_EQ(default_codec().decode(o.result->tokens), o.result->building);
        } else {
            ASSERT_TRUE(o.incomplete.has_value());
            EXPECT_EQ(o.incomplete->size(), kMaxSequenceLength);
        }
    }
    EXPECT_GE(complete, 297U);
}

TEST(Rollout, OracleReproducesTheTarget) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const TokenSequence target = sample_tokens(seed);
        OraclePolicy oracle(target);
        for (DecodeMode mode : {DecodeMode::greedy, DecodeMode::sample}) {
            const RolloutResult r = rollout(oracle, "", {mode, 1.0, kMaxSequenceLength, seed}, default_codec());
            EXPECT_EQ(r.tokens, target);
            EXPECT_EQ(default_codec().encode(r.building), target);
        }
    }
}

TEST(Rollout, GreedyIsDeterministicAndLowTemperatureAgrees) {
    RankPolicy rank;
    const DecodeConfig greedy{DecodeMode::greedy, 1.0, kMaxSequenceLength, 1};
    std::optional<TokenSequence> reference;
    try {
        reference = rollout(rank, "x", greedy, default_codec()).tokens;
    } catch (const IncompleteRolloutError &e) {
        reference = e.partial();
    }
    for (std::uint64_t seed = 2; seed < 5; ++seed) {
        DecodeConfig g = greedy;
        g.seed = seed;
        TokenSequence again;
        try {
            again = rollout(rank, "x", g, default_codec()).tokens;
        } catch (const IncompleteRolloutError &e) {
            again = e.partial();
        }
        EXPECT_EQ(again, *reference);
    }
    std::size_t agree = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        TokenSequence cold;
        try {
            cold = rollout(rank, "x", {DecodeMode::sample, 0.01, kMaxSequenceLength, seed}, default_codec()).tokens;
        } catch (const IncompleteRolloutError &e) {
            cold = e.partial();
        }
        agree += cold == *reference ? 1 : 0;
    }
    EXPECT_GT(agree, 99U);
}

TEST(Rollout, MaxLengthYieldsIncompleteWithAValidPrefix) {
    UniformPolicy uniform;
    try {
        rollout(uniform, "", {DecodeMode::sample, 1.0, 12, 3}, default_codec());
        FAIL() << "expected an incomplete rollout";
    } catch (const IncompleteRolloutError &e) {
        ASSERT_EQ(e.partial().size(), 12U);
        EXPECT_EQ(e.kind(), "incomplete_rollout");
        EXPECT_THROW(default_codec().decode(e.partial()), IncompleteError);
    }
}

TEST(Rollout, RejectsBadConfig) {
    UniformPolicy uniform;
    EXPECT_THROW(rollout(uniform, "", {DecodeMode::sample, 0.0, 100, 0}, default_codec()), ConfigError);
    EXPECT_THROW(rollout(uniform, "", {DecodeMode::sample, 1.0, 0, 0}, default_codec()), ConfigError);
    EXPECT_THROW(rollout(uniform, "", {DecodeMode::sample, 1.0, 4096, 0}, default_codec()), ConfigError);
    EXPECT_THROW(parse_decode_mode("beam"), ConfigError);
}

TEST(Rollout, ThreadedBatchMatchesSequential) {
    UniformPolicy uniform;
    const DecodeConfig cfg{DecodeMode::sample, 1.0, kMaxSequenceLength, 40};
    const auto one = rollout_many(uniform, "", cfg, default_codec(), 12, 1);
    const auto many = rollout_many(uniform, "", cfg, default_codec(), 12, 3);
    for (std::size_t i = 0; i < 12; ++i) {
        ASSERT_EQ(one[i].result.has_value(), many[i].result.has_value());
        if (one[i].result) {
            EXPECT_EQ(one[i].result->tokens, many[i].result->tokens);
        }
    }
}

TEST(TeacherForced, OracleHasZeroLoss) {
    const TokenSequence target = sample_tokens(3);
    OraclePolicy oracle(target);
    const TeacherForcedScores s = teacher_forced_scores(oracle, "", target, default_codec());
    ASSERT_EQ(s.log_probs.size(), target.size());
    for (double lp : s.log_probs) {
        EXPECT_EQ(lp, 0.0);
    }
    EXPECT_EQ(s.loss, 0.0);
}

TEST(TeacherForced, UniformMatchesMaskCardinalities) {
    const TokenSequence target = sample_tokens(4);
    UniformPolicy uniform;
    const TeacherForcedScores s = teacher_forced_scores(uniform, "", target, default_codec());
    ASSERT_EQ(s.log_probs.size(), target.size());
    // Independent walk over the automaton counting valid tokens per position.
    auto state = default_codec().start();
    double expected_loss = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const std::uint32_t n = default_codec().valid_next(state).count();
        EXPECT_EQ(s.valid_counts[i], n);
        EXPECT_NEAR(s.log_probs[i], -std::log(static_cast<double>(n)), 1e-12);
        expected_loss += std::log(static_cast<double>(n));
        state = default_codec().step(state, target[i]);
    }
    EXPECT_NEAR(s.loss, expected_loss, 1e-9);
}

TEST(TeacherForced, ProbabilitiesSumToOne) {
    const TokenSequence target = sample_tokens(5);
    CountingPolicy policy;
    std::vector<double> scores(default_codec().vocabulary().size());
    auto state = default_codec().start();
    for (std::size_t i = 0; i < target.size(); ++i) {
        policy.scores("", std::span(target).first(i), scores);
        const MaskedDistribution d = masked_distribution(scores, default_codec().valid_next(state));
        double sum = 0.0;
        for (double p : d.probs) {
            sum += p;
        }
        EXPECT_NEAR(sum, 1.0, 1e-6);
        state = default_codec().step(state, target[i]);
    }
    const TeacherForcedScores s = teacher_forced_scores(policy, "", target, default_codec());
    for (std::size_t i = 0; i < target.size(); ++i) {
        EXPECT_NEAR(s.log_probs[i], s.target_scores[i] - s.log_normalizers[i], 1e-9);
    }
}

TEST(TeacherForced, InvalidTargetFailsBeforeScoring) {
    TokenSequence target = sample_tokens(6);
    target[5] = target[0];
    CountingPolicy policy;
    EXPECT_THROW(teacher_forced_scores(policy, "", target, default_codec()), ParseError);
    EXPECT_EQ(policy.calls, 0);
    target = sample_tokens(6);
    target.resize(10);
    EXPECT_THROW(teacher_forced_scores(policy, "", target, default_codec()), IncompleteError);
    EXPECT_EQ(policy.calls, 0);
}

TEST(Bridge, UniformServerProducesParseableRollouts) {
    const std::string log = temp_path("bridge_log");
    BridgePolicy bridge(server("--log " + log), default_codec().vocabulary().size());
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        try {
            const RolloutResult r = rollout(bridge, "/data/cloud.ply", {DecodeMode::sample, 1.0, 2048, seed},
                                            default_codec());
            EXPECT_EQ(default_codec().decode(r.tokens), r.building);
        } catch (const IncompleteRolloutError &) {
        }
    }
    std::ifstream in(log);
    std::string line;
    std::getline(in, line);
    const auto first = nlohmann::json::parse(line);
    EXPECT_EQ(first.at("id"), 0);
    EXPECT_EQ(first.at("conditioning"), "/data/cloud.ply");
    EXPECT_TRUE(first.at("prefix").empty());
    std::getline(in, line);
    const auto second = nlohmann::json::parse(line);
    EXPECT_EQ(second.at("id"), 1);
    EXPECT_EQ(second.at("prefix").size(), 1U);
    std::filesystem::remove(log);
}

TEST(Bridge, OracleServerIsReproducedByGreedyDecoding) {
    const TokenSequence target = sample_tokens(8);
    const std::string path = temp_path("oracle_tokens");
    {
        std::ofstream out(path, std::ios::binary);
        write_token_sequence(out, target);
    }
    BridgePolicy bridge(server("--oracle " + path), default_codec().vocabulary().size());
    const RolloutResult r = rollout(bridge, "c", {DecodeMode::greedy, 1.0, 2048, 0}, default_codec());
    EXPECT_EQ(r.tokens, target);
    std::filesystem::remove(path);
}

TEST(Bridge, ProtocolFaultsArePolicyErrors) {
    const auto vocab = default_codec().vocabulary().size();
    for (const std::string fault : {"bad-id", "short", "garbage", "error", "exit"}) {
        BridgePolicy bridge(server("--fault " + fault + " --fault-after 3"), vocab);
        UniformPolicy fallback;
        std::vector<double> scores(vocab);
        for (int i = 0; i < 3; ++i) {
            bridge.scores("", {}, scores);
        }
        EXPECT_THROW(bridge.scores("", {}, scores), PolicyError) << fault;
    }
    BridgePolicy missing("/nonexistent/policy-binary 2>/dev/null", vocab);
    std::vector<double> scores(vocab);
    EXPECT_THROW(missing.scores("", {}, scores), PolicyError);
    BridgePolicy wrong_size(server(), vocab);
    std::vector<double> small(10);
    EXPECT_THROW(wrong_size.scores("", {}, small), PolicyError);
}
