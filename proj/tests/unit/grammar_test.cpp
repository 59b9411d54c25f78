#include "procinv/grammar.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <deque>

using namespace procinv;
using namespace procinv::grammar;

namespace {

// Root { x: scalar (3 values); y: repeated Leaf [0, 2] }   Leaf { v: scalar (2 values) }
Grammar<> toy_grammar() {
    Schema s;
    s.messages = {
        MessageSpec{"Root",
                    {FieldSpec{"x", 1, Label::required, ScalarType{0}},
                     FieldSpec{"y", 2, Label::repeated, MessageType{1}, 0, 2}}},
        MessageSpec{"Leaf", {FieldSpec{"v", 3, Label::required, ScalarType{1}}}},
    };
    Vocabulary v({TokenGroup::discrete("three", 3), TokenGroup::discrete("two", 2)}, s.selector_count());
    return Grammar<>(std::move(s), std::move(v));
}

// Root { pick: oneof {A, B}; tail: optional A }   A { p: scalar (4) }   B { }
Grammar<> oneof_grammar() {
    Schema s;
    s.messages = {
        MessageSpec{"Root",
                    {FieldSpec{"pick", 1, Label::required, OneofType{{1, 2}}},
                     FieldSpec{"tail", 2, Label::optional, MessageType{1}}}},
        MessageSpec{"A", {FieldSpec{"p", 3, Label::required, ScalarType{0}}}},
        MessageSpec{"B", {}},
    };
    Vocabulary v({TokenGroup::discrete("four", 4)}, s.selector_count());
    return Grammar<>(std::move(s), std::move(v));
}

template <typename G>
std::vector<typename G::State> reachable(const G &g) {
    std::vector<typename G::State> seen{g.start()};
    std::deque<typename G::State> queue{g.start()};
    while (!queue.empty()) {
        const auto s = queue.front();
        queue.pop_front();
        for (TokenId id : g.valid_next(s).ids()) {
            auto next = g.step(s, id);
            if (std::find(seen.begin(), seen.end(), next) == seen.end()) {
                seen.push_back(next);
                queue.push_back(next);
            }
        }
    }
    return seen;
}

} // namespace

TEST(Grammar, ToySchemaStateCountMatchesHandEnumeration) {
    // x pending; y loop after 0 items; v of item 0; loop after 1; v of item 1;
    // loop after 2 (END only); accept.
    const auto g = toy_grammar();
    EXPECT_EQ(reachable(g).size(), 7u);
}

TEST(Grammar, ToyLanguage) {
    const auto g = toy_grammar();
    const Vocabulary &v = g.vocabulary();
    auto s = g.start();
    EXPECT_EQ(g.valid_next(s).ids(), (std::vector<TokenId>{0, 1, 2}));
    s = g.step(s, 2);
    EXPECT_EQ(g.valid_next(s).ids(), (std::vector<TokenId>{v.end_repeated(), v.present()}));
    s = g.step(s, v.present());
    EXPECT_EQ(g.valid_next(s).ids(), (std::vector<TokenId>{3, 4}));
    s = g.step(s, 4);
    s = g.step(s, v.present());
    s = g.step(s, 3);
    EXPECT_EQ(g.valid_next(s).ids(), (std::vector<TokenId>{v.end_repeated()}));
    s = g.step(s, v.end_repeated());
    EXPECT_TRUE(g.is_accept(s));
    EXPECT_TRUE(g.valid_next(s).empty());
}

TEST(Grammar, MaskIsSoundAndExactOnEveryReachableState) {
    for (const auto &g : {toy_grammar(), oneof_grammar()}) {
        for (const auto &s : reachable(g)) {
            const TokenMask mask = g.valid_next(s);
            EXPECT_EQ(mask.empty(), g.is_accept(s));
            for (TokenId id = 0; id < g.vocabulary().size(); ++id) {
                if (mask.test(id)) {
                    EXPECT_NO_THROW(g.step(s, id));
                } else {
                    EXPECT_THROW(g.step(s, id), TransitionError);
                }
            }
        }
    }
}

TEST(Grammar, OneofPositionAllowsOnlyItsSelectors) {
    const auto g = oneof_grammar();
    const Vocabulary &v = g.vocabulary();
    auto s = g.start();
    EXPECT_EQ(g.valid_next(s).ids(), (std::vector<TokenId>{v.selector(0), v.selector(1)}));
    auto a = g.step(s, v.selector(0));
    EXPECT_EQ(g.valid_next(a).ids(), (std::vector<TokenId>{0, 1, 2, 3}));
    auto b = g.step(s, v.selector(1));
    EXPECT_EQ(g.valid_next(b).ids(), (std::vector<TokenId>{v.present(), v.absent()}));
    b = g.step(b, v.absent());
    EXPECT_TRUE(g.is_accept(b));
}

TEST(Grammar, InvalidStepLeavesStateUnchanged) {
    const auto g = toy_grammar();
    auto s = g.start();
    const auto before = s;
    EXPECT_THROW(g.advance(s, g.vocabulary().present()), TransitionError);
    EXPECT_EQ(s, before);
    EXPECT_THROW(g.advance(s, 999), TransitionError);
    EXPECT_EQ(s, before);
}

TEST(Grammar, MinimumItemsNeedNoMarker) {
    Schema s;
    s.messages = {MessageSpec{"Root", {FieldSpec{"xs", 1, Label::repeated, ScalarType{0}, 2, 3}}}};
    Vocabulary v({TokenGroup::discrete("two", 2)}, 0);
    const Grammar<> g(std::move(s), std::move(v));
    const Vocabulary &vocab = g.vocabulary();
    auto st = g.start();
    EXPECT_EQ(g.valid_next(st).ids(), (std::vector<TokenId>{0, 1}));
    st = g.step(st, 0);
    EXPECT_EQ(g.valid_next(st).ids(), (std::vector<TokenId>{0, 1}));
    st = g.step(st, 1);
    EXPECT_EQ(g.valid_next(st).ids(), (std::vector<TokenId>{vocab.end_repeated(), vocab.present()}));
    st = g.step(st, vocab.present());
    st = g.step(st, 1);
    EXPECT_EQ(g.valid_next(st).ids(), (std::vector<TokenId>{vocab.end_repeated()}));
}

TEST(Grammar, SelectorCountMismatchRejected) {
    Schema s;
    s.messages = {MessageSpec{"Root", {FieldSpec{"pick", 1, Label::required, OneofType{{0}}}}}};
    Vocabulary v({TokenGroup::discrete("one", 1)}, 0);
    EXPECT_THROW(Grammar<>(std::move(s), std::move(v)), ConfigError);
}

TEST(TokenMask, RangesAndRank) {
    TokenMask m(200);
    m.set_range(5, 70);
    m.set(130);
    m.reset(10);
    EXPECT_EQ(m.count(), 66u);
    EXPECT_EQ(m.nth(0), 5u);
    EXPECT_EQ(m.nth(5), 11u);
    EXPECT_EQ(m.nth(65), 130u);
    EXPECT_FALSE(m.test(199));
    EXPECT_FALSE(m.test(500));
}
