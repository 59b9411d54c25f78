#pragma once

// Incremental grammar automaton over a message schema. Given a state it yields
// the exact set of valid next tokens; stepping with any of them keeps the
// sequence parseable, so masking a model's scores with it guarantees valid
// output.
//
// Token layout of a message is its fields in declared order:
//   required scalar     one token of the field's group
//   required message    the message's tokens
//   optional X          ABSENT | PRESENT X
//   oneof {A, B, ...}   SELECT_k then the arm's tokens
//   repeated X          X{min_items} (PRESENT X)* END_REPEATED
// Items beyond the minimum count are announced by PRESENT so that the decision to
// continue a list is a single binary choice.
//
// Value-dependent restrictions (index ranges, ordering) are delegated to a
// Constraints policy that travels inside the state.

#include "procinv/error.hpp"
#include "procinv/vocabulary.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace procinv::grammar {

struct ScalarType {
    std::size_t group = 0;
};

struct MessageType {
    std::size_t message = 0;
};

/// Each arm is a message; arm k is chosen by the k-th selector token of this site.
struct OneofType {
    std::vector<std::size_t> arms;
};

enum class Label : std::uint8_t { required, optional, repeated };

struct FieldSpec {
    std::string name;
    int tag = 0;
    Label label = Label::required;
    std::variant<ScalarType, MessageType, OneofType> type;
    std::uint32_t min_items = 0;
    std::uint32_t max_items = std::numeric_limits<std::uint32_t>::max();
};

struct MessageSpec {
    std::string name;
    std::vector<FieldSpec> fields;
};

struct Schema {
    std::vector<MessageSpec> messages;
    std::size_t root = 0;

    std::uint32_t selector_count() const {
        std::uint32_t n = 0;
        for (const MessageSpec &m : messages) {
            for (const FieldSpec &f : m.fields) {
                if (const auto *o = std::get_if<OneofType>(&f.type)) {
                    n += static_cast<std::uint32_t>(o->arms.size());
                }
            }
        }
        return n;
    }

    /// Stable textual description, used for schema version hashing.
    std::string describe() const {
        std::ostringstream os;
        os << "root " << root << "\n";
        for (const MessageSpec &m : messages) {
            os << "message " << m.name << "\n";
            for (const FieldSpec &f : m.fields) {
                os << "  " << f.name << " tag=" << f.tag << " label=" << static_cast<int>(f.label);
                if (const auto *s = std::get_if<ScalarType>(&f.type)) {
                    os << " scalar=" << s->group;
                } else if (const auto *mt = std::get_if<MessageType>(&f.type)) {
                    os << " message=" << mt->message;
                } else {
                    os << " oneof=";
                    for (std::size_t a : std::get<OneofType>(f.type).arms) {
                        os << a << ",";
                    }
                }
                os << " min=" << f.min_items << " max=" << f.max_items << "\n";
            }
        }
        return os.str();
    }
};

enum class Phase : std::uint8_t { start, payload, child, optional_select, oneof_select, arm, loop };

struct Frame {
    std::uint32_t message = 0;
    std::uint32_t field = 0;
    Phase phase = Phase::start;
    std::uint32_t count = 0;
    std::uint32_t arm = 0;

    friend bool operator==(const Frame &, const Frame &) = default;
};

/// Read-only view of the automaton position handed to constraint and observer hooks.
class Cursor {
public:
    Cursor(const Schema &schema, std::span<const Frame> stack) : m_schema(&schema), m_stack(stack) {}

    const Frame &top() const { return m_stack.back(); }
    const FieldSpec &field() const { return m_schema->messages[top().message].fields[top().field]; }
    int tag() const { return field().tag; }
    /// Items completed so far in the current repeated field (index of the item being started).
    std::uint32_t count() const { return top().count; }
    std::size_t depth() const { return m_stack.size(); }

private:
    const Schema *m_schema;
    std::span<const Frame> m_stack;
};

/// Allowed local indices of a scalar position: [lo, hi] minus an optional hole.
struct Allowed {
    std::uint32_t lo = 0;
    std::uint32_t hi = 0;
    std::optional<std::uint32_t> hole;

    bool contains(std::uint32_t v) const { return v >= lo && v <= hi && (!hole || *hole != v); }
    bool empty() const { return lo > hi || (lo == hi && hole && *hole == lo); }
};

struct Unconstrained {
    Allowed scalar_allowed(const Cursor &, std::uint32_t cardinality) const { return {0, cardinality - 1, {}}; }
    bool may_continue(const Cursor &) const { return true; }
    void on_item(const Cursor &) {}
    void on_scalar(const Cursor &, std::uint32_t) {}
    void on_present(const Cursor &, bool) {}
    void on_select(const Cursor &, std::uint32_t) {}
    void on_end(const Cursor &) {}

    friend bool operator==(const Unconstrained &, const Unconstrained &) = default;
};

struct NullObserver {
    void on_item(const Cursor &) {}
    void on_scalar(const Cursor &, std::uint32_t) {}
    void on_present(const Cursor &, bool) {}
    void on_select(const Cursor &, std::uint32_t) {}
    void on_end(const Cursor &) {}
};

template <typename Constraints>
struct GrammarState {
    std::vector<Frame> stack;
    Constraints constraints{};
    bool accepted = false;

    friend bool operator==(const GrammarState &, const GrammarState &) = default;
};

class TransitionError : public Error {
public:
    TransitionError(TokenId token, const std::string &message) : Error("transition", message), m_token(token) {}

    TokenId token() const { return m_token; }

private:
    TokenId m_token;
};

template <typename Constraints = Unconstrained>
class Grammar {
public:
    using State = GrammarState<Constraints>;

    Grammar(Schema schema, Vocabulary vocabulary, Constraints prototype = {})
        : m_schema(std::move(schema)), m_vocab(std::move(vocabulary)), m_prototype(std::move(prototype)) {
        check_schema();
        std::uint32_t next = 0;
        m_selector_base.resize(m_schema.messages.size());
        for (std::size_t mi = 0; mi < m_schema.messages.size(); ++mi) {
            for (const FieldSpec &f : m_schema.messages[mi].fields) {
                m_selector_base[mi].push_back(next);
                if (const auto *o = std::get_if<OneofType>(&f.type)) {
                    next += static_cast<std::uint32_t>(o->arms.size());
                }
            }
        }
    }

    const Schema &schema() const { return m_schema; }
    const Vocabulary &vocabulary() const { return m_vocab; }

    State start() const {
        State s;
        s.constraints = m_prototype;
        s.stack.push_back(Frame{static_cast<std::uint32_t>(m_schema.root), 0, Phase::start, 0, 0});
        NullObserver none;
        settle(s, none);
        return s;
    }

    bool is_accept(const State &s) const { return s.accepted; }

    TokenMask valid_next(const State &s) const {
        TokenMask mask(m_vocab.size());
        if (s.accepted) {
            return mask;
        }
        const Frame &f = s.stack.back();
        const FieldSpec &fs = field_of(f);
        const Cursor cursor(m_schema, s.stack);
        switch (f.phase) {
        case Phase::payload: {
            const TokenGroup &g = m_vocab.group(std::get<ScalarType>(fs.type).group);
            const Allowed a = s.constraints.scalar_allowed(cursor, g.cardinality);
            if (a.lo <= a.hi) {
                mask.set_range(g.offset + a.lo, g.offset + a.hi);
                if (a.hole && *a.hole >= a.lo && *a.hole <= a.hi) {
                    mask.reset(g.offset + *a.hole);
                }
            }
            break;
        }
        case Phase::optional_select:
            mask.set(m_vocab.present());
            mask.set(m_vocab.absent());
            break;
        case Phase::oneof_select: {
            const auto arms = static_cast<std::uint32_t>(std::get<OneofType>(fs.type).arms.size());
            const std::uint32_t base = m_selector_base[f.message][f.field];
            mask.set_range(m_vocab.selector(base), m_vocab.selector(base + arms - 1));
            break;
        }
        case Phase::loop:
            mask.set(m_vocab.end_repeated());
            if (f.count < fs.max_items && s.constraints.may_continue(cursor)) {
                mask.set(m_vocab.present());
            }
            break;
        default:
            break;
        }
        return mask;
    }

    bool accepts(const State &s, TokenId id) const {
        if (s.accepted || id >= m_vocab.size()) {
            return false;
        }
        const Frame &f = s.stack.back();
        const FieldSpec &fs = field_of(f);
        const Cursor cursor(m_schema, s.stack);
        switch (f.phase) {
        case Phase::payload: {
            const TokenGroup &g = m_vocab.group(std::get<ScalarType>(fs.type).group);
            return g.contains(id) && s.constraints.scalar_allowed(cursor, g.cardinality).contains(id - g.offset);
        }
        case Phase::optional_select:
            return id == m_vocab.present() || id == m_vocab.absent();
        case Phase::oneof_select: {
            const auto arms = static_cast<std::uint32_t>(std::get<OneofType>(fs.type).arms.size());
            const TokenId first = m_vocab.selector(m_selector_base[f.message][f.field]);
            return id >= first && id < first + arms;
        }
        case Phase::loop:
            return id == m_vocab.end_repeated() ||
                   (id == m_vocab.present() && f.count < fs.max_items && s.constraints.may_continue(cursor));
        default:
            return false;
        }
    }

    /// Applies one token in place. On error the state is left unchanged.
    template <typename Observer>
    void advance(State &s, TokenId id, Observer &observer) const {
        if (!accepts(s, id)) {
            throw TransitionError(id, "token " + std::to_string(id) + " (" +
                                          (id < m_vocab.size() ? m_vocab.describe(id) : std::string("out of range")) +
                                          ") is not valid at this position");
        }
        Frame &f = s.stack.back();
        const FieldSpec &fs = field_of(f);
        const Cursor cursor(m_schema, s.stack);
        switch (f.phase) {
        case Phase::payload: {
            const TokenGroup &g = m_vocab.group(std::get<ScalarType>(fs.type).group);
            s.constraints.on_scalar(cursor, id - g.offset);
            observer.on_scalar(cursor, id - g.offset);
            complete_field(s);
            break;
        }
        case Phase::optional_select: {
            const bool present = id == m_vocab.present();
            s.constraints.on_present(cursor, present);
            observer.on_present(cursor, present);
            if (present) {
                f.phase = Phase::payload;
            } else {
                complete_field(s);
            }
            break;
        }
        case Phase::oneof_select: {
            const std::uint32_t arm = id - m_vocab.selector(m_selector_base[f.message][f.field]);
            s.constraints.on_select(cursor, arm);
            observer.on_select(cursor, arm);
            f.arm = arm;
            f.phase = Phase::arm;
            break;
        }
        case Phase::loop:
            if (id == m_vocab.end_repeated()) {
                s.constraints.on_end(cursor);
                observer.on_end(cursor);
                ++f.field;
                f.phase = Phase::start;
                f.count = 0;
            } else {
                s.constraints.on_item(cursor);
                observer.on_item(cursor);
                f.phase = Phase::payload;
            }
            break;
        default:
            break;
        }
        settle(s, observer);
    }

    void advance(State &s, TokenId id) const {
        NullObserver none;
        advance(s, id, none);
    }

    State step(const State &s, TokenId id) const {
        State next = s;
        advance(next, id);
        return next;
    }

private:
    static constexpr std::size_t kMaxDepth = 256;

    const FieldSpec &field_of(const Frame &f) const { return m_schema.messages[f.message].fields[f.field]; }

    void check_schema() const {
        if (m_schema.root >= m_schema.messages.size()) {
            throw ConfigError("schema root out of range");
        }
        if (m_vocab.control().cardinality != Vocabulary::kFixedControls + m_schema.selector_count()) {
            throw ConfigError("vocabulary selector count does not match the schema");
        }
        for (const MessageSpec &m : m_schema.messages) {
            for (const FieldSpec &f : m.fields) {
                if (f.label == Label::repeated && f.min_items > f.max_items) {
                    throw ConfigError("field " + f.name + ": min_items exceeds max_items");
                }
                if (const auto *s = std::get_if<ScalarType>(&f.type)) {
                    if (s->group >= m_vocab.control_index()) {
                        throw ConfigError("field " + f.name + ": scalar group out of range");
                    }
                } else if (const auto *mt = std::get_if<MessageType>(&f.type)) {
                    if (mt->message >= m_schema.messages.size()) {
                        throw ConfigError("field " + f.name + ": message out of range");
                    }
                } else {
                    const auto &arms = std::get<OneofType>(f.type).arms;
                    if (arms.empty()) {
                        throw ConfigError("field " + f.name + ": oneof without arms");
                    }
                    for (std::size_t a : arms) {
                        if (a >= m_schema.messages.size()) {
                            throw ConfigError("field " + f.name + ": oneof arm out of range");
                        }
                    }
                }
            }
        }
    }

    // A field finished: advance to the next field, or back to the list decision.
    void complete_field(State &s) const {
        Frame &f = s.stack.back();
        if (field_of(f).label == Label::repeated) {
            ++f.count;
            f.phase = Phase::loop;
        } else {
            ++f.field;
            f.phase = Phase::start;
        }
    }

    // Moves through positions that need no token until one that does (or accept).
    template <typename Observer>
    void settle(State &s, Observer &observer) const {
        while (!s.stack.empty()) {
            if (s.stack.size() > kMaxDepth) {
                throw ConfigError("schema nesting exceeds the automaton depth limit");
            }
            Frame &f = s.stack.back();
            const MessageSpec &m = m_schema.messages[f.message];
            if (f.field >= m.fields.size()) {
                s.stack.pop_back();
                if (s.stack.empty()) {
                    s.accepted = true;
                    return;
                }
                complete_field(s);
                continue;
            }
            const FieldSpec &fs = m.fields[f.field];
            switch (f.phase) {
            case Phase::start:
                if (fs.label == Label::optional) {
                    f.phase = Phase::optional_select;
                    return;
                }
                if (fs.label == Label::repeated) {
                    f.count = 0;
                    f.phase = Phase::loop;
                } else {
                    f.phase = Phase::payload;
                }
                continue;
            case Phase::loop:
                if (f.count < fs.min_items) {
                    const Cursor cursor(m_schema, s.stack);
                    s.constraints.on_item(cursor);
                    observer.on_item(cursor);
                    f.phase = Phase::payload;
                    continue;
                }
                return;
            case Phase::payload:
                if (std::holds_alternative<ScalarType>(fs.type)) {
                    return;
                }
                if (const auto *mt = std::get_if<MessageType>(&fs.type)) {
                    f.phase = Phase::child;
                    const auto child = static_cast<std::uint32_t>(mt->message);
                    s.stack.push_back(Frame{child, 0, Phase::start, 0, 0});
                    continue;
                }
                f.phase = Phase::oneof_select;
                return;
            case Phase::arm: {
                f.phase = Phase::child;
                const auto child = static_cast<std::uint32_t>(std::get<OneofType>(fs.type).arms[f.arm]);
                s.stack.push_back(Frame{child, 0, Phase::start, 0, 0});
                continue;
            }
            default:
                return;
            }
        }
        s.accepted = true;
    }

    Schema m_schema;
    Vocabulary m_vocab;
    Constraints m_prototype;
    std::vector<std::vector<std::uint32_t>> m_selector_base;
};

} // namespace procinv::grammar
