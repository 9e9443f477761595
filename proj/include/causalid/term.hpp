#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "causalid/graph.hpp"
#include "causalid/varset.hpp"

namespace causalid {

// Symbolic distribution term
//
//   P( left, left_one=1, left_zero=0 | do(dos), cond, cond_one=1, cond_zero=0 )
//
// Role sets are pairwise disjoint; the valued sets hold response indicators
// only. A term is a value object and is canonical by construction: equality
// and hashing depend on the seven sets alone.
struct DistributionTerm {
    VarSet left;        // symbolic variables whose distribution this is
    VarSet dos;         // intervened variables
    VarSet cond;        // symbolic conditioning variables
    VarSet left_one;    // indicators fixed at 1 on the joint side
    VarSet left_zero;   // indicators fixed at 0 on the joint side
    VarSet cond_one;    // indicators conditioned at 1
    VarSet cond_zero;   // indicators conditioned at 0

    VarSet left_total() const { return left | left_one | left_zero; }
    VarSet cond_total() const { return cond | cond_one | cond_zero; }
    VarSet all_vars() const { return left_total() | dos | cond_total(); }

    bool operator==(const DistributionTerm&) const = default;
};

inline std::uint64_t stable_hash(const DistributionTerm& t) {
    auto mix = [](std::uint64_t h, std::uint64_t v) {
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h *= 0xff51afd7ed558ccdULL;
        return h ^ (h >> 33);
    };
    std::uint64_t h = 0x2545f4914f6cdd1dULL;
    h = mix(h, t.left.bits());
    h = mix(h, t.dos.bits());
    h = mix(h, t.cond.bits());
    h = mix(h, t.left_one.bits());
    h = mix(h, t.left_zero.bits());
    h = mix(h, t.cond_one.bits());
    h = mix(h, t.cond_zero.bits());
    return h;
}

struct TermHash {
    std::size_t operator()(const DistributionTerm& t) const {
        return static_cast<std::size_t>(stable_hash(t));
    }
};

inline void validate_term(const DistributionTerm& t, const CausalGraph& g) {
    const VarSet sets[] = {t.left, t.dos, t.cond, t.left_one, t.left_zero,
                           t.cond_one, t.cond_zero};
    VarSet seen;
    for (VarSet s : sets) {
        if (s.intersects(seen))
            throw std::invalid_argument("term role sets overlap");
        seen |= s;
    }
    if (!g.all_variables().contains_all(seen))
        throw std::invalid_argument("term mentions variables outside the graph");
    if (t.left_total().empty())
        throw std::invalid_argument("term has an empty left side");
    for (VarSet s : {t.left_one, t.left_zero, t.cond_one, t.cond_zero})
        for (int v : s)
            if (g.kind(v) != VarKind::ResponseIndicator)
                throw std::invalid_argument("value binding on non-indicator variable " + g.name(v));
}

// Terms are stored canonically (sorted bitmask roles); this validates and
// returns the term unchanged. Exposed so callers can assert canonicity.
inline DistributionTerm canonicalize(const DistributionTerm& t, const CausalGraph& g) {
    validate_term(t, g);
    return t;
}

// ---------------------------------------------------------------------------
// Term syntax:  P(list [| list])
// where items are variable names, do(A,B,...) groups (right side), and
// R = 0|1 value bindings for response indicators. Whitespace-insensitive,
// case-sensitive; '*' suffix names a proxy.
// ---------------------------------------------------------------------------

namespace detail {

struct TermLexer {
    std::string_view text;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    bool eat(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) { ++pos; return true; }
        return false;
    }
    void expect(char c) {
        if (!eat(c))
            throw std::invalid_argument(std::string("expected '") + c + "' in term: " + std::string(text));
    }
    bool done() {
        skip_ws();
        return pos >= text.size();
    }
    std::string ident() {
        skip_ws();
        std::size_t start = pos;
        auto is_start = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
        auto is_cont = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
        if (pos >= text.size() || !is_start(text[pos]))
            throw std::invalid_argument("expected identifier in term: " + std::string(text));
        ++pos;
        while (pos < text.size() && is_cont(text[pos])) ++pos;
        if (pos < text.size() && text[pos] == '*') ++pos;
        return std::string(text.substr(start, pos - start));
    }
};

}  // namespace detail

inline DistributionTerm parse_term(std::string_view text, const CausalGraph& g) {
    detail::TermLexer lx{text};
    lx.skip_ws();
    if (lx.pos >= lx.text.size() || (lx.text[lx.pos] != 'P' && lx.text[lx.pos] != 'p'))
        throw std::invalid_argument("term must start with P(: " + std::string(text));
    ++lx.pos;
    lx.expect('(');

    DistributionTerm t;
    VarSet taken;
    auto claim = [&](int v) {
        if (taken.contains(v))
            throw std::invalid_argument("variable " + g.name(v) + " appears in two roles: " + std::string(text));
        taken.insert(v);
    };

    bool right_side = false;
    bool any_left = false;
    for (;;) {
        std::string id = lx.ident();
        if (id == "do") {
            if (!right_side)
                throw std::invalid_argument("do(...) group on the left side: " + std::string(text));
            lx.expect('(');
            do {
                int v = g.require(lx.ident());
                claim(v);
                t.dos.insert(v);
            } while (lx.eat(','));
            lx.expect(')');
        } else {
            int v = g.require(id);
            if (lx.eat('=')) {
                lx.skip_ws();
                if (lx.pos >= lx.text.size() || (lx.text[lx.pos] != '0' && lx.text[lx.pos] != '1'))
                    throw std::invalid_argument("value binding must be 0 or 1: " + std::string(text));
                bool one = lx.text[lx.pos] == '1';
                ++lx.pos;
                if (g.kind(v) != VarKind::ResponseIndicator)
                    throw std::invalid_argument("value binding on non-indicator " + g.name(v));
                claim(v);
                if (right_side) (one ? t.cond_one : t.cond_zero).insert(v);
                else (one ? t.left_one : t.left_zero).insert(v);
            } else {
                claim(v);
                (right_side ? t.cond : t.left).insert(v);
            }
            if (!right_side) any_left = true;
        }
        if (lx.eat(',')) continue;
        if (!right_side && lx.eat('|')) { right_side = true; continue; }
        lx.expect(')');
        break;
    }
    if (!lx.done())
        throw std::invalid_argument("trailing characters after term: " + std::string(text));
    if (!any_left && t.left_total().empty())
        throw std::invalid_argument("term has an empty left side: " + std::string(text));
    return canonicalize(t, g);
}

// Renders role lists comma-separated in variable-index order:
// p(left,R=1|do(dos),cond,R=1,R=0)
inline std::string render_term(const DistributionTerm& t, const CausalGraph& g,
                               char head = 'p') {
    std::string out(1, head);
    out += '(';
    bool first = true;
    auto emit = [&](VarSet s, const char* suffix) {
        for (int v : s) {
            if (!first) out += ',';
            first = false;
            out += g.name(v);
            out += suffix;
        }
    };
    emit(t.left, "");
    emit(t.left_one, "=1");
    emit(t.left_zero, "=0");
    if (!t.dos.empty() || !t.cond_total().empty()) {
        out += '|';
        first = true;
        if (!t.dos.empty()) {
            out += "do(";
            emit(t.dos, "");
            out += ')';
            first = false;
        }
        emit(t.cond, "");
        emit(t.cond_one, "=1");
        emit(t.cond_zero, "=0");
    }
    out += ')';
    return out;
}

struct QuerySpec {
    CausalGraph graph;
    DistributionTerm target;
    std::vector<DistributionTerm> inputs;

    void validate() const {
        validate_term(target, graph);
        if (inputs.empty())
            throw std::invalid_argument("query has no input distributions");
        for (const auto& in : inputs) validate_term(in, graph);
    }
};

}  // namespace causalid
