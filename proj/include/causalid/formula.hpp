#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "causalid/graph.hpp"
#include "causalid/prob_table.hpp"
#include "causalid/term.hpp"
#include "causalid/varset.hpp"

namespace causalid {

// Identifying-formula expression tree. Leaves are distribution terms; inner
// nodes are sums over variable domains, products, and quotients. Immutable,
// shared via pointers.
class Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

class Formula {
public:
    enum class Kind { Atom, Sum, Product, Quotient };

    static FormulaPtr atom(DistributionTerm t) {
        auto f = std::make_shared<Formula>();
        f->kind_ = Kind::Atom;
        f->term_ = std::move(t);
        return f;
    }
    static FormulaPtr sum(VarSet over, FormulaPtr body) {
        if (over.empty()) throw std::invalid_argument("sum with empty scope");
        if (!free_variables(*body).contains_all(over))
            throw std::invalid_argument("sum over variables not free in body");
        auto f = std::make_shared<Formula>();
        f->kind_ = Kind::Sum;
        f->over_ = over;
        f->children_ = {std::move(body)};
        return f;
    }
    static FormulaPtr product(std::vector<FormulaPtr> factors) {
        if (factors.size() < 2) throw std::invalid_argument("product needs at least two factors");
        auto f = std::make_shared<Formula>();
        f->kind_ = Kind::Product;
        f->children_ = std::move(factors);
        return f;
    }
    static FormulaPtr quotient(FormulaPtr num, FormulaPtr den) {
        auto f = std::make_shared<Formula>();
        f->kind_ = Kind::Quotient;
        f->children_ = {std::move(num), std::move(den)};
        return f;
    }

    Kind kind() const { return kind_; }
    const DistributionTerm& term() const { return term_; }
    VarSet over() const { return over_; }
    const std::vector<FormulaPtr>& children() const { return children_; }

    // Free variables: all symbolic variables of the leaves, minus sum-bound
    // ones. Value-fixed indicators are constants, not variables.
    static VarSet free_variables(const Formula& f) {
        switch (f.kind_) {
            case Kind::Atom:
                return f.term_.left | f.term_.dos | f.term_.cond;
            case Kind::Sum:
                return free_variables(*f.children_[0]) - f.over_;
            default: {
                VarSet out;
                for (const auto& c : f.children_) out |= free_variables(*c);
                return out;
            }
        }
    }

private:
    Kind kind_ = Kind::Atom;
    DistributionTerm term_;
    VarSet over_;
    std::vector<FormulaPtr> children_;
};

inline VarSet free_variables(const FormulaPtr& f) { return Formula::free_variables(*f); }

// ---------------------------------------------------------------------------
// Rendering: sums as [sum_{A,B} body], products as [x*y], quotients as
// [x/y], atoms as p(left|do(dos),cond,R=1...) with role lists in
// variable-index order.
// ---------------------------------------------------------------------------

inline std::string render(const Formula& f, const CausalGraph& g) {
    switch (f.kind()) {
        case Formula::Kind::Atom:
            return render_term(f.term(), g);
        case Formula::Kind::Sum: {
            std::string out = "[sum_{";
            bool first = true;
            for (int v : f.over()) {
                if (!first) out += ',';
                first = false;
                out += g.name(v);
            }
            out += "} " + render(*f.children()[0], g) + "]";
            return out;
        }
        case Formula::Kind::Product: {
            std::string out = "[";
            for (std::size_t i = 0; i < f.children().size(); ++i) {
                if (i) out += '*';
                out += render(*f.children()[i], g);
            }
            return out + "]";
        }
        case Formula::Kind::Quotient:
            return "[" + render(*f.children()[0], g) + "/" + render(*f.children()[1], g) + "]";
    }
    throw std::logic_error("unreachable");
}

inline std::string render(const FormulaPtr& f, const CausalGraph& g) { return render(*f, g); }

// ---------------------------------------------------------------------------
// Parsing the rendered grammar back into a tree.
// ---------------------------------------------------------------------------

namespace detail {

class FormulaParser {
public:
    FormulaParser(std::string_view text, const CausalGraph& g) : text_(text), g_(g) {}

    FormulaPtr parse() {
        FormulaPtr f = node();
        skip_ws();
        if (pos_ != text_.size())
            throw std::invalid_argument("trailing characters in formula: " + std::string(text_));
        return f;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    bool peek(char c) {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == c;
    }
    void expect(char c) {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] != c)
            throw std::invalid_argument(std::string("expected '") + c + "' in formula");
        ++pos_;
    }

    FormulaPtr node() {
        skip_ws();
        if (peek('[')) return bracketed();
        return atom();
    }

    FormulaPtr atom() {
        skip_ws();
        std::size_t start = pos_;
        if (pos_ >= text_.size() || (text_[pos_] != 'p' && text_[pos_] != 'P'))
            throw std::invalid_argument("expected p(...) atom in formula");
        int depth = 0;
        std::size_t i = pos_;
        for (; i < text_.size(); ++i) {
            if (text_[i] == '(') ++depth;
            else if (text_[i] == ')') {
                if (--depth == 0) { ++i; break; }
            }
        }
        if (depth != 0) throw std::invalid_argument("unbalanced parentheses in atom");
        pos_ = i;
        return Formula::atom(parse_term(text_.substr(start, i - start), g_));
    }

    FormulaPtr bracketed() {
        expect('[');
        skip_ws();
        if (text_.compare(pos_, 5, "sum_{") == 0) {
            pos_ += 5;
            VarSet over;
            for (;;) {
                skip_ws();
                std::size_t start = pos_;
                while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != '}')
                    ++pos_;
                std::string name(text_.substr(start, pos_ - start));
                while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back())))
                    name.pop_back();
                over.insert(g_.require(name));
                if (peek(',')) { ++pos_; continue; }
                expect('}');
                break;
            }
            FormulaPtr body = node();
            expect(']');
            return Formula::sum(over, std::move(body));
        }
        FormulaPtr first = node();
        skip_ws();
        if (peek('*')) {
            std::vector<FormulaPtr> factors{first};
            while (peek('*')) {
                ++pos_;
                factors.push_back(node());
            }
            expect(']');
            return Formula::product(std::move(factors));
        }
        if (peek('/')) {
            ++pos_;
            FormulaPtr den = node();
            expect(']');
            return Formula::quotient(std::move(first), std::move(den));
        }
        expect(']');  // redundant brackets around a single node
        return first;
    }

    std::string_view text_;
    const CausalGraph& g_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline FormulaPtr parse_formula(std::string_view text, const CausalGraph& g) {
    return detail::FormulaParser(text, g).parse();
}

// Replaces every atom equal to `term` by `replacement`. Substitution under a
// sum is rejected when the replacement introduces a variable the sum binds
// (capture); variables the atom already mentions stay bound as before.
inline FormulaPtr substitute_atom(const FormulaPtr& f, const DistributionTerm& term,
                                  const FormulaPtr& replacement, VarSet bound = {}) {
    switch (f->kind()) {
        case Formula::Kind::Atom:
            if (f->term() == term) {
                VarSet introduced =
                    free_variables(replacement) - (term.left | term.dos | term.cond);
                if (introduced.intersects(bound))
                    throw std::invalid_argument("substitution would capture a bound sum variable");
                return replacement;
            }
            return f;
        case Formula::Kind::Sum: {
            auto body = substitute_atom(f->children()[0], term, replacement, bound | f->over());
            return body == f->children()[0] ? f : Formula::sum(f->over(), body);
        }
        case Formula::Kind::Product: {
            std::vector<FormulaPtr> out;
            bool changed = false;
            for (const auto& c : f->children()) {
                out.push_back(substitute_atom(c, term, replacement, bound));
                changed |= out.back() != c;
            }
            return changed ? Formula::product(std::move(out)) : f;
        }
        case Formula::Kind::Quotient: {
            auto num = substitute_atom(f->children()[0], term, replacement, bound);
            auto den = substitute_atom(f->children()[1], term, replacement, bound);
            return (num == f->children()[0] && den == f->children()[1])
                       ? f
                       : Formula::quotient(num, den);
        }
    }
    throw std::logic_error("unreachable");
}

// ---------------------------------------------------------------------------
// Numeric evaluation over bound atom tables
// ---------------------------------------------------------------------------

struct EvalOptions {
    double zero_num_zero_den = 0.0;  // value of 0/0 cells (positivity gaps)
};

struct EvalStats {
    long zero_over_zero = 0;  // 0/0 cells hit (warning counter)
};

class AtomBindings {
public:
    void bind(const DistributionTerm& t, ProbTable table) { map_[t] = std::move(table); }
    const ProbTable* find(const DistributionTerm& t) const {
        auto it = map_.find(t);
        return it == map_.end() ? nullptr : &it->second;
    }
    const std::unordered_map<DistributionTerm, ProbTable, TermHash>& all() const { return map_; }

private:
    std::unordered_map<DistributionTerm, ProbTable, TermHash> map_;
};

namespace detail {

struct EvalContext {
    const AtomBindings* bindings;
    const std::vector<int>* cards;  // per graph variable
    const CausalGraph* g;
    EvalOptions opts;
    EvalStats* stats;
};

inline double eval_node(const Formula& f, std::vector<int>& env, const EvalContext& cx) {
    switch (f.kind()) {
        case Formula::Kind::Atom: {
            const ProbTable* t = cx.bindings->find(f.term());
            if (!t)
                throw std::invalid_argument("unbound atom: " + render_term(f.term(), *cx.g));
            return t->at_env(env);
        }
        case Formula::Kind::Sum: {
            std::vector<int> vars;
            for (int v : f.over()) vars.push_back(v);
            std::vector<int> saved;
            for (int v : vars) saved.push_back(env[v]);
            for (int v : vars) env[v] = 0;
            double total = 0.0;
            for (;;) {
                total += eval_node(*f.children()[0], env, cx);
                std::size_t k = vars.size();
                for (; k-- > 0;) {
                    if (++env[vars[k]] < (*cx.cards)[vars[k]]) break;
                    env[vars[k]] = 0;
                }
                if (k == static_cast<std::size_t>(-1)) break;
            }
            for (std::size_t i = 0; i < vars.size(); ++i) env[vars[i]] = saved[i];
            return total;
        }
        case Formula::Kind::Product: {
            double p = 1.0;
            for (const auto& c : f.children()) p *= eval_node(*c, env, cx);
            return p;
        }
        case Formula::Kind::Quotient: {
            double num = eval_node(*f.children()[0], env, cx);
            double den = eval_node(*f.children()[1], env, cx);
            if (den == 0.0) {
                if (num == 0.0) {
                    ++cx.stats->zero_over_zero;
                    return cx.opts.zero_num_zero_den;
                }
                throw std::runtime_error("division by zero with nonzero numerator in formula");
            }
            return num / den;
        }
    }
    throw std::logic_error("unreachable");
}

}  // namespace detail

// Evaluates the formula as a table over the query term's scope. Cardinalities
// are taken per graph variable; every atom must be bound and every binding's
// scope assignable from the environment.
inline ProbTable evaluate(const FormulaPtr& f, const AtomBindings& bindings,
                          const DistributionTerm& query, const CausalGraph& g,
                          const std::vector<int>& cards, EvalStats* stats = nullptr,
                          EvalOptions opts = {}) {
    VarSet scope_set = query.left | query.cond | query.dos;
    VarSet free = free_variables(f);

    ProbTable out;
    for (int v : scope_set) {
        out.vars.push_back(v);
        out.cards.push_back(cards.at(v));
    }
    out.cond = query.cond;
    out.dos = query.dos;
    out.values.assign(out.total_cells(), 0.0);

    EvalStats local;
    detail::EvalContext cx{&bindings, &cards, &g, opts, stats ? stats : &local};

    std::vector<int> env(g.size(), -1);
    // Variables free in the formula but outside the query scope arise from
    // observation/intervention deletions during the derivation; the rule
    // conditions make their value irrelevant, so pin them.
    for (int v : free - scope_set) env[v] = 0;
    std::vector<int> scope(out.vars);
    for (int v : scope) env[v] = 0;
    std::size_t idx = 0;
    for (;;) {
        out.values[idx++] = detail::eval_node(*f, env, cx);
        std::size_t k = scope.size();
        for (; k-- > 0;) {
            if (++env[scope[k]] < cards.at(scope[k])) break;
            env[scope[k]] = 0;
        }
        if (k == static_cast<std::size_t>(-1)) break;
    }
    return out;
}

}  // namespace causalid
