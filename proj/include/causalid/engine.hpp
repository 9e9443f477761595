#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "causalid/formula.hpp"
#include "causalid/graph.hpp"
#include "causalid/term.hpp"
#include "causalid/varset.hpp"

namespace causalid {

// ---------------------------------------------------------------------------
// Rule machinery
// ---------------------------------------------------------------------------

enum class RuleId {
    InputAxiom,
    DoCalc1,
    DoCalc2,
    DoCalc3,
    Marginalize,
    Condition,
    ProductDecompose,
    ProductCompose,
    EnumerateIndicator,
    ProxyExchange,
    ProductDivide,
};

inline const char* rule_name(RuleId r) {
    switch (r) {
        case RuleId::InputAxiom: return "input";
        case RuleId::DoCalc1: return "do-calculus-1";
        case RuleId::DoCalc2: return "do-calculus-2";
        case RuleId::DoCalc3: return "do-calculus-3";
        case RuleId::Marginalize: return "marginalize";
        case RuleId::Condition: return "condition";
        case RuleId::ProductDecompose: return "product-decompose";
        case RuleId::ProductCompose: return "product-compose";
        case RuleId::EnumerateIndicator: return "enumerate-indicator";
        case RuleId::ProxyExchange: return "proxy-exchange";
        case RuleId::ProductDivide: return "product-divide";
    }
    return "?";
}

enum class RuleDirection { Insert, Delete };
enum class BindKind { Symbolic, One, Zero };

namespace detail {

// d-separation under a (cut_incoming, cut_outgoing) mutilation applied on
// the fly; same semantics as d_separated(mutilate(g, in, out), a, b, c) but
// without constructing graphs. Buffers are reused across calls.
class FastDSep {
public:
    explicit FastDSep(const CausalGraph& g)
        : n_(g.size()),
          dir_(g.directed_edges()),
          bi_(g.bidirected_edges()) {
        total_ = n_ + static_cast<int>(bi_.size());
        par_.resize(total_);
        chi_.resize(total_);
        in_c_.resize(total_);
        anc_.resize(total_);
        seen_.resize(static_cast<std::size_t>(total_) * 2);
    }

    bool separated(VarSet a, VarSet b, VarSet c, VarSet cut_in, VarSet cut_out) {
        for (int v = 0; v < total_; ++v) {
            par_[v].clear();
            chi_[v].clear();
            in_c_[v] = 0;
            anc_[v] = 0;
        }
        std::fill(seen_.begin(), seen_.end(), 0);
        for (const auto& e : dir_) {
            if (cut_in.contains(e.to) || cut_out.contains(e.from)) continue;
            par_[e.to].push_back(e.from);
            chi_[e.from].push_back(e.to);
        }
        for (std::size_t j = 0; j < bi_.size(); ++j) {
            const auto& e = bi_[j];
            if (cut_in.contains(e.a) || cut_in.contains(e.b)) continue;
            int lat = n_ + static_cast<int>(j);
            chi_[lat].push_back(e.a);
            chi_[lat].push_back(e.b);
            par_[e.a].push_back(lat);
            par_[e.b].push_back(lat);
        }
        for (int v : c) in_c_[v] = 1;
        stack_.clear();
        for (int v : c) {
            if (!anc_[v]) { anc_[v] = 1; stack_.push_back(v); }
        }
        while (!stack_.empty()) {
            int v = stack_.back();
            stack_.pop_back();
            for (int p : par_[v])
                if (!anc_[p]) { anc_[p] = 1; stack_.push_back(p); }
        }

        visit_.clear();
        auto visit = [&](int v, int dir) {
            if (!seen_[static_cast<std::size_t>(v) * 2 + dir]) {
                seen_[static_cast<std::size_t>(v) * 2 + dir] = 1;
                visit_.push_back({v, dir});
            }
        };
        for (int v : a) visit(v, 0);
        while (!visit_.empty()) {
            auto [v, dir] = visit_.back();
            visit_.pop_back();
            if (v < n_ && b.contains(v)) return false;
            if (dir == 0) {
                if (!in_c_[v]) {
                    for (int p : par_[v]) visit(p, 0);
                    for (int ch : chi_[v]) visit(ch, 1);
                }
            } else {
                if (!in_c_[v])
                    for (int ch : chi_[v]) visit(ch, 1);
                if (anc_[v])
                    for (int p : par_[v]) visit(p, 0);
            }
        }
        return true;
    }

    // Ancestors (reflexive) of s in the graph with incoming edges to cut_in
    // removed; bidirected edges count via their latent parents' other child.
    VarSet ancestors_cut(VarSet s, VarSet cut_in) const {
        VarSet out = s;
        for (;;) {
            VarSet next = out;
            for (const auto& e : dir_) {
                if (cut_in.contains(e.to)) continue;
                if (out.contains(e.to)) next.insert(e.from);
            }
            if (next == out) return out;
            out = next;
        }
    }

private:
    int n_ = 0, total_ = 0;
    std::vector<DirectedEdge> dir_;
    std::vector<BidirectedEdge> bi_;
    std::vector<std::vector<int>> par_, chi_;
    std::vector<char> in_c_, anc_, seen_;
    std::vector<int> stack_;
    std::vector<std::pair<int, int>> visit_;
};

}  // namespace detail

// --- do-calculus rules (Insert and Delete directions) ----------------------
//
// Terms are P(A | do(B), C) with A the joint side (value-fixed indicators
// included) and C the conditioning side (likewise). Rule conditions are
// d-separation statements in mutilated graphs; values never matter for the
// conditions, only the variable sets.

inline std::optional<DistributionTerm> apply_rule1(const DistributionTerm& t, VarSet z,
                                                   const CausalGraph& g, RuleDirection dir,
                                                   BindKind bind = BindKind::Symbolic,
                                                   detail::FastDSep* ds = nullptr) {
    if (z.empty()) return std::nullopt;
    std::optional<detail::FastDSep> local;
    if (!ds) local.emplace(g);
    detail::FastDSep& d = ds ? *ds : *local;
    const VarSet a = t.left_total();
    const VarSet b = t.dos;
    const VarSet c = t.cond_total();
    DistributionTerm out = t;
    if (dir == RuleDirection::Delete) {
        if (!c.contains_all(z)) return std::nullopt;
        if (!d.separated(a, z, b | (c - z), b, {})) return std::nullopt;
        out.cond -= z;
        out.cond_one -= z;
        out.cond_zero -= z;
        return out;
    }
    if (z.intersects(t.all_vars())) return std::nullopt;
    if (bind != BindKind::Symbolic)
        for (int v : z)
            if (g.kind(v) != VarKind::ResponseIndicator) return std::nullopt;
    if (!d.separated(a, z, b | c, b, {})) return std::nullopt;
    switch (bind) {
        case BindKind::Symbolic: out.cond |= z; break;
        case BindKind::One: out.cond_one |= z; break;
        case BindKind::Zero: out.cond_zero |= z; break;
    }
    return out;
}

// Exchange between observation and intervention. Insert = cond -> do,
// Delete = do -> cond. Exchanged variables must be symbolic.
inline std::optional<DistributionTerm> apply_rule2(const DistributionTerm& t, VarSet z,
                                                   const CausalGraph& g, RuleDirection dir,
                                                   detail::FastDSep* ds = nullptr) {
    if (z.empty()) return std::nullopt;
    std::optional<detail::FastDSep> local;
    if (!ds) local.emplace(g);
    detail::FastDSep& d = ds ? *ds : *local;
    const VarSet a = t.left_total();
    DistributionTerm out = t;
    if (dir == RuleDirection::Insert) {  // P(A|do(B),C,z) -> P(A|do(B,z),C)
        if (!t.cond.contains_all(z)) return std::nullopt;
        if (!d.separated(a, z, t.dos | (t.cond_total() - z), t.dos, z)) return std::nullopt;
        out.cond -= z;
        out.dos |= z;
        return out;
    }
    if (!t.dos.contains_all(z)) return std::nullopt;  // P(A|do(B),C) -> P(A|do(B-z),C,z)
    VarSet kept = t.dos - z;
    if (!d.separated(a, z, kept | t.cond_total(), kept, z)) return std::nullopt;
    out.dos -= z;
    out.cond |= z;
    return out;
}

// Insertion/deletion of interventions; uses Z(W) = z minus ancestors of the
// conditioning set in the do(B)-cut graph.
inline std::optional<DistributionTerm> apply_rule3(const DistributionTerm& t, VarSet z,
                                                   const CausalGraph& g, RuleDirection dir,
                                                   detail::FastDSep* ds = nullptr) {
    if (z.empty()) return std::nullopt;
    std::optional<detail::FastDSep> local;
    if (!ds) local.emplace(g);
    detail::FastDSep& d = ds ? *ds : *local;
    const VarSet a = t.left_total();
    const VarSet c = t.cond_total();
    DistributionTerm out = t;
    VarSet kept;
    if (dir == RuleDirection::Delete) {
        if (!t.dos.contains_all(z)) return std::nullopt;
        kept = t.dos - z;
        out.dos -= z;
    } else {
        if (z.intersects(t.all_vars())) return std::nullopt;
        kept = t.dos;
        out.dos |= z;
    }
    VarSet z_eff = z - d.ancestors_cut(c, kept);
    if (!d.separated(a, z, kept | c, kept | z_eff, {})) return std::nullopt;
    return out;
}

// --- probability-calculus rules --------------------------------------------

inline std::optional<DistributionTerm> marginalize(const DistributionTerm& t, VarSet out_set) {
    if (out_set.empty() || !t.left.contains_all(out_set)) return std::nullopt;
    DistributionTerm out = t;
    out.left -= out_set;
    if (out.left_total().empty()) return std::nullopt;
    return out;
}

struct ConditionResult {
    DistributionTerm conditioned;
    DistributionTerm denominator;  // P(onto | original context)
};

// P(A | do(B), C) -> P(A \ onto | do(B), C, onto). Valid only when every
// value-fixed joint-side indicator moves (the denominator must be a
// marginal of the parent, which can only sum symbolic variables).
inline std::optional<ConditionResult> condition(const DistributionTerm& t, VarSet onto) {
    if (onto.empty() || !t.left_total().contains_all(onto)) return std::nullopt;
    if (!((t.left_one | t.left_zero) - onto).empty()) return std::nullopt;
    VarSet rest = t.left_total() - onto;
    if (rest.empty()) return std::nullopt;
    ConditionResult r;
    r.conditioned = t;
    r.conditioned.left -= onto;
    r.conditioned.cond |= onto & t.left;
    r.conditioned.cond_one |= onto & t.left_one;
    r.conditioned.cond_zero |= onto & t.left_zero;
    r.conditioned.left_one -= onto;
    r.conditioned.left_zero -= onto;
    r.denominator = t;
    r.denominator.left = onto & t.left;
    return r;
}

// P(A, split | do(B), C) -> { P(A | do(B), C, split), P(split | do(B), C) }.
inline std::optional<std::pair<DistributionTerm, DistributionTerm>> product_decompose(
    const DistributionTerm& t, VarSet split) {
    auto c = condition(t, split);
    if (!c) return std::nullopt;
    return std::make_pair(c->conditioned, c->denominator);
}

// P(A | do(D), C, W) x P(W | do(D), C) -> P(A, W | do(D), C).
inline std::optional<DistributionTerm> product_compose(const DistributionTerm& t1,
                                                       const DistributionTerm& t2) {
    if (t1.dos != t2.dos) return std::nullopt;
    if (!t1.cond.contains_all(t2.left) || !t1.cond_one.contains_all(t2.left_one) ||
        !t1.cond_zero.contains_all(t2.left_zero))
        return std::nullopt;
    if (!(t1.cond - t2.left == t2.cond) || !(t1.cond_one - t2.left_one == t2.cond_one) ||
        !(t1.cond_zero - t2.left_zero == t2.cond_zero))
        return std::nullopt;
    DistributionTerm out = t2;
    out.left |= t1.left;
    out.left_one |= t1.left_one;
    out.left_zero |= t1.left_zero;
    return out;
}

// Inverse chain rule on a value-fixed indicator (selection recovery):
// from t1 = P(A, R=r | C) and t2 = P(R=r | A, C) derive P(A | C).
inline std::optional<DistributionTerm> product_divide(const DistributionTerm& t1,
                                                      const DistributionTerm& t2) {
    VarSet r_one = t2.left_one, r_zero = t2.left_zero;
    if (!t2.left.empty()) return std::nullopt;
    if ((r_one | r_zero).size() != 1) return std::nullopt;
    if (!t1.left_one.contains_all(r_one) || !t1.left_zero.contains_all(r_zero))
        return std::nullopt;
    if (t1.dos != t2.dos) return std::nullopt;
    DistributionTerm out = t1;
    out.left_one -= r_one;
    out.left_zero -= r_zero;
    if (out.left_total().empty()) return std::nullopt;
    // t2 must condition on exactly the rest of t1's joint side plus context.
    if (!(t2.cond == (t1.cond | out.left)) || !(t2.cond_one == (t1.cond_one | out.left_one)) ||
        !(t2.cond_zero == (t1.cond_zero | out.left_zero)))
        return std::nullopt;
    return out;
}

// --- missing-data rules -----------------------------------------------------

// Splits a symbolic response indicator into its two value-fixed terms; works
// on either side of the bar. Rebuilding the parent is marginal recombination.
inline std::optional<std::pair<DistributionTerm, DistributionTerm>> enumerate_indicator(
    const DistributionTerm& t, int r, const CausalGraph& g) {
    if (g.kind(r) != VarKind::ResponseIndicator) return std::nullopt;
    DistributionTerm one = t, zero = t;
    if (t.left.contains(r)) {
        one.left.erase(r);
        one.left_one.insert(r);
        zero.left.erase(r);
        zero.left_zero.insert(r);
    } else if (t.cond.contains(r)) {
        one.cond.erase(r);
        one.cond_one.insert(r);
        zero.cond.erase(r);
        zero.cond_zero.insert(r);
    } else {
        return std::nullopt;
    }
    return std::make_pair(one, zero);
}

// Swaps X <-> X* in the term, valid where the measurement event R_X = 1 is
// part of the term's event: a joint-side occurrence needs R_X = 1 fixed
// anywhere, a conditioning-side occurrence needs R_X = 1 conditioned (with
// R_X = 1 only on the joint side, P(..|X*=x) and P(..|X=x) have different
// normalizers). Rejected when R_X is not fixed at 1.
inline std::optional<DistributionTerm> proxy_exchange(const DistributionTerm& t, int x,
                                                      const CausalGraph& g) {
    auto star_opt = g.proxy_of(x);
    auto r_opt = g.indicator_of(x);
    if (!star_opt || !r_opt) return std::nullopt;
    int star = *star_opt, r = *r_opt;
    const bool left_ok = t.left_one.contains(r) || t.cond_one.contains(r);
    const bool cond_ok = t.cond_one.contains(r);
    DistributionTerm out = t;
    auto swap_in = [&](VarSet& s, int from, int to) {
        if (out.all_vars().contains(to)) return false;  // role already occupied
        s.erase(from);
        s.insert(to);
        return true;
    };
    if (t.left.contains(star)) {
        if (!left_ok || !swap_in(out.left, star, x)) return std::nullopt;
    } else if (t.cond.contains(star)) {
        if (!cond_ok || !swap_in(out.cond, star, x)) return std::nullopt;
    } else if (t.left.contains(x)) {
        if (!left_ok || !swap_in(out.left, x, star)) return std::nullopt;
    } else if (t.cond.contains(x)) {
        if (!cond_ok || !swap_in(out.cond, x, star)) return std::nullopt;
    } else {
        return std::nullopt;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Search
// ---------------------------------------------------------------------------

struct SearchLimits {
    std::uint64_t max_terms = 2'000'000;
    double max_seconds = 60.0;
};

struct SearchOptions {
    SearchLimits limits;
    // Conservative search-space reductions; every shipped scenario passes
    // with the defaults (see tests).
    bool restrict_to_relevant = true;
    bool allow_do_on_indicators = false;
    bool allow_do_on_proxies = false;
    int left_cap = 0;  // 0 = number of relevant variables
};

struct DerivationStep {
    RuleId rule = RuleId::InputAxiom;
    int parent1 = -1;
    int parent2 = -1;
    int produced = -1;
    VarSet params;    // variables the application moved / summed / sliced
    int variant = 0;  // direction or bound value, rule-specific
};

struct SearchStats {
    std::uint64_t terms_generated = 0;  // unique terms derived (inputs included)
    std::uint64_t steps_applied = 0;    // successful rule applications (duplicates included)
    double wall_seconds = 0.0;
};

enum class SearchStatus {
    Identifiable,
    NotIdentifiable,  // search closed without reaching the target
    Inconclusive,     // a limit was hit first
};

struct IdentifyResult {
    SearchStatus status = SearchStatus::Inconclusive;
    FormulaPtr formula;                        // set iff identifiable
    std::vector<DistributionTerm> trace_terms; // terms referenced by the trace
    std::vector<DerivationStep> trace;         // ancestral steps of the target
    SearchStats stats;

    bool identifiable() const { return status == SearchStatus::Identifiable; }
};

struct ClosureResult {
    std::vector<DistributionTerm> terms;
    bool complete = false;  // false when a limit stopped the closure
    SearchStats stats;
};

namespace detail {

class Search {
public:
    Search(const QuerySpec& q, const SearchOptions& opts)
        : g_(q.graph), q_(q), opts_(opts), dsep_(g_) {
        q_.validate();
        VarSet declared_dos = q_.target.dos;
        for (const auto& in : q_.inputs) declared_dos |= in.dos;
        if (declared_dos.intersects(g_.vars_of_kind(VarKind::ResponseIndicator)))
            opts_.allow_do_on_indicators = true;
        if (declared_dos.intersects(g_.vars_of_kind(VarKind::Proxy)))
            opts_.allow_do_on_proxies = true;
        relevant_ = g_.all_variables();
        if (opts_.restrict_to_relevant) {
            VarSet seed = q_.target.all_vars();
            for (const auto& in : q_.inputs) seed |= in.all_vars();
            relevant_ = g_.ancestors(seed);
        }
        left_cap_ = opts_.left_cap > 0 ? opts_.left_cap : relevant_.size();
        indicators_ = g_.vars_of_kind(VarKind::ResponseIndicator) & relevant_;
        proxies_ = g_.vars_of_kind(VarKind::Proxy) & relevant_;
    }

    IdentifyResult identify() {
        run(/*stop_at_target=*/true);
        IdentifyResult res;
        res.stats = stats_;
        if (target_id_ >= 0) {
            res.status = SearchStatus::Identifiable;
            extract(res);
        } else {
            res.status = complete_ ? SearchStatus::NotIdentifiable : SearchStatus::Inconclusive;
        }
        return res;
    }

    ClosureResult close() {
        run(/*stop_at_target=*/false);
        ClosureResult res;
        res.terms = terms_;
        res.complete = complete_;
        res.stats = stats_;
        return res;
    }

private:
    using Clock = std::chrono::steady_clock;

    bool admissible(const DistributionTerm& t) const {
        if (!relevant_.contains_all(t.all_vars())) return false;
        if (t.left_total().size() > left_cap_) return false;
        if (!opts_.allow_do_on_proxies && t.dos.intersects(proxies_)) return false;
        if (!opts_.allow_do_on_indicators && t.dos.intersects(indicators_)) return false;
        return true;
    }

    // Returns the id of the term, inserting it with its producing step if
    // new. Duplicate derivations are counted but not recorded.
    int add(const DistributionTerm& t, RuleId rule, int p1, int p2, VarSet params, int variant) {
        ++stats_.steps_applied;
        auto it = index_.find(t);
        if (it != index_.end()) return it->second;
        int id = static_cast<int>(terms_.size());
        terms_.push_back(t);
        steps_.push_back(DerivationStep{rule, p1, p2, id, params, variant});
        index_.emplace(t, id);
        ++stats_.terms_generated;
        ctx_index_[ctx_key(t)].push_back(id);
        if (t == q_.target && target_id_ < 0) target_id_ = id;
        return id;
    }

    struct CtxKey {
        std::uint64_t dos, c, c1, c0;
        bool operator==(const CtxKey&) const = default;
    };
    struct CtxHash {
        std::size_t operator()(const CtxKey& k) const {
            std::uint64_t h = 0x2545f4914f6cdd1dULL;
            for (std::uint64_t v : {k.dos, k.c, k.c1, k.c0}) {
                h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
                h *= 0xff51afd7ed558ccdULL;
                h ^= h >> 33;
            }
            return static_cast<std::size_t>(h);
        }
    };
    static CtxKey ctx_key(const DistributionTerm& t) {
        return CtxKey{t.dos.bits(), t.cond.bits(), t.cond_one.bits(), t.cond_zero.bits()};
    }

    bool limits_hit() {
        if (stats_.terms_generated > opts_.limits.max_terms) return true;
        if (++tick_ % 64 == 0) {
            stats_.wall_seconds =
                std::chrono::duration<double>(Clock::now() - start_).count();
            if (stats_.wall_seconds > opts_.limits.max_seconds) return true;
        }
        return false;
    }

    void run(bool stop_at_target) {
        start_ = Clock::now();
        for (const auto& in : q_.inputs) {
            if (!admissible(in))
                throw std::invalid_argument("input term outside the admissible term space: " +
                                            render_term(in, g_));
            add(in, RuleId::InputAxiom, -1, -1, {}, 0);
        }
        stats_.steps_applied = 0;  // inputs are axioms, not applications
        if (!admissible(q_.target))
            throw std::invalid_argument("query target outside the admissible term space");
        if (stop_at_target && target_id_ >= 0) {
            complete_ = true;
            finish();
            return;
        }

        std::size_t head = 0;
        while (head < terms_.size()) {
            if (stop_at_target && target_id_ >= 0) break;
            if (limits_hit()) { finish(); return; }
            expand(static_cast<int>(head));
            ++head;
        }
        complete_ = head >= terms_.size();
        finish();
    }

    void finish() {
        stats_.wall_seconds = std::chrono::duration<double>(Clock::now() - start_).count();
    }

    void try_add(const std::optional<DistributionTerm>& t, RuleId rule, int p1, int p2,
                 VarSet params, int variant) {
        if (!t || !admissible(*t)) return;
        add(*t, rule, p1, p2, params, variant);
    }

    void expand(int u) {
        const DistributionTerm t = terms_[u];
        const VarSet absent = relevant_ - t.all_vars();

        // 1. rule 1, deletion then insertion
        for (int v : t.cond_total())
            try_add(apply_rule1(t, VarSet::single(v), g_, RuleDirection::Delete,
                                BindKind::Symbolic, &dsep_),
                    RuleId::DoCalc1, u, -1, VarSet::single(v), 1);
        for (int v : absent) {
            VarSet z = VarSet::single(v);
            if (auto r = apply_rule1(t, z, g_, RuleDirection::Insert, BindKind::Symbolic, &dsep_)) {
                add(*r, RuleId::DoCalc1, u, -1, z, 0);
                if (indicators_.contains(v)) {
                    try_add(apply_rule1(t, z, g_, RuleDirection::Insert, BindKind::One, &dsep_),
                            RuleId::DoCalc1, u, -1, z, 2);
                    try_add(apply_rule1(t, z, g_, RuleDirection::Insert, BindKind::Zero, &dsep_),
                            RuleId::DoCalc1, u, -1, z, 3);
                }
            }
        }

        // 2. rule 2, both directions
        for (int v : t.cond) {
            if (!opts_.allow_do_on_indicators && indicators_.contains(v)) continue;
            if (!opts_.allow_do_on_proxies && proxies_.contains(v)) continue;
            try_add(apply_rule2(t, VarSet::single(v), g_, RuleDirection::Insert, &dsep_),
                    RuleId::DoCalc2, u, -1, VarSet::single(v), 0);
        }
        for (int v : t.dos)
            try_add(apply_rule2(t, VarSet::single(v), g_, RuleDirection::Delete, &dsep_),
                    RuleId::DoCalc2, u, -1, VarSet::single(v), 1);

        // 3. rule 3, deletion then insertion
        for (int v : t.dos)
            try_add(apply_rule3(t, VarSet::single(v), g_, RuleDirection::Delete, &dsep_),
                    RuleId::DoCalc3, u, -1, VarSet::single(v), 1);
        for (int v : absent) {
            if (!opts_.allow_do_on_indicators && indicators_.contains(v)) continue;
            if (!opts_.allow_do_on_proxies && proxies_.contains(v)) continue;
            try_add(apply_rule3(t, VarSet::single(v), g_, RuleDirection::Insert, &dsep_),
                    RuleId::DoCalc3, u, -1, VarSet::single(v), 0);
        }

        // 4. marginalization (single variable per step)
        for (int v : t.left)
            try_add(marginalize(t, VarSet::single(v)), RuleId::Marginalize, u, -1,
                    VarSet::single(v), 0);

        // 5. conditioning (single variable per step)
        for (int v : t.left_total()) {
            auto c = condition(t, VarSet::single(v));
            if (c) try_add(c->conditioned, RuleId::Condition, u, -1, VarSet::single(v), 0);
        }

        // 6. indicator enumeration
        for (int v : (t.left | t.cond) & indicators_) {
            auto pair = enumerate_indicator(t, v, g_);
            if (!pair) continue;
            try_add(pair->first, RuleId::EnumerateIndicator, u, -1, VarSet::single(v), 1);
            try_add(pair->second, RuleId::EnumerateIndicator, u, -1, VarSet::single(v), 0);
        }

        // 7. proxy exchange
        for (const auto& [r, x] : g_.missing_map()) {
            (void)r;
            try_add(proxy_exchange(t, x, g_), RuleId::ProxyExchange, u, -1, VarSet::single(x), 0);
        }

        // 8. chain-rule composition; u as the conditional factor first
        for_each_context_split(t, [&](const DistributionTerm& t2cand) {
            auto it = index_.find(t2cand);
            if (it == index_.end()) return;
            try_add(product_compose(t, terms_[it->second]), RuleId::ProductCompose, u,
                    it->second, {}, 0);
        });
        {
            auto it = ctx_index_.find(merged_ctx_key(t));
            if (it != ctx_index_.end()) {
                std::vector<int> bucket = it->second;
                for (int id1 : bucket)
                    try_add(product_compose(terms_[id1], t), RuleId::ProductCompose, id1, u,
                            {}, 0);
            }
        }

        // 9. division on a value-fixed indicator; u as numerator, then as divisor
        for (int r : t.left_one | t.left_zero) {
            DistributionTerm rest = t;
            rest.left_one.erase(r);
            rest.left_zero.erase(r);
            if (rest.left_total().empty()) continue;
            DistributionTerm t2;
            t2.dos = t.dos;
            (t.left_one.contains(r) ? t2.left_one : t2.left_zero).insert(r);
            t2.cond = t.cond | rest.left;
            t2.cond_one = t.cond_one | rest.left_one;
            t2.cond_zero = t.cond_zero | rest.left_zero;
            auto it = index_.find(t2);
            if (it != index_.end())
                try_add(product_divide(t, t2), RuleId::ProductDivide, u, it->second,
                        VarSet::single(r), 0);
        }
        if (t.left.empty() && (t.left_one | t.left_zero).size() == 1) {
            // u = P(R=r | D): look for numerators P(A, R=r | D \ A).
            for_each_cond_subset(t, [&](VarSet a_sym, VarSet a_one, VarSet a_zero) {
                DistributionTerm t1;
                t1.dos = t.dos;
                t1.left = a_sym;
                t1.left_one = a_one | t.left_one;
                t1.left_zero = a_zero | t.left_zero;
                t1.cond = t.cond - a_sym;
                t1.cond_one = t.cond_one - a_one;
                t1.cond_zero = t.cond_zero - a_zero;
                auto it = index_.find(t1);
                if (it != index_.end())
                    try_add(product_divide(t1, t), RuleId::ProductDivide, it->second, u,
                            t.left_one | t.left_zero, 0);
            });
        }
    }

    // Enumerates candidate marginal factors t2 = P(S | rest) over every
    // nonempty split S of t's conditioning side, ascending by bitmask within
    // each category.
    template <typename Fn>
    void for_each_context_split(const DistributionTerm& t, Fn&& fn) {
        auto subsets = [](VarSet s, auto&& cb) {
            std::uint64_t bits = s.bits();
            std::uint64_t sub = 0;
            for (;;) {
                cb(VarSet(sub));
                if (sub == bits) break;
                sub = (sub - bits) & bits;
            }
        };
        subsets(t.cond, [&](VarSet sc) {
            subsets(t.cond_one, [&](VarSet s1) {
                subsets(t.cond_zero, [&](VarSet s0) {
                    if (sc.empty() && s1.empty() && s0.empty()) return;
                    DistributionTerm t2;
                    t2.dos = t.dos;
                    t2.left = sc;
                    t2.left_one = s1;
                    t2.left_zero = s0;
                    t2.cond = t.cond - sc;
                    t2.cond_one = t.cond_one - s1;
                    t2.cond_zero = t.cond_zero - s0;
                    fn(t2);
                });
            });
        });
    }

    template <typename Fn>
    void for_each_cond_subset(const DistributionTerm& t, Fn&& fn) {
        auto subsets = [](VarSet s, auto&& cb) {
            std::uint64_t bits = s.bits();
            std::uint64_t sub = 0;
            for (;;) {
                cb(VarSet(sub));
                if (sub == bits) break;
                sub = (sub - bits) & bits;
            }
        };
        subsets(t.cond, [&](VarSet sc) {
            subsets(t.cond_one, [&](VarSet s1) {
                subsets(t.cond_zero, [&](VarSet s0) {
                    if (sc.empty() && s1.empty() && s0.empty()) return;
                    fn(sc, s1, s0);
                });
            });
        });
    }

    CtxKey merged_ctx_key(const DistributionTerm& t) const {
        return CtxKey{t.dos.bits(), (t.cond | t.left).bits(), (t.cond_one | t.left_one).bits(),
                      (t.cond_zero | t.left_zero).bits()};
    }

    // --- formula extraction --------------------------------------------------

    void extract(IdentifyResult& res) {
        // ancestral closure of the target in the derivation DAG
        std::vector<char> needed(terms_.size(), 0);
        std::vector<int> stack{target_id_};
        needed[target_id_] = 1;
        while (!stack.empty()) {
            int id = stack.back();
            stack.pop_back();
            const auto& st = steps_[id];
            for (int p : {st.parent1, st.parent2})
                if (p >= 0 && !needed[p]) { needed[p] = 1; stack.push_back(p); }
        }
        std::vector<int> renum(terms_.size(), -1);
        for (std::size_t id = 0; id < terms_.size(); ++id) {
            if (!needed[id]) continue;
            renum[id] = static_cast<int>(res.trace_terms.size());
            res.trace_terms.push_back(terms_[id]);
            DerivationStep st = steps_[id];
            st.produced = renum[id];
            if (st.parent1 >= 0) st.parent1 = renum[st.parent1];
            if (st.parent2 >= 0) st.parent2 = renum[st.parent2];
            res.trace.push_back(st);
        }
        res.formula = formula_for_trace(res.trace, res.trace_terms,
                                        renum[target_id_]);
    }

public:
    // Rebuilds the formula from a recorded trace; also used by tests to check
    // that the trace reconstructs the formula exactly.
    static FormulaPtr formula_for_trace(const std::vector<DerivationStep>& trace,
                                        const std::vector<DistributionTerm>& terms,
                                        int target) {
        std::vector<FormulaPtr> memo(trace.size());
        for (std::size_t i = 0; i < trace.size(); ++i) {
            const auto& st = trace[i];
            const DistributionTerm& produced = terms[st.produced];
            auto parent = [&](int p) -> const FormulaPtr& { return memo[p]; };
            switch (st.rule) {
                case RuleId::InputAxiom:
                    memo[i] = Formula::atom(produced);
                    break;
                case RuleId::DoCalc1:
                case RuleId::DoCalc2:
                case RuleId::DoCalc3:
                    // equalities: the identifying expression is unchanged
                    memo[i] = parent(st.parent1);
                    break;
                case RuleId::EnumerateIndicator:
                case RuleId::ProxyExchange:
                    // value slices / variable renamings become fresh leaves
                    memo[i] = Formula::atom(produced);
                    break;
                case RuleId::Marginalize: {
                    const FormulaPtr& f = parent(st.parent1);
                    memo[i] = f->kind() == Formula::Kind::Atom
                                  ? Formula::atom(produced)
                                  : Formula::sum(st.params, f);
                    break;
                }
                case RuleId::Condition: {
                    const FormulaPtr& f = parent(st.parent1);
                    if (f->kind() == Formula::Kind::Atom) {
                        memo[i] = Formula::atom(produced);
                    } else {
                        VarSet summed = terms[st.parent1].left - st.params;
                        memo[i] = Formula::quotient(f, Formula::sum(summed, f));
                    }
                    break;
                }
                case RuleId::ProductDecompose:
                    memo[i] = Formula::atom(produced);
                    break;
                case RuleId::ProductCompose:
                    memo[i] = Formula::product({parent(st.parent2), parent(st.parent1)});
                    break;
                case RuleId::ProductDivide:
                    memo[i] = Formula::quotient(parent(st.parent1), parent(st.parent2));
                    break;
            }
        }
        return memo[target];
    }

private:
    CausalGraph g_;
    QuerySpec q_;
    SearchOptions opts_;
    detail::FastDSep dsep_;
    VarSet relevant_, indicators_, proxies_;
    int left_cap_ = 0;

    std::vector<DistributionTerm> terms_;
    std::vector<DerivationStep> steps_;  // steps_[i] produced terms_[i]
    std::unordered_map<DistributionTerm, int, TermHash> index_;
    std::unordered_map<CtxKey, std::vector<int>, CtxHash> ctx_index_;
    int target_id_ = -1;
    bool complete_ = false;
    SearchStats stats_;
    Clock::time_point start_;
    std::uint64_t tick_ = 0;
};

}  // namespace detail

inline IdentifyResult identify(const QuerySpec& q, const SearchOptions& opts = {}) {
    return detail::Search(q, opts).identify();
}

inline ClosureResult close_search(const QuerySpec& q, const SearchOptions& opts = {}) {
    return detail::Search(q, opts).close();
}

inline FormulaPtr formula_from_trace(const std::vector<DerivationStep>& trace,
                                     const std::vector<DistributionTerm>& terms, int target) {
    return detail::Search::formula_for_trace(trace, terms, target);
}

}  // namespace causalid
