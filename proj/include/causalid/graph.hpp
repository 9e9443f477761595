#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "causalid/varset.hpp"

namespace causalid {

enum class VarKind { Substantive, Proxy, ResponseIndicator };

struct Variable {
    int index = 0;
    std::string name;
    VarKind kind = VarKind::Substantive;
};

struct DirectedEdge {
    int from = 0;
    int to = 0;
    constexpr bool operator==(const DirectedEdge&) const = default;
};

// Unordered pair, stored with lower index first.
struct BidirectedEdge {
    int a = 0;
    int b = 0;
    constexpr bool operator==(const BidirectedEdge&) const = default;
};

// Semi-Markovian causal graph: a DAG over named variables plus bidirected
// edges abbreviating latent common causes (latent projection; the latent
// nodes themselves are never materialized here). Immutable after
// construction, safe to share across threads.
class CausalGraph {
public:
    CausalGraph() = default;

    CausalGraph(std::vector<Variable> vars,
                std::vector<DirectedEdge> directed,
                std::vector<BidirectedEdge> bidirected,
                std::map<int, int> missing_map = {})
        : vars_(std::move(vars)),
          directed_(std::move(directed)),
          bidirected_(std::move(bidirected)),
          missing_map_(std::move(missing_map)) {
        init();
    }

    int size() const { return static_cast<int>(vars_.size()); }
    const std::vector<Variable>& variables() const { return vars_; }
    const Variable& variable(int i) const { return vars_.at(i); }
    const std::string& name(int i) const { return vars_.at(i).name; }
    VarKind kind(int i) const { return vars_.at(i).kind; }
    const std::vector<DirectedEdge>& directed_edges() const { return directed_; }
    const std::vector<BidirectedEdge>& bidirected_edges() const { return bidirected_; }
    const std::map<int, int>& missing_map() const { return missing_map_; }
    VarSet all_variables() const { return VarSet::first_n(size()); }

    std::optional<int> find(std::string_view var_name) const {
        for (const auto& v : vars_)
            if (v.name == var_name) return v.index;
        return std::nullopt;
    }

    int require(std::string_view var_name) const {
        auto idx = find(var_name);
        if (!idx) throw std::invalid_argument("unknown variable: " + std::string(var_name));
        return *idx;
    }

    VarSet parents(int v) const { return parents_[v]; }
    VarSet children(int v) const { return children_[v]; }
    VarSet siblings(int v) const { return siblings_[v]; }  // bidirected partners

    VarSet vars_of_kind(VarKind k) const {
        VarSet out;
        for (const auto& v : vars_)
            if (v.kind == k) out.insert(v.index);
        return out;
    }

    // Substantive variable measured by proxy/indicator, if any.
    std::optional<int> indicator_target(int indicator) const {
        auto it = missing_map_.find(indicator);
        if (it == missing_map_.end()) return std::nullopt;
        return it->second;
    }
    std::optional<int> proxy_of(int substantive) const {
        auto it = proxy_for_.find(substantive);
        if (it == proxy_for_.end()) return std::nullopt;
        return it->second;
    }
    std::optional<int> indicator_of(int substantive) const {
        for (const auto& [r, x] : missing_map_)
            if (x == substantive) return r;
        return std::nullopt;
    }

    // Reflexive-transitive closures along directed edges.
    VarSet ancestors(VarSet s) const { return closure(s, parents_); }
    VarSet descendants(VarSet s) const { return closure(s, children_); }

private:
    void init();
    VarSet closure(VarSet s, const std::vector<VarSet>& step) const {
        VarSet out = s;
        for (;;) {
            VarSet next = out;
            for (int v : out) next |= step[v];
            if (next == out) return out;
            out = next;
        }
    }

    std::vector<Variable> vars_;
    std::vector<DirectedEdge> directed_;
    std::vector<BidirectedEdge> bidirected_;
    std::map<int, int> missing_map_;   // response indicator -> substantive
    std::map<int, int> proxy_for_;     // substantive -> proxy
    std::vector<VarSet> parents_;
    std::vector<VarSet> children_;
    std::vector<VarSet> siblings_;
};

inline void CausalGraph::init() {
    const int n = size();
    if (n > VarSet::kMaxVariables)
        throw std::invalid_argument("graph exceeds the " +
                                    std::to_string(VarSet::kMaxVariables) +
                                    "-variable capacity (" + std::to_string(n) + " declared)");
    for (int i = 0; i < n; ++i) {
        if (vars_[i].index != i)
            throw std::invalid_argument("variable indices must be dense 0..n-1");
        for (int j = i + 1; j < n; ++j)
            if (vars_[i].name == vars_[j].name)
                throw std::invalid_argument("duplicate variable name: " + vars_[i].name);
    }

    // Dedupe edges, keep first-declaration order.
    {
        std::vector<DirectedEdge> ded;
        for (auto e : directed_) {
            if (e.from == e.to) throw std::invalid_argument("self-loop on " + name(e.from));
            if (std::find(ded.begin(), ded.end(), e) == ded.end()) ded.push_back(e);
        }
        directed_ = std::move(ded);
        std::vector<BidirectedEdge> ded2;
        for (auto e : bidirected_) {
            if (e.a == e.b) throw std::invalid_argument("self-loop on " + name(e.a));
            if (e.a > e.b) std::swap(e.a, e.b);
            if (std::find(ded2.begin(), ded2.end(), e) == ded2.end()) ded2.push_back(e);
        }
        bidirected_ = std::move(ded2);
    }

    parents_.assign(n, VarSet{});
    children_.assign(n, VarSet{});
    siblings_.assign(n, VarSet{});
    for (auto e : directed_) {
        parents_[e.to].insert(e.from);
        children_[e.from].insert(e.to);
    }
    for (auto e : bidirected_) {
        siblings_[e.a].insert(e.b);
        siblings_[e.b].insert(e.a);
    }

    // Directed part must be acyclic (Kahn).
    {
        std::vector<int> indeg(n, 0);
        for (auto e : directed_) ++indeg[e.to];
        std::vector<int> stack;
        for (int i = 0; i < n; ++i)
            if (indeg[i] == 0) stack.push_back(i);
        int seen = 0;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            ++seen;
            for (int c : children_[v])
                if (--indeg[c] == 0) stack.push_back(c);
        }
        if (seen != n) throw std::invalid_argument("directed edges form a cycle");
    }

    for (const auto& [r, x] : missing_map_) {
        if (kind(r) != VarKind::ResponseIndicator || kind(x) != VarKind::Substantive)
            throw std::invalid_argument("missing_map entries must map indicator -> substantive");
    }
    for (const auto& v : vars_)
        if (v.kind == VarKind::Proxy && !siblings_[v.index].empty())
            throw std::invalid_argument("proxy " + v.name + " cannot carry bidirected edges");
    proxy_for_.clear();
    for (const auto& [r, x] : missing_map_) {
        // The proxy is the unique Proxy-kind common child of X and R. An
        // indicator may have other children (e.g. R_Y -> R_X), a proxy not.
        int star = -1;
        for (int cand : children_[r] & children_[x]) {
            if (kind(cand) != VarKind::Proxy) continue;
            if (star != -1)
                throw std::invalid_argument("multiple proxies for " + name(x));
            star = cand;
        }
        if (star == -1)
            throw std::invalid_argument("no proxy node for " + name(x));
        if (!(parents_[star] == (VarSet::single(x) | VarSet::single(r))))
            throw std::invalid_argument("proxy " + name(star) + " must have parents {" +
                                        name(x) + ", " + name(r) + "}");
        if (!children_[star].empty())
            throw std::invalid_argument("proxy " + name(star) + " cannot have children");
        proxy_for_[x] = star;
    }
}

// ---------------------------------------------------------------------------
// Graph DSL
//
// Statements separated by newlines or whitespace:
//   A -> B     directed edge
//   A <-> B    bidirected edge (latent common cause)
//   A          isolated vertex declaration
// Identifiers: [A-Za-z_][A-Za-z0-9_]* with an optional trailing '*'.
// Duplicate edge statements collapse to a single edge.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> lex_graph_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    auto is_ident_start = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
    auto is_ident = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    while (i < text.size()) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) { ++i; continue; }
        if (c == '#') {  // comment to end of line
            while (i < text.size() && text[i] != '\n') ++i;
            continue;
        }
        if (is_ident_start(c)) {
            std::size_t j = i + 1;
            while (j < text.size() && is_ident(text[j])) ++j;
            if (j < text.size() && text[j] == '*') ++j;
            tokens.emplace_back(text.substr(i, j - i));
            i = j;
            continue;
        }
        if (text.compare(i, 3, "<->") == 0) { tokens.emplace_back("<->"); i += 3; continue; }
        if (text.compare(i, 2, "->") == 0) { tokens.emplace_back("->"); i += 2; continue; }
        throw std::invalid_argument("malformed token in graph text near: " +
                                    std::string(text.substr(i, std::min<std::size_t>(12, text.size() - i))));
    }
    return tokens;
}

}  // namespace detail

// Parses the edge-list DSL; variables are indexed in first-appearance order.
inline CausalGraph parse_graph(std::string_view text) {
    auto tokens = detail::lex_graph_tokens(text);
    std::vector<Variable> vars;
    std::vector<DirectedEdge> directed;
    std::vector<BidirectedEdge> bidirected;
    auto intern = [&](const std::string& name) {
        for (const auto& v : vars)
            if (v.name == name) return v.index;
        vars.push_back(Variable{static_cast<int>(vars.size()), name, VarKind::Substantive});
        return vars.back().index;
    };
    std::size_t i = 0;
    while (i < tokens.size()) {
        const std::string& lhs = tokens[i];
        if (lhs == "->" || lhs == "<->")
            throw std::invalid_argument("edge operator without a left-hand variable");
        if (i + 1 < tokens.size() && (tokens[i + 1] == "->" || tokens[i + 1] == "<->")) {
            if (i + 2 >= tokens.size())
                throw std::invalid_argument("edge operator without a right-hand variable");
            const std::string& op = tokens[i + 1];
            const std::string& rhs = tokens[i + 2];
            if (rhs == "->" || rhs == "<->")
                throw std::invalid_argument("edge operator without a right-hand variable");
            int a = intern(lhs), b = intern(rhs);
            if (a == b) throw std::invalid_argument("self-loop on " + lhs);
            if (op == "->") directed.push_back({a, b});
            else bidirected.push_back({std::min(a, b), std::max(a, b)});
            i += 3;
        } else {
            intern(lhs);  // isolated vertex
            i += 1;
        }
    }
    return CausalGraph(std::move(vars), std::move(directed), std::move(bidirected));
}

// Canonical DSL rendering; parse_graph(render_graph_dsl(g)) reproduces g
// with identical variable indices (vertices are declared first, in order).
inline std::string render_graph_dsl(const CausalGraph& g) {
    std::string out;
    for (const auto& v : g.variables()) out += v.name + "\n";
    for (auto e : g.directed_edges())
        out += g.name(e.from) + " -> " + g.name(e.to) + "\n";
    for (auto e : g.bidirected_edges())
        out += g.name(e.a) + " <-> " + g.name(e.b) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Mutilation and d-separation
// ---------------------------------------------------------------------------

// Removes directed edges into cut_incoming and out of cut_outgoing.
// Bidirected edges incident to cut_incoming are dropped (they carry a latent
// parent); bidirected edges are kept for cut_outgoing.
inline CausalGraph mutilate(const CausalGraph& g, VarSet cut_incoming, VarSet cut_outgoing) {
    if (cut_incoming.empty() && cut_outgoing.empty()) return g;
    std::vector<DirectedEdge> directed;
    for (auto e : g.directed_edges()) {
        if (cut_incoming.contains(e.to)) continue;
        if (cut_outgoing.contains(e.from)) continue;
        directed.push_back(e);
    }
    std::vector<BidirectedEdge> bidirected;
    for (auto e : g.bidirected_edges()) {
        if (cut_incoming.contains(e.a) || cut_incoming.contains(e.b)) continue;
        bidirected.push_back(e);
    }
    // The missing map is intentionally dropped: cutting edges can break the
    // Eq.-1 proxy structure the map asserts, and mutilated graphs are only
    // queried for separation.
    return CausalGraph(std::vector<Variable>(g.variables()), std::move(directed),
                       std::move(bidirected));
}

// d-separation via active-trail reachability (Bayes-ball style). Bidirected
// edges are treated as an implicit latent parent of both endpoints; the
// latent is materialized only inside this routine.
inline bool d_separated(const CausalGraph& g, VarSet a, VarSet b, VarSet c) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("d_separated: a and b must be nonempty");
    if (a.intersects(b) || a.intersects(c) || b.intersects(c))
        throw std::invalid_argument("d_separated: a, b, c must be pairwise disjoint");

    const int n = g.size();
    const int m = static_cast<int>(g.bidirected_edges().size());
    const int total = n + m;

    // parent/child adjacency with latents at indices n..n+m-1
    std::vector<std::vector<int>> par(total), chi(total);
    for (auto e : g.directed_edges()) {
        par[e.to].push_back(e.from);
        chi[e.from].push_back(e.to);
    }
    for (int j = 0; j < m; ++j) {
        auto e = g.bidirected_edges()[j];
        int lat = n + j;
        chi[lat] = {e.a, e.b};
        par[e.a].push_back(lat);
        par[e.b].push_back(lat);
    }

    std::vector<char> in_c(total, 0);
    for (int v : c) in_c[v] = 1;

    // ancestors of c (inclusive)
    std::vector<char> anc(total, 0);
    {
        std::vector<int> stack;
        for (int v : c) { anc[v] = 1; stack.push_back(v); }
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int p : par[v])
                if (!anc[p]) { anc[p] = 1; stack.push_back(p); }
        }
    }

    // (node, direction) reachability; dir 0 = arrived from a child (trail
    // goes up through the node), dir 1 = arrived from a parent (down).
    std::vector<char> seen(static_cast<std::size_t>(total) * 2, 0);
    std::vector<std::pair<int, int>> stack;
    auto visit = [&](int v, int dir) {
        if (!seen[static_cast<std::size_t>(v) * 2 + dir]) {
            seen[static_cast<std::size_t>(v) * 2 + dir] = 1;
            stack.push_back({v, dir});
        }
    };
    for (int v : a) visit(v, 0);  // source acts as if entered from a child

    std::vector<char> in_b(total, 0);
    for (int v : b) in_b[v] = 1;

    while (!stack.empty()) {
        auto [v, dir] = stack.back();
        stack.pop_back();
        if (in_b[v]) return false;
        if (dir == 0) {
            if (!in_c[v]) {
                for (int p : par[v]) visit(p, 0);
                for (int ch : chi[v]) visit(ch, 1);
            }
        } else {
            if (!in_c[v])
                for (int ch : chi[v]) visit(ch, 1);
            if (anc[v])  // collider (or its descendant) activated by c
                for (int p : par[v]) visit(p, 0);
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Missing-data augmentation (measurement proxies + response indicators)
// ---------------------------------------------------------------------------

// Missing-map spec: comma-separated "R : X" pairs, e.g.
// "R_X : X, R_Y : Y, R_Z : Z". For each pair, marks R as the response
// indicator of X and creates the proxy X* with parents exactly {X, R}.
// Indicators absent from the graph are created as isolated nodes first.
inline CausalGraph augment_missing(const CausalGraph& g, std::string_view spec) {
    // parse pairs
    std::vector<std::pair<std::string, std::string>> pairs;
    {
        std::string cur;
        std::vector<std::string> chunks;
        for (char ch : spec) {
            if (ch == ',') { chunks.push_back(cur); cur.clear(); }
            else cur += ch;
        }
        if (!cur.empty()) chunks.push_back(cur);
        for (auto& chunk : chunks) {
            auto colon = chunk.find(':');
            if (colon == std::string::npos)
                throw std::invalid_argument("missing-data spec entry lacks ':': " + chunk);
            auto trim = [](std::string s) {
                std::size_t b = s.find_first_not_of(" \t\r\n");
                std::size_t e = s.find_last_not_of(" \t\r\n");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            std::string r = trim(chunk.substr(0, colon));
            std::string x = trim(chunk.substr(colon + 1));
            if (r.empty() || x.empty())
                throw std::invalid_argument("missing-data spec entry malformed: " + chunk);
            pairs.emplace_back(std::move(r), std::move(x));
        }
    }
    if (pairs.empty()) return g;

    std::vector<Variable> vars = g.variables();
    std::vector<DirectedEdge> directed = g.directed_edges();
    std::vector<BidirectedEdge> bidirected = g.bidirected_edges();
    std::map<int, int> missing = g.missing_map();

    auto intern = [&](const std::string& name, VarKind kind) {
        for (const auto& v : vars)
            if (v.name == name) return v.index;
        vars.push_back(Variable{static_cast<int>(vars.size()), name, kind});
        return vars.back().index;
    };

    for (const auto& [rname, xname] : pairs) {
        auto xi = g.find(xname);
        if (!xi) throw std::invalid_argument("missing-data spec targets unknown variable " + xname);
        int x = *xi;
        if (vars[x].kind == VarKind::Proxy)
            throw std::invalid_argument("missing-data target " + xname + " is itself a proxy");
        if (vars[x].kind == VarKind::ResponseIndicator)
            throw std::invalid_argument("missing-data target " + xname + " is a response indicator");
        int r = intern(rname, VarKind::ResponseIndicator);
        if (vars[r].kind == VarKind::Proxy)
            throw std::invalid_argument(rname + " cannot be both proxy and response indicator");
        if (missing.count(r))
            throw std::invalid_argument("response indicator " + rname + " mapped twice");
        for (const auto& [r2, x2] : missing)
            if (x2 == x) throw std::invalid_argument(xname + " already has a response indicator");
        vars[r].kind = VarKind::ResponseIndicator;
        // The proxy may already exist in the text (e.g. a rendered augmented
        // graph); duplicate edges collapse and the structure is re-validated.
        int star = intern(xname + "*", VarKind::Proxy);
        if (missing.count(star) || vars[star].kind == VarKind::ResponseIndicator)
            throw std::invalid_argument(vars[star].name + " cannot serve as a proxy");
        vars[star].kind = VarKind::Proxy;
        directed.push_back({x, star});
        directed.push_back({r, star});
        missing[r] = x;
    }
    return CausalGraph(std::move(vars), std::move(directed), std::move(bidirected), std::move(missing));
}

inline VarSet ancestors(const CausalGraph& g, VarSet s) { return g.ancestors(s); }
inline VarSet descendants(const CausalGraph& g, VarSet s) { return g.descendants(s); }

}  // namespace causalid
