#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalid/graph.hpp"
#include "causalid/prob_table.hpp"
#include "causalid/term.hpp"
#include "causalid/varset.hpp"

namespace causalid {

// Fully specified discrete structural causal model over a semi-Markovian
// graph. Every bidirected edge is materialized as an explicit latent parent
// of its two endpoints (binary by default); proxies follow the deterministic
// measurement equation: X* = X when R_X = 1, the distinguished NA category
// (last value) when R_X = 0.
class DiscreteScm {
public:
    struct Node {
        std::string name;
        int card = 2;
        std::vector<int> parents;    // node ids, observed first then latents
        std::vector<double> cpt;     // row-major over (parents..., value)
        bool deterministic_proxy = false;
        int proxy_target = -1;
        int proxy_indicator = -1;
    };

    DiscreteScm(CausalGraph graph, std::vector<Node> nodes)
        : graph_(std::move(graph)), nodes_(std::move(nodes)) {
        n_obs_ = graph_.size();
        validate();
    }

    const CausalGraph& graph() const { return graph_; }
    int observed_count() const { return n_obs_; }
    int node_count() const { return static_cast<int>(nodes_.size()); }
    const Node& node(int i) const { return nodes_.at(i); }
    int card(int i) const { return nodes_.at(i).card; }

    static std::string latent_name(const CausalGraph& g, const BidirectedEdge& e) {
        return "U_" + g.name(e.a) + "_" + g.name(e.b);
    }

    void validate() const {
        const double tol = 1e-12;
        for (const auto& nd : nodes_) {
            std::size_t rows = 1;
            for (int p : nd.parents) rows *= static_cast<std::size_t>(nodes_[p].card);
            if (nd.cpt.size() != rows * static_cast<std::size_t>(nd.card))
                throw std::invalid_argument("CPT size mismatch for " + nd.name);
            for (std::size_t r = 0; r < rows; ++r) {
                double s = 0.0;
                for (int v = 0; v < nd.card; ++v) {
                    double p = nd.cpt[r * nd.card + v];
                    if (!(p >= 0.0)) throw std::invalid_argument("negative CPT entry for " + nd.name);
                    s += p;
                }
                if (std::fabs(s - 1.0) > tol)
                    throw std::invalid_argument("CPT row of " + nd.name + " does not sum to 1");
            }
        }
    }

private:
    CausalGraph graph_;
    std::vector<Node> nodes_;
    int n_obs_ = 0;
};

// ---------------------------------------------------------------------------
// Builder: node order is observed variables (graph order) followed by one
// latent per bidirected edge, in edge-declaration order. Parent order within
// a node is directed parents ascending by index, then latent parents in edge
// order. CPTs can be set by value or by a row function over named parents.
// ---------------------------------------------------------------------------

class ScmBuilder {
public:
    struct ParentView {
        const ScmBuilder* b;
        const std::vector<int>* parent_ids;
        const std::vector<int>* parent_vals;
        int operator()(const std::string& name) const {
            for (std::size_t k = 0; k < parent_ids->size(); ++k)
                if (b->node_name((*parent_ids)[k]) == name) return (*parent_vals)[k];
            throw std::invalid_argument("node has no parent named " + name);
        }
    };
    using RowFn = std::function<std::vector<double>(const ParentView&)>;

    explicit ScmBuilder(const CausalGraph& g, int default_card = 2) : graph_(g) {
        const int n = g.size();
        const auto& bi = g.bidirected_edges();
        nodes_.resize(n + bi.size());
        for (int i = 0; i < n; ++i) {
            nodes_[i].name = g.name(i);
            nodes_[i].card = default_card;
            for (int p : g.parents(i)) nodes_[i].parents.push_back(p);
        }
        for (std::size_t j = 0; j < bi.size(); ++j) {
            int lat = n + static_cast<int>(j);
            nodes_[lat].name = DiscreteScm::latent_name(g, bi[j]);
            nodes_[lat].card = 2;
            nodes_[bi[j].a].parents.push_back(lat);
            nodes_[bi[j].b].parents.push_back(lat);
        }
        // Proxies: cardinality fixed later from target; indicators binary.
        for (const auto& [r, x] : g.missing_map()) {
            (void)x;
            nodes_[r].card = 2;
        }
    }

    const std::string& node_name(int id) const { return nodes_[id].name; }
    int node_id(const std::string& name) const {
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i].name == name) return static_cast<int>(i);
        throw std::invalid_argument("unknown SCM node " + name);
    }
    int node_count() const { return static_cast<int>(nodes_.size()); }

    ScmBuilder& card(const std::string& name, int c) {
        if (c < 2) throw std::invalid_argument("cardinalities must be >= 2");
        nodes_[node_id(name)].card = c;
        return *this;
    }

    ScmBuilder& cpt(const std::string& name, std::vector<double> values) {
        nodes_[node_id(name)].cpt = std::move(values);
        return *this;
    }

    ScmBuilder& cpt_fn(const std::string& name, const RowFn& fn) {
        int id = node_id(name);
        row_fns_[id] = fn;
        return *this;
    }

    // Unset CPTs become uniform rows instead of an error.
    ScmBuilder& fill_uniform() {
        uniform_unset_ = true;
        return *this;
    }

    // Unset CPTs are drawn from a symmetric Dirichlet(1) per row, clipped
    // away from 0 by 1e-6 and renormalized; deterministic in the seed.
    DiscreteScm build_random(std::uint64_t seed) { return build_impl(&seed); }
    DiscreteScm build() { return build_impl(nullptr); }

private:
    struct Proto {
        std::string name;
        int card = 2;
        std::vector<int> parents;
        std::vector<double> cpt;
    };

    static double unit_double(std::mt19937_64& rng) {
        return static_cast<double>(rng() >> 11) * 0x1.0p-53;
    }

    DiscreteScm build_impl(const std::uint64_t* seed) {
        const int n = graph_.size();
        std::vector<DiscreteScm::Node> out(nodes_.size());
        std::mt19937_64 rng(seed ? *seed : 0);

        // Fix proxy metadata and cardinalities first.
        for (const auto& [r, x] : graph_.missing_map()) {
            int star = *graph_.proxy_of(x);
            nodes_[star].card = nodes_[x].card + 1;  // last value is NA
        }

        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            auto& src = nodes_[i];
            auto& dst = out[i];
            dst.name = src.name;
            dst.card = src.card;
            dst.parents = src.parents;

            bool is_proxy = static_cast<int>(i) < n && graph_.kind(static_cast<int>(i)) == VarKind::Proxy;
            std::size_t rows = 1;
            for (int p : dst.parents) rows *= static_cast<std::size_t>(nodes_[p].card);

            if (is_proxy) {
                int target = -1, indicator = -1;
                for (const auto& [r, x] : graph_.missing_map())
                    if (graph_.proxy_of(x) == static_cast<int>(i)) { target = x; indicator = r; }
                if (target < 0) throw std::logic_error("proxy without missing-map entry");
                dst.deterministic_proxy = true;
                dst.proxy_target = target;
                dst.proxy_indicator = indicator;
                dst.cpt.assign(rows * static_cast<std::size_t>(dst.card), 0.0);
                // row for each (parent...) assignment
                std::vector<int> pav(dst.parents.size(), 0);
                for (std::size_t r = 0; r < rows; ++r) {
                    int xval = -1, rval = -1;
                    for (std::size_t k = 0; k < dst.parents.size(); ++k) {
                        if (dst.parents[k] == target) xval = pav[k];
                        if (dst.parents[k] == indicator) rval = pav[k];
                    }
                    int observed = rval == 1 ? xval : dst.card - 1;  // NA when unmeasured
                    dst.cpt[r * dst.card + observed] = 1.0;
                    for (std::size_t k = dst.parents.size(); k-- > 0;) {
                        if (++pav[k] < nodes_[dst.parents[k]].card) break;
                        pav[k] = 0;
                    }
                }
                continue;
            }

            if (!src.cpt.empty()) {
                dst.cpt = src.cpt;
                continue;
            }
            auto fn_it = row_fns_.find(static_cast<int>(i));
            if (fn_it != row_fns_.end()) {
                dst.cpt.assign(rows * static_cast<std::size_t>(dst.card), 0.0);
                std::vector<int> pav(dst.parents.size(), 0);
                for (std::size_t r = 0; r < rows; ++r) {
                    ParentView pv{this, &dst.parents, &pav};
                    std::vector<double> row = fn_it->second(pv);
                    if (row.size() != static_cast<std::size_t>(dst.card))
                        throw std::invalid_argument("CPT row function arity mismatch for " + dst.name);
                    std::copy(row.begin(), row.end(), dst.cpt.begin() + static_cast<std::ptrdiff_t>(r * dst.card));
                    for (std::size_t k = dst.parents.size(); k-- > 0;) {
                        if (++pav[k] < nodes_[dst.parents[k]].card) break;
                        pav[k] = 0;
                    }
                }
                continue;
            }
            if (!seed) {
                if (!uniform_unset_)
                    throw std::invalid_argument("no CPT specified for node " + dst.name);
                dst.cpt.assign(rows * static_cast<std::size_t>(dst.card),
                               1.0 / static_cast<double>(dst.card));
                continue;
            }
            dst.cpt.assign(rows * static_cast<std::size_t>(dst.card), 0.0);
            for (std::size_t r = 0; r < rows; ++r) {
                double s = 0.0;
                for (int v = 0; v < dst.card; ++v) {
                    double e = -std::log(1.0 - unit_double(rng));
                    dst.cpt[r * dst.card + v] = e;
                    s += e;
                }
                double s2 = 0.0;
                for (int v = 0; v < dst.card; ++v) {
                    double p = std::max(dst.cpt[r * dst.card + v] / s, 1e-6);
                    dst.cpt[r * dst.card + v] = p;
                    s2 += p;
                }
                for (int v = 0; v < dst.card; ++v) dst.cpt[r * dst.card + v] /= s2;
            }
        }
        return DiscreteScm(graph_, std::move(out));
    }

    CausalGraph graph_;
    std::vector<Proto> nodes_;
    std::map<int, RowFn> row_fns_;
    bool uniform_unset_ = false;
};

inline DiscreteScm random_scm(const CausalGraph& g, const std::vector<int>& cards,
                              std::uint64_t seed) {
    ScmBuilder b(g);
    for (int i = 0; i < g.size(); ++i) {
        if (g.kind(i) == VarKind::Proxy) continue;  // derived from target
        if (i < static_cast<int>(cards.size())) {
            if (g.kind(i) == VarKind::ResponseIndicator && cards[i] != 2)
                throw std::invalid_argument("response indicators must be binary");
            b.card(g.name(i), cards[i]);
        }
    }
    return b.build_random(seed);
}

inline DiscreteScm random_scm(const CausalGraph& g, std::uint64_t seed) {
    return random_scm(g, {}, seed);
}

// ---------------------------------------------------------------------------
// Exact enumeration of a symbolic term against the model
// ---------------------------------------------------------------------------

// Computes P(left, left_one=1, left_zero=0 | do(dos), cond, cond_one, cond_zero)
// by exhaustive enumeration of the full joint (latents included) under each
// do-assignment. Output scope: symbolic variables (left | cond | dos) in
// index order. Throws when a requested conditioning event has probability 0.
inline ProbTable enumerate_term(const DiscreteScm& m, const DistributionTerm& t) {
    const CausalGraph& g = m.graph();
    validate_term(t, g);

    ProbTable out;
    for (int v : (t.left | t.cond | t.dos)) {
        out.vars.push_back(v);
        out.cards.push_back(m.card(v));
    }
    out.cond = t.cond;
    out.dos = t.dos;
    out.values.assign(out.total_cells(), 0.0);

    const int total = m.node_count();
    std::vector<int> assign(total, 0);

    // Numerator accumulates into out.values; the denominator (mass of the
    // conditioning event) into a table over the (cond,dos) projection.
    std::vector<int> cd_vars, cd_cards;
    for (std::size_t k = 0; k < out.vars.size(); ++k) {
        if (t.cond.contains(out.vars[k]) || t.dos.contains(out.vars[k])) {
            cd_vars.push_back(out.vars[k]);
            cd_cards.push_back(out.cards[k]);
        }
    }
    std::size_t cd_cells = 1;
    for (int c : cd_cards) cd_cells *= static_cast<std::size_t>(c);
    std::vector<double> den(cd_cells, 0.0);

    auto project_index = [&](const std::vector<int>& vars, const std::vector<int>& cards) {
        std::size_t idx = 0;
        for (std::size_t k = 0; k < vars.size(); ++k)
            idx = idx * static_cast<std::size_t>(cards[k]) + static_cast<std::size_t>(assign[vars[k]]);
        return idx;
    };

    // Fixed-value masks.
    auto matches_fixed = [&](VarSet ones, VarSet zeros) {
        for (int v : ones)
            if (assign[v] != 1) return false;
        for (int v : zeros)
            if (assign[v] != 0) return false;
        return true;
    };

    // Enumerate full joint; dos variables range over their cards as free
    // odometer positions but contribute no CPT factor (point-mass regime).
    for (;;) {
        double w = 1.0;
        for (int v = 0; v < total; ++v) {
            if (v < g.size() && t.dos.contains(v)) continue;  // intervened: no factor
            const auto& nd = m.node(v);
            std::size_t row = 0;
            for (int p : nd.parents) row = row * static_cast<std::size_t>(m.card(p)) + static_cast<std::size_t>(assign[p]);
            w *= nd.cpt[row * static_cast<std::size_t>(nd.card) + static_cast<std::size_t>(assign[v])];
            if (w == 0.0) break;
        }
        if (w != 0.0 && matches_fixed(t.cond_one, t.cond_zero)) {
            den[project_index(cd_vars, cd_cards)] += w;
            if (matches_fixed(t.left_one, t.left_zero)) {
                std::size_t idx = 0;
                for (std::size_t k = 0; k < out.vars.size(); ++k)
                    idx = idx * static_cast<std::size_t>(out.cards[k]) + static_cast<std::size_t>(assign[out.vars[k]]);
                out.values[idx] += w;
            }
        }
        int k = total - 1;
        for (; k >= 0; --k) {
            if (++assign[k] < m.card(k)) break;
            assign[k] = 0;
        }
        if (k < 0) break;
    }

    // Normalize each (cond,dos) slice.
    std::vector<int> full(out.vars.size(), 0);
    for (std::size_t idx = 0; idx < out.values.size(); ++idx) {
        // decode idx -> full, project to cd index
        std::size_t rem = idx;
        for (std::size_t k = out.vars.size(); k-- > 0;) {
            full[k] = static_cast<int>(rem % static_cast<std::size_t>(out.cards[k]));
            rem /= static_cast<std::size_t>(out.cards[k]);
        }
        std::size_t cd_idx = 0;
        for (std::size_t k = 0, ck = 0; k < out.vars.size(); ++k) {
            if (t.cond.contains(out.vars[k]) || t.dos.contains(out.vars[k])) {
                cd_idx = cd_idx * static_cast<std::size_t>(cd_cards[ck]) + static_cast<std::size_t>(full[k]);
                ++ck;
            }
        }
        double d = den[cd_idx];
        if (d == 0.0)
            throw std::runtime_error("conditioning on zero-probability event while enumerating " +
                                     render_term(t, g));
        out.values[idx] /= d;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Non-identifiability witnesses
// ---------------------------------------------------------------------------

// Two models over the same graph that agree on every input distribution but
// disagree on the target: a constructive proof of non-identifiability.
struct WitnessPair {
    DiscreteScm m1;
    DiscreteScm m2;
    std::vector<DistributionTerm> inputs;
    DistributionTerm target;
};

struct WitnessReport {
    bool inputs_agree = false;
    bool target_differs = false;
    double max_input_diff = 0.0;
    double target_diff = 0.0;
};

inline WitnessReport check_witness(const WitnessPair& w, double tol = 1e-12) {
    WitnessReport rep;
    rep.inputs_agree = true;
    for (const auto& in : w.inputs) {
        double d = max_abs_diff(enumerate_term(w.m1, in), enumerate_term(w.m2, in));
        rep.max_input_diff = std::max(rep.max_input_diff, d);
        if (d > tol) rep.inputs_agree = false;
    }
    rep.target_diff = max_abs_diff(enumerate_term(w.m1, w.target), enumerate_term(w.m2, w.target));
    rep.target_differs = rep.target_diff > tol;
    return rep;
}

// ---------------------------------------------------------------------------
// JSON serialization: {graph_dsl, missing_data?, cardinalities, cpts}
// Latents are named U_<a>_<b> per bidirected edge; proxy CPTs are implied
// and never serialized.
// ---------------------------------------------------------------------------

inline nlohmann::json scm_to_json(const DiscreteScm& m) {
    const CausalGraph& g = m.graph();
    nlohmann::json j;
    j["graph_dsl"] = render_graph_dsl(g);
    if (!g.missing_map().empty()) {
        std::string spec;
        for (const auto& [r, x] : g.missing_map()) {
            if (!spec.empty()) spec += ", ";
            spec += g.name(r) + " : " + g.name(x);
        }
        j["missing_data"] = spec;
    }
    nlohmann::json cards = nlohmann::json::object();
    nlohmann::json cpts = nlohmann::json::object();
    for (int i = 0; i < m.node_count(); ++i) {
        const auto& nd = m.node(i);
        cards[nd.name] = nd.card;
        if (nd.deterministic_proxy) continue;
        cpts[nd.name] = nd.cpt;
    }
    j["cardinalities"] = cards;
    j["cpts"] = cpts;
    return j;
}

inline DiscreteScm scm_from_json(const nlohmann::json& j) {
    CausalGraph g = parse_graph(j.at("graph_dsl").get<std::string>());
    if (j.contains("missing_data"))
        g = augment_missing(g, j["missing_data"].get<std::string>());
    ScmBuilder b(g);
    if (j.contains("cardinalities"))
        for (auto it = j["cardinalities"].begin(); it != j["cardinalities"].end(); ++it) {
            int id = b.node_id(it.key());
            if (id < g.size() && g.kind(id) == VarKind::Proxy) continue;
            b.card(it.key(), it.value().get<int>());
        }
    for (auto it = j.at("cpts").begin(); it != j.at("cpts").end(); ++it)
        b.cpt(it.key(), it.value().get<std::vector<double>>());
    return b.build();
}

}  // namespace causalid
