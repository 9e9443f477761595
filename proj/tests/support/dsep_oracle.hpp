#pragma once

// Test-only d-separation oracle: enumerates every simple undirected path
// between the endpoint sets over the latent-materialized graph and applies
// the textbook blocking rules. Deliberately independent of the engine's
// reachability implementation.

#include <vector>

#include "causalid/graph.hpp"
#include "causalid/varset.hpp"

namespace causalid::testing {

class DsepOracle {
public:
    explicit DsepOracle(const CausalGraph& g) : n_(g.size()) {
        total_ = n_ + static_cast<int>(g.bidirected_edges().size());
        adj_.resize(total_);
        // adjacency entries carry direction: true = edge points into 'to'
        for (auto e : g.directed_edges()) {
            adj_[e.from].push_back({e.to, true});
            adj_[e.to].push_back({e.from, false});
        }
        int lat = n_;
        for (auto e : g.bidirected_edges()) {
            adj_[lat].push_back({e.a, true});
            adj_[e.a].push_back({lat, false});
            adj_[lat].push_back({e.b, true});
            adj_[e.b].push_back({lat, false});
            ++lat;
        }
        // descendants per node (reflexive) for collider activation
        desc_.assign(total_, std::vector<char>(total_, 0));
        for (int v = 0; v < total_; ++v) {
            std::vector<int> stack{v};
            desc_[v][v] = 1;
            while (!stack.empty()) {
                int u = stack.back();
                stack.pop_back();
                for (auto [w, into] : adj_[u])
                    if (into && !desc_[v][w]) {
                        desc_[v][w] = 1;
                        stack.push_back(w);
                    }
            }
        }
    }

    bool separated(VarSet a, VarSet b, VarSet c) {
        std::vector<char> in_b(total_, 0), in_c(total_, 0);
        for (int v : b) in_b[v] = 1;
        for (int v : c) in_c[v] = 1;
        std::vector<char> on_path(total_, 0);
        for (int s : a) {
            path_.clear();
            arrived_into_.clear();
            path_.push_back(s);
            arrived_into_.push_back(false);  // unused for the source
            on_path[s] = 1;
            bool open = dfs(in_b, in_c, on_path);
            on_path[s] = 0;
            if (open) return false;
        }
        return true;
    }

private:
    // Extends the current path from its tip; returns true when an active
    // path to some b-vertex exists.
    bool dfs(const std::vector<char>& in_b, const std::vector<char>& in_c,
             std::vector<char>& on_path) {
        int tip = path_.back();
        for (auto [next, into_next] : adj_[tip]) {
            if (on_path[next]) continue;
            // Check whether 'tip' blocks when used as an interior node.
            if (path_.size() >= 2) {
                bool entered_into_tip = arrived_into_.back();
                bool leaves_into_next = into_next;  // edge tip->next points into next
                bool collider_at_tip = entered_into_tip && !leaves_into_next;
                if (collider_at_tip) {
                    bool activated = false;
                    for (int v = 0; v < total_; ++v)
                        if (desc_[tip][v] && in_c[v]) activated = true;
                    if (!activated) continue;
                } else {
                    if (in_c[tip]) continue;
                }
            }
            if (in_b[next]) return true;
            path_.push_back(next);
            arrived_into_.push_back(into_next);
            on_path[next] = 1;
            bool open = dfs(in_b, in_c, on_path);
            on_path[next] = 0;
            path_.pop_back();
            arrived_into_.pop_back();
            if (open) return true;
        }
        return false;
    }

    int n_ = 0, total_ = 0;
    std::vector<std::vector<std::pair<int, bool>>> adj_;
    std::vector<std::vector<char>> desc_;
    std::vector<int> path_;
    std::vector<bool> arrived_into_;
};

inline bool dsep_by_paths(const CausalGraph& g, VarSet a, VarSet b, VarSet c) {
    return DsepOracle(g).separated(a, b, c);
}

}  // namespace causalid::testing
