#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalid/graph.hpp"
#include "causalid/varset.hpp"

namespace causalid {

// Dense probability table over an ordered variable scope. Semantics tag
// records which scope variables are conditioning / interventional; the rest
// form the (possibly subnormalized) joint part.
struct ProbTable {
    std::vector<int> vars;    // graph indices, in scope order
    std::vector<int> cards;   // matching cardinalities
    VarSet cond;              // conditional-on subset of vars
    VarSet dos;               // interventional-on subset of vars
    std::vector<double> values;  // row-major over vars

    std::size_t index_of(const std::vector<int>& assignment) const {
        std::size_t idx = 0;
        for (std::size_t k = 0; k < vars.size(); ++k)
            idx = idx * static_cast<std::size_t>(cards[k]) + static_cast<std::size_t>(assignment[k]);
        return idx;
    }

    double at(const std::vector<int>& assignment) const { return values[index_of(assignment)]; }

    // Looks up the value for a full-environment assignment (indexed by
    // graph variable); every scope variable must be assigned.
    double at_env(const std::vector<int>& env) const {
        std::size_t idx = 0;
        for (std::size_t k = 0; k < vars.size(); ++k) {
            int val = env[vars[k]];
            if (val < 0)
                throw std::invalid_argument("table lookup with unassigned scope variable");
            if (val >= cards[k])
                throw std::invalid_argument("table lookup out of cardinality range");
            idx = idx * static_cast<std::size_t>(cards[k]) + static_cast<std::size_t>(val);
        }
        return values[idx];
    }

    std::size_t total_cells() const {
        std::size_t n = 1;
        for (int c : cards) n *= static_cast<std::size_t>(c);
        return n;
    }

    void check_shape() const {
        if (vars.size() != cards.size())
            throw std::invalid_argument("table scope/cardinality mismatch");
        if (values.size() != total_cells())
            throw std::invalid_argument("table value count does not match scope");
        for (double v : values)
            if (!(v >= 0.0))
                throw std::invalid_argument("table holds a negative or NaN entry");
    }
};

inline double max_abs_diff(const ProbTable& a, const ProbTable& b) {
    if (a.vars != b.vars || a.cards != b.cards)
        throw std::invalid_argument("comparing tables with different scopes");
    double m = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        m = std::max(m, std::fabs(a.values[i] - b.values[i]));
    return m;
}

inline nlohmann::json table_to_json(const ProbTable& t, const CausalGraph& g) {
    nlohmann::json j;
    j["variables"] = nlohmann::json::array();
    for (std::size_t k = 0; k < t.vars.size(); ++k)
        j["variables"].push_back(g.name(t.vars[k]));
    j["cardinalities"] = t.cards;
    nlohmann::json sem;
    sem["conditional_on"] = nlohmann::json::array();
    sem["interventional_on"] = nlohmann::json::array();
    for (int v : t.cond) sem["conditional_on"].push_back(g.name(v));
    for (int v : t.dos) sem["interventional_on"].push_back(g.name(v));
    j["semantics"] = sem;
    j["values"] = t.values;
    return j;
}

inline ProbTable table_from_json(const nlohmann::json& j, const CausalGraph& g) {
    ProbTable t;
    for (const auto& n : j.at("variables")) t.vars.push_back(g.require(n.get<std::string>()));
    t.cards = j.at("cardinalities").get<std::vector<int>>();
    t.values = j.at("values").get<std::vector<double>>();
    if (j.contains("semantics")) {
        for (const auto& n : j["semantics"].value("conditional_on", nlohmann::json::array()))
            t.cond.insert(g.require(n.get<std::string>()));
        for (const auto& n : j["semantics"].value("interventional_on", nlohmann::json::array()))
            t.dos.insert(g.require(n.get<std::string>()));
    }
    t.check_shape();
    return t;
}

}  // namespace causalid
