#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalid/engine.hpp"
#include "causalid/formula.hpp"
#include "causalid/graph.hpp"
#include "causalid/scm.hpp"
#include "causalid/term.hpp"

namespace causalid {

// ---------------------------------------------------------------------------
// Scenario files: plain sectioned text
//
//   [label]    optional free-text name
//   [graph]    edge-list DSL
//   [data]     one distribution term per line
//   [query]    the target term
//   [missing]  optional missing-data map, e.g.  R_X : X, R_Y : Y
//
// '#' starts a comment; blank lines are ignored.
// ---------------------------------------------------------------------------

struct ScenarioFile {
    std::string label;
    std::string graph_text;
    std::vector<std::string> data;
    std::string query;
    std::string missing;

    QuerySpec to_query() const {
        QuerySpec q;
        q.graph = parse_graph(graph_text);
        if (!missing.empty()) q.graph = augment_missing(q.graph, missing);
        q.target = parse_term(query, q.graph);
        for (const auto& s : data) q.inputs.push_back(parse_term(s, q.graph));
        return q;
    }
};

inline ScenarioFile parse_scenario_text(const std::string& text) {
    ScenarioFile sc;
    std::string section;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto b = line.find_first_not_of(" \t\r");
        auto e = line.find_last_not_of(" \t\r");
        if (b == std::string::npos) continue;
        line = line.substr(b, e - b + 1);
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            if (section != "label" && section != "graph" && section != "data" &&
                section != "query" && section != "missing")
                throw std::invalid_argument("unknown scenario section [" + section + "]");
            continue;
        }
        if (section == "label") sc.label = sc.label.empty() ? line : sc.label + " " + line;
        else if (section == "graph") sc.graph_text += line + "\n";
        else if (section == "data") sc.data.push_back(line);
        else if (section == "query") {
            if (!sc.query.empty())
                throw std::invalid_argument("scenario has more than one query line");
            sc.query = line;
        } else if (section == "missing") {
            sc.missing = sc.missing.empty() ? line : sc.missing + ", " + line;
        } else {
            throw std::invalid_argument("scenario text before any [section]: " + line);
        }
    }
    if (sc.graph_text.empty()) throw std::invalid_argument("scenario lacks a [graph] section");
    if (sc.query.empty()) throw std::invalid_argument("scenario lacks a [query] section");
    if (sc.data.empty()) throw std::invalid_argument("scenario lacks [data] terms");
    return sc;
}

inline ScenarioFile load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str());
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct RunReport {
    ScenarioFile scenario;
    QuerySpec query;
    IdentifyResult result;
    std::string formula_string;  // empty unless identifiable

    int exit_code() const {
        switch (result.status) {
            case SearchStatus::Identifiable: return 0;
            case SearchStatus::NotIdentifiable: return 1;
            case SearchStatus::Inconclusive: return 2;
        }
        return 2;
    }
};

inline RunReport run_scenario(const ScenarioFile& sc, const SearchOptions& opts = {}) {
    RunReport rep;
    rep.scenario = sc;
    rep.query = sc.to_query();
    rep.result = identify(rep.query, opts);
    if (rep.result.identifiable())
        rep.formula_string = render(rep.result.formula, rep.query.graph);
    return rep;
}

inline const char* status_text(SearchStatus s) {
    switch (s) {
        case SearchStatus::Identifiable: return "identifiable";
        case SearchStatus::NotIdentifiable: return "not-identifiable";
        case SearchStatus::Inconclusive: return "inconclusive";
    }
    return "?";
}

inline nlohmann::json report_to_json(const RunReport& rep, bool include_trace) {
    nlohmann::json j;
    if (!rep.scenario.label.empty()) j["label"] = rep.scenario.label;
    j["identifiable"] = rep.result.identifiable();
    j["status"] = status_text(rep.result.status);
    if (rep.result.identifiable()) j["formula"] = rep.formula_string;
    else j["formula"] = nullptr;
    j["stats"] = {{"terms_generated", rep.result.stats.terms_generated},
                  {"steps_applied", rep.result.stats.steps_applied},
                  {"wall_seconds", rep.result.stats.wall_seconds}};
    j["trace"] = nlohmann::json::array();
    if (include_trace) {
        const auto& g = rep.query.graph;
        for (std::size_t i = 0; i < rep.result.trace.size(); ++i) {
            const auto& st = rep.result.trace[i];
            nlohmann::json step;
            step["rule"] = rule_name(st.rule);
            step["term"] = render_term(rep.result.trace_terms[st.produced], g);
            step["parents"] = nlohmann::json::array();
            if (st.parent1 >= 0) step["parents"].push_back(st.parent1);
            if (st.parent2 >= 0) step["parents"].push_back(st.parent2);
            step["params"] = nlohmann::json::array();
            for (int v : st.params) step["params"].push_back(g.name(v));
            step["variant"] = st.variant;
            j["trace"].push_back(step);
        }
    }
    return j;
}

inline std::string report_to_text(const RunReport& rep, bool include_trace) {
    std::ostringstream out;
    if (!rep.scenario.label.empty()) out << "label: " << rep.scenario.label << "\n";
    switch (rep.result.status) {
        case SearchStatus::Identifiable:
            out << "identifiable: TRUE\n";
            out << "formula: " << rep.formula_string << "\n";
            break;
        case SearchStatus::NotIdentifiable:
            out << "identifiable: FALSE (search closed: not identifiable by these rules)\n";
            break;
        case SearchStatus::Inconclusive:
            out << "identifiable: UNKNOWN (inconclusive: limit reached)\n";
            break;
    }
    out << "terms: " << rep.result.stats.terms_generated
        << "  steps: " << rep.result.stats.steps_applied << "  time: " << std::fixed
        << rep.result.stats.wall_seconds << "s\n";
    if (include_trace && !rep.result.trace.empty()) {
        const auto& g = rep.query.graph;
        out << "derivation:\n";
        for (std::size_t i = 0; i < rep.result.trace.size(); ++i) {
            const auto& st = rep.result.trace[i];
            out << "  #" << i << " " << rule_name(st.rule);
            if (!st.params.empty()) {
                out << "(";
                bool first = true;
                for (int v : st.params) {
                    if (!first) out << ",";
                    first = false;
                    out << g.name(v);
                }
                out << ")";
            }
            out << ": " << render_term(rep.result.trace_terms[st.produced], g);
            if (st.parent1 >= 0) {
                out << " <- #" << st.parent1;
                if (st.parent2 >= 0) out << ", #" << st.parent2;
            }
            out << "\n";
        }
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Numeric verification of an identifying formula against brute force
// ---------------------------------------------------------------------------

struct VerifyReport {
    int models_checked = 0;
    double max_discrepancy = 0.0;
    long zero_over_zero = 0;
    double tolerance = 1e-9;

    bool passed() const { return max_discrepancy <= tolerance; }
};

inline void bind_formula_atoms(const FormulaPtr& f, const DiscreteScm& m, AtomBindings& binds) {
    std::vector<FormulaPtr> stack{f};
    while (!stack.empty()) {
        auto cur = stack.back();
        stack.pop_back();
        if (cur->kind() == Formula::Kind::Atom) {
            if (!binds.find(cur->term())) binds.bind(cur->term(), enumerate_term(m, cur->term()));
        } else {
            for (const auto& c : cur->children()) stack.push_back(c);
        }
    }
}

inline double formula_vs_brute_force(const FormulaPtr& f, const DistributionTerm& target,
                                     const DiscreteScm& m, EvalStats* stats = nullptr) {
    const CausalGraph& g = m.graph();
    AtomBindings binds;
    bind_formula_atoms(f, m, binds);
    std::vector<int> cards(g.size());
    for (int v = 0; v < g.size(); ++v) cards[v] = m.card(v);
    auto got = evaluate(f, binds, target, g, cards, stats);
    auto want = enumerate_term(m, target);
    return max_abs_diff(got, want);
}

// Checks the formula on models drawn from `seed` (count many) or on one
// explicit model. The model's graph must match the scenario's.
inline VerifyReport verify_formula(const QuerySpec& q, const FormulaPtr& f,
                                   const std::optional<DiscreteScm>& explicit_model,
                                   std::uint64_t seed, int count, double tolerance) {
    VerifyReport rep;
    rep.tolerance = tolerance;
    auto check = [&](const DiscreteScm& m) {
        if (render_graph_dsl(m.graph()) != render_graph_dsl(q.graph))
            throw std::invalid_argument("model graph does not match the scenario graph");
        EvalStats stats;
        rep.max_discrepancy = std::max(rep.max_discrepancy,
                                       formula_vs_brute_force(f, q.target, m, &stats));
        rep.zero_over_zero += stats.zero_over_zero;
        ++rep.models_checked;
    };
    if (explicit_model) {
        check(*explicit_model);
    } else {
        for (int i = 0; i < count; ++i) check(random_scm(q.graph, seed + static_cast<std::uint64_t>(i)));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Batch manifests: one scenario per line,
//   cell <row-label> <col-label> <Y|N> <path relative to the manifest>
// ---------------------------------------------------------------------------

struct ManifestEntry {
    std::string row;
    std::string col;
    bool expect_identifiable = false;
    std::string path;
};

inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    std::string dir;
    if (auto slash = path.find_last_of('/'); slash != std::string::npos)
        dir = path.substr(0, slash + 1);
    std::vector<ManifestEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kw;
        if (!(ls >> kw)) continue;
        if (kw != "cell") throw std::invalid_argument("manifest line must start with 'cell'");
        ManifestEntry e;
        std::string expect;
        if (!(ls >> e.row >> e.col >> expect >> e.path))
            throw std::invalid_argument("malformed manifest line: " + line);
        if (expect != "Y" && expect != "N")
            throw std::invalid_argument("expected verdict must be Y or N: " + line);
        e.expect_identifiable = expect == "Y";
        e.path = dir + e.path;
        entries.push_back(e);
    }
    return entries;
}

}  // namespace causalid
