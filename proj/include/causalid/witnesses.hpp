#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "causalid/benchmarks.hpp"
#include "causalid/graph.hpp"
#include "causalid/scm.hpp"
#include "causalid/term.hpp"

// Built-in non-identifiability witnesses for the benchmark grid: for each
// no-cell with a known construction, a pair of models over the cell's graph
// that agree on every data source but disagree on P(Y|do(X)). Symbolic
// constructions carry free parameters subject to a != b, p != 1/2, q != 1/2.

namespace causalid::witnesses {

struct WitnessParams {
    double p = 0.25;
    double q = 0.75;
    double a = 0.90;
    double b = 0.10;
};

namespace detail {

// Coupler C links X's and Z's mechanisms (a confounder of X and Z). The two
// models swap where the p-asymmetry lives: model 1 puts it in X|C with C
// uniform, model 2 puts it in C with X uniform. Inputs over (X,Z) marginals
// and Y|Z-experiments cannot tell them apart.
inline DiscreteScm premediator_model(const CausalGraph& g, const std::string& coupler,
                                     bool first, const WitnessParams& wp) {
    ScmBuilder bld(g);
    bld.fill_uniform();
    bld.cpt(coupler, first ? std::vector<double>{0.5, 0.5}
                           : std::vector<double>{1.0 - wp.p, wp.p});
    bld.cpt_fn("X", [&, first](const ScmBuilder::ParentView& pa) {
        double px = first ? (pa(coupler) == 1 ? wp.p : 1.0 - wp.p) : 0.5;
        return std::vector<double>{1.0 - px, px};
    });
    bld.cpt_fn("Z", [&](const ScmBuilder::ParentView& pa) {
        double pz = pa("X") == 0 ? 0.5 : (pa(coupler) == 1 ? wp.q : 1.0 - wp.q);
        return std::vector<double>{1.0 - pz, pz};
    });
    bld.cpt_fn("Y", [&](const ScmBuilder::ParentView& pa) {
        double py = pa("Z") == 1 ? wp.a : wp.b;
        return std::vector<double>{1.0 - py, py};
    });
    return bld.build();
}

// Coupler C links Z's and Y's mechanisms (a confounder of Z and Y). Model 1
// hides the asymmetry in Z|C and Y|Z,C; model 2 collapses both to their
// mixtures. Z|do(X) and Y|do(Z) marginals agree, the X-to-Y effect does not.
inline DiscreteScm postmediator_model(const CausalGraph& g, const std::string& coupler,
                                      bool first, const WitnessParams& wp) {
    ScmBuilder bld(g);
    bld.fill_uniform();
    bld.cpt(coupler, first ? std::vector<double>{0.5, 0.5}
                           : std::vector<double>{1.0 - wp.p, wp.p});
    bld.cpt_fn("X", [](const ScmBuilder::ParentView&) {
        return std::vector<double>{0.5, 0.5};
    });
    bld.cpt_fn("Z", [&, first](const ScmBuilder::ParentView& pa) {
        double pz = first ? (pa(coupler) == 1 ? wp.p : 1.0 - wp.p) : 0.5;
        return std::vector<double>{1.0 - pz, pz};
    });
    bld.cpt_fn("Y", [&, first](const ScmBuilder::ParentView& pa) {
        double py;
        if (pa("Z") == 0) py = 0.5;
        else if (first) py = pa(coupler) == 1 ? wp.a : wp.b;
        else py = 0.5 * (wp.a + wp.b);
        return std::vector<double>{1.0 - py, py};
    });
    return bld.build();
}

// Fully numeric pair with the X-Y confounder carrying the difference; the
// (Z,Y) and (X,Y) margins and Z|do(X) coincide exactly.
inline DiscreteScm numeric_xy_model(const CausalGraph& g, bool first) {
    ScmBuilder bld(g);
    bld.fill_uniform();
    bld.cpt("U_X_Y", {0.5, 0.5});
    bld.cpt_fn("X", [](const ScmBuilder::ParentView& pa) {
        double px = pa("U_X_Y") == 1 ? 0.5 : 0.25;
        return std::vector<double>{1.0 - px, px};
    });
    bld.cpt_fn("Z", [](const ScmBuilder::ParentView& pa) {
        double pz = pa("X") == 1 ? 0.75 : 0.25;
        return std::vector<double>{1.0 - pz, pz};
    });
    bld.cpt_fn("Y", [first](const ScmBuilder::ParentView& pa) {
        double py;
        if (first)
            py = pa("Z") == 1 ? (pa("U_X_Y") == 1 ? 4.0 / 5.0 : 7.0 / 10.0)
                              : (pa("U_X_Y") == 1 ? 13.0 / 20.0 : 1.0 / 20.0);
        else
            py = pa("Z") == 1 ? (pa("U_X_Y") == 1 ? 19.0 / 20.0 : 1.0 / 2.0)
                              : (pa("U_X_Y") == 1 ? 2.0 / 5.0 : 1.0 / 4.0);
        return std::vector<double>{1.0 - py, py};
    });
    return bld.build();
}

// Fully numeric pair for the post-mediator-confounded variant. The second
// model shifts Z's mechanism by +3/10 at (X=1,U=1) and compensates so that
// P(Z=1|U=u) and both do-marginals of Z are unchanged exactly; only the
// U-coupling between Z and Y moves, which the inputs cannot see. The causal
// effects then differ by 3/400 at (X=1,Y=1).
inline DiscreteScm numeric_zy_model(const CausalGraph& g, bool first) {
    ScmBuilder bld(g);
    bld.fill_uniform();
    bld.cpt("U_Z_Y", {0.5, 0.5});
    bld.cpt("X", {0.6, 0.4});
    bld.cpt_fn("Z", [first](const ScmBuilder::ParentView& pa) {
        double pz;
        if (first)
            pz = pa("X") == 1 ? (pa("U_Z_Y") == 1 ? 2.0 / 5.0 : 7.0 / 20.0)
                              : (pa("U_Z_Y") == 1 ? 3.0 / 10.0 : 2.0 / 5.0);
        else
            pz = pa("X") == 1 ? (pa("U_Z_Y") == 1 ? 7.0 / 10.0 : 1.0 / 20.0)
                              : (pa("U_Z_Y") == 1 ? 1.0 / 10.0 : 3.0 / 5.0);
        return std::vector<double>{1.0 - pz, pz};
    });
    bld.cpt_fn("Y", [](const ScmBuilder::ParentView& pa) {
        double py = pa("Z") == 1 ? (pa("U_Z_Y") == 1 ? 1.0 / 5.0 : 3.0 / 10.0)
                                 : (pa("U_Z_Y") == 1 ? 3.0 / 10.0 : 7.0 / 20.0);
        return std::vector<double>{1.0 - py, py};
    });
    return bld.build();
}

enum class Construction { PremediatorLatent, PremediatorW, PostmediatorLatent, PostmediatorW,
                          NumericXY, NumericZY };

inline std::optional<Construction> cell_construction(int row, char v) {
    using C = Construction;
    auto pre = [&]() -> std::optional<C> {
        if (v == 'b' || v == 'c' || v == 'g') return C::PremediatorLatent;
        if (v == 'f') return C::PremediatorW;
        return std::nullopt;
    };
    switch (row) {
        case 1:
        case 6:
            return pre();
        case 2:
            if (v == 'd' || v == 'e') return C::PostmediatorLatent;
            return pre();
        case 3:
            if (v == 'd' || v == 'e') return C::PostmediatorLatent;
            if (v == 'f' || v == 'g') return C::PostmediatorW;
            return std::nullopt;
        case 4:
            if (v == 'd') return C::NumericZY;
            if (v == 'a' || v == 'c' || v == 'e' || v == 'f' || v == 'g') return C::NumericXY;
            return std::nullopt;
        case 5:
            if (v == 'a' || v == 'c' || v == 'e' || v == 'f' || v == 'g') return C::NumericXY;
            return std::nullopt;
        case 7:
            if (v == 'b' || v == 'c' || v == 'g') return C::PremediatorLatent;
            if (v == 'd' || v == 'e') return C::PostmediatorLatent;
            return std::nullopt;
        case 8:
            if (v == 'd' || v == 'e') return C::PostmediatorLatent;
            if (v == 'f' || v == 'g') return C::PremediatorW;
            return std::nullopt;
        case 9:
            if (v == 'd' || v == 'e') return C::PostmediatorLatent;
            return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace detail

struct GridCell {
    int row;
    char variant;
};

inline bool construction_is_symbolic(int row, char v) {
    auto c = detail::cell_construction(row, v);
    return c && *c != detail::Construction::NumericXY && *c != detail::Construction::NumericZY;
}

// Witness pair for a no-cell of the grid; nullopt for yes-cells and for the
// two cells no construction covers (rows 1 and 6 on variant e).
inline std::optional<WitnessPair> make_grid_witness(int row, char variant,
                                                    const WitnessParams& wp = {}) {
    if (benchmarks::grid_expected(row, variant)) return std::nullopt;
    auto c = detail::cell_construction(row, variant);
    if (!c) return std::nullopt;
    CausalGraph g = parse_graph(benchmarks::grid_graph_text(row, variant));

    auto build = [&](bool first) {
        switch (*c) {
            case detail::Construction::PremediatorLatent:
                return detail::premediator_model(g, "U_X_Z", first, wp);
            case detail::Construction::PremediatorW:
                return detail::premediator_model(g, "W", first, wp);
            case detail::Construction::PostmediatorLatent:
                return detail::postmediator_model(g, "U_Z_Y", first, wp);
            case detail::Construction::PostmediatorW:
                return detail::postmediator_model(g, "W", first, wp);
            case detail::Construction::NumericXY:
                return detail::numeric_xy_model(g, first);
            case detail::Construction::NumericZY:
                return detail::numeric_zy_model(g, first);
        }
        throw std::logic_error("unreachable");
    };

    WitnessPair w{build(true), build(false), {}, parse_term(benchmarks::grid_query(), g)};
    for (const auto& s : benchmarks::grid_row_sources(row))
        w.inputs.push_back(parse_term(s, g));
    return w;
}

// Extreme post-mediator-confounding demonstration on variant d: with
// Z = X xor U and Y = Z xor U, both experimental sources are uniform noise
// while the intervened X determines Y exactly. Evaluating the two-experiment
// chain formula here yields 0.5 everywhere, which is why that formula is
// invalid under post-mediator confounding.
inline DiscreteScm xor_chain_model() {
    CausalGraph g = parse_graph(benchmarks::frontdoor_variant('d'));
    ScmBuilder bld(g);
    bld.cpt("U_Z_Y", {0.5, 0.5});
    bld.cpt("X", {0.5, 0.5});
    auto xorcpt = [](const std::string& lhs) {
        return [lhs](const ScmBuilder::ParentView& pa) {
            int v = pa(lhs) ^ pa("U_Z_Y");
            return std::vector<double>{v == 0 ? 1.0 : 0.0, v == 1 ? 1.0 : 0.0};
        };
    };
    bld.cpt_fn("Z", xorcpt("X"));
    bld.cpt_fn("Y", xorcpt("Z"));
    return bld.build();
}

inline std::vector<GridCell> covered_cells() {
    std::vector<GridCell> cells;
    for (int row = 1; row <= 9; ++row)
        for (char v : benchmarks::grid_variants())
            if (!benchmarks::grid_expected(row, v) && detail::cell_construction(row, v))
                cells.push_back({row, v});
    return cells;
}

// No-cells asserted by the grid but not reachable from the bundled
// constructions; their verdicts rest on the search closure alone.
inline std::vector<GridCell> uncovered_cells() {
    std::vector<GridCell> cells;
    for (int row = 1; row <= 9; ++row)
        for (char v : benchmarks::grid_variants())
            if (!benchmarks::grid_expected(row, v) && !detail::cell_construction(row, v))
                cells.push_back({row, v});
    return cells;
}

}  // namespace causalid::witnesses
