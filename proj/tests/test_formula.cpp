#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "causalid/formula.hpp"
#include "causalid/scm.hpp"
#include "causalid/witnesses.hpp"
#include "support/benchmark_graphs.hpp"

using namespace causalid;

namespace {

FormulaPtr frontdoor_two_source_formula(const CausalGraph& g) {
    // [sum_{Z} [p(Z|X)*p(Y|do(Z))]]
    return Formula::sum(VarSet::single(g.require("Z")),
                        Formula::product({Formula::atom(parse_term("P(Z|X)", g)),
                                          Formula::atom(parse_term("P(Y|do(Z))", g))}));
}

FormulaPtr experiment_chain_formula(const CausalGraph& g) {
    // [sum_{Z} [p(Z|do(X))*p(Y|do(Z))]]
    return Formula::sum(VarSet::single(g.require("Z")),
                        Formula::product({Formula::atom(parse_term("P(Z|do(X))", g)),
                                          Formula::atom(parse_term("P(Y|do(Z))", g))}));
}

std::vector<int> binary_cards(const CausalGraph& g) { return std::vector<int>(g.size(), 2); }

}  // namespace

TEST_CASE("rendering") {
    auto g = parse_graph(causalid::testing::frontdoor_variant('a'));
    REQUIRE(render(frontdoor_two_source_formula(g), g) == "[sum_{Z} [p(Z|X)*p(Y|do(Z))]]");
    REQUIRE(render(Formula::atom(parse_term("P(X)", g)), g) == "p(X)");
    REQUIRE(render(experiment_chain_formula(g), g) == "[sum_{Z} [p(Z|do(X))*p(Y|do(Z))]]");
    auto q = Formula::quotient(Formula::atom(parse_term("P(X,Z)", g)),
                               Formula::atom(parse_term("P(Z)", g)));
    REQUIRE(render(q, g) == "[p(X,Z)/p(Z)]");
}

TEST_CASE("parse round trip is a fixed point") {
    auto g = parse_graph(causalid::testing::frontdoor_variant('a'));
    auto gw = parse_graph(std::string(causalid::testing::frontdoor_variant('f')));
    const char* cases[] = {
        "[sum_{Z} [p(Z|X)*p(Y|do(Z))]]",
        "p(X)",
        "[sum_{Z} [p(Z|do(X))*p(Y|do(Z))]]",
        "[p(X,Z)/p(Z)]",
        "[sum_{Z,Y} [p(X,Z)*[p(Y|do(Z))/[sum_{Y} p(Z,Y)]]]]",
    };
    for (const char* text : cases) {
        const CausalGraph& graph = g;
        std::string once = render(parse_formula(text, graph), graph);
        std::string twice = render(parse_formula(once, graph), graph);
        REQUIRE(once == text);
        REQUIRE(twice == once);
    }
    std::string w_case = "[sum_{Z,W} [p(W)*[p(Z|do(X),W)*p(Y|do(Z),W)]]]";
    REQUIRE(render(parse_formula(w_case, gw), gw) == w_case);
}

TEST_CASE("free variables and substitution") {
    auto g = parse_graph(causalid::testing::frontdoor_variant('a'));
    auto f = frontdoor_two_source_formula(g);
    REQUIRE(free_variables(f) == (VarSet::single(g.require("X")) | VarSet::single(g.require("Y"))));
    SECTION("empty sum scope rejected") {
        REQUIRE_THROWS_AS(Formula::sum({}, Formula::atom(parse_term("P(X)", g))),
                          std::invalid_argument);
    }
    SECTION("self substitution is the identity") {
        auto t = parse_term("P(Y|do(Z))", g);
        auto f2 = substitute_atom(f, t, Formula::atom(t));
        REQUIRE(render(f2, g) == render(f, g));
    }
    SECTION("capture of a bound sum variable rejected") {
        // substitute an atom that does not mention Z with one that does,
        // under the sum binding Z
        auto inner = Formula::product({Formula::atom(parse_term("P(Z|X)", g)),
                                       Formula::atom(parse_term("P(Y|X)", g))});
        auto fsum = Formula::sum(VarSet::single(g.require("Z")), inner);
        auto t = parse_term("P(Y|X)", g);
        auto replacement = Formula::atom(parse_term("P(Y|X,Z)", g));
        REQUIRE_THROWS_AS(substitute_atom(fsum, t, replacement), std::invalid_argument);
    }
    SECTION("substitution outside a binder works") {
        auto t = parse_term("P(X)", g);
        auto f0 = Formula::product({Formula::atom(t), Formula::atom(parse_term("P(Y,Z)", g))});
        auto f2 = substitute_atom(f0, t, Formula::quotient(Formula::atom(parse_term("P(X,Z)", g)),
                                                           Formula::atom(parse_term("P(Z)", g))));
        REQUIRE(render(f2, g) == "[[p(X,Z)/p(Z)]*p(Z,Y)]");
    }
}

TEST_CASE("evaluation equals brute force on a fixed front-door model") {
    auto g = parse_graph(causalid::testing::frontdoor_variant('a'));
    ScmBuilder b(g);
    b.cpt("U_X_Y", {0.5, 0.5});
    b.cpt_fn("X", [](const ScmBuilder::ParentView& pa) {
        double px = pa("U_X_Y") == 1 ? 0.8 : 0.2;
        return std::vector<double>{1 - px, px};
    });
    b.cpt_fn("Z", [](const ScmBuilder::ParentView& pa) {
        double pz = pa("X") == 1 ? 0.9 : 0.1;
        return std::vector<double>{1 - pz, pz};
    });
    b.cpt_fn("Y", [](const ScmBuilder::ParentView& pa) {
        double py = pa("Z") == 1 ? (pa("U_X_Y") == 1 ? 0.9 : 0.5)
                                 : (pa("U_X_Y") == 1 ? 0.6 : 0.1);
        return std::vector<double>{1 - py, py};
    });
    auto m = b.build();

    auto f = frontdoor_two_source_formula(g);
    AtomBindings binds;
    for (const char* s : {"P(Z|X)", "P(Y|do(Z))"}) {
        auto t = parse_term(s, g);
        binds.bind(t, enumerate_term(m, t));
    }
    auto query = parse_term("P(Y|do(X))", g);
    auto table = evaluate(f, binds, query, g, binary_cards(g));
    auto brute = enumerate_term(m, query);
    REQUIRE(max_abs_diff(table, brute) < 1e-12);
    // frozen oracle value: P(Y=1|do(X=1)) = 0.9*0.7 + 0.1*0.35
    REQUIRE(std::fabs(table.at({1, 1}) - 0.665) < 1e-12);
    REQUIRE(std::fabs(brute.at({1, 1}) - 0.665) < 1e-12);
}

TEST_CASE("atom formula returns its binding unchanged") {
    auto g = parse_graph(causalid::testing::frontdoor_variant('a'));
    auto m = random_scm(g, 31);
    auto t = parse_term("P(Y|do(X))", g);
    AtomBindings binds;
    binds.bind(t, enumerate_term(m, t));
    auto got = evaluate(Formula::atom(t), binds, t, g, binary_cards(g));
    REQUIRE(max_abs_diff(got, enumerate_term(m, t)) == 0.0);
}

TEST_CASE("the two-experiment chain formula fails under post-mediator confounding") {
    // Evaluating the chain formula on the xor model yields 0.5 everywhere
    // while the true effect is deterministic: worst-cell error is exactly 0.5.
    auto m = witnesses::xor_chain_model();
    const auto& g = m.graph();
    auto f = experiment_chain_formula(g);
    AtomBindings binds;
    for (const char* s : {"P(Z|do(X))", "P(Y|do(Z))"}) {
        auto t = parse_term(s, g);
        binds.bind(t, enumerate_term(m, t));
    }
    auto query = parse_term("P(Y|do(X))", g);
    auto table = evaluate(f, binds, query, g, binary_cards(g));
    for (double v : table.values) REQUIRE(v == 0.5);
    REQUIRE(max_abs_diff(table, enumerate_term(m, query)) == 0.5);
}

TEST_CASE("quotient zero policy") {
    auto g = parse_graph("A\nB");
    auto ta = parse_term("P(A)", g);
    auto tb = parse_term("P(B)", g);
    auto f = Formula::quotient(Formula::atom(ta), Formula::atom(tb));
    auto query = parse_term("P(A|B)", g);
    auto tab = parse_term("P(A,B)", g);
    auto fab = Formula::quotient(Formula::atom(ta), Formula::atom(tab));
    SECTION("0/0 evaluates to 0 and counts a warning") {
        AtomBindings binds;
        binds.bind(ta, ProbTable{{0}, {2}, {}, {}, {0.0, 1.0}});
        binds.bind(tab, ProbTable{{0, 1}, {2, 2}, {}, {}, {0.0, 0.0, 0.5, 0.5}});
        EvalStats stats;
        auto table = evaluate(fab, binds, query, g, binary_cards(g), &stats);
        REQUIRE(table.at({0, 0}) == 0.0);
        REQUIRE(table.at({0, 1}) == 0.0);
        REQUIRE(stats.zero_over_zero == 2);
    }
    SECTION("x/0 with x>0 is an error") {
        AtomBindings binds;
        binds.bind(ta, ProbTable{{0}, {2}, {}, {}, {0.5, 0.5}});
        binds.bind(tab, ProbTable{{0, 1}, {2, 2}, {}, {}, {0.0, 0.0, 0.5, 0.5}});
        REQUIRE_THROWS_AS(evaluate(fab, binds, query, g, binary_cards(g)), std::runtime_error);
    }
}

TEST_CASE("evaluation errors") {
    auto g = parse_graph(causalid::testing::frontdoor_variant('a'));
    auto f = frontdoor_two_source_formula(g);
    auto query = parse_term("P(Y|do(X))", g);
    SECTION("unbound atom") {
        AtomBindings binds;
        REQUIRE_THROWS_WITH(evaluate(f, binds, query, g, binary_cards(g)),
                            Catch::Matchers::ContainsSubstring("unbound atom"));
    }
    SECTION("scope mismatch in a binding") {
        auto gw = parse_graph(causalid::testing::frontdoor_variant('f'));
        auto fw = frontdoor_two_source_formula(gw);
        auto m = random_scm(gw, 3);
        AtomBindings binds;
        // bind p(Z|X) with a table that also spans W: W is never assigned
        auto bad = enumerate_term(m, parse_term("P(Z,W|X)", gw));
        binds.bind(parse_term("P(Z|X)", gw), bad);
        binds.bind(parse_term("P(Y|do(Z))", gw),
                   enumerate_term(m, parse_term("P(Y|do(Z))", gw)));
        REQUIRE_THROWS_AS(
            evaluate(fw, binds, parse_term("P(Y|do(X))", gw), gw, binary_cards(gw)),
            std::invalid_argument);
    }
}

TEST_CASE("evaluation is multilinear in each atom table") {
    auto g = parse_graph(causalid::testing::frontdoor_variant('a'));
    auto m = random_scm(g, 17);
    auto f = frontdoor_two_source_formula(g);
    auto t1 = parse_term("P(Z|X)", g);
    auto t2 = parse_term("P(Y|do(Z))", g);
    auto query = parse_term("P(Y|do(X))", g);

    AtomBindings binds;
    binds.bind(t1, enumerate_term(m, t1));
    binds.bind(t2, enumerate_term(m, t2));
    auto base = evaluate(f, binds, query, g, binary_cards(g));

    auto scaled = enumerate_term(m, t1);
    for (double& v : scaled.values) v *= 2.0;
    AtomBindings binds2;
    binds2.bind(t1, scaled);
    binds2.bind(t2, enumerate_term(m, t2));
    auto doubled = evaluate(f, binds2, query, g, binary_cards(g));
    for (std::size_t i = 0; i < base.values.size(); ++i)
        REQUIRE(std::fabs(doubled.values[i] - 2.0 * base.values[i]) < 1e-12);
}
