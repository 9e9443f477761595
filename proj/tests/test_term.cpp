#include <catch2/catch_amalgamated.hpp>

#include "causalid/term.hpp"
#include "support/benchmark_graphs.hpp"

using namespace causalid;

namespace {

CausalGraph mnar_graph() {
    return augment_missing(parse_graph(causalid::testing::kMnarMediatorGraph),
                           causalid::testing::kMissingMapXYZ);
}

}  // namespace

TEST_CASE("term parsing") {
    auto fd = parse_graph(causalid::testing::kFrontdoorA);
    SECTION("experiment term") {
        auto t = parse_term("P(Y | do(Z))", fd);
        REQUIRE(t.left == VarSet::single(fd.require("Y")));
        REQUIRE(t.dos == VarSet::single(fd.require("Z")));
        REQUIRE(t.cond.empty());
    }
    SECTION("proxy joint") {
        auto g = mnar_graph();
        auto t = parse_term("P(X*,Y*,Z*,R_X,R_Y,R_Z)", g);
        REQUIRE(t.left.size() == 6);
        REQUIRE(t.dos.empty());
        REQUIRE(t.cond.empty());
        REQUIRE(t.left.contains(g.require("X*")));
        REQUIRE(t.left.contains(g.require("R_X")));
    }
    SECTION("do sets merge") {
        auto a = parse_term("P(Y | do(X), do(Z))", fd);
        auto b = parse_term("P(Y | do(X,Z))", fd);
        REQUIRE(a == b);
        REQUIRE(stable_hash(a) == stable_hash(b));
    }
    SECTION("value bindings") {
        auto g = mnar_graph();
        auto t = parse_term("P(X, R_X = 1 | R_Y=0, Z)", g);
        REQUIRE(t.left == VarSet::single(g.require("X")));
        REQUIRE(t.left_one == VarSet::single(g.require("R_X")));
        REQUIRE(t.cond_zero == VarSet::single(g.require("R_Y")));
        REQUIRE(t.cond == VarSet::single(g.require("Z")));
        // bare indicator on the right stays symbolic
        auto u = parse_term("P(X | R_X)", g);
        REQUIRE(u.cond == VarSet::single(g.require("R_X")));
        REQUIRE(u.cond_one.empty());
    }
    SECTION("whitespace-insensitive") {
        REQUIRE(parse_term("P( Y |  do( Z ) )", fd) == parse_term("P(Y|do(Z))", fd));
    }
    SECTION("errors") {
        REQUIRE_THROWS_AS(parse_term("P(Q)", fd), std::invalid_argument);
        REQUIRE_THROWS_AS(parse_term("P(Y | do(Y))", fd), std::invalid_argument);
        REQUIRE_THROWS_AS(parse_term("P( | X)", fd), std::invalid_argument);
        REQUIRE_THROWS_AS(parse_term("P(do(X), Y)", fd), std::invalid_argument);
        REQUIRE_THROWS_AS(parse_term("P(Y = 1 | X)", fd), std::invalid_argument);
        auto g = mnar_graph();
        REQUIRE_THROWS_AS(parse_term("P(X, R_X = 2)", g), std::invalid_argument);
    }
}

TEST_CASE("canonical form") {
    auto fd = parse_graph(causalid::testing::kFrontdoorA);
    SECTION("idempotent") {
        auto t = parse_term("P(Y|do(Z),X)", fd);
        REQUIRE(canonicalize(canonicalize(t, fd), fd) == t);
    }
    SECTION("set semantics on the left") {
        REQUIRE(stable_hash(parse_term("P(Z,X)", fd)) == stable_hash(parse_term("P(X,Z)", fd)));
        REQUIRE(parse_term("P(Z,X)", fd) == parse_term("P(X,Z)", fd));
    }
    SECTION("set semantics on the right") {
        auto g = parse_graph("X -> Z\nZ -> Y\nX <-> Y\nW");
        REQUIRE(parse_term("P(Y|do(Z),W)", g) == parse_term("P(Y|W,do(Z))", g));
        REQUIRE(stable_hash(parse_term("P(Y|do(Z),W)", g)) ==
                stable_hash(parse_term("P(Y|W,do(Z))", g)));
    }
    SECTION("role overlap rejected on construction") {
        DistributionTerm t;
        t.left = VarSet{0, 1};
        t.cond = VarSet{1};
        REQUIRE_THROWS_AS(validate_term(t, fd), std::invalid_argument);
    }
}

TEST_CASE("term rendering matches the formula leaf grammar") {
    auto fd = parse_graph(causalid::testing::kFrontdoorA);
    REQUIRE(render_term(parse_term("P(Y|do(Z))", fd), fd) == "p(Y|do(Z))");
    REQUIRE(render_term(parse_term("P(Z | X)", fd), fd) == "p(Z|X)");
    REQUIRE(render_term(parse_term("P(X,Z)", fd), fd) == "p(X,Z)");
    auto g = mnar_graph();
    // index order: R_Z appears in the graph text before R_X and R_Y
    REQUIRE(render_term(parse_term("P(Z | X, Y, R_X=1, R_Z=1, R_Y=1)", g), g) ==
            "p(Z|X,Y,R_Z=1,R_X=1,R_Y=1)");
    REQUIRE(render_term(parse_term("P(X, Y, R_X=1, R_Y=1)", g), g) == "p(X,Y,R_X=1,R_Y=1)");
}

TEST_CASE("every bundled scenario term string parses") {
    auto fd_with_w = [](const char* text) {
        auto g = parse_graph(text);
        if (!g.find("W")) g = parse_graph(std::string(text) + "\nW");
        return g;
    };
    // all data-source strings of the benchmark grid
    const char* grid_terms[] = {
        "P(X,Y,Z)", "P(X,Z)", "P(Y|do(Z))", "P(Z|do(X))", "P(Z,Y)", "P(X,Y)",
        "P(X,Y,Z,W)", "P(X,Z,W)", "P(Y|do(Z),W)", "P(Z|do(X),W)", "P(W)", "P(Y|do(X))",
    };
    for (char v : {'a', 'b', 'c', 'd', 'e', 'f', 'g'}) {
        auto g = fd_with_w(causalid::testing::frontdoor_variant(v));
        for (const char* s : grid_terms) REQUIRE_NOTHROW(parse_term(s, g));
    }
    // two-confounder scenario
    auto g3 = parse_graph(causalid::testing::kTwoConfounderGraph);
    for (const char* s : {"P(X,Z,H,W)", "P(Y|do(Z),W)", "P(Y|do(X))"})
        REQUIRE_NOTHROW(parse_term(s, g3));
    // missing-data scenarios
    for (const char* gt :
         {causalid::testing::kMnarMediatorGraph, causalid::testing::kCaseControlGraph}) {
        auto g = augment_missing(parse_graph(gt), causalid::testing::kMissingMapXYZ);
        for (const char* s : {"P(X*,Y*,Z*,R_X,R_Y,R_Z)", "P(Y)", "P(R_Y|Y)", "P(Y|do(X))"})
            REQUIRE_NOTHROW(parse_term(s, g));
    }
}
