#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "causalid/witnesses.hpp"

using namespace causalid;

TEST_CASE("witness coverage accounts for every no-cell of the grid") {
    auto covered = witnesses::covered_cells();
    auto uncovered = witnesses::uncovered_cells();
    int no_cells = 0;
    for (int row = 1; row <= 9; ++row)
        for (char v : benchmarks::grid_variants())
            if (!benchmarks::grid_expected(row, v)) ++no_cells;
    REQUIRE(static_cast<int>(covered.size() + uncovered.size()) == no_cells);
    // the two cells whose verdicts rest on the search closure alone
    REQUIRE(uncovered.size() == 2);
    REQUIRE(uncovered[0].row == 1);
    REQUIRE(uncovered[0].variant == 'e');
    REQUIRE(uncovered[1].row == 6);
    REQUIRE(uncovered[1].variant == 'e');
    // yes-cells never produce a witness
    REQUIRE_FALSE(witnesses::make_grid_witness(2, 'a').has_value());
}

TEST_CASE("every built-in witness separates the target while matching the sources") {
    for (const auto& cell : witnesses::covered_cells()) {
        INFO("row " << cell.row << " variant " << cell.variant);
        auto w = witnesses::make_grid_witness(cell.row, cell.variant);
        REQUIRE(w.has_value());
        auto rep = check_witness(*w);
        CHECK(rep.inputs_agree);
        CHECK(rep.max_input_diff <= 1e-12);
        CHECK(rep.target_differs);
        CHECK(rep.target_diff > 1e-3);
    }
}

TEST_CASE("symbolic witnesses hold across valid parameter draws") {
    std::mt19937_64 rng(515151);
    auto unit = [&]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    for (const auto& cell : witnesses::covered_cells()) {
        if (!witnesses::construction_is_symbolic(cell.row, cell.variant)) continue;
        for (int draw = 0; draw < 8; ++draw) {
            witnesses::WitnessParams wp;
            wp.p = 0.05 + 0.40 * unit();  // < 1/2
            wp.q = 0.55 + 0.40 * unit();  // > 1/2
            wp.a = 0.55 + 0.40 * unit();
            wp.b = 0.05 + 0.40 * unit();  // a != b by construction
            auto w = witnesses::make_grid_witness(cell.row, cell.variant, wp);
            REQUIRE(w.has_value());
            auto rep = check_witness(*w);
            INFO("row " << cell.row << " variant " << cell.variant << " draw " << draw);
            CHECK(rep.inputs_agree);
            CHECK(rep.target_differs);
        }
    }
}

TEST_CASE("witness models persist through serialization") {
    auto w = witnesses::make_grid_witness(3, 'f');
    REQUIRE(w.has_value());
    auto m1b = scm_from_json(scm_to_json(w->m1));
    WitnessPair w2{m1b, w->m2, w->inputs, w->target};
    auto rep = check_witness(w2);
    REQUIRE(rep.inputs_agree);
    REQUIRE(rep.target_differs);
}
