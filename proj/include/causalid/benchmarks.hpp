#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace causalid::benchmarks {

// ---------------------------------------------------------------------------
// The front-door-variant benchmark grid: seven mediation graphs (a-g) by
// nine data-source rows, query P(Y|do(X)) throughout. Variants a-e leave W
// unconnected; rows whose sources mention W add it as an isolated vertex.
// ---------------------------------------------------------------------------

inline const char* frontdoor_variant(char v) {
    switch (v) {
        case 'a':
            return "X -> Z\nZ -> Y\nZ -> Y\nX <-> Y\n";
        case 'b':
            return "X -> Z\nZ -> Y\nX <-> Z\n";
        case 'c':
            return "X -> Z\nZ -> Y\nX <-> Y\nX <-> Z\n";
        case 'd':
            return "X -> Z\nZ -> Y\nZ <-> Y\n";
        case 'e':
            return "X -> Z\nZ -> Y\nZ <-> Y\nX <-> Y\n";
        case 'f':
            return "X -> Z\nZ -> Y\nW -> X\nW -> Z\nW -> Y\nX <-> Y\n";
        case 'g':
            return "X -> Z\nZ -> Y\nW -> X\nW -> Z\nW -> Y\nX <-> Y\nX <-> Z\n";
    }
    throw std::invalid_argument("unknown graph variant");
}

inline const std::vector<char>& grid_variants() {
    static const std::vector<char> v{'a', 'b', 'c', 'd', 'e', 'f', 'g'};
    return v;
}

inline const std::vector<std::string>& grid_row_sources(int row) {
    static const std::vector<std::vector<std::string>> rows = {
        {"P(X,Y,Z)"},
        {"P(X,Z)", "P(Y|do(Z))"},
        {"P(Z|do(X))", "P(Y|do(Z))"},
        {"P(Z,Y)", "P(Z|do(X))"},
        {"P(X,Z)", "P(X,Y)", "P(Z,Y)", "P(Z|do(X))"},
        {"P(X,Y,Z,W)"},
        {"P(X,Z,W)", "P(Y|do(Z),W)"},
        {"P(Z|do(X),W)", "P(Y|do(Z),W)"},
        {"P(Z|do(X),W)", "P(Y|do(Z),W)", "P(W)"},
    };
    if (row < 1 || row > 9) throw std::invalid_argument("grid rows are 1..9");
    return rows[static_cast<std::size_t>(row - 1)];
}

inline bool grid_row_mentions_w(int row) {
    for (const auto& s : grid_row_sources(row))
        if (s.find('W') != std::string::npos) return true;
    return false;
}

inline const char* grid_query() { return "P(Y|do(X))"; }

// Identifiability verdicts, rows 1..9 by variants a..g.
inline bool grid_expected(int row, char variant) {
    static const char* grid[9] = {
        "ynnynnn",  // 1: P(X,Y,Z)
        "ynnnnnn",  // 2: P(X,Z), P(Y|do(Z))
        "yyynnnn",  // 3: P(Z|do(X)), P(Y|do(Z))
        "nynnnnn",  // 4: P(Z,Y), P(Z|do(X))
        "nynynnn",  // 5: P(X,Z), P(X,Y), P(Z,Y), P(Z|do(X))
        "ynnynyn",  // 6: P(X,Y,Z,W)
        "ynnnnyn",  // 7: P(X,Z,W), P(Y|do(Z),W)
        "yyynnnn",  // 8: P(Z|do(X),W), P(Y|do(Z),W)
        "yyynnyy",  // 9: P(Z|do(X),W), P(Y|do(Z),W), P(W)
    };
    if (row < 1 || row > 9 || variant < 'a' || variant > 'g')
        throw std::invalid_argument("grid cell out of range");
    return grid[row - 1][variant - 'a'] == 'y';
}

// Graph text for a grid cell, with the isolated-W convention applied.
inline std::string grid_graph_text(int row, char variant) {
    std::string text = frontdoor_variant(variant);
    if (grid_row_mentions_w(row) && variant <= 'e') text += "W\n";
    return text;
}

// ---------------------------------------------------------------------------
// Further bundled scenarios
// ---------------------------------------------------------------------------

// Mediation with an observed confounder W and pre-mediator confounders H.
inline const char* two_confounder_graph() {
    return "X -> Z\nZ -> Y\nW -> X\nW -> Z\nW -> Y\nH -> X\nH -> Z\nX <-> Y\nH <-> W\n";
}

// Mediator measured selectively depending on X and Y; X and Y with
// occasional missingness.
inline const char* mnar_mediator_graph() {
    return "X -> Z\nZ -> Y\nZ -> Y\nX <-> Y\nX -> R_Z\nY -> R_Z\nR_X <-> R_Z\nR_X <-> R_Y\nR_Z <-> R_Y\n";
}

// Case-control design: study inclusion driven by the outcome.
inline const char* case_control_graph() {
    return "X -> Z\nZ -> Y\nZ -> Y\nX <-> Y\nY -> R_Y\nR_Y -> R_X\nR_Y -> R_Z\nR_X <-> R_Z\nR_X <-> R_Y\nR_Z <-> R_Y\n";
}

inline const char* missing_map_xyz() { return "R_X : X, R_Y : Y, R_Z : Z"; }

}  // namespace causalid::benchmarks
