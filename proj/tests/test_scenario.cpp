#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "causalid/scenario.hpp"
#include "causalid/witnesses.hpp"
#include "support/json_schema.hpp"

using namespace causalid;

namespace {

const std::string kFixtures = CAUSALID_FIXTURE_DIR;
const std::string kCli = CAUSALID_CLI_PATH;

int run_cli(const std::string& args, std::string* out = nullptr) {
    std::string cmd = kCli + " " + args;
    if (!out) cmd += " > /dev/null 2>&1";
    else cmd += " 2>/dev/null";
    if (!out) {
        int rc = std::system(cmd.c_str());
        return WEXITSTATUS(rc);
    }
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    out->clear();
    while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out->append(buf, n);
    return WEXITSTATUS(pclose(pipe));
}

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("scenario text parsing") {
    SECTION("sections, comments and blank lines") {
        auto sc = parse_scenario_text(R"(
# front door, survey plus experiment
[label]
demo

[graph]
X -> Z
Z -> Y   # mediator chain
X <-> Y

[data]
P(X,Z)
P(Y|do(Z))

[query]
P(Y|do(X))
)");
        REQUIRE(sc.label == "demo");
        REQUIRE(sc.data.size() == 2);
        auto q = sc.to_query();
        REQUIRE(q.graph.size() == 3);
        REQUIRE(q.inputs.size() == 2);
    }
    SECTION("missing-data section feeds augmentation") {
        auto sc = load_scenario(kFixtures + "/scenarios/mnar_mediator.scn");
        REQUIRE(sc.missing == "R_X : X, R_Y : Y, R_Z : Z");
        auto q = sc.to_query();
        REQUIRE(q.graph.size() == 9);
    }
    SECTION("errors") {
        REQUIRE_THROWS_AS(parse_scenario_text("[graph]\nX -> Y\n[query]\nP(Y)\n"),
                          std::invalid_argument);  // no data
        REQUIRE_THROWS_AS(parse_scenario_text("[bogus]\nX\n"), std::invalid_argument);
        REQUIRE_THROWS_AS(parse_scenario_text("X -> Y\n"), std::invalid_argument);
        REQUIRE_THROWS_AS(load_scenario(kFixtures + "/no_such_file.scn"), std::runtime_error);
    }
}

TEST_CASE("manifest loading") {
    auto entries = load_manifest(kFixtures + "/manifests/grid.manifest");
    REQUIRE(entries.size() == 63);
    REQUIRE(entries[0].row == "r1");
    REQUIRE(entries[0].col == "a");
    REQUIRE(entries[0].expect_identifiable);
    int yes = 0;
    for (const auto& e : entries) yes += e.expect_identifiable ? 1 : 0;
    REQUIRE(yes == 22);
}

TEST_CASE("run reports") {
    auto rep = run_scenario(load_scenario(kFixtures + "/scenarios/grid/r2_a.scn"));
    REQUIRE(rep.exit_code() == 0);
    REQUIRE(rep.formula_string == "[sum_{Z} [p(Z|X)*p(Y|do(Z))]]");
    auto text = report_to_text(rep, true);
    REQUIRE(text.find("identifiable: TRUE") != std::string::npos);
    REQUIRE(text.find("derivation:") != std::string::npos);

    auto schema = load_json(kFixtures + "/schema/report.schema.json");
    std::string why;
    auto j = report_to_json(rep, true);
    INFO(why);
    REQUIRE(causalid::testing::validate_schema(j, schema, &why));
}

TEST_CASE("json reports validate against the shipped schema for every bundled scenario") {
    auto schema = load_json(kFixtures + "/schema/report.schema.json");
    std::vector<std::string> paths;
    for (const auto& e : load_manifest(kFixtures + "/manifests/grid.manifest"))
        paths.push_back(e.path);
    for (const auto& e : load_manifest(kFixtures + "/manifests/missing_data.manifest"))
        paths.push_back(e.path);
    for (const auto& p : paths) {
        auto rep = run_scenario(load_scenario(p));
        auto j = report_to_json(rep, true);
        std::string why;
        INFO(p << ": " << why);
        REQUIRE(causalid::testing::validate_schema(j, schema, &why));
    }
}

TEST_CASE("emitted formulas render-parse-render to a fixed point") {
    std::vector<std::string> paths = {
        kFixtures + "/scenarios/grid/r1_a.scn",  kFixtures + "/scenarios/grid/r2_a.scn",
        kFixtures + "/scenarios/grid/r4_b.scn",  kFixtures + "/scenarios/grid/r6_f.scn",
        kFixtures + "/scenarios/grid/r9_g.scn",  kFixtures + "/scenarios/two_confounders.scn",
        kFixtures + "/scenarios/mnar_mediator.scn",
        kFixtures + "/scenarios/case_control_with_marginal.scn",
        kFixtures + "/scenarios/case_control_with_mechanism.scn",
    };
    for (const auto& p : paths) {
        auto rep = run_scenario(load_scenario(p));
        REQUIRE(rep.result.identifiable());
        auto reparsed = parse_formula(rep.formula_string, rep.query.graph);
        INFO(p);
        REQUIRE(render(reparsed, rep.query.graph) == rep.formula_string);
    }
}

TEST_CASE("formula verification helpers") {
    auto sc = load_scenario(kFixtures + "/scenarios/grid/r2_a.scn");
    auto q = sc.to_query();
    auto res = identify(q);
    REQUIRE(res.identifiable());
    auto rep = verify_formula(q, res.formula, std::nullopt, 12345, 5, 1e-9);
    REQUIRE(rep.models_checked == 5);
    REQUIRE(rep.passed());

    // the invalid chain formula on the xor model misses by exactly 0.5
    std::ifstream in(kFixtures + "/scms/xor_chain.json");
    auto m = scm_from_json(nlohmann::json::parse(in));
    auto sc_d = load_scenario(kFixtures + "/scenarios/grid/r3_d.scn");
    auto qd = sc_d.to_query();
    auto bad = parse_formula("[sum_{Z} [p(Z|do(X))*p(Y|do(Z))]]", qd.graph);
    auto repd = verify_formula(qd, bad, m, 0, 1, 1e-9);
    REQUIRE_FALSE(repd.passed());
    REQUIRE(repd.max_discrepancy == 0.5);
}

TEST_CASE("cli exit codes and output") {
    std::string out;
    SECTION("identifiable scenario prints the verdict and formula") {
        int rc = run_cli("run " + kFixtures + "/scenarios/grid/r2_a.scn", &out);
        REQUIRE(rc == 0);
        REQUIRE(out.find("identifiable: TRUE") != std::string::npos);
        REQUIRE(out.find("[sum_{Z} [p(Z|X)*p(Y|do(Z))]]") != std::string::npos);
    }
    SECTION("closed search exits 1") {
        REQUIRE(run_cli("run " + kFixtures + "/scenarios/grid/r5_a.scn") == 1);
    }
    SECTION("hitting limits exits 2") {
        REQUIRE(run_cli("run " + kFixtures + "/scenarios/grid/r5_a.scn --limits terms=2") == 2);
    }
    SECTION("verification failure exits 3") {
        REQUIRE(run_cli("verify " + kFixtures + "/scenarios/grid/r3_d.scn --scm " + kFixtures +
                        "/scms/xor_chain.json --inject-formula " + kFixtures +
                        "/formulas/experiment_chain.txt") == 3);
    }
    SECTION("usage errors exit 64") {
        REQUIRE(run_cli("frobnicate") == 64);
        REQUIRE(run_cli("run") == 64);
    }
    SECTION("unreadable input exits 66") {
        REQUIRE(run_cli("run " + kFixtures + "/scenarios/absent.scn") == 66);
    }
    SECTION("malformed scenario exits 65") {
        std::string tmp = "/tmp/causalid_bad_scenario.scn";
        std::ofstream(tmp) << "[graph]\nA -> A\n[data]\nP(A)\n[query]\nP(A)\n";
        REQUIRE(run_cli("run " + tmp) == 65);
    }
    SECTION("batch agrees with expectations and exits 0") {
        int rc = run_cli("batch " + kFixtures + "/manifests/grid.manifest", &out);
        REQUIRE(rc == 0);
        REQUIRE(out.find("0 mismatches") != std::string::npos);
    }
    SECTION("json report validates against the shipped schema, verify included") {
        int rc = run_cli("run " + kFixtures + "/scenarios/grid/r2_a.scn --json --verify --count 2",
                         &out);
        REQUIRE(rc == 0);
        auto schema = load_json(kFixtures + "/schema/report.schema.json");
        std::string why;
        auto j = nlohmann::json::parse(out);
        INFO(why);
        REQUIRE(causalid::testing::validate_schema(j, schema, &why));
        REQUIRE(j["verify"]["passed"] == true);
    }
}
