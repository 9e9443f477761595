// causalid: decide identifiability of causal queries from declared data
// sources under a causal graph, by rule-based derivation search.

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "causalid/engine.hpp"
#include "causalid/scenario.hpp"
#include "causalid/scm.hpp"

namespace {

constexpr int kExitVerifyFailed = 3;
constexpr int kExitUsage = 64;
constexpr int kExitData = 65;
constexpr int kExitNoInput = 66;

causalid::SearchOptions parse_limits(const std::string& spec) {
    causalid::SearchOptions opts;
    if (spec.empty()) return opts;
    std::istringstream in(spec);
    std::string item;
    while (std::getline(in, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("--limits entries look like terms=N or seconds=S");
        std::string key = item.substr(0, eq);
        std::string val = item.substr(eq + 1);
        if (key == "terms") opts.limits.max_terms = std::stoull(val);
        else if (key == "seconds") opts.limits.max_seconds = std::stod(val);
        else throw CLI::ValidationError("unknown limit '" + key + "'");
    }
    return opts;
}

causalid::FormulaPtr load_formula_file(const std::string& path, const causalid::CausalGraph& g) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open formula file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
    return causalid::parse_formula(text, g);
}

nlohmann::json verify_to_json(const causalid::VerifyReport& rep) {
    return {{"models_checked", rep.models_checked},
            {"max_discrepancy", rep.max_discrepancy},
            {"tolerance", rep.tolerance},
            {"zero_over_zero", rep.zero_over_zero},
            {"passed", rep.passed()}};
}

struct VerifySpec {
    bool requested = false;
    std::string scm_path;
    std::uint64_t seed = 1;
    int count = 1;
    double tolerance = 1e-9;
    std::string inject_path;
};

// Runs verification for an already-identified (or injected) formula.
int do_verify(const causalid::QuerySpec& q, const causalid::FormulaPtr& formula,
              const VerifySpec& vs, bool json, nlohmann::json* json_out) {
    std::optional<causalid::DiscreteScm> model;
    if (!vs.scm_path.empty()) {
        std::ifstream in(vs.scm_path);
        if (!in) throw std::runtime_error("cannot open model file: " + vs.scm_path);
        model = causalid::scm_from_json(nlohmann::json::parse(in));
    }
    auto rep = causalid::verify_formula(q, formula, model, vs.seed, vs.count, vs.tolerance);
    if (json_out) {
        (*json_out)["verify"] = verify_to_json(rep);
    } else if (!json) {
        std::printf("verify: models=%d max_discrepancy=%.3e tolerance=%.1e %s\n",
                    rep.models_checked, rep.max_discrepancy, rep.tolerance,
                    rep.passed() ? "PASS" : "FAIL");
        if (rep.zero_over_zero > 0)
            std::printf("verify: %ld zero-over-zero cells treated as 0 (positivity gaps)\n",
                        rep.zero_over_zero);
    }
    return rep.passed() ? 0 : kExitVerifyFailed;
}

int cmd_run(const std::string& path, const std::string& limits, bool json, bool trace,
            const VerifySpec& vs) {
    auto sc = causalid::load_scenario(path);
    auto opts = parse_limits(limits);
    auto rep = causalid::run_scenario(sc, opts);

    nlohmann::json j;
    if (json) j = causalid::report_to_json(rep, true);
    else std::cout << causalid::report_to_text(rep, trace);

    int code = rep.exit_code();
    if (vs.requested) {
        causalid::FormulaPtr formula = rep.result.formula;
        if (!vs.inject_path.empty()) formula = load_formula_file(vs.inject_path, rep.query.graph);
        if (!formula) {
            if (!json) std::cout << "verify: skipped (no identifying formula)\n";
        } else {
            int vcode = do_verify(rep.query, formula, vs, json, json ? &j : nullptr);
            if (code == 0 && vcode != 0) code = vcode;
        }
    }
    if (json) std::cout << j.dump(2) << "\n";
    return code;
}

int cmd_batch(const std::string& manifest_path, const std::string& limits, int jobs, bool json) {
    auto entries = causalid::load_manifest(manifest_path);
    auto opts = parse_limits(limits);

    struct Outcome {
        causalid::SearchStatus status = causalid::SearchStatus::Inconclusive;
        std::string formula;
        std::string error;
    };
    std::vector<Outcome> outcomes(entries.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= entries.size()) return;
            try {
                auto rep = causalid::run_scenario(causalid::load_scenario(entries[i].path), opts);
                outcomes[i].status = rep.result.status;
                outcomes[i].formula = rep.formula_string;
            } catch (const std::exception& ex) {
                outcomes[i].error = ex.what();
            }
        }
    };
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs && static_cast<std::size_t>(t) < entries.size(); ++t)
        pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    // assemble the grid: rows and columns in first-appearance order
    std::vector<std::string> rows, cols;
    for (const auto& e : entries) {
        if (std::find(rows.begin(), rows.end(), e.row) == rows.end()) rows.push_back(e.row);
        if (std::find(cols.begin(), cols.end(), e.col) == cols.end()) cols.push_back(e.col);
    }
    auto cell = [&](const std::string& r, const std::string& c) -> const Outcome* {
        for (std::size_t i = 0; i < entries.size(); ++i)
            if (entries[i].row == r && entries[i].col == c) return &outcomes[i];
        return nullptr;
    };

    int mismatches = 0, errors = 0;
    nlohmann::json jout;
    jout["cells"] = nlohmann::json::array();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        const auto& o = outcomes[i];
        bool ok = o.error.empty() && (o.status != causalid::SearchStatus::Inconclusive) &&
                  ((o.status == causalid::SearchStatus::Identifiable) == e.expect_identifiable);
        if (!o.error.empty()) ++errors;
        else if (!ok) ++mismatches;
        jout["cells"].push_back(
            {{"row", e.row},
             {"col", e.col},
             {"expected", e.expect_identifiable},
             {"status", o.error.empty() ? causalid::status_text(o.status) : "error"},
             {"match", ok}});
    }

    if (json) {
        jout["rows"] = rows;
        jout["cols"] = cols;
        jout["mismatches"] = mismatches;
        jout["errors"] = errors;
        std::cout << jout.dump(2) << "\n";
    } else {
        std::printf("%-10s", "");
        for (const auto& c : cols) std::printf(" %-4s", c.c_str());
        std::printf("\n");
        for (const auto& r : rows) {
            std::printf("%-10s", r.c_str());
            for (const auto& c : cols) {
                const Outcome* o = cell(r, c);
                const char* mark = "  . ";
                if (o) {
                    if (!o->error.empty()) mark = "  ! ";
                    else if (o->status == causalid::SearchStatus::Identifiable) mark = "  Y ";
                    else if (o->status == causalid::SearchStatus::NotIdentifiable) mark = "  N ";
                    else mark = "  ? ";
                }
                std::printf("%-5s", mark);
            }
            std::printf("\n");
        }
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const auto& e = entries[i];
            const auto& o = outcomes[i];
            if (!o.error.empty()) {
                std::printf("ERROR %s/%s: %s\n", e.row.c_str(), e.col.c_str(), o.error.c_str());
            } else if ((o.status == causalid::SearchStatus::Identifiable) !=
                           e.expect_identifiable ||
                       o.status == causalid::SearchStatus::Inconclusive) {
                std::printf("MISMATCH %s/%s: expected %s, got %s\n", e.row.c_str(), e.col.c_str(),
                            e.expect_identifiable ? "Y" : "N", causalid::status_text(o.status));
            }
        }
        std::printf("%zu cells, %d mismatches, %d errors\n", entries.size(), mismatches, errors);
    }
    return mismatches == 0 && errors == 0 ? 0 : 1;
}

int cmd_verify(const std::string& path, const std::string& limits, bool json, VerifySpec vs) {
    auto sc = causalid::load_scenario(path);
    auto q = sc.to_query();
    causalid::FormulaPtr formula;
    nlohmann::json j;
    if (!vs.inject_path.empty()) {
        formula = load_formula_file(vs.inject_path, q.graph);
        j["status"] = "injected-formula";
        j["formula"] = causalid::render(formula, q.graph);
        if (!json) std::printf("formula (injected): %s\n", j["formula"].get<std::string>().c_str());
    } else {
        auto rep = causalid::run_scenario(sc, parse_limits(limits));
        if (!rep.result.identifiable()) {
            if (json) std::cout << causalid::report_to_json(rep, false).dump(2) << "\n";
            else std::cout << causalid::report_to_text(rep, false);
            return rep.exit_code();
        }
        formula = rep.result.formula;
        j = causalid::report_to_json(rep, false);
        if (!json) std::printf("formula: %s\n", rep.formula_string.c_str());
    }
    int code = do_verify(q, formula, vs, json, json ? &j : nullptr);
    if (json) std::cout << j.dump(2) << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"causal-effect identifiability by derivation search"};
    app.require_subcommand(1);

    std::string scenario_path, manifest_path, limits;
    bool json = false, trace = false;
    int jobs = 0;
    VerifySpec vs;

    auto* run = app.add_subcommand("run", "decide one scenario file");
    run->add_option("scenario", scenario_path, "scenario file")->required();
    run->add_flag("--json", json, "machine-readable report");
    run->add_flag("--trace", trace, "print the derivation trace");
    run->add_option("--limits", limits, "terms=N,seconds=S");
    bool run_verify = false;
    run->add_flag("--verify", run_verify, "verify the formula on random models");
    run->add_option("--seed", vs.seed, "base seed for --verify models");
    run->add_option("--count", vs.count, "number of --verify models");
    run->add_option("--tolerance", vs.tolerance, "verification tolerance");
    run->add_option("--scm", vs.scm_path, "verify against this model file instead");
    run->add_option("--inject-formula", vs.inject_path,
                    "verify this formula file instead of the derived one (testing)");

    auto* batch = app.add_subcommand("batch", "run a manifest of scenarios against expectations");
    batch->add_option("manifest", manifest_path, "manifest file")->required();
    batch->add_flag("--json", json, "machine-readable report");
    batch->add_option("--limits", limits, "terms=N,seconds=S");
    batch->add_option("--jobs", jobs, "worker threads (default: hardware)");

    auto* verify = app.add_subcommand("verify", "numerically verify an identifying formula");
    verify->add_option("scenario", scenario_path, "scenario file")->required();
    verify->add_option("--limits", limits, "terms=N,seconds=S");
    verify->add_flag("--json", json, "machine-readable report");
    verify->add_option("--scm", vs.scm_path, "model file (JSON)");
    verify->add_option("--seed", vs.seed, "base seed for random models");
    verify->add_option("--count", vs.count, "number of random models");
    verify->add_option("--tolerance", vs.tolerance, "acceptance tolerance");
    verify->add_option("--inject-formula", vs.inject_path, "formula file to verify (testing)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (run->parsed()) {
            vs.requested = run_verify || !vs.scm_path.empty() || !vs.inject_path.empty();
            return cmd_run(scenario_path, limits, json, trace, vs);
        }
        if (batch->parsed()) return cmd_batch(manifest_path, limits, jobs, json);
        if (verify->parsed()) return cmd_verify(scenario_path, limits, json, vs);
    } catch (const std::invalid_argument& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitData;
    } catch (const std::runtime_error& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        std::string msg = ex.what();
        return msg.find("cannot open") != std::string::npos ? kExitNoInput : kExitData;
    }
    return kExitUsage;
}
