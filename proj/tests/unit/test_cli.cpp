#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dflow/errors.hpp"
#include "dflow/scenario.hpp"
#include "test_util.hpp"

using namespace dflow;
using namespace dflow::test;
using nlohmann::json;

namespace {

json minimal_sphere() {
    return json::parse(R"json({
        "flow": {"family": "round_sphere", "radius_sq": "1 - 2*t", "t_max": 0.4},
        "checks": [{"id": "d_condition"}]
    })json");
}

std::string schema_path(const json& doc) {
    try {
        parse_scenario(doc);
    } catch (const SchemaError& e) {
        return e.path();
    }
    return "";
}

}  // namespace

TEST_CASE("minimal scenario fills the documented defaults") {
    const ScenarioConfig config = parse_scenario(minimal_sphere());
    CHECK(config.name == "scenario");
    CHECK(config.flow.family == FlowFamily::round_sphere);
    CHECK(config.flow.dimension == 2);
    CHECK(config.flow.t_min == 0.0);
    CHECK(config.flow.orientation == TimeOrientation::forward);
    CHECK(config.grid.nodes == 32);
    CHECK(config.grid.dt == 0.0);
    CHECK(config.grid.layers == 0);
    CHECK(config.grid.window == 0);
    CHECK(config.output.directory == "dflow_out");
    CHECK(config.output.formats == std::vector<std::string>{"json", "csv", "table"});
    CHECK_FALSE(config.trace.present);
    REQUIRE(config.checks.size() == 1);
    CHECK(config.checks.front().label == "d_condition");
    CHECK(config.checks.front().options.calibrate);
}

TEST_CASE("radius expression 1-2*t parses to the Ricci flow sphere") {
    const ScenarioConfig config = parse_scenario(minimal_sphere());
    const FlowSpec reference = ricci_sphere(2, 0.0, 0.4);
    for (double t : {0.0, 0.1, 0.35}) {
        CHECK(config.flow.radius_sq.value(t) == doctest::Approx(reference.radius_sq.value(t)).epsilon(1e-15));
        CHECK(config.flow.radius_sq(t).t == -2.0);
    }
    CHECK(run_checks(config).front().verdict == Verdict::pass);
}

TEST_CASE("schema violations name the path and the constraint") {
    json doc = minimal_sphere();
    doc["flow"]["family"] = "torus_of_doom";
    try {
        parse_scenario(doc);
        FAIL("expected a schema error");
    } catch (const SchemaError& e) {
        CHECK(e.path() == "flow.family");
        CHECK(std::string(e.what()).find("unknown family") != std::string::npos);
    }

    doc = minimal_sphere();
    doc["checks"][0]["id"] = "nonsense";
    CHECK(schema_path(doc) == "checks[0].id");

    doc = minimal_sphere();
    doc["checks"][0]["bogus"] = 1;
    CHECK(schema_path(doc) == "checks[0].bogus");

    doc = minimal_sphere();
    doc["grid"] = {{"Nx", 100000}};
    CHECK(schema_path(doc) == "grid.Nx");

    doc = minimal_sphere();
    doc["grid"] = {{"W", 4}};
    CHECK(schema_path(doc) == "grid.W");

    doc = minimal_sphere();
    doc["checks"] = json::array({{{"id", "gradient_estimate"}, {"s", 0.3}, {"t", 0.1}}});
    CHECK(schema_path(doc) == "checks[0].t");

    doc = minimal_sphere();
    doc["checks"] = json::array({{{"id", "gradient_estimate"}, {"s", 0.1}}});
    CHECK(schema_path(doc) == "checks[0].t");

    doc = minimal_sphere();
    doc["flow"]["orientation"] = "backward";
    CHECK(schema_path(doc) == "flow.reference_time");

    doc = minimal_sphere();
    doc.erase("checks");
    CHECK(schema_path(doc) == "checks");

    doc = minimal_sphere();
    doc["output"] = {{"formats", {"xml"}}};
    CHECK(schema_path(doc) == "output.formats");
}

TEST_CASE("malformed expressions report the offending position") {
    json doc = minimal_sphere();
    doc["flow"]["radius_sq"] = "1 - 2*t $ 3";
    try {
        parse_scenario(doc);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.position() == 8);
        CHECK(std::string(e.what()).find("flow.radius_sq") != std::string::npos);
    }
    doc["flow"]["radius_sq"] = "1 - 2*tt";
    CHECK_THROWS_AS(parse_scenario(doc), ParseError);
}

TEST_CASE("grid override") {
    GridConfig grid;
    apply_grid_override(grid, "Nx=64,dt=0.01,K=16,W=7");
    CHECK(grid.nodes == 64);
    CHECK(grid.dt == 0.01);
    CHECK(grid.layers == 16);
    CHECK(grid.window == 7);
    CHECK_THROWS_AS(apply_grid_override(grid, "Nx=abc"), SchemaError);
    CHECK_THROWS_AS(apply_grid_override(grid, "Q=3"), SchemaError);
    CHECK_THROWS_AS(apply_grid_override(grid, "Nx=2"), SchemaError);
}

TEST_CASE("cost family names") {
    CHECK(cost_kind_from_cli("l0") == CostKind::L0);
    CHECK(cost_kind_from_cli("lminus") == CostKind::Lminus);
    CHECK(cost_kind_from_cli("lplus") == CostKind::Lplus);
    CHECK_THROWS_AS(cost_kind_from_cli("L7"), ParameterError);
}

TEST_CASE("batch exit codes") {
    auto with = [](std::initializer_list<Verdict> verdicts) {
        std::vector<CheckReport> reports;
        for (Verdict v : verdicts) {
            CheckReport r;
            r.verdict = v;
            reports.push_back(r);
        }
        return batch_exit_code(reports);
    };
    CHECK(with({Verdict::pass, Verdict::not_applicable}) == 0);
    CHECK(with({Verdict::pass, Verdict::indeterminate}) == 2);
    CHECK(with({Verdict::indeterminate, Verdict::fail}) == 1);
    CHECK(with({Verdict::error}) == 1);
    CHECK(with({}) == 0);
}

TEST_CASE("runtime errors are recorded per check without aborting the batch") {
    json doc = minimal_sphere();
    doc["checks"] = json::array({
        {{"id", "blowup_bound"}, {"tau", 0.3}, {"sigmas", {0.1}}},
        {{"id", "d_condition"}},
    });
    const ScenarioConfig config = parse_scenario(doc);
    const std::vector<CheckReport> reports = run_checks(config);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].verdict == Verdict::error);
    CHECK_FALSE(reports[0].notes.empty());
    CHECK(reports[1].verdict == Verdict::pass);
    CHECK(batch_exit_code(reports) == 1);
}

TEST_CASE("reports are deterministic and independent of the thread count") {
    const json doc = json::parse(R"json({
        "name": "determinism",
        "flow": {"family": "circle_conformal", "conformal": "0.5*log(1 + t)"},
        "grid": {"Nx": 16},
        "checks": [
            {"id": "gradient_estimate", "s": 0.1, "t": 0.4, "v": "cos(theta)", "lambdas": [0.5, 2]},
            {"id": "wasserstein_contraction", "s": 0.1, "t": 0.3, "h": 0.1,
             "mu": {"kind": "density", "density": "1 + 0.5*cos(theta)"}, "nu": {"kind": "dirac", "location": 2.0}},
            {"id": "monotonicity", "reference_time": 1.0, "tau_start": 0.2, "tau_end": 0.6},
            {"id": "d_condition"}
        ]
    })json");
    const ScenarioConfig config = parse_scenario(doc);
    const std::string serial = report_array(config, run_checks(config, 1), "T").dump();
    const std::string threaded = report_array(config, run_checks(config, 3), "T").dump();
    const std::string again = report_array(parse_scenario(doc), run_checks(parse_scenario(doc), 2), "T").dump();
    CHECK(serial == threaded);
    CHECK(serial == again);
    const json rows = json::parse(serial);
    for (const json& row : rows) {
        CHECK(row.contains("tolerance"));
        CHECK(row["provenance"]["input_hash"] == config.input_hash());
        CHECK(row["timestamp"] == "T");
    }
}

TEST_CASE("artifacts are written in the requested formats") {
    const std::filesystem::path dir = std::filesystem::temp_directory_path() / "dflow_cli_test";
    std::filesystem::remove_all(dir);
    json doc = minimal_sphere();
    doc["output"] = {{"directory", dir.string()}};
    doc["trace"] = {{"functional", "F"}, {"reference_time", 0.5}, {"tau_start", 0.1}, {"tau_end", 0.5}, {"steps", 8}};
    const ScenarioConfig config = parse_scenario(doc);
    const auto reports = run_checks(config);
    const auto written = write_artifacts(config, reports, "T");
    CHECK(written.size() == 4);
    std::ifstream trace(dir / "trace_F.csv");
    std::string header;
    std::getline(trace, header);
    CHECK(header == "tau,value,derivative");
    std::ifstream report(dir / "report.json");
    CHECK(json::parse(report).size() == 1);
    std::ostringstream table;
    write_summary_table(table, reports);
    CHECK(table.str().find("d_condition") != std::string::npos);
    std::filesystem::remove_all(dir);

    doc["trace"]["tau_end"] = 0.9;
    CHECK(schema_path(doc) == "trace");
}

TEST_CASE("scenario trace matches the ricci sphere soliton W value") {
    json doc = minimal_sphere();
    doc["trace"] = {{"functional", "W"}, {"reference_time", 0.5}, {"tau_start", 0.1}, {"tau_end", 0.5}, {"steps", 8}};
    const FunctionalTrace trace = scenario_trace(parse_scenario(doc), FunctionalKind::W);
    REQUIRE(trace.values.size() == 9);
    for (double v : trace.values) CHECK(v == doctest::Approx(trace.values.front()).epsilon(1e-12));
}
