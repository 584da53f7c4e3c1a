#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "dflow/errors.hpp"
#include "dflow/scenario.hpp"

namespace {

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm parts{};
    gmtime_r(&now, &parts);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &parts);
    return buf;
}

/// Writes to `path`, or to stdout when the path is empty.
template <class Writer>
void emit(const std::string& path, Writer&& write) {
    if (path.empty()) {
        write(std::cout);
        return;
    }
    std::ofstream file(path);
    if (!file) throw dflow::Error("cannot write " + path);
    write(file);
}

int run_check_command(const std::string& scenario_path, const std::string& out_dir, int parallel,
                      const std::string& grid_override) {
    dflow::ScenarioConfig config = dflow::load_scenario(scenario_path);
    if (!grid_override.empty()) {
        dflow::apply_grid_override(config.grid, grid_override);
        for (dflow::CheckConfig& check : config.checks) {
            if (check.parameters.contains("grid")) continue;
            check.options.resolution = config.grid.resolution();
        }
    }
    if (!out_dir.empty()) config.output.directory = out_dir;
    const std::vector<dflow::CheckReport> reports = dflow::run_checks(config, parallel);
    dflow::write_summary_table(std::cout, reports);
    for (const std::string& path : dflow::write_artifacts(config, reports, utc_timestamp()))
        std::cout << "wrote " << path << "\n";
    return dflow::batch_exit_code(reports);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Inequality checks for time-dependent metric flows"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir;
    int parallel = 1;
    std::string grid_override;
    CLI::App* check = app.add_subcommand("check", "Run the checks of a scenario and write reports");
    check->add_option("scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    check->add_option("--out", out_dir, "Output directory (overrides the scenario output block)");
    check->add_option("--parallel", parallel, "Number of checks run concurrently")->check(CLI::Range(1, 256));
    check->add_option("--grid-override", grid_override, "Grid override, for example Nx=64,dt=0.01,K=32,W=9");

    std::string functional = "F";
    std::string trace_out;
    CLI::App* trace = app.add_subcommand("trace", "Write a functional trace along the conjugate heat flow as CSV");
    trace->add_option("scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    trace->add_option("--functional", functional, "F, W or entropy")
        ->check(CLI::IsMember({"F", "W", "entropy"}));
    trace->add_option("--out", trace_out, "CSV file (stdout when omitted)");

    std::string family = "l0";
    double s = 0.0;
    double t = 0.0;
    std::string table_out;
    CLI::App* costs = app.add_subcommand("cost-table", "Write the cost matrix between grid nodes as CSV");
    costs->add_option("scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    costs->add_option("--family", family, "l0, lminus or lplus")->check(CLI::IsMember({"l0", "lminus", "lplus"}));
    costs->add_option("--s", s, "Start natural time")->required();
    costs->add_option("--t", t, "End natural time")->required();
    costs->add_option("--out", table_out, "CSV file (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*check) return run_check_command(scenario_path, out_dir, parallel, grid_override);
        const dflow::ScenarioConfig config = dflow::load_scenario(scenario_path);
        if (*trace) {
            const auto kind = dflow::functional_kind_from_string(functional);
            const dflow::FunctionalTrace values = dflow::scenario_trace(config, kind);
            emit(trace_out, [&](std::ostream& out) { dflow::write_trace_csv(out, values); });
            return 0;
        }
        const dflow::CostTable table = dflow::scenario_cost_table(config, dflow::cost_kind_from_cli(family), s, t);
        emit(table_out, [&](std::ostream& out) { dflow::write_cost_table_csv(out, table); });
        return 0;
    } catch (const dflow::Error& e) {
        std::cerr << "dflow: " << e.what() << "\n";
        return 3;
    }
}
