#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "dflow/flow.hpp"
#include "dflow/functionals.hpp"
#include "dflow/harness.hpp"
#include "dflow/lagrangian.hpp"

namespace dflow {

/// Discretisation block of a scenario: N_x, dt, K (cost-table layers) and W (window).
struct GridConfig {
    int nodes = 32;
    double dt = 0.0;
    int layers = 0;
    int window = 0;

    Resolution resolution() const;
    nlohmann::json to_json() const;
};

inline constexpr int kMaxNodes = 2048;
inline constexpr double kMaxStep = 1.0;
inline constexpr int kMaxLayers = 4096;
inline constexpr int kMaxWindow = 255;

/// Validates the caps of a grid block; `path` names the block in error messages.
void validate_grid(const GridConfig& grid, const std::string& path);

/// Applies "Nx=..,dt=..,K=..,W=.." on top of a grid block.
void apply_grid_override(GridConfig& grid, const std::string& spec);

/// One validated check of a scenario.
struct CheckConfig {
    std::string id;
    std::string label;
    nlohmann::json parameters;
    /// Runs the check on the scenario flow with the given options.
    std::function<CheckReport(const FlowSpec& flow, const CheckOptions& options)> run;
    CheckOptions options;
};

struct OutputConfig {
    std::string directory = "dflow_out";
    std::vector<std::string> formats{"json", "csv", "table"};
};

/// Optional functional trace of a scenario.
struct TraceConfig {
    FunctionalKind functional = FunctionalKind::F;
    MeasureSpec measure;
    double reference_time = 0.0;  ///< backward reference for a forward flow
    double tau_start = 0.0;
    double tau_end = 0.0;
    int steps = 32;
    bool present = false;
};

struct ScenarioConfig {
    std::string name;
    FlowSpec flow;
    nlohmann::json flow_document;
    GridConfig grid;
    std::vector<CheckConfig> checks;
    OutputConfig output;
    TraceConfig trace;

    /// Fingerprint of the flow and grid blocks.
    std::string input_hash() const;
};

/// Check ids accepted in the checks block.
const std::vector<std::string>& known_check_ids();

/// Validates a scenario document and fills defaults. Throws SchemaError naming the
/// JSON path and constraint, or ParseError for a malformed expression.
ScenarioConfig parse_scenario(const nlohmann::json& document);
ScenarioConfig load_scenario(const std::string& path);

/// Runs one check, converting exceptions into not_applicable or error reports.
CheckReport run_check(const ScenarioConfig& config, const CheckConfig& check);

/// Runs every check of the scenario on up to `parallel` threads; reports keep the
/// order of the checks block.
std::vector<CheckReport> run_checks(const ScenarioConfig& config, int parallel = 1);

/// 1 if any check failed or errored, otherwise 2 if any is indeterminate, otherwise 0.
int batch_exit_code(const std::vector<CheckReport>& reports);

/// JSON array of reports, each stamped with the input hash and `timestamp`.
nlohmann::json report_array(const ScenarioConfig& config, const std::vector<CheckReport>& reports,
                            const std::string& timestamp);

void write_summary_table(std::ostream& out, const std::vector<CheckReport>& reports);
/// CSV with one row per check.
void write_report_csv(std::ostream& out, const std::vector<CheckReport>& reports);

/// Writes the report artifacts named by the output block into its directory and
/// returns the paths written.
std::vector<std::string> write_artifacts(const ScenarioConfig& config, const std::vector<CheckReport>& reports,
                                         const std::string& timestamp);

/// Functional trace of the scenario's trace block (or the defaults) for `functional`.
FunctionalTrace scenario_trace(const ScenarioConfig& config, FunctionalKind functional);

/// Cost table of the scenario flow between natural times s and t.
CostTable scenario_cost_table(const ScenarioConfig& config, CostKind kind, double s, double t);

/// Parses "l0", "lminus" or "lplus".
CostKind cost_kind_from_cli(const std::string& name);

}  // namespace dflow
