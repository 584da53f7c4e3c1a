#include "dflow/scenario.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "dflow/errors.hpp"
#include "dflow/hash.hpp"
#include "dflow/spacetime.hpp"

namespace dflow {

namespace {

using nlohmann::json;

/// Typed reads from one JSON object with path-qualified errors and unknown-key detection.
class Block {
public:
    Block(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
        if (!doc_.is_object()) throw SchemaError(path_, "expected an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return doc_.contains(key); }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return doc_.at(key);
    }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        return required_number(key);
    }

    double required_number(const std::string& key) {
        if (!has(key)) throw SchemaError(at(key), "required number is missing");
        const json& v = raw(key);
        if (!v.is_number()) throw SchemaError(at(key), "expected a number");
        return v.get<double>();
    }

    int integer(const std::string& key, int fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_number_integer()) throw SchemaError(at(key), "expected an integer");
        return v.get<int>();
    }

    bool flag(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_boolean()) throw SchemaError(at(key), "expected a boolean");
        return v.get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        return required_text(key);
    }

    std::string required_text(const std::string& key) {
        if (!has(key)) throw SchemaError(at(key), "required string is missing");
        const json& v = raw(key);
        if (!v.is_string()) throw SchemaError(at(key), "expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_array() || v.empty()) throw SchemaError(at(key), "expected a non-empty array of numbers");
        std::vector<double> out;
        for (const json& x : v) {
            if (!x.is_number()) throw SchemaError(at(key), "expected a non-empty array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    SmoothFn expression(const std::string& key, const std::string& fallback);

    /// Throws on keys that were never read.
    void finish() const {
        for (const auto& item : doc_.items())
            if (!seen_.count(item.key())) throw SchemaError(at(item.key()), "unknown key");
    }

private:
    const json& doc_;
    std::string path_;
    std::set<std::string> seen_;
};

SmoothFn parse_expression(const std::string& source, const std::string& path) {
    try {
        return SmoothFn::from_string(source);
    } catch (const ParseError& e) {
        std::string message = e.what();
        const auto cut = message.rfind(" at offset ");
        if (cut != std::string::npos) message.resize(cut);
        throw ParseError(path + ": " + message + " in '" + source + "'", e.position());
    }
}

SmoothFn Block::expression(const std::string& key, const std::string& fallback) {
    return parse_expression(text(key, fallback), at(key));
}

void require(bool ok, const std::string& path, const std::string& constraint) {
    if (!ok) throw SchemaError(path, constraint);
}

template <class F>
auto named(const std::string& path, F&& parse) {
    try {
        return parse();
    } catch (const ParameterError& e) {
        throw SchemaError(path, e.what());
    }
}

MeasureSpec parse_measure(const json& doc, const std::string& path) {
    if (doc.is_string()) {
        require(doc.get<std::string>() == "uniform", path, "measure shorthand must be \"uniform\"");
        return MeasureSpec::uniform();
    }
    Block block(doc, path);
    const std::string kind = block.text("kind", "uniform");
    MeasureSpec spec;
    if (kind == "uniform") {
        spec = MeasureSpec::uniform();
    } else if (kind == "density") {
        spec = MeasureSpec::from_density(block.expression("density", "1"));
    } else if (kind == "dirac") {
        spec = MeasureSpec::dirac(block.number("location", 0.0));
    } else {
        throw SchemaError(block.at("kind"), "unknown measure kind '" + kind + "'");
    }
    block.finish();
    return spec;
}

MeasureSpec measure_or_uniform(Block& block, const std::string& key) {
    if (!block.has(key)) return MeasureSpec::uniform();
    return parse_measure(block.raw(key), block.at(key));
}

FlowSpec parse_flow(const json& doc) {
    Block block(doc, "flow");
    const std::string family_name = block.required_text("family");
    const FlowFamily family = named("flow.family", [&] { return flow_family_from_string(family_name); });
    const double t_min = block.number("t_min", 0.0);
    const double t_max = block.number("t_max", 1.0);
    require(t_min < t_max, "flow.t_max", "must exceed t_min");

    FlowSpec flow;
    switch (family) {
        case FlowFamily::round_sphere: {
            const int n = block.integer("dimension", 2);
            require(n >= 2 && n <= 16, "flow.dimension", "must lie in [2, 16]");
            flow = FlowSpec::round_sphere(n, block.expression("radius_sq", "1"), t_min, t_max);
            break;
        }
        case FlowFamily::flat_torus: {
            std::vector<SmoothFn> factors;
            if (!block.has("scale_sq")) throw SchemaError("flow.scale_sq", "required array of expressions is missing");
            const json& list = block.raw("scale_sq");
            require(list.is_array() && !list.empty(), "flow.scale_sq", "expected a non-empty array of expressions");
            for (std::size_t i = 0; i < list.size(); ++i) {
                const std::string path = "flow.scale_sq[" + std::to_string(i) + "]";
                require(list[i].is_string(), path, "expected a string");
                factors.push_back(parse_expression(list[i].get<std::string>(), path));
            }
            flow = FlowSpec::flat_torus(std::move(factors), t_min, t_max);
            break;
        }
        case FlowFamily::circle_conformal:
            flow = FlowSpec::circle_conformal(block.expression("conformal", "0"), t_min, t_max);
            break;
        case FlowFamily::weighted_circle:
            flow = FlowSpec::weighted_circle(block.expression("conformal", "0"), block.expression("weight", "0"), t_min,
                                             t_max);
            break;
        case FlowFamily::static_manifold: {
            const int n = block.integer("dimension", 2);
            require(n >= 1 && n <= 16, "flow.dimension", "must lie in [1, 16]");
            flow = FlowSpec::static_manifold(n, block.number("curvature", 0.0), t_min, t_max);
            break;
        }
    }
    if (family != FlowFamily::round_sphere && family != FlowFamily::static_manifold && block.has("dimension")) {
        const int n = block.integer("dimension", flow.dimension);
        require(n == flow.dimension, "flow.dimension", "is fixed by the family to " + std::to_string(flow.dimension));
    }

    const std::string orientation = block.text("orientation", "forward");
    if (orientation == "backward") {
        if (!block.has("reference_time"))
            throw SchemaError("flow.reference_time", "required for a backward oriented flow");
        flow = flow.with_orientation(TimeOrientation::backward, block.required_number("reference_time"));
    } else {
        require(orientation == "forward", "flow.orientation", "must be \"forward\" or \"backward\"");
        require(!block.has("reference_time"), "flow.reference_time", "only allowed for a backward oriented flow");
    }
    block.finish();
    try {
        validate_flow(flow);
    } catch (const InvalidFlowError& e) {
        throw SchemaError("flow", e.what());
    }
    return flow;
}

GridConfig parse_grid(const json& doc) {
    Block block(doc, "grid");
    GridConfig grid;
    grid.nodes = block.integer("Nx", grid.nodes);
    grid.dt = block.number("dt", grid.dt);
    grid.layers = block.integer("K", grid.layers);
    grid.window = block.integer("W", grid.window);
    block.finish();
    validate_grid(grid, "grid");
    return grid;
}

OutputConfig parse_output(const json& doc) {
    Block block(doc, "output");
    OutputConfig output;
    output.directory = block.text("directory", output.directory);
    require(!output.directory.empty(), "output.directory", "must not be empty");
    if (block.has("formats")) {
        const json& list = block.raw("formats");
        require(list.is_array(), "output.formats", "expected an array of strings");
        output.formats.clear();
        for (const json& f : list) {
            require(f.is_string(), "output.formats", "expected an array of strings");
            const std::string name = f.get<std::string>();
            require(name == "json" || name == "csv" || name == "table", "output.formats",
                    "unknown format '" + name + "' (json, csv, table)");
            output.formats.push_back(name);
        }
    }
    block.finish();
    return output;
}

FunctionalKind parse_functional(const std::string& name, const std::string& path) {
    require(name == "F" || name == "W" || name == "entropy", path, "must be F, W or entropy");
    return functional_kind_from_string(name);
}

/// Backward view used by traces: the flow itself, or backward about `reference` for a forward flow.
FlowSpec trace_view(const FlowSpec& flow, double reference) {
    if (flow.orientation == TimeOrientation::backward) return flow;
    return flow.with_orientation(TimeOrientation::backward, reference);
}

/// Default trace: uniform measure from 10% into the backward time range to its end.
TraceConfig default_trace(const FlowSpec& flow) {
    TraceConfig trace;
    trace.reference_time = flow.orientation == TimeOrientation::backward ? flow.reference_time : flow.t_max;
    const FlowSpec view = trace_view(flow, trace.reference_time);
    const double lo = view.to_natural(view.t_max);
    const double hi = view.to_natural(view.t_min);
    trace.tau_start = lo + 0.1 * (hi - lo);
    trace.tau_end = hi;
    return trace;
}

TraceConfig parse_trace(const json& doc, const FlowSpec& flow) {
    Block block(doc, "trace");
    TraceConfig trace = default_trace(flow);
    trace.present = true;
    trace.functional = parse_functional(block.text("functional", "F"), "trace.functional");
    trace.measure = measure_or_uniform(block, "measure");
    if (block.has("reference_time")) {
        require(flow.orientation == TimeOrientation::forward, "trace.reference_time",
                "only allowed for a forward oriented flow");
        trace.reference_time = block.required_number("reference_time");
    }
    const FlowSpec view = trace_view(flow, trace.reference_time);
    const double lo = view.to_natural(view.t_max);
    const double hi = view.to_natural(view.t_min);
    trace.tau_start = block.number("tau_start", std::max(trace.tau_start, lo));
    trace.tau_end = block.number("tau_end", hi);
    trace.steps = block.integer("steps", trace.steps);
    require(trace.tau_start < trace.tau_end, "trace.tau_end", "must exceed tau_start");
    require(trace.tau_start >= lo - 1e-12 && trace.tau_end <= hi + 1e-12, "trace",
            "backward times must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    require(trace.steps >= 1 && trace.steps <= 100000, "trace.steps", "must lie in [1, 100000]");
    block.finish();
    return trace;
}

CostKind parse_cost_kind(Block& block, const std::string& key) {
    const std::string name = block.text(key, "l0");
    return named(block.at(key), [&] { return cost_kind_from_cli(name); });
}

/// The flow seen by a check: backward about `reference_time` when the check names one.
struct CheckFlow {
    bool backward_view = false;
    double reference = 0.0;

    FlowSpec apply(const FlowSpec& flow) const {
        return backward_view ? flow.with_orientation(TimeOrientation::backward, reference) : flow;
    }
};

using Runner = std::function<CheckReport(const FlowSpec&, const CheckOptions&)>;
using CheckParser = std::function<Runner(Block&)>;

Runner parse_gradient(Block& b) {
    GradientEstimateParams p;
    const std::string family = b.text("family", "l0");
    p.family = named(b.at("family"), [&] { return estimate_family_from_string(family); });
    p.s = b.required_number("s");
    p.t = b.required_number("t");
    p.shift = b.number("shift", 0.0);
    p.dimension = b.number("dimension", 0.0);
    p.lambdas = b.numbers("lambdas", p.lambdas);
    require(p.s < p.t, b.at("t"), "must exceed s");
    SmoothFn v = b.expression("v", "1");
    return [p, v](const FlowSpec& flow, const CheckOptions& o) { return check_gradient_estimate(flow, v, p, o); };
}

Runner parse_contraction(Block& b) {
    ContractionParams p;
    const std::string form = b.text("form", "l0");
    p.form = named(b.at("form"), [&] { return contraction_form_from_string(form); });
    const MeasureSpec mu = measure_or_uniform(b, "mu");
    const MeasureSpec nu = measure_or_uniform(b, "nu");
    p.s = b.required_number("s");
    p.t = b.required_number("t");
    p.h = b.number("h", p.h);
    p.alpha = b.number("alpha", p.alpha);
    p.S = b.number("S", 0.0);
    p.T = b.number("T", 0.0);
    p.sigma2 = b.number("sigma2", 0.0);
    p.tau2 = b.number("tau2", 0.0);
    p.dimension = b.number("dimension", 0.0);
    return [p, mu, nu](const FlowSpec& flow, const CheckOptions& o) {
        return check_wasserstein_contraction(flow, mu, nu, p, o);
    };
}

Runner parse_convexity(Block& b) {
    ConvexityParams p;
    p.kind = parse_cost_kind(b, "kind");
    const MeasureSpec mu = measure_or_uniform(b, "mu");
    const MeasureSpec nu = measure_or_uniform(b, "nu");
    p.s = b.required_number("s");
    p.t = b.required_number("t");
    p.r = b.number("r", 0.5 * (p.s + p.t));
    require(p.s < p.r && p.r < p.t, b.at("r"), "must lie strictly between s and t");
    return [p, mu, nu](const FlowSpec& flow, const CheckOptions& o) {
        return check_entropy_convexity(flow, mu, nu, p, o);
    };
}

Runner parse_evi(Block& b) {
    EviParams p;
    p.kind = parse_cost_kind(b, "kind");
    const MeasureSpec mu = measure_or_uniform(b, "mu");
    const MeasureSpec nu = measure_or_uniform(b, "nu");
    p.s = b.required_number("s");
    p.t = b.required_number("t");
    p.probe_a = b.number("probe_a", p.kind == CostKind::L0 ? p.t : p.s);
    p.probe_b = b.number("probe_b", p.kind == CostKind::L0 ? p.s : p.t);
    p.h = b.number("h", p.h);
    require(p.h > 0.0, b.at("h"), "must be positive");
    return [p, mu, nu](const FlowSpec& flow, const CheckOptions& o) { return check_evi(flow, mu, nu, p, o); };
}

Runner parse_consistency(Block& b) {
    const MeasureSpec mu = measure_or_uniform(b, "mu");
    const MeasureSpec nu = measure_or_uniform(b, "nu");
    const double s = b.required_number("s");
    const double t = b.required_number("t");
    const double h = b.number("h", 0.05);
    require(h > 0.0, b.at("h"), "must be positive");
    return [=](const FlowSpec& flow, const CheckOptions& o) {
        return check_evi_contraction_consistency(flow, mu, nu, s, t, h, o);
    };
}

Runner parse_hj(Block& b) {
    HjPreservationParams p;
    p.kind = parse_cost_kind(b, "kind");
    const SmoothFn phi = b.expression("phi", "0");
    p.t1 = b.required_number("t1");
    p.t2 = b.required_number("t2");
    p.h = b.number("h", p.h);
    p.alpha = b.number("alpha", p.alpha);
    p.samples = b.integer("samples", p.samples);
    p.input_tolerance = b.number("input_tolerance", p.input_tolerance);
    require(p.t1 < p.t2, b.at("t2"), "must exceed t1");
    require(p.samples >= 2 && p.samples <= 1024, b.at("samples"), "must lie in [2, 1024]");
    return [p, phi](const FlowSpec& flow, const CheckOptions& o) { return check_hj_preservation(flow, phi, p, o); };
}

Runner parse_blowup(Block& b) {
    const double tau = b.required_number("tau");
    const std::vector<double> sigmas = b.numbers("sigmas", {});
    return [=](const FlowSpec& flow, const CheckOptions& o) { return check_blowup_bound(flow, tau, sigmas, o); };
}

Runner parse_monotonicity(Block& b) {
    MonotonicityParams p;
    p.functional = b.text("functional", "F");
    parse_functional(p.functional, b.at("functional"));
    const MeasureSpec mu = measure_or_uniform(b, "measure");
    p.tau_start = b.required_number("tau_start");
    p.tau_end = b.required_number("tau_end");
    require(p.tau_start < p.tau_end, b.at("tau_end"), "must exceed tau_start");
    return [p, mu](const FlowSpec& flow, const CheckOptions& o) { return check_monotonicity(flow, mu, p, o); };
}

Runner parse_d_condition(Block& b) {
    const int times = b.integer("time_samples", 9);
    const int angles = b.integer("angle_samples", 8);
    const double tol = b.number("tol", 1e-10);
    require(times >= 1 && angles >= 1, b.at("time_samples"), "sample counts must be positive");
    return [=](const FlowSpec& flow, const CheckOptions&) { return check_d_condition(flow, times, angles, tol); };
}

Runner parse_positivity(Block& b) {
    const int times = b.integer("time_samples", 9);
    const int angles = b.integer("angle_samples", 8);
    const double tol = b.number("tol", 1e-10);
    require(times >= 1 && angles >= 1, b.at("time_samples"), "sample counts must be positive");
    return [=](const FlowSpec& flow, const CheckOptions&) {
        return spacetime_positivity_scan(flow, times, angles, tol);
    };
}

const std::map<std::string, CheckParser>& check_parsers() {
    static const std::map<std::string, CheckParser> parsers{
        {"d_condition", parse_d_condition},
        {"spacetime_positivity", parse_positivity},
        {"gradient_estimate", parse_gradient},
        {"wasserstein_contraction", parse_contraction},
        {"entropy_convexity", parse_convexity},
        {"evi", parse_evi},
        {"evi_contraction_consistency", parse_consistency},
        {"hj_preservation", parse_hj},
        {"blowup_bound", parse_blowup},
        {"monotonicity", parse_monotonicity},
    };
    return parsers;
}

CheckConfig parse_check(const json& doc, const std::string& path, const GridConfig& grid) {
    Block block(doc, path);
    CheckConfig check;
    check.id = block.required_text("id");
    const auto& parsers = check_parsers();
    const auto parser = parsers.find(check.id);
    if (parser == parsers.end()) throw SchemaError(block.at("id"), "unknown check id '" + check.id + "'");
    check.label = block.text("label", check.id);
    check.parameters = doc;

    CheckFlow view;
    if (block.has("reference_time")) {
        view.backward_view = true;
        view.reference = block.required_number("reference_time");
    }
    CheckOptions& options = check.options;
    GridConfig local = grid;
    if (block.has("grid")) {
        Block g(block.raw("grid"), block.at("grid"));
        local.nodes = g.integer("Nx", local.nodes);
        local.dt = g.number("dt", local.dt);
        local.layers = g.integer("K", local.layers);
        local.window = g.integer("W", local.window);
        g.finish();
        validate_grid(local, block.at("grid"));
    }
    options.resolution = local.resolution();
    options.calibrate = block.flag("calibrate", options.calibrate);
    options.tolerance_floor = block.number("tolerance_floor", options.tolerance_floor);
    if (block.has("tolerance")) {
        options.tolerance = block.required_number("tolerance");
        require(*options.tolerance >= 0.0, block.at("tolerance"), "must be non-negative");
    }
    if (block.has("tolerance_cap")) options.tolerance_cap = block.required_number("tolerance_cap");
    require(options.tolerance_floor >= 0.0, block.at("tolerance_floor"), "must be non-negative");

    Runner runner = parser->second(block);
    block.finish();
    check.run = [runner, view](const FlowSpec& flow, const CheckOptions& o) { return runner(view.apply(flow), o); };
    return check;
}

std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

}  // namespace

Resolution GridConfig::resolution() const {
    Resolution res;
    res.nodes = nodes;
    res.dt = dt;
    res.layers = layers;
    res.window = window;
    return res;
}

nlohmann::json GridConfig::to_json() const { return {{"Nx", nodes}, {"dt", dt}, {"K", layers}, {"W", window}}; }

void validate_grid(const GridConfig& grid, const std::string& path) {
    require(grid.nodes >= 4 && grid.nodes <= kMaxNodes, path + ".Nx", "must lie in [4, " + std::to_string(kMaxNodes) + "]");
    require(grid.dt >= 0.0 && grid.dt <= kMaxStep, path + ".dt", "must lie in [0, 1]");
    require(grid.layers >= 0 && grid.layers <= kMaxLayers, path + ".K",
            "must lie in [0, " + std::to_string(kMaxLayers) + "]");
    require(grid.window >= 0 && grid.window <= kMaxWindow && (grid.window == 0 || grid.window % 2 == 1), path + ".W",
            "must be 0 or odd and at most " + std::to_string(kMaxWindow));
}

void apply_grid_override(GridConfig& grid, const std::string& spec) {
    std::stringstream stream(spec);
    std::string item;
    while (std::getline(stream, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw SchemaError("--grid-override", "expected key=value, got '" + item + "'");
        const std::string key = item.substr(0, eq);
        const std::string value = item.substr(eq + 1);
        try {
            std::size_t used = 0;
            if (key == "Nx") {
                grid.nodes = std::stoi(value, &used);
            } else if (key == "dt") {
                grid.dt = std::stod(value, &used);
            } else if (key == "K") {
                grid.layers = std::stoi(value, &used);
            } else if (key == "W") {
                grid.window = std::stoi(value, &used);
            } else {
                throw SchemaError("--grid-override." + key, "unknown key (Nx, dt, K, W)");
            }
            if (used != value.size()) throw std::invalid_argument(value);
        } catch (const std::logic_error&) {
            throw SchemaError("--grid-override." + key, "malformed value '" + value + "'");
        }
    }
    validate_grid(grid, "--grid-override");
}

std::string ScenarioConfig::input_hash() const {
    Fingerprint print;
    print.add(flow_document.dump()).add(grid.to_json().dump());
    return print.hex();
}

const std::vector<std::string>& known_check_ids() {
    static const std::vector<std::string> ids = [] {
        std::vector<std::string> out;
        for (const auto& item : check_parsers()) out.push_back(item.first);
        return out;
    }();
    return ids;
}

ScenarioConfig parse_scenario(const nlohmann::json& document) {
    Block root(document, "");
    ScenarioConfig config;
    config.name = root.text("name", "scenario");
    if (!root.has("flow")) throw SchemaError("flow", "required block is missing");
    config.flow_document = root.raw("flow");
    config.flow = parse_flow(config.flow_document);
    if (root.has("grid")) config.grid = parse_grid(root.raw("grid"));
    if (!root.has("checks")) throw SchemaError("checks", "required block is missing");
    const json& checks = root.raw("checks");
    require(checks.is_array(), "checks", "expected an array of check objects");
    for (std::size_t i = 0; i < checks.size(); ++i)
        config.checks.push_back(parse_check(checks[i], "checks[" + std::to_string(i) + "]", config.grid));
    if (root.has("output")) config.output = parse_output(root.raw("output"));
    if (root.has("trace")) config.trace = parse_trace(root.raw("trace"), config.flow);
    root.finish();
    return config;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError(path, "cannot open scenario file");
    json document;
    try {
        document = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(path, std::string("malformed JSON: ") + e.what());
    }
    return parse_scenario(document);
}

CheckReport run_check(const ScenarioConfig& config, const CheckConfig& check) {
    CheckReport report;
    try {
        report = check.run(config.flow, check.options);
    } catch (const PreconditionError& e) {
        report.verdict = Verdict::not_applicable;
        report.notes.push_back(e.what());
    } catch (const std::exception& e) {
        report.verdict = Verdict::error;
        report.notes.push_back(e.what());
    }
    if (report.check_id.empty()) report.check_id = check.id;
    report.parameters = check.parameters;
    report.provenance["label"] = check.label;
    return report;
}

std::vector<CheckReport> run_checks(const ScenarioConfig& config, int parallel) {
    const int count = static_cast<int>(config.checks.size());
    std::vector<CheckReport> reports(count);
    const int workers = std::max(1, std::min(parallel, count));
    std::atomic<int> next{0};
    auto work = [&] {
        for (int k = next++; k < count; k = next++) reports[k] = run_check(config, config.checks[k]);
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& thread : pool) thread.join();
    return reports;
}

int batch_exit_code(const std::vector<CheckReport>& reports) {
    bool indeterminate = false;
    for (const CheckReport& r : reports) {
        if (r.verdict == Verdict::fail || r.verdict == Verdict::error) return 1;
        indeterminate = indeterminate || r.verdict == Verdict::indeterminate;
    }
    return indeterminate ? 2 : 0;
}

nlohmann::json report_array(const ScenarioConfig& config, const std::vector<CheckReport>& reports,
                            const std::string& timestamp) {
    json out = json::array();
    const std::string hash = config.input_hash();
    for (const CheckReport& r : reports) {
        json row = to_json(r);
        row["provenance"]["input_hash"] = hash;
        row["provenance"]["scenario"] = config.name;
        row["timestamp"] = timestamp;
        out.push_back(std::move(row));
    }
    return out;
}

void write_summary_table(std::ostream& out, const std::vector<CheckReport>& reports) {
    std::size_t label_width = 5;
    for (const CheckReport& r : reports)
        label_width = std::max(label_width, r.provenance.value("label", r.check_id).size());
    out << std::left << std::setw(4) << "#" << std::setw(static_cast<int>(label_width) + 2) << "check"
        << std::setw(20) << "family" << std::setw(16) << "verdict" << std::setw(14) << "margin" << "tolerance\n";
    for (std::size_t k = 0; k < reports.size(); ++k) {
        const CheckReport& r = reports[k];
        out << std::left << std::setw(4) << k << std::setw(static_cast<int>(label_width) + 2)
            << r.provenance.value("label", r.check_id) << std::setw(20) << r.family << std::setw(16)
            << to_string(r.verdict) << std::setw(14) << format_number(r.worst_margin) << format_number(r.tolerance)
            << "\n";
    }
}

void write_report_csv(std::ostream& out, const std::vector<CheckReport>& reports) {
    out << "index,check_id,label,family,verdict,worst_margin,tolerance,calibration_error\n";
    for (std::size_t k = 0; k < reports.size(); ++k) {
        const CheckReport& r = reports[k];
        out << k << ',' << r.check_id << ',' << r.provenance.value("label", r.check_id) << ',' << r.family << ','
            << to_string(r.verdict) << ',' << std::setprecision(17) << r.worst_margin << ',' << r.tolerance << ','
            << r.calibration_error << '\n';
    }
}

std::vector<std::string> write_artifacts(const ScenarioConfig& config, const std::vector<CheckReport>& reports,
                                         const std::string& timestamp) {
    namespace fs = std::filesystem;
    const fs::path dir(config.output.directory);
    fs::create_directories(dir);
    std::vector<std::string> written;
    auto open = [&](const std::string& name) {
        const fs::path path = dir / name;
        written.push_back(path.string());
        std::ofstream file(path);
        if (!file) throw Error("cannot write " + path.string());
        return file;
    };
    for (const std::string& format : config.output.formats) {
        if (format == "json") {
            auto file = open("report.json");
            file << report_array(config, reports, timestamp).dump(2) << '\n';
        } else if (format == "table") {
            auto file = open("summary.txt");
            write_summary_table(file, reports);
        } else if (format == "csv") {
            auto file = open("checks.csv");
            write_report_csv(file, reports);
            if (config.trace.present) {
                auto trace_file = open("trace_" + to_string(config.trace.functional) + ".csv");
                write_trace_csv(trace_file, scenario_trace(config, config.trace.functional));
            }
        }
    }
    return written;
}

FunctionalTrace scenario_trace(const ScenarioConfig& config, FunctionalKind functional) {
    const TraceConfig trace = config.trace.present ? config.trace : default_trace(config.flow);
    const FlowSpec flow = trace_view(config.flow, trace.reference_time);
    const Resolution res = config.grid.resolution();
    const GridPtr grid = SpatialGrid::for_flow(flow, res.nodes);
    const DiscreteMeasure mu = trace.measure.build(grid, flow, flow.to_forward(trace.tau_start));
    TraceOptions options;
    options.heat.max_step = res.step(*grid);
    return monotonicity_trace(mu, flow, trace.tau_start, trace.tau_end, functional, trace.steps, options);
}

CostTable scenario_cost_table(const ScenarioConfig& config, CostKind kind, double s, double t) {
    const Resolution res = config.grid.resolution();
    const GridPtr grid = SpatialGrid::for_flow(config.flow, res.nodes);
    CostFamily family;
    family.kind = kind;
    return cost_table(config.flow, family, s, t, grid, res.cost_options());
}

CostKind cost_kind_from_cli(const std::string& name) {
    if (name == "l0") return CostKind::L0;
    if (name == "lminus") return CostKind::Lminus;
    if (name == "lplus") return CostKind::Lplus;
    throw ParameterError("unknown cost family '" + name + "' (l0, lminus, lplus)");
}

}  // namespace dflow
