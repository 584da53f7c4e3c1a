#include <algorithm>
#include <cmath>

#include "dflow/errors.hpp"
#include "dflow/harness.hpp"
#include "dflow/hash.hpp"
#include "harness_internal.hpp"

namespace dflow {

std::string to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::indeterminate: return "indeterminate";
        case Verdict::not_applicable: return "not_applicable";
        case Verdict::error: return "error";
    }
    return "error";
}

Verdict verdict_from_string(const std::string& name) {
    for (Verdict v : {Verdict::pass, Verdict::fail, Verdict::indeterminate, Verdict::not_applicable, Verdict::error})
        if (to_string(v) == name) return v;
    throw ParameterError("unknown verdict '" + name + "'");
}

nlohmann::json to_json(const CheckReport& report) {
    nlohmann::json doc;
    doc["check_id"] = report.check_id;
    doc["family"] = report.family;
    doc["parameters"] = report.parameters;
    doc["verdict"] = to_string(report.verdict);
    doc["worst_margin"] = report.worst_margin;
    doc["tolerance"] = report.tolerance;
    doc["calibration_error"] = report.calibration_error;
    doc["unresolved"] = report.unresolved;
    doc["witness"] = report.witness;
    doc["provenance"] = report.provenance;
    doc["notes"] = report.notes;
    return doc;
}

CheckReport report_from_json(const nlohmann::json& doc) {
    CheckReport report;
    try {
        report.check_id = doc.at("check_id").get<std::string>();
        report.family = doc.at("family").get<std::string>();
        report.parameters = doc.value("parameters", nlohmann::json::object());
        report.verdict = verdict_from_string(doc.at("verdict").get<std::string>());
        report.worst_margin = doc.at("worst_margin").get<double>();
        report.tolerance = doc.at("tolerance").get<double>();
        report.calibration_error = doc.value("calibration_error", 0.0);
        report.unresolved = doc.value("unresolved", false);
        report.witness = doc.value("witness", nlohmann::json::object());
        report.provenance = doc.value("provenance", nlohmann::json::object());
        report.notes = doc.value("notes", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("report", e.what());
    }
    return report;
}

Resolution Resolution::coarsened() const {
    Resolution out = *this;
    out.nodes = std::max(4, nodes / 2);
    out.dt = 2.0 * dt;
    out.layers = layers / 2;
    out.refinement = 0.5 * refinement;
    return out;
}

double Resolution::step(const SpatialGrid& grid) const {
    if (dt > 0.0) return dt;
    return grid.is_single_cell() ? 1e-3 : grid.spacing();
}

CostTableOptions Resolution::cost_options() const {
    CostTableOptions options;
    options.layers = layers;
    options.window = window;
    return options;
}

void assign_verdict(CheckReport& report, double tolerance_cap) {
    if (report.verdict == Verdict::not_applicable || report.verdict == Verdict::error) return;
    if (report.worst_margin < -report.tolerance)
        report.verdict = Verdict::fail;
    else if (report.unresolved)
        report.verdict = Verdict::indeterminate;
    else if (report.worst_margin < report.tolerance && report.tolerance > tolerance_cap)
        report.verdict = Verdict::indeterminate;
    else
        report.verdict = Verdict::pass;
}

CheckReport calibrated_check(const std::string& check_id, const std::string& family, nlohmann::json parameters,
                             const std::function<CheckRun(const Resolution&)>& run, const CheckOptions& options) {
    CheckReport report;
    report.check_id = check_id;
    report.family = family;
    report.parameters = std::move(parameters);

    const CheckRun primary = run(options.resolution);
    report.worst_margin = primary.margin;
    report.unresolved = primary.unresolved;
    report.witness = primary.witness;
    report.notes = primary.notes;

    double tolerance = 0.0;
    if (options.tolerance) {
        tolerance = *options.tolerance;
    } else {
        if (options.calibrate) {
            const CheckRun coarse = run(options.resolution.coarsened());
            report.calibration_error = std::abs(primary.margin - coarse.margin);
            report.witness["coarse_margin"] = coarse.margin;
        }
        tolerance = std::max(2.0 * report.calibration_error, options.tolerance_floor * std::max(1.0, primary.scale));
    }
    report.tolerance = tolerance + primary.extra_tolerance;

    const Resolution& res = options.resolution;
    report.provenance["resolution"] = {{"nodes", res.nodes}, {"dt", res.dt}, {"layers", res.layers}, {"window", res.window},
                                     {"refinement", res.refinement}};
    Fingerprint print;
    print.add(check_id).add(family).add(report.parameters.dump());
    print.add(static_cast<long long>(res.nodes)).add(res.dt).add(static_cast<long long>(res.layers));
    report.provenance["parameters_hash"] = print.hex();
    assign_verdict(report, options.tolerance_cap);
    return report;
}

MeasureSpec MeasureSpec::uniform() { return MeasureSpec{}; }

MeasureSpec MeasureSpec::from_density(SmoothFn density) {
    MeasureSpec spec;
    spec.kind = Kind::density;
    spec.density = std::move(density);
    return spec;
}

MeasureSpec MeasureSpec::dirac(double angle) {
    MeasureSpec spec;
    spec.kind = Kind::dirac;
    spec.location = angle;
    return spec;
}

DiscreteMeasure MeasureSpec::build(const GridPtr& grid, const FlowSpec& flow, double forward_time) const {
    switch (kind) {
        case Kind::uniform: return DiscreteMeasure::uniform(grid, flow, forward_time);
        case Kind::density: {
            std::vector<double> rho(grid->size());
            for (int i = 0; i < grid->size(); ++i) rho[i] = density.value(forward_time, grid->node(i));
            return DiscreteMeasure::from_density(grid, flow, forward_time, rho);
        }
        case Kind::dirac: {
            int node = 0;
            if (!grid->is_single_cell()) node = grid->wrap(std::lround(location / grid->spacing()));
            return DiscreteMeasure::dirac(grid, flow, forward_time, node);
        }
    }
    throw ParameterError("unknown measure kind");
}

nlohmann::json MeasureSpec::to_json() const {
    switch (kind) {
        case Kind::uniform: return {{"kind", "uniform"}};
        case Kind::density: return {{"kind", "density"}, {"density", density.description()}};
        case Kind::dirac: return {{"kind", "dirac"}, {"location", location}};
    }
    return {};
}

ScalarField sample_field(const SmoothFn& v, const GridPtr& grid, double forward_time, double scale) {
    ScalarField field = ScalarField::constant(grid, forward_time, 0.0);
    for (int i = 0; i < grid->size(); ++i) field.values[i] = scale * v.value(forward_time, grid->node(i));
    return field;
}

std::vector<double> gradient_sq(const ScalarField& field, const FlowSpec& flow, double t) {
    const SpatialGrid& grid = *field.grid;
    std::vector<double> out(grid.size(), 0.0);
    if (grid.is_single_cell()) return out;
    const double h = grid.spacing();
    for (int i = 0; i < grid.size(); ++i) {
        const double slope = (field.values[grid.wrap(i + 1)] - field.values[grid.wrap(i - 1)]) / (2 * h);
        out[i] = std::exp(-2.0 * flow.conformal.value(t, grid.node(i))) * slope * slope;
    }
    return out;
}

namespace harness_detail {

GridPtr grid_for(const FlowSpec& flow, const Resolution& res) { return SpatialGrid::for_flow(flow, res.nodes); }

HeatOptions heat_options(const GridPtr& grid, const Resolution& res) {
    HeatOptions options;
    options.max_step = res.step(*grid);
    return options;
}

std::vector<double> scalar_curvature(const GridPtr& grid, const FlowSpec& flow, double t) {
    std::vector<double> out(grid->size());
    for (int i = 0; i < grid->size(); ++i) out[i] = snapshot(flow, t, grid->node(i)).S;
    return out;
}

ScalarField heat(const std::vector<double>& values, const GridPtr& grid, const FlowSpec& flow, double from, double to,
                 const HeatOptions& options) {
    ScalarField field = ScalarField::constant(grid, from, 0.0);
    field.values = values;
    if (to == from) return field;
    return heat_propagate(field, flow, from, to, options);
}

DiscreteMeasure conjugate(const DiscreteMeasure& mu, const FlowSpec& flow, double to, const HeatOptions& options) {
    if (to == mu.time) return mu;
    return adjoint_heat_propagate(mu, flow, mu.time, to, options);
}

double backward_l0_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const FlowSpec& flow, double sigma,
                        double tau, bool normalized, const CostTableOptions& options) {
    CostFamily family;
    family.kind = CostKind::L0;
    family.normalized = normalized;
    const double start = flow.to_forward(tau);
    const double end = flow.to_forward(sigma);
    return transport_cost(nu, mu, flow, family, start, end, options);
}

}  // namespace harness_detail

}  // namespace dflow
