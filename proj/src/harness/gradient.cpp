#include <algorithm>
#include <cmath>

#include "dflow/errors.hpp"
#include "harness_internal.hpp"

namespace dflow {

using namespace harness_detail;

std::string to_string(EstimateFamily family) {
    switch (family) {
        case EstimateFamily::L0: return "l0";
        case EstimateFamily::Lminus: return "lminus";
        case EstimateFamily::Lminus_parametric: return "lminus_parametric";
        case EstimateFamily::Lplus: return "lplus";
        case EstimateFamily::L0_dimensional: return "l0_dimensional";
    }
    return "l0";
}

EstimateFamily estimate_family_from_string(const std::string& name) {
    for (EstimateFamily f : {EstimateFamily::L0, EstimateFamily::Lminus, EstimateFamily::Lminus_parametric,
                             EstimateFamily::Lplus, EstimateFamily::L0_dimensional})
        if (to_string(f) == name) return f;
    throw ParameterError("unknown gradient estimate family '" + name + "'");
}

namespace {

bool backward_family(EstimateFamily family) {
    return family == EstimateFamily::Lminus || family == EstimateFamily::Lminus_parametric ||
           family == EstimateFamily::L0_dimensional;
}

/// |grad w|^2 + 2 lap_sign Lap w * weight - weight^2 S at each node.
std::vector<double> estimate_quantity(const ScalarField& field, const FlowSpec& flow, double forward, double weight,
                                      double lap_sign, const std::vector<double>& S) {
    const auto grad = gradient_sq(field, flow, forward);
    const auto lap = laplacian_apply(field, flow, forward).values;
    std::vector<double> out(field.size());
    for (int i = 0; i < field.size(); ++i) out[i] = grad[i] + 2.0 * lap_sign * weight * lap[i] - weight * weight * S[i];
    return out;
}

struct EstimateTimes {
    double start = 0.0;  ///< forward time where v is given
    double end = 0.0;    ///< forward time where P v is evaluated
};

EstimateTimes resolve_times(const FlowSpec& flow, const GradientEstimateParams& p) {
    if (!(p.s < p.t)) throw ParameterError("gradient estimate requires s < t");
    EstimateTimes times;
    if (backward_family(p.family)) {
        if (flow.orientation != TimeOrientation::backward)
            throw ParameterError(to_string(p.family) + " gradient estimate requires a backward oriented flow");
        times.start = flow.to_forward(p.t);
        times.end = flow.to_forward(p.s);
    } else {
        times.start = p.s;
        times.end = p.t;
    }
    flow.require_time(times.start, "gradient estimate start");
    flow.require_time(times.end, "gradient estimate end");
    return times;
}

CheckRun run_estimate(const FlowSpec& flow, const SmoothFn& v, const GradientEstimateParams& p, double dimension,
                      const Resolution& res) {
    const GridPtr grid = grid_for(flow, res);
    const HeatOptions heat_opts = heat_options(grid, res);
    const EstimateTimes times = resolve_times(flow, p);
    const auto S_start = scalar_curvature(grid, flow, times.start);
    const auto S_end = scalar_curvature(grid, flow, times.end);

    const double early = p.s + p.shift;
    const double late = p.t + p.shift;
    double start_weight = 1.0, end_weight = 1.0, lap_sign = -1.0;
    switch (p.family) {
        case EstimateFamily::L0: break;
        case EstimateFamily::L0_dimensional: lap_sign = 1.0; break;
        case EstimateFamily::Lplus:
        case EstimateFamily::Lminus:
        case EstimateFamily::Lminus_parametric:
            if (!(early > 0.0)) throw PreconditionError("shifted times must be positive");
            start_weight = p.family == EstimateFamily::Lplus ? early : late;
            end_weight = p.family == EstimateFamily::Lplus ? late : early;
            break;
    }

    CheckRun out;
    out.margin = std::numeric_limits<double>::infinity();
    out.scale = 0.0;
    for (double lambda : p.lambdas) {
        double field_scale = lambda;
        double evaluated_weight = end_weight;
        double offset = 0.0;
        switch (p.family) {
            case EstimateFamily::L0: break;
            case EstimateFamily::Lplus:
            case EstimateFamily::Lminus: offset = 0.5 * dimension * (p.t - p.s); break;
            case EstimateFamily::Lminus_parametric:
                if (!(lambda > 0.0 && lambda < late / early))
                    throw PreconditionError("parametric estimate requires 0 < lambda < tau / sigma");
                field_scale = 1.0;
                evaluated_weight = lambda * early;
                offset = 0.5 * dimension * (late - lambda * early) * (late - lambda * early) / (late - early);
                break;
            case EstimateFamily::L0_dimensional: break;
        }

        const ScalarField v_start = sample_field(v, grid, times.start, field_scale);
        const ScalarField pv = heat(v_start.values, grid, flow, times.start, times.end, heat_opts);
        const auto lhs = estimate_quantity(pv, flow, times.end, evaluated_weight, lap_sign, S_end);
        const auto inner = estimate_quantity(v_start, flow, times.start, start_weight, lap_sign, S_start);
        const auto rhs = heat(inner, grid, flow, times.start, times.end, heat_opts).values;

        std::vector<double> correction(grid->size(), 0.0);
        if (p.family == EstimateFamily::L0_dimensional) {
            const double span = p.t - p.s;
            const int pieces = std::max(4, static_cast<int>(std::ceil(span / res.step(*grid))));
            for (int k = 0; k <= pieces; ++k) {
                const double eta = p.s + span * k / pieces;
                const double forward_eta = flow.to_forward(eta);
                const ScalarField w = heat(v_start.values, grid, flow, times.start, forward_eta, heat_opts);
                const auto lap = laplacian_apply(w, flow, forward_eta).values;
                const auto S_eta = scalar_curvature(grid, flow, forward_eta);
                std::vector<double> gap(grid->size());
                for (int i = 0; i < grid->size(); ++i) gap[i] = S_eta[i] - lap[i];
                const auto carried = heat(gap, grid, flow, forward_eta, times.end, heat_opts).values;
                const double weight = (k == 0 || k == pieces ? 0.5 : 1.0) * span / pieces;
                for (int i = 0; i < grid->size(); ++i) correction[i] += weight * carried[i] * carried[i];
            }
            for (double& c : correction) c *= 2.0 / dimension;
        }

        for (int i = 0; i < grid->size(); ++i) {
            const double bound = rhs[i] + offset - correction[i];
            const double margin = bound - lhs[i];
            out.scale = std::max({out.scale, std::abs(lhs[i]), std::abs(bound)});
            if (margin < out.margin) {
                out.margin = margin;
                out.witness = {{"lambda", lambda}, {"node", i}, {"angle", grid->node(i)},
                               {"lhs", lhs[i]},   {"rhs", bound}};
            }
        }
    }
    return out;
}

}  // namespace

CheckReport check_gradient_estimate(const FlowSpec& flow, const SmoothFn& v, const GradientEstimateParams& params,
                                    const CheckOptions& options) {
    if (params.lambdas.empty()) throw ParameterError("gradient estimate needs at least one lambda");
    const double dimension = params.dimension > 0.0 ? params.dimension : flow.dimension;
    nlohmann::json parameters = {{"s", params.s},           {"t", params.t},
                                 {"shift", params.shift},   {"dimension", dimension},
                                 {"lambdas", params.lambdas}, {"test_function", v.description()}};
    return calibrated_check(
        "gradient_estimate", to_string(params.family), std::move(parameters),
        [&](const Resolution& res) { return run_estimate(flow, v, params, dimension, res); }, options);
}

}  // namespace dflow
