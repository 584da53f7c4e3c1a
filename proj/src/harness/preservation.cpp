#include <algorithm>
#include <cmath>

#include "dflow/errors.hpp"
#include "dflow/functionals.hpp"
#include "harness_internal.hpp"

namespace dflow {

using namespace harness_detail;

namespace {

/// Largest pointwise Hamilton-Jacobi residual
/// rate + |grad f|^2 / (2 weight) - weight S / 2 - allowance over the interior samples.
struct HjDefect {
    double worst = -std::numeric_limits<double>::infinity();
    int sample = 0;
    int node = 0;
};

HjDefect hj_defect(const std::vector<double>& times, const std::vector<ScalarField>& values, const FlowSpec& flow,
                   const CostFamily& family, const std::function<double(double)>& weight,
                   const std::function<double(double)>& allowance) {
    HjDefect out;
    const GridPtr& grid = values.front().grid;
    for (std::size_t k = 1; k + 1 < values.size(); ++k) {
        const double r = times[k];
        const double forward = family.forward_time(flow, r);
        const auto grad = gradient_sq(values[k], flow, forward);
        const auto S = scalar_curvature(grid, flow, forward);
        const double dr = times[k + 1] - times[k - 1];
        const double w = weight(r);
        for (int i = 0; i < grid->size(); ++i) {
            const double rate = (values[k + 1].values[i] - values[k - 1].values[i]) / dr;
            const double residual = rate + grad[i] / (2.0 * w) - 0.5 * w * S[i] - allowance(r);
            if (residual > out.worst) {
                out.worst = residual;
                out.sample = static_cast<int>(k);
                out.node = i;
            }
        }
    }
    return out;
}

CheckRun run_hj(const FlowSpec& flow, const SmoothFn& phi, const HjPreservationParams& p, const Resolution& res) {
    if (!(p.t1 < p.t2)) throw ParameterError("HJ preservation requires t1 < t2");
    if (p.samples < 2) throw ParameterError("HJ preservation needs at least two time samples");
    const GridPtr grid = grid_for(flow, res);
    const HeatOptions heat_opts = heat_options(grid, res);
    const int K = std::max(2, static_cast<int>(std::lround(p.samples * res.refinement)));
    const bool lminus = p.kind == CostKind::Lminus;
    if (p.kind == CostKind::Lplus) throw ParameterError("HJ preservation is available for the L0 and Lminus costs");
    if (lminus) {
        if (flow.orientation != TimeOrientation::backward)
            throw ParameterError("Lminus HJ preservation requires a backward oriented flow");
        if (!(p.alpha > 1.0) || !(p.t1 > 0.0)) throw ParameterError("Lminus HJ preservation requires alpha > 1, tau1 > 0");
    } else if (!(p.h > 0.0)) {
        throw ParameterError("L0 HJ preservation requires h > 0");
    }

    CostFamily family;
    family.kind = p.kind;
    family.normalized = lminus;
    CostTableOptions field_opts = res.cost_options();
    if (lminus) field_opts.normalization_window = CostWindow{p.alpha * p.t1, p.alpha * p.t2};

    // Input field f: the Hopf-Lax flow of phi, sampled at natural times r_k.
    std::vector<double> natural(K + 1), field_times(K + 1);
    for (int k = 0; k <= K; ++k) {
        natural[k] = p.t1 + (p.t2 - p.t1) * k / K;
        field_times[k] = lminus ? p.alpha * natural[k] : natural[k];
    }
    const double field_start = field_times.front();
    const ScalarField phi_field = sample_field(phi, grid, family.forward_time(flow, field_start));
    const auto trajectory = hopf_lax_trajectory(phi_field, flow, family, field_start, field_times, field_opts);
    std::vector<ScalarField> f_values;
    for (const HopfLaxSample& sample : trajectory) f_values.push_back(sample.value);

    const double n = flow.dimension;
    const double root_gap = std::sqrt(p.t2) - std::sqrt(p.t1);
    const double field_gap = std::sqrt(p.alpha * p.t2) - std::sqrt(p.alpha * p.t1);
    auto no_allowance = [](double) { return 0.0; };
    const HjDefect input = lminus ? hj_defect(field_times, f_values, flow, family,
                                              [&](double r) { return field_gap * std::sqrt(r); }, no_allowance)
                                  : hj_defect(field_times, f_values, flow, family, [](double) { return 1.0; },
                                              no_allowance);
    const double input_defect = std::max(0.0, input.worst);

    CheckRun out;
    out.witness["input_defect"] = input_defect;
    if (input_defect > p.input_tolerance)
        throw PreconditionError("input field violates its Hamilton-Jacobi inequality by " +
                                std::to_string(input_defect));

    // Preserved field G_k = P f_k at the output times.
    std::vector<double> G_times;
    std::vector<ScalarField> G_values;
    for (int k = 0; k <= K; ++k) {
        const double from = family.forward_time(flow, field_times[k]);
        const double to_natural = lminus ? natural[k] : natural[k] + p.h;
        G_times.push_back(to_natural);
        G_values.push_back(heat(f_values[k].values, grid, flow, from, family.forward_time(flow, to_natural), heat_opts));
    }

    // The input slack carries over: scaled by alpha through the time dilation for Lminus.
    const double carried = lminus ? p.alpha * input_defect : input_defect;
    const HjDefect output =
        lminus ? hj_defect(G_times, G_values, flow, family, [&](double r) { return root_gap * std::sqrt(r); },
                           [&](double r) { return 0.25 * n * (p.alpha - 1.0) * root_gap / std::sqrt(r) + carried; })
               : hj_defect(G_times, G_values, flow, family, [](double) { return 1.0; },
                           [&](double) { return carried; });

    CostTableOptions dom_opts = res.cost_options();
    if (lminus) dom_opts.normalization_window = CostWindow{p.t1, p.t2};
    const CostTable table = cost_table(flow, family, G_times.front(), G_times.back(), grid, dom_opts);
    const double span = G_times.back() - G_times.front();
    const double dimensional = lminus ? 0.5 * n * (p.alpha - 1.0) * root_gap * root_gap : 0.0;
    const double allowance = dimensional + carried * span;
    double worst_dom = std::numeric_limits<double>::infinity();
    int dom_i = 0, dom_j = 0;
    double scale = 1.0;
    for (int i = 0; i < grid->size(); ++i)
        for (int j = 0; j < grid->size(); ++j) {
            const double rise = G_values.back().values[j] - G_values.front().values[i];
            const double margin = table.values(i, j) + allowance - rise;
            scale = std::max({scale, std::abs(rise), std::abs(table.values(i, j))});
            if (margin < worst_dom) {
                worst_dom = margin;
                dom_i = i;
                dom_j = j;
            }
        }

    out.margin = std::min(-output.worst, worst_dom);
    out.scale = scale;
    out.witness["hj_margin"] = -output.worst;
    out.witness["hj_time"] = G_times[output.sample];
    out.witness["hj_node"] = output.node;
    out.witness["domination_margin"] = worst_dom;
    out.witness["domination_nodes"] = {dom_i, dom_j};
    out.witness["dimensional_allowance"] = dimensional;
    if (lminus) out.witness["stated_allowance"] = 0.5 * dimensional;
    return out;
}

}  // namespace

CheckReport check_hj_preservation(const FlowSpec& flow, const SmoothFn& phi, const HjPreservationParams& params,
                                  const CheckOptions& options) {
    nlohmann::json parameters = {{"t1", params.t1},         {"t2", params.t2},
                                 {"h", params.h},           {"alpha", params.alpha},
                                 {"samples", params.samples}, {"phi", phi.description()}};
    try {
        return calibrated_check(
            "hj_preservation", to_string(params.kind), parameters,
            [&](const Resolution& res) { return run_hj(flow, phi, params, res); }, options);
    } catch (const PreconditionError& e) {
        CheckReport report;
        report.check_id = "hj_preservation";
        report.family = to_string(params.kind);
        report.parameters = parameters;
        report.verdict = Verdict::not_applicable;
        report.notes.push_back(e.what());
        return report;
    }
}

double l0_dimensional_bochner(const BochnerPointData& d, double N) {
    const double a = d.S + d.lap_v;
    return d.op_grad_sq - 2.0 * d.op_lap_v - d.op_S + (2.0 / N) * a * a;
}

double lminus_dimensional_bochner(const BochnerPointData& d, double shift, double tau0, double N) {
    const double c = shift + tau0;
    const double operator_part = c * c * d.op_grad_sq + 2.0 * c * d.lap_v - 2.0 * c * c * d.op_lap_v +
                                 2.0 * c * d.S - c * c * d.op_S - 0.5 * N;
    const double square = c * d.S + c * d.lap_v - 0.5 * N;
    return operator_part + (2.0 / N) * square * square;
}

double bochner_shift_correction(const BochnerPointData& d, double shift, double tau0, double N) {
    const double c = shift + tau0;
    const double gap = d.lap_v + d.S - N / (2.0 * c);
    return (2.0 / N) * gap * gap;
}

CheckReport check_shifted_bochner_equivalence(const std::vector<BochnerPointData>& points,
                                              const std::vector<double>& shifts, double tau0, double N) {
    if (!(N > 0.0)) throw ParameterError("shifted Bochner equivalence requires N > 0");
    CheckReport report;
    report.check_id = "shifted_bochner_equivalence";
    report.family = "l0_dimensional";
    report.parameters = {{"tau0", tau0}, {"dimension", N}, {"shifts", shifts}, {"points", points.size()}};
    double worst = 0.0, scale = 1.0;
    int skipped = 0;
    nlohmann::json smallest_correction;
    double min_correction = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < points.size(); ++p) {
        const BochnerPointData& d = points[p];
        const double l0 = l0_dimensional_bochner(d, N);
        for (double shift : shifts) {
            const double c = shift + tau0;
            if (!(c > 0.0)) {
                ++skipped;
                continue;
            }
            const double lminus = lminus_dimensional_bochner(d, shift, tau0, N) / (c * c);
            const double residual = std::abs(l0 - lminus);
            scale = std::max({scale, std::abs(l0), std::abs(lminus)});
            if (residual > worst) {
                worst = residual;
                report.witness["point"] = p;
                report.witness["shift"] = shift;
            }
            const double correction = bochner_shift_correction(d, shift, tau0, N);
            if (correction < min_correction) {
                min_correction = correction;
                smallest_correction = {{"point", p}, {"shift", shift}, {"correction", correction}};
            }
        }
    }
    if (skipped > 0) report.notes.push_back(std::to_string(skipped) + " shifts with shift + tau0 <= 0 skipped");
    report.witness["smallest_correction"] = smallest_correction;
    report.worst_margin = -worst;
    report.tolerance = 1e-10 * scale;
    assign_verdict(report);
    return report;
}

CheckReport check_blowup_bound(const FlowSpec& flow, double tau, const std::vector<double>& sigmas,
                               const CheckOptions& options) {
    if (flow.orientation != TimeOrientation::backward)
        throw ParameterError("blow-up bound requires a backward oriented flow");
    const int samples = flow.is_circle() ? std::max(256, options.resolution.nodes) : 1;
    auto inf_S = [&](double natural) {
        double low = std::numeric_limits<double>::infinity();
        for (int i = 0; i < samples; ++i)
            low = std::min(low, snapshot(flow, flow.to_forward(natural), 2.0 * M_PI * i / samples).S);
        return low;
    };
    CheckReport report;
    report.check_id = "blowup_bound";
    report.family = "lminus";
    report.parameters = {{"tau", tau}, {"sigmas", sigmas}};
    const double n = flow.dimension;
    const double S_tau = inf_S(tau);
    report.witness["inf_S_tau"] = S_tau;
    if (S_tau > 0.0) report.witness["existence_bound"] = tau - n / (2.0 * S_tau);
    double worst = std::numeric_limits<double>::infinity(), scale = 1.0;
    for (double sigma : sigmas) {
        if (!(0.0 < sigma && sigma < tau)) throw ParameterError("blow-up bound requires 0 < sigma < tau");
        const double bound = (tau * tau * S_tau - 0.5 * n * (tau - sigma)) / (sigma * sigma);
        const double actual = inf_S(sigma);
        scale = std::max({scale, std::abs(bound), std::abs(actual)});
        if (actual - bound < worst) {
            worst = actual - bound;
            report.witness["sigma"] = sigma;
            report.witness["bound"] = bound;
            report.witness["inf_S_sigma"] = actual;
        }
    }
    report.worst_margin = sigmas.empty() ? 0.0 : worst;
    report.tolerance = options.tolerance ? *options.tolerance : options.tolerance_floor * scale;
    assign_verdict(report, options.tolerance_cap);
    return report;
}

CheckReport check_monotonicity(const FlowSpec& flow, const MeasureSpec& mu, const MonotonicityParams& params,
                               const CheckOptions& options) {
    const FunctionalKind kind = functional_kind_from_string(params.functional);
    if (kind == FunctionalKind::wl_distance) throw ParameterError("monotonicity check takes F, W or entropy");
    nlohmann::json parameters = {{"functional", params.functional},
                                 {"tau_start", params.tau_start},
                                 {"tau_end", params.tau_end},
                                 {"mu", mu.to_json()}};
    auto run = [&](const Resolution& res) {
        const GridPtr grid = grid_for(flow, res);
        const double span = params.tau_end - params.tau_start;
        const int steps = std::max(4, static_cast<int>(std::ceil(span / res.step(*grid))));
        const auto start = mu.build(grid, flow, flow.to_forward(params.tau_start));
        TraceOptions trace_opts;
        trace_opts.heat = heat_options(grid, res);
        const FunctionalTrace trace =
            monotonicity_trace(start, flow, params.tau_start, params.tau_end, kind, steps, trace_opts);
        CheckRun out;
        out.margin = -trace.max_increase();
        for (double v : trace.values) out.scale = std::max(out.scale, std::abs(v));
        out.witness = {{"first", trace.values.front()}, {"last", trace.values.back()}, {"samples", trace.values.size()}};
        return out;
    };
    return calibrated_check("monotonicity", params.functional, std::move(parameters), run, options);
}

CheckReport check_d_condition(const FlowSpec& flow, int time_samples, int angle_samples, double tol) {
    if (time_samples < 1 || angle_samples < 1) throw ParameterError("D condition needs positive sample counts");
    CheckReport report;
    report.check_id = "d_condition";
    report.family = "pointwise";
    report.parameters = {{"time_samples", time_samples}, {"angle_samples", angle_samples}};
    const int angles = flow.is_circle() ? angle_samples : 1;
    double worst = std::numeric_limits<double>::infinity();
    for (int k = 0; k < time_samples; ++k) {
        const double t = time_samples == 1 ? flow.t_min
                                           : flow.t_min + (flow.t_max - flow.t_min) * k / (time_samples - 1);
        for (int i = 0; i < angles; ++i) {
            const double x = 2.0 * M_PI * i / angles;
            const GeometrySnapshot snap = snapshot(flow, t, x);
            const DMinimum m = minimize_D(snap);
            double value = m.min_value;
            if (m.unbounded) {
                const Eigen::VectorXd dir = *m.descent;
                const double length = std::sqrt(dir.dot(snap.g * dir));
                value = evaluate_D(snap, dir * (10.0 / length));
            }
            if (value < worst) {
                worst = value;
                report.witness = {{"t", t}, {"x", x}, {"unbounded", m.unbounded}};
            }
        }
    }
    report.worst_margin = worst;
    report.tolerance = tol;
    assign_verdict(report);
    return report;
}

}  // namespace dflow
