#include <algorithm>
#include <cmath>

#include "dflow/errors.hpp"
#include "dflow/functionals.hpp"
#include "harness_internal.hpp"

namespace dflow {

using namespace harness_detail;

std::string to_string(ContractionForm form) {
    switch (form) {
        case ContractionForm::L0: return "l0";
        case ContractionForm::Lminus: return "lminus";
        case ContractionForm::Lplus: return "lplus";
        case ContractionForm::four_time: return "four_time";
        case ContractionForm::static_kuwada: return "static_kuwada";
        case ContractionForm::L0_dimensional: return "l0_dimensional";
    }
    return "l0";
}

ContractionForm contraction_form_from_string(const std::string& name) {
    for (ContractionForm f : {ContractionForm::L0, ContractionForm::Lminus, ContractionForm::Lplus,
                              ContractionForm::four_time, ContractionForm::static_kuwada,
                              ContractionForm::L0_dimensional})
        if (to_string(f) == name) return f;
    throw ParameterError("unknown contraction form '" + name + "'");
}

double four_time_shift(double sigma1, double sigma2, double tau1, double tau2) {
    if (!(sigma1 < sigma2)) throw PreconditionError("four-time contraction requires sigma1 < sigma2");
    if (!(tau1 < tau2)) throw PreconditionError("four-time contraction requires tau1 < tau2");
    if (!(sigma1 < tau1)) throw PreconditionError("four-time contraction requires sigma1 < tau1");
    if (!(sigma2 < tau2)) throw PreconditionError("four-time contraction requires sigma2 < tau2");
    if (!(tau2 - tau1 > sigma2 - sigma1))
        throw PreconditionError("four-time contraction requires tau2 - tau1 > sigma2 - sigma1");
    return (sigma2 * tau1 - sigma1 * tau2) / ((tau2 - tau1) - (sigma2 - sigma1));
}

namespace {

void require_backward(const FlowSpec& flow, const std::string& what) {
    if (flow.orientation != TimeOrientation::backward)
        throw ParameterError(what + " requires a backward oriented flow");
}

CostFamily family_of(CostKind kind, bool normalized, double shift = 0.0) {
    CostFamily family;
    family.kind = kind;
    family.normalized = normalized;
    family.shift = shift;
    return family;
}

/// W between mu at natural time s and nu at natural time t for a cost family in its natural time.
double natural_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const FlowSpec& flow,
                    const CostFamily& family, double s, double t, const Resolution& res) {
    return transport_cost(mu, nu, flow, family, s, t, res.cost_options());
}

CheckRun run_contraction(const FlowSpec& flow, const MeasureSpec& mu_spec, const MeasureSpec& nu_spec,
                         const ContractionParams& p, const Resolution& res) {
    const GridPtr grid = grid_for(flow, res);
    const HeatOptions heat_opts = heat_options(grid, res);
    const double n = p.dimension > 0.0 ? p.dimension : flow.dimension;
    CheckRun out;
    double lhs = 0.0, rhs = 0.0;

    switch (p.form) {
        case ContractionForm::L0: {
            if (!(p.s < p.t) || !(p.h > 0.0)) throw ParameterError("L0 contraction requires s < t and h > 0");
            const auto mu = mu_spec.build(grid, flow, p.s + p.h);
            const auto nu = nu_spec.build(grid, flow, p.t + p.h);
            const CostFamily family = family_of(CostKind::L0, false);
            rhs = natural_cost(mu, nu, flow, family, p.s + p.h, p.t + p.h, res);
            lhs = natural_cost(conjugate(mu, flow, p.s, heat_opts), conjugate(nu, flow, p.t, heat_opts), flow, family,
                               p.s, p.t, res);
            break;
        }
        case ContractionForm::Lminus: {
            require_backward(flow, "Lminus contraction");
            if (!(0.0 < p.s && p.s < p.t) || !(p.alpha >= 1.0))
                throw ParameterError("Lminus contraction requires 0 < sigma < tau and alpha >= 1");
            const auto mu = mu_spec.build(grid, flow, flow.to_forward(p.s));
            const auto nu = nu_spec.build(grid, flow, flow.to_forward(p.t));
            const CostFamily family = family_of(CostKind::Lminus, true);
            const double a = p.alpha;
            lhs = natural_cost(conjugate(mu, flow, flow.to_forward(a * p.s), heat_opts),
                               conjugate(nu, flow, flow.to_forward(a * p.t), heat_opts), flow, family, a * p.s,
                               a * p.t, res);
            const double gap = std::sqrt(p.t) - std::sqrt(p.s);
            rhs = natural_cost(mu, nu, flow, family, p.s, p.t, res) + gap * gap * 0.5 * n * (a - 1.0);
            break;
        }
        case ContractionForm::Lplus: {
            if (!(0.0 < p.s && p.s < p.t) || !(p.alpha >= 1.0))
                throw ParameterError("Lplus contraction requires 0 < s < t and a >= 1");
            const double a = p.alpha;
            const auto mu = mu_spec.build(grid, flow, a * p.s);
            const auto nu = nu_spec.build(grid, flow, a * p.t);
            const CostFamily family = family_of(CostKind::Lplus, true);
            lhs = natural_cost(conjugate(mu, flow, p.s, heat_opts), conjugate(nu, flow, p.t, heat_opts), flow, family,
                               p.s, p.t, res);
            const double gap = std::sqrt(p.t) - std::sqrt(p.s);
            rhs = natural_cost(mu, nu, flow, family, a * p.s, a * p.t, res) + 0.5 * n * (a - 1.0) * gap * gap;
            break;
        }
        case ContractionForm::four_time: {
            require_backward(flow, "four-time contraction");
            const double shift = four_time_shift(p.s, p.sigma2, p.t, p.tau2);
            out.witness["shift"] = shift;
            const auto mu = mu_spec.build(grid, flow, flow.to_forward(p.s));
            const auto nu = nu_spec.build(grid, flow, flow.to_forward(p.t));
            const CostFamily family = family_of(CostKind::Lminus, true, shift);
            lhs = natural_cost(conjugate(mu, flow, flow.to_forward(p.sigma2), heat_opts),
                               conjugate(nu, flow, flow.to_forward(p.tau2), heat_opts), flow, family, p.sigma2,
                               p.tau2, res);
            const double gap = std::sqrt(p.tau2 - p.t) - std::sqrt(p.sigma2 - p.s);
            rhs = natural_cost(mu, nu, flow, family, p.s, p.t, res) + 0.5 * n * gap * gap;
            break;
        }
        case ContractionForm::static_kuwada: {
            if (!(0.0 <= p.s && p.s <= p.t)) throw ParameterError("static contraction requires 0 <= s <= t");
            const double base = flow.t_max;
            flow.require_time(base - p.t, "static contraction heat time");
            const auto mu = mu_spec.build(grid, flow, base);
            const auto nu = nu_spec.build(grid, flow, base);
            const auto mu_s = conjugate(mu, flow, base - p.s, heat_opts);
            const auto nu_t = conjugate(nu, flow, base - p.t, heat_opts);
            lhs = 2.0 * half_w2_squared(mu_s, nu_t, flow, base);
            const double gap = std::sqrt(p.t) - std::sqrt(p.s);
            rhs = 2.0 * half_w2_squared(mu, nu, flow, base) + 2.0 * n * gap * gap;
            break;
        }
        case ContractionForm::L0_dimensional: {
            require_backward(flow, "dimensional L0 contraction");
            if (!(p.s < p.t) || !(p.S < p.T) || !(p.s < p.S) || !(p.t < p.T))
                throw PreconditionError("dimensional contraction requires sigma < tau, S < T, sigma < S and tau < T");
            const auto mu = mu_spec.build(grid, flow, flow.to_forward(p.s));
            const auto nu = nu_spec.build(grid, flow, flow.to_forward(p.t));
            lhs = backward_l0_cost(conjugate(mu, flow, flow.to_forward(p.S), heat_opts),
                                   conjugate(nu, flow, flow.to_forward(p.T), heat_opts), flow, p.S, p.T, true,
                                   res.cost_options());
            rhs = backward_l0_cost(mu, nu, flow, p.s, p.t, true, res.cost_options()) +
                  0.25 * n * std::log((p.T - p.t) / (p.S - p.s)) * ((p.T - p.S) - (p.t - p.s));
            break;
        }
    }
    out.margin = rhs - lhs;
    out.scale = std::max(std::abs(lhs), std::abs(rhs));
    out.witness["lhs"] = lhs;
    out.witness["rhs"] = rhs;
    return out;
}

}  // namespace

CheckReport check_wasserstein_contraction(const FlowSpec& flow, const MeasureSpec& mu, const MeasureSpec& nu,
                                          const ContractionParams& params, const CheckOptions& options) {
    nlohmann::json parameters = {{"s", params.s},         {"t", params.t},           {"h", params.h},
                                 {"alpha", params.alpha}, {"S", params.S},           {"T", params.T},
                                 {"sigma2", params.sigma2}, {"tau2", params.tau2},   {"mu", mu.to_json()},
                                 {"nu", nu.to_json()}};
    return calibrated_check(
        "wasserstein_contraction", to_string(params.form), std::move(parameters),
        [&](const Resolution& res) { return run_contraction(flow, mu, nu, params, res); }, options);
}

namespace {

/// Plan entries moving mass between antipodal nodes, where the discrete geodesic is not unique.
bool antipodal_transport(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const FlowSpec& flow,
                         const CostFamily& family, double s, double t, const Resolution& res) {
    const SpatialGrid& grid = *mu.grid;
    if (grid.is_single_cell() || grid.size() % 2 != 0) return false;
    const CostTable table = cost_table(flow, family, s, t, mu.grid, res.cost_options());
    const TransportSolution plan = kantorovich(mu, nu, table);
    const int half = grid.size() / 2;
    for (int i = 0; i < grid.size(); ++i)
        if (plan.plan(i, grid.wrap(i + half)) > 1e-12) return true;
    return false;
}

CheckRun run_convexity(const FlowSpec& flow, const MeasureSpec& first, const MeasureSpec& second,
                       const ConvexityParams& p, const Resolution& res) {
    if (!(p.s < p.r && p.r < p.t)) throw ParameterError("entropy convexity requires s < r < t");
    if (p.kind == CostKind::Lplus) throw ParameterError("entropy convexity is available for the L0 and Lminus costs");
    const GridPtr grid = grid_for(flow, res);
    const CostFamily family = family_of(p.kind, false);
    if (p.kind == CostKind::Lminus) {
        require_backward(flow, "Lminus entropy convexity");
        if (!(p.s > 0.0)) throw ParameterError("Lminus entropy convexity requires sigma > 0");
    }
    const auto mu_s = first.build(grid, flow, family.forward_time(flow, p.s));
    const auto mu_t = second.build(grid, flow, family.forward_time(flow, p.t));
    const CostTableOptions cost_opts = res.cost_options();
    const auto path = wasserstein_geodesic(mu_s, mu_t, flow, family, p.s, p.t, {p.r}, cost_opts);
    const DiscreteMeasure& mu_r = path.front();

    CheckRun out;
    const double E_s = entropy(mu_s), E_t = entropy(mu_t), E_r = entropy(mu_r);
    if (p.kind == CostKind::L0) {
        const double lambda = (p.r - p.s) / (p.t - p.s);
        const double f_t = E_t - E_s - transport_cost(mu_s, mu_t, flow, family, p.s, p.t, cost_opts);
        const double f_r = E_r - E_s - transport_cost(mu_s, mu_r, flow, family, p.s, p.r, cost_opts);
        out.margin = lambda * f_t - f_r;
        out.scale = std::max({std::abs(E_s), std::abs(E_t), std::abs(E_r), 1.0});
        out.witness = {{"f_t", f_t}, {"f_r", f_r}, {"lambda", lambda}};
    } else {
        const double n = flow.dimension;
        const double a = 1.0 / std::sqrt(p.s), b = 1.0 / std::sqrt(p.r), c = 1.0 / std::sqrt(p.t);
        const double w_first = (b - c) / (a - c), w_second = (a - b) / (a - c);
        const double hat_s = E_s + 0.5 * n * std::log(p.s);
        const double hat_t = E_t + 0.5 * n * std::log(p.t);
        const double hat_r = E_r + 0.5 * n * std::log(p.r);
        const double W_early = transport_cost(mu_s, mu_r, flow, family, p.s, p.r, cost_opts);
        const double W_late = transport_cost(mu_r, mu_t, flow, family, p.r, p.t, cost_opts);
        out.margin = w_first * hat_s + w_second * hat_t - hat_r - w_first * a * W_early + w_second * c * W_late;
        out.scale = std::max({std::abs(hat_s), std::abs(hat_t), std::abs(hat_r), 1.0});
        out.witness = {{"weight_first", w_first}, {"weight_second", w_second}, {"W_early", W_early}, {"W_late", W_late}};
    }
    if (out.margin < 0.0 && antipodal_transport(mu_s, mu_t, flow, family, p.s, p.t, res)) {
        out.unresolved = true;
        out.notes.push_back("selection-dependent: the optimal plan moves mass between antipodal nodes");
    }
    return out;
}

}  // namespace

CheckReport check_entropy_convexity(const FlowSpec& flow, const MeasureSpec& mu_s, const MeasureSpec& mu_t,
                                    const ConvexityParams& params, const CheckOptions& options) {
    nlohmann::json parameters = {{"s", params.s}, {"t", params.t}, {"r", params.r},
                                 {"mu_s", mu_s.to_json()}, {"mu_t", mu_t.to_json()}};
    CheckReport report = calibrated_check(
        "entropy_convexity", to_string(params.kind), std::move(parameters),
        [&](const Resolution& res) { return run_convexity(flow, mu_s, mu_t, params, res); }, options);
    if (report.unresolved && report.verdict == Verdict::fail) report.verdict = Verdict::indeterminate;
    return report;
}

namespace {

/// Difference quotients at h, h/2, h/4 reduced to a limit estimate.
struct DiniEstimate {
    double limit = 0.0;
    double error = 0.0;
    bool monotone = true;
    std::vector<double> quotients;
};

DiniEstimate dini_limit(const std::function<double(double)>& quotient, double h) {
    DiniEstimate out;
    for (double step : {h, 0.5 * h, 0.25 * h}) out.quotients.push_back(quotient(step));
    const double q1 = out.quotients[0], q2 = out.quotients[1], q3 = out.quotients[2];
    const double noise = 1e-12 * std::max({1.0, std::abs(q1), std::abs(q2), std::abs(q3)});
    out.monotone = (q2 - q1) * (q3 - q2) >= 0.0 || std::abs(q3 - q2) <= noise;
    out.limit = 2.0 * q3 - q2;
    out.error = std::abs(q3 - q2);
    return out;
}

nlohmann::json to_json(const DiniEstimate& d) {
    return {{"limit", d.limit}, {"error", d.error}, {"monotone", d.monotone}, {"quotients", d.quotients}};
}

struct EviSides {
    double margin_a = 0.0;
    double margin_b = 0.0;
    DiniEstimate dini_a;
    DiniEstimate dini_b;
    double scale = 1.0;
};

EviSides l0_evi(const FlowSpec& flow, const DiscreteMeasure& mu, const DiscreteMeasure& nu, double s, double t,
                double a, double b, double h, const Resolution& res, const HeatOptions& heat_opts) {
    if (!(s < a && a <= t)) throw ParameterError("L0 EVI requires s < a <= t");
    if (!(b <= s)) throw ParameterError("L0 EVI requires b <= s");
    if (!(a - h > s)) throw PreconditionError("L0 EVI step must keep a - h > s");
    const CostFamily family = family_of(CostKind::L0, false);
    const CostTableOptions cost_opts = res.cost_options();

    auto g_a = [&](double u) {
        return transport_cost(mu, conjugate(nu, flow, u, heat_opts), flow, family, s, u, cost_opts);
    };
    auto g_b = [&](double u) {
        return transport_cost(conjugate(mu, flow, u, heat_opts), nu, flow, family, u, t, cost_opts);
    };
    EviSides out;
    const double W_a = g_a(a), W_b = g_b(b);
    out.dini_a = dini_limit([&](double step) { return (W_a - g_a(a - step)) / step; }, h);
    out.dini_b = dini_limit([&](double step) { return (W_b - g_b(b - step)) / step; }, h);
    const double E_mu = entropy(mu), E_nu = entropy(nu);
    const double E_nu_a = entropy(conjugate(nu, flow, a, heat_opts));
    const double E_mu_b = entropy(conjugate(mu, flow, b, heat_opts));
    const double rhs_a = (E_mu - E_nu_a + W_a) / (a - s);
    const double rhs_b = (E_nu - E_mu_b - W_b) / (t - b);
    out.margin_a = rhs_a + out.dini_a.limit;
    out.margin_b = rhs_b + out.dini_b.limit;
    out.scale = std::max({1.0, std::abs(rhs_a), std::abs(rhs_b), std::abs(out.dini_a.limit), std::abs(out.dini_b.limit)});
    return out;
}

EviSides lminus_evi(const FlowSpec& flow, const DiscreteMeasure& nu, const DiscreteMeasure& mu, double sigma,
                    double tau, double eta, double varsigma, double h, const Resolution& res,
                    const HeatOptions& heat_opts) {
    require_backward(flow, "Lminus EVI");
    if (!(0.0 < sigma && sigma <= eta && eta < tau)) throw ParameterError("Lminus EVI requires sigma <= eta < tau");
    if (!(varsigma >= tau)) throw ParameterError("Lminus EVI requires varsigma >= tau");
    if (!(eta + h < tau)) throw PreconditionError("Lminus EVI step must keep eta + h < tau");
    const CostFamily family = family_of(CostKind::Lminus, false);
    const CostTableOptions cost_opts = res.cost_options();
    const double n = flow.dimension;

    auto g_a = [&](double u) {
        return transport_cost(conjugate(nu, flow, flow.to_forward(u), heat_opts), mu, flow, family, u, tau, cost_opts);
    };
    auto g_b = [&](double u) {
        return transport_cost(nu, conjugate(mu, flow, flow.to_forward(u), heat_opts), flow, family, sigma, u,
                              cost_opts);
    };
    EviSides out;
    const double W_a = g_a(eta), W_b = g_b(varsigma);
    out.dini_a = dini_limit([&](double step) { return (g_a(eta + step) - W_a) / step; }, h);
    out.dini_b = dini_limit([&](double step) { return (g_b(varsigma + step) - W_b) / step; }, h);
    const double E_mu = entropy(mu), E_nu = entropy(nu);
    const double E_nu_eta = entropy(conjugate(nu, flow, flow.to_forward(eta), heat_opts));
    const double E_mu_var = entropy(conjugate(mu, flow, flow.to_forward(varsigma), heat_opts));
    const double gap_a = 1.0 / std::sqrt(eta) - 1.0 / std::sqrt(tau);
    const double gap_b = 1.0 / std::sqrt(sigma) - 1.0 / std::sqrt(varsigma);
    const double rhs_a = (E_mu - E_nu_eta + W_a / std::sqrt(tau)) / (2.0 * gap_a) +
                         n * std::log(tau / eta) / (4.0 * gap_a) - 0.5 * n * std::sqrt(eta);
    const double rhs_b = (E_nu - E_mu_var - W_b / std::sqrt(sigma)) / (2.0 * gap_b) +
                         n * std::log(sigma / varsigma) / (4.0 * gap_b) + 0.5 * n * std::sqrt(varsigma);
    out.margin_a = rhs_a - eta * out.dini_a.limit;
    out.margin_b = rhs_b - varsigma * out.dini_b.limit;
    out.scale = std::max({1.0, std::abs(rhs_a), std::abs(rhs_b)});
    return out;
}

CheckRun run_evi(const FlowSpec& flow, const MeasureSpec& mu_spec, const MeasureSpec& nu_spec, const EviParams& p,
                 const Resolution& res) {
    if (!(p.h > 0.0)) throw ParameterError("EVI step must be positive");
    const GridPtr grid = grid_for(flow, res);
    const HeatOptions heat_opts = heat_options(grid, res);
    EviSides sides;
    if (p.kind == CostKind::L0) {
        const auto mu = mu_spec.build(grid, flow, p.s);
        const auto nu = nu_spec.build(grid, flow, p.t);
        sides = l0_evi(flow, mu, nu, p.s, p.t, p.probe_a, p.probe_b, p.h, res, heat_opts);
    } else if (p.kind == CostKind::Lminus) {
        require_backward(flow, "Lminus EVI");
        const auto first = mu_spec.build(grid, flow, flow.to_forward(p.s));
        const auto second = nu_spec.build(grid, flow, flow.to_forward(p.t));
        sides = lminus_evi(flow, first, second, p.s, p.t, p.probe_a, p.probe_b, p.h, res, heat_opts);
    } else {
        throw ParameterError("EVI is available for the L0 and Lminus costs");
    }
    CheckRun out;
    out.margin = std::min(sides.margin_a, sides.margin_b);
    out.scale = sides.scale;
    out.extra_tolerance = 2.0 * std::max(sides.dini_a.error, sides.dini_b.error);
    out.unresolved = !sides.dini_a.monotone || !sides.dini_b.monotone;
    if (out.unresolved) out.notes.push_back("difference quotients are not monotone in the step");
    out.witness = {{"margin_first", sides.margin_a},
                   {"margin_second", sides.margin_b},
                   {"dini_first", to_json(sides.dini_a)},
                   {"dini_second", to_json(sides.dini_b)}};
    return out;
}

}  // namespace

CheckReport check_evi(const FlowSpec& flow, const MeasureSpec& mu, const MeasureSpec& nu, const EviParams& params,
                      const CheckOptions& options) {
    nlohmann::json parameters = {{"s", params.s}, {"t", params.t}, {"probe_a", params.probe_a},
                                 {"probe_b", params.probe_b}, {"h", params.h}, {"mu", mu.to_json()},
                                 {"nu", nu.to_json()}};
    return calibrated_check(
        "evi", to_string(params.kind), std::move(parameters),
        [&](const Resolution& res) { return run_evi(flow, mu, nu, params, res); }, options);
}

CheckReport check_evi_contraction_consistency(const FlowSpec& flow, const MeasureSpec& mu_spec,
                                              const MeasureSpec& nu_spec, double s, double t, double h,
                                              const CheckOptions& options) {
    nlohmann::json parameters = {{"s", s}, {"t", t}, {"h", h}, {"mu", mu_spec.to_json()}, {"nu", nu_spec.to_json()}};
    auto run = [&](const Resolution& res) {
        if (!(s < t) || !(h > 0.0) || !(t - h > s)) throw ParameterError("consistency check requires s < t - h");
        const GridPtr grid = grid_for(flow, res);
        const HeatOptions heat_opts = heat_options(grid, res);
        const auto mu = mu_spec.build(grid, flow, s);
        const auto nu = nu_spec.build(grid, flow, t);
        const EviSides sides = l0_evi(flow, mu, nu, s, t, t, s, h, res, heat_opts);
        const CostFamily family = family_of(CostKind::L0, false);
        const double W = transport_cost(mu, nu, flow, family, s, t, res.cost_options());
        const DiniEstimate rate = dini_limit(
            [&](double step) {
                const double shifted = transport_cost(conjugate(mu, flow, s - step, heat_opts),
                                                      conjugate(nu, flow, t - step, heat_opts), flow, family,
                                                      s - step, t - step, res.cost_options());
                return (W - shifted) / step;
            },
            h);
        CheckRun out;
        const double evi_sum = sides.margin_a + sides.margin_b;
        out.margin = rate.limit - evi_sum;
        out.scale = std::max({1.0, std::abs(rate.limit), std::abs(evi_sum)});
        const double dini_error = sides.dini_a.error + sides.dini_b.error + rate.error;
        out.extra_tolerance = 2.0 * dini_error;
        out.unresolved = !sides.dini_a.monotone || !sides.dini_b.monotone || !rate.monotone;
        out.witness = {{"evi_sum", evi_sum},
                       {"dini_error", dini_error},
                       {"contraction_rate", to_json(rate)},
                       {"margin_first", sides.margin_a},
                       {"margin_second", sides.margin_b}};
        return out;
    };
    return calibrated_check("evi_contraction_consistency", "l0", std::move(parameters), run, options);
}

}  // namespace dflow
