#include "dflow/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "dflow/errors.hpp"
#include "dflow/geometry.hpp"
#include "dflow/transport.hpp"

namespace dflow {

std::string to_string(FunctionalKind kind) {
    switch (kind) {
        case FunctionalKind::F: return "F";
        case FunctionalKind::W: return "W";
        case FunctionalKind::entropy: return "entropy";
        case FunctionalKind::wl_distance: return "wl_distance";
    }
    return "unknown";
}

FunctionalKind functional_kind_from_string(const std::string& name) {
    if (name == "F") return FunctionalKind::F;
    if (name == "W") return FunctionalKind::W;
    if (name == "entropy") return FunctionalKind::entropy;
    if (name == "wl_distance") return FunctionalKind::wl_distance;
    throw ParameterError("unknown functional '" + name + "'");
}

double FunctionalTrace::max_increase() const {
    double worst = 0.0;
    for (std::size_t k = 1; k < values.size(); ++k) worst = std::max(worst, values[k] - values[k - 1]);
    return worst;
}

std::vector<double> FunctionalTrace::derivative() const {
    const std::size_t n = values.size();
    std::vector<double> d(n, 0.0);
    if (n < 2) return d;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t lo = k == 0 ? 0 : k - 1, hi = k + 1 == n ? n - 1 : k + 1;
        d[k] = (values[hi] - values[lo]) / (times[hi] - times[lo]);
    }
    return d;
}

namespace {

/// |grad ln rho|^2 at each node by centred differences, and the scalar S.
void log_density_terms(const DiscreteMeasure& mu, const FlowSpec& flow, std::vector<double>& grad_sq,
                       std::vector<double>& scalar) {
    const int n = mu.size();
    grad_sq.assign(n, 0.0);
    scalar.assign(n, 0.0);
    std::vector<double> log_rho(n);
    for (int i = 0; i < n; ++i) {
        if (!(mu.mass[i] > 0.0)) throw ContractError("functional requires a strictly positive density");
        log_rho[i] = std::log(mu.mass[i] / mu.volume[i]);
    }
    const SpatialGrid& grid = *mu.grid;
    for (int i = 0; i < n; ++i) {
        const double x = grid.node(i);
        scalar[i] = snapshot(flow, mu.time, x).S;
        if (grid.is_single_cell()) continue;
        const double d = (log_rho[grid.wrap(i + 1)] - log_rho[grid.wrap(i - 1)]) / (2.0 * grid.spacing());
        grad_sq[i] = d * d * std::exp(-2.0 * flow.conformal.value(mu.time, x));
    }
}

}  // namespace

double fisher_F(const DiscreteMeasure& mu, const FlowSpec& flow) {
    std::vector<double> grad_sq, scalar;
    log_density_terms(mu, flow, grad_sq, scalar);
    double sum = 0.0;
    for (int i = 0; i < mu.size(); ++i) sum += (grad_sq[i] + scalar[i]) * mu.mass[i];
    return sum;
}

double perelman_W(const DiscreteMeasure& mu, const FlowSpec& flow, double tau) {
    if (!(tau > 0.0)) throw DomainError("W requires tau > 0");
    std::vector<double> grad_sq, scalar;
    log_density_terms(mu, flow, grad_sq, scalar);
    const double n = flow.dimension;
    const double normalisation = 0.5 * n * std::log(4.0 * std::numbers::pi * tau);
    double sum = 0.0;
    for (int i = 0; i < mu.size(); ++i) {
        const double f = -std::log(mu.mass[i] / mu.volume[i]) - normalisation;
        sum += (tau * (grad_sq[i] + scalar[i]) + f - n) * mu.mass[i];
    }
    return sum;
}

Eigen::MatrixXd distance_matrix(const SpatialGrid& grid, const FlowSpec& flow, double t) {
    const int n = grid.size();
    if (grid.is_single_cell()) return Eigen::MatrixXd::Zero(1, 1);
    const double h = grid.spacing();
    std::vector<double> arc(n + 1, 0.0);
    for (int i = 0; i < n; ++i) {
        const double a = grid.node(i);
        const double length = h / 6.0 *
                              (std::exp(flow.conformal.value(t, a)) + 4.0 * std::exp(flow.conformal.value(t, a + 0.5 * h)) +
                               std::exp(flow.conformal.value(t, a + h)));
        arc[i + 1] = arc[i] + length;
    }
    const double total = arc[n];
    Eigen::MatrixXd d(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double direct = std::abs(arc[j] - arc[i]);
            d(i, j) = std::min(direct, total - direct);
        }
    return d;
}

double half_w2_squared(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const FlowSpec& flow, double t) {
    const Eigen::MatrixXd d = distance_matrix(*mu.grid, flow, t);
    const Eigen::MatrixXd cost = 0.5 * d.cwiseProduct(d);
    return solve_transport(mu.mass, nu.mass, cost).value;
}

FunctionalTrace monotonicity_trace(const DiscreteMeasure& mu_init, const FlowSpec& flow, double tau_start,
                                   double tau_end, FunctionalKind functional, int steps, const TraceOptions& options) {
    if (flow.orientation != TimeOrientation::backward)
        throw ParameterError("monotonicity traces run in backward time on a backward-oriented flow");
    if (steps < 1) throw ParameterError("trace needs at least one step");
    if (!(tau_end > tau_start)) throw ParameterError("trace requires tau_end > tau_start");
    if (functional == FunctionalKind::wl_distance && !options.companion)
        throw ParameterError("wl_distance trace requires a companion measure");
    const double start_forward = flow.to_forward(tau_start);
    if (std::abs(mu_init.time - start_forward) > 1e-12 * std::max(1.0, std::abs(start_forward)))
        throw InconsistentInputError("initial measure time does not match the trace start");

    FunctionalTrace trace;
    trace.functional = functional;
    trace.provenance = to_string(flow.family) + " conjugate heat flow, " + std::to_string(steps) + " steps";
    DiscreteMeasure current = mu_init;
    std::optional<DiscreteMeasure> partner = options.companion;
    auto record = [&](double tau) {
        trace.times.push_back(tau);
        switch (functional) {
            case FunctionalKind::F: trace.values.push_back(fisher_F(current, flow)); break;
            case FunctionalKind::W: trace.values.push_back(perelman_W(current, flow, tau)); break;
            case FunctionalKind::entropy: trace.values.push_back(entropy(current)); break;
            case FunctionalKind::wl_distance:
                trace.values.push_back(half_w2_squared(current, *partner, flow, current.time));
                break;
        }
        if (!std::isfinite(trace.values.back())) throw SolverError("functional trace produced a non-finite value");
    };
    record(tau_start);
    for (int k = 1; k <= steps; ++k) {
        const double tau = tau_start + (tau_end - tau_start) * k / steps;
        const double from = current.time, to = flow.to_forward(tau);
        current = adjoint_heat_propagate(current, flow, from, to, options.heat);
        if (partner) *partner = adjoint_heat_propagate(*partner, flow, from, to, options.heat);
        record(tau);
    }
    return trace;
}

double round_sphere_F_derivative(const FlowSpec& flow, double t) {
    if (flow.family != FlowFamily::round_sphere) throw ParameterError("closed form applies to round-sphere flows");
    flow.require_time(t, "round_sphere_F_derivative");
    const Jet r_sq = flow.radius_sq(t);
    const double n = flow.dimension;
    return n / (2.0 * r_sq.v) * (-r_sq.tt + r_sq.t * r_sq.t / r_sq.v);
}

double calibrated_tolerance(const FunctionalTrace& coarse, const FunctionalTrace& fine) {
    if (fine.values.size() != 2 * coarse.values.size() - 1)
        throw ShapeError("fine trace must have twice the steps of the coarse trace");
    double worst = 0.0;
    for (std::size_t k = 0; k < coarse.values.size(); ++k)
        worst = std::max(worst, std::abs(coarse.values[k] - fine.values[2 * k]));
    return 2.0 * worst;
}

void write_trace_csv(std::ostream& out, const FunctionalTrace& trace) {
    out << "tau,value,derivative\n";
    const std::vector<double> d = trace.derivative();
    char buf[96];
    for (std::size_t k = 0; k < trace.values.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", trace.times[k], trace.values[k], d[k]);
        out << buf;
    }
}

}  // namespace dflow
