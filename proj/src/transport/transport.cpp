#include "dflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "dflow/errors.hpp"
#include "dflow/geometry.hpp"
#include "dflow/pde.hpp"

namespace dflow {

TransportSolution kantorovich(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const CostTable& cost) {
    if (mu.size() != cost.size() || nu.size() != cost.size())
        throw ShapeError("measures do not match the cost table axes");
    return solve_transport(mu.mass, nu.mass, cost.values);
}

double transport_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const FlowSpec& flow,
                      const CostFamily& family, double s, double t, const CostTableOptions& options) {
    const CostTable table = cost_table(flow, family, s, t, mu.grid, options);
    return kantorovich(mu, nu, table).value;
}

namespace {

int nearest_node(const SpatialGrid& grid, double angle) {
    if (grid.is_single_cell()) return 0;
    const double index = angle / grid.spacing();
    const double lower = std::floor(index);
    const double frac = index - lower;
    const long chosen = frac > 0.5 + 1e-9 ? static_cast<long>(lower) + 1 : static_cast<long>(lower);
    if (std::abs(frac - 0.5) <= 1e-9) return std::min(grid.wrap(static_cast<long>(lower)), grid.wrap(chosen + 1));
    return grid.wrap(chosen);
}

}  // namespace

std::vector<DiscreteMeasure> wasserstein_geodesic(const DiscreteMeasure& mu_s, const DiscreteMeasure& mu_t,
                                                  const FlowSpec& flow, const CostFamily& family, double s, double t,
                                                  const std::vector<double>& r_values,
                                                  const CostTableOptions& options) {
    CostTableOptions with_paths = options;
    with_paths.keep_paths = true;
    const CostTable table = cost_table(flow, family, s, t, mu_s.grid, with_paths);
    const TransportSolution solution = kantorovich(mu_s, mu_t, table);
    const SpatialGrid& grid = *mu_s.grid;
    const int n = table.size();

    std::vector<DiscreteMeasure> out;
    for (double r : r_values) {
        if (r < s - 1e-12 || r > t + 1e-12) throw ParameterError("geodesic time outside [s, t]");
        const double position = std::clamp((r - s) / (t - s), 0.0, 1.0) * table.layers;
        const int layer = std::min(static_cast<int>(std::floor(position)), table.layers - 1);
        const double alpha = position - layer;
        DiscreteMeasure m;
        m.grid = mu_s.grid;
        m.time = family.forward_time(flow, r);
        m.volume = volume_weights(grid, flow, m.time);
        m.mass.assign(n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double amount = solution.plan(i, j);
                if (amount <= 0.0) continue;
                const auto& path = table.path(i, j);
                const double angle = (1.0 - alpha) * path[layer] + alpha * path[layer + 1];
                m.mass[nearest_node(grid, angle)] += amount;
            }
        out.push_back(std::move(m));
    }
    return out;
}

double entropy(const DiscreteMeasure& mu) {
    double sum = 0.0;
    for (int i = 0; i < mu.size(); ++i)
        if (mu.mass[i] > 0.0) sum += mu.mass[i] * std::log(mu.mass[i] / mu.volume[i]);
    return sum;
}

double relative_entropy(const DiscreteMeasure& mu, const FlowSpec& flow) {
    const std::vector<double> reference = reference_weights(*mu.grid, flow, mu.time, true);
    double sum = 0.0;
    for (int i = 0; i < mu.size(); ++i)
        if (mu.mass[i] > 0.0) sum += mu.mass[i] * std::log(mu.mass[i] / reference[i]);
    return sum;
}

double metric_derivative(const MeasureCurve& curve, const FlowSpec& flow, const CostFamily& family, double r,
                         const CostTableOptions& options) {
    if (family.normalized) throw ParameterError("metric derivative needs an unnormalised cost");
    if (curve.times.size() != curve.measures.size()) throw ShapeError("curve times and measures differ in length");
    auto find = [&](double time) -> int {
        for (std::size_t k = 0; k < curve.times.size(); ++k)
            if (std::abs(curve.times[k] - time) <= 1e-10 * std::max(1.0, std::abs(time))) return static_cast<int>(k);
        return -1;
    };
    const int centre = find(r);
    if (centre < 0) throw InsufficientResolutionError("curve has no sample at the requested time");
    std::vector<double> offsets;
    for (double time : curve.times) {
        const double h = time - r;
        if (h > 1e-12 && find(r - h) >= 0) offsets.push_back(h);
    }
    if (offsets.empty()) throw InsufficientResolutionError("fewer than three samples around the requested time");
    std::sort(offsets.begin(), offsets.end());
    auto quotient = [&](double h) {
        const DiscreteMeasure& before = curve.measures[find(r - h)];
        const DiscreteMeasure& here = curve.measures[centre];
        const DiscreteMeasure& after = curve.measures[find(r + h)];
        const double left = transport_cost(before, here, flow, family, r - h, r, options);
        const double right = transport_cost(here, after, flow, family, r, r + h, options);
        return 0.5 * (left + right) / h;
    };
    const double small = quotient(offsets[0]);
    if (offsets.size() == 1) return small;
    const double h1 = offsets[0], h2 = offsets[1];
    const double large = quotient(h2);
    return (h2 * small - h1 * large) / (h2 - h1);
}

namespace {

struct ContinuityData {
    std::vector<double> source;     ///< cell mass rate (rho_t - S rho) dV
    std::vector<double> conductance;  ///< rho exp(-u) / h on each face i + 1/2
    double scale = 0.0;
};

ContinuityData continuity_data(const ScalarField& density, const ScalarField& density_rate, const FlowSpec& flow,
                               double t) {
    if (!density.grid || density.grid != density_rate.grid) throw ShapeError("density fields must share a grid");
    flow.require_time(t, "continuity_potential");
    const SpatialGrid& grid = *density.grid;
    const int n = grid.size();
    ContinuityData data;
    data.source.resize(n);
    data.conductance.assign(n, 0.0);
    const std::vector<double> volume = volume_weights(grid, flow, t);
    for (int i = 0; i < n; ++i) {
        if (!(density.values[i] > 0.0)) throw ContractError("continuity potential requires a positive density");
        const double scalar = snapshot(flow, t, grid.node(i)).S;
        const double rate = density_rate.values[i] - scalar * density.values[i];
        data.source[i] = rate * volume[i];
        data.scale += std::abs(density_rate.values[i] * volume[i]) + std::abs(scalar * density.values[i] * volume[i]);
    }
    if (!grid.is_single_cell()) {
        const double h = grid.spacing();
        for (int i = 0; i < n; ++i) {
            const double face = grid.node(i) + 0.5 * h;
            const double rho = 0.5 * (density.values[i] + density.values[grid.wrap(i + 1)]);
            data.conductance[i] = rho * std::exp(-flow.conformal.value(t, face)) / h;
        }
    }
    return data;
}

}  // namespace

ScalarField continuity_potential(const ScalarField& density, const ScalarField& density_rate, const FlowSpec& flow,
                                 double t) {
    ContinuityData data = continuity_data(density, density_rate, flow, t);
    const int n = density.size();
    double imbalance = 0.0;
    for (double f : data.source) imbalance += f;
    if (std::abs(imbalance) > 1e-8 * std::max(1.0, data.scale))
        throw InconsistentInputError("continuity data violate mass balance by " + std::to_string(imbalance));
    ScalarField phi = ScalarField::constant(density.grid, t, 0.0, FieldTag::potential);
    if (density.grid->is_single_cell()) return phi;

    const std::vector<double> volume = volume_weights(*density.grid, flow, t);
    double total_volume = 0.0;
    for (double v : volume) total_volume += v;
    for (int i = 0; i < n; ++i) data.source[i] -= imbalance * volume[i] / total_volume;

    // Face k lies between nodes k and k + 1; flux F_k = F_0 - sum_{i=1..k} source_i.
    std::vector<double> partial(n, 0.0);
    for (int k = 1; k < n; ++k) partial[k] = partial[k - 1] + data.source[k];
    double weighted = 0.0, resistance = 0.0;
    for (int k = 0; k < n; ++k) {
        weighted += partial[k] / data.conductance[k];
        resistance += 1.0 / data.conductance[k];
    }
    const double base_flux = weighted / resistance;
    for (int k = 0; k + 1 < n; ++k)
        phi.values[k + 1] = phi.values[k] + (base_flux - partial[k]) / data.conductance[k];
    double mean = 0.0;
    for (double v : phi.values) mean += v;
    mean /= n;
    for (double& v : phi.values) v -= mean;
    return phi;
}

std::vector<double> continuity_residual(const ScalarField& potential, const ScalarField& density,
                                        const ScalarField& density_rate, const FlowSpec& flow, double t) {
    const ContinuityData data = continuity_data(density, density_rate, flow, t);
    const int n = density.size();
    std::vector<double> residual(n);
    if (density.grid->is_single_cell()) {
        residual[0] = data.source[0];
        return residual;
    }
    const SpatialGrid& grid = *density.grid;
    std::vector<double> flux(n);
    for (int k = 0; k < n; ++k)
        flux[k] = data.conductance[k] * (potential.values[grid.wrap(k + 1)] - potential.values[k]);
    for (int i = 0; i < n; ++i) residual[i] = flux[i] - flux[grid.wrap(i - 1)] + data.source[i];
    return residual;
}

MeasureCurve smooth_curve(const MeasureCurve& curve, const FlowSpec& flow, double eps, CostKind kind) {
    if (flow.orientation != TimeOrientation::backward)
        throw ParameterError("sliding-window smoothing runs in backward time");
    if (kind == CostKind::Lplus) throw ParameterError("sliding-window smoothing is defined for L0 and Lminus");
    if (!(eps > 0.0)) throw DomainError("smoothing parameter must be positive");
    if (curve.times.size() != curve.measures.size()) throw ShapeError("curve times and measures differ in length");
    MeasureCurve out;
    for (std::size_t k = 0; k < curve.times.size(); ++k) {
        const double tau = curve.times[k];
        if (kind == CostKind::Lminus && !(tau > 0.0)) throw DomainError("Lminus smoothing requires tau > 0");
        const double target = kind == CostKind::L0 ? tau + eps : std::exp(eps) * tau;
        const double from = flow.to_forward(tau), to = flow.to_forward(target);
        if (!flow.contains(to)) throw DomainError("smoothing parameter moves a sample outside the flow interval");
        out.times.push_back(target);
        out.measures.push_back(adjoint_heat_propagate(curve.measures[k], flow, from, to));
    }
    return out;
}

void write_plan_csv(std::ostream& out, const TransportSolution& solution) {
    out << "i,j,mass\n";
    char buf[32];
    for (int i = 0; i < solution.plan.rows(); ++i)
        for (int j = 0; j < solution.plan.cols(); ++j)
            if (solution.plan(i, j) > 0.0) {
                std::snprintf(buf, sizeof(buf), "%.17g", solution.plan(i, j));
                out << i << "," << j << "," << buf << "\n";
            }
}

void write_potentials_csv(std::ostream& out, const TransportSolution& solution) {
    out << "node,phi,psi\n";
    char a[32], b[32];
    const std::size_t n = std::max(solution.phi.size(), solution.psi.size());
    for (std::size_t k = 0; k < n; ++k) {
        std::snprintf(a, sizeof(a), "%.17g", k < solution.phi.size() ? solution.phi[k] : 0.0);
        std::snprintf(b, sizeof(b), "%.17g", k < solution.psi.size() ? solution.psi[k] : 0.0);
        out << k << "," << a << "," << b << "\n";
    }
}

}  // namespace dflow
