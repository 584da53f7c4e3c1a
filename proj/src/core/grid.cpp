#include "dflow/grid.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "dflow/errors.hpp"

namespace dflow {

SpatialGrid::SpatialGrid(int n, bool single)
    : n_(n), single_(single), h_(single ? 0.0 : 2.0 * std::numbers::pi / n) {}

std::shared_ptr<const SpatialGrid> SpatialGrid::circle(int nodes) {
    if (nodes < 3) throw ParameterError("circle grid needs at least 3 nodes");
    return std::shared_ptr<const SpatialGrid>(new SpatialGrid(nodes, false));
}

std::shared_ptr<const SpatialGrid> SpatialGrid::single_cell() {
    return std::shared_ptr<const SpatialGrid>(new SpatialGrid(1, true));
}

std::shared_ptr<const SpatialGrid> SpatialGrid::for_flow(const FlowSpec& flow, int nodes) {
    return flow.homogeneous() ? single_cell() : circle(nodes);
}

std::vector<double> volume_weights(const SpatialGrid& grid, const FlowSpec& flow, double t) {
    flow.require_time(t, "volume_weights");
    if (grid.is_single_cell()) {
        if (flow.is_circle()) throw ShapeError("circle flow on a single-cell grid");
        return {flow.volume(t)};
    }
    if (!flow.is_circle()) throw ShapeError("homogeneous flow on a circle grid");
    std::vector<double> w(grid.size());
    for (int i = 0; i < grid.size(); ++i) w[i] = std::exp(flow.conformal.value(t, grid.node(i))) * grid.spacing();
    return w;
}

std::vector<double> reference_weights(const SpatialGrid& grid, const FlowSpec& flow, double t, bool weighted) {
    auto w = volume_weights(grid, flow, t);
    if (weighted) {
        if (!flow.is_weighted()) throw ContractError("weighted reference measure requires a weighted flow");
        for (int i = 0; i < grid.size(); ++i) w[i] *= std::exp(-flow.weight.value(t, grid.node(i)));
    }
    return w;
}

SpaceTimeGrid SpaceTimeGrid::uniform(GridPtr space, double start, double end, double max_step) {
    if (end < start) throw ParameterError("time window must satisfy start <= end");
    if (!(max_step > 0)) throw ParameterError("time step must be positive");
    SpaceTimeGrid g;
    g.space = std::move(space);
    g.start = start;
    g.end = end;
    g.steps = end > start ? static_cast<int>(std::ceil((end - start) / max_step - 1e-9)) : 0;
    return g;
}

ScalarField ScalarField::constant(GridPtr grid, double time, double c, FieldTag tag) {
    ScalarField f;
    f.values.assign(grid->size(), c);
    f.grid = std::move(grid);
    f.time = time;
    f.tag = tag;
    return f;
}

void ScalarField::check() const {
    if (!grid || static_cast<int>(values.size()) != grid->size()) throw ShapeError("field size does not match its grid");
    for (double v : values) {
        if (!std::isfinite(v)) throw ContractError("field has non-finite values");
        if (tag == FieldTag::density && v < 0) throw ContractError("density field has negative values");
    }
}

double DiscreteMeasure::total_mass() const { return std::accumulate(mass.begin(), mass.end(), 0.0); }

std::vector<double> DiscreteMeasure::density() const {
    std::vector<double> rho(mass.size());
    for (std::size_t i = 0; i < mass.size(); ++i) rho[i] = mass[i] / volume[i];
    return rho;
}

DiscreteMeasure DiscreteMeasure::from_density(GridPtr grid, const FlowSpec& flow, double time,
                                              const std::vector<double>& density, bool weighted) {
    if (static_cast<int>(density.size()) != grid->size()) throw ShapeError("density size does not match grid");
    DiscreteMeasure m;
    m.volume = volume_weights(*grid, flow, time);
    auto ref = reference_weights(*grid, flow, time, weighted);
    m.mass.resize(density.size());
    double total = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i) {
        if (!(density[i] >= 0) || !std::isfinite(density[i])) throw ContractError("density must be finite and non-negative");
        m.mass[i] = density[i] * ref[i];
        total += m.mass[i];
    }
    if (!(total > 0)) throw ContractError("density has zero total mass");
    for (double& p : m.mass) p /= total;
    m.grid = std::move(grid);
    m.time = time;
    return m;
}

DiscreteMeasure DiscreteMeasure::uniform(GridPtr grid, const FlowSpec& flow, double time) {
    std::vector<double> ones(grid->size(), 1.0);
    return from_density(std::move(grid), flow, time, ones);
}

DiscreteMeasure DiscreteMeasure::dirac(GridPtr grid, const FlowSpec& flow, double time, int node) {
    if (node < 0 || node >= grid->size()) throw ShapeError("dirac node out of range");
    DiscreteMeasure m;
    m.volume = volume_weights(*grid, flow, time);
    m.mass.assign(grid->size(), 0.0);
    m.mass[node] = 1.0;
    m.grid = std::move(grid);
    m.time = time;
    return m;
}

}  // namespace dflow
