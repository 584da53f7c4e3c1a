#pragma once

#include <memory>
#include <vector>

#include "dflow/flow.hpp"

namespace dflow {

/// Spatial discretisation: a uniform periodic angle grid or a single cell.
class SpatialGrid {
public:
    static std::shared_ptr<const SpatialGrid> circle(int nodes);
    static std::shared_ptr<const SpatialGrid> single_cell();
    /// Circle grid with `nodes` points for circle families, one cell otherwise.
    static std::shared_ptr<const SpatialGrid> for_flow(const FlowSpec& flow, int nodes);

    bool is_single_cell() const { return single_; }
    int size() const { return n_; }
    /// Angular spacing 2 pi / N (zero for a single cell).
    double spacing() const { return h_; }
    double node(int i) const { return h_ * i; }
    int wrap(long i) const {
        long m = i % n_;
        return static_cast<int>(m < 0 ? m + n_ : m);
    }

private:
    SpatialGrid(int n, bool single);
    int n_;
    bool single_;
    double h_;
};

using GridPtr = std::shared_ptr<const SpatialGrid>;

/// Riemannian volume of each cell at forward time t.
std::vector<double> volume_weights(const SpatialGrid& grid, const FlowSpec& flow, double t);
/// Reference measure per cell: exp(-U) dV when `weighted`, else dV.
std::vector<double> reference_weights(const SpatialGrid& grid, const FlowSpec& flow, double t, bool weighted);

/// A spatial grid together with a uniform partition of the window [s, t].
struct SpaceTimeGrid {
    GridPtr space;
    double start = 0.0;
    double end = 0.0;
    int steps = 0;

    static SpaceTimeGrid uniform(GridPtr space, double start, double end, double max_step);
    double step() const { return steps > 0 ? (end - start) / steps : 0.0; }
    double time(int k) const { return start + (end - start) * k / std::max(steps, 1); }
};

enum class FieldTag { generic, heat_slice, potential, density };

/// Values of a neighbouring heat-flow solution used for time derivatives.
struct HeatHistory {
    std::vector<double> before;
    std::vector<double> after;
    double dt = 0.0;
    bool weighted = false;
};

/// Real values on the nodes of a grid at one forward time.
struct ScalarField {
    GridPtr grid;
    double time = 0.0;
    std::vector<double> values;
    FieldTag tag = FieldTag::generic;
    std::shared_ptr<const HeatHistory> history;

    static ScalarField constant(GridPtr grid, double time, double c, FieldTag tag = FieldTag::generic);
    int size() const { return static_cast<int>(values.size()); }
    void check() const;
};

/// Probability weights on the nodes of a grid with the cell volumes at the same time.
struct DiscreteMeasure {
    GridPtr grid;
    double time = 0.0;
    std::vector<double> mass;
    std::vector<double> volume;

    int size() const { return static_cast<int>(mass.size()); }
    double total_mass() const;
    std::vector<double> density() const;
    /// Measure with mass proportional to density * reference weight, normalised to one.
    static DiscreteMeasure from_density(GridPtr grid, const FlowSpec& flow, double time,
                                        const std::vector<double>& density, bool weighted = false);
    static DiscreteMeasure uniform(GridPtr grid, const FlowSpec& flow, double time);
    static DiscreteMeasure dirac(GridPtr grid, const FlowSpec& flow, double time, int node);
};

}  // namespace dflow
