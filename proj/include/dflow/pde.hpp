#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "dflow/flow.hpp"
#include "dflow/grid.hpp"

namespace dflow {

/// Controls the Crank-Nicolson propagators.
struct HeatOptions {
    /// Upper bound on the step; zero means the monotonicity bound alone decides.
    double max_step = 0.0;
    /// Use the weighted Laplacian of a weighted flow.
    bool weighted = false;
};

/// Symmetric periodic tridiagonal matrix: diagonal entries and the coupling of i with i+1.
struct CyclicTridiagonal {
    std::vector<double> diag;
    std::vector<double> upper;

    std::vector<double> apply(const std::vector<double>& x) const;
    /// Direct solve; throws SolverError if the residual exceeds 1e-12 relative.
    std::vector<double> solve(const std::vector<double>& rhs) const;
};

/// Stiffness K (symmetric, negative semidefinite, K 1 = 0) and lumped mass M of the
/// conservative Laplacian at forward time t, so that Laplacian = M^{-1} K.
struct LaplacianParts {
    CyclicTridiagonal stiffness;
    std::vector<double> mass;
};

LaplacianParts laplacian_parts(const SpatialGrid& grid, const FlowSpec& flow, double t, bool weighted);

ScalarField laplacian_apply(const ScalarField& field, const FlowSpec& flow, double t, bool weighted = false);

/// Largest step keeping one Crank-Nicolson step entrywise non-negative at time t.
double monotone_step_bound(const SpatialGrid& grid, const FlowSpec& flow, double t, bool weighted);

/// Forward heat flow P_{t,s} v.
ScalarField heat_propagate(const ScalarField& v_s, const FlowSpec& flow, double s, double t,
                           const HeatOptions& options = {});

/// Heat flow evaluated at each of the increasing `times` (all >= s).
std::vector<ScalarField> heat_trajectory(const ScalarField& v_s, const FlowSpec& flow, double s,
                                         const std::vector<double>& times, const HeatOptions& options = {});

/// Heat flow at t tagged as a heat slice, with neighbouring slices at t -/+ probe for time derivatives.
ScalarField heat_slice(const ScalarField& v_s, const FlowSpec& flow, double s, double t, double probe,
                       const HeatOptions& options = {});

/// Conjugate heat flow of a measure from forward time t back to s <= t (exact matrix transpose).
DiscreteMeasure adjoint_heat_propagate(const DiscreteMeasure& mu_t, const FlowSpec& flow, double t, double s,
                                       const HeatOptions& options = {});

/// Conjugate heat flow evaluated at each of the decreasing `times` (all <= t).
std::vector<DiscreteMeasure> adjoint_trajectory(const DiscreteMeasure& mu_t, const FlowSpec& flow, double t,
                                                const std::vector<double>& times, const HeatOptions& options = {});

/// |<P_{t,s} v, mu> - <v, P^_{t,s} mu>|.
double duality_residual(const ScalarField& v, const DiscreteMeasure& mu, const FlowSpec& flow, double s, double t,
                        const HeatOptions& options = {});

/// Dense matrices of the forward and adjoint propagators on mass vectors between s and t.
Eigen::MatrixXd heat_matrix(const SpatialGrid& grid, const FlowSpec& flow, double s, double t,
                            const HeatOptions& options = {});
Eigen::MatrixXd adjoint_matrix(const SpatialGrid& grid, const FlowSpec& flow, double t, double s,
                               const HeatOptions& options = {});

/// Writes rows `t,node,value` with a header.
void write_field_csv(std::ostream& out, const std::vector<ScalarField>& series);

}  // namespace dflow
