#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "dflow/flow.hpp"
#include "dflow/grid.hpp"
#include "dflow/lagrangian.hpp"

namespace dflow {

/// Optimal plan and dual potentials of a discrete Kantorovich problem.
struct TransportSolution {
    double value = 0.0;
    Eigen::MatrixXd plan;
    std::vector<double> phi;  ///< potential on the source nodes
    std::vector<double> psi;  ///< c-transform of phi on the target nodes
    double dual_value = 0.0;
    double duality_gap = 0.0;
    double marginal_error = 0.0;
    int pivots = 0;
};

/// Largest number of plan entries accepted by the exact solver.
inline constexpr int kMaxTransportEntries = 128 * 128;

/// Exact transportation problem by the network simplex on a dense cost matrix.
/// Marginals must have equal mass within 1e-10 (ContractError otherwise).
TransportSolution solve_transport(const std::vector<double>& source, const std::vector<double>& target,
                                  const Eigen::Ref<const Eigen::MatrixXd>& cost);

/// Kantorovich problem between measures on the axes of a cost table.
TransportSolution kantorovich(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const CostTable& cost);

/// Total transport cost W_L(mu, nu) for the cost of `family` on [s, t].
double transport_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const FlowSpec& flow,
                      const CostFamily& family, double s, double t, const CostTableOptions& options = {});

/// Displacement interpolation at the natural times `r_values` in [s, t]: each plan
/// entry's mass moves along its optimal path; off-grid positions go to the nearest
/// node with ties to the lower index.
std::vector<DiscreteMeasure> wasserstein_geodesic(const DiscreteMeasure& mu_s, const DiscreteMeasure& mu_t,
                                                  const FlowSpec& flow, const CostFamily& family, double s, double t,
                                                  const std::vector<double>& r_values,
                                                  const CostTableOptions& options = {});

/// Boltzmann entropy sum rho ln rho dV (0 ln 0 = 0).
double entropy(const DiscreteMeasure& mu);
/// Entropy relative to the weighted reference measure exp(-U) dV of a weighted flow.
double relative_entropy(const DiscreteMeasure& mu, const FlowSpec& flow);

/// A curve of measures sampled at increasing natural times.
struct MeasureCurve {
    std::vector<double> times;
    std::vector<DiscreteMeasure> measures;
};

/// Metric speed of the curve at natural time r from the cost W_{L^{r, r+h}} / h at
/// the two smallest symmetric offsets h, Richardson-combined.
double metric_derivative(const MeasureCurve& curve, const FlowSpec& flow, const CostFamily& family, double r,
                         const CostTableOptions& options = {});

/// Velocity potential phi with d/dt (rho dV) = -div(rho grad phi) dV, mean zero.
ScalarField continuity_potential(const ScalarField& density, const ScalarField& density_rate, const FlowSpec& flow,
                                 double t);

/// Pointwise residual of the discrete continuity equation for a potential.
std::vector<double> continuity_residual(const ScalarField& potential, const ScalarField& density,
                                        const ScalarField& density_rate, const FlowSpec& flow, double t);

/// Sliding-window smoothing: each sample at backward time tau is carried by the
/// conjugate heat flow to tau + eps (L0) or exp(eps) tau (Lminus).
MeasureCurve smooth_curve(const MeasureCurve& curve, const FlowSpec& flow, double eps, CostKind kind);

/// CSV of plan entries `i,j,mass` with non-zero mass.
void write_plan_csv(std::ostream& out, const TransportSolution& solution);
/// CSV of `node,phi,psi`.
void write_potentials_csv(std::ostream& out, const TransportSolution& solution);

}  // namespace dflow
