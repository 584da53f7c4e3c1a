#pragma once

#include <vector>

#include "dflow/geometry.hpp"
#include "dflow/harness.hpp"
#include "dflow/pde.hpp"
#include "dflow/transport.hpp"

namespace dflow::harness_detail {

GridPtr grid_for(const FlowSpec& flow, const Resolution& res);
HeatOptions heat_options(const GridPtr& grid, const Resolution& res);
std::vector<double> scalar_curvature(const GridPtr& grid, const FlowSpec& flow, double t);

/// Forward heat flow of nodal values from forward time `from` to `to`.
ScalarField heat(const std::vector<double>& values, const GridPtr& grid, const FlowSpec& flow, double from, double to,
                 const HeatOptions& options);

/// Conjugate heat flow of `mu` back to forward time `to` (identity when equal).
DiscreteMeasure conjugate(const DiscreteMeasure& mu, const FlowSpec& flow, double to, const HeatOptions& options);

/// W for the L0 action in backward time from mu at sigma to nu at tau (sigma < tau).
double backward_l0_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const FlowSpec& flow, double sigma,
                        double tau, bool normalized, const CostTableOptions& options);

}  // namespace dflow::harness_detail
