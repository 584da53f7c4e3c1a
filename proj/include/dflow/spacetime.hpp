#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dflow/flow.hpp"
#include "dflow/geometry.hpp"
#include "dflow/harness.hpp"

namespace dflow {

/// Tangent vector X + lambda d/dtau of space-time at one point.
struct SpaceTimeVector {
    Eigen::VectorXd X;
    double lambda = 0.0;
};

/// Quadratic form of the space-time Ricci tensor of the flow: block matrix
/// [[Ric - S, b], [b^T, c]] acting on (X, lambda).
struct SpaceTimeQuadratic {
    Eigen::MatrixXd matrix;
    Eigen::MatrixXd metric;  ///< diag(g, 1), used to normalise eigenvectors

    double operator()(const SpaceTimeVector& v) const;
};

SpaceTimeQuadratic spacetime_quadratic(const GeometrySnapshot& snap);

/// Space-time Ricci curvature of (X, lambda) at the snapshot point.
double ricci_tilde(const GeometrySnapshot& snap, const SpaceTimeVector& v);

/// Smallest eigenvalue of the space-time quadratic relative to diag(g, 1) at sampled
/// points; the eigenvector at the worst point is the witness.
CheckReport spacetime_positivity_scan(const FlowSpec& flow, int time_samples, int angle_samples, double tol = 1e-10);

struct WarpedProductParams {
    double fiber_dimension = 1.0;    ///< k > 0
    double fiber_ricci_lower = 0.0;  ///< lower bound of the fiber Ricci curvature
    std::vector<Eigen::VectorXd> horizontal_samples;
};

/// D of the warped product of a weighted base with a k-dimensional fiber: the horizontal
/// part equals the weighted quantity of effective dimension m + k, the fiber part is
/// evaluated on unit fiber directions.
CheckReport warped_product_check(const GeometrySnapshot& snap, const WarpedProductParams& params, double tol = 1e-10);

/// Fiber value of D on a unit fiber direction.
double warped_fiber_value(const GeometrySnapshot& snap, double fiber_dimension, double fiber_ricci_lower);

}  // namespace dflow
