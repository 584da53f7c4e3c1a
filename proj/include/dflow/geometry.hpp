#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

#include "dflow/flow.hpp"
#include "dflow/grid.hpp"

namespace dflow {

/// Weight-dependent quantities at a space-time point of a weighted flow.
struct WeightedFields {
    double U = 0.0;
    Eigen::VectorXd dU;        ///< differential of U (covector)
    Eigen::MatrixXd hess_U;    ///< covariant Hessian of U
    double dt_U = 0.0;
    double S_U = 0.0;          ///< tr S + dU/dt
    Eigen::VectorXd dS_U;      ///< differential of S_U (covector)
    double dt_S_U = 0.0;
    double lap_U_S_U = 0.0;    ///< weighted Laplacian of S_U
    Eigen::VectorXd div_U_S;   ///< weighted divergence of the S tensor (covector)
};

/// Every tensor and scalar entering the D quantity at one forward time and point.
///
/// Components are expressed in coordinates where the metric is `g`. Covectors
/// carry a leading `d`; `grad_S` is the vector obtained by raising `dS`.
struct GeometrySnapshot {
    FlowFamily family = FlowFamily::static_manifold;
    int dim = 1;
    double t = 0.0;
    double x = 0.0;
    Eigen::MatrixXd g;
    Eigen::MatrixXd S_tensor;
    double S = 0.0;
    Eigen::MatrixXd ric;
    Eigen::VectorXd dS;
    Eigen::VectorXd grad_S;
    Eigen::VectorXd div_S;
    double dt_S = 0.0;
    double lap_S = 0.0;
    double norm_S_sq = 0.0;
    std::optional<WeightedFields> weighted;
};

/// Snapshot of `flow` at forward time t and angle x (ignored by homogeneous families).
GeometrySnapshot snapshot(const FlowSpec& flow, double t, double x = 0.0);

/// Export keyed by (t, x_index).
nlohmann::json snapshot_to_json(const GeometrySnapshot& snap, int x_index);

/// D(X) = c + l(X) + X^T q X split by homogeneity in X.
struct DQuadratic {
    double c = 0.0;
    Eigen::VectorXd l;
    Eigen::MatrixXd q;

    double operator()(const Eigen::VectorXd& X) const { return c + l.dot(X) + X.dot(q * X); }
};

DQuadratic d_decomposition(const GeometrySnapshot& snap);
double evaluate_D(const GeometrySnapshot& snap, const Eigen::VectorXd& X);

constexpr double kInfiniteDimension = std::numeric_limits<double>::infinity();

/// Decomposition of the weighted quantity with effective dimension N (N > dim or infinite).
DQuadratic d_weighted_decomposition(const GeometrySnapshot& snap, double N);
double evaluate_D_weighted(const GeometrySnapshot& snap, const Eigen::VectorXd& X, double N);

/// Infimum of a quadratic X -> D(X) relative to the metric g.
struct DMinimum {
    double min_value = 0.0;
    bool unbounded = false;
    std::optional<Eigen::VectorXd> argmin;
    /// Witness direction along which D decreases without bound.
    std::optional<Eigen::VectorXd> descent;

    bool nonnegative(double tol = 1e-10) const { return !unbounded && min_value >= -tol; }
};

DMinimum minimize_quadratic(const DQuadratic& d, const Eigen::MatrixXd& g);
DMinimum minimize_D(const GeometrySnapshot& snap);
DMinimum minimize_D_weighted(const GeometrySnapshot& snap, double N);

struct SphereClassification {
    bool is_ricci_flow = false;
    bool is_srf = false;
    bool satisfies_D = false;
    double ricci_margin = 0.0;   ///< -sup |d/dt r^2 + 2(n-1)|
    double srf_margin = 0.0;     ///< inf (d/dt r^2 + 2(n-1))
    double concavity_margin = 0.0;  ///< inf (-d2/dt2 r^2)
    double d_margin = 0.0;       ///< min of srf and concavity margins
    double worst_time = 0.0;
};

SphereClassification classify_sphere_flow(const FlowSpec& flow, int samples = 201);

enum class BochnerFamily { L0, Lminus, weighted_L0 };

struct BochnerParams {
    double shift = 0.0;  ///< added to backward time for the Lminus form
};

/// Pointwise difference between the two sides of the Bochner identity for a heat-flow slice.
ScalarField bochner_residual(const FlowSpec& flow, const ScalarField& v, BochnerFamily family,
                             const BochnerParams& params = {});

}  // namespace dflow
