#include "dflow/spacetime.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "dflow/errors.hpp"

namespace dflow {

double SpaceTimeQuadratic::operator()(const SpaceTimeVector& v) const {
    const int m = static_cast<int>(v.X.size());
    if (m + 1 != matrix.rows()) throw ShapeError("space-time vector does not match the quadratic");
    Eigen::VectorXd full(m + 1);
    full.head(m) = v.X;
    full(m) = v.lambda;
    return full.dot(matrix * full);
}

SpaceTimeQuadratic spacetime_quadratic(const GeometrySnapshot& snap) {
    const int m = snap.dim;
    SpaceTimeQuadratic q;
    q.matrix = Eigen::MatrixXd::Zero(m + 1, m + 1);
    q.matrix.topLeftCorner(m, m) = snap.ric - snap.S_tensor;
    const Eigen::VectorXd mixed = snap.div_S - 0.5 * snap.dS;
    q.matrix.block(0, m, m, 1) = mixed;
    q.matrix.block(m, 0, 1, m) = mixed.transpose();
    q.matrix(m, m) = 0.5 * snap.dt_S - 0.5 * snap.lap_S - snap.norm_S_sq;
    q.metric = Eigen::MatrixXd::Identity(m + 1, m + 1);
    q.metric.topLeftCorner(m, m) = snap.g;
    return q;
}

double ricci_tilde(const GeometrySnapshot& snap, const SpaceTimeVector& v) {
    if (v.X.size() != snap.dim) throw ShapeError("space-time vector does not match the snapshot dimension");
    const double lambda = v.lambda;
    const double spatial = v.X.dot((snap.ric - snap.S_tensor) * v.X);
    const double mixed = 2.0 * snap.div_S.dot(v.X) - snap.dS.dot(v.X);
    const double temporal = 0.5 * snap.dt_S - 0.5 * snap.lap_S - snap.norm_S_sq;
    return spatial + lambda * mixed + lambda * lambda * temporal;
}

CheckReport spacetime_positivity_scan(const FlowSpec& flow, int time_samples, int angle_samples, double tol) {
    if (time_samples < 1 || angle_samples < 1) throw ParameterError("positivity scan needs positive sample counts");
    CheckReport report;
    report.check_id = "spacetime_positivity";
    report.family = "ricci_tilde";
    report.parameters = {{"time_samples", time_samples}, {"angle_samples", angle_samples}};
    const int angles = flow.is_circle() ? angle_samples : 1;
    double worst = std::numeric_limits<double>::infinity();
    for (int k = 0; k < time_samples; ++k) {
        const double t = time_samples == 1 ? flow.t_min
                                           : flow.t_min + (flow.t_max - flow.t_min) * k / (time_samples - 1);
        for (int i = 0; i < angles; ++i) {
            const double x = 2.0 * M_PI * i / angles;
            const SpaceTimeQuadratic q = spacetime_quadratic(snapshot(flow, t, x));
            Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(q.matrix, q.metric);
            if (solver.info() != Eigen::Success) throw SolverError("space-time eigenproblem did not converge");
            const double lowest = solver.eigenvalues()(0);
            if (lowest < worst) {
                worst = lowest;
                const Eigen::VectorXd vec = solver.eigenvectors().col(0);
                std::vector<double> components(vec.data(), vec.data() + vec.size());
                report.witness = {{"t", t}, {"x", x}, {"eigenvector", components}};
            }
        }
    }
    report.worst_margin = worst;
    report.tolerance = tol;
    assign_verdict(report);
    return report;
}

double warped_fiber_value(const GeometrySnapshot& snap, double k, double fiber_ricci_lower) {
    if (!(k > 0.0)) throw ParameterError("fiber dimension must be positive");
    if (!snap.weighted) throw ContractError("warped product needs a weighted snapshot");
    const WeightedFields& w = *snap.weighted;
    const Eigen::MatrixXd g_inv = snap.g.inverse();
    const double lap_U = (g_inv * w.hess_U).trace();
    const double grad_U_sq = w.dU.dot(g_inv * w.dU);
    const double fiber_curvature = fiber_ricci_lower * std::exp(4.0 * w.U / k);
    const double warping = (w.dt_U - lap_U + grad_U_sq) / k;
    const double scalar = w.dt_S_U - w.lap_U_S_U - 2.0 * snap.norm_S_sq - (2.0 / k) * w.dt_U * w.dt_U;
    return 2.0 * (fiber_curvature - warping) + scalar;
}

CheckReport warped_product_check(const GeometrySnapshot& snap, const WarpedProductParams& params, double tol) {
    const double k = params.fiber_dimension;
    if (!(k >= 1.0)) throw ParameterError("warped product requires a fiber dimension k >= 1");
    if (!snap.weighted) throw ContractError("warped product needs a weighted snapshot");
    const WeightedFields& w = *snap.weighted;
    const double N = snap.dim + k;

    CheckReport report;
    report.check_id = "warped_product";
    report.family = "weighted";
    report.parameters = {{"fiber_dimension", k}, {"fiber_ricci_lower", params.fiber_ricci_lower}};

    double residual = 0.0;
    for (const Eigen::VectorXd& X : params.horizontal_samples) {
        const double direct = evaluate_D_weighted(snap, X, N);
        const double drift = w.dU.dot(X) - w.dt_U;
        const double assembled = evaluate_D_weighted(snap, X, kInfiniteDimension) - (2.0 / k) * drift * drift;
        residual = std::max(residual, std::abs(direct - assembled));
    }
    const DMinimum horizontal = minimize_D_weighted(snap, N);
    const double fiber = warped_fiber_value(snap, k, params.fiber_ricci_lower);
    report.witness = {{"horizontal_residual", residual},
                      {"horizontal_min", horizontal.unbounded ? -std::numeric_limits<double>::max()
                                                              : horizontal.min_value},
                      {"horizontal_unbounded", horizontal.unbounded},
                      {"fiber_value", fiber}};
    report.worst_margin = horizontal.unbounded ? -std::numeric_limits<double>::max()
                                               : std::min(horizontal.min_value, fiber);
    report.tolerance = tol;
    assign_verdict(report);
    if (fiber < -tol && params.fiber_ricci_lower > 0.0)
        report.notes.push_back("fiber sign can be restored by replacing U with U + C for a large constant C");
    return report;
}

}  // namespace dflow
