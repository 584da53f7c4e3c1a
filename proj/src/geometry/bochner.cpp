#include <cmath>

#include "dflow/errors.hpp"
#include "dflow/geometry.hpp"
#include "dflow/pde.hpp"

namespace dflow {

namespace {

struct Bracket {
    const FlowSpec& flow;
    BochnerFamily family;
    double shift;

    double backward_time(double t) const { return flow.reference_time - t + shift; }

    std::vector<double> eval(const SpatialGrid& grid, const std::vector<double>& v, double t) const {
        const int n = grid.size();
        const double h = grid.spacing();
        const bool weighted = family == BochnerFamily::weighted_L0;
        auto parts = laplacian_parts(grid, flow, t, weighted);
        auto lap = parts.stiffness.apply(v);
        std::vector<double> b(n);
        for (int i = 0; i < n; ++i) {
            lap[i] /= parts.mass[i];
            const double x = grid.node(i);
            const double u = flow.conformal.value(t, x);
            const double vx = (v[grid.wrap(i + 1)] - v[grid.wrap(i - 1)]) / (2 * h);
            const double grad_sq = std::exp(-2 * u) * vx * vx;
            GeometrySnapshot snap = snapshot(flow, t, x);
            switch (family) {
                case BochnerFamily::L0: b[i] = grad_sq - 2 * lap[i] - snap.S; break;
                case BochnerFamily::weighted_L0: b[i] = grad_sq - 2 * lap[i] - snap.weighted->S_U; break;
                case BochnerFamily::Lminus: {
                    const double s = backward_time(t);
                    b[i] = grad_sq - 2 * s * lap[i] - s * s * snap.S + 0.5 * flow.dimension * s;
                    break;
                }
            }
        }
        return b;
    }
};

ScalarField homogeneous_residual(const FlowSpec& flow, const ScalarField& v, BochnerFamily family, double shift) {
    GeometrySnapshot snap = snapshot(flow, v.time);
    DQuadratic d = d_decomposition(snap);
    const int n = flow.dimension;
    ScalarField out = ScalarField::constant(v.grid, v.time, 0.0);
    if (family == BochnerFamily::Lminus) {
        const double s = flow.reference_time - v.time + shift;
        const double lhs = 2 * s * snap.S - s * s * snap.dt_S - 0.5 * n;
        Eigen::MatrixXd a = s * snap.S_tensor - 0.5 * snap.g;
        Eigen::MatrixXd gi = snap.g.inverse();
        const double norm = (gi * a * gi * a).trace();
        out.values[0] = lhs - (-2 * norm - s * s * d.c);
    } else {
        const double lhs = -snap.dt_S;
        out.values[0] = lhs - (-2 * snap.norm_S_sq - d.c);
    }
    return out;
}

}  // namespace

ScalarField bochner_residual(const FlowSpec& flow, const ScalarField& v, BochnerFamily family,
                             const BochnerParams& params) {
    v.check();
    if (v.tag != FieldTag::heat_slice || !v.history)
        throw ContractError("bochner_residual: field is not tagged as a heat-flow slice");
    const bool weighted = family == BochnerFamily::weighted_L0;
    if (weighted && (!flow.is_weighted() || !v.history->weighted))
        throw ContractError("bochner_residual: weighted form needs a weighted heat slice of a weighted flow");
    if (family == BochnerFamily::Lminus && !(flow.reference_time - v.time + params.shift > 0))
        throw ParameterError("bochner_residual: shifted backward time must be positive");
    if (flow.homogeneous()) return homogeneous_residual(flow, v, family, params.shift);

    const SpatialGrid& grid = *v.grid;
    const int n = grid.size();
    const double h = grid.spacing();
    const double dt = v.history->dt;
    const double t = v.time;
    Bracket bracket{flow, family, params.shift};
    auto b_now = bracket.eval(grid, v.values, t);
    auto b_before = bracket.eval(grid, v.history->before, t - dt);
    auto b_after = bracket.eval(grid, v.history->after, t + dt);
    auto parts = laplacian_parts(grid, flow, t, weighted);
    auto lap_b = parts.stiffness.apply(b_now);

    ScalarField out = ScalarField::constant(v.grid, t, 0.0);
    for (int i = 0; i < n; ++i) {
        const double lhs = (b_after[i] - b_before[i]) / (2 * dt) - lap_b[i] / parts.mass[i];
        const double x = grid.node(i);
        GeometrySnapshot snap = snapshot(flow, t, x);
        Jet u = flow.conformal(t, x);
        const double e2u = snap.g(0, 0);
        const double vx = (v.values[grid.wrap(i + 1)] - v.values[grid.wrap(i - 1)]) / (2 * h);
        const double vxx = (v.values[grid.wrap(i + 1)] - 2 * v.values[i] + v.values[grid.wrap(i - 1)]) / (h * h);
        const double hess = vxx - u.x * vx;
        Eigen::VectorXd grad = Eigen::VectorXd::Constant(1, vx / e2u);
        double rhs = 0.0;
        switch (family) {
            case BochnerFamily::L0: {
                const double a = hess + snap.S_tensor(0, 0);
                rhs = -2 * a * a / (e2u * e2u) - evaluate_D(snap, grad);
                break;
            }
            case BochnerFamily::weighted_L0: {
                const double a = hess + snap.S_tensor(0, 0);
                rhs = -2 * a * a / (e2u * e2u) - evaluate_D_weighted(snap, grad, kInfiniteDimension);
                break;
            }
            case BochnerFamily::Lminus: {
                const double s = bracket.backward_time(t);
                const double a = s * snap.S_tensor(0, 0) - 0.5 * e2u + hess;
                rhs = -2 * a * a / (e2u * e2u) - s * s * evaluate_D(snap, grad / s);
                break;
            }
        }
        out.values[i] = lhs - rhs;
    }
    return out;
}

}  // namespace dflow
