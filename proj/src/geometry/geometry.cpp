#include "dflow/geometry.hpp"

#include <cmath>

#include "dflow/errors.hpp"

namespace dflow {

namespace {

GeometrySnapshot blank(const FlowSpec& flow, double t, double x) {
    const int n = flow.dimension;
    GeometrySnapshot s;
    s.family = flow.family;
    s.dim = n;
    s.t = t;
    s.x = x;
    s.g = Eigen::MatrixXd::Identity(n, n);
    s.S_tensor = Eigen::MatrixXd::Zero(n, n);
    s.ric = Eigen::MatrixXd::Zero(n, n);
    s.dS = Eigen::VectorXd::Zero(n);
    s.grad_S = Eigen::VectorXd::Zero(n);
    s.div_S = Eigen::VectorXd::Zero(n);
    return s;
}

void sphere(const FlowSpec& flow, GeometrySnapshot& s) {
    const int n = flow.dimension;
    Jet r = flow.radius_sq(s.t);
    if (!(r.v > 0)) throw InvalidFlowError("round_sphere: r^2 must be positive");
    s.g *= r.v;
    s.S_tensor = Eigen::MatrixXd::Identity(n, n) * (-0.5 * r.t);
    s.S = -0.5 * n * r.t / r.v;
    s.ric = Eigen::MatrixXd::Identity(n, n) * double(n - 1);
    s.dt_S = -0.5 * n * (r.tt / r.v - r.t * r.t / (r.v * r.v));
    s.norm_S_sq = 0.25 * n * r.t * r.t / (r.v * r.v);
}

void torus(const FlowSpec& flow, GeometrySnapshot& s) {
    for (int i = 0; i < flow.dimension; ++i) {
        Jet a = flow.scale_sq[i](s.t);
        if (!(a.v > 0)) throw InvalidFlowError("flat_torus: a_i^2 must be positive");
        s.g(i, i) = a.v;
        s.S_tensor(i, i) = -0.5 * a.t;
        s.S += -0.5 * a.t / a.v;
        s.dt_S += -0.5 * (a.tt / a.v - a.t * a.t / (a.v * a.v));
        s.norm_S_sq += 0.25 * a.t * a.t / (a.v * a.v);
    }
}

void circle(const FlowSpec& flow, GeometrySnapshot& s) {
    Jet u = flow.conformal(s.t, s.x);
    const double e2u = std::exp(2.0 * u.v);
    if (!(e2u > 0) || !std::isfinite(e2u)) throw InvalidFlowError("circle: exp(2u) must be finite and positive");
    s.g(0, 0) = e2u;
    s.S_tensor(0, 0) = -u.t * e2u;
    s.S = -u.t;
    s.dS(0) = -u.tx;
    s.grad_S(0) = -u.tx / e2u;
    s.div_S(0) = -u.tx;
    s.dt_S = -u.tt;
    s.lap_S = (-u.txx + u.x * u.tx) / e2u;
    s.norm_S_sq = u.t * u.t;
    if (flow.is_weighted()) {
        Jet w = flow.weight(s.t, s.x);
        WeightedFields f;
        f.U = w.v;
        f.dU = Eigen::VectorXd::Constant(1, w.x);
        f.hess_U = Eigen::MatrixXd::Constant(1, 1, w.xx - u.x * w.x);
        f.dt_U = w.t;
        f.S_U = -u.t + w.t;
        const double su_x = -u.tx + w.tx;
        const double su_xx = -u.txx + w.txx;
        f.dS_U = Eigen::VectorXd::Constant(1, su_x);
        f.dt_S_U = -u.tt + w.tt;
        f.lap_U_S_U = (su_xx - u.x * su_x - w.x * su_x) / e2u;
        f.div_U_S = Eigen::VectorXd::Constant(1, -u.tx + u.t * w.x);
        s.weighted = f;
    }
}

}  // namespace

GeometrySnapshot snapshot(const FlowSpec& flow, double t, double x) {
    flow.require_time(t, "snapshot");
    if (!std::isfinite(x)) throw DomainError("snapshot: point must be finite");
    GeometrySnapshot s = blank(flow, t, x);
    switch (flow.family) {
        case FlowFamily::round_sphere: sphere(flow, s); break;
        case FlowFamily::flat_torus: torus(flow, s); break;
        case FlowFamily::circle_conformal:
        case FlowFamily::weighted_circle: circle(flow, s); break;
        case FlowFamily::static_manifold:
            s.ric = Eigen::MatrixXd::Identity(s.dim, s.dim) * (flow.curvature * (s.dim - 1));
            break;
    }
    return s;
}

nlohmann::json snapshot_to_json(const GeometrySnapshot& s, int x_index) {
    auto mat = [](const Eigen::MatrixXd& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (int i = 0; i < m.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
            rows.push_back(row);
        }
        return rows;
    };
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    nlohmann::json j = {{"t", s.t},           {"x_index", x_index},   {"x", s.x},
                        {"family", to_string(s.family)},             {"g", mat(s.g)},
                        {"S_tensor", mat(s.S_tensor)},               {"S", s.S},
                        {"ric", mat(s.ric)},  {"grad_S", vec(s.grad_S)}, {"div_S", vec(s.div_S)},
                        {"dt_S", s.dt_S},     {"lap_S", s.lap_S},     {"norm_S_sq", s.norm_S_sq}};
    if (s.weighted) {
        const auto& w = *s.weighted;
        j["weighted"] = {{"dU", vec(w.dU)},         {"hess_U", mat(w.hess_U)}, {"dt_U", w.dt_U},
                         {"S_U", w.S_U},            {"dS_U", vec(w.dS_U)},     {"dt_S_U", w.dt_S_U},
                         {"lap_U_S_U", w.lap_U_S_U}, {"div_U_S", vec(w.div_U_S)}};
    }
    return j;
}

DQuadratic d_decomposition(const GeometrySnapshot& s) {
    DQuadratic d;
    d.c = s.dt_S - s.lap_S - 2.0 * s.norm_S_sq;
    d.l = 4.0 * s.div_S - 2.0 * (s.g * s.grad_S);
    d.q = 2.0 * (s.ric - s.S_tensor);
    return d;
}

double evaluate_D(const GeometrySnapshot& s, const Eigen::VectorXd& X) {
    if (X.size() != s.dim) throw ShapeError("evaluate_D: vector has dimension " + std::to_string(X.size()) +
                                            ", expected " + std::to_string(s.dim));
    return d_decomposition(s)(X);
}

DQuadratic d_weighted_decomposition(const GeometrySnapshot& s, double N) {
    if (!s.weighted) throw PreconditionError("weighted quantities requested on an unweighted snapshot");
    if (std::isnan(N) || N < s.dim) throw ParameterError("effective dimension N must satisfy N >= dim");
    const auto& w = *s.weighted;
    DQuadratic d;
    d.c = w.dt_S_U - w.lap_U_S_U - 2.0 * s.norm_S_sq;
    d.l = 4.0 * w.div_U_S - 2.0 * w.dS_U;
    d.q = 2.0 * (s.ric + w.hess_U - s.S_tensor);
    if (std::isfinite(N)) {
        if (N == s.dim) throw ParameterError("N equal to dim has no finite quadratic form");
        const double k = N - s.dim;
        d.c -= 2.0 * w.dt_U * w.dt_U / k;
        d.l += 4.0 * w.dt_U * w.dU / k;
        d.q -= 2.0 * w.dU * w.dU.transpose() / k;
    }
    return d;
}

double evaluate_D_weighted(const GeometrySnapshot& s, const Eigen::VectorXd& X, double N) {
    if (X.size() != s.dim) throw ShapeError("evaluate_D_weighted: dimension mismatch");
    if (!s.weighted) throw PreconditionError("weighted quantities requested on an unweighted snapshot");
    if (std::isnan(N) || N < s.dim) throw ParameterError("effective dimension N must satisfy N >= dim");
    if (std::isfinite(N) && N == s.dim) {
        const auto& w = *s.weighted;
        const double numerator = w.dU.dot(X) - w.dt_U;
        const double scale = std::max(1.0, std::abs(w.dU.dot(X)) + std::abs(w.dt_U));
        if (std::abs(numerator) > 1e-14 * scale)
            throw ParameterError("division by zero: N = dim with non-vanishing dimensional correction");
        return d_weighted_decomposition(s, kInfiniteDimension)(X);
    }
    return d_weighted_decomposition(s, N)(X);
}

DMinimum minimize_quadratic(const DQuadratic& d, const Eigen::MatrixXd& g) {
    const int n = static_cast<int>(g.rows());
    if (d.q.rows() != n || d.l.size() != n) throw ShapeError("minimize: inconsistent dimensions");
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) throw InvalidFlowError("metric is not positive definite");
    Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd Linv = L.inverse();
    Eigen::MatrixXd qt = Linv * d.q * Linv.transpose();
    qt = 0.5 * (qt + qt.transpose());
    Eigen::VectorXd lt = Linv * d.l;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(qt);
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const Eigen::MatrixXd& E = eig.eigenvectors();
    Eigen::VectorXd b = E.transpose() * lt;
    const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
    const double zero = 1e-10 * scale;

    DMinimum out;
    for (int k = 0; k < n; ++k) {
        if (lambda(k) < -zero) {
            out.unbounded = true;
            out.min_value = -std::numeric_limits<double>::infinity();
            out.descent = Linv.transpose() * E.col(k);
            return out;
        }
    }
    double null_sq = 0.0;
    for (int k = 0; k < n; ++k)
        if (std::abs(lambda(k)) <= zero) null_sq += b(k) * b(k);
    if (std::sqrt(null_sq) > 1e-8 * b.norm()) {
        out.unbounded = true;
        out.min_value = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
        for (int k = 0; k < n; ++k)
            if (std::abs(lambda(k)) <= zero) y(k) = -b(k);
        out.descent = Linv.transpose() * (E * y);
        return out;
    }
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    double value = d.c;
    for (int k = 0; k < n; ++k) {
        if (std::abs(lambda(k)) <= zero) continue;
        y(k) = -0.5 * b(k) / lambda(k);
        value -= 0.25 * b(k) * b(k) / lambda(k);
    }
    out.min_value = value;
    out.argmin = Eigen::VectorXd(Linv.transpose() * (E * y));
    return out;
}

DMinimum minimize_D(const GeometrySnapshot& s) { return minimize_quadratic(d_decomposition(s), s.g); }

DMinimum minimize_D_weighted(const GeometrySnapshot& s, double N) {
    return minimize_quadratic(d_weighted_decomposition(s, N), s.g);
}

SphereClassification classify_sphere_flow(const FlowSpec& flow, int samples) {
    if (flow.family != FlowFamily::round_sphere) throw ParameterError("classify_sphere_flow requires a round_sphere flow");
    if (samples < 2) throw ParameterError("classification needs at least two samples");
    const int n = flow.dimension;
    SphereClassification c;
    c.ricci_margin = c.srf_margin = c.concavity_margin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < samples; ++k) {
        const double t = flow.t_min + (flow.t_max - flow.t_min) * k / (samples - 1);
        Jet r = flow.radius_sq(t);
        const double srf = r.t + 2.0 * (n - 1);
        const double conc = -r.tt;
        if (std::min(srf, conc) < std::min(c.srf_margin, c.concavity_margin)) c.worst_time = t;
        c.ricci_margin = std::min(c.ricci_margin, -std::abs(srf));
        c.srf_margin = std::min(c.srf_margin, srf);
        c.concavity_margin = std::min(c.concavity_margin, conc);
    }
    const double tol = 1e-12;
    c.d_margin = std::min(c.srf_margin, c.concavity_margin);
    c.is_ricci_flow = c.ricci_margin >= -1e-10;
    c.is_srf = c.srf_margin >= -tol;
    c.satisfies_D = c.d_margin >= -tol;
    return c;
}

}  // namespace dflow
