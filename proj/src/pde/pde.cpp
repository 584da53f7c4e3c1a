#include "dflow/pde.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "dflow/errors.hpp"

namespace dflow {

std::vector<double> CyclicTridiagonal::apply(const std::vector<double>& x) const {
    const int n = static_cast<int>(diag.size());
    std::vector<double> y(n);
    if (n == 1) {
        y[0] = diag[0] * x[0];
        return y;
    }
    for (int i = 0; i < n; ++i) {
        const int ip = (i + 1) % n, im = (i + n - 1) % n;
        y[i] = diag[i] * x[i] + upper[i] * x[ip] + upper[im] * x[im];
    }
    return y;
}

namespace {

// Thomas algorithm for a symmetric tridiagonal system with modified end entries.
void thomas(const std::vector<double>& sub, const std::vector<double>& d, const std::vector<double>& sup,
            std::vector<double>& x) {
    const int n = static_cast<int>(d.size());
    std::vector<double> cp(n), dp(n);
    cp[0] = sup[0] / d[0];
    dp[0] = x[0] / d[0];
    for (int i = 1; i < n; ++i) {
        const double m = d[i] - sub[i] * cp[i - 1];
        cp[i] = i + 1 < n ? sup[i] / m : 0.0;
        dp[i] = (x[i] - sub[i] * dp[i - 1]) / m;
    }
    x[n - 1] = dp[n - 1];
    for (int i = n - 2; i >= 0; --i) x[i] = dp[i] - cp[i] * x[i + 1];
}

}  // namespace

std::vector<double> CyclicTridiagonal::solve(const std::vector<double>& rhs) const {
    const int n = static_cast<int>(diag.size());
    if (static_cast<int>(rhs.size()) != n) throw ShapeError("tridiagonal solve: size mismatch");
    std::vector<double> x = rhs;
    if (n == 1) {
        x[0] = rhs[0] / diag[0];
    } else {
        const double corner = upper[n - 1];
        const double gamma = -diag[0];
        std::vector<double> sub(n, 0.0), sup(n, 0.0), d = diag;
        for (int i = 0; i + 1 < n; ++i) {
            sup[i] = upper[i];
            sub[i + 1] = upper[i];
        }
        d[0] -= gamma;
        d[n - 1] -= corner * corner / gamma;
        thomas(sub, d, sup, x);
        std::vector<double> z(n, 0.0);
        z[0] = gamma;
        z[n - 1] = corner;
        thomas(sub, d, sup, z);
        const double factor = (x[0] + corner * x[n - 1] / gamma) / (1.0 + z[0] + corner * z[n - 1] / gamma);
        for (int i = 0; i < n; ++i) x[i] -= factor * z[i];
    }
    auto back = apply(x);
    double res = 0.0, scale = 0.0;
    for (int i = 0; i < n; ++i) {
        res = std::max(res, std::abs(back[i] - rhs[i]));
        scale = std::max(scale, std::abs(rhs[i]) + std::abs(diag[i] * x[i]));
    }
    if (!(res <= 1e-12 * std::max(scale, 1e-300)) && res > 0)
        throw SolverError("tridiagonal solve residual " + std::to_string(res) + " exceeds tolerance");
    return x;
}

LaplacianParts laplacian_parts(const SpatialGrid& grid, const FlowSpec& flow, double t, bool weighted) {
    flow.require_time(t, "laplacian");
    LaplacianParts p;
    p.mass = reference_weights(grid, flow, t, weighted);
    const int n = grid.size();
    p.stiffness.diag.assign(n, 0.0);
    p.stiffness.upper.assign(n, 0.0);
    if (grid.is_single_cell()) return p;
    const double h = grid.spacing();
    for (int i = 0; i < n; ++i) {
        const double mid = grid.node(i) + 0.5 * h;
        double w = std::exp(-flow.conformal.value(t, mid)) / h;
        if (weighted) w *= std::exp(-flow.weight.value(t, mid));
        p.stiffness.upper[i] = w;
        p.stiffness.diag[i] -= w;
        p.stiffness.diag[(i + 1) % n] -= w;
    }
    return p;
}

ScalarField laplacian_apply(const ScalarField& field, const FlowSpec& flow, double t, bool weighted) {
    field.check();
    if (std::abs(field.time - t) > 1e-12 * std::max(1.0, std::abs(t)))
        throw ShapeError("laplacian_apply: field time does not match requested time");
    auto parts = laplacian_parts(*field.grid, flow, t, weighted);
    ScalarField out = field;
    out.tag = FieldTag::generic;
    out.history.reset();
    const int n = field.size();
    const auto& f = field.values;
    const auto& w = parts.stiffness.upper;
    for (int i = 0; i < n; ++i) {
        if (n == 1) {
            out.values[i] = 0.0;
            break;
        }
        const int ip = (i + 1) % n, im = (i + n - 1) % n;
        out.values[i] = (w[i] * (f[ip] - f[i]) - w[im] * (f[i] - f[im])) / parts.mass[i];
    }
    return out;
}

double monotone_step_bound(const SpatialGrid& grid, const FlowSpec& flow, double t, bool weighted) {
    if (grid.is_single_cell()) return std::numeric_limits<double>::infinity();
    auto p = laplacian_parts(grid, flow, t, weighted);
    double bound = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid.size(); ++i) bound = std::min(bound, 2.0 * p.mass[i] / (-p.stiffness.diag[i]));
    return bound;
}

namespace {

// Substep schedule on [a, b] respecting the user bound and the monotonicity bound.
std::vector<double> schedule(const SpatialGrid& grid, const FlowSpec& flow, double a, double b,
                             const HeatOptions& opt) {
    std::vector<double> nodes{a};
    if (b <= a) return nodes;
    if (grid.is_single_cell()) {
        nodes.push_back(b);
        return nodes;
    }
    double bound = std::numeric_limits<double>::infinity();
    const int probes = 8;
    for (int k = 0; k <= probes; ++k)
        bound = std::min(bound, monotone_step_bound(grid, flow, a + (b - a) * k / probes, opt.weighted));
    bound *= 0.9;
    if (opt.max_step > 0) bound = std::min(bound, opt.max_step);
    const int steps = std::max(1, static_cast<int>(std::ceil((b - a) / bound - 1e-9)));
    for (int k = 1; k <= steps; ++k) nodes.push_back(k == steps ? b : a + (b - a) * k / steps);
    return nodes;
}

struct Step {
    CyclicTridiagonal implicit;  // M - dt/2 K
    CyclicTridiagonal explicit_;  // M + dt/2 K
};

Step make_step(const SpatialGrid& grid, const FlowSpec& flow, double a, double b, bool weighted) {
    auto p = laplacian_parts(grid, flow, 0.5 * (a + b), weighted);
    const double dt = b - a;
    Step s;
    s.implicit.diag = s.explicit_.diag = p.mass;
    s.implicit.upper.assign(p.mass.size(), 0.0);
    s.explicit_.upper.assign(p.mass.size(), 0.0);
    for (std::size_t i = 0; i < p.mass.size(); ++i) {
        s.implicit.diag[i] -= 0.5 * dt * p.stiffness.diag[i];
        s.explicit_.diag[i] += 0.5 * dt * p.stiffness.diag[i];
        s.implicit.upper[i] = -0.5 * dt * p.stiffness.upper[i];
        s.explicit_.upper[i] = 0.5 * dt * p.stiffness.upper[i];
    }
    return s;
}

std::vector<double> forward(const SpatialGrid& grid, const FlowSpec& flow, std::vector<double> v, double a,
                            double b, const HeatOptions& opt) {
    if (grid.is_single_cell() || b == a) return v;
    auto nodes = schedule(grid, flow, a, b, opt);
    for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
        Step st = make_step(grid, flow, nodes[k], nodes[k + 1], opt.weighted);
        v = st.implicit.solve(st.explicit_.apply(v));
    }
    return v;
}

std::vector<double> backward_mass(const SpatialGrid& grid, const FlowSpec& flow, std::vector<double> p, double t,
                                  double s, const HeatOptions& opt) {
    if (grid.is_single_cell() || t == s) return p;
    auto nodes = schedule(grid, flow, s, t, opt);
    for (std::size_t k = nodes.size() - 1; k > 0; --k) {
        Step st = make_step(grid, flow, nodes[k - 1], nodes[k], opt.weighted);
        p = st.explicit_.apply(st.implicit.solve(p));
    }
    return p;
}

void check_window(const FlowSpec& flow, double s, double t, const char* what) {
    flow.require_time(s, what);
    flow.require_time(t, what);
    if (s > t) throw ParameterError(std::string(what) + ": requires s <= t");
}

}  // namespace

ScalarField heat_propagate(const ScalarField& v_s, const FlowSpec& flow, double s, double t,
                           const HeatOptions& options) {
    v_s.check();
    check_window(flow, s, t, "heat_propagate");
    ScalarField out;
    out.grid = v_s.grid;
    out.time = t;
    out.tag = v_s.tag == FieldTag::density ? FieldTag::generic : v_s.tag;
    out.values = forward(*v_s.grid, flow, v_s.values, s, t, options);
    return out;
}

std::vector<ScalarField> heat_trajectory(const ScalarField& v_s, const FlowSpec& flow, double s,
                                         const std::vector<double>& times, const HeatOptions& options) {
    std::vector<ScalarField> out;
    ScalarField cur = v_s;
    double at = s;
    for (double t : times) {
        if (t < at) throw ParameterError("heat_trajectory: times must be increasing and >= s");
        cur = heat_propagate(cur, flow, at, t, options);
        at = t;
        out.push_back(cur);
    }
    return out;
}

ScalarField heat_slice(const ScalarField& v_s, const FlowSpec& flow, double s, double t, double probe,
                       const HeatOptions& options) {
    if (!(probe > 0)) throw ParameterError("heat_slice: probe step must be positive");
    if (t - probe < s - 1e-14) throw ParameterError("heat_slice: t - probe must not precede s");
    flow.require_time(t + probe, "heat_slice");
    ScalarField before = heat_propagate(v_s, flow, s, t - probe, options);
    ScalarField now = heat_propagate(before, flow, t - probe, t, options);
    ScalarField after = heat_propagate(now, flow, t, t + probe, options);
    auto hist = std::make_shared<HeatHistory>();
    hist->before = std::move(before.values);
    hist->after = std::move(after.values);
    hist->dt = probe;
    hist->weighted = options.weighted;
    now.tag = FieldTag::heat_slice;
    now.history = std::move(hist);
    return now;
}

DiscreteMeasure adjoint_heat_propagate(const DiscreteMeasure& mu_t, const FlowSpec& flow, double t, double s,
                                       const HeatOptions& options) {
    check_window(flow, s, t, "adjoint_heat_propagate");
    if (static_cast<int>(mu_t.mass.size()) != mu_t.grid->size()) throw ShapeError("measure size does not match grid");
    for (double p : mu_t.mass)
        if (!(p >= 0) || !std::isfinite(p)) throw ContractError("adjoint_heat_propagate: negative or non-finite density");
    DiscreteMeasure out;
    out.grid = mu_t.grid;
    out.time = s;
    out.mass = backward_mass(*mu_t.grid, flow, mu_t.mass, t, s, options);
    out.volume = volume_weights(*mu_t.grid, flow, s);
    for (double& p : out.mass)
        if (p < 0 && p > -1e-15) p = 0.0;
    return out;
}

std::vector<DiscreteMeasure> adjoint_trajectory(const DiscreteMeasure& mu_t, const FlowSpec& flow, double t,
                                                const std::vector<double>& times, const HeatOptions& options) {
    std::vector<DiscreteMeasure> out;
    DiscreteMeasure cur = mu_t;
    double at = t;
    for (double s : times) {
        if (s > at) throw ParameterError("adjoint_trajectory: times must be decreasing and <= t");
        cur = adjoint_heat_propagate(cur, flow, at, s, options);
        at = s;
        out.push_back(cur);
    }
    return out;
}

double duality_residual(const ScalarField& v, const DiscreteMeasure& mu, const FlowSpec& flow, double s, double t,
                        const HeatOptions& options) {
    ScalarField pv = heat_propagate(v, flow, s, t, options);
    DiscreteMeasure pmu = adjoint_heat_propagate(mu, flow, t, s, options);
    double lhs = 0.0, rhs = 0.0;
    for (int i = 0; i < v.size(); ++i) {
        lhs += pv.values[i] * mu.mass[i];
        rhs += v.values[i] * pmu.mass[i];
    }
    return std::abs(lhs - rhs);
}

Eigen::MatrixXd heat_matrix(const SpatialGrid& grid, const FlowSpec& flow, double s, double t,
                            const HeatOptions& options) {
    const int n = grid.size();
    Eigen::MatrixXd m(n, n);
    for (int j = 0; j < n; ++j) {
        std::vector<double> e(n, 0.0);
        e[j] = 1.0;
        auto col = forward(grid, flow, e, s, t, options);
        for (int i = 0; i < n; ++i) m(i, j) = col[i];
    }
    return m;
}

Eigen::MatrixXd adjoint_matrix(const SpatialGrid& grid, const FlowSpec& flow, double t, double s,
                               const HeatOptions& options) {
    const int n = grid.size();
    Eigen::MatrixXd m(n, n);
    for (int j = 0; j < n; ++j) {
        std::vector<double> e(n, 0.0);
        e[j] = 1.0;
        auto col = backward_mass(grid, flow, e, t, s, options);
        for (int i = 0; i < n; ++i) m(i, j) = col[i];
    }
    return m;
}

void write_field_csv(std::ostream& out, const std::vector<ScalarField>& series) {
    out << "t,node,value\n";
    out.precision(17);
    for (const auto& f : series)
        for (int i = 0; i < f.size(); ++i) out << f.time << ',' << i << ',' << f.values[i] << '\n';
}

}  // namespace dflow
