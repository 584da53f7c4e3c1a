#include "dflow/flow.hpp"

#include <cmath>
#include <numbers>

#include "dflow/errors.hpp"

namespace dflow {

struct SmoothFn::Compiled {
    CompiledExpr v, t, tt, x, xx, tx, txx;
};

SmoothFn::SmoothFn() : callable_([](double, double) { return Jet{}; }), description_("0") {}

SmoothFn SmoothFn::constant(double c) {
    SmoothFn f;
    f.callable_ = [c](double, double) { return Jet{c}; };
    f.description_ = std::to_string(c);
    return f;
}

SmoothFn SmoothFn::from_expr(const Expr& e) {
    auto c = std::make_shared<Compiled>();
    Expr et = e.diff(Var::time);
    Expr ex = e.diff(Var::angle);
    Expr etx = et.diff(Var::angle);
    c->v = CompiledExpr(e);
    c->t = CompiledExpr(et);
    c->tt = CompiledExpr(et.diff(Var::time));
    c->x = CompiledExpr(ex);
    c->xx = CompiledExpr(ex.diff(Var::angle));
    c->tx = CompiledExpr(etx);
    c->txx = CompiledExpr(etx.diff(Var::angle));
    SmoothFn f;
    f.callable_ = nullptr;
    f.compiled_ = std::move(c);
    f.angle_dependent_ = e.depends_on(Var::angle);
    f.description_ = e.str();
    return f;
}

SmoothFn SmoothFn::from_string(const std::string& text, double reference_time) {
    std::map<std::string, Expr> bindings;
    bindings.emplace("tau", Expr(reference_time) - Expr::variable(Var::time));
    SmoothFn f = from_expr(Expr::parse(text, bindings));
    f.description_ = text;
    return f;
}

SmoothFn SmoothFn::from_callable(JetFn fn, bool angle_dependent) {
    SmoothFn f;
    f.callable_ = std::move(fn);
    f.angle_dependent_ = angle_dependent;
    f.description_ = "<callable>";
    return f;
}

SmoothFn SmoothFn::time_shifted(double shift) const {
    SmoothFn base = *this;
    SmoothFn f = from_callable([base, shift](double t, double x) { return base(t - shift, x); },
                               angle_dependent_);
    f.description_ = description_ + " shifted by " + std::to_string(shift);
    return f;
}

Jet SmoothFn::operator()(double t, double theta) const {
    if (callable_) return callable_(t, theta);
    const Compiled& c = *compiled_;
    return Jet{c.v(t, theta), c.t(t, theta), c.tt(t, theta), c.x(t, theta),
               c.xx(t, theta), c.tx(t, theta), c.txx(t, theta)};
}

double SmoothFn::value(double t, double theta) const {
    if (callable_) return callable_(t, theta).v;
    return compiled_->v(t, theta);
}

std::string to_string(FlowFamily f) {
    switch (f) {
        case FlowFamily::round_sphere: return "round_sphere";
        case FlowFamily::flat_torus: return "flat_torus";
        case FlowFamily::circle_conformal: return "circle_conformal";
        case FlowFamily::weighted_circle: return "weighted_circle";
        case FlowFamily::static_manifold: return "static_manifold";
    }
    return "unknown";
}

FlowFamily flow_family_from_string(const std::string& name) {
    for (auto f : {FlowFamily::round_sphere, FlowFamily::flat_torus, FlowFamily::circle_conformal,
                   FlowFamily::weighted_circle, FlowFamily::static_manifold})
        if (to_string(f) == name) return f;
    throw ParameterError("unknown family '" + name + "'");
}

namespace {

void check_interval(double t_min, double t_max) {
    if (!(t_min < t_max) || !std::isfinite(t_min) || !std::isfinite(t_max))
        throw ParameterError("time interval must satisfy t_min < t_max");
}

}  // namespace

FlowSpec FlowSpec::round_sphere(int n, SmoothFn r_sq, double t_min, double t_max) {
    if (n < 1) throw ParameterError("sphere dimension must be positive");
    check_interval(t_min, t_max);
    FlowSpec f;
    f.family = FlowFamily::round_sphere;
    f.dimension = n;
    f.t_min = t_min;
    f.t_max = t_max;
    f.radius_sq = std::move(r_sq);
    return f;
}

FlowSpec FlowSpec::flat_torus(std::vector<SmoothFn> a_sq, double t_min, double t_max) {
    if (a_sq.empty()) throw ParameterError("torus needs at least one factor");
    check_interval(t_min, t_max);
    FlowSpec f;
    f.family = FlowFamily::flat_torus;
    f.dimension = static_cast<int>(a_sq.size());
    f.t_min = t_min;
    f.t_max = t_max;
    f.scale_sq = std::move(a_sq);
    return f;
}

FlowSpec FlowSpec::circle_conformal(SmoothFn u, double t_min, double t_max) {
    check_interval(t_min, t_max);
    FlowSpec f;
    f.family = FlowFamily::circle_conformal;
    f.dimension = 1;
    f.t_min = t_min;
    f.t_max = t_max;
    f.conformal = std::move(u);
    return f;
}

FlowSpec FlowSpec::weighted_circle(SmoothFn u, SmoothFn weight, double t_min, double t_max) {
    FlowSpec f = circle_conformal(std::move(u), t_min, t_max);
    f.family = FlowFamily::weighted_circle;
    f.weight = std::move(weight);
    return f;
}

FlowSpec FlowSpec::static_manifold(int n, double curvature, double t_min, double t_max) {
    if (n < 1) throw ParameterError("dimension must be positive");
    if (curvature < 0) throw ParameterError("static manifold curvature must be non-negative (compact model)");
    check_interval(t_min, t_max);
    FlowSpec f;
    f.family = FlowFamily::static_manifold;
    f.dimension = n;
    f.t_min = t_min;
    f.t_max = t_max;
    f.curvature = curvature;
    return f;
}

FlowSpec FlowSpec::with_orientation(TimeOrientation o, double reference) const {
    FlowSpec f = *this;
    f.orientation = o;
    f.reference_time = reference;
    return f;
}

FlowSpec FlowSpec::shifted(double shift) const {
    FlowSpec f = *this;
    f.t_min += shift;
    f.t_max += shift;
    f.reference_time += shift;
    f.radius_sq = radius_sq.time_shifted(shift);
    for (auto& a : f.scale_sq) a = a.time_shifted(shift);
    f.conformal = conformal.time_shifted(shift);
    f.weight = weight.time_shifted(shift);
    return f;
}

bool FlowSpec::homogeneous() const { return !is_circle(); }

bool FlowSpec::spatially_constant() const {
    if (homogeneous()) return true;
    return !conformal.depends_on_angle() && !(is_weighted() && weight.depends_on_angle());
}

bool FlowSpec::contains(double t, double slack) const {
    return t >= t_min - slack && t <= t_max + slack;
}

void FlowSpec::require_time(double t, const char* what) const {
    if (!std::isfinite(t) || !contains(t))
        throw DomainError(std::string(what) + ": time " + std::to_string(t) + " outside [" +
                          std::to_string(t_min) + ", " + std::to_string(t_max) + "]");
}

double FlowSpec::to_forward(double natural) const {
    return orientation == TimeOrientation::forward ? natural : reference_time - natural;
}

double FlowSpec::to_natural(double forward) const {
    return orientation == TimeOrientation::forward ? forward : reference_time - forward;
}

namespace {

double unit_sphere_volume(int n) {
    return 2.0 * std::pow(std::numbers::pi, 0.5 * (n + 1)) / std::tgamma(0.5 * (n + 1));
}

}  // namespace

double FlowSpec::volume(double t) const {
    require_time(t, "volume");
    const double two_pi = 2.0 * std::numbers::pi;
    switch (family) {
        case FlowFamily::round_sphere:
            return unit_sphere_volume(dimension) * std::pow(radius_sq.value(t), 0.5 * dimension);
        case FlowFamily::flat_torus: {
            double v = 1.0;
            for (const auto& a : scale_sq) v *= two_pi * std::sqrt(a.value(t));
            return v;
        }
        case FlowFamily::static_manifold:
            if (curvature > 0) return unit_sphere_volume(dimension) * std::pow(curvature, -0.5 * dimension);
            return std::pow(two_pi, dimension);
        case FlowFamily::circle_conformal:
        case FlowFamily::weighted_circle: {
            const int m = 4096;
            double s = 0.0;
            for (int i = 0; i < m; ++i) s += std::exp(conformal.value(t, two_pi * i / m));
            return two_pi * s / m;
        }
    }
    return 0.0;
}

namespace {

void check_jet(const SmoothFn& f, double t, double x, double h, const std::string& name) {
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); };
    Jet j = f(t, x);
    Jet tp = f(t + h, x), tm = f(t - h, x), xp = f(t, x + h), xm = f(t, x - h);
    const double tol = 1e-6;
    auto fail = [&](const char* what) {
        throw InvalidFlowError(name + ": derivative '" + what + "' disagrees with central differences at t=" +
                               std::to_string(t) + ", theta=" + std::to_string(x));
    };
    if (rel(j.t, (tp.v - tm.v) / (2 * h)) > tol) fail("d/dt");
    if (rel(j.tt, (tp.t - tm.t) / (2 * h)) > tol) fail("d2/dt2");
    if (rel(j.x, (xp.v - xm.v) / (2 * h)) > tol) fail("d/dtheta");
    if (rel(j.xx, (xp.x - xm.x) / (2 * h)) > tol) fail("d2/dtheta2");
    if (rel(j.tx, (xp.t - xm.t) / (2 * h)) > tol) fail("d2/dtdtheta");
    if (rel(j.txx, (xp.tx - xm.tx) / (2 * h)) > tol) fail("d3/dtdtheta2");
}

}  // namespace

void validate_flow(const FlowSpec& flow, int time_samples, int angle_samples) {
    const double span = flow.t_max - flow.t_min;
    const double h = 1e-5 * std::max(1.0, span);
    for (int k = 0; k < time_samples; ++k) {
        double t = flow.t_min + span * (k + 0.5) / time_samples;
        double lo = std::max(flow.t_min, t - h), hi = std::min(flow.t_max, t + h);
        double hh = 0.5 * (hi - lo);
        t = 0.5 * (lo + hi);
        for (double tt : {flow.t_min, flow.t_max, t}) {
            switch (flow.family) {
                case FlowFamily::round_sphere:
                    if (!(flow.radius_sq.value(tt) > 0))
                        throw InvalidFlowError("round_sphere: r^2 must be positive on the time interval");
                    break;
                case FlowFamily::flat_torus:
                    for (const auto& a : flow.scale_sq)
                        if (!(a.value(tt) > 0)) throw InvalidFlowError("flat_torus: a_i^2 must be positive");
                    break;
                case FlowFamily::circle_conformal:
                case FlowFamily::weighted_circle:
                    for (int a = 0; a < angle_samples; ++a)
                        if (!std::isfinite(flow.conformal.value(tt, 2 * std::numbers::pi * a / angle_samples)))
                            throw InvalidFlowError("circle: exp(2u) must be finite and positive");
                    break;
                default: break;
            }
        }
        switch (flow.family) {
            case FlowFamily::round_sphere: check_jet(flow.radius_sq, t, 0.0, hh, "r^2"); break;
            case FlowFamily::flat_torus:
                for (const auto& a : flow.scale_sq) check_jet(a, t, 0.0, hh, "a^2");
                break;
            case FlowFamily::circle_conformal:
            case FlowFamily::weighted_circle:
                for (int a = 0; a < angle_samples; ++a) {
                    double x = 2 * std::numbers::pi * (a + 0.3) / angle_samples;
                    check_jet(flow.conformal, t, x, hh, "u");
                    if (flow.is_weighted()) check_jet(flow.weight, t, x, hh, "U");
                }
                break;
            default: break;
        }
    }
}

}  // namespace dflow
