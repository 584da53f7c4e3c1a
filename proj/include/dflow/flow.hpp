#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dflow/expr.hpp"

namespace dflow {

/// Value and partial derivatives of a smooth function of (t, theta).
struct Jet {
    double v = 0.0;
    double t = 0.0;
    double tt = 0.0;
    double x = 0.0;
    double xx = 0.0;
    double tx = 0.0;
    double txx = 0.0;
};

/// Smooth function of forward time and angle with exact derivatives.
///
/// Built either from an expression (derivatives generated symbolically) or from
/// a callable returning the full jet. Functions of time alone ignore the angle.
class SmoothFn {
public:
    using JetFn = std::function<Jet(double t, double theta)>;

    SmoothFn();
    static SmoothFn constant(double c);
    static SmoothFn from_expr(const Expr& e);
    static SmoothFn from_string(const std::string& text, double reference_time = 0.0);
    static SmoothFn from_callable(JetFn fn, bool angle_dependent = true);

    /// The function t -> f(t - shift).
    SmoothFn time_shifted(double shift) const;

    Jet operator()(double t, double theta = 0.0) const;
    double value(double t, double theta = 0.0) const;
    bool depends_on_angle() const { return angle_dependent_; }
    const std::string& description() const { return description_; }

private:
    struct Compiled;
    std::shared_ptr<const Compiled> compiled_;
    JetFn callable_;
    bool angle_dependent_ = false;
    std::string description_;
};

enum class FlowFamily { round_sphere, flat_torus, circle_conformal, weighted_circle, static_manifold };
enum class TimeOrientation { forward, backward };

std::string to_string(FlowFamily f);
FlowFamily flow_family_from_string(const std::string& name);

/// A parameterised model flow.
///
/// The time interval is stored in forward time. For backward oriented flows
/// the natural time is tau = reference_time - t.
struct FlowSpec {
    FlowFamily family = FlowFamily::static_manifold;
    int dimension = 1;
    double t_min = 0.0;
    double t_max = 1.0;
    TimeOrientation orientation = TimeOrientation::forward;
    double reference_time = 0.0;

    SmoothFn radius_sq;               ///< round_sphere: r^2(t)
    std::vector<SmoothFn> scale_sq;   ///< flat_torus: a_i(t)^2, one per factor of period 2 pi
    SmoothFn conformal;               ///< circle families: u with g = exp(2u) dtheta^2
    SmoothFn weight;                  ///< weighted_circle: U with measure exp(-U) dV
    double curvature = 0.0;           ///< static_manifold: constant sectional curvature

    static FlowSpec round_sphere(int n, SmoothFn r_sq, double t_min, double t_max);
    static FlowSpec flat_torus(std::vector<SmoothFn> a_sq, double t_min, double t_max);
    static FlowSpec circle_conformal(SmoothFn u, double t_min, double t_max);
    static FlowSpec weighted_circle(SmoothFn u, SmoothFn weight, double t_min, double t_max);
    static FlowSpec static_manifold(int n, double curvature, double t_min, double t_max);

    FlowSpec with_orientation(TimeOrientation o, double reference) const;
    /// Flow translated in time: the result at t + shift equals this flow at t.
    FlowSpec shifted(double shift) const;

    bool homogeneous() const;
    bool is_weighted() const { return family == FlowFamily::weighted_circle; }
    bool is_circle() const {
        return family == FlowFamily::circle_conformal || family == FlowFamily::weighted_circle;
    }
    /// True when metric, S and the weight do not depend on the angle.
    bool spatially_constant() const;
    bool contains(double t, double slack = 1e-12) const;
    void require_time(double t, const char* what) const;

    double to_forward(double natural) const;
    double to_natural(double forward) const;

    /// Total volume of the model manifold at forward time t.
    double volume(double t) const;
};

/// Checks positivity of the metric and that derivative callables agree with
/// central differences; throws InvalidFlowError on failure.
void validate_flow(const FlowSpec& flow, int time_samples = 9, int angle_samples = 8);

}  // namespace dflow
