#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "dflow/errors.hpp"
#include "dflow/functionals.hpp"
#include "dflow/transport.hpp"
#include "test_util.hpp"

using namespace dflow;
using namespace dflow::test;

namespace {

FlowSpec backward(const FlowSpec& flow, double reference) {
    return flow.with_orientation(TimeOrientation::backward, reference);
}

/// Wrapped Gaussian of width sigma centred at 1.0 on the unit-speed circle.
double wrapped_gaussian(double x, double sigma) {
    double sum = 0.0;
    for (int k = -6; k <= 6; ++k) {
        const double y = x - 1.0 - 2 * pi * k;
        sum += std::exp(-y * y / (2 * sigma * sigma));
    }
    return sum;
}

DiscreteMeasure sampled(GridPtr grid, const FlowSpec& flow, double t, const std::function<double(double)>& density) {
    std::vector<double> rho(grid->size());
    for (int i = 0; i < grid->size(); ++i) rho[i] = density(grid->node(i));
    return DiscreteMeasure::from_density(grid, flow, t, rho);
}

}  // namespace

TEST_CASE("F examples") {
    GridPtr grid = SpatialGrid::circle(32);
    FlowSpec flat = static_circle();
    CHECK(std::abs(fisher_F(DiscreteMeasure::uniform(grid, flat, 0.5), flat)) < 1e-12);

    for (int n : {2, 3}) {
        FlowSpec sphere = FlowSpec::round_sphere(n, fn("1 + t^2"), 0, 1);
        const double t = 0.4;
        const double expected = -0.5 * n * (2 * t) / (1 + t * t);
        CHECK(fisher_F(DiscreteMeasure::uniform(SpatialGrid::single_cell(), sphere, t), sphere) ==
              doctest::Approx(expected).epsilon(1e-14));
    }

    DiscreteMeasure with_zero = DiscreteMeasure::dirac(grid, flat, 0.5, 3);
    CHECK_THROWS_AS(fisher_F(with_zero, flat), ContractError);
}

TEST_CASE("F of a wrapped Gaussian converges to the spectral oracle at second order") {
    const double sigma = 0.6;
    // Oracle: int (rho')^2 / rho for the normalised density on a 4096-point periodic
    // trapezoid rule, which is spectrally accurate for this smooth periodic integrand.
    const int m = 4096;
    double mass = 0.0, fisher = 0.0;
    for (int k = 0; k < m; ++k) {
        const double x = 2 * pi * k / m;
        double value = 0.0, slope = 0.0;
        for (int j = -6; j <= 6; ++j) {
            const double y = x - 1.0 - 2 * pi * j;
            const double g = std::exp(-y * y / (2 * sigma * sigma));
            value += g;
            slope += -y / (sigma * sigma) * g;
        }
        mass += value * 2 * pi / m;
        fisher += slope * slope / value * 2 * pi / m;
    }
    const double oracle = fisher / mass;
    FlowSpec flat = static_circle();
    std::vector<double> errors;
    for (int n : {32, 64, 128}) {
        GridPtr grid = SpatialGrid::circle(n);
        const DiscreteMeasure mu = sampled(grid, flat, 0.0, [&](double x) { return wrapped_gaussian(x, sigma); });
        errors.push_back(std::abs(fisher_F(mu, flat) - oracle));
    }
    CHECK(errors[0] / errors[1] == doctest::Approx(4.0).epsilon(0.15));
    CHECK(errors[1] / errors[2] == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("W examples") {
    GridPtr grid = SpatialGrid::circle(32);
    FlowSpec flat = static_circle();
    const DiscreteMeasure uniform = DiscreteMeasure::uniform(grid, flat, 0.0);
    const double f = std::log(2 * pi) - 0.5 * std::log(4 * pi);
    CHECK(perelman_W(uniform, flat, 1.0) == doctest::Approx(f - 1.0).epsilon(1e-13));
    CHECK_THROWS_AS(perelman_W(uniform, flat, 0.0), DomainError);

    FlowSpec bumpy = FlowSpec::circle_conformal(fn("0.2*cos(theta) + 0.3*t*sin(2*theta)"), 0, 1);
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> unit(0.3, 1.5);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> rho(32);
        for (double& r : rho) r = unit(rng);
        const DiscreteMeasure mu = DiscreteMeasure::from_density(grid, bumpy, 0.4, rho);
        const double tau = 0.3 + 0.2 * trial;
        const double identity = tau * fisher_F(mu, bumpy) - entropy(mu) - 0.5 * std::log(4 * pi * tau) - 1.0;
        CHECK(std::abs(perelman_W(mu, bumpy, tau) - identity) <= 1e-10);
    }

    SUBCASE("scaling invariance on static spheres") {
        for (double a : {0.5, 2.0, 7.0}) {
            FlowSpec unit_sphere = FlowSpec::static_manifold(3, 1.0, 0, 1);
            FlowSpec scaled = FlowSpec::static_manifold(3, 1.0 / a, 0, 1);
            const double tau = 0.8;
            const double base = perelman_W(DiscreteMeasure::uniform(SpatialGrid::single_cell(), unit_sphere, 0), unit_sphere, tau);
            const double moved = perelman_W(DiscreteMeasure::uniform(SpatialGrid::single_cell(), scaled, 0), scaled, a * tau);
            CHECK(moved == doctest::Approx(base).epsilon(1e-13));
        }
    }
}

TEST_CASE("round-sphere F trace matches the closed-form derivative") {
    for (int n : {2, 3}) {
        FlowSpec sphere = backward(FlowSpec::round_sphere(n, fn("1 + t^2"), 0, 1), 1.0);
        const double dt = 1e-4;
        FunctionalTrace trace = monotonicity_trace(DiscreteMeasure::uniform(SpatialGrid::single_cell(), sphere, 1.0),
                                                   sphere, 0.0, 1.0, FunctionalKind::F, 10000);
        const auto d = trace.derivative();
        double worst = 0.0;
        for (int k = 1; k < 10000; k += 199) {
            const double t = 1.0 - trace.times[k];
            const double expected = -round_sphere_F_derivative(sphere, t);
            worst = std::max(worst, std::abs(d[k] - expected) / std::max(1.0, std::abs(expected)));
            CHECK(dt == doctest::Approx(trace.times[k + 1] - trace.times[k]));
        }
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("F increases on the D-violating sphere where the closed form predicts") {
    FlowSpec sphere = backward(FlowSpec::round_sphere(2, fn("1 + t^2"), 0, 1), 1.0);
    FunctionalTrace trace = monotonicity_trace(DiscreteMeasure::uniform(SpatialGrid::single_cell(), sphere, 1.0),
                                               sphere, 0.0, 0.9, FunctionalKind::F, 90);
    for (std::size_t k = 0; k + 1 < trace.values.size(); ++k) {
        const double t_mid = 1.0 - 0.5 * (trace.times[k] + trace.times[k + 1]);
        const double predicted = -round_sphere_F_derivative(sphere, t_mid);
        const double observed = trace.values[k + 1] - trace.values[k];
        CHECK((predicted > 0) == (observed > 0));
    }
    CHECK(trace.max_increase() > 0.0);
}

TEST_CASE("F and W are non-increasing on the expanding circle") {
    FlowSpec flow = backward(expanding_circle(0, 1), 1.0);
    auto density = [](double x) { return 1.0 + 0.6 * std::sin(x) + 0.3 * std::cos(3 * x); };
    std::vector<double> tolerances, increases_F, increases_W;
    std::vector<FunctionalTrace> f_traces, w_traces;
    for (int n : {64, 128}) {
        GridPtr grid = SpatialGrid::circle(n);
        const DiscreteMeasure mu = sampled(grid, flow, 1.0 - 0.2, density);
        const int steps = static_cast<int>(std::ceil(0.6 / grid->spacing()));
        f_traces.push_back(monotonicity_trace(mu, flow, 0.2, 0.8, FunctionalKind::F, (n / 64) * 7));
        w_traces.push_back(monotonicity_trace(mu, flow, 0.2, 0.8, FunctionalKind::W, (n / 64) * 7));
        (void)steps;
    }
    const double tol_F = calibrated_tolerance(f_traces[0], f_traces[1]);
    const double tol_W = calibrated_tolerance(w_traces[0], w_traces[1]);
    CHECK(f_traces[1].max_increase() <= tol_F);
    CHECK(w_traces[1].max_increase() <= tol_W);

    // W identity at every sample.
    GridPtr grid = SpatialGrid::circle(64);
    FunctionalTrace entropy_trace =
        monotonicity_trace(sampled(grid, flow, 0.8, density), flow, 0.2, 0.8, FunctionalKind::entropy, 7);
    for (std::size_t k = 0; k < 8; ++k) {
        const double tau = f_traces[0].times[k];
        const double identity =
            tau * f_traces[0].values[k] - entropy_trace.values[k] - 0.5 * std::log(4 * pi * tau) - 1.0;
        CHECK(std::abs(w_traces[0].values[k] - identity) <= 1e-10);
    }
}

TEST_CASE("tau dW/dtau matches d/dtau (tau^2 F - n tau / 2) up to discretisation error") {
    FlowSpec flow = backward(expanding_circle(0, 1), 1.0);
    GridPtr grid = SpatialGrid::circle(64);
    auto density = [](double x) { return 1.0 + 0.5 * std::cos(x); };
    std::vector<double> defects;
    for (int steps : {20, 40}) {
        const DiscreteMeasure mu = sampled(grid, flow, 0.7, density);
        const auto F = monotonicity_trace(mu, flow, 0.3, 0.7, FunctionalKind::F, steps);
        const auto W = monotonicity_trace(mu, flow, 0.3, 0.7, FunctionalKind::W, steps);
        double worst = 0.0;
        for (int k = 0; k < steps; ++k) {
            const double a = F.times[k], b = F.times[k + 1], mid = 0.5 * (a + b);
            const double lhs = mid * (W.values[k + 1] - W.values[k]) / (b - a);
            const double rhs = (b * b * F.values[k + 1] - 0.5 * b - a * a * F.values[k] + 0.5 * a) / (b - a);
            worst = std::max(worst, std::abs(lhs - rhs));
        }
        defects.push_back(worst);
    }
    CHECK(defects[0] < 1e-3);
    CHECK(defects[1] < 1e-3);
}

TEST_CASE("F is non-increasing along the heat flow on the static flat circle") {
    FlowSpec flat = backward(static_circle(0, 1), 1.0);
    GridPtr grid = SpatialGrid::circle(64);
    const DiscreteMeasure mu =
        sampled(grid, flat, 1.0, [](double x) { return 1.0 + 0.8 * std::cos(x) + 0.1 * std::sin(4 * x); });
    const auto trace = monotonicity_trace(mu, flat, 0.0, 1.0, FunctionalKind::F, 20);
    CHECK(trace.max_increase() <= 1e-12);
}

TEST_CASE("distance trace between two conjugate heat flows") {
    FlowSpec flat = backward(static_circle(0, 1), 1.0);
    GridPtr grid = SpatialGrid::circle(32);
    const DiscreteMeasure a = sampled(grid, flat, 1.0, [](double x) { return 1.0 + 0.8 * std::cos(x); });
    const DiscreteMeasure b = sampled(grid, flat, 1.0, [](double x) { return 1.0 + 0.8 * std::sin(x); });
    TraceOptions options;
    options.companion = b;
    const auto trace = monotonicity_trace(a, flat, 0.0, 0.5, FunctionalKind::wl_distance, 10, options);
    CHECK(trace.values.front() > 0.0);
    CHECK(trace.max_increase() <= 1e-12);
    CHECK_THROWS_AS(monotonicity_trace(a, flat, 0.0, 0.5, FunctionalKind::wl_distance, 10), ParameterError);

    std::ostringstream out;
    write_trace_csv(out, trace);
    CHECK(out.str().rfind("tau,value,derivative\n", 0) == 0);
}
