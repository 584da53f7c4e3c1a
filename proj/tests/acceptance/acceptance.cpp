#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dflow/errors.hpp"
#include "dflow/functionals.hpp"
#include "dflow/geometry.hpp"
#include "dflow/harness.hpp"
#include "dflow/pde.hpp"
#include "dflow/spacetime.hpp"
#include "dflow/transport.hpp"
#include "lp_oracle.hpp"
#include "test_util.hpp"

using namespace dflow;
using namespace dflow::test;

namespace {

/// Outcome of one criterion: pass flag plus the measured quantities.
struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[violated: " << what << "] ";
        }
    }
};

FlowSpec backward(const FlowSpec& flow, double reference) {
    return flow.with_orientation(TimeOrientation::backward, reference);
}

FlowSpec sphere(int n, const std::string& radius_sq, double t_min, double t_max) {
    return FlowSpec::round_sphere(n, fn(radius_sq), t_min, t_max);
}

std::vector<FlowSpec> seeded_flows() {
    return {
        ricci_sphere(2, 0.0, 0.4),
        expanding_circle(0.0, 1.0),
        FlowSpec::static_manifold(2, 1.0, 0.0, 1.0),
        sphere(2, "1 + t^2", 0.0, 1.0),
        FlowSpec::circle_conformal(fn("0.5*log(1 - 0.5*t)"), 0.0, 1.0),
        sphere(3, "1 - t + 0.5*t^2", 0.0, 0.5),
    };
}

/// Smooth positive density 1 + sum of three random Fourier modes of total amplitude below 0.9.
MeasureSpec random_density(std::mt19937& rng) {
    std::uniform_real_distribution<double> coefficient(-0.3, 0.3);
    std::ostringstream text;
    text.precision(17);
    text << "1";
    for (int k = 1; k <= 3; ++k)
        text << " + " << coefficient(rng) << "*cos(" << k << "*theta) + " << coefficient(rng) << "*sin(" << k
             << "*theta)";
    return MeasureSpec::from_density(fn(text.str()));
}

std::vector<double> random_mass(int n, std::mt19937& rng) {
    std::uniform_real_distribution<double> unit(0.05, 1.0);
    std::vector<double> p(n);
    double total = 0.0;
    for (double& v : p) total += (v = unit(rng));
    for (double& v : p) v /= total;
    return p;
}

std::vector<std::vector<double>> to_rows(const Eigen::MatrixXd& c) {
    std::vector<std::vector<double>> rows(c.rows(), std::vector<double>(c.cols()));
    for (int i = 0; i < c.rows(); ++i)
        for (int j = 0; j < c.cols(); ++j) rows[i][j] = c(i, j);
    return rows;
}

std::string describe(const CheckReport& r) {
    std::ostringstream out;
    out << to_string(r.verdict) << " margin=" << r.worst_margin << " tol=" << r.tolerance;
    return out.str();
}

// ---------------------------------------------------------------------------

void c1_ricci_flow_d_vanishes(Outcome& out) {
    std::mt19937 rng(101);
    double worst = 0.0;
    int samples = 0;
    for (int n : {2, 3}) {
        const double t_max = 0.45 / (n - 1);
        const FlowSpec flow = ricci_sphere(n, 0.0, t_max);
        std::uniform_real_distribution<double> time(0.0, t_max);
        for (int k = 0; k < 50; ++k, ++samples) {
            const DMinimum m = minimize_D(snapshot(flow, time(rng)));
            out.require(!m.unbounded, "bounded minimum");
            worst = std::max(worst, std::abs(m.min_value));
        }
    }
    out.require(samples == 100, "100 samples");
    out.require(worst <= 1e-10, "|min D| <= 1e-10");
    out.detail << "samples=" << samples << " max|min D|=" << worst;
}

void c2_sphere_boundary(Outcome& out) {
    double worst = 0.0;
    for (int n : {2, 3}) {
        auto satisfies = [n](double delta) {
            std::ostringstream r2;
            r2.precision(17);
            r2 << "1 - " << 2 * (n - 1) << "*t + " << delta << "*t^2";
            return classify_sphere_flow(sphere(n, r2.str(), -0.2, 0.0)).satisfies_D;
        };
        double lo = -1.0, hi = 1.0;
        out.require(satisfies(lo) && !satisfies(hi), "bracket");
        while (hi - lo > 1e-10) {
            const double mid = 0.5 * (lo + hi);
            (satisfies(mid) ? lo : hi) = mid;
        }
        const double flip = 0.5 * (lo + hi);
        worst = std::max(worst, std::abs(flip));
        out.detail << "n=" << n << " flip=" << flip << " ";
    }
    out.require(worst <= 1e-8, "|flip delta| <= 1e-8");
}

void c3_f_derivative(Outcome& out) {
    const double dt = 1e-4;
    double worst = 0.0;
    int samples = 0;
    for (int n : {2, 3}) {
        const FlowSpec flow = backward(sphere(n, "1 + t^2", 0.0, 1.0), 1.0);
        const int steps = static_cast<int>(std::lround(1.0 / dt));
        const FunctionalTrace trace = monotonicity_trace(
            DiscreteMeasure::uniform(SpatialGrid::single_cell(), flow, 1.0), flow, 0.0, 1.0, FunctionalKind::F, steps);
        const auto derivative = trace.derivative();
        for (int j = 0; j < 25; ++j, ++samples) {
            const int k = 200 + j * 390;
            const double t = flow.to_forward(trace.times[k]);
            const double expected = -round_sphere_F_derivative(flow, t);
            worst = std::max(worst, std::abs(derivative[k] - expected) / std::abs(expected));
        }
    }
    out.require(samples == 50, "50 samples");
    out.require(worst <= 1e-6, "relative error <= 1e-6");
    out.detail << "samples=" << samples << " max relative error=" << worst;
}

void c4_monotonicity(Outcome& out) {
    const FlowSpec flow = backward(expanding_circle(0.0, 1.0), 1.0);
    std::mt19937 rng(404);
    double worst_ratio = 0.0;
    for (int m = 0; m < 5; ++m) {
        const MeasureSpec measure = random_density(rng);
        for (FunctionalKind kind : {FunctionalKind::F, FunctionalKind::W}) {
            std::vector<FunctionalTrace> traces;
            for (int nodes : {64, 128}) {
                const GridPtr grid = SpatialGrid::circle(nodes);
                const double h = grid->spacing();
                const DiscreteMeasure mu = measure.build(grid, flow, flow.to_forward(0.2));
                TraceOptions options;
                options.heat.max_step = h;
                traces.push_back(monotonicity_trace(mu, flow, 0.2, 0.8, kind, nodes / 8, options));
            }
            const double tol = std::max(calibrated_tolerance(traces[0], traces[1]), 1e-12);
            const double increase = traces[1].max_increase();
            out.require(increase <= tol, "trace non-increasing within tolerance");
            worst_ratio = std::max(worst_ratio, increase / tol);
        }
    }
    out.detail << "max increase/tol=" << worst_ratio << " ";

    const FlowSpec bad = backward(sphere(2, "1 + t^2", 0.0, 1.0), 1.0);
    const FunctionalTrace trace = monotonicity_trace(DiscreteMeasure::uniform(SpatialGrid::single_cell(), bad, 1.0),
                                                     bad, 0.0, 0.9, FunctionalKind::F, 90);
    int wrong = 0, increasing = 0;
    for (std::size_t k = 0; k + 1 < trace.values.size(); ++k) {
        const double t_mid = bad.to_forward(0.5 * (trace.times[k] + trace.times[k + 1]));
        const double predicted = -round_sphere_F_derivative(bad, t_mid);
        const double observed = trace.values[k + 1] - trace.values[k];
        wrong += (predicted > 0) != (observed > 0);
        increasing += observed > 0;
    }
    out.require(wrong == 0, "F increase sign matches the closed form");
    out.require(increasing > 0, "F increases somewhere on the violating sphere");
    out.detail << "violating sphere: increasing samples=" << increasing << "/" << trace.values.size() - 1
               << " sign mismatches=" << wrong;
}

void c5_bochner_convergence(Outcome& out) {
    std::mt19937 rng(505);
    std::uniform_real_distribution<double> coefficient(-1.0, 1.0);
    struct Case {
        std::string name;
        FlowSpec flow;
        BochnerFamily family;
        double s, t;
    };
    const FlowSpec inhomogeneous =
        FlowSpec::circle_conformal(fn("0.1*cos(theta) + 0.2*t*sin(theta) + 0.5*log(1+t)"), 0.0, 1.0);
    const std::vector<Case> cases{
        {"L0", inhomogeneous, BochnerFamily::L0, 0.0, 0.3},
        {"Lminus", backward(inhomogeneous, 1.0), BochnerFamily::Lminus, 0.2, 0.5},
        {"weighted", FlowSpec::weighted_circle(fn("0.1*cos(theta) + 0.3*t"), fn("0.2*sin(theta) + 0.1*t*cos(theta)"),
                                               0.0, 1.0),
         BochnerFamily::weighted_L0, 0.0, 0.3},
    };
    double worst_extrapolated = 0.0, min_ratio = 1e300, max_ratio = 0.0;
    for (int datum = 0; datum < 3; ++datum) {
        const double a = coefficient(rng), b = coefficient(rng), c = coefficient(rng);
        for (const Case& item : cases) {
            std::vector<double> residual;
            std::vector<std::vector<double>> fields;
            for (int nodes : {64, 128, 256, 512}) {
                const GridPtr grid = SpatialGrid::circle(nodes);
                const double h = grid->spacing();
                ScalarField v0 = ScalarField::constant(grid, item.s, 0.0);
                for (int i = 0; i < nodes; ++i) {
                    const double x = grid->node(i);
                    v0.values[i] = a * std::sin(x) + b * std::cos(2 * x) + c * std::sin(3 * x);
                }
                HeatOptions options;
                options.max_step = h;
                options.weighted = item.family == BochnerFamily::weighted_L0;
                const ScalarField v = heat_slice(v0, item.flow, item.s, item.t, h, options);
                const ScalarField r = bochner_residual(item.flow, v, item.family);
                double peak = 0.0;
                for (double x : r.values) peak = std::max(peak, std::abs(x));
                residual.push_back(peak);
                fields.push_back(r.values);
            }
            for (std::size_t k = 1; k + 1 < residual.size(); ++k) {
                min_ratio = std::min(min_ratio, residual[k] / residual[k + 1]);
                max_ratio = std::max(max_ratio, residual[k] / residual[k + 1]);
            }
            // Pointwise Richardson elimination of the h^2, h^4 and h^6 terms on the nodes shared by the nested grids.
            double extrapolated = 0.0;
            for (std::size_t i = 0; i < fields[0].size(); ++i)
                extrapolated = std::max(extrapolated, std::abs((4096.0 * fields[3][8 * i] - 1344.0 * fields[2][4 * i] +
                                                                84.0 * fields[1][2 * i] - fields[0][i]) /
                                                               2835.0));
            worst_extrapolated = std::max(worst_extrapolated, extrapolated);
        }
    }
    out.require(min_ratio >= 2.0 * 0.95, "residual at least halves under refinement");
    out.require(max_ratio <= 4.0 * 1.05, "residual at most quarters under refinement");
    out.require(worst_extrapolated <= 1e-6, "extrapolated residual <= 1e-6");
    out.detail << "refinement ratios in [" << min_ratio << ", " << max_ratio
               << "] max extrapolated residual=" << worst_extrapolated;
}

void c6_gradient_estimate_zero(Outcome& out) {
    struct Seeded {
        FlowSpec flow;
        double reference;
        double s, t;
    };
    const std::vector<Seeded> flows{
        {ricci_sphere(2, 0.0, 0.4), 0.5, 0.15, 0.45},
        {expanding_circle(0.0, 1.0), 1.2, 0.3, 0.9},
        {FlowSpec::static_manifold(2, 1.0, 0.0, 1.0), 1.0, 0.2, 0.8},
    };
    for (const Seeded& item : flows) {
        GradientEstimateParams params;
        params.s = item.flow.t_min + 0.05;
        params.t = item.flow.t_max - 0.05;
        const CheckReport l0 = check_gradient_estimate(item.flow, fn("0"), params);
        out.require(l0.worst_margin >= -l0.tolerance, "L0 margin >= -tol");
        params.family = EstimateFamily::Lminus;
        params.s = item.s;
        params.t = item.t;
        const CheckReport lminus = check_gradient_estimate(backward(item.flow, item.reference), fn("0"), params);
        out.require(lminus.worst_margin >= -lminus.tolerance, "Lminus margin >= -tol");
        out.detail << "L0 " << l0.worst_margin << ", Lminus " << lminus.worst_margin << "; ";
    }
    GradientEstimateParams params;
    params.family = EstimateFamily::Lminus;
    params.s = 0.15;
    params.t = 0.45;
    const CheckReport ricci = check_gradient_estimate(backward(ricci_sphere(2, 0.0, 0.4), 0.5), fn("0"), params);
    const double rhs = ricci.witness["rhs"].get<double>();
    const double saturation = std::abs(ricci.witness["lhs"].get<double>() - rhs) / std::abs(rhs);
    out.require(saturation <= 1e-6, "Lminus saturated on the Ricci sphere");
    out.detail << "Ricci sphere relative gap=" << saturation;
}

void c7_contraction(Outcome& out) {
    std::mt19937 rng(707);
    CheckOptions options;
    options.resolution.nodes = 64;
    options.resolution.layers = 64;
    const std::vector<std::pair<std::string, FlowSpec>> flows{{"flat", static_circle(0.0, 1.0)},
                                                              {"expanding", expanding_circle(0.0, 1.0)}};
    double min_l0 = 1e300, min_lminus = 1e300;
    int checks = 0;
    for (int pair = 0; pair < 5; ++pair) {
        const MeasureSpec mu = random_density(rng), nu = random_density(rng);
        for (const auto& [name, flow] : flows) {
            ContractionParams l0;
            l0.s = 0.1;
            l0.t = 0.5;
            l0.h = 0.2;
            const CheckReport a = check_wasserstein_contraction(flow, mu, nu, l0, options);
            out.require(a.verdict == Verdict::pass, name + " L0 pass (" + describe(a) + ")");
            min_l0 = std::min(min_l0, a.worst_margin);

            ContractionParams lminus;
            lminus.form = ContractionForm::Lminus;
            lminus.s = 0.2;
            lminus.t = 0.4;
            lminus.alpha = 1.5;
            const CheckReport b = check_wasserstein_contraction(backward(flow, 1.0), mu, nu, lminus, options);
            out.require(b.verdict == Verdict::pass, name + " Lminus pass (" + describe(b) + ")");
            min_lminus = std::min(min_lminus, b.worst_margin);
            checks += 2;
        }
    }
    out.detail << "checks=" << checks << " min margin L0=" << min_l0 << " Lminus=" << min_lminus << "; Kuwada slack:";
    std::mt19937 kuwada_rng(708);
    for (int pair = 0; pair < 5; ++pair) {
        ContractionParams kuwada;
        kuwada.form = ContractionForm::static_kuwada;
        kuwada.s = 0.1;
        kuwada.t = 0.3;
        const CheckReport k = check_wasserstein_contraction(static_circle(0.0, 1.0), random_density(kuwada_rng),
                                                            random_density(kuwada_rng), kuwada, options);
        out.require(k.verdict == Verdict::pass, "static Kuwada pass (" + describe(k) + ")");
        out.detail << " " << k.worst_margin;
    }
}

void c8_dimensional_contraction(Outcome& out) {
    const FlowSpec flow = backward(ricci_sphere(2, 0.0, 0.4), 0.5);
    const std::vector<std::pair<double, double>> windows{{0.1, 0.2}, {0.12, 0.2}, {0.15, 0.3}};
    bool strict_failure_quarter = false;
    double worst_at_n = 1e300;
    std::string half_verdicts;
    for (double alpha : {1.1, 1.5}) {
        for (const auto& [sigma, tau] : windows) {
            ContractionParams params;
            params.form = ContractionForm::L0_dimensional;
            params.s = sigma;
            params.t = tau;
            params.S = alpha * sigma;
            params.T = alpha * tau;
            const CheckReport at_n = check_wasserstein_contraction(flow, MeasureSpec::uniform(), MeasureSpec::uniform(),
                                                                   params);
            out.require(at_n.verdict == Verdict::pass, "passes at N = n (" + describe(at_n) + ")");
            worst_at_n = std::min(worst_at_n, at_n.worst_margin);
            params.dimension = 1.0;
            half_verdicts += to_string(check_wasserstein_contraction(flow, MeasureSpec::uniform(),
                                                                     MeasureSpec::uniform(), params)
                                           .verdict)
                                 .substr(0, 4) +
                             " ";
            params.dimension = 0.5;
            const CheckReport quarter =
                check_wasserstein_contraction(flow, MeasureSpec::uniform(), MeasureSpec::uniform(), params);
            strict_failure_quarter = strict_failure_quarter || quarter.verdict == Verdict::fail;
        }
    }
    out.require(strict_failure_quarter, "strict failure at N = n/4");
    out.detail << "min margin at N=n: " << worst_at_n << "; N=n/2 verdicts: " << half_verdicts
               << "; strict failure at N=n/4: " << (strict_failure_quarter ? "yes" : "no");
}

void c9_hamilton_jacobi(Outcome& out) {
    const FlowSpec flat = static_circle(0.0, 1.0);
    std::vector<double> residual;
    for (int nodes : {32, 64, 128, 256}) {
        const GridPtr grid = SpatialGrid::circle(nodes);
        ScalarField phi = ScalarField::constant(grid, 0.0, 0.0);
        for (int i = 0; i < nodes; ++i) phi.values[i] = 0.5 * std::cos(grid->node(i));
        const double dr = grid->spacing();
        const auto trajectory = hopf_lax_trajectory(phi, flat, CostFamily{}, 0.0, {0.5 - dr, 0.5, 0.5 + dr});
        std::vector<double> density(nodes);
        for (int i = 0; i < nodes; ++i) density[i] = 1.0 + 0.5 * std::sin(grid->node(i));
        residual.push_back(
            hj_residual(trajectory, flat, CostFamily{}, DiscreteMeasure::from_density(grid, flat, 0.5, density)));
    }
    double min_order = 1e300;
    for (std::size_t k = 0; k + 1 < residual.size(); ++k)
        min_order = std::min(min_order, std::log2(residual[k] / residual[k + 1]));
    out.require(min_order >= 0.9, "observed order >= 0.9 (first order)");
    out.detail << "hj residuals";
    for (double r : residual) out.detail << " " << r;
    out.detail << " min observed order=" << min_order << "; preservation:";

    HjPreservationParams l0;
    l0.t1 = 0.1;
    l0.t2 = 0.5;
    l0.h = 0.1;
    const std::vector<std::pair<std::string, FlowSpec>> l0_flows{{"flat", flat}, {"expanding", expanding_circle(0.0, 1.0)}};
    for (const auto& [name, flow] : l0_flows) {
        const CheckReport r = check_hj_preservation(flow, fn("0.3*cos(theta)"), l0);
        out.require(r.verdict == Verdict::pass, name + " L0 (" + describe(r) + ")");
        out.detail << " " << name << " L0 " << r.worst_margin;
    }
    l0.t2 = 0.35;
    l0.h = 0.04;
    l0.samples = 16;
    const CheckReport sphere_l0 = check_hj_preservation(ricci_sphere(2, 0.0, 0.4), fn("0"), l0);
    out.require(sphere_l0.verdict == Verdict::pass, "Ricci sphere L0 (" + describe(sphere_l0) + ")");
    out.detail << " Ricci L0 " << sphere_l0.worst_margin;

    HjPreservationParams lminus;
    lminus.kind = CostKind::Lminus;
    lminus.t1 = 0.1;
    lminus.t2 = 0.2;
    lminus.alpha = 1.5;
    const CheckReport ricci = check_hj_preservation(backward(ricci_sphere(2, 0.0, 0.4), 0.5), fn("0"), lminus);
    out.require(ricci.verdict == Verdict::pass, "Ricci sphere Lminus (" + describe(ricci) + ")");
    out.detail << " Ricci Lminus " << ricci.worst_margin << " (dimensional allowance "
               << ricci.witness["dimensional_allowance"].get<double>() << ", domination margin "
               << ricci.witness["domination_margin"].get<double>() << ")";
    lminus.t1 = 0.3;
    lminus.t2 = 0.6;
    CheckOptions fine;
    fine.resolution.nodes = 128;
    const CheckReport expanding =
        check_hj_preservation(backward(expanding_circle(0.0, 1.0), 1.0), fn("0.2*cos(theta)"), lminus, fine);
    out.require(expanding.verdict == Verdict::pass, "expanding Lminus (" + describe(expanding) + ")");
    out.detail << " expanding Lminus " << expanding.worst_margin;
}

void c10_evi_consistency(Outcome& out) {
    struct Scenario {
        std::string name;
        FlowSpec flow;
        MeasureSpec mu, nu;
    };
    const std::vector<Scenario> scenarios{
        {"flat cos/sin", static_circle(0.0, 1.0), MeasureSpec::from_density(fn("1 + 0.8*cos(theta)")),
         MeasureSpec::from_density(fn("1 + 0.8*sin(theta)"))},
        {"flat bump/uniform", static_circle(0.0, 1.0), MeasureSpec::from_density(fn("1 + 0.5*cos(2*theta)")),
         MeasureSpec::uniform()},
        {"expanding cos/sin", expanding_circle(0.0, 1.0), MeasureSpec::from_density(fn("1 + 0.8*cos(theta)")),
         MeasureSpec::from_density(fn("1 + 0.8*sin(theta)"))},
    };
    for (const Scenario& item : scenarios) {
        const CheckReport r = check_evi_contraction_consistency(item.flow, item.mu, item.nu, 0.3, 0.7, 0.04);
        const double dini = r.witness["dini_error"].get<double>();
        out.require(!r.unresolved, item.name + " quotients monotone");
        out.require(r.worst_margin >= -2.0 * dini, item.name + " rate - EVI sum >= -2 Dini error");
        out.detail << item.name << ": rate-sum=" << r.worst_margin << " dini=" << dini << "; ";
    }
}

void c11_spacetime_identity(Outcome& out) {
    std::mt19937 rng(1111);
    std::uniform_real_distribution<double> unit(-1.5, 1.5);
    std::vector<FlowSpec> flows = seeded_flows();
    flows.push_back(FlowSpec::circle_conformal(fn("0.2*cos(theta) + 0.3*t*sin(2*theta)"), 0.0, 1.0));
    double worst = 0.0;
    int samples = 0;
    while (samples < 10000) {
        const FlowSpec& flow = flows[samples % flows.size()];
        const double t = flow.t_min + (flow.t_max - flow.t_min) * (0.5 + unit(rng) / 3.1);
        const GeometrySnapshot snap = snapshot(flow, t, 2 * pi * (0.5 + unit(rng) / 3.1));
        Eigen::VectorXd X(snap.dim);
        for (int i = 0; i < snap.dim; ++i) X(i) = unit(rng);
        const double lambda = unit(rng);
        if (std::abs(lambda) < 1e-3) continue;
        const double rhs = 0.5 * lambda * lambda * evaluate_D(snap, X / lambda);
        worst = std::max(worst, std::abs(ricci_tilde(snap, {X, lambda}) - rhs) / std::max(1.0, std::abs(rhs)));
        ++samples;
    }
    out.require(worst <= 1e-12, "identity to 1e-12");
    const std::vector<FlowSpec> seeded = seeded_flows();
    int matches = 0;
    for (const FlowSpec& flow : seeded) {
        bool pointwise = true;
        for (int k = 0; k < 9; ++k)
            for (int i = 0; i < (flow.is_circle() ? 8 : 1); ++i)
                pointwise = pointwise &&
                            minimize_D(snapshot(flow, flow.t_min + (flow.t_max - flow.t_min) * k / 8, 2 * pi * i / 8))
                                .nonnegative(1e-10);
        matches += (spacetime_positivity_scan(flow, 9, 8).verdict == Verdict::pass) == pointwise;
    }
    out.require(matches == static_cast<int>(seeded.size()), "scan matches minimize_D on all seeded flows");
    out.detail << "samples=" << samples << " max relative deviation=" << worst << " scan matches=" << matches << "/"
               << seeded.size();
}

void c12_duality_and_transport(Outcome& out) {
    std::mt19937 rng(1212);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const FlowSpec flow = FlowSpec::circle_conformal(fn("0.2*cos(theta) + 0.3*t*sin(2*theta) + 0.5*log(1+t)"), 0.0, 1.0);
    double worst_duality = 0.0, worst_mass = 0.0;
    for (int k = 0; k < 100; ++k) {
        const GridPtr grid = SpatialGrid::circle(16 + 4 * (k % 12));
        const double s = 0.4 * (unit(rng) + 1.0) / 2.0;
        const double t = s + 0.1 + 0.4 * (unit(rng) + 1.0) / 2.0;
        ScalarField v = ScalarField::constant(grid, s, 0.0);
        for (double& x : v.values) x = unit(rng);
        const DiscreteMeasure mu = DiscreteMeasure::from_density(grid, flow, t, random_mass(grid->size(), rng));
        worst_duality = std::max(worst_duality, duality_residual(v, mu, flow, s, t));
        worst_mass = std::max(worst_mass, std::abs(adjoint_heat_propagate(mu, flow, t, s).total_mass() - 1.0));
    }
    out.require(worst_duality <= 1e-8, "duality residual <= 1e-8");
    out.require(worst_mass <= 1e-10, "mass conservation <= 1e-10");

    double worst_gap = 0.0, worst_lp = 0.0;
    int lp_instances = 0;
    std::uniform_int_distribution<int> size(1, 24);
    for (int k = 0; k < 50; ++k) {
        const int n = size(rng), m = size(rng);
        const std::vector<double> source = random_mass(n, rng), target = random_mass(m, rng);
        Eigen::MatrixXd cost(n, m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) cost(i, j) = 10.0 * unit(rng);
        const TransportSolution solution = solve_transport(source, target, cost);
        const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
        worst_gap = std::max(worst_gap, solution.duality_gap / scale);
        if (n <= 16 && m <= 16) {
            ++lp_instances;
            worst_lp = std::max(worst_lp, std::abs(solution.value - dense_transport_minimum(source, target, to_rows(cost))));
        }
    }
    out.require(worst_gap <= 1e-8, "kantorovich gap <= 1e-8 scale");
    out.require(worst_lp <= 1e-10, "LP agreement <= 1e-10");
    out.detail << "max duality residual=" << worst_duality << " max mass error=" << worst_mass
               << " max gap/scale=" << worst_gap << " LP instances=" << lp_instances << " max LP deviation=" << worst_lp;
}

void c13_entropy_convexity(Outcome& out) {
    CheckOptions fine;
    fine.resolution.nodes = 64;
    std::mt19937 rng(1313);
    for (const auto& [name, flow] :
         std::vector<std::pair<std::string, FlowSpec>>{{"flat", static_circle(0.0, 1.0)}, {"expanding", expanding_circle(0.0, 1.0)}}) {
        for (int pair = 0; pair < 2; ++pair) {
            ConvexityParams params;
            params.s = 0.1;
            params.t = 0.5;
            params.r = 0.3;
            const CheckReport r = check_entropy_convexity(flow, random_density(rng), random_density(rng), params, fine);
            out.require(r.worst_margin >= -r.tolerance, name + " L0 defect >= -tol (" + describe(r) + ")");
            out.detail << name << " L0 " << r.worst_margin << "; ";
        }
    }
    ConvexityParams lminus;
    lminus.kind = CostKind::Lminus;
    for (const auto& [name, flow, s, r, t] : std::vector<std::tuple<std::string, FlowSpec, double, double, double>>{
             {"Ricci sphere", backward(ricci_sphere(2, 0.0, 0.4), 0.5), 0.1, 0.2, 0.4},
             {"static sphere", backward(FlowSpec::static_manifold(2, 1.0, 0.0, 1.0), 1.0), 0.2, 0.5, 0.8},
             {"expanding circle", backward(expanding_circle(0.0, 1.0), 1.0), 0.2, 0.4, 0.7}}) {
        lminus.s = s;
        lminus.r = r;
        lminus.t = t;
        const CheckReport report =
            check_entropy_convexity(flow, MeasureSpec::uniform(), MeasureSpec::uniform(), lminus, fine);
        out.require(report.worst_margin >= -report.tolerance, name + " Lminus defect >= -tol (" + describe(report) + ")");
        out.detail << name << " Lminus " << report.worst_margin << "; ";
    }

    // Homogeneous sphere with backward radius^2 = 2 tau + tau^2, violating D at every time.
    const FlowSpec violating = sphere(2, "3 - 4*t + t^2", 0.0, 0.98);
    out.require(check_d_condition(violating, 9, 1).verdict == Verdict::fail, "violating sphere fails D");
    double most_negative = 0.0, tolerance = 0.0;
    for (const auto& [s, r, t] : std::vector<std::tuple<double, double, double>>{{0.1, 0.3, 0.6}, {0.05, 0.3, 0.9}, {0.3, 0.5, 0.9}}) {
        lminus.s = s;
        lminus.r = r;
        lminus.t = t;
        const CheckReport report =
            check_entropy_convexity(backward(violating, 1.0), MeasureSpec::uniform(), MeasureSpec::uniform(), lminus);
        if (report.worst_margin < most_negative) {
            most_negative = report.worst_margin;
            tolerance = report.tolerance;
        }
    }
    out.require(most_negative < -tolerance, "negative Lminus defect beyond tolerance on the violating sphere");
    out.detail << "violating sphere min Lminus defect=" << most_negative << " tol=" << tolerance;
}

struct Criterion {
    int index;
    std::string name;
    double runtime_limit;
    std::function<void(Outcome&)> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "D vanishes on Ricci flow spheres", 1.0, c1_ricci_flow_d_vanishes},
        {2, "sphere classification boundary", 1.0, c2_sphere_boundary},
        {3, "F derivative closed form", 5.0, c3_f_derivative},
        {4, "F and W monotonicity", 60.0, c4_monotonicity},
        {5, "Bochner residual convergence", 120.0, c5_bochner_convergence},
        {6, "gradient estimate with v = 0", 30.0, c6_gradient_estimate_zero},
        {7, "Wasserstein contraction", 600.0, c7_contraction},
        {8, "dimensional contraction", 600.0, c8_dimensional_contraction},
        {9, "Hamilton-Jacobi machinery", 300.0, c9_hamilton_jacobi},
        {10, "EVI and contraction consistency", 600.0, c10_evi_consistency},
        {11, "space-time identity", 5.0, c11_spacetime_identity},
        {12, "duality and transport certificates", 120.0, c12_duality_and_transport},
        {13, "entropy convexity", 600.0, c13_entropy_convexity},
    };
    int failures = 0;
    for (const Criterion& criterion : criteria) {
        Outcome outcome;
        const auto start = std::chrono::steady_clock::now();
        try {
            criterion.run(outcome);
        } catch (const std::exception& e) {
            outcome.pass = false;
            outcome.detail << "[exception: " << e.what() << "]";
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        outcome.require(seconds <= criterion.runtime_limit, "runtime limit");
        failures += !outcome.pass;
        std::printf("C%-2d %s  %s: %s (%.2fs, limit %.0fs)\n", criterion.index, outcome.pass ? "PASS" : "FAIL",
                    criterion.name.c_str(), outcome.detail.str().c_str(), seconds, criterion.runtime_limit);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
