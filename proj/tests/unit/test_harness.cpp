#include <doctest.h>

#include <cmath>
#include <random>

#include "dflow/errors.hpp"
#include "dflow/harness.hpp"
#include "test_util.hpp"

using namespace dflow;
using namespace dflow::test;

namespace {

FlowSpec backward(const FlowSpec& flow, double reference) {
    return flow.with_orientation(TimeOrientation::backward, reference);
}

FlowSpec shrinking_circle() { return FlowSpec::circle_conformal(fn("0.5*log(1 - 0.5*t)"), 0.0, 1.0); }

/// Homogeneous sphere with backward radius^2 = 2 tau + tau^2 about reference time 1.
FlowSpec violating_sphere() { return FlowSpec::round_sphere(2, fn("3 - 4*t + t^2"), 0.0, 0.98); }

MeasureSpec bump_cos() { return MeasureSpec::from_density(fn("1 + 0.8*cos(theta)")); }
MeasureSpec bump_sin() { return MeasureSpec::from_density(fn("1 + 0.8*sin(theta)")); }

CheckReport report_with(double margin, double tolerance, bool unresolved = false) {
    CheckReport report;
    report.worst_margin = margin;
    report.tolerance = tolerance;
    report.unresolved = unresolved;
    return report;
}

}  // namespace

TEST_CASE("verdict rule") {
    auto verdict = [](CheckReport report, double cap = std::numeric_limits<double>::infinity()) {
        assign_verdict(report, cap);
        return report.verdict;
    };
    CHECK(verdict(report_with(-0.2, 0.1)) == Verdict::fail);
    CHECK(verdict(report_with(-0.05, 0.1)) == Verdict::pass);
    CHECK(verdict(report_with(0.3, 0.1)) == Verdict::pass);
    CHECK(verdict(report_with(0.3, 0.1, true)) == Verdict::indeterminate);
    CHECK(verdict(report_with(-0.2, 0.1, true)) == Verdict::fail);
    CHECK(verdict(report_with(0.05, 0.1, false), 0.01) == Verdict::indeterminate);
    CHECK(verdict(report_with(0.5, 0.1, false), 0.01) == Verdict::pass);
    CheckReport skipped = report_with(-1.0, 0.0);
    skipped.verdict = Verdict::not_applicable;
    CHECK(verdict(skipped) == Verdict::not_applicable);
}

TEST_CASE("report JSON round trip") {
    CheckReport report = report_with(-0.25, 0.125, true);
    report.check_id = "gradient_estimate";
    report.family = "L0";
    report.verdict = Verdict::indeterminate;
    report.witness = {{"node", 3}};
    report.notes = {"coarse"};
    const CheckReport back = report_from_json(to_json(report));
    CHECK(back.check_id == report.check_id);
    CHECK(back.verdict == Verdict::indeterminate);
    CHECK(back.worst_margin == report.worst_margin);
    CHECK(back.tolerance == report.tolerance);
    CHECK(back.unresolved);
    CHECK(back.witness["node"] == 3);
    CHECK(back.notes == report.notes);
    CHECK_THROWS_AS(report_from_json(nlohmann::json{{"family", "L0"}}), SchemaError);
    CHECK_THROWS_AS(verdict_from_string("maybe"), ParameterError);
}

TEST_CASE("coarsened resolution halves the grid and the time samples") {
    Resolution res;
    res.nodes = 64;
    res.dt = 0.01;
    res.layers = 16;
    const Resolution coarse = res.coarsened();
    CHECK(coarse.nodes == 32);
    CHECK(coarse.dt == 0.02);
    CHECK(coarse.layers == 8);
    CHECK(coarse.refinement == 0.5);
    Resolution tiny;
    tiny.nodes = 5;
    CHECK(tiny.coarsened().nodes == 4);
}

TEST_CASE("calibrated check records provenance and a reproducible hash") {
    const FlowSpec flow = ricci_sphere(2, 0.0, 0.4);
    GradientEstimateParams params;
    params.s = 0.05;
    params.t = 0.3;
    const CheckReport first = check_gradient_estimate(flow, fn("1"), params);
    const CheckReport second = check_gradient_estimate(flow, fn("1"), params);
    CHECK(first.provenance["parameters_hash"] == second.provenance["parameters_hash"]);
    CHECK(first.provenance["resolution"]["nodes"] == 32);
    CHECK(first.witness.contains("coarse_margin"));
    CheckOptions fixed;
    fixed.tolerance = 0.5;
    CHECK(check_gradient_estimate(flow, fn("1"), params, fixed).tolerance == 0.5);
}

TEST_CASE("L0 gradient estimate separates D >= 0 flows from violating ones") {
    GradientEstimateParams params;
    params.s = 0.05;
    params.t = 0.3;
    CHECK(check_gradient_estimate(ricci_sphere(2, 0.0, 0.4), fn("1"), params).verdict == Verdict::pass);

    params.s = 0.1;
    params.t = 0.6;
    params.lambdas = {0.5, 1.0, 3.0};
    CHECK(check_gradient_estimate(expanding_circle(), fn("cos(theta) + 0.3*sin(2*theta)"), params).verdict ==
          Verdict::pass);

    params.s = 0.0;
    params.t = 0.3;
    params.lambdas = {1.0};
    const CheckReport bad = check_gradient_estimate(FlowSpec::round_sphere(2, fn("1 + t^2"), 0.0, 1.0), fn("1"), params);
    CHECK(bad.verdict == Verdict::fail);
    CHECK(bad.witness.contains("lhs"));

    params.s = 0.4;
    params.t = 0.45;
    params.lambdas = {1.0, 10.0, 100.0};
    const CheckReport shrink = check_gradient_estimate(shrinking_circle(), fn("cos(theta)"), params);
    CHECK(shrink.verdict == Verdict::fail);
    CHECK(shrink.witness["lambda"] == 100.0);
}

TEST_CASE("Lminus gradient estimate is saturated on the shrinking Ricci sphere") {
    const FlowSpec flow = backward(ricci_sphere(2, 0.0, 0.4), 0.5);
    GradientEstimateParams params;
    params.family = EstimateFamily::Lminus;
    params.s = 0.15;
    params.t = 0.45;
    const CheckReport report = check_gradient_estimate(flow, fn("1"), params);
    CHECK(report.verdict == Verdict::pass);
    CHECK(std::abs(report.worst_margin) <= 1e-6 * std::max(1.0, std::abs(report.witness["rhs"].get<double>())));
}

TEST_CASE("parametric Lminus estimate detects the violating sphere through the sweep") {
    GradientEstimateParams params;
    params.family = EstimateFamily::Lminus_parametric;
    params.s = 0.15;
    params.t = 0.45;
    params.lambdas = {0.2, 0.5, 0.9, 1.2, 1.6, 2.0, 2.9};
    CHECK(check_gradient_estimate(backward(ricci_sphere(2, 0.0, 0.4), 0.5), fn("1"), params).verdict == Verdict::pass);

    const FlowSpec bad = backward(FlowSpec::round_sphere(2, fn("1 + t^2"), 0.0, 1.0), 1.5);
    params.s = 0.6;
    params.t = 1.4;
    params.lambdas = {0.2, 0.5, 0.9, 1.2, 1.6, 2.0};
    CHECK(check_gradient_estimate(bad, fn("1"), params).verdict == Verdict::fail);
}

TEST_CASE("dimensional L0 estimate holds for N = 1 on the static circle and fails below") {
    const FlowSpec flow = backward(static_circle(), 1.0);
    GradientEstimateParams params;
    params.family = EstimateFamily::L0_dimensional;
    params.s = 0.2;
    params.t = 0.6;
    params.lambdas = {-1.0, 1.0};
    const SmoothFn v = fn("cos(theta) + 0.3*sin(2*theta)");
    CHECK(check_gradient_estimate(flow, v, params).verdict == Verdict::pass);
    params.dimension = 0.3;
    CHECK(check_gradient_estimate(flow, v, params).verdict == Verdict::fail);
}

TEST_CASE("Wasserstein contraction forms") {
    ContractionParams params;
    params.s = 0.1;
    params.t = 0.5;
    params.h = 0.2;
    CHECK(check_wasserstein_contraction(static_circle(), bump_cos(), bump_sin(), params).verdict == Verdict::pass);
    CHECK(check_wasserstein_contraction(expanding_circle(), bump_cos(), bump_sin(), params).verdict == Verdict::pass);

    const FlowSpec ricci = backward(ricci_sphere(2, 0.0, 0.4), 0.5);
    params = {};
    params.form = ContractionForm::Lminus;
    params.s = 0.15;
    params.t = 0.3;
    params.alpha = 1.4;
    const CheckReport lminus =
        check_wasserstein_contraction(ricci, MeasureSpec::uniform(), MeasureSpec::uniform(), params);
    CHECK(lminus.verdict == Verdict::pass);
    CHECK(std::abs(lminus.worst_margin) <= 1e-6);

    params = {};
    params.form = ContractionForm::four_time;
    params.s = 0.1;
    params.sigma2 = 0.15;
    params.t = 0.2;
    params.tau2 = 0.35;
    CHECK(check_wasserstein_contraction(ricci, MeasureSpec::uniform(), MeasureSpec::uniform(), params).verdict ==
          Verdict::pass);

    params = {};
    params.form = ContractionForm::static_kuwada;
    params.s = 0.1;
    params.t = 0.3;
    CHECK(check_wasserstein_contraction(static_circle(), bump_cos(), bump_sin(), params).verdict == Verdict::pass);
}

TEST_CASE("dimensional contraction holds at N = n and fails below") {
    const FlowSpec ricci = backward(ricci_sphere(2, 0.0, 0.4), 0.5);
    ContractionParams params;
    params.form = ContractionForm::L0_dimensional;
    params.s = 0.12;
    params.t = 0.2;
    params.S = 0.18;
    params.T = 0.3;
    CHECK(check_wasserstein_contraction(ricci, MeasureSpec::uniform(), MeasureSpec::uniform(), params).verdict ==
          Verdict::pass);
    params.dimension = 1.5;
    CHECK(check_wasserstein_contraction(ricci, MeasureSpec::uniform(), MeasureSpec::uniform(), params).verdict ==
          Verdict::fail);
}

TEST_CASE("four-time shift and its preconditions") {
    const double shift = four_time_shift(0.1, 0.15, 0.2, 0.35);
    CHECK(shift == doctest::Approx((0.15 * 0.2 - 0.1 * 0.35) / ((0.35 - 0.2) - (0.15 - 0.1))).epsilon(1e-14));
    CHECK((0.2 + shift) / (0.1 + shift) == doctest::Approx((0.35 + shift) / (0.15 + shift)).epsilon(1e-12));
    CHECK_THROWS_AS(four_time_shift(0.2, 0.1, 0.3, 0.5), PreconditionError);
    CHECK_THROWS_AS(four_time_shift(0.1, 0.3, 0.2, 0.35), PreconditionError);
}

TEST_CASE("entropy convexity") {
    ConvexityParams params;
    params.s = 0.1;
    params.t = 0.5;
    params.r = 0.3;
    CheckOptions fine;
    fine.resolution.nodes = 64;
    CHECK(check_entropy_convexity(expanding_circle(), bump_cos(), bump_sin(), params, fine).verdict == Verdict::pass);

    params.kind = CostKind::Lminus;
    params.s = 0.1;
    params.t = 0.4;
    params.r = 0.2;
    const CheckReport ricci = check_entropy_convexity(backward(ricci_sphere(2, 0.0, 0.4), 0.5), MeasureSpec::uniform(),
                                                      MeasureSpec::uniform(), params);
    CHECK(ricci.verdict == Verdict::pass);
    CHECK(std::abs(ricci.worst_margin) <= 1e-6);

    // Hand evaluation of the defect for radius^2 = 2 tau + tau^2 at (0.1, 0.3, 0.6) is about -0.042.
    params.s = 0.1;
    params.r = 0.3;
    params.t = 0.6;
    const CheckReport bad =
        check_entropy_convexity(backward(violating_sphere(), 1.0), MeasureSpec::uniform(), MeasureSpec::uniform(), params);
    CHECK(bad.verdict == Verdict::fail);
    CHECK(bad.worst_margin < -0.03);
}

TEST_CASE("EVI on D >= 0 flows and its consistency with the contraction rate") {
    EviParams params;
    params.s = 0.2;
    params.t = 0.6;
    params.probe_a = 0.6;
    params.probe_b = 0.2;
    params.h = 0.08;
    CHECK(check_evi(static_circle(), bump_cos(), bump_sin(), params).verdict == Verdict::pass);

    params = {};
    params.kind = CostKind::Lminus;
    params.s = 0.1;
    params.t = 0.3;
    params.probe_a = 0.15;
    params.probe_b = 0.35;
    params.h = 0.04;
    CHECK(check_evi(backward(ricci_sphere(2, 0.0, 0.4), 0.5), MeasureSpec::uniform(), MeasureSpec::uniform(), params)
              .verdict == Verdict::pass);

    const CheckReport consistency = check_evi_contraction_consistency(static_circle(), bump_cos(), bump_sin(), 0.3, 0.7, 0.04);
    CHECK(consistency.verdict == Verdict::pass);
    CHECK(consistency.witness["contraction_rate"]["monotone"] == true);
}

TEST_CASE("Hamilton-Jacobi preservation") {
    HjPreservationParams params;
    params.t1 = 0.1;
    params.t2 = 0.5;
    params.h = 0.1;
    const CheckReport constant = check_hj_preservation(static_circle(), fn("2"), params);
    CHECK(constant.verdict == Verdict::pass);
    CHECK(std::abs(constant.worst_margin) <= 1e-12);

    CHECK(check_hj_preservation(expanding_circle(), fn("0.3*cos(theta)"), params).verdict == Verdict::pass);

    params.input_tolerance = 1e-6;
    const CheckReport skipped = check_hj_preservation(expanding_circle(), fn("0.3*cos(theta)"), params);
    CHECK(skipped.verdict == Verdict::not_applicable);
    CHECK_FALSE(skipped.notes.empty());

    HjPreservationParams lminus;
    lminus.kind = CostKind::Lminus;
    lminus.t1 = 0.1;
    lminus.t2 = 0.2;
    lminus.alpha = 1.5;
    const CheckReport ricci = check_hj_preservation(backward(ricci_sphere(2, 0.0, 0.4), 0.5), fn("0"), lminus);
    CHECK(ricci.verdict == Verdict::pass);
    const double allowance = ricci.witness["dimensional_allowance"].get<double>();
    CHECK(allowance == doctest::Approx(0.5 * 2 * 0.5 * std::pow(std::sqrt(0.2) - std::sqrt(0.1), 2)).epsilon(1e-12));
    CHECK(ricci.witness["domination_margin"].get<double>() < 0.01 * allowance);

    lminus.alpha = 0.9;
    CHECK_THROWS_AS(check_hj_preservation(backward(ricci_sphere(2, 0.0, 0.4), 0.5), fn("0"), lminus), ParameterError);
}

TEST_CASE("shifted Bochner identity holds on random point data") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> unit(-2.0, 2.0);
    std::vector<BochnerPointData> points;
    for (int k = 0; k < 200; ++k) {
        BochnerPointData d;
        d.grad_sq = std::abs(unit(rng));
        d.lap_v = unit(rng);
        d.S = unit(rng);
        d.op_grad_sq = unit(rng);
        d.op_lap_v = unit(rng);
        d.op_S = unit(rng);
        points.push_back(d);
    }
    const double N = 3.0;
    const double tau0 = 0.5;
    const std::vector<double> shifts{0.0, 0.3, 2.0, 10.0};
    const CheckReport report = check_shifted_bochner_equivalence(points, shifts, tau0, N);
    CHECK(report.verdict == Verdict::pass);

    for (const BochnerPointData& d : points) {
        for (double shift : shifts) {
            const double c = shift + tau0;
            const double lhs = lminus_dimensional_bochner(d, shift, tau0, N) / (c * c);
            const double rhs = l0_dimensional_bochner(d, N);
            CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max({1.0, std::abs(lhs), std::abs(rhs)}));
        }
    }

    BochnerPointData d = points.front();
    d.lap_v = 0.4;
    d.S = 0.6;
    const double matching_shift = N / (2.0 * (d.lap_v + d.S)) - tau0;
    CHECK(std::abs(bochner_shift_correction(d, matching_shift, tau0, N)) <= 1e-14);
    CHECK(bochner_shift_correction(d, matching_shift + 1.0, tau0, N) > 0.0);
    CHECK_THROWS_AS(check_shifted_bochner_equivalence(points, shifts, tau0, 0.0), ParameterError);
}

TEST_CASE("blow-up bound is attained on the shrinking Ricci sphere") {
    const FlowSpec flow = backward(ricci_sphere(2, 0.0, 0.4), 0.5);
    const CheckReport report = check_blowup_bound(flow, 0.45, {0.15, 0.2, 0.3, 0.4});
    CHECK(report.verdict == Verdict::pass);
    CHECK(std::abs(report.worst_margin) <= 1e-9);
    CHECK(report.witness["existence_bound"].get<double>() == doctest::Approx(0.0).epsilon(1e-9));
    CHECK_THROWS_AS(check_blowup_bound(ricci_sphere(2, 0.0, 0.4), 0.45, {0.2}), ParameterError);
}

TEST_CASE("F and W traces are monotone on the backward expanding circle") {
    MonotonicityParams params;
    params.tau_start = 0.1;
    params.tau_end = 0.9;
    for (const char* functional : {"F", "W"}) {
        params.functional = functional;
        CAPTURE(functional);
        CHECK(check_monotonicity(backward(expanding_circle(), 1.0), bump_cos(), params).verdict == Verdict::pass);
    }
}

TEST_CASE("D condition check on seeded flows") {
    CHECK(check_d_condition(ricci_sphere(2, 0.0, 0.4), 5, 1).verdict == Verdict::pass);
    CHECK(check_d_condition(expanding_circle(), 5, 8).verdict == Verdict::pass);
    CHECK(check_d_condition(shrinking_circle(), 5, 8).verdict == Verdict::fail);
    CHECK(check_d_condition(violating_sphere(), 5, 1).verdict == Verdict::fail);
}
