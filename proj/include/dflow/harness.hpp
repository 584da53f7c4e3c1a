#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dflow/flow.hpp"
#include "dflow/grid.hpp"
#include "dflow/lagrangian.hpp"

namespace dflow {

enum class Verdict { pass, fail, indeterminate, not_applicable, error };

std::string to_string(Verdict verdict);
Verdict verdict_from_string(const std::string& name);

/// Outcome of one inequality check.
///
/// `worst_margin` is signed: negative values mean the inequality is violated by
/// that amount. A check fails exactly when worst_margin < -tolerance.
struct CheckReport {
    std::string check_id;
    std::string family;
    nlohmann::json parameters = nlohmann::json::object();
    Verdict verdict = Verdict::pass;
    double worst_margin = 0.0;
    double tolerance = 0.0;
    /// Measured discretisation error of the calibration run.
    double calibration_error = 0.0;
    /// Set when the discrete evidence does not resolve the inequality (for example
    /// non-monotone difference quotients or a selection-dependent geodesic).
    bool unresolved = false;
    nlohmann::json witness = nlohmann::json::object();
    nlohmann::json provenance = nlohmann::json::object();
    std::vector<std::string> notes;
};

nlohmann::json to_json(const CheckReport& report);
CheckReport report_from_json(const nlohmann::json& doc);

/// Discretisation used by a check run.
struct Resolution {
    int nodes = 32;       ///< angle grid size for circle families
    double dt = 0.0;      ///< heat-flow step bound; zero selects the grid spacing
    int layers = 0;       ///< cost-table layers; zero selects the default
    int window = 0;       ///< cost-table window; zero selects the default
    double refinement = 1.0;  ///< multiplier on the number of time samples of a check

    /// Half the nodes, twice the step, half the layers and half the time samples.
    Resolution coarsened() const;
    double step(const SpatialGrid& grid) const;
    CostTableOptions cost_options() const;
};

struct CheckOptions {
    Resolution resolution;
    /// Repeat the check at the coarsened resolution and set tol = 2 |margin - coarse margin|.
    bool calibrate = true;
    /// Lower bound on the tolerance, relative to the scale of the compared quantities.
    double tolerance_floor = 1e-9;
    /// Fixed tolerance; disables calibration when set.
    std::optional<double> tolerance;
    /// A passing margin smaller than the tolerance becomes indeterminate when the tolerance exceeds this cap.
    double tolerance_cap = std::numeric_limits<double>::infinity();
};

/// Result of a single run of a check at one resolution, before calibration.
struct CheckRun {
    double margin = 0.0;
    /// Magnitude of the compared quantities; scales the tolerance floor.
    double scale = 1.0;
    /// Extra tolerance owed to the run itself (for example Dini surrogate spread).
    double extra_tolerance = 0.0;
    bool unresolved = false;
    nlohmann::json witness = nlohmann::json::object();
    std::vector<std::string> notes;
};

/// Runs `run` at the requested resolution (and at the coarsened one when
/// calibrating) and assembles the report with its verdict.
CheckReport calibrated_check(const std::string& check_id, const std::string& family, nlohmann::json parameters,
                             const std::function<CheckRun(const Resolution&)>& run, const CheckOptions& options);

/// Applies the verdict rule to a report whose margin and tolerance are set.
void assign_verdict(CheckReport& report, double tolerance_cap = std::numeric_limits<double>::infinity());

/// A probability measure described independently of the grid.
struct MeasureSpec {
    enum class Kind { uniform, density, dirac };
    Kind kind = Kind::uniform;
    SmoothFn density;        ///< density(theta) relative to the volume form, for Kind::density
    double location = 0.0;   ///< angle of the Dirac mass (nearest node)

    static MeasureSpec uniform();
    static MeasureSpec from_density(SmoothFn density);
    static MeasureSpec dirac(double angle);

    DiscreteMeasure build(const GridPtr& grid, const FlowSpec& flow, double forward_time) const;
    nlohmann::json to_json() const;
};

/// Test function v(theta) sampled on a grid at a forward time.
ScalarField sample_field(const SmoothFn& v, const GridPtr& grid, double forward_time, double scale = 1.0);

/// |grad w|^2 at each node by centred differences in the metric at forward time t.
std::vector<double> gradient_sq(const ScalarField& field, const FlowSpec& flow, double t);

// ---------------------------------------------------------------------------
// Gradient estimates

enum class EstimateFamily { L0, Lminus, Lminus_parametric, Lplus, L0_dimensional };

std::string to_string(EstimateFamily family);
EstimateFamily estimate_family_from_string(const std::string& name);

/// Times are natural: forward (s < t) for L0 and Lplus, backward (sigma = s < tau = t)
/// for the Lminus forms and the dimensional L0 form.
struct GradientEstimateParams {
    EstimateFamily family = EstimateFamily::L0;
    double s = 0.0;
    double t = 0.0;
    double shift = 0.0;               ///< added to the natural time in the Lminus and Lplus weights
    double dimension = 0.0;           ///< N for the dimensional form; zero selects the flow dimension
    std::vector<double> lambdas{1.0};  ///< scalings of v, or the parameter of the parametric Lminus form
};

CheckReport check_gradient_estimate(const FlowSpec& flow, const SmoothFn& v, const GradientEstimateParams& params,
                                    const CheckOptions& options = {});

// ---------------------------------------------------------------------------
// Wasserstein contractions

enum class ContractionForm { L0, Lminus, Lplus, four_time, static_kuwada, L0_dimensional };

std::string to_string(ContractionForm form);
ContractionForm contraction_form_from_string(const std::string& name);

struct ContractionParams {
    ContractionForm form = ContractionForm::L0;
    double s = 0.0;          ///< natural start time (sigma for backward forms)
    double t = 0.0;          ///< natural end time (tau for backward forms)
    double h = 0.1;          ///< L0 flow time
    double alpha = 1.2;      ///< Lminus and Lplus time factor
    double S = 0.0;          ///< dimensional form: later pair (S, T)
    double T = 0.0;
    double sigma2 = 0.0;     ///< four-time form: (s, sigma2) and (t, tau2)
    double tau2 = 0.0;
    double dimension = 0.0;  ///< N for the dimensional form; zero selects the flow dimension
};

CheckReport check_wasserstein_contraction(const FlowSpec& flow, const MeasureSpec& mu, const MeasureSpec& nu,
                                          const ContractionParams& params, const CheckOptions& options = {});

/// Shift T0 making the four times multiplicatively related; throws PreconditionError
/// naming the violated ordering.
double four_time_shift(double sigma1, double sigma2, double tau1, double tau2);

// ---------------------------------------------------------------------------
// Entropy convexity and EVI

struct ConvexityParams {
    CostKind kind = CostKind::L0;
    double s = 0.0;
    double t = 0.0;
    double r = 0.0;  ///< intermediate natural time in (s, t)
};

CheckReport check_entropy_convexity(const FlowSpec& flow, const MeasureSpec& mu_s, const MeasureSpec& mu_t,
                                    const ConvexityParams& params, const CheckOptions& options = {});

struct EviParams {
    CostKind kind = CostKind::L0;
    double s = 0.0;        ///< natural time of the first measure
    double t = 0.0;        ///< natural time of the second measure
    double probe_a = 0.0;  ///< L0: a in (s, t]; Lminus: eta in [s, t)
    double probe_b = 0.0;  ///< L0: b <= s; Lminus: varsigma >= t
    double h = 0.05;       ///< largest Dini step; h/2 and h/4 are also used
};

CheckReport check_evi(const FlowSpec& flow, const MeasureSpec& mu, const MeasureSpec& nu, const EviParams& params,
                      const CheckOptions& options = {});

/// Sum of the two L0 EVI margins at a = t and b = s against the contraction rate
/// of W_{L0^{s-h,t-h}}(P mu, P nu) as h -> 0.
CheckReport check_evi_contraction_consistency(const FlowSpec& flow, const MeasureSpec& mu, const MeasureSpec& nu,
                                              double s, double t, double h, const CheckOptions& options = {});

// ---------------------------------------------------------------------------
// Hamilton-Jacobi preservation

struct HjPreservationParams {
    CostKind kind = CostKind::L0;
    double t1 = 0.0;       ///< natural window of the preserved field
    double t2 = 0.0;
    double h = 0.1;        ///< L0 flow time
    double alpha = 1.2;    ///< Lminus time factor
    int samples = 8;       ///< time samples of the field
    /// Input HJ residual allowed before the check reports a precondition failure.
    double input_tolerance = 0.05;
};

CheckReport check_hj_preservation(const FlowSpec& flow, const SmoothFn& phi, const HjPreservationParams& params,
                                  const CheckOptions& options = {});

// ---------------------------------------------------------------------------
// Shifted Bochner equivalence

/// Values at a point of a heat-flow solution v and of the operator
/// Lambda = (-d/dtau - Laplacian) applied to |grad v|^2, Laplacian v and S.
struct BochnerPointData {
    double grad_sq = 0.0;
    double lap_v = 0.0;
    double S = 0.0;
    double op_grad_sq = 0.0;
    double op_lap_v = 0.0;
    double op_S = 0.0;
};

/// Dimensional L0 Bochner quantity Lambda(|grad v|^2 - 2 Lap v - S) + (2/N)(S + Lap v)^2.
double l0_dimensional_bochner(const BochnerPointData& data, double N);
/// Dimensional Lminus Bochner quantity of c v with c = shift + tau0, assembled with the
/// product rule for the time-dependent coefficients.
double lminus_dimensional_bochner(const BochnerPointData& data, double shift, double tau0, double N);
/// Completion-of-square correction (2/N)(Lap v + S - N / (2 c))^2.
double bochner_shift_correction(const BochnerPointData& data, double shift, double tau0, double N);

CheckReport check_shifted_bochner_equivalence(const std::vector<BochnerPointData>& points,
                                              const std::vector<double>& shifts, double tau0, double N);

// ---------------------------------------------------------------------------
// Blow-up bound

/// Lower bound S_sigma >= (tau^2 inf S_tau - (n/2)(tau - sigma)) / sigma^2 at the sampled
/// backward times, plus the predicted existence bound tau - n / (2 inf S_tau).
CheckReport check_blowup_bound(const FlowSpec& flow, double tau, const std::vector<double>& sigmas,
                               const CheckOptions& options = {});

// ---------------------------------------------------------------------------
// Monotonicity of F and W

struct MonotonicityParams {
    std::string functional = "F";  ///< F, W or entropy
    double tau_start = 0.0;
    double tau_end = 1.0;
};

CheckReport check_monotonicity(const FlowSpec& flow, const MeasureSpec& mu, const MonotonicityParams& params,
                               const CheckOptions& options = {});

/// Pointwise D >= 0 at sampled (t, x).
CheckReport check_d_condition(const FlowSpec& flow, int time_samples, int angle_samples, double tol = 1e-10);

}  // namespace dflow
