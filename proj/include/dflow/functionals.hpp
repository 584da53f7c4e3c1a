#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dflow/flow.hpp"
#include "dflow/grid.hpp"
#include "dflow/pde.hpp"

namespace dflow {

enum class FunctionalKind { F, W, entropy, wl_distance };

std::string to_string(FunctionalKind kind);
FunctionalKind functional_kind_from_string(const std::string& name);

/// Values of a functional along the conjugate heat flow at increasing backward times.
struct FunctionalTrace {
    FunctionalKind functional = FunctionalKind::F;
    std::vector<double> times;
    std::vector<double> values;
    std::string provenance;

    /// Largest increase between consecutive samples (zero for a non-increasing trace).
    double max_increase() const;
    /// Centred finite-difference derivative in time (one-sided at the ends).
    std::vector<double> derivative() const;
};

/// Fisher information plus scalar term: sum (|grad ln rho|^2 + S) p with centred gradients.
double fisher_F(const DiscreteMeasure& mu, const FlowSpec& flow);

/// Entropy functional sum [tau (|grad f|^2 + S) + f - n] p with rho = (4 pi tau)^{-n/2} e^{-f}.
double perelman_W(const DiscreteMeasure& mu, const FlowSpec& flow, double tau);

/// Riemannian distance matrix between grid nodes at forward time t.
Eigen::MatrixXd distance_matrix(const SpatialGrid& grid, const FlowSpec& flow, double t);

/// Half the squared Wasserstein distance at the metric of forward time t.
double half_w2_squared(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const FlowSpec& flow, double t);

struct TraceOptions {
    HeatOptions heat;
    /// Second initial measure, required for the wl_distance functional.
    std::optional<DiscreteMeasure> companion;
};

/// Propagates mu_init from backward time tau_start to tau_end by the conjugate heat
/// flow in `steps` equal steps, recording the functional at each sample.
FunctionalTrace monotonicity_trace(const DiscreteMeasure& mu_init, const FlowSpec& flow, double tau_start,
                                   double tau_end, FunctionalKind functional, int steps,
                                   const TraceOptions& options = {});

/// d/dt F along a round-sphere flow with a uniform measure, from r^2 and its derivatives.
double round_sphere_F_derivative(const FlowSpec& flow, double t);

/// Calibration tol = 2 max |coarse - fine| over the coarse samples (fine sampled at
/// twice the rate, so coarse sample k matches fine sample 2k).
double calibrated_tolerance(const FunctionalTrace& coarse, const FunctionalTrace& fine);

/// CSV rows `tau,value,derivative` with a header.
void write_trace_csv(std::ostream& out, const FunctionalTrace& trace);

}  // namespace dflow
