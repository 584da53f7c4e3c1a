#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dflow/flow.hpp"
#include "dflow/grid.hpp"

namespace dflow {

enum class CostKind { L0, Lminus, Lplus };

std::string to_string(CostKind kind);
CostKind cost_kind_from_string(const std::string& name);

/// Natural-time interval of a cost: forward times for L0 and Lplus, backward times for Lminus.
struct CostWindow {
    double s = 0.0;
    double t = 0.0;
};

/// Which action a cost is built from.
///
/// The time weight is 1 for L0 and sqrt(r + shift) for Lminus and Lplus, where r
/// is the natural time. A normalised family multiplies the action by the
/// factor of its normalisation window: (t - s) for L0 and
/// sqrt(t + shift) - sqrt(s + shift) for the other kinds.
struct CostFamily {
    CostKind kind = CostKind::L0;
    double shift = 0.0;
    bool normalized = false;
    bool weighted = false;

    std::string label() const;
    double time_weight(double r) const;
    double normalization(const CostWindow& window) const;
    /// Natural time of forward time t on `flow`.
    double natural_time(const FlowSpec& flow, double forward) const;
    double forward_time(const FlowSpec& flow, double natural) const;
    /// Throws DomainError when some time of the window is not admissible.
    void require_window(const FlowSpec& flow, const CostWindow& window) const;
};

/// Half the weighted Lagrangian at natural time r; `window` selects the normalisation.
double lagrangian_eval(const CostFamily& family, const Eigen::VectorXd& v, double x, double r, const FlowSpec& flow,
                       const std::optional<CostWindow>& window = std::nullopt);

/// Legendre transform of lagrangian_eval in the velocity.
double hamiltonian_eval(const CostFamily& family, const Eigen::VectorXd& w, double x, double r, const FlowSpec& flow,
                        const std::optional<CostWindow>& window = std::nullopt);

struct CostTableOptions {
    int layers = 0;   ///< time subdivisions; 0 selects ceil((t - s) / h)
    int window = 0;   ///< transition window in nodes (odd); 0 selects the smallest admissible >= 5
    bool keep_paths = false;
    /// Fixed normalisation window; defaults to the table's own window.
    std::optional<CostWindow> normalization_window;
};

/// Matrix of minimal actions L^{s,t}(x_i, y_j) between grid nodes.
struct CostTable {
    CostFamily family;
    double s = 0.0;
    double t = 0.0;
    double forward_s = 0.0;
    double forward_t = 0.0;
    int layers = 0;
    int window = 0;
    GridPtr grid;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values;
    std::string grid_hash;

    /// Lifted angles of the optimal path from x_i (at s) to y_j (at t), sampled at
    /// layers + 1 equally spaced natural times. Requires keep_paths.
    const std::vector<double>& path(int i, int j) const;
    bool has_paths() const { return !paths_.empty(); }
    int size() const { return static_cast<int>(values.rows()); }

    std::vector<std::vector<double>> paths_;
};

CostTable cost_table(const FlowSpec& flow, const CostFamily& family, double s, double t, const GridPtr& grid,
                     const CostTableOptions& options = {});

/// Discrete inf-convolution Q phi(y_j) = min_i phi(x_i) + L(x_i, y_j).
ScalarField hopf_lax(const ScalarField& phi, const CostTable& table);
/// Backward inf-convolution min_j phi(y_j) + L(x_i, y_j) over the second argument.
ScalarField hopf_lax_backward(const ScalarField& phi, const CostTable& table);

/// One sample of a Hopf-Lax trajectory.
struct HopfLaxSample {
    double r = 0.0;  ///< natural time
    ScalarField value;
};

/// Q^{s,r} phi at each natural time r (tables built with the given options).
std::vector<HopfLaxSample> hopf_lax_trajectory(const ScalarField& phi, const FlowSpec& flow, const CostFamily& family,
                                               double s, const std::vector<double>& times,
                                               const CostTableOptions& options = {});

/// Measure-integrated Hamilton-Jacobi residual of a Hopf-Lax trajectory
/// (maximum over interior samples), using upwind gradients.
double hj_residual(const std::vector<HopfLaxSample>& trajectory, const FlowSpec& flow, const CostFamily& family,
                   const DiscreteMeasure& test_measure,
                   const std::optional<CostWindow>& normalization_window = std::nullopt);

/// Upwind squared gradient norm |dQ|^2_{g} at forward time t for a solution of a
/// Hamilton-Jacobi equation with Hamiltonian increasing in |dQ|.
std::vector<double> upwind_gradient_sq(const ScalarField& field, const FlowSpec& flow, double forward_time);

/// CSV with a first line `# {json metadata}` followed by the matrix rows.
void write_cost_table_csv(std::ostream& out, const CostTable& table);

}  // namespace dflow
