#include "dflow/lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "dflow/errors.hpp"
#include "dflow/geometry.hpp"
#include "dflow/hash.hpp"
#include "dflow/parallel.hpp"
#include "dflow/quadrature.hpp"
#include "dflow/simd.hpp"

namespace dflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

std::string to_string(CostKind kind) {
    switch (kind) {
        case CostKind::L0: return "L0";
        case CostKind::Lminus: return "Lminus";
        case CostKind::Lplus: return "Lplus";
    }
    return "unknown";
}

CostKind cost_kind_from_string(const std::string& name) {
    if (name == "L0") return CostKind::L0;
    if (name == "Lminus") return CostKind::Lminus;
    if (name == "Lplus") return CostKind::Lplus;
    throw ParameterError("unknown cost kind '" + name + "'");
}

std::string CostFamily::label() const {
    std::string s = (normalized ? "normalized " : "") + to_string(kind);
    if (shift != 0.0) s += " shift " + std::to_string(shift);
    if (weighted) s += " weighted";
    return s;
}

double CostFamily::time_weight(double r) const {
    if (kind == CostKind::L0) return 1.0;
    const double shifted = r + shift;
    if (!(shifted > 0.0))
        throw DomainError(to_string(kind) + " requires time + shift > 0, got " + std::to_string(shifted));
    return std::sqrt(shifted);
}

double CostFamily::normalization(const CostWindow& window) const {
    if (!normalized) return 1.0;
    if (kind == CostKind::L0) return window.t - window.s;
    if (!(window.s + shift > 0.0))
        throw DomainError(to_string(kind) + " normalisation requires start + shift > 0");
    return std::sqrt(window.t + shift) - std::sqrt(window.s + shift);
}

double CostFamily::natural_time(const FlowSpec& flow, double forward) const {
    if (kind != CostKind::Lminus) return forward;
    if (flow.orientation != TimeOrientation::backward)
        throw ParameterError("Lminus requires a backward oriented flow");
    return flow.to_natural(forward);
}

double CostFamily::forward_time(const FlowSpec& flow, double natural) const {
    if (kind != CostKind::Lminus) return natural;
    if (flow.orientation != TimeOrientation::backward)
        throw ParameterError("Lminus requires a backward oriented flow");
    return flow.to_forward(natural);
}

void CostFamily::require_window(const FlowSpec& flow, const CostWindow& window) const {
    if (!(window.s <= window.t))
        throw ParameterError("cost window requires s <= t, got [" + std::to_string(window.s) + ", " +
                             std::to_string(window.t) + "]");
    flow.require_time(forward_time(flow, window.s), "cost window start");
    flow.require_time(forward_time(flow, window.t), "cost window end");
    time_weight(window.s);
    time_weight(window.t);
    if (weighted && !flow.is_weighted()) throw ParameterError("weighted cost requires a weighted flow");
}

namespace {

double total_weight(const CostFamily& family, double r, const std::optional<CostWindow>& window) {
    if (family.normalized && !window) throw ParameterError("normalized cost family requires a window");
    return family.time_weight(r) * (window ? family.normalization(*window) : 1.0);
}

double scalar_for(const CostFamily& family, const GeometrySnapshot& snap) {
    if (!family.weighted) return snap.S;
    if (!snap.weighted) throw ParameterError("weighted cost requires a weighted flow");
    return snap.weighted->S_U;
}

}  // namespace

double lagrangian_eval(const CostFamily& family, const Eigen::VectorXd& v, double x, double r, const FlowSpec& flow,
                       const std::optional<CostWindow>& window) {
    const double forward = family.forward_time(flow, r);
    flow.require_time(forward, "lagrangian_eval");
    const double weight = total_weight(family, r, window);
    const GeometrySnapshot snap = snapshot(flow, forward, x);
    if (v.size() != snap.dim) throw ShapeError("velocity dimension does not match the flow");
    return 0.5 * weight * (v.dot(snap.g * v) + scalar_for(family, snap));
}

double hamiltonian_eval(const CostFamily& family, const Eigen::VectorXd& w, double x, double r, const FlowSpec& flow,
                        const std::optional<CostWindow>& window) {
    const double forward = family.forward_time(flow, r);
    flow.require_time(forward, "hamiltonian_eval");
    const double weight = total_weight(family, r, window);
    if (weight == 0.0) throw DegenerateCostError("Hamiltonian of a cost with zero time weight");
    const GeometrySnapshot snap = snapshot(flow, forward, x);
    if (w.size() != snap.dim) throw ShapeError("covector dimension does not match the flow");
    const double w_sq = w.dot(snap.g.ldlt().solve(w));
    return w_sq / (2.0 * weight) - 0.5 * weight * scalar_for(family, snap);
}

const std::vector<double>& CostTable::path(int i, int j) const {
    if (paths_.empty()) throw PreconditionError("cost table was built without keep_paths");
    if (i < 0 || j < 0 || i >= size() || j >= size()) throw ShapeError("path index out of range");
    return paths_[static_cast<std::size_t>(i) * size() + j];
}

namespace {

/// Integral of f over the natural window; sqrt-weighted kinds substitute
/// r = rho^2 - shift so that integrable endpoint singularities become smooth.
template <class F>
double integrate_natural(const CostFamily& family, const CostWindow& window, F&& f) {
    if (family.kind == CostKind::L0) return gauss_legendre(f, window.s, window.t);
    auto in_rho = [&](double rho) { return 2.0 * rho * f(rho * rho - family.shift); };
    return gauss_legendre(in_rho, std::sqrt(window.s + family.shift), std::sqrt(window.t + family.shift));
}

/// Local geometry entering the action along a circle path.
struct CircleLocal {
    double metric = 1.0;     ///< exp(2u)
    double metric_d = 0.0;   ///< d/dtheta
    double metric_dd = 0.0;
    double scalar = 0.0;     ///< S or S_U
    double scalar_d = 0.0;
    double scalar_dd = 0.0;
};

/// Evaluates the action of circle paths on a fixed layer structure.
class CircleAction {
public:
    CircleAction(const FlowSpec& flow, const CostFamily& family, const CostWindow& window, int layers,
                 double normalization)
        : flow_(flow), weighted_(family.weighted), layers_(layers) {
        step_ = (window.t - window.s) / layers;
        mid_forward_.resize(layers);
        mid_weight_.resize(layers);
        for (int k = 0; k < layers; ++k) {
            const double r = window.s + (k + 0.5) * step_;
            mid_forward_[k] = family.forward_time(flow, r);
            mid_weight_[k] = family.time_weight(r) * normalization;
        }
    }

    int layers() const { return layers_; }

    CircleLocal local(int k, double theta) const {
        const double t = mid_forward_[k];
        const Jet u = flow_.conformal(t, theta);
        CircleLocal out;
        out.metric = std::exp(2.0 * u.v);
        out.metric_d = 2.0 * u.x * out.metric;
        out.metric_dd = (4.0 * u.x * u.x + 2.0 * u.xx) * out.metric;
        out.scalar = -u.t;
        out.scalar_d = -u.tx;
        out.scalar_dd = -u.txx;
        if (weighted_) {
            const Jet w = flow_.weight(t, theta);
            out.scalar += w.t;
            out.scalar_d += w.tx;
            out.scalar_dd += w.txx;
        }
        return out;
    }

    double segment(int k, const CircleLocal& at_mid, double displacement) const {
        return 0.5 * mid_weight_[k] * (at_mid.metric * displacement * displacement / step_ + at_mid.scalar * step_);
    }

    double segment(int k, double from, double to) const {
        return segment(k, local(k, 0.5 * (from + to)), to - from);
    }

    double total(const std::vector<double>& path) const {
        double sum = 0.0;
        for (int k = 0; k < layers_; ++k) sum += segment(k, path[k], path[k + 1]);
        return sum;
    }

    /// Gradient and tridiagonal Hessian of the action in the interior positions.
    void derivatives(const std::vector<double>& path, std::vector<double>& grad, std::vector<double>& diag,
                     std::vector<double>& off) const {
        const int interior = layers_ - 1;
        grad.assign(interior, 0.0);
        diag.assign(interior, 0.0);
        off.assign(std::max(interior - 1, 0), 0.0);
        for (int k = 0; k < layers_; ++k) {
            const double d = path[k + 1] - path[k];
            const CircleLocal m = local(k, 0.5 * (path[k] + path[k + 1]));
            const double half_weight = 0.5 * mid_weight_[k];
            const double f_m = half_weight * (m.metric_d * d * d / step_ + m.scalar_d * step_);
            const double f_d = half_weight * 2.0 * m.metric * d / step_;
            const double f_mm = half_weight * (m.metric_dd * d * d / step_ + m.scalar_dd * step_);
            const double f_md = half_weight * 2.0 * m.metric_d * d / step_;
            const double f_dd = half_weight * 2.0 * m.metric / step_;
            const int left = k - 1;
            const int right = k;
            if (left >= 0) {
                grad[left] += 0.5 * f_m - f_d;
                diag[left] += 0.25 * f_mm - f_md + f_dd;
            }
            if (right < interior) {
                grad[right] += 0.5 * f_m + f_d;
                diag[right] += 0.25 * f_mm + f_md + f_dd;
            }
            if (left >= 0 && right < interior) off[left] += 0.25 * f_mm - f_dd;
        }
    }

private:
    const FlowSpec& flow_;
    bool weighted_;
    int layers_;
    double step_ = 0.0;
    std::vector<double> mid_forward_;
    std::vector<double> mid_weight_;
};

/// Solves (H + shift I) p = rhs for a symmetric tridiagonal H; false if not positive definite.
bool solve_shifted_tridiagonal(const std::vector<double>& diag, const std::vector<double>& off, double shift,
                               const std::vector<double>& rhs, std::vector<double>& out) {
    const std::size_t n = diag.size();
    std::vector<double> pivot(n), lower(n);
    out.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double p = diag[i] + shift;
        if (i > 0) {
            lower[i] = off[i - 1] / pivot[i - 1];
            p -= lower[i] * off[i - 1];
        }
        if (!(p > 0.0)) return false;
        pivot[i] = p;
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = rhs[i] - (i > 0 ? lower[i] * out[i - 1] : 0.0);
    for (std::size_t i = n; i-- > 0;) {
        out[i] /= pivot[i];
        if (i + 1 < n) out[i] -= lower[i + 1] * out[i + 1];
    }
    return true;
}

/// Damped Newton descent on the interior positions of a path with fixed endpoints.
double polish(const CircleAction& action, std::vector<double>& path) {
    double value = action.total(path);
    if (action.layers() < 2) return value;
    std::vector<double> grad, diag, off, step, trial;
    double damping = 0.0;
    for (int iteration = 0; iteration < 50; ++iteration) {
        action.derivatives(path, grad, diag, off);
        double grad_max = 0.0, diag_max = 0.0;
        for (std::size_t i = 0; i < grad.size(); ++i) {
            grad_max = std::max(grad_max, std::abs(grad[i]));
            diag_max = std::max(diag_max, std::abs(diag[i]));
        }
        if (grad_max <= 1e-14 * std::max(1.0, diag_max)) break;
        std::vector<double> rhs(grad.size());
        for (std::size_t i = 0; i < grad.size(); ++i) rhs[i] = -grad[i];
        damping = damping > 0.0 ? damping * 0.25 : 0.0;
        while (!solve_shifted_tridiagonal(diag, off, damping, rhs, step))
            damping = std::max(2.0 * damping, 1e-10 * std::max(1.0, diag_max));
        double slope = 0.0;
        for (std::size_t i = 0; i < grad.size(); ++i) slope += grad[i] * step[i];
        if (slope >= 0.0) break;
        double alpha = 1.0;
        bool accepted = false;
        trial = path;
        for (int halving = 0; halving < 40; ++halving) {
            for (std::size_t i = 0; i < step.size(); ++i) trial[i + 1] = path[i + 1] + alpha * step[i];
            const double candidate = action.total(trial);
            if (candidate <= value + 1e-4 * alpha * slope) {
                accepted = candidate < value || alpha == 1.0;
                if (accepted) {
                    path.swap(trial);
                    value = candidate;
                }
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
    }
    return value;
}

std::string grid_fingerprint(const SpatialGrid& grid) {
    Fingerprint fp;
    fp.add(grid.is_single_cell() ? std::string_view("single") : std::string_view("circle"));
    fp.add(static_cast<long long>(grid.size()));
    fp.add(grid.spacing());
    return fp.hex();
}

/// Principal lifted displacement in (-pi, pi] from angle a to angle b.
double principal_displacement(double from, double to) {
    double d = std::remainder(to - from, kTwoPi);
    if (d <= -kTwoPi / 2) d += kTwoPi;
    return d;
}

void homogeneous_table(CostTable& table, const FlowSpec& flow, const CostWindow& window, double normalization) {
    const CostFamily& family = table.family;
    const double value = integrate_natural(family, window, [&](double r) {
        const GeometrySnapshot snap = snapshot(flow, family.forward_time(flow, r));
        return 0.5 * family.time_weight(r) * normalization * scalar_for(family, snap);
    });
    table.values.setConstant(table.grid->size(), table.grid->size(), value);
}

void spatially_constant_table(CostTable& table, const FlowSpec& flow, const CostWindow& window, double normalization,
                              bool keep_paths) {
    const CostFamily& family = table.family;
    auto inverse_stiffness = [&](double r) {
        const double t = family.forward_time(flow, r);
        return 1.0 / (family.time_weight(r) * normalization * std::exp(2.0 * flow.conformal.value(t)));
    };
    auto scalar_density = [&](double r) {
        const double t = family.forward_time(flow, r);
        double s = -flow.conformal(t).t;
        if (family.weighted) s += flow.weight(t).t;
        return 0.5 * family.time_weight(r) * normalization * s;
    };
    const double compliance = integrate_natural(family, window, inverse_stiffness);
    const double scalar_part = integrate_natural(family, window, scalar_density);
    const int n = table.grid->size();
    std::vector<double> fraction;
    if (keep_paths) {
        fraction.resize(table.layers + 1);
        const double dr = (window.t - window.s) / table.layers;
        for (int k = 0; k <= table.layers; ++k)
            fraction[k] = integrate_natural(family, CostWindow{window.s, window.s + k * dr}, inverse_stiffness) /
                          compliance;
        fraction[table.layers] = 1.0;
        table.paths_.assign(static_cast<std::size_t>(n) * n, {});
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double from = table.grid->node(i);
            const double d = principal_displacement(from, table.grid->node(j));
            table.values(i, j) = d * d / (2.0 * compliance) + scalar_part;
            if (keep_paths) {
                auto& p = table.paths_[static_cast<std::size_t>(i) * n + j];
                p.resize(table.layers + 1);
                for (int k = 0; k <= table.layers; ++k) p[k] = from + d * fraction[k];
            }
        }
    }
}

void lattice_table(CostTable& table, const FlowSpec& flow, const CostWindow& window, double normalization,
                   bool keep_paths) {
    const int n = table.grid->size();
    const int layers = table.layers;
    const int half = table.window / 2;
    const double h = table.grid->spacing();
    const CircleAction action(flow, table.family, window, layers, normalization);

    const std::size_t nn = static_cast<std::size_t>(n) * n;
    std::vector<double> value(nn, kInf), next(nn);
    for (int i = 0; i < n; ++i) value[static_cast<std::size_t>(i) * n + i] = 0.0;
    std::vector<std::vector<int>> offsets(layers, std::vector<int>(nn, 0));
    std::vector<double> transition(static_cast<std::size_t>(n) * table.window);
    for (int k = 0; k < layers; ++k) {
        for (int p = 0; p < n; ++p)
            for (int o = -half; o <= half; ++o)
                transition[static_cast<std::size_t>(p) * table.window + (o + half)] =
                    action.segment(k, table.grid->node(p), table.grid->node(p) + o * h);
        std::fill(next.begin(), next.end(), kInf);
        int* tags = offsets[k].data();
        for (int q = 0; q < n; ++q) {
            double* row = next.data() + static_cast<std::size_t>(q) * n;
            int* row_tags = tags + static_cast<std::size_t>(q) * n;
            for (int o = -half; o <= half; ++o) {
                const int p = table.grid->wrap(static_cast<long>(q) - o);
                simd::minplus_relax(row, row_tags, value.data() + static_cast<std::size_t>(p) * n,
                                    transition[static_cast<std::size_t>(p) * table.window + (o + half)], o, n);
            }
        }
        value.swap(next);
    }

    if (keep_paths) table.paths_.assign(nn, {});
    parallel_for(n, [&](int i) {
        std::vector<double> path(layers + 1);
        for (int j = 0; j < n; ++j) {
            const double lattice_value = value[static_cast<std::size_t>(j) * n + i];
            if (!std::isfinite(lattice_value))
                throw InfeasiblePathError("transition window " + std::to_string(table.window) +
                                          " cannot connect node " + std::to_string(i) + " to node " +
                                          std::to_string(j) + " in " + std::to_string(layers) + " layers");
            std::vector<int> steps(layers);
            int node = j;
            for (int k = layers - 1; k >= 0; --k) {
                const int o = offsets[k][static_cast<std::size_t>(node) * n + i];
                steps[k] = o;
                node = table.grid->wrap(static_cast<long>(node) - o);
            }
            path[0] = table.grid->node(i);
            for (int k = 0; k < layers; ++k) path[k + 1] = path[k] + steps[k] * h;
            double best = polish(action, path);
            std::vector<double> best_path = path;
            const double lattice_displacement = path[layers] - path[0];
            const double principal = principal_displacement(path[0], table.grid->node(j));
            for (double d : {principal, principal - std::copysign(kTwoPi, principal)}) {
                if (std::abs(d - lattice_displacement) < 0.5 * h) continue;
                for (int k = 0; k <= layers; ++k) path[k] = path[0] + d * k / layers;
                const double candidate = polish(action, path);
                if (candidate < best) {
                    best = candidate;
                    best_path = path;
                }
            }
            table.values(i, j) = std::min(best, lattice_value);
            if (keep_paths) table.paths_[static_cast<std::size_t>(i) * n + j] = best_path;
        }
    });
}

}  // namespace

CostTable cost_table(const FlowSpec& flow, const CostFamily& family, double s, double t, const GridPtr& grid,
                     const CostTableOptions& options) {
    if (!grid) throw ParameterError("cost_table requires a grid");
    if (!(s < t)) throw ParameterError("cost_table requires s < t");
    if (grid->is_single_cell() != flow.homogeneous())
        throw ParameterError("grid type does not match the flow family");
    const CostWindow window{s, t};
    family.require_window(flow, window);
    const CostWindow norm_window = options.normalization_window.value_or(window);
    const double normalization = family.normalization(norm_window);

    CostTable table;
    table.family = family;
    table.s = s;
    table.t = t;
    table.forward_s = family.forward_time(flow, s);
    table.forward_t = family.forward_time(flow, t);
    table.grid = grid;
    table.grid_hash = grid_fingerprint(*grid);
    const int n = grid->size();
    table.values.resize(n, n);

    if (options.layers < 0) throw ParameterError("layer count must be non-negative");
    if (options.window < 0 || (options.window > 0 && options.window % 2 == 0))
        throw ParameterError("transition window must be a positive odd number of nodes");
    const double h = grid->is_single_cell() ? (t - s) : grid->spacing();
    table.layers = options.layers > 0 ? options.layers : std::max(1, static_cast<int>(std::ceil((t - s) / h - 1e-9)));
    const int reach = grid->is_single_cell() ? 0 : (n + 2 * table.layers - 1) / (2 * table.layers);
    table.window = options.window > 0 ? options.window : std::max(5, 2 * reach + 1);

    if (flow.homogeneous()) {
        homogeneous_table(table, flow, window, normalization);
        if (options.keep_paths) table.paths_.assign(1, std::vector<double>(table.layers + 1, 0.0));
    } else if (flow.spatially_constant()) {
        spatially_constant_table(table, flow, window, normalization, options.keep_paths);
    } else {
        lattice_table(table, flow, window, normalization, options.keep_paths);
    }
    return table;
}

ScalarField hopf_lax(const ScalarField& phi, const CostTable& table) {
    if (phi.size() != table.size()) throw ShapeError("field size does not match the cost table");
    ScalarField out;
    out.grid = table.grid;
    out.time = table.forward_t;
    out.values.assign(phi.size(), kInf);
    for (int i = 0; i < phi.size(); ++i)
        simd::minplus_relax(out.values.data(), table.values.row(i).data(), phi.values[i], out.values.size());
    return out;
}

ScalarField hopf_lax_backward(const ScalarField& phi, const CostTable& table) {
    if (phi.size() != table.size()) throw ShapeError("field size does not match the cost table");
    ScalarField out;
    out.grid = table.grid;
    out.time = table.forward_s;
    std::vector<double> negated(phi.values.size());
    for (std::size_t j = 0; j < negated.size(); ++j) negated[j] = -phi.values[j];
    out.values.resize(phi.size());
    for (int i = 0; i < phi.size(); ++i)
        out.values[i] = simd::min_difference(table.values.row(i).data(), negated.data(), negated.size()).value;
    return out;
}

std::vector<HopfLaxSample> hopf_lax_trajectory(const ScalarField& phi, const FlowSpec& flow, const CostFamily& family,
                                               double s, const std::vector<double>& times,
                                               const CostTableOptions& options) {
    const double start = family.forward_time(flow, s);
    if (std::abs(phi.time - start) > 1e-12 * std::max(1.0, std::abs(start)))
        throw InconsistentInputError("initial field time does not match the trajectory start");
    std::vector<HopfLaxSample> out;
    out.reserve(times.size());
    for (double r : times) {
        if (r < s) throw ParameterError("trajectory times must not precede the start");
        if (r == s) {
            out.push_back({r, phi});
            continue;
        }
        const CostTable table = cost_table(flow, family, s, r, phi.grid, options);
        out.push_back({r, hopf_lax(phi, table)});
    }
    return out;
}

std::vector<double> upwind_gradient_sq(const ScalarField& field, const FlowSpec& flow, double forward_time) {
    const int n = field.size();
    std::vector<double> out(n, 0.0);
    if (!field.grid || field.grid->is_single_cell()) return out;
    const double h = field.grid->spacing();
    for (int i = 0; i < n; ++i) {
        const double v = field.values[i];
        const double backward = (v - field.values[field.grid->wrap(i - 1)]) / h;
        const double forward = (field.values[field.grid->wrap(i + 1)] - v) / h;
        const double a = std::max(backward, 0.0), b = std::min(forward, 0.0);
        const double metric = std::exp(2.0 * flow.conformal.value(forward_time, field.grid->node(i)));
        out[i] = std::max(a * a, b * b) / metric;
    }
    return out;
}

double hj_residual(const std::vector<HopfLaxSample>& trajectory, const FlowSpec& flow, const CostFamily& family,
                   const DiscreteMeasure& test_measure, const std::optional<CostWindow>& normalization_window) {
    if (trajectory.size() < 3) throw PreconditionError("hj_residual needs at least three samples");
    if (family.normalized && !normalization_window)
        throw ParameterError("normalized family requires a fixed normalisation window");
    const double normalization = normalization_window ? family.normalization(*normalization_window) : 1.0;
    const int n = test_measure.size();
    auto integral = [&](const ScalarField& f) {
        if (f.size() != n) throw ShapeError("trajectory field does not match the test measure");
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += test_measure.mass[i] * f.values[i];
        return sum;
    };
    double worst = 0.0;
    for (std::size_t k = 1; k + 1 < trajectory.size(); ++k) {
        const HopfLaxSample& sample = trajectory[k];
        const double dr = trajectory[k + 1].r - trajectory[k - 1].r;
        if (!(dr > 0.0)) throw ParameterError("trajectory times must increase");
        const double rate = (integral(trajectory[k + 1].value) - integral(trajectory[k - 1].value)) / dr;
        const double weight = family.time_weight(sample.r) * normalization;
        if (weight == 0.0) throw DegenerateCostError("Hamiltonian of a cost with zero time weight");
        const double forward = family.forward_time(flow, sample.r);
        const std::vector<double> grad_sq = upwind_gradient_sq(sample.value, flow, forward);
        double hamiltonian = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = test_measure.grid->node(i);
            const double scalar = scalar_for(family, snapshot(flow, forward, x));
            hamiltonian += test_measure.mass[i] * (grad_sq[i] / (2.0 * weight) - 0.5 * weight * scalar);
        }
        worst = std::max(worst, std::abs(rate + hamiltonian));
    }
    return worst;
}

void write_cost_table_csv(std::ostream& out, const CostTable& table) {
    nlohmann::json meta = {{"family", table.family.label()},
                           {"kind", to_string(table.family.kind)},
                           {"shift", table.family.shift},
                           {"normalized", table.family.normalized},
                           {"weighted", table.family.weighted},
                           {"s", table.s},
                           {"t", table.t},
                           {"K", table.layers},
                           {"W", table.window},
                           {"nodes", table.size()},
                           {"grid_hash", table.grid_hash}};
    out << "# " << meta.dump() << "\n";
    char buf[32];
    for (int i = 0; i < table.size(); ++i) {
        for (int j = 0; j < table.size(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", table.values(i, j));
            out << (j ? "," : "") << buf;
        }
        out << "\n";
    }
}

}  // namespace dflow
