#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "dflow/errors.hpp"
#include "dflow/transport.hpp"

namespace dflow {

namespace {

/// Transportation simplex on a spanning-tree basis of the bipartite graph.
///
/// Graph nodes are the rows 0..n-1 followed by the columns n..n+m-1. Pricing is
/// Dantzig's rule; after a run of degenerate pivots it switches to Bland's rule
/// until the objective moves again.
class NetworkSimplex {
public:
    NetworkSimplex(const std::vector<double>& source, const std::vector<double>& target,
                   const Eigen::Ref<const Eigen::MatrixXd>& cost)
        : n_(static_cast<int>(source.size())),
          m_(static_cast<int>(target.size())),
          source_(source),
          target_(target),
          cost_(cost),
          basis_of_cell_(static_cast<std::size_t>(n_) * m_, -1),
          adjacency_(n_ + m_),
          row_potential_(n_),
          col_potential_(m_) {
        scale_ = std::max(1.0, cost_.cwiseAbs().maxCoeff());
        northwest_corner();
    }

    int run() {
        const double tol = 1e-12 * scale_;
        const long limit = 200L * n_ * m_ + 1000;
        int degenerate_run = 0;
        bool bland = false;
        int pivots = 0;
        for (long iteration = 0;; ++iteration) {
            if (iteration > limit) throw SolverError("network simplex exceeded its pivot limit");
            compute_potentials();
            int enter_i = -1, enter_j = -1;
            double best = -tol;
            for (int i = 0; i < n_ && !(bland && enter_i >= 0); ++i) {
                for (int j = 0; j < m_; ++j) {
                    if (basis_of_cell_[cell(i, j)] >= 0) continue;
                    const double reduced = cost_(i, j) - row_potential_[i] - col_potential_[j];
                    if (reduced < best) {
                        best = bland ? -tol : reduced;
                        enter_i = i;
                        enter_j = j;
                        if (bland) break;
                    }
                }
            }
            if (enter_i < 0) break;
            const double moved = pivot(enter_i, enter_j);
            ++pivots;
            if (moved > 0.0) {
                degenerate_run = 0;
                bland = false;
            } else if (++degenerate_run > 2 * (n_ + m_)) {
                bland = true;
            }
        }
        compute_potentials();
        recompute_flows();
        return pivots;
    }

    Eigen::MatrixXd plan() const {
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n_, m_);
        for (std::size_t e = 0; e < edge_row_.size(); ++e) p(edge_row_[e], edge_col_[e]) = flow_[e];
        return p;
    }
    const std::vector<double>& row_potential() const { return row_potential_; }

private:
    std::size_t cell(int i, int j) const { return static_cast<std::size_t>(i) * m_ + j; }

    void add_edge(int i, int j, double amount) {
        const int e = static_cast<int>(edge_row_.size());
        edge_row_.push_back(i);
        edge_col_.push_back(j);
        flow_.push_back(amount);
        basis_of_cell_[cell(i, j)] = e;
        adjacency_[i].push_back(e);
        adjacency_[n_ + j].push_back(e);
    }

    void remove_from(std::vector<int>& list, int e) { list.erase(std::find(list.begin(), list.end(), e)); }

    void northwest_corner() {
        std::vector<double> supply = source_, demand = target_;
        int i = 0, j = 0;
        while (true) {
            const double amount = std::max(0.0, std::min(supply[i], demand[j]));
            add_edge(i, j, amount);
            supply[i] -= amount;
            demand[j] -= amount;
            if (i == n_ - 1 && j == m_ - 1) break;
            if (j == m_ - 1 || (i < n_ - 1 && supply[i] <= demand[j]))
                ++i;
            else
                ++j;
        }
    }

    int other_end(int e, int node) const { return node < n_ ? n_ + edge_col_[e] : edge_row_[e]; }

    void compute_potentials() {
        std::vector<char> seen(n_ + m_, 0);
        std::deque<int> queue{0};
        seen[0] = 1;
        row_potential_[0] = 0.0;
        while (!queue.empty()) {
            const int node = queue.front();
            queue.pop_front();
            for (int e : adjacency_[node]) {
                const int next = other_end(e, node);
                if (seen[next]) continue;
                seen[next] = 1;
                const double c = cost_(edge_row_[e], edge_col_[e]);
                if (next < n_)
                    row_potential_[next] = c - col_potential_[node - n_];
                else
                    col_potential_[next - n_] = c - row_potential_[node];
                queue.push_back(next);
            }
        }
    }

    /// Tree edges on the path from column j to row i, in order.
    std::vector<int> tree_path(int i, int j) const {
        std::vector<int> parent_edge(n_ + m_, -1);
        std::vector<char> seen(n_ + m_, 0);
        std::deque<int> queue{n_ + j};
        seen[n_ + j] = 1;
        while (!queue.empty() && !seen[i]) {
            const int node = queue.front();
            queue.pop_front();
            for (int e : adjacency_[node]) {
                const int next = other_end(e, node);
                if (seen[next]) continue;
                seen[next] = 1;
                parent_edge[next] = e;
                queue.push_back(next);
            }
        }
        std::vector<int> path;
        for (int node = i; node != n_ + j;) {
            const int e = parent_edge[node];
            path.push_back(e);
            node = other_end(e, node);
        }
        std::reverse(path.begin(), path.end());
        return path;
    }

    double pivot(int i, int j) {
        const std::vector<int> path = tree_path(i, j);
        double theta = std::numeric_limits<double>::infinity();
        int leaving = -1;
        for (std::size_t k = 0; k < path.size(); k += 2) {
            const int e = path[k];
            const double f = flow_[e];
            if (f < theta || (f == theta && cell(edge_row_[e], edge_col_[e]) <
                                                cell(edge_row_[leaving], edge_col_[leaving]))) {
                theta = f;
                leaving = e;
            }
        }
        theta = std::max(theta, 0.0);
        for (std::size_t k = 0; k < path.size(); ++k) flow_[path[k]] += (k % 2 == 0 ? -theta : theta);
        flow_[leaving] = 0.0;

        const int li = edge_row_[leaving], lj = edge_col_[leaving];
        basis_of_cell_[cell(li, lj)] = -1;
        remove_from(adjacency_[li], leaving);
        remove_from(adjacency_[n_ + lj], leaving);
        edge_row_[leaving] = i;
        edge_col_[leaving] = j;
        flow_[leaving] = theta;
        basis_of_cell_[cell(i, j)] = leaving;
        adjacency_[i].push_back(leaving);
        adjacency_[n_ + j].push_back(leaving);
        return theta;
    }

    /// Re-derives basic flows from the marginals by peeling tree leaves.
    void recompute_flows() {
        std::vector<double> residual(n_ + m_);
        for (int i = 0; i < n_; ++i) residual[i] = source_[i];
        for (int j = 0; j < m_; ++j) residual[n_ + j] = target_[j];
        std::vector<int> degree(n_ + m_);
        for (int v = 0; v < n_ + m_; ++v) degree[v] = static_cast<int>(adjacency_[v].size());
        std::vector<char> done_edge(flow_.size(), 0);
        std::deque<int> leaves;
        for (int v = 0; v < n_ + m_; ++v)
            if (degree[v] == 1) leaves.push_back(v);
        while (!leaves.empty()) {
            const int v = leaves.front();
            leaves.pop_front();
            if (degree[v] != 1) continue;
            int edge = -1;
            for (int e : adjacency_[v])
                if (!done_edge[e]) edge = e;
            done_edge[edge] = 1;
            const double amount = std::max(0.0, residual[v]);
            flow_[edge] = amount;
            const int w = other_end(edge, v);
            residual[v] -= amount;
            residual[w] -= amount;
            --degree[v];
            if (--degree[w] == 1) leaves.push_back(w);
        }
    }

    int n_, m_;
    const std::vector<double>& source_;
    const std::vector<double>& target_;
    Eigen::Ref<const Eigen::MatrixXd> cost_;
    double scale_ = 1.0;
    std::vector<int> basis_of_cell_;
    std::vector<std::vector<int>> adjacency_;
    std::vector<int> edge_row_, edge_col_;
    std::vector<double> flow_;
    std::vector<double> row_potential_, col_potential_;
};

}  // namespace

TransportSolution solve_transport(const std::vector<double>& source, const std::vector<double>& target,
                                  const Eigen::Ref<const Eigen::MatrixXd>& cost) {
    const int n = static_cast<int>(source.size()), m = static_cast<int>(target.size());
    if (n == 0 || m == 0) throw ShapeError("transport marginals must be non-empty");
    if (cost.rows() != n || cost.cols() != m) throw ShapeError("cost matrix does not match the marginals");
    if (static_cast<long>(n) * m > kMaxTransportEntries)
        throw ParameterError("transport problem exceeds " + std::to_string(kMaxTransportEntries) + " entries");
    if (!cost.allFinite()) throw ContractError("transport cost must be finite");
    double total_source = 0.0, total_target = 0.0;
    for (double p : source) {
        if (!(p >= 0.0)) throw ContractError("source marginal must be non-negative");
        total_source += p;
    }
    for (double p : target) {
        if (!(p >= 0.0)) throw ContractError("target marginal must be non-negative");
        total_target += p;
    }
    if (std::abs(total_source - total_target) > 1e-10)
        throw ContractError("marginals have different mass: " + std::to_string(total_source) + " vs " +
                            std::to_string(total_target));

    NetworkSimplex simplex(source, target, cost);
    TransportSolution out;
    out.pivots = simplex.run();
    out.plan = simplex.plan();
    out.value = (out.plan.array() * cost.array()).sum();
    out.phi = simplex.row_potential();
    out.psi.resize(m);
    for (int j = 0; j < m; ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) best = std::min(best, cost(i, j) - out.phi[i]);
        out.psi[j] = best;
    }
    out.dual_value = 0.0;
    for (int i = 0; i < n; ++i) out.dual_value += out.phi[i] * source[i];
    for (int j = 0; j < m; ++j) out.dual_value += out.psi[j] * target[j];
    out.duality_gap = std::abs(out.value - out.dual_value);
    double err = 0.0;
    const Eigen::VectorXd rows = out.plan.rowwise().sum(), cols = out.plan.colwise().sum();
    for (int i = 0; i < n; ++i) err = std::max(err, std::abs(rows[i] - source[i]));
    for (int j = 0; j < m; ++j) err = std::max(err, std::abs(cols[j] - target[j]));
    out.marginal_error = err;
    return out;
}

}  // namespace dflow
