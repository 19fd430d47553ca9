#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "otgeo/core.hpp"
#include "otgeo/density.hpp"

namespace otgeo {

// Atomic approximation of a density: midpoint-rule atoms on a product grid.
struct DiscreteMeasure {
    std::vector<Vec> points;
    Vec weights;
    Box box;
    std::vector<int> grid_shape;  // per-axis atom counts; empty for scattered atoms
    Vec spacing;                  // per-axis cell widths when grid_shape is set

    int size() const { return static_cast<int>(points.size()); }
    int dim() const { return box.dim(); }

    bool is_grid() const { return !grid_shape.empty(); }

    // Row-major flat index of a per-axis multi-index.
    int flat_index(const std::vector<int>& idx) const {
        int f = 0;
        for (std::size_t a = 0; a < grid_shape.size(); ++a) f = f * grid_shape[a] + idx[a];
        return f;
    }

    std::vector<int> multi_index(int flat) const {
        std::vector<int> idx(grid_shape.size());
        for (int a = static_cast<int>(grid_shape.size()) - 1; a >= 0; --a) {
            idx[a] = flat % grid_shape[a];
            flat /= grid_shape[a];
        }
        return idx;
    }

    // True when the atom sits at least `margin` cells away from every face.
    bool interior(int flat, int margin = 1) const {
        std::vector<int> idx = multi_index(flat);
        for (std::size_t a = 0; a < idx.size(); ++a)
            if (idx[a] < margin || idx[a] >= grid_shape[a] - margin) return false;
        return true;
    }

    void validate() const {
        if (std::abs(weights.sum() - 1.0) > tol::weight_sum)
            throw ConfigInvalid("discrete measure weights must sum to 1");
        for (const Vec& p : points)
            if (!box.contains(p, 1e-12))
                throw ConfigInvalid("discrete measure atom outside the declared box");
    }
};

// Midpoint-rule discretization with weights proportional to density value
// times cell volume, renormalized to unit mass.
inline DiscreteMeasure discretize(const Density& density, const Box& box,
                                  const std::vector<int>& grid) {
    int n = box.dim();
    if (static_cast<int>(grid.size()) != n)
        throw ConfigInvalid("grid resolution must cover every axis");
    for (int g : grid)
        if (g < 2) throw ConfigInvalid("grid resolution must be at least 2 per axis");

    DiscreteMeasure m;
    m.box = box;
    m.grid_shape = grid;
    m.spacing = Vec(n);
    double cell_vol = 1.0;
    for (int a = 0; a < n; ++a) {
        m.spacing[a] = (box.hi[a] - box.lo[a]) / grid[a];
        cell_vol *= m.spacing[a];
    }

    int total = 1;
    for (int g : grid) total *= g;
    m.points.reserve(total);
    std::vector<double> w(total);
    std::vector<int> idx(n, 0);
    for (int f = 0; f < total; ++f) {
        Vec p(n);
        int rem = f;
        for (int a = n - 1; a >= 0; --a) {
            idx[a] = rem % grid[a];
            rem /= grid[a];
        }
        for (int a = 0; a < n; ++a) p[a] = box.lo[a] + (idx[a] + 0.5) * m.spacing[a];
        double val = density.value(p);
        if (!(val > 0.0))
            throw NonpositiveDensity("density is not strictly positive at a cell midpoint");
        w[f] = val * cell_vol;
        m.points.push_back(std::move(p));
    }
    double sum = std::accumulate(w.begin(), w.end(), 0.0);
    m.weights = Vec(total);
    for (int f = 0; f < total; ++f) m.weights[f] = w[f] / sum;
    return m;
}

inline Mat cost_matrix(const CostModel& model, const DiscreteMeasure& mu,
                       const DiscreteMeasure& nu) {
    Mat C(mu.size(), nu.size());
    for (int i = 0; i < mu.size(); ++i)
        for (int j = 0; j < nu.size(); ++j) C(i, j) = model.value(mu.points[i], nu.points[j]);
    return C;
}

struct PlanEntry {
    int i, j;
    double mass;
};

struct TransportSolution {
    std::string method;  // "exact" or "sinkhorn"
    std::vector<PlanEntry> plan;
    Vec u, ubar;           // dual potentials with u_i + ubar_j + c_ij >= 0
    std::vector<Vec> F;    // map samples per source atom
    Vec row_entropy;       // sharpness diagnostic of the conditional rows
    double objective = 0.0;
    double marginal_residual = 0.0;
    double duality_gap = 0.0;
    double final_epsilon = 0.0;  // sinkhorn only
    DiscreteMeasure mu, nu;

    // Support maximum of u_i + ubar_j + c_ij over plan entries.
    double support_violation(const Mat& C) const {
        double worst = 0.0;
        for (const PlanEntry& e : plan)
            worst = std::max(worst, std::abs(u[e.i] + ubar[e.j] + C(e.i, e.j)));
        return worst;
    }

    // Minimum of u_i + ubar_j + c_ij over all pairs (feasibility margin).
    double feasibility_margin(const Mat& C) const {
        double worst = std::numeric_limits<double>::infinity();
        for (int i = 0; i < static_cast<int>(F.size()); ++i)
            for (int j = 0; j < C.cols(); ++j)
                worst = std::min(worst, u[i] + ubar[j] + C(i, j));
        return worst;
    }
};

namespace detail {

// Barycentric map samples and row entropies from a dense plan.
inline void extract_map(TransportSolution& sol, const Mat& gamma) {
    int N = sol.mu.size(), M = sol.nu.size();
    sol.F.assign(N, Vec::Zero(sol.nu.dim()));
    sol.row_entropy = Vec::Zero(N);
    for (int i = 0; i < N; ++i) {
        double row_mass = 0.0;
        Vec bary = Vec::Zero(sol.nu.dim());
        double ent = 0.0;
        for (int j = 0; j < M; ++j) {
            double g = gamma(i, j);
            if (g <= 0.0) continue;
            row_mass += g;
            bary += g * sol.nu.points[j];
        }
        if (row_mass <= 0.0) throw SolverStall("plan row carries no mass");
        for (int j = 0; j < M; ++j) {
            double q = gamma(i, j) / row_mass;
            if (q > 0.0) ent -= q * std::log(q);
        }
        sol.F[i] = bary / row_mass;
        sol.row_entropy[i] = ent;
    }
}

}  // namespace detail

// Exact Kantorovich solve by successive shortest paths with node potentials
// (Dijkstra on reduced costs). Handles general positive weights; returns an
// optimal vertex plan together with dual potentials satisfying
// u_i + ubar_j + c_ij >= 0 with equality on the support.
inline TransportSolution solve_exact(const Mat& C, const DiscreteMeasure& mu,
                                     const DiscreteMeasure& nu) {
    int N = mu.size(), M = nu.size();
    if (C.rows() != N || C.cols() != M)
        throw ConfigInvalid("cost matrix shape does not match the measures");
    if (std::abs(mu.weights.sum() - nu.weights.sum()) > tol::weight_sum)
        throw InfeasibleMarginals("marginal masses differ");

    std::vector<double> supply(mu.weights.data(), mu.weights.data() + N);
    std::vector<double> demand(nu.weights.data(), nu.weights.data() + M);

    // potentials: reduced cost of arc i->j is C(i,j) + p_src[i] - p_snk[j] >= 0
    std::vector<double> p_src(N, 0.0), p_snk(M);
    for (int j = 0; j < M; ++j) p_snk[j] = C.col(j).minCoeff();

    // sparse flow storage: per-source list of (sink, mass)
    std::vector<std::vector<std::pair<int, double>>> flow(N);
    auto flow_ref = [&](int i, int j) -> double& {
        for (auto& e : flow[i])
            if (e.first == j) return e.second;
        flow[i].emplace_back(j, 0.0);
        return flow[i].back().second;
    };

    const double inf = std::numeric_limits<double>::infinity();
    const double supply_eps = 1e-15;
    std::vector<double> dist_src(N), dist_snk(M);
    std::vector<int> par_snk(M);  // source feeding this sink on the shortest path
    std::vector<int> par_src(N);  // sink feeding this source (via residual arc)
    std::vector<char> done_src(N), done_snk(M);

    // augmentations either saturate a source/sink or cancel a flow arc; the
    // guard only has to catch genuine stalls
    const long guard_limit = 64L * (N + M) + 65536;
    long guard = 0;
    while (true) {
        if (++guard > guard_limit)
            throw SolverStall("augmentation count exceeded the safety bound");
        double remaining = 0.0;
        for (double s : supply) remaining = std::max(remaining, s);
        if (remaining <= supply_eps) break;

        // multi-source Dijkstra over the dense bipartite residual graph
        std::fill(done_src.begin(), done_src.end(), 0);
        std::fill(done_snk.begin(), done_snk.end(), 0);
        std::fill(par_snk.begin(), par_snk.end(), -1);
        std::fill(par_src.begin(), par_src.end(), -1);
        for (int i = 0; i < N; ++i) dist_src[i] = supply[i] > supply_eps ? 0.0 : inf;
        std::fill(dist_snk.begin(), dist_snk.end(), inf);

        int target = -1;
        while (true) {
            // pick the unfinished node with the smallest tentative distance
            double best = inf;
            int bi = -1;
            bool is_src = true;
            for (int i = 0; i < N; ++i)
                if (!done_src[i] && dist_src[i] < best) { best = dist_src[i]; bi = i; is_src = true; }
            for (int j = 0; j < M; ++j)
                if (!done_snk[j] && dist_snk[j] < best) { best = dist_snk[j]; bi = j; is_src = false; }
            if (bi < 0) break;
            if (!is_src && demand[bi] > supply_eps) { target = bi; break; }
            if (is_src) {
                done_src[bi] = 1;
                double base = dist_src[bi] + p_src[bi];
                for (int j = 0; j < M; ++j) {
                    if (done_snk[j]) continue;
                    double nd = base + C(bi, j) - p_snk[j];
                    if (nd < dist_snk[j] - 1e-18) { dist_snk[j] = nd; par_snk[j] = bi; }
                }
            } else {
                done_snk[bi] = 1;
                // residual arcs j -> i exist where flow(i, j) > 0
                for (int i = 0; i < N; ++i) {
                    if (done_src[i]) continue;
                    bool has = false;
                    for (const auto& e : flow[i])
                        if (e.first == bi && e.second > 0.0) { has = true; break; }
                    if (!has) continue;
                    double nd = dist_snk[bi] - (C(i, bi) + p_src[i] - p_snk[bi]);
                    if (nd < dist_src[i] - 1e-18) { dist_src[i] = nd; par_src[i] = bi; }
                }
            }
        }
        if (target < 0) throw SolverStall("no augmenting path to an unmet demand");

        double d_target = dist_snk[target];
        // potential update keeps all residual reduced costs nonnegative
        for (int i = 0; i < N; ++i) p_src[i] += std::min(dist_src[i], d_target);
        for (int j = 0; j < M; ++j) p_snk[j] += std::min(dist_snk[j], d_target);

        // walk the path back to a source, recording arcs
        std::vector<std::pair<int, int>> fwd_arcs;   // (i, j) gaining mass
        std::vector<std::pair<int, int>> back_arcs;  // (i, j) losing mass
        double bottleneck = demand[target];
        int j = target;
        while (true) {
            int i = par_snk[j];
            fwd_arcs.emplace_back(i, j);
            if (par_src[i] < 0) {
                bottleneck = std::min(bottleneck, supply[i]);
                break;
            }
            int jprev = par_src[i];
            back_arcs.emplace_back(i, jprev);
            for (const auto& e : flow[i])
                if (e.first == jprev) bottleneck = std::min(bottleneck, e.second);
            j = jprev;
        }
        int origin = par_snk[j];

        for (const auto& [fi, fj] : fwd_arcs) flow_ref(fi, fj) += bottleneck;
        for (const auto& [bi2, bj2] : back_arcs) flow_ref(bi2, bj2) -= bottleneck;
        supply[origin] -= bottleneck;
        demand[target] -= bottleneck;
    }

    TransportSolution sol;
    sol.method = "exact";
    sol.mu = mu;
    sol.nu = nu;
    sol.u = Vec(N);
    sol.ubar = Vec(M);
    for (int i = 0; i < N; ++i) sol.u[i] = p_src[i];
    for (int j = 0; j < M; ++j) sol.ubar[j] = -p_snk[j];

    Mat gamma = Mat::Zero(N, M);
    double primal = 0.0;
    for (int i = 0; i < N; ++i)
        for (const auto& [j2, mass] : flow[i])
            if (mass > 0.0) {
                sol.plan.push_back({i, j2, mass});
                gamma(i, j2) = mass;
                primal += mass * C(i, j2);
            }
    sol.objective = primal;

    double dual = 0.0;
    for (int i = 0; i < N; ++i) dual -= mu.weights[i] * sol.u[i];
    for (int j2 = 0; j2 < M; ++j2) dual -= nu.weights[j2] * sol.ubar[j2];
    sol.duality_gap = primal - dual;

    Vec row_sum = gamma.rowwise().sum(), col_sum = gamma.colwise().sum();
    sol.marginal_residual = std::max((row_sum - mu.weights).cwiseAbs().maxCoeff(),
                                     (col_sum - nu.weights).cwiseAbs().maxCoeff());
    detail::extract_map(sol, gamma);
    return sol;
}

struct SinkhornOptions {
    int max_iters_per_stage = 2000;
    double marginal_tol = tol::marginal_sinkhorn;
};

// Entropic solve in the log domain with a decreasing epsilon schedule and
// warm-started potentials.
inline TransportSolution solve_sinkhorn(const Mat& C, const DiscreteMeasure& mu,
                                        const DiscreteMeasure& nu,
                                        const std::vector<double>& eps_schedule,
                                        const SinkhornOptions& opt = {}) {
    int N = mu.size(), M = nu.size();
    if (C.rows() != N || C.cols() != M)
        throw ConfigInvalid("cost matrix shape does not match the measures");
    if (eps_schedule.empty()) throw ConfigInvalid("epsilon schedule must not be empty");
    for (std::size_t k = 0; k < eps_schedule.size(); ++k) {
        if (!(eps_schedule[k] > 0.0)) throw ConfigInvalid("epsilon must be positive");
        if (k > 0 && eps_schedule[k] > eps_schedule[k - 1])
            throw ConfigInvalid("epsilon schedule must be nonincreasing");
    }
    if (std::abs(mu.weights.sum() - nu.weights.sum()) > tol::weight_sum)
        throw InfeasibleMarginals("marginal masses differ");

    Vec log_a = mu.weights.array().log().matrix();
    Vec log_b = nu.weights.array().log().matrix();
    Vec f = Vec::Zero(N), g = Vec::Zero(M);

    auto lse_rows = [&](double eps, Vec& out) {
        // out_i = log sum_j exp((g_j - C_ij) / eps)
        for (int i = 0; i < N; ++i) {
            double m = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < M; ++j) m = std::max(m, (g[j] - C(i, j)) / eps);
            double s = 0.0;
            for (int j = 0; j < M; ++j) s += std::exp((g[j] - C(i, j)) / eps - m);
            out[i] = m + std::log(s);
        }
    };
    auto lse_cols = [&](double eps, Vec& out) {
        for (int j = 0; j < M; ++j) {
            double m = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < N; ++i) m = std::max(m, (f[i] - C(i, j)) / eps);
            double s = 0.0;
            for (int i = 0; i < N; ++i) s += std::exp((f[i] - C(i, j)) / eps - m);
            out[j] = m + std::log(s);
        }
    };

    double residual = std::numeric_limits<double>::infinity();
    Vec tmpN(N), tmpM(M);
    for (double eps : eps_schedule) {
        for (int it = 0; it < opt.max_iters_per_stage; ++it) {
            lse_rows(eps, tmpN);
            f = eps * (log_a - tmpN);
            lse_cols(eps, tmpM);
            g = eps * (log_b - tmpM);
            if (!f.allFinite() || !g.allFinite())
                throw NumericalOverflow("sinkhorn potentials diverged");
            // column marginals are exact after the g-update; check rows
            lse_rows(eps, tmpN);
            residual = 0.0;
            for (int i = 0; i < N; ++i)
                residual += std::abs(std::exp((f[i]) / eps + tmpN[i]) - mu.weights[i]);
            if (residual < opt.marginal_tol) break;
        }
    }
    if (residual >= opt.marginal_tol * 10.0)
        throw NoConvergence("sinkhorn did not reach the marginal tolerance");

    double eps = eps_schedule.back();
    Mat gamma(N, M);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < M; ++j) gamma(i, j) = std::exp((f[i] + g[j] - C(i, j)) / eps);

    TransportSolution sol;
    sol.method = "sinkhorn";
    sol.mu = mu;
    sol.nu = nu;
    sol.final_epsilon = eps;
    sol.u = -f;
    sol.ubar = -g;
    sol.objective = (gamma.array() * C.array()).sum();
    Vec row_sum = gamma.rowwise().sum(), col_sum = gamma.colwise().sum();
    sol.marginal_residual = std::max((row_sum - mu.weights).cwiseAbs().maxCoeff(),
                                     (col_sum - nu.weights).cwiseAbs().maxCoeff());
    double plan_floor = 1e-16 / (static_cast<double>(N) * M);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < M; ++j)
            if (gamma(i, j) > plan_floor) sol.plan.push_back({i, j, gamma(i, j)});
    detail::extract_map(sol, gamma);
    return sol;
}

// Centered-difference Jacobian dF/dx at an interior grid atom.
inline Mat map_jacobian(const TransportSolution& sol, int flat) {
    const DiscreteMeasure& mu = sol.mu;
    if (!mu.is_grid()) throw ConfigInvalid("map jacobian needs a grid-based source measure");
    if (!mu.interior(flat, 1))
        throw StencilOutOfDomain("jacobian stencil leaves the source grid");
    int n = mu.dim();
    Mat J(n, n);
    std::vector<int> idx = mu.multi_index(flat);
    for (int a = 0; a < n; ++a) {
        std::vector<int> up = idx, dn = idx;
        up[a] += 1;
        dn[a] -= 1;
        Vec diff = sol.F[mu.flat_index(up)] - sol.F[mu.flat_index(dn)];
        J.col(a) = diff / (2.0 * mu.spacing[a]);
    }
    return J;
}

}  // namespace otgeo
