#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "otgeo/core.hpp"
#include "otgeo/curvature.hpp"
#include "otgeo/geometry.hpp"
#include "otgeo/second_order.hpp"
#include "otgeo/transport.hpp"

namespace otgeo {

// Graph(F) over the source grid: x -> (x, F(x)) with stencil access to the
// map and its first two grid derivatives.
struct GraphChart {
    DiscreteMeasure source;   // grid-based
    std::vector<Vec> F;       // one sample per atom

    static GraphChart from_solution(const TransportSolution& sol) {
        if (!sol.mu.is_grid())
            throw ConfigInvalid("graph chart needs a grid-based source measure");
        return GraphChart{sol.mu, sol.F};
    }

    int n() const { return source.dim(); }

    Vec lift(int flat) const { return concat(source.points[flat], F[flat]); }

    bool interior(int flat, int margin) const { return source.interior(flat, margin); }

    Mat jacobian(int flat) const {
        if (!source.interior(flat, 1))
            throw StencilOutOfDomain("jacobian stencil leaves the source grid");
        int d = n();
        Mat J(d, d);
        std::vector<int> idx = source.multi_index(flat);
        for (int a = 0; a < d; ++a) {
            std::vector<int> up = idx, dn = idx;
            up[a] += 1;
            dn[a] -= 1;
            J.col(a) = (F[source.flat_index(up)] - F[source.flat_index(dn)]) /
                       (2.0 * source.spacing[a]);
        }
        return J;
    }

    // d2F/dx^a dx^b by centered differences; needs margin 1.
    Vec map_second_derivative(int flat, int a, int b) const {
        if (!source.interior(flat, 1))
            throw StencilOutOfDomain("second-derivative stencil leaves the source grid");
        std::vector<int> idx = source.multi_index(flat);
        if (a == b) {
            std::vector<int> up = idx, dn = idx;
            up[a] += 1;
            dn[a] -= 1;
            return (F[source.flat_index(up)] - 2.0 * F[flat] + F[source.flat_index(dn)]) /
                   (source.spacing[a] * source.spacing[a]);
        }
        std::vector<int> pp = idx, pm = idx, mp = idx, mm = idx;
        pp[a] += 1; pp[b] += 1;
        pm[a] += 1; pm[b] -= 1;
        mp[a] -= 1; mp[b] += 1;
        mm[a] -= 1; mm[b] -= 1;
        return (F[source.flat_index(pp)] - F[source.flat_index(pm)] -
                F[source.flat_index(mp)] + F[source.flat_index(mm)]) /
               (4.0 * source.spacing[a] * source.spacing[b]);
    }

    // Chart tangent basis as the columns of [I; J].
    Mat tangent_basis(int flat) const {
        int d = n();
        Mat T(2 * d, d);
        T.topRows(d) = Mat::Identity(d, d);
        T.bottomRows(d) = jacobian(flat);
        return T;
    }

    double max_spacing() const { return source.spacing.maxCoeff(); }
};

// Per-point frame package on the graph: ghat-orthonormal tangent frame e,
// hyperbolic-normalized normal frame e_perp, the eigen data lambda/mu, and
// the h- and hbar-unit vectors xi, xibar they are built from. Frames are
// ordered so that mu is ascending: S(e_n, e_n) is the top eigenvalue of S
// with respect to the induced metric.
struct GraphFrame {
    Vec point;      // lifted point (x, F(x))
    int flat = -1;  // source grid index
    Mat e;          // 2n x n tangent frame
    Mat e_perp;     // 2n x n normal frame, ghat(e_p, e_q) = -delta_pq
    Vec lambdas;    // ascending in mu order
    Vec mus;        // mu_i = (lambda_i + 1/lambda_i) / 2, ascending
    Mat xi;         // n x n, h-orthonormal columns
    Mat xibar;      // n x n, hbar-unit columns
    double frame_residual = 0.0;  // worst orthonormality defect
};

// Builds the frame of the theorem's proof: e_i = (xi_i + J xi_i) / sqrt(2
// lambda_i) with xi the h-orthonormal eigenbasis of A, then completes to a
// normal frame by ghat-Gram-Schmidt with hyperbolic normalization, seeded
// with (xi_i - J xi_i)-type complements and pivoted on the |ghat-norm|.
inline GraphFrame induced_frame(const GraphChart& chart, const CostGeometry& geo, int flat,
                                double pivot_tol = 1e-12) {
    int d = chart.n();
    Vec x = chart.source.points[flat];
    Vec Fx = chart.F[flat];
    Mat J = chart.jacobian(flat);

    Mat E = geo.cross_hessian(x, Fx);
    double chi_v = geo.chi(x, Fx);
    Mat B = -E * J;
    Mat A = chi_v * 0.5 * (B + B.transpose());
    Vec lam;
    Mat xi;
    eigen_vs_h(A, geo.model().h_cholL(), lam, xi);
    if (lam[0] <= 0.0)
        throw NotSpacelike("induced metric is not positive definite at the sample");

    // reorder so that mu is ascending (ties broken by lambda)
    std::vector<int> order(d);
    for (int i = 0; i < d; ++i) order[i] = i;
    auto mu_of = [&](int i) { return 0.5 * (lam[i] + 1.0 / lam[i]); };
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        double ma = mu_of(a), mb = mu_of(b);
        if (ma != mb) return ma < mb;
        return lam[a] < lam[b];
    });

    GraphFrame frame;
    frame.point = concat(x, Fx);
    frame.flat = flat;
    frame.lambdas = Vec(d);
    frame.mus = Vec(d);
    frame.xi = Mat(d, d);
    frame.xibar = Mat(d, d);
    frame.e = Mat(2 * d, d);
    Mat seeds(2 * d, d);
    for (int k = 0; k < d; ++k) {
        int i = order[k];
        double l = lam[i];
        frame.lambdas[k] = l;
        frame.mus[k] = mu_of(i);
        Vec xv = xi.col(i);
        Vec jx = J * xv;
        frame.xi.col(k) = xv;
        frame.xibar.col(k) = jx / l;
        double scale = 1.0 / std::sqrt(2.0 * l);
        frame.e.col(k).head(d) = scale * xv;
        frame.e.col(k).tail(d) = scale * jx;
        seeds.col(k).head(d) = scale * xv;
        seeds.col(k).tail(d) = -scale * jx;
    }

    Mat ghat = geo.ghat(frame.point);

    // project out tangential components, then hyperbolic Gram-Schmidt on the
    // complement with column pivoting on |ghat-norm|
    std::vector<Vec> normals;
    std::vector<int> remaining(d);
    for (int k = 0; k < d; ++k) remaining[k] = k;
    while (normals.size() < static_cast<std::size_t>(d)) {
        double best_norm = -1.0;
        int best_pos = -1;
        Vec best_vec;
        for (std::size_t r = 0; r < remaining.size(); ++r) {
            Vec v = seeds.col(remaining[r]);
            for (int k = 0; k < d; ++k) v -= (frame.e.col(k).dot(ghat * v)) * frame.e.col(k);
            for (const Vec& q : normals) v += (q.dot(ghat * v)) * q;
            double norm2 = -v.dot(ghat * v);
            if (norm2 > best_norm) {
                best_norm = norm2;
                best_pos = static_cast<int>(r);
                best_vec = v;
            }
        }
        if (best_norm < pivot_tol)
            throw FrameDegeneracy("normal frame pivot fell below tolerance");
        normals.push_back(best_vec / std::sqrt(best_norm));
        remaining.erase(remaining.begin() + best_pos);
    }
    frame.e_perp = Mat(2 * d, d);
    for (int p = 0; p < d; ++p) frame.e_perp.col(p) = normals[p];

    // orthonormality residuals
    double worst = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double te = frame.e.col(i).dot(ghat * frame.e.col(j)) - (i == j ? 1.0 : 0.0);
            double tn = frame.e_perp.col(i).dot(ghat * frame.e_perp.col(j)) + (i == j ? 1.0 : 0.0);
            double tm = frame.e.col(i).dot(ghat * frame.e_perp.col(j));
            worst = std::max({worst, std::abs(te), std::abs(tn), std::abs(tm)});
        }
    frame.frame_residual = worst;
    return frame;
}

// Second fundamental form in the frame: ambient vectors II(e_k, e_l) and
// their normal-frame components.
struct SecondFundamentalForm {
    std::vector<std::vector<Vec>> ambient;  // [k][l] -> 2n vector
    std::vector<Mat> components;            // [p] -> (k,l) matrix of frame coefficients
    double normality_residual = 0.0;        // max |ghat(II, e_m)|
};

inline SecondFundamentalForm second_fundamental_form(const GraphChart& chart,
                                                     const CostGeometry& geo,
                                                     const GraphFrame& frame) {
    int d = chart.n();
    int flat = frame.flat;
    Mat T = chart.tangent_basis(flat);
    MetricJet gjet = geo.ghat_jet(frame.point, false);
    ChristoffelData conn = christoffels_from_jet(
        MetricJet{gjet.value, gjet.d1, std::vector<std::vector<Mat>>{}});
    Mat ghat = gjet.value;

    // D_{T_a} T_b = (0, d2F/dx^a dx^b) + Gamma(T_a, T_b)
    std::vector<std::vector<Vec>> dTT(d, std::vector<Vec>(d));
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            Vec v = Vec::Zero(2 * d);
            v.tail(d) = chart.map_second_derivative(flat, a, b);
            for (int s = 0; s < 2 * d; ++s) {
                double total = 0.0;
                for (int al = 0; al < 2 * d; ++al)
                    for (int be = 0; be < 2 * d; ++be)
                        total += conn.gamma[s](al, be) * T(al, a) * T(be, b);
                v[s] += total;
            }
            dTT[a][b] = v;
            if (a != b) dTT[b][a] = v;
        }

    SecondFundamentalForm II;
    II.ambient.assign(d, std::vector<Vec>(d));
    II.components.assign(d, Mat::Zero(d, d));
    for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
            // e_k = sum_a e_k^a T_a with coefficients given by the x-part
            Vec v = Vec::Zero(2 * d);
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    v += frame.e(a, k) * frame.e(b, l) * dTT[a][b];
            // normal projection: v_perp = -sum_p ghat(v, e_p) e_p
            Vec vperp = Vec::Zero(2 * d);
            for (int p = 0; p < d; ++p) {
                double coeff = -frame.e_perp.col(p).dot(ghat * v);
                vperp += coeff * frame.e_perp.col(p);
                II.components[p](k, l) = coeff;
            }
            for (int m = 0; m < d; ++m)
                II.normality_residual = std::max(
                    II.normality_residual, std::abs(frame.e.col(m).dot(ghat * vperp)));
            II.ambient[k][l] = vperp;
        }
    return II;
}

// |H|_Shat with H = sum_l II(e_l, e_l); ~0 for affine graphs in flat charts,
// O(grid step) for numerically optimal maps.
inline double mean_curvature_residual(const GraphChart& chart, const CostGeometry& geo,
                                      int flat) {
    GraphFrame frame = induced_frame(chart, geo, flat);
    SecondFundamentalForm II = second_fundamental_form(chart, geo, frame);
    int d = chart.n();
    Vec H = Vec::Zero(2 * d);
    for (int l = 0; l < d; ++l) H += II.ambient[l][l];
    Mat S = geo.shat(frame.point);
    return std::sqrt(std::max(0.0, H.dot(S * H)));
}

// For quadratic/bilinear costs the induced metric, normalized by 2 chi,
// coincides with the Hessian metric of the dual potential. Returns the
// relative mismatch against second differences of u + c on the source grid.
inline double hessian_metric_check(const GraphChart& chart, const CostGeometry& geo,
                                   const Vec& u, int flat) {
    CostKind kind = geo.model().kind();
    if (kind != CostKind::quadratic && kind != CostKind::bilinear)
        throw WrongCostKind("hessian metric comparison needs a quadratic or bilinear cost");
    if (!chart.interior(flat, 1))
        throw StencilOutOfDomain("hessian stencil leaves the source grid");
    int d = chart.n();
    const DiscreteMeasure& mu = chart.source;
    Vec x = mu.points[flat];
    Vec Fx = chart.F[flat];

    // Hessian metric: d2u/dx^2 + d2c/dx^2 at xbar = F(x)
    Mat hess(d, d);
    std::vector<int> idx = mu.multi_index(flat);
    for (int a = 0; a < d; ++a) {
        for (int b = a; b < d; ++b) {
            double val;
            if (a == b) {
                std::vector<int> up = idx, dn = idx;
                up[a] += 1;
                dn[a] -= 1;
                val = (u[mu.flat_index(up)] - 2.0 * u[flat] + u[mu.flat_index(dn)]) /
                      (mu.spacing[a] * mu.spacing[a]);
            } else {
                std::vector<int> pp = idx, pm = idx, mp = idx, mm = idx;
                pp[a] += 1; pp[b] += 1;
                pm[a] += 1; pm[b] -= 1;
                mp[a] -= 1; mp[b] += 1;
                mm[a] -= 1; mm[b] -= 1;
                val = (u[mu.flat_index(pp)] - u[mu.flat_index(pm)] - u[mu.flat_index(mp)] +
                       u[mu.flat_index(mm)]) /
                      (4.0 * mu.spacing[a] * mu.spacing[b]);
            }
            MultiIndex mx(d, 0), mzero(d, 0);
            mx[a] += 1;
            mx[b] += 1;
            val += geo.model().deriv(x, Fx, mx, mzero);
            hess(a, b) = hess(b, a) = val;
        }
    }

    Mat T = chart.tangent_basis(flat);
    Mat g_induced = T.transpose() * geo.ghat(concat(x, Fx)) * T;
    Mat normalized = g_induced / (2.0 * geo.chi(x, Fx));
    return (normalized - hess).norm() / hess.norm();
}

}  // namespace otgeo
