#pragma once

#include <cmath>

#include "otgeo/core.hpp"
#include "otgeo/geometry.hpp"
#include "otgeo/transport.hpp"

namespace otgeo {

// Second-order transport data at a source grid atom: the displacement
// Hessian B, its conformal rescaling A = chi B, and the spectrum of A with
// respect to the reference metric h.
struct SecondOrderData {
    Vec x;       // source atom
    Vec Fx;      // mapped point
    Mat J;       // centered-difference Jacobian dF/dx
    Mat B;       // symmetrized -E J
    Mat A;       // chi * B
    Vec lambdas;  // eigenvalues of A w.r.t. h, ascending
    Mat xi;       // h-orthonormal eigenvectors, columns matching lambdas
    double chi = 0.0;
    double asymmetry = 0.0;  // |B_raw - B_raw^T| before symmetrization
};

struct SecondOrderOptions {
    double singular_tol = 1e-10;   // |det J| cut for NonInjectiveMap
    double entropy_threshold = std::numeric_limits<double>::infinity();
};

// Generalized symmetric-definite eigenproblem A v = lambda h v via the
// Cholesky factor of h; deterministic ascending order.
inline void eigen_vs_h(const Mat& A, const Mat& h_cholL, Vec& lambdas, Mat& xi) {
    Mat Linv = h_cholL.triangularView<Eigen::Lower>().solve(
        Mat::Identity(h_cholL.rows(), h_cholL.cols()));
    Mat M = Linv * A * Linv.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + M.transpose()));
    if (es.info() != Eigen::Success) throw SingularMetric("eigensolver failed");
    lambdas = es.eigenvalues();
    xi = Linv.transpose() * es.eigenvectors();
}

inline SecondOrderData second_order_data(const CostGeometry& geo, const TransportSolution& sol,
                                         int flat, const SecondOrderOptions& opt = {}) {
    const DiscreteMeasure& mu = sol.mu;
    if (!mu.is_grid()) throw ConfigInvalid("second-order data needs a grid-based source");
    if (!mu.interior(flat, 1))
        throw StencilOutOfDomain("second-order stencil leaves the source grid");
    if (sol.row_entropy.size() == mu.size() && sol.row_entropy[flat] > opt.entropy_threshold)
        throw NonInjectiveMap("conditional row is too diffuse for a single-valued map");

    SecondOrderData data;
    data.x = mu.points[flat];
    data.Fx = sol.F[flat];
    data.J = map_jacobian(sol, flat);
    if (std::abs(data.J.determinant()) < opt.singular_tol)
        throw NonInjectiveMap("map Jacobian estimate is singular");

    Mat E = geo.cross_hessian(data.x, data.Fx);
    Mat B_raw = -E * data.J;
    data.asymmetry = (B_raw - B_raw.transpose()).norm();
    data.B = 0.5 * (B_raw + B_raw.transpose());
    data.chi = geo.chi(data.x, data.Fx);
    data.A = data.chi * data.B;
    eigen_vs_h(data.A, geo.model().h_cholL(), data.lambdas, data.xi);
    return data;
}

// Relative residual of det A = (rho / vol_h)^2 at the sample point.
inline double check_det_identity(const SecondOrderData& data, const CostGeometry& geo) {
    double rho_h = geo.densities().rho.value(data.x) / geo.model().vol_h();
    double target = rho_h * rho_h;
    return std::abs(data.A.determinant() - target) / target;
}

}  // namespace otgeo
