#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "otgeo/core.hpp"
#include "otgeo/cost_model.hpp"
#include "otgeo/density.hpp"

namespace otgeo {

// Symmetric bilinear form evaluated pointwise in the standard product chart.
// d1/d2 are optional closed-form coordinate derivatives of the components;
// consumers fall back to centered differences of eval when they are missing.
struct MetricField {
    std::string label;
    int input_dim = 0;
    int mat_dim = 0;
    std::pair<int, int> signature{0, 0};
    Box domain;
    std::function<Mat(const Vec&)> eval;
    std::function<Mat(const Vec&, int)> d1;
    std::function<Mat(const Vec&, int, int)> d2;

    bool analytic() const { return static_cast<bool>(d1) && static_cast<bool>(d2); }
};

// Metric component derivatives: closed form when available, otherwise
// Richardson-extrapolated centered differences of eval with step h.
inline Mat metric_d1(const MetricField& f, const Vec& p, int a, double h) {
    if (f.d1) return f.d1(p, a);
    auto diff = [&](double step) {
        Vec q = p;
        q[a] = p[a] + step;
        Mat plus = f.eval(q);
        q[a] = p[a] - step;
        Mat minus = f.eval(q);
        return ((plus - minus) / (2.0 * step)).eval();
    };
    Mat coarse = diff(h), fine = diff(h / 2.0);
    return (4.0 * fine - coarse) / 3.0;
}

inline Mat metric_d2(const MetricField& f, const Vec& p, int a, int b, double h) {
    if (f.d2) return f.d2(p, a, b);
    auto diff = [&](double step) {
        if (a == b) {
            Vec q = p;
            q[a] = p[a] + step;
            Mat plus = f.eval(q);
            q[a] = p[a] - step;
            Mat minus = f.eval(q);
            return ((plus - 2.0 * f.eval(p) + minus) / (step * step)).eval();
        }
        Vec q = p;
        auto at = [&](double da, double db) {
            q[a] = p[a] + da;
            q[b] = p[b] + db;
            Mat m = f.eval(q);
            q[a] = p[a];
            q[b] = p[b];
            return m;
        };
        return ((at(step, step) - at(step, -step) - at(-step, step) + at(-step, -step)) /
                (4.0 * step * step))
            .eval();
    };
    Mat coarse = diff(h), fine = diff(h / 2.0);
    return (4.0 * fine - coarse) / 3.0;
}

inline void require_stencil_inside(const MetricField& f, const Vec& p, double h) {
    if (f.analytic()) return;
    if (!f.domain.contains(p, 0.0)) throw DomainError("point outside the field domain");
    for (int a = 0; a < f.input_dim; ++a) {
        Vec q = p;
        q[a] = p[a] + h;
        bool hi = f.domain.contains(q, 1e-12);
        q[a] = p[a] - h;
        bool lo = f.domain.contains(q, 1e-12);
        if (!hi || !lo)
            throw StencilOutOfDomain("finite-difference stencil leaves the field domain");
    }
}

// Verifies that the eigenvalue signs of eval(p) match the declared signature.
inline bool signature_matches(const MetricField& f, const Vec& p, double zero_tol = 1e-10) {
    Eigen::SelfAdjointEigenSolver<Mat> es(f.eval(p));
    int plus = 0, minus = 0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        if (es.eigenvalues()[i] > zero_tol) ++plus;
        else if (es.eigenvalues()[i] < -zero_tol) ++minus;
    }
    return plus == f.signature.first && minus == f.signature.second;
}

// Per-point bundle of a matrix field with its first two coordinate
// derivatives.
struct MetricJet {
    Mat value;
    std::vector<Mat> d1;               // indexed by coordinate
    std::vector<std::vector<Mat>> d2;  // symmetric in the two coordinates
};

// The pseudo-Riemannian geometry induced on X x Xbar by a cost and a pair of
// densities: conformal factor chi, the signature-(n,n) product metric, and
// the Riemannian comparison metric h + hbar.
class CostGeometry {
public:
    CostGeometry(CostModel model, DensityPair dens)
        : model_(std::move(model)), dens_(std::move(dens)) {
        if (dens_.rho.box().dim() != model_.dim() || dens_.rho_bar.box().dim() != model_.dim())
            throw ConfigInvalid("density boxes must match the cost dimension");
    }

    const CostModel& model() const { return model_; }
    const DensityPair& densities() const { return dens_; }
    int n() const { return model_.dim(); }
    Box product_box() const { return Box::product(model_.domain_x(), model_.domain_xbar()); }
    bool analytic() const {
        return model_.analytic_derivatives() && dens_.analytic_log_derivs();
    }

    // --- mixed Hessian E and its coordinate derivatives -------------------

    Mat cross_hessian(const Vec& x, const Vec& xbar, double a2_tol = tol::a2) const {
        return otgeo::cross_hessian(model_, x, xbar, a2_tol);
    }

    Mat E_deriv(const Vec& x, const Vec& xbar, int a) const {
        int n = model_.dim();
        Mat M(n, n);
        MultiIndex mx(n, 0), mxb(n, 0);
        if (a < n) mx[a] = 1; else mxb[a - n] = 1;
        for (int i = 0; i < n; ++i) {
            mx[i] += 1;
            for (int k = 0; k < n; ++k) {
                mxb[k] += 1;
                M(i, k) = model_.deriv(x, xbar, mx, mxb);
                mxb[k] -= 1;
            }
            mx[i] -= 1;
        }
        return M;
    }

    Mat E_deriv2(const Vec& x, const Vec& xbar, int a, int b) const {
        int n = model_.dim();
        Mat M(n, n);
        MultiIndex mx(n, 0), mxb(n, 0);
        if (a < n) mx[a] += 1; else mxb[a - n] += 1;
        if (b < n) mx[b] += 1; else mxb[b - n] += 1;
        for (int i = 0; i < n; ++i) {
            mx[i] += 1;
            for (int k = 0; k < n; ++k) {
                mxb[k] += 1;
                M(i, k) = model_.deriv(x, xbar, mx, mxb);
                mxb[k] -= 1;
            }
            mx[i] -= 1;
        }
        return M;
    }

    // --- conformal factor chi ---------------------------------------------

    double log_chi(const Vec& x, const Vec& xbar, double a2_tol = tol::a2) const {
        Mat E = cross_hessian(x, xbar, a2_tol);
        double det = std::abs(E.determinant());
        return (dens_.rho.log_value(x) + dens_.rho_bar.log_value(xbar) - std::log(det)) / n();
    }

    double chi(const Vec& x, const Vec& xbar, double a2_tol = tol::a2) const {
        return std::exp(log_chi(x, xbar, a2_tol));
    }

    // d/dp log chi over the 2n product coordinates.
    Vec dlog_chi(const Vec& x, const Vec& xbar) const {
        int n = model_.dim();
        Mat E = cross_hessian(x, xbar);
        Mat Einv = E.inverse();
        Vec g(2 * n);
        Vec glx = dens_.rho.grad_log(x), glxb = dens_.rho_bar.grad_log(xbar);
        for (int a = 0; a < 2 * n; ++a) {
            double dens_part = a < n ? glx[a] : glxb[a - n];
            double det_part = (Einv * E_deriv(x, xbar, a)).trace();
            g[a] = (dens_part - det_part) / n;
        }
        return g;
    }

    Mat d2log_chi(const Vec& x, const Vec& xbar) const {
        int n = model_.dim();
        Mat E = cross_hessian(x, xbar);
        Mat Einv = E.inverse();
        std::vector<Mat> dE(2 * n);
        for (int a = 0; a < 2 * n; ++a) dE[a] = E_deriv(x, xbar, a);
        Mat hlx = dens_.rho.hess_log(x), hlxb = dens_.rho_bar.hess_log(xbar);
        Mat out(2 * n, 2 * n);
        for (int a = 0; a < 2 * n; ++a)
            for (int b = a; b < 2 * n; ++b) {
                double dens_part = 0.0;
                if (a < n && b < n) dens_part = hlx(a, b);
                else if (a >= n && b >= n) dens_part = hlxb(a - n, b - n);
                double det_part = (Einv * E_deriv2(x, xbar, a, b)).trace() -
                                  (Einv * dE[a] * Einv * dE[b]).trace();
                out(a, b) = out(b, a) = (dens_part - det_part) / n;
            }
        return out;
    }

    // --- product metric ghat ------------------------------------------------

    Mat ghat(const Vec& p) const {
        int n = model_.dim();
        Vec x = p.head(n), xb = p.tail(n);
        Mat E = cross_hessian(x, xb);
        Mat block = -chi(x, xb) * E;
        Mat g = Mat::Zero(2 * n, 2 * n);
        g.topRightCorner(n, n) = block;
        g.bottomLeftCorner(n, n) = block.transpose();
        return g;
    }

    MetricJet ghat_jet(const Vec& p, bool with_d2) const {
        int n = model_.dim();
        Vec x = p.head(n), xb = p.tail(n);
        Mat E = cross_hessian(x, xb);
        double chi_v = chi(x, xb);
        Vec dlc = dlog_chi(x, xb);
        std::vector<Mat> dE(2 * n);
        for (int a = 0; a < 2 * n; ++a) dE[a] = E_deriv(x, xb, a);

        MetricJet jet;
        auto assemble = [&](const Mat& blk) {
            Mat g = Mat::Zero(2 * n, 2 * n);
            g.topRightCorner(n, n) = blk;
            g.bottomLeftCorner(n, n) = blk.transpose();
            return g;
        };
        jet.value = assemble(-chi_v * E);
        jet.d1.resize(2 * n);
        for (int a = 0; a < 2 * n; ++a)
            jet.d1[a] = assemble((-chi_v * (dlc[a] * E + dE[a])).eval());
        if (with_d2) {
            Mat d2lc = d2log_chi(x, xb);
            jet.d2.assign(2 * n, std::vector<Mat>(2 * n));
            for (int a = 0; a < 2 * n; ++a)
                for (int b = a; b < 2 * n; ++b) {
                    Mat blk = -chi_v * ((d2lc(a, b) + dlc[a] * dlc[b]) * E + dlc[a] * dE[b] +
                                        dlc[b] * dE[a] + E_deriv2(x, xb, a, b));
                    jet.d2[a][b] = assemble(blk);
                    if (a != b) jet.d2[b][a] = jet.d2[a][b];
                }
        }
        return jet;
    }

    // --- comparison metric S_hat = h + hbar --------------------------------

    Mat hbar(const Vec& x, const Vec& xbar) const {
        Mat E = cross_hessian(x, xbar);
        double c = chi(x, xbar);
        return c * c * E.transpose() * model_.h_inv() * E;
    }

    Mat shat(const Vec& p) const {
        int n = model_.dim();
        Mat S = Mat::Zero(2 * n, 2 * n);
        S.topLeftCorner(n, n) = model_.h();
        S.bottomRightCorner(n, n) = hbar(p.head(n), p.tail(n));
        return S;
    }

    MetricJet shat_jet(const Vec& p, bool with_d2) const {
        int n = model_.dim();
        Vec x = p.head(n), xb = p.tail(n);
        Mat E = cross_hessian(x, xb);
        const Mat& W = model_.h_inv();
        double chi_v = chi(x, xb);
        double chi2 = chi_v * chi_v;
        Vec dlc = dlog_chi(x, xb);
        std::vector<Mat> dE(2 * n), dK(2 * n);
        Mat K = E.transpose() * W * E;
        for (int a = 0; a < 2 * n; ++a) {
            dE[a] = E_deriv(x, xb, a);
            dK[a] = dE[a].transpose() * W * E + E.transpose() * W * dE[a];
        }

        MetricJet jet;
        auto assemble = [&](const Mat& top, const Mat& bottom) {
            Mat S = Mat::Zero(2 * n, 2 * n);
            S.topLeftCorner(n, n) = top;
            S.bottomRightCorner(n, n) = bottom;
            return S;
        };
        jet.value = assemble(model_.h(), (chi2 * K).eval());
        jet.d1.resize(2 * n);
        Mat zero = Mat::Zero(n, n);
        for (int a = 0; a < 2 * n; ++a)
            jet.d1[a] = assemble(zero, (chi2 * (2.0 * dlc[a] * K + dK[a])).eval());
        if (with_d2) {
            Mat d2lc = d2log_chi(x, xb);
            jet.d2.assign(2 * n, std::vector<Mat>(2 * n));
            for (int a = 0; a < 2 * n; ++a)
                for (int b = a; b < 2 * n; ++b) {
                    Mat d2K = E_deriv2(x, xb, a, b).transpose() * W * E +
                              dE[a].transpose() * W * dE[b] + dE[b].transpose() * W * dE[a] +
                              E.transpose() * W * E_deriv2(x, xb, a, b);
                    Mat bottom = chi2 * ((2.0 * d2lc(a, b) + 4.0 * dlc[a] * dlc[b]) * K +
                                         2.0 * dlc[a] * dK[b] + 2.0 * dlc[b] * dK[a] + d2K);
                    jet.d2[a][b] = assemble(zero, bottom);
                    if (a != b) jet.d2[b][a] = jet.d2[a][b];
                }
        }
        return jet;
    }

    // --- field views ---------------------------------------------------------

    MetricField kmw_metric_field() const {
        MetricField f;
        f.label = "g_hat";
        f.input_dim = 2 * n();
        f.mat_dim = 2 * n();
        f.signature = {n(), n()};
        f.domain = product_box();
        CostGeometry self = *this;
        f.eval = [self](const Vec& p) { return self.ghat(p); };
        f.d1 = [self](const Vec& p, int a) { return self.ghat_jet(p, false).d1[a]; };
        f.d2 = [self](const Vec& p, int a, int b) { return self.ghat_jet(p, true).d2[a][b]; };
        return f;
    }

    MetricField s_hat_metric_field() const {
        MetricField f;
        f.label = "S_hat";
        f.input_dim = 2 * n();
        f.mat_dim = 2 * n();
        f.signature = {2 * n(), 0};
        f.domain = product_box();
        CostGeometry self = *this;
        f.eval = [self](const Vec& p) { return self.shat(p); };
        f.d1 = [self](const Vec& p, int a) { return self.shat_jet(p, false).d1[a]; };
        f.d2 = [self](const Vec& p, int a, int b) { return self.shat_jet(p, true).d2[a][b]; };
        return f;
    }

    MetricField hbar_field() const {
        MetricField f;
        f.label = "h_bar";
        f.input_dim = 2 * n();
        f.mat_dim = n();
        f.signature = {n(), 0};
        f.domain = product_box();
        CostGeometry self = *this;
        f.eval = [self](const Vec& p) { return self.hbar(p.head(self.n()), p.tail(self.n())); };
        return f;
    }

private:
    CostModel model_;
    DensityPair dens_;
};

// Spec-level operation wrappers.

inline double chi(const CostModel& model, const DensityPair& dens, const Vec& x,
                  const Vec& xbar) {
    return CostGeometry(model, dens).chi(x, xbar);
}

inline MetricField kmw_metric(const CostModel& model, const DensityPair& dens) {
    return CostGeometry(model, dens).kmw_metric_field();
}

inline MetricField s_hat_metric(const CostModel& model, const DensityPair& dens) {
    return CostGeometry(model, dens).s_hat_metric_field();
}

}  // namespace otgeo
