#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "otgeo/core.hpp"
#include "otgeo/cost_model.hpp"
#include "otgeo/finite_diff.hpp"

namespace otgeo {

enum class DensityKind { uniform, gaussian_clipped, table, custom };

inline std::string to_string(DensityKind k) {
    switch (k) {
        case DensityKind::uniform: return "uniform";
        case DensityKind::gaussian_clipped: return "gaussian_clipped";
        case DensityKind::table: return "table";
        case DensityKind::custom: return "custom";
    }
    return "?";
}

namespace quadrature {

// Gauss-Legendre nodes/weights on [-1,1] by Golub-Welsch.
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    Mat J = Mat::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        double b = k / std::sqrt(4.0 * k * k - 1.0);
        J(k, k - 1) = J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(J);
    nodes.resize(n);
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
        nodes[i] = es.eigenvalues()[i];
        double v0 = es.eigenvectors()(0, i);
        weights[i] = 2.0 * v0 * v0;
    }
}

// Tensor-product Gauss-Legendre integral of f over the box.
inline double integrate(const std::function<double(const Vec&)>& f, const Box& box,
                        int points_per_axis = 32) {
    std::vector<double> nodes, weights;
    gauss_legendre(points_per_axis, nodes, weights);
    int n = box.dim();
    Vec p(n);
    double total = 0.0;
    std::function<void(int, double)> rec = [&](int axis, double w) {
        if (axis == n) {
            total += w * f(p);
            return;
        }
        double half = 0.5 * (box.hi[axis] - box.lo[axis]);
        double mid = 0.5 * (box.hi[axis] + box.lo[axis]);
        for (int i = 0; i < points_per_axis; ++i) {
            p[axis] = mid + half * nodes[i];
            rec(axis + 1, w * half * weights[i]);
        }
    };
    rec(0, 1.0);
    return total;
}

}  // namespace quadrature

// Probability density on a box, quadrature-normalized to unit mass. The
// normalization hook can be disabled to probe homogeneity properties.
class Density {
public:
    using ValueFn = std::function<double(const Vec&)>;
    using GradFn = std::function<Vec(const Vec&)>;
    using HessFn = std::function<Mat(const Vec&)>;

    static Density uniform(Box box) {
        Density d;
        d.kind_ = DensityKind::uniform;
        d.box_ = std::move(box);
        d.raw_ = [](const Vec&) { return 1.0; };
        d.grad_log_ = [n = d.box_.dim()](const Vec&) { return Vec::Zero(n).eval(); };
        d.hess_log_ = [n = d.box_.dim()](const Vec&) { return Mat::Zero(n, n).eval(); };
        d.analytic_log_derivs_ = true;
        d.normalize();
        return d;
    }

    static Density gaussian_clipped(Box box, Vec mean, Vec sigma) {
        if (mean.size() != box.dim() || sigma.size() != box.dim())
            throw ConfigInvalid("gaussian density mean/sigma must match the box dimension");
        for (int i = 0; i < sigma.size(); ++i)
            if (!(sigma[i] > 0)) throw ConfigInvalid("gaussian sigma must be positive");
        Density d;
        d.kind_ = DensityKind::gaussian_clipped;
        d.box_ = std::move(box);
        d.raw_ = [mean, sigma](const Vec& x) {
            double e = 0.0;
            for (int i = 0; i < x.size(); ++i) {
                double t = (x[i] - mean[i]) / sigma[i];
                e += t * t;
            }
            return std::exp(-0.5 * e);
        };
        d.grad_log_ = [mean, sigma](const Vec& x) {
            Vec g(x.size());
            for (int i = 0; i < x.size(); ++i) g[i] = -(x[i] - mean[i]) / (sigma[i] * sigma[i]);
            return g;
        };
        d.hess_log_ = [sigma](const Vec& x) {
            Mat hh = Mat::Zero(x.size(), x.size());
            for (int i = 0; i < x.size(); ++i) hh(i, i) = -1.0 / (sigma[i] * sigma[i]);
            return hh;
        };
        d.analytic_log_derivs_ = true;
        d.normalize();
        return d;
    }

    static Density table(Box box, std::vector<int> shape, std::vector<double> values,
                         fd::Options fd_opts = {}) {
        for (double v : values)
            if (!(v > 0)) throw NonpositiveDensity("table density must be strictly positive");
        detail::TableInterpolant interp(box, std::move(shape), std::move(values));
        Density d;
        d.kind_ = DensityKind::table;
        d.box_ = std::move(box);
        d.raw_ = [interp](const Vec& x) { return interp(x); };
        d.fd_opts_ = fd_opts;
        d.analytic_log_derivs_ = false;
        d.normalize();
        return d;
    }

    static Density custom(Box box, ValueFn raw, GradFn grad_log = nullptr,
                          HessFn hess_log = nullptr, fd::Options fd_opts = {}) {
        Density d;
        d.kind_ = DensityKind::custom;
        d.box_ = std::move(box);
        d.raw_ = std::move(raw);
        d.grad_log_ = std::move(grad_log);
        d.hess_log_ = std::move(hess_log);
        d.analytic_log_derivs_ = d.grad_log_ && d.hess_log_;
        d.fd_opts_ = fd_opts;
        d.normalize();
        return d;
    }

    DensityKind kind() const { return kind_; }
    const Box& box() const { return box_; }
    bool analytic_log_derivs() const { return analytic_log_derivs_; }

    // Chart density (coefficient of dx^1 ^ ... ^ dx^n), unit mass by default.
    double value(const Vec& x) const { return scale_ * raw_(x) / norm_; }

    double log_value(const Vec& x) const {
        double v = value(x);
        if (!(v > 0)) throw NonpositiveDensity("density vanishes at a queried point");
        return std::log(v);
    }

    Vec grad_log(const Vec& x) const {
        if (grad_log_) return grad_log_(x);
        Vec g(box_.dim());
        auto f = [this](const Vec& q) { return std::log(raw_(q)); };
        MultiIndex mi(box_.dim(), 0);
        for (int a = 0; a < box_.dim(); ++a) {
            mi[a] = 1;
            g[a] = fd::derivative(f, x, mi, fd_opts_);
            mi[a] = 0;
        }
        return g;
    }

    Mat hess_log(const Vec& x) const {
        if (hess_log_) return hess_log_(x);
        int n = box_.dim();
        Mat hh(n, n);
        auto f = [this](const Vec& q) { return std::log(raw_(q)); };
        MultiIndex mi(n, 0);
        for (int a = 0; a < n; ++a)
            for (int b = a; b < n; ++b) {
                mi[a] += 1;
                mi[b] += 1;
                hh(a, b) = hh(b, a) = fd::derivative(f, x, mi, fd_opts_);
                mi[a] = mi[b] = 0;
            }
        return hh;
    }

    double mass(int points_per_axis = 32) const {
        return quadrature::integrate([this](const Vec& x) { return value(x); }, box_,
                                     points_per_axis);
    }

    // Multiplies the density by a constant WITHOUT renormalizing; used to test
    // homogeneity of derived quantities.
    Density scaled(double factor) const {
        if (!(factor > 0)) throw NonpositiveDensity("density scale factor must be positive");
        Density d = *this;
        d.scale_ *= factor;
        return d;
    }

private:
    Density() = default;

    void normalize() {
        norm_ = quadrature::integrate([this](const Vec& x) { return raw_(x); }, box_);
        if (!(norm_ > 0) || !std::isfinite(norm_))
            throw NonpositiveDensity("density mass is not positive and finite");
    }

    DensityKind kind_ = DensityKind::uniform;
    Box box_;
    ValueFn raw_;
    GradFn grad_log_;
    HessFn hess_log_;
    double norm_ = 1.0;
    double scale_ = 1.0;
    bool analytic_log_derivs_ = false;
    fd::Options fd_opts_;
};

struct DensityPair {
    Density rho, rho_bar;

    DensityPair(Density r, Density rb) : rho(std::move(r)), rho_bar(std::move(rb)) {}

    bool analytic_log_derivs() const {
        return rho.analytic_log_derivs() && rho_bar.analytic_log_derivs();
    }
};

}  // namespace otgeo
