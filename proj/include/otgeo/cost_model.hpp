#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>

#include "otgeo/core.hpp"
#include "otgeo/finite_diff.hpp"

namespace otgeo {

enum class CostKind { bilinear, quadratic, log_distance, sqrt_one_plus, custom_table, custom };

inline std::string to_string(CostKind k) {
    switch (k) {
        case CostKind::bilinear: return "bilinear";
        case CostKind::quadratic: return "quadratic";
        case CostKind::log_distance: return "log_distance";
        case CostKind::sqrt_one_plus: return "sqrt_one_plus";
        case CostKind::custom_table: return "custom_table";
        case CostKind::custom: return "custom";
    }
    return "?";
}

namespace detail {

// Radial profile f(s), s = |x - xbar|^2, with derivatives in s up to order 4.
struct RadialProfile {
    std::function<double(double)> f, f1, f2, f3, f4;
};

// Derivative tensor of c(d) = f(|d|^2) for a list of (repeated) axis indices.
// idx.size() is the total order, at most 4.
inline double radial_derivative(const RadialProfile& rp, const Vec& d,
                                const std::vector<int>& idx) {
    const double s = d.squaredNorm();
    auto kron = [](int a, int b) { return a == b ? 1.0 : 0.0; };
    switch (idx.size()) {
        case 0: return rp.f(s);
        case 1: return 2.0 * rp.f1(s) * d[idx[0]];
        case 2: {
            int i = idx[0], j = idx[1];
            return 4.0 * rp.f2(s) * d[i] * d[j] + 2.0 * rp.f1(s) * kron(i, j);
        }
        case 3: {
            int i = idx[0], j = idx[1], k = idx[2];
            return 8.0 * rp.f3(s) * d[i] * d[j] * d[k] +
                   4.0 * rp.f2(s) *
                       (kron(i, j) * d[k] + kron(i, k) * d[j] + kron(j, k) * d[i]);
        }
        case 4: {
            int i = idx[0], j = idx[1], k = idx[2], l = idx[3];
            double pair_sum = kron(i, j) * d[k] * d[l] + kron(i, k) * d[j] * d[l] +
                              kron(i, l) * d[j] * d[k] + kron(j, k) * d[i] * d[l] +
                              kron(j, l) * d[i] * d[k] + kron(k, l) * d[i] * d[j];
            double kron_sum = kron(i, j) * kron(k, l) + kron(i, k) * kron(j, l) +
                              kron(i, l) * kron(j, k);
            return 16.0 * rp.f4(s) * d[i] * d[j] * d[k] * d[l] + 8.0 * rp.f3(s) * pair_sum +
                   4.0 * rp.f2(s) * kron_sum;
        }
        default:
            throw ConfigInvalid("cost derivatives supported to total order 4");
    }
}

inline std::vector<int> expand_multi_index(const MultiIndex& mi) {
    std::vector<int> idx;
    for (int a = 0; a < static_cast<int>(mi.size()); ++a)
        for (int r = 0; r < mi[a]; ++r) idx.push_back(a);
    return idx;
}

}  // namespace detail

// Cost with derivative access to total order 4 (analytic when the kind admits
// closed forms, centered finite differences otherwise) plus a constant
// reference metric h on X.
class CostModel {
public:
    using CostFn = std::function<double(const Vec&, const Vec&)>;
    // (x, xbar, multi-index over x, multi-index over xbar) -> derivative value
    using DerivFn = std::function<double(const Vec&, const Vec&, const MultiIndex&, const MultiIndex&)>;

    CostModel(CostKind kind, int dim, Box domain_x, Box domain_xbar, Mat h, CostFn cost,
              DerivFn analytic = nullptr, fd::Options fd_opts = {})
        : kind_(kind),
          dim_(dim),
          domain_x_(std::move(domain_x)),
          domain_xbar_(std::move(domain_xbar)),
          h_(std::move(h)),
          cost_(std::move(cost)),
          analytic_(std::move(analytic)),
          fd_opts_(fd_opts) {
        if (dim_ <= 0) throw ConfigInvalid("cost dimension must be positive");
        if (domain_x_.dim() != dim_ || domain_xbar_.dim() != dim_)
            throw ConfigInvalid("domain boxes must match the cost dimension");
        if (h_.rows() != dim_ || h_.cols() != dim_)
            throw ConfigInvalid("reference metric h must be n x n");
        Eigen::LLT<Mat> llt(h_);
        if (llt.info() != Eigen::Success)
            throw ConfigInvalid("reference metric h must be positive definite");
        h_chol_ = llt.matrixL();
        h_inv_ = llt.solve(Mat::Identity(dim_, dim_));
    }

    CostKind kind() const { return kind_; }
    int dim() const { return dim_; }
    const Box& domain_x() const { return domain_x_; }
    const Box& domain_xbar() const { return domain_xbar_; }
    const Mat& h() const { return h_; }
    const Mat& h_inv() const { return h_inv_; }
    const Mat& h_cholL() const { return h_chol_; }
    double vol_h() const { return std::sqrt(h_.determinant()); }
    bool analytic_derivatives() const { return static_cast<bool>(analytic_); }
    const fd::Options& fd_options() const { return fd_opts_; }

    double value(const Vec& x, const Vec& xbar) const { return cost_(x, xbar); }

    void require_in_domain(const Vec& x, const Vec& xbar, double slack = 1e-12) const {
        if (!domain_x_.contains(x, slack) || !domain_xbar_.contains(xbar, slack))
            throw DomainError("point outside the declared domain boxes");
    }

    double deriv(const Vec& x, const Vec& xbar, const MultiIndex& mi_x,
                 const MultiIndex& mi_xbar) const {
        if (static_cast<int>(mi_x.size()) != dim_ || static_cast<int>(mi_xbar.size()) != dim_)
            throw ConfigInvalid("multi-index length must equal the cost dimension");
        if (order(mi_x) + order(mi_xbar) > 4)
            throw ConfigInvalid("cost derivatives supported to total order 4");
        if (analytic_) return analytic_(x, xbar, mi_x, mi_xbar);
        MultiIndex joint(mi_x);
        joint.insert(joint.end(), mi_xbar.begin(), mi_xbar.end());
        Vec p = concat(x, xbar);
        auto f = [this](const Vec& q) {
            return cost_(q.head(dim_), q.tail(dim_));
        };
        return fd::derivative(f, p, joint, fd_opts_);
    }

    // Mixed Hessian d2c/dx^i dxbar^k as an n x n matrix E.
    Mat cross_hessian_raw(const Vec& x, const Vec& xbar) const {
        Mat E(dim_, dim_);
        MultiIndex mx(dim_, 0), mxb(dim_, 0);
        for (int i = 0; i < dim_; ++i) {
            mx[i] = 1;
            for (int k = 0; k < dim_; ++k) {
                mxb[k] = 1;
                E(i, k) = deriv(x, xbar, mx, mxb);
                mxb[k] = 0;
            }
            mx[i] = 0;
        }
        return E;
    }

private:
    CostKind kind_;
    int dim_;
    Box domain_x_, domain_xbar_;
    Mat h_, h_inv_, h_chol_;
    CostFn cost_;
    DerivFn analytic_;
    fd::Options fd_opts_;
};

// Mixed cost Hessian with the nondegeneracy check. Throws DegenerateCost when
// |det| falls below a2_tol.
inline Mat cross_hessian(const CostModel& model, const Vec& x, const Vec& xbar,
                         double a2_tol = tol::a2) {
    model.require_in_domain(x, xbar);
    Mat E = model.cross_hessian_raw(x, xbar);
    if (std::abs(E.determinant()) < a2_tol)
        throw DegenerateCost("mixed cost Hessian is degenerate at the requested point");
    return E;
}

namespace detail {

inline CostModel::DerivFn radial_deriv_fn(RadialProfile rp, int dim) {
    return [rp = std::move(rp), dim](const Vec& x, const Vec& xbar, const MultiIndex& mx,
                                     const MultiIndex& mxb) {
        Vec d = x - xbar;
        MultiIndex joint(dim, 0);
        for (int a = 0; a < dim; ++a) joint[a] = mx[a] + mxb[a];
        double sign = (order(mxb) % 2 == 0) ? 1.0 : -1.0;
        return sign * radial_derivative(rp, d, expand_multi_index(joint));
    };
}

}  // namespace detail

inline CostModel make_bilinear_cost(int dim, Box domain_x, Box domain_xbar, Mat h) {
    auto cost = [](const Vec& x, const Vec& xb) { return -x.dot(xb); };
    auto deriv = [dim](const Vec& x, const Vec& xb, const MultiIndex& mx, const MultiIndex& mxb) {
        int ox = order(mx), oxb = order(mxb);
        if (ox == 0 && oxb == 0) return -x.dot(xb);
        if (ox == 1 && oxb == 0) {
            for (int a = 0; a < dim; ++a)
                if (mx[a] == 1) return -xb[a];
        }
        if (ox == 0 && oxb == 1) {
            for (int a = 0; a < dim; ++a)
                if (mxb[a] == 1) return -x[a];
        }
        if (ox == 1 && oxb == 1) {
            for (int a = 0; a < dim; ++a)
                if (mx[a] == 1) return mxb[a] == 1 ? -1.0 : 0.0;
        }
        return 0.0;
    };
    return CostModel(CostKind::bilinear, dim, std::move(domain_x), std::move(domain_xbar),
                     std::move(h), cost, deriv);
}

inline CostModel make_quadratic_cost(int dim, Box domain_x, Box domain_xbar, Mat h) {
    detail::RadialProfile rp{
        [](double s) { return 0.5 * s; },
        [](double) { return 0.5; },
        [](double) { return 0.0; },
        [](double) { return 0.0; },
        [](double) { return 0.0; },
    };
    auto cost = [](const Vec& x, const Vec& xb) { return 0.5 * (x - xb).squaredNorm(); };
    return CostModel(CostKind::quadratic, dim, std::move(domain_x), std::move(domain_xbar),
                     std::move(h), cost, detail::radial_deriv_fn(rp, dim));
}

// c = -log|x - xbar| = -log(s)/2 with s = |x - xbar|^2.
inline CostModel make_log_distance_cost(int dim, Box domain_x, Box domain_xbar, Mat h) {
    detail::RadialProfile rp{
        [](double s) { return -0.5 * std::log(s); },
        [](double s) { return -0.5 / s; },
        [](double s) { return 0.5 / (s * s); },
        [](double s) { return -1.0 / (s * s * s); },
        [](double s) { return 3.0 / (s * s * s * s); },
    };
    auto cost = [](const Vec& x, const Vec& xb) {
        return -0.5 * std::log((x - xb).squaredNorm());
    };
    return CostModel(CostKind::log_distance, dim, std::move(domain_x), std::move(domain_xbar),
                     std::move(h), cost, detail::radial_deriv_fn(rp, dim));
}

// c = sqrt(1 + |x - xbar|^2).
inline CostModel make_sqrt_one_plus_cost(int dim, Box domain_x, Box domain_xbar, Mat h) {
    detail::RadialProfile rp{
        [](double s) { return std::sqrt(1.0 + s); },
        [](double s) { return 0.5 / std::sqrt(1.0 + s); },
        [](double s) { return -0.25 / std::pow(1.0 + s, 1.5); },
        [](double s) { return 0.375 / std::pow(1.0 + s, 2.5); },
        [](double s) { return -0.9375 / std::pow(1.0 + s, 3.5); },
    };
    auto cost = [](const Vec& x, const Vec& xb) {
        return std::sqrt(1.0 + (x - xb).squaredNorm());
    };
    return CostModel(CostKind::sqrt_one_plus, dim, std::move(domain_x), std::move(domain_xbar),
                     std::move(h), cost, detail::radial_deriv_fn(rp, dim));
}

// Arbitrary user cost; finite-difference derivatives unless a closed form is
// registered.
inline CostModel make_custom_cost(int dim, Box domain_x, Box domain_xbar, Mat h,
                                  CostModel::CostFn cost, CostModel::DerivFn deriv = nullptr,
                                  fd::Options fd_opts = {}) {
    return CostModel(CostKind::custom, dim, std::move(domain_x), std::move(domain_xbar),
                     std::move(h), std::move(cost), std::move(deriv), fd_opts);
}

namespace detail {

// Tensor-product Catmull-Rom interpolation of values sampled on a regular
// product grid; edge cells reuse the boundary sample (clamped extension).
class TableInterpolant {
public:
    TableInterpolant(Box box, std::vector<int> shape, std::vector<double> values)
        : box_(std::move(box)), shape_(std::move(shape)), values_(std::move(values)) {
        std::size_t expect = 1;
        for (int s : shape_) {
            if (s < 4) throw ConfigInvalid("table cost needs at least 4 samples per axis");
            expect *= static_cast<std::size_t>(s);
        }
        if (expect != values_.size())
            throw ConfigInvalid("table cost value count does not match the grid shape");
    }

    double operator()(const Vec& p) const { return eval_axis(0, std::vector<int>{}, p); }

private:
    static double catmull_rom(double pm1, double p0, double p1, double p2, double t) {
        return 0.5 * ((2.0 * p0) + (-pm1 + p1) * t + (2.0 * pm1 - 5.0 * p0 + 4.0 * p1 - p2) * t * t +
                      (-pm1 + 3.0 * p0 - 3.0 * p1 + p2) * t * t * t);
    }

    double sample(const std::vector<int>& idx) const {
        std::size_t flat = 0;
        for (std::size_t a = 0; a < shape_.size(); ++a) {
            int i = std::clamp(idx[a], 0, shape_[a] - 1);
            flat = flat * static_cast<std::size_t>(shape_[a]) + static_cast<std::size_t>(i);
        }
        return values_[flat];
    }

    double eval_axis(std::size_t axis, std::vector<int> idx, const Vec& p) const {
        double w = (box_.hi[axis] - box_.lo[axis]) / (shape_[axis] - 1);
        double u = (p[axis] - box_.lo[axis]) / w;
        int i0 = std::clamp(static_cast<int>(std::floor(u)), 0, shape_[axis] - 2);
        double t = u - i0;
        double vals[4];
        for (int s = -1; s <= 2; ++s) {
            idx.push_back(i0 + s);
            if (axis + 1 == shape_.size())
                vals[s + 1] = sample(idx);
            else
                vals[s + 1] = eval_axis(axis + 1, idx, p);
            idx.pop_back();
        }
        return catmull_rom(vals[0], vals[1], vals[2], vals[3], t);
    }

    Box box_;
    std::vector<int> shape_;
    std::vector<double> values_;
};

}  // namespace detail

// Cost tabulated on a product grid over domain_x x domain_xbar (row-major,
// x-axes first); derivatives come from finite differences of the interpolant.
inline CostModel make_table_cost(int dim, Box domain_x, Box domain_xbar, Mat h,
                                 std::vector<int> shape, std::vector<double> values,
                                 fd::Options fd_opts = {}) {
    if (static_cast<int>(shape.size()) != 2 * dim)
        throw ConfigInvalid("table cost shape must cover all 2n axes");
    detail::TableInterpolant interp(Box::product(domain_x, domain_xbar), std::move(shape),
                                    std::move(values));
    auto cost = [interp, dim](const Vec& x, const Vec& xb) { return interp(concat(x, xb)); };
    return CostModel(CostKind::custom_table, dim, std::move(domain_x), std::move(domain_xbar),
                     std::move(h), cost, nullptr, fd_opts);
}

}  // namespace otgeo
