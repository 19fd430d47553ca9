#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "otgeo/core.hpp"

namespace otgeo::fd {

// Central stencil (offsets, coefficients) for d^k/dt^k, second-order accurate.
struct Stencil1D {
    std::vector<int> offsets;
    std::vector<double> coeffs;  // to be divided by h^k
};

inline const Stencil1D& central_stencil(int k) {
    static const Stencil1D table[5] = {
        {{0}, {1.0}},
        {{-1, 1}, {-0.5, 0.5}},
        {{-1, 0, 1}, {1.0, -2.0, 1.0}},
        {{-2, -1, 1, 2}, {-0.5, 1.0, -1.0, 0.5}},
        {{-2, -1, 0, 1, 2}, {1.0, -4.0, 6.0, -4.0, 1.0}},
    };
    if (k < 0 || k > 4) throw ConfigInvalid("finite differences support derivative orders 0..4");
    return table[k];
}

// Per-order step policy: h_k = base * 10^(k/4).
inline double step_for_order(int k, double base) {
    return base * std::pow(10.0, k / 4.0);
}

// Tensor-product central difference of f at p for the given multi-index,
// with step h shared by all active axes.
inline double apply_tensor_stencil(const std::function<double(const Vec&)>& f, const Vec& p,
                                   const MultiIndex& mi, double h) {
    std::vector<int> axes;
    for (int a = 0; a < static_cast<int>(mi.size()); ++a)
        if (mi[a] > 0) axes.push_back(a);
    double denom = 1.0;
    for (int a : axes) denom *= std::pow(h, mi[a]);

    double acc = 0.0;
    Vec q = p;
    std::function<void(std::size_t, double)> rec = [&](std::size_t level, double coeff) {
        if (level == axes.size()) {
            acc += coeff * f(q);
            return;
        }
        int axis = axes[level];
        const Stencil1D& st = central_stencil(mi[axis]);
        double saved = q[axis];
        for (std::size_t s = 0; s < st.offsets.size(); ++s) {
            q[axis] = saved + st.offsets[s] * h;
            rec(level + 1, coeff * st.coeffs[s]);
        }
        q[axis] = saved;
    };
    rec(0, 1.0);
    return acc / denom;
}

struct Options {
    double base_step = 1e-3;
    bool richardson = true;
};

// Mixed partial derivative of f at p by central differences. The two-level
// Richardson combination (4 T(h/2) - T(h)) / 3 upgrades the stencil to
// fourth-order accuracy.
inline double derivative(const std::function<double(const Vec&)>& f, const Vec& p,
                         const MultiIndex& mi, const Options& opt = {}) {
    int k = order(mi);
    if (k == 0) return f(p);
    double h = step_for_order(k, opt.base_step);
    double coarse = apply_tensor_stencil(f, p, mi, h);
    if (!opt.richardson) return coarse;
    double fine = apply_tensor_stencil(f, p, mi, h / 2.0);
    return (4.0 * fine - coarse) / 3.0;
}

// Largest stencil excursion along any axis for the given multi-index/step,
// used for domain checks before evaluating.
inline double stencil_radius(const MultiIndex& mi, double base_step) {
    int k = order(mi);
    if (k == 0) return 0.0;
    double h = step_for_order(k, base_step);
    int reach = 1;
    for (int v : mi)
        if (v >= 3) reach = 2;
    return reach * h;
}

}  // namespace otgeo::fd
