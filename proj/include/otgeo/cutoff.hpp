#pragma once

#include <cmath>

#include "otgeo/core.hpp"

namespace otgeo {

// Compactly supported C^2 bump on X, lifted to the product as
// phi(x, xbar) = amplitude * psi(|x - x0|^2 / r^2) with psi(s) = max(0, 1-s)^3.
struct Cutoff {
    Vec center;
    double radius = 1.0;
    double amplitude = 1.0;

    int dim() const { return static_cast<int>(center.size()); }

    double value_x(const Vec& x) const {
        double s = (x - center).squaredNorm() / (radius * radius);
        if (s >= 1.0) return 0.0;
        double t = 1.0 - s;
        return amplitude * t * t * t;
    }

    Vec grad_x(const Vec& x) const {
        double s = (x - center).squaredNorm() / (radius * radius);
        if (s >= 1.0) return Vec::Zero(dim());
        double t = 1.0 - s;
        // psi'(s) = -3 (1-s)^2, ds/dx = 2 (x - x0) / r^2
        return amplitude * (-3.0 * t * t) * 2.0 / (radius * radius) * (x - center);
    }

    Mat hess_x(const Vec& x) const {
        double r2 = radius * radius;
        double s = (x - center).squaredNorm() / r2;
        if (s >= 1.0) return Mat::Zero(dim(), dim());
        double t = 1.0 - s;
        Vec ds = 2.0 / r2 * (x - center);
        // psi''(s) = 6 (1-s)
        return amplitude *
               (6.0 * t * ds * ds.transpose() - 3.0 * t * t * 2.0 / r2 * Mat::Identity(dim(), dim()));
    }

    // ambient versions on the product chart (x first)
    double value(const Vec& p) const { return value_x(p.head(dim())); }
};

inline Cutoff make_cutoff(Vec center, double radius, const Box& region, double amplitude = 1.0) {
    if (!(radius > 0.0)) throw ConfigInvalid("cutoff radius must be positive");
    if (!(amplitude > 0.0) || amplitude > 1.0)
        throw ConfigInvalid("cutoff amplitude must lie in (0, 1]");
    if (static_cast<int>(center.size()) != region.dim())
        throw ConfigInvalid("cutoff center dimension mismatch");
    for (int a = 0; a < region.dim(); ++a)
        if (center[a] - radius < region.lo[a] - 1e-12 || center[a] + radius > region.hi[a] + 1e-12)
            throw SupportEscapesRegion("cutoff support ball leaves the region");
    Cutoff c;
    c.center = std::move(center);
    c.radius = radius;
    c.amplitude = amplitude;
    return c;
}

}  // namespace otgeo
