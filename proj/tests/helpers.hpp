#pragma once

#include <catch2/catch_amalgamated.hpp>

#include "otgeo/cost_model.hpp"
#include "otgeo/density.hpp"
#include "otgeo/geometry.hpp"

namespace testutil {

using namespace otgeo;

inline Vec vec(std::initializer_list<double> v) {
    Vec r(static_cast<Eigen::Index>(v.size()));
    int i = 0;
    for (double x : v) r[i++] = x;
    return r;
}

inline Box unit_box(int n) { return Box(Vec::Zero(n), Vec::Ones(n)); }

inline Box box1(double lo, double hi) { return Box(vec({lo}), vec({hi})); }

inline Box box2(double lo1, double hi1, double lo2, double hi2) {
    return Box(vec({lo1, lo2}), vec({hi1, hi2}));
}

// Bilinear cost on unit squares with uniform densities: chi = 1, ghat constant.
inline CostGeometry flat_geometry_2d() {
    CostModel model = make_bilinear_cost(2, unit_box(2), unit_box(2), Mat::Identity(2, 2));
    DensityPair dens(Density::uniform(unit_box(2)), Density::uniform(unit_box(2)));
    return CostGeometry(model, dens);
}

// Quadratic cost, identity transport setup (same box, same density).
inline CostGeometry identity_geometry_2d() {
    CostModel model = make_quadratic_cost(2, unit_box(2), unit_box(2), Mat::Identity(2, 2));
    DensityPair dens(Density::uniform(unit_box(2)), Density::uniform(unit_box(2)));
    return CostGeometry(model, dens);
}

// Log cost between separated boxes with uniform densities; satisfies the
// strict curvature positivity condition with constant 2/|x-xbar|^2.
inline CostGeometry log_geometry_2d() {
    Box bx = unit_box(2);
    Box bxb = box2(2.0, 3.0, 0.0, 1.0);
    CostModel model = make_log_distance_cost(2, bx, bxb, Mat::Identity(2, 2));
    DensityPair dens(Density::uniform(bx), Density::uniform(bxb));
    return CostGeometry(model, dens);
}

// 1-D uniform [0,1] -> uniform [0,2] rescaling with quadratic cost.
inline CostGeometry rescale_geometry_1d() {
    Box bx = box1(0.0, 1.0);
    Box bxb = box1(0.0, 2.0);
    CostModel model = make_quadratic_cost(1, bx, bxb, Mat::Identity(1, 1));
    DensityPair dens(Density::uniform(bx), Density::uniform(bxb));
    return CostGeometry(model, dens);
}

inline Vec random_point_in(const Box& box, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vec p(box.dim());
    for (int i = 0; i < box.dim(); ++i) p[i] = box.lo[i] + unif(rng) * (box.hi[i] - box.lo[i]);
    return p;
}

// Interior sample: stays away from the box faces by the given fraction.
inline Vec random_interior_point(const Box& box, Rng& rng, double margin = 0.1) {
    std::uniform_real_distribution<double> unif(margin, 1.0 - margin);
    Vec p(box.dim());
    for (int i = 0; i < box.dim(); ++i) p[i] = box.lo[i] + unif(rng) * (box.hi[i] - box.lo[i]);
    return p;
}

}  // namespace testutil
