#include "helpers.hpp"

using namespace otgeo;
using testutil::box1;
using testutil::unit_box;
using testutil::vec;

TEST_CASE("uniform density has unit mass and constant chart value", "[density]") {
    Density d = Density::uniform(box1(0.0, 2.0));
    CHECK(d.mass() == Catch::Approx(1.0).epsilon(1e-13));
    CHECK(d.value(vec({0.3})) == Catch::Approx(0.5));
    CHECK(d.value(vec({1.9})) == Catch::Approx(0.5));
    CHECK(d.grad_log(vec({1.0})).norm() == 0.0);
}

TEST_CASE("clipped gaussian is normalized and strictly positive", "[density]") {
    Density d = Density::gaussian_clipped(unit_box(2), vec({0.4, 0.6}), vec({0.3, 0.5}));
    CHECK(d.mass() == Catch::Approx(1.0).epsilon(1e-12));
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        Vec p = testutil::random_point_in(unit_box(2), rng);
        CHECK(d.value(p) > 0.0);
    }
}

TEST_CASE("gaussian log-derivatives match finite differences", "[density]") {
    Density d = Density::gaussian_clipped(unit_box(2), vec({0.4, 0.6}), vec({0.3, 0.5}));
    Vec p = vec({0.55, 0.25});
    auto f = [&](const Vec& q) { return std::log(d.value(q)); };
    Vec g = d.grad_log(p);
    Mat hh = d.hess_log(p);
    for (int a = 0; a < 2; ++a) {
        MultiIndex mi(2, 0);
        mi[a] = 1;
        CHECK(g[a] == Catch::Approx(fd::derivative(f, p, mi)).margin(1e-8));
        for (int b = a; b < 2; ++b) {
            MultiIndex mj(2, 0);
            mj[a] += 1;
            mj[b] += 1;
            CHECK(hh(a, b) == Catch::Approx(fd::derivative(f, p, mj)).margin(1e-6));
        }
    }
}

TEST_CASE("scaling hook multiplies the chart density without renormalizing", "[density]") {
    Density d = Density::uniform(box1(0.0, 1.0));
    Density d2 = d.scaled(2.0);
    CHECK(d2.value(vec({0.5})) == Catch::Approx(2.0 * d.value(vec({0.5}))));
    CHECK(d2.mass() == Catch::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("table density must be strictly positive", "[density]") {
    std::vector<double> values(16, 1.0);
    values[5] = 0.0;
    CHECK_THROWS_AS(Density::table(box1(0.0, 1.0), {16}, values), NonpositiveDensity);
}

TEST_CASE("table density normalizes and interpolates", "[density]") {
    // linear ramp 1 + x on [0,1]; integral of raw is 3/2
    std::vector<double> values;
    for (int i = 0; i < 9; ++i) values.push_back(1.0 + i / 8.0);
    Density d = Density::table(box1(0.0, 1.0), {9}, values);
    CHECK(d.mass() == Catch::Approx(1.0).epsilon(1e-10));
    CHECK(d.value(vec({0.5})) == Catch::Approx(1.5 / 1.5).epsilon(1e-9));
}
