#include "helpers.hpp"

#include "otgeo/curvature.hpp"

using namespace otgeo;
using testutil::box1;
using testutil::box2;
using testutil::unit_box;
using testutil::vec;

TEST_CASE("flat bilinear geometry has vanishing curvature", "[curvature]") {
    CostGeometry geo = testutil::flat_geometry_2d();
    MetricField gh = geo.kmw_metric_field();
    Rng rng(2);
    for (int i = 0; i < 5; ++i) {
        Vec p = concat(testutil::random_interior_point(geo.model().domain_x(), rng),
                       testutil::random_interior_point(geo.model().domain_xbar(), rng));
        CurvatureSample s = riemann_curvature(gh, p);
        CHECK(s.riemann.max_abs() < 1e-10);

        MetricField fd_only = gh;
        fd_only.d1 = nullptr;
        fd_only.d2 = nullptr;
        CurvatureSample s_fd = riemann_curvature(fd_only, p, 5e-2);
        CHECK(s_fd.riemann.max_abs() < 1e-10);
    }
}

TEST_CASE("curvature symmetries hold in closed-form mode to 1e-9", "[curvature]") {
    CostGeometry geo = testutil::log_geometry_2d();
    MetricField gh = geo.kmw_metric_field();
    Rng rng(4);
    for (int i = 0; i < 5; ++i) {
        Vec p = concat(testutil::random_interior_point(geo.model().domain_x(), rng),
                       testutil::random_interior_point(geo.model().domain_xbar(), rng));
        auto res = riemann_curvature(gh, p).symmetry_residuals();
        CHECK(res.max_absolute() < 1e-9 * std::max(1.0, res.scale));
    }
}

TEST_CASE("curvature symmetries hold in stencil mode to 1e-6", "[curvature]") {
    CostGeometry geo = testutil::log_geometry_2d();
    MetricField gh = geo.kmw_metric_field();
    gh.d1 = nullptr;
    gh.d2 = nullptr;
    Rng rng(6);
    for (int i = 0; i < 3; ++i) {
        Vec p = concat(testutil::random_interior_point(geo.model().domain_x(), rng, 0.2),
                       testutil::random_interior_point(geo.model().domain_xbar(), rng, 0.2));
        auto res = riemann_curvature(gh, p, 1e-2).symmetry_residuals();
        CHECK(res.max_absolute() < 1e-6 * std::max(1.0, res.scale));
    }
}

TEST_CASE("one-dimensional quadratic-cost geometry is flat", "[curvature]") {
    // the 2-D product metric from any 1-D cost/densities factors, so its
    // Gaussian curvature vanishes identically (symbolic reference)
    Box bx = box1(0.0, 1.0), bxb = box1(0.0, 1.0);
    CostModel model = make_quadratic_cost(1, bx, bxb, Mat::Identity(1, 1));
    DensityPair dens(Density::gaussian_clipped(bx, vec({0.5}), vec({0.4})),
                     Density::gaussian_clipped(bxb, vec({0.6}), vec({0.8})));
    CostGeometry geo(model, dens);
    MetricField gh = geo.kmw_metric_field();
    Vec p = vec({0.4, 0.55});

    CurvatureSample s = riemann_curvature(gh, p);
    double chi = geo.chi(p.head(1), p.tail(1));
    double gauss = s.riemann(0, 1, 0, 1) / (-chi * chi);
    CHECK(std::abs(gauss) < 1e-4);

    MetricField fd_only = gh;
    fd_only.d1 = nullptr;
    fd_only.d2 = nullptr;
    CurvatureSample s_fd = riemann_curvature(fd_only, p, 1e-2);
    double gauss_fd = s_fd.riemann(0, 1, 0, 1) / (-chi * chi);
    CHECK(std::abs(gauss_fd) < 1e-4);
}

TEST_CASE("log-cost sectional values match the frozen symbolic table", "[curvature]") {
    CostGeometry geo = testutil::log_geometry_2d();
    struct Probe {
        double x1, x2, y1, y2, xi1, xi2, xb1, xb2, expected;
    };
    // frozen by tests/oracle/symbolic_reference.py
    const Probe probes[] = {
        {0.25, 0.50, 2.50, 0.75, 1.0, 0.0, 0.21951219512195125, -0.97560975609756106,
         0.39024390243902451},
        {0.10, 0.90, 2.20, 0.30, 0.7648421872844885, 0.64421768723769102,
         -0.95104485225776947, -0.30905289028578542, 0.41928721174004202},
        {0.80, 0.20, 2.90, 0.60, -0.50484610459985757, 0.86320936664887371,
         -0.98835476236006004, 0.15216722288387025, 0.43763676148796515},
        {0.50, 0.50, 2.50, 0.50, -0.65364362086361194, -0.7568024953079282,
         0.7568024953079282, 0.65364362086361194, 0.5},
    };
    for (const Probe& pr : probes) {
        double val = mtw_sectional(geo, vec({pr.x1, pr.x2}), vec({pr.y1, pr.y2}),
                                   vec({pr.xi1, pr.xi2}), vec({pr.xb1, pr.xb2}));
        CHECK(val == Catch::Approx(pr.expected).epsilon(1e-9));
    }
}

TEST_CASE("sectional values vanish for bilinear and quadratic costs", "[curvature]") {
    for (auto geo : {testutil::flat_geometry_2d(), testutil::identity_geometry_2d()}) {
        Rng rng(9);
        MtwOptions opt;
        opt.project = true;
        for (int i = 0; i < 10; ++i) {
            Vec x = testutil::random_interior_point(geo.model().domain_x(), rng);
            Vec xb = testutil::random_interior_point(geo.model().domain_xbar(), rng);
            Vec xi = Vec::Random(2), guess = Vec::Random(2);
            double val = mtw_sectional(geo, x, xb, xi, guess, opt);
            CHECK(std::abs(val) < 1e-10);
        }
    }
}

TEST_CASE("sectional value is biquadratic in the pair", "[curvature]") {
    CostGeometry geo = testutil::log_geometry_2d();
    Vec x = vec({0.25, 0.5}), xb = vec({2.5, 0.75});
    Vec xi = vec({1.0, 0.0});
    Vec xibar = vec({0.21951219512195125, -0.97560975609756106});
    double base = mtw_sectional(geo, x, xb, xi, xibar);
    double scaled = mtw_sectional(geo, x, xb, (1.7 * xi).eval(), (0.3 * xibar).eval());
    double factor = 1.7 * 1.7 * 0.3 * 0.3;
    CHECK(scaled == Catch::Approx(factor * base).epsilon(1e-12));
}

TEST_CASE("non-orthogonal pairs are rejected unless projected", "[curvature]") {
    CostGeometry geo = testutil::log_geometry_2d();
    Vec x = vec({0.25, 0.5}), xb = vec({2.5, 0.75});
    Vec xi = vec({1.0, 0.0}), bad = vec({1.0, 0.2});
    CHECK_THROWS_AS(mtw_sectional(geo, x, xb, xi, bad), NotOrthogonal);
    MtwOptions opt;
    opt.project = true;
    CHECK_NOTHROW(mtw_sectional(geo, x, xb, xi, bad, opt));
}

TEST_CASE("sectional sign is invariant under conformal density changes", "[curvature]") {
    CostGeometry base = testutil::log_geometry_2d();
    Box bx = base.model().domain_x(), bxb = base.model().domain_xbar();
    // positive smooth factors
    DensityPair conformal(
        Density::custom(
            bx, [](const Vec& x) { return 1.0 + 0.5 * std::sin(3.0 * x[0]) * x[1]; },
            [](const Vec& x) {
                Vec g(2);
                double denom = 1.0 + 0.5 * std::sin(3.0 * x[0]) * x[1];
                g[0] = 1.5 * std::cos(3.0 * x[0]) * x[1] / denom;
                g[1] = 0.5 * std::sin(3.0 * x[0]) / denom;
                return g;
            },
            nullptr),
        Density::custom(bxb, [](const Vec& xb) { return std::exp(0.3 * xb[0] - 0.2 * xb[1]); }));
    // fall back to numeric hessians for the custom factors
    CostGeometry warped(base.model(), conformal);

    Rng rng(13);
    MtwOptions opt;
    opt.project = true;
    for (int i = 0; i < 50; ++i) {
        Vec x = testutil::random_interior_point(bx, rng);
        Vec xb = testutil::random_interior_point(bxb, rng);
        std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
        double a = ang(rng);
        Vec xi = vec({std::cos(a), std::sin(a)});
        Vec seed = vec({std::cos(a + 1.0), std::sin(a + 1.0)});
        double v1 = mtw_sectional(base, x, xb, xi, seed, opt);
        double v2 = mtw_sectional(warped, x, xb, xi, seed, opt);
        REQUIRE(v1 > 0.0);
        CHECK(v2 > 0.0);
    }
}

TEST_CASE("kappa estimate is zero with violation flag for the bilinear cost", "[curvature]") {
    CostGeometry geo = testutil::flat_geometry_2d();
    KappaEstimate est = estimate_kappa(geo, geo.model().domain_x(), geo.model().domain_xbar(), 3);
    CHECK(est.kappa == 0.0);
    CHECK(est.mtw_violated);
    CHECK(est.defined);
}

TEST_CASE("kappa on the log-cost region matches the symbolic envelope", "[curvature]") {
    // reference: the normalized sectional value equals 2/|x-xbar|^2 on this
    // region (symbolic oracle), so the scan minimum is 2/10 = 0.2 at the far
    // corners
    CostGeometry geo = testutil::log_geometry_2d();
    KappaEstimate est = estimate_kappa(geo, geo.model().domain_x(), geo.model().domain_xbar(), 3);
    CHECK_FALSE(est.mtw_violated);
    CHECK(est.kappa == Catch::Approx(0.2).epsilon(1e-6));

    KappaEstimate fine = estimate_kappa(geo, geo.model().domain_x(), geo.model().domain_xbar(), 5);
    CHECK(std::abs(fine.kappa - est.kappa) < 0.1 * est.kappa);
    CHECK(fine.kappa <= est.kappa + 1e-12);
}

TEST_CASE("kappa is undefined in one dimension", "[curvature]") {
    CostGeometry geo = testutil::rescale_geometry_1d();
    KappaEstimate est = estimate_kappa(geo, geo.model().domain_x(), geo.model().domain_xbar(), 3);
    CHECK_FALSE(est.defined);
}
