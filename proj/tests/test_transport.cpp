#include "helpers.hpp"

#include "otgeo/transport.hpp"

#include <algorithm>
#include <numeric>

using namespace otgeo;
using testutil::box1;
using testutil::unit_box;
using testutil::vec;

namespace {

// Independent oracle: W1 distance between a discrete measure and a 1-D
// density, as the integral of the CDF mismatch on a dense lattice.
double w1_oracle_1d(const DiscreteMeasure& m, const Density& dens, int lattice = 20000) {
    const Box& box = dens.box();
    double lo = box.lo[0], hi = box.hi[0];
    double dt = (hi - lo) / lattice;
    std::vector<std::pair<double, double>> atoms;
    for (int i = 0; i < m.size(); ++i) atoms.emplace_back(m.points[i][0], m.weights[i]);
    std::sort(atoms.begin(), atoms.end());
    double total = 0.0, cdf_disc = 0.0, cdf_cont = 0.0;
    std::size_t next_atom = 0;
    for (int k = 0; k < lattice; ++k) {
        double t = lo + (k + 0.5) * dt;
        while (next_atom < atoms.size() && atoms[next_atom].first <= t)
            cdf_disc += atoms[next_atom++].second;
        cdf_cont += dens.value(vec({t})) * dt;
        total += std::abs(cdf_disc - cdf_cont) * dt;
    }
    return total;
}

// Independent oracle: exact assignment objective by brute-force enumeration
// over permutations (equal weights).
double brute_force_assignment(const Mat& C) {
    int n = static_cast<int>(C.rows());
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += C(i, perm[i]);
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / n;  // weights are 1/n each
}

DiscreteMeasure atoms_1d(std::vector<double> xs, std::vector<double> ws, const Box& box) {
    DiscreteMeasure m;
    m.box = box;
    for (double x : xs) m.points.push_back(vec({x}));
    m.weights = Vec(static_cast<Eigen::Index>(ws.size()));
    for (std::size_t i = 0; i < ws.size(); ++i) m.weights[i] = ws[i];
    return m;
}

}  // namespace

TEST_CASE("midpoint discretization of the uniform density", "[transport]") {
    DiscreteMeasure m = discretize(Density::uniform(box1(0, 1)), box1(0, 1), {4});
    REQUIRE(m.size() == 4);
    for (int i = 0; i < 4; ++i) {
        CHECK(m.weights[i] == Catch::Approx(0.25));
        CHECK(m.points[i][0] == Catch::Approx(0.125 + 0.25 * i));
    }
    m.validate();
}

TEST_CASE("gaussian discretization renormalizes to unit mass", "[transport]") {
    Density d = Density::gaussian_clipped(unit_box(2), vec({0.3, 0.7}), vec({0.4, 0.3}));
    for (int g : {3, 5, 8}) {
        DiscreteMeasure m = discretize(d, unit_box(2), {g, g});
        CHECK(std::abs(m.weights.sum() - 1.0) < 1e-14);
    }
}

TEST_CASE("grid refinement halves the W1 discretization error", "[transport]") {
    Density d = Density::gaussian_clipped(box1(0, 1), vec({0.4}), vec({0.35}));
    double w1_coarse = w1_oracle_1d(discretize(d, box1(0, 1), {16}), d);
    double w1_fine = w1_oracle_1d(discretize(d, box1(0, 1), {32}), d);
    double ratio = w1_fine / w1_coarse;
    CHECK(ratio > 0.4);
    CHECK(ratio < 0.6);
}

TEST_CASE("two-atom self transport is free", "[transport]") {
    Box b = box1(-0.5, 1.5);
    DiscreteMeasure mu = atoms_1d({0.0, 1.0}, {0.5, 0.5}, b);
    DiscreteMeasure nu = mu;
    Mat C(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            C(i, j) =
                0.5 * (mu.points[i][0] - nu.points[j][0]) * (mu.points[i][0] - nu.points[j][0]);
    TransportSolution sol = solve_exact(C, mu, nu);
    CHECK(sol.objective == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(sol.plan.size() == 2);
    for (const auto& e : sol.plan) CHECK(e.i == e.j);
}

TEST_CASE("1-D rescaling recovers the monotone map x -> 2x", "[transport]") {
    CostGeometry geo = testutil::rescale_geometry_1d();
    DiscreteMeasure mu = discretize(geo.densities().rho, geo.model().domain_x(), {64});
    DiscreteMeasure nu = discretize(geo.densities().rho_bar, geo.model().domain_xbar(), {64});
    Mat C = cost_matrix(geo.model(), mu, nu);
    TransportSolution sol = solve_exact(C, mu, nu);

    double cell = 2.0 / 64.0;
    for (int i = 0; i < mu.size(); ++i)
        CHECK(std::abs(sol.F[i][0] - 2.0 * mu.points[i][0]) < cell);

    // no crossing pairs
    for (const auto& e1 : sol.plan)
        for (const auto& e2 : sol.plan)
            if (e1.i < e2.i) CHECK(e1.j <= e2.j);

    CHECK(sol.marginal_residual < tol::marginal_exact);
    CHECK(sol.duality_gap >= -1e-12);
    CHECK(sol.duality_gap < 1e-9);
}

TEST_CASE("exact solve matches brute force and satisfies duality", "[transport]") {
    Rng rng(77);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        int n = 6;
        Box b = box1(-0.1, 1.1);
        std::vector<double> xs, ys, w(n, 1.0 / n);
        for (int i = 0; i < n; ++i) xs.push_back(unif(rng));
        for (int j = 0; j < n; ++j) ys.push_back(unif(rng));
        DiscreteMeasure mu = atoms_1d(xs, w, b), nu = atoms_1d(ys, w, b);
        Mat C(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                C(i, j) = std::cos(3.0 * xs[i]) * ys[j] + xs[i] * ys[j] * ys[j];
        TransportSolution sol = solve_exact(C, mu, nu);
        CHECK(sol.objective == Catch::Approx(brute_force_assignment(C)).margin(1e-12));
        CHECK(sol.feasibility_margin(C) > -1e-9);
        CHECK(sol.support_violation(C) < 1e-9);
        CHECK(std::abs(sol.duality_gap) < 1e-9);
    }
}

TEST_CASE("exact solve handles general weights", "[transport]") {
    Rng rng(91);
    std::uniform_real_distribution<double> unif(0.1, 1.0);
    int n = 16, m = 12;
    Box b = box1(-0.1, 1.1);
    std::vector<double> xs, ys, wa, wb;
    for (int i = 0; i < n; ++i) {
        xs.push_back(unif(rng));
        wa.push_back(unif(rng));
    }
    for (int j = 0; j < m; ++j) {
        ys.push_back(unif(rng));
        wb.push_back(unif(rng));
    }
    double sa = std::accumulate(wa.begin(), wa.end(), 0.0);
    double sb = std::accumulate(wb.begin(), wb.end(), 0.0);
    for (double& w : wa) w /= sa;
    for (double& w : wb) w /= sb;
    DiscreteMeasure mu = atoms_1d(xs, wa, b), nu = atoms_1d(ys, wb, b);
    Mat C(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) C(i, j) = std::abs(xs[i] - ys[j]);
    TransportSolution sol = solve_exact(C, mu, nu);
    CHECK(sol.marginal_residual < tol::marginal_exact);
    CHECK(sol.feasibility_margin(C) > -1e-9);
    CHECK(sol.support_violation(C) < 1e-9);
    CHECK(std::abs(sol.duality_gap) < 1e-9);
    // near-vertex plans: support stays within a few arcs of n + m - 1
    CHECK(static_cast<int>(sol.plan.size()) <= n + m + 4);
}

TEST_CASE("mismatched marginal masses are rejected", "[transport]") {
    Box b = box1(0, 1);
    DiscreteMeasure mu = atoms_1d({0.2, 0.8}, {0.5, 0.5}, b);
    DiscreteMeasure nu = atoms_1d({0.3, 0.7}, {0.5, 0.6}, b);
    Mat C = Mat::Zero(2, 2);
    CHECK_THROWS_AS(solve_exact(C, mu, nu), InfeasibleMarginals);
    CHECK_THROWS_AS(solve_sinkhorn(C, mu, nu, {1e-2}), InfeasibleMarginals);
}

TEST_CASE("sinkhorn self transport is nearly free", "[transport]") {
    Box b = box1(0, 1);
    DiscreteMeasure mu = discretize(Density::uniform(b), b, {2});
    Mat C(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            double d = mu.points[i][0] - mu.points[j][0];
            C(i, j) = 0.5 * d * d;
        }
    TransportSolution sol = solve_sinkhorn(C, mu, mu, {1e-2});
    CHECK(sol.objective < 1e-3);
    CHECK(sol.marginal_residual < tol::marginal_sinkhorn);
}

TEST_CASE("sinkhorn objective approaches the exact one", "[transport]") {
    CostGeometry geo = testutil::rescale_geometry_1d();
    DiscreteMeasure mu = discretize(geo.densities().rho, geo.model().domain_x(), {32});
    DiscreteMeasure nu = discretize(geo.densities().rho_bar, geo.model().domain_xbar(), {32});
    Mat C = cost_matrix(geo.model(), mu, nu);
    TransportSolution exact = solve_exact(C, mu, nu);

    double eps = 5e-3;
    TransportSolution entropic = solve_sinkhorn(C, mu, nu, {1e-1, 3e-2, 1e-2, eps});
    CHECK(std::abs(entropic.objective - exact.objective) < 5.0 * eps * std::log(32.0));

    // halving the final epsilon shrinks the gap
    TransportSolution finer = solve_sinkhorn(C, mu, nu, {1e-1, 3e-2, 1e-2, eps, eps / 2.0});
    CHECK(std::abs(finer.objective - exact.objective) <
          std::abs(entropic.objective - exact.objective));
}

TEST_CASE("duality suite on random instances", "[transport]") {
    Rng rng(123);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Box b = box1(-0.1, 1.1);
    for (int trial = 0; trial < 5; ++trial) {
        int n = 16;
        std::vector<double> xs, ys, w(n, 1.0 / n);
        for (int i = 0; i < n; ++i) xs.push_back(unif(rng));
        for (int j = 0; j < n; ++j) ys.push_back(unif(rng));
        DiscreteMeasure mu = atoms_1d(xs, w, b), nu = atoms_1d(ys, w, b);
        Mat C(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double d = xs[i] - ys[j];
                C(i, j) = 0.5 * d * d;
            }
        TransportSolution sol = solve_exact(C, mu, nu);
        CHECK(std::abs(sol.duality_gap) < 1e-9);
        CHECK(sol.feasibility_margin(C) > -1e-9);
    }
}
