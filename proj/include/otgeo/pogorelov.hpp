#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "otgeo/core.hpp"
#include "otgeo/cutoff.hpp"
#include "otgeo/curvature.hpp"
#include "otgeo/elliptic_identity.hpp"
#include "otgeo/graph_geometry.hpp"

namespace otgeo {

struct LambdaRow {
    int flat = -1;
    Vec x;
    Vec lambdas;  // ascending in mu
    Vec mus;      // ascending
    double phi = 0.0;
    double bound_lhs = 0.0;  // kappa^{n-1} phi^{2n-2} mu_n (0 when kappa undefined)
};

// Per-point spectra table over interior grid atoms; the quantitative
// spacelikeness data lambda_i + 1/lambda_i is 2 mus.
inline std::vector<LambdaRow> lambda_table(const GraphChart& chart, const CostGeometry& geo,
                                           const Cutoff* cutoff = nullptr, int margin = 1) {
    std::vector<LambdaRow> rows;
    for (int flat = 0; flat < chart.source.size(); ++flat) {
        if (!chart.interior(flat, margin)) continue;
        GraphFrame frame = induced_frame(chart, geo, flat);
        LambdaRow row;
        row.flat = flat;
        row.x = chart.source.points[flat];
        row.lambdas = frame.lambdas;
        row.mus = frame.mus;
        row.phi = cutoff ? cutoff->value_x(row.x) : 1.0;
        rows.push_back(std::move(row));
    }
    return rows;
}

struct MaxPoint {
    int flat = -1;
    Vec point;        // lifted (x, F(x))
    double mu_n = 0.0;  // top eigenvalue of the restricted tensor w.r.t. induced g
    double phi = 0.0;
    double weight = 0.0;  // phi^{2n-2} mu_n
    GraphFrame frame;
};

// Grid argmax of phi^{2n-2} times the top eigenvalue of the restriction of
// S_field with respect to the induced metric; ties break to the smallest
// flat (lexicographic) index. Returns the diagonalizing frame at the argmax.
inline MaxPoint locate_max_point(const GraphChart& chart, const CostGeometry& geo,
                                 const MetricField& S_field, const Cutoff& cutoff,
                                 int margin = 1) {
    int d = chart.n();
    double exponent = 2.0 * d - 2.0;
    bool support_seen = false;
    MaxPoint best;
    best.weight = -std::numeric_limits<double>::infinity();
    for (int flat = 0; flat < chart.source.size(); ++flat) {
        if (!chart.interior(flat, margin)) continue;
        double phi = cutoff.value_x(chart.source.points[flat]);
        if (phi > 0.0) support_seen = true;
        Mat T = chart.tangent_basis(flat);
        Vec p = chart.lift(flat);
        Mat g_ind = T.transpose() * geo.ghat(p) * T;
        Eigen::LLT<Mat> llt(g_ind);
        if (llt.info() != Eigen::Success)
            throw NotSpacelike("induced metric is not positive definite at a sample");
        Mat S_ind = T.transpose() * S_field.eval(p) * T;
        Vec evals;
        Mat evecs;
        eigen_vs_h(S_ind, Mat(llt.matrixL()), evals, evecs);
        double top = evals[d - 1];
        double weight = std::pow(phi, exponent) * top;
        if (weight > best.weight) {
            best.flat = flat;
            best.point = p;
            best.mu_n = top;
            best.phi = phi;
            best.weight = weight;
        }
    }
    if (!support_seen) throw EmptySupport("cutoff vanishes on every interior sample");
    best.frame = induced_frame(chart, geo, best.flat);
    return best;
}

// sum_l R(e_l, e_n, e_l, e_n) over the tangent frame at the frame's point.
inline double frame_curvature_sum(const GraphFrame& frame, const CostGeometry& geo) {
    Tensor4 R = riemann_from_jet(geo.ghat_jet(frame.point, true));
    int d = static_cast<int>(frame.e.cols());
    Vec en = frame.e.col(d - 1);
    double total = 0.0;
    for (int l = 0; l < d; ++l) total += R.contract(frame.e.col(l), en, frame.e.col(l), en);
    return total;
}

// Observed constant of the maximum-point inequality:
// [sum_l R(e_l, e_n, e_l, e_n)] phi^2 / S(e_n, e_n).
struct MaxPointCheck {
    double curvature_sum = 0.0;
    double phi = 0.0;
    double mu_n = 0.0;
    double observed_constant = 0.0;
};

inline double max_point_ratio(double curvature_sum, double phi, double mu_n) {
    return curvature_sum * phi * phi / mu_n;
}

inline MaxPointCheck check_max_point_inequality(const GraphFrame& frame, const CostGeometry& geo,
                                                const Cutoff& cutoff) {
    MaxPointCheck out;
    out.curvature_sum = frame_curvature_sum(frame, geo);
    out.phi = cutoff.value_x(frame.point.head(frame.e.cols()));
    out.mu_n = frame.mus[frame.mus.size() - 1];
    out.observed_constant = max_point_ratio(out.curvature_sum, out.phi, out.mu_n);
    return out;
}

// Sampled C0/C1/C2 sup norms of the fields entering the estimate's constant.
struct EstimateNorms {
    double ghat_c2 = 0.0;
    double ghat_inv_c0 = 0.0;
    double shat_c2 = 0.0;
    double cutoff_c2 = 0.0;
    double log_density_c0 = 0.0;
};

struct PogorelovReport {
    int n = 0;
    double kappa = 0.0;
    bool kappa_defined = false;
    bool kappa_nonpositive = false;
    MaxPoint max_point;
    MaxPointCheck max_point_check;
    double C_bound = std::numeric_limits<double>::quiet_NaN();
    // key intermediate at the max point: sum_{i<n} R(e_i,e_n,e_i,e_n)
    // against the competing powers of mu_n
    double key_curvature_sum = 0.0;
    double mu_n_power = 0.0;  // mu_n^{n/(n-1)}
    double mu_n = 0.0;
    // worst ratio of (lambda_i + 1/lambda_i) kappa^{n-1} phi^{2n-2} / (2 C_bound),
    // <= 1 by construction of the max
    double eigenvalue_bound_ratio = 0.0;
    std::vector<LambdaRow> table;
    EstimateNorms norms;
};

struct PogorelovOptions {
    int margin = 1;
    int norm_samples = 200;
    std::uint64_t seed = 7ULL;
};

inline EstimateNorms sample_norms(const GraphChart& chart, const CostGeometry& geo,
                                  const Cutoff& cutoff, const PogorelovOptions& opt) {
    EstimateNorms norms;
    Rng rng(opt.seed);
    std::uniform_int_distribution<int> pick(0, chart.source.size() - 1);
    int taken = 0, guard = 0;
    while (taken < opt.norm_samples && ++guard < 50 * opt.norm_samples) {
        int flat = pick(rng);
        if (!chart.interior(flat, opt.margin)) continue;
        Vec x = chart.source.points[flat];
        if (cutoff.value_x(x) <= 0.0) continue;
        Vec p = chart.lift(flat);
        MetricJet gj = geo.ghat_jet(p, true);
        MetricJet sj = geo.shat_jet(p, true);
        double gmax = gj.value.cwiseAbs().maxCoeff();
        double smax = sj.value.cwiseAbs().maxCoeff();
        for (std::size_t a = 0; a < gj.d1.size(); ++a) {
            gmax = std::max(gmax, gj.d1[a].cwiseAbs().maxCoeff());
            smax = std::max(smax, sj.d1[a].cwiseAbs().maxCoeff());
            for (std::size_t b = a; b < gj.d1.size(); ++b) {
                gmax = std::max(gmax, gj.d2[a][b].cwiseAbs().maxCoeff());
                smax = std::max(smax, sj.d2[a][b].cwiseAbs().maxCoeff());
            }
        }
        norms.ghat_c2 = std::max(norms.ghat_c2, gmax);
        norms.shat_c2 = std::max(norms.shat_c2, smax);
        norms.ghat_inv_c0 =
            std::max(norms.ghat_inv_c0, detail::invert_metric(gj.value).cwiseAbs().maxCoeff());
        double cmax = std::max({cutoff.value_x(x), cutoff.grad_x(x).cwiseAbs().maxCoeff(),
                                cutoff.hess_x(x).cwiseAbs().maxCoeff()});
        norms.cutoff_c2 = std::max(norms.cutoff_c2, cmax);
        norms.log_density_c0 =
            std::max(norms.log_density_c0,
                     std::abs(std::log(geo.densities().rho.value(x) / geo.model().vol_h())));
        ++taken;
    }
    return norms;
}

// Evaluates kappa^{n-1} phi^{2n-2} mu_n over interior samples, reports the
// maximum as the observed constant, and checks the equivalent eigenvalue
// bound lambda_i + 1/lambda_i <= 2 C_bound kappa^{1-n} phi^{2-2n} at every
// sample. kappa <= 0 downgrades to spectra reporting with a flag.
inline PogorelovReport check_pogorelov_bound(const GraphChart& chart, const CostGeometry& geo,
                                             const Cutoff& cutoff, double kappa,
                                             const PogorelovOptions& opt = {}) {
    int d = chart.n();
    if (d < 2) throw ConfigInvalid("the interior estimate needs n >= 2");
    PogorelovReport report;
    report.n = d;
    report.kappa = kappa;
    report.kappa_defined = true;
    report.kappa_nonpositive = !(kappa > 0.0);

    report.table = lambda_table(chart, geo, &cutoff, opt.margin);
    if (report.table.empty()) throw EmptySupport("no interior samples available");

    MetricField S_field = geo.s_hat_metric_field();
    report.max_point = locate_max_point(chart, geo, S_field, cutoff, opt.margin);
    report.max_point_check = check_max_point_inequality(report.max_point.frame, geo, cutoff);

    // key intermediate at p0
    {
        const GraphFrame& frame = report.max_point.frame;
        Tensor4 R = riemann_from_jet(geo.ghat_jet(frame.point, true));
        Vec en = frame.e.col(d - 1);
        double total = 0.0;
        for (int i = 0; i < d - 1; ++i)
            total += R.contract(frame.e.col(i), en, frame.e.col(i), en);
        report.key_curvature_sum = total;
        report.mu_n = frame.mus[d - 1];
        report.mu_n_power = std::pow(report.mu_n, static_cast<double>(d) / (d - 1.0));
    }

    if (!report.kappa_nonpositive) {
        double kpow = std::pow(kappa, d - 1.0);
        double exponent = 2.0 * d - 2.0;
        double cbound = 0.0;
        for (LambdaRow& row : report.table) {
            row.bound_lhs = kpow * std::pow(row.phi, exponent) * row.mus[d - 1];
            cbound = std::max(cbound, row.bound_lhs);
        }
        report.C_bound = cbound;
        double worst = 0.0;
        for (const LambdaRow& row : report.table) {
            if (row.phi <= 0.0) continue;
            for (int i = 0; i < d; ++i) {
                double lhs = (row.lambdas[i] + 1.0 / row.lambdas[i]) * kpow *
                             std::pow(row.phi, exponent);
                worst = std::max(worst, lhs / (2.0 * cbound));
            }
        }
        report.eigenvalue_bound_ratio = worst;
        if (!std::isfinite(report.C_bound))
            throw KappaNonpositive("observed constant is not finite");
    }

    report.norms = sample_norms(chart, geo, cutoff, opt);
    return report;
}

}  // namespace otgeo
