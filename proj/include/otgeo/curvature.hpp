#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <utility>

#include "otgeo/core.hpp"
#include "otgeo/geometry.hpp"

namespace otgeo {

// Dense rank-4 tensor with chart indices 0..dim-1.
class Tensor4 {
public:
    Tensor4() = default;
    explicit Tensor4(int dim)
        : dim_(dim), data_(static_cast<std::size_t>(dim) * dim * dim * dim, 0.0) {}

    int dim() const { return dim_; }
    double& operator()(int a, int b, int c, int d) {
        return data_[((static_cast<std::size_t>(a) * dim_ + b) * dim_ + c) * dim_ + d];
    }
    double operator()(int a, int b, int c, int d) const {
        return data_[((static_cast<std::size_t>(a) * dim_ + b) * dim_ + c) * dim_ + d];
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    double contract(const Vec& v1, const Vec& v2, const Vec& v3, const Vec& v4) const {
        double total = 0.0;
        for (int a = 0; a < dim_; ++a) {
            if (v1[a] == 0.0) continue;
            for (int b = 0; b < dim_; ++b) {
                if (v2[b] == 0.0) continue;
                for (int c = 0; c < dim_; ++c) {
                    if (v3[c] == 0.0) continue;
                    double inner = 0.0;
                    for (int d = 0; d < dim_; ++d) inner += (*this)(a, b, c, d) * v4[d];
                    total += v1[a] * v2[b] * v3[c] * inner;
                }
            }
        }
        return total;
    }

private:
    int dim_ = 0;
    std::vector<double> data_;
};

namespace detail {

inline Mat invert_metric(const Mat& g) {
    Eigen::FullPivLU<Mat> lu(g);
    if (!lu.isInvertible()) throw SingularMetric("metric matrix is not invertible");
    return lu.inverse();
}

}  // namespace detail

// Christoffel symbols gamma[s](a,b) = Gamma^s_ab of a metric jet.
struct ChristoffelData {
    Mat g;
    Mat g_inv;
    std::vector<Mat> dg;
    std::vector<Mat> gamma;
};

inline ChristoffelData christoffels_from_jet(const MetricJet& jet) {
    int d = static_cast<int>(jet.value.rows());
    ChristoffelData out;
    out.g = jet.value;
    out.g_inv = detail::invert_metric(out.g);
    out.dg = jet.d1;
    out.gamma.assign(d, Mat::Zero(d, d));
    for (int s = 0; s < d; ++s)
        for (int a = 0; a < d; ++a)
            for (int b = a; b < d; ++b) {
                double total = 0.0;
                for (int l = 0; l < d; ++l)
                    total += out.g_inv(s, l) *
                             (out.dg[a](l, b) + out.dg[b](l, a) - out.dg[l](a, b));
                out.gamma[s](a, b) = out.gamma[s](b, a) = 0.5 * total;
            }
    return out;
}

// Christoffels plus their coordinate derivatives.
struct ConnectionJet {
    ChristoffelData ch;
    std::vector<std::vector<Mat>> dgamma;  // dgamma[a][s](b,c) = d_a Gamma^s_bc
};

inline ConnectionJet connection_jet(const MetricJet& jet) {
    int d = static_cast<int>(jet.value.rows());
    ConnectionJet out;
    out.ch = christoffels_from_jet(jet);

    std::vector<Mat> dginv(d);
    for (int a = 0; a < d; ++a) dginv[a] = -out.ch.g_inv * out.ch.dg[a] * out.ch.g_inv;

    out.dgamma.assign(d, std::vector<Mat>(d, Mat::Zero(d, d)));
    for (int a = 0; a < d; ++a)
        for (int s = 0; s < d; ++s)
            for (int b = 0; b < d; ++b)
                for (int c = b; c < d; ++c) {
                    double total = 0.0;
                    for (int l = 0; l < d; ++l) {
                        double T = out.ch.dg[b](l, c) + out.ch.dg[c](l, b) -
                                   out.ch.dg[l](b, c);
                        double dT = jet.d2[a][b](l, c) + jet.d2[a][c](l, b) -
                                    jet.d2[a][l](b, c);
                        total += dginv[a](s, l) * T + out.ch.g_inv(s, l) * dT;
                    }
                    out.dgamma[a][s](b, c) = out.dgamma[a][s](c, b) = 0.5 * total;
                }
    return out;
}

inline Tensor4 riemann_from_connection(const ConnectionJet& conn) {
    const ChristoffelData& ch = conn.ch;
    int d = static_cast<int>(ch.g.rows());
    Tensor4 R(d);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            for (int c = 0; c < d; ++c)
                for (int s = 0; s < d; ++s) {
                    double up = conn.dgamma[a][s](b, c) - conn.dgamma[b][s](a, c);
                    for (int l = 0; l < d; ++l)
                        up += ch.gamma[l](b, c) * ch.gamma[s](a, l) -
                              ch.gamma[l](a, c) * ch.gamma[s](b, l);
                    if (up == 0.0) continue;
                    for (int e = 0; e < d; ++e) R(a, b, c, e) -= ch.g(s, e) * up;
                }
    return R;
}

// Lowered curvature tensor of a metric jet, with the sign convention that
// makes R(X,Y,X,Y) the unnormalized sectional curvature (positive on the
// round sphere).
inline Tensor4 riemann_from_jet(const MetricJet& jet) {
    return riemann_from_connection(connection_jet(jet));
}

// Builds the first two derivative levels of a field at p, using the field's
// closed forms when present and centered differences otherwise.
inline MetricJet field_jet(const MetricField& field, const Vec& p, double stencil_h,
                           bool with_d2 = true) {
    if (field.input_dim != field.mat_dim)
        throw ConfigInvalid("chart jets need a field with input_dim == mat_dim");
    if (!field.analytic()) require_stencil_inside(field, p, 2.0 * stencil_h);
    int d = field.input_dim;
    MetricJet jet;
    jet.value = field.eval(p);
    jet.d1.resize(d);
    for (int a = 0; a < d; ++a) jet.d1[a] = metric_d1(field, p, a, stencil_h);
    if (with_d2) {
        jet.d2.assign(d, std::vector<Mat>(d));
        for (int a = 0; a < d; ++a)
            for (int b = a; b < d; ++b) {
                jet.d2[a][b] = metric_d2(field, p, a, b, stencil_h);
                if (a != b) jet.d2[b][a] = jet.d2[a][b];
            }
    }
    return jet;
}

inline ChristoffelData christoffels(const MetricField& field, const Vec& p, double stencil_h) {
    return christoffels_from_jet(field_jet(field, p, stencil_h, false));
}

struct CurvatureSample {
    Vec point;
    Tensor4 riemann;
    double stencil_h = 0.0;  // 0 when the derivatives were closed-form

    struct SymmetryResiduals {
        double antisym_front = 0.0;  // R_abcd + R_bacd
        double antisym_back = 0.0;   // R_abcd + R_abdc
        double pair = 0.0;           // R_abcd - R_cdab
        double bianchi = 0.0;        // R_abcd + R_bcad + R_cabd
        double scale = 0.0;          // max |R|
        double max_absolute() const {
            return std::max({antisym_front, antisym_back, pair, bianchi});
        }
    };

    SymmetryResiduals symmetry_residuals() const {
        SymmetryResiduals r;
        int d = riemann.dim();
        r.scale = riemann.max_abs();
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                for (int c = 0; c < d; ++c)
                    for (int e = 0; e < d; ++e) {
                        double v = riemann(a, b, c, e);
                        r.antisym_front =
                            std::max(r.antisym_front, std::abs(v + riemann(b, a, c, e)));
                        r.antisym_back =
                            std::max(r.antisym_back, std::abs(v + riemann(a, b, e, c)));
                        r.pair = std::max(r.pair, std::abs(v - riemann(c, e, a, b)));
                        r.bianchi =
                            std::max(r.bianchi,
                                     std::abs(v + riemann(b, c, a, e) + riemann(c, a, b, e)));
                    }
        return r;
    }
};

inline CurvatureSample riemann_curvature(const MetricField& field, const Vec& p,
                                         double stencil_h = 1e-2) {
    CurvatureSample sample;
    sample.point = p;
    sample.stencil_h = field.analytic() ? 0.0 : stencil_h;
    sample.riemann = riemann_from_jet(field_jet(field, p, stencil_h, true));
    return sample;
}

// --- MTW sectional values ----------------------------------------------------

struct MtwOptions {
    bool project = false;  // project xibar onto the ghat-orthogonal complement
    double orth_tol = tol::orth;
    double stencil_h = 1e-2;
};

// Normalized ghat-pairing of (xi + 0) and (0 + xibar); lies in [-1, 1].
inline double orthogonality_defect(const CostGeometry& geo, const Vec& x, const Vec& xbar,
                                   const Vec& xi, const Vec& xibar) {
    Mat E = geo.cross_hessian(x, xbar);
    double c = geo.chi(x, xbar);
    double pairing = -c * xi.dot(E * xibar);
    double nx = std::sqrt(xi.dot(geo.model().h() * xi));
    double nxb = std::sqrt(xibar.dot(geo.hbar(x, xbar) * xibar));
    return pairing / (nx * nxb);
}

// Projects xibar onto the hyperplane ghat(xi + 0, .) = 0, orthogonally with
// respect to hbar.
inline Vec project_admissible(const CostGeometry& geo, const Vec& x, const Vec& xbar,
                              const Vec& xi, const Vec& xibar) {
    Mat E = geo.cross_hessian(x, xbar);
    Mat hb = geo.hbar(x, xbar);
    Vec z = E.transpose() * xi;
    Vec w = hb.ldlt().solve(z);
    double denom = z.dot(w);
    if (std::abs(denom) < 1e-300)
        throw FrameDegeneracy("cannot project onto the admissible cone");
    return xibar - (z.dot(xibar) / denom) * w;
}

// R(xi + 0, 0 + xibar, xi + 0, 0 + xibar) for a ghat-orthogonal pair.
inline double mtw_sectional(const CostGeometry& geo, const Vec& x, const Vec& xbar, Vec xi,
                            Vec xibar, const MtwOptions& opt = {}) {
    if (xi.norm() == 0.0 || xibar.norm() == 0.0)
        throw ConfigInvalid("mtw pair vectors must be nonzero");
    if (opt.project) xibar = project_admissible(geo, x, xbar, xi, xibar);
    double defect = orthogonality_defect(geo, x, xbar, xi, xibar);
    if (std::abs(defect) > opt.orth_tol)
        throw NotOrthogonal("pair is not ghat-orthogonal (enable projection or adjust)");
    int n = geo.n();
    Vec v = Vec::Zero(2 * n), w = Vec::Zero(2 * n);
    v.head(n) = xi;
    w.tail(n) = xibar;
    Vec p = concat(x, xbar);
    Tensor4 R = riemann_from_jet(geo.ghat_jet(p, true));
    return R.contract(v, w, v, w);
}

inline double mtw_sectional(const CostModel& model, const DensityPair& dens, const Vec& x,
                            const Vec& xbar, const Vec& xi, const Vec& xibar,
                            const MtwOptions& opt = {}) {
    return mtw_sectional(CostGeometry(model, dens), x, xbar, xi, xibar, opt);
}

// --- uniform MTW constant kappa ------------------------------------------------

struct KappaEstimate {
    double kappa = 0.0;      // grid minimum of the normalized value, floored at 0
    double min_value = 0.0;  // unfloored minimum
    bool mtw_violated = false;
    bool defined = true;  // false for n = 1: no admissible pairs exist
    Vec argmin_point;
    long pairs_evaluated = 0;
};

struct KappaOptions {
    int rotations = 8;
    std::uint64_t seed = 20240101ULL;
    double stencil_h = 1e-2;
};

namespace detail {

// Admissible unit pairs at one point: the n(n-1) pairs (v_i, u_j), i != j,
// where v is an h-orthonormal basis and u solves -chi E u_j = h v_j, which
// makes ghat(v_i + 0, 0 + u_j) = delta_ij and each u_j hbar-unit. Extra
// pseudo-random h-rotations of the basis contribute one pair each.
inline std::vector<std::pair<Vec, Vec>> admissible_pairs(const CostGeometry& geo, const Vec& x,
                                                         const Vec& xbar, int rotations,
                                                         std::uint64_t seed) {
    int n = geo.n();
    Mat E = geo.cross_hessian(x, xbar);
    double c = geo.chi(x, xbar);
    Mat V = geo.model().h_cholL().transpose().inverse();  // h-orthonormal columns
    Mat M = -(c * E);
    Eigen::FullPivLU<Mat> lu(M);
    if (!lu.isInvertible()) throw DegenerateCost("ghat pairing block is singular");

    std::vector<std::pair<Vec, Vec>> pairs;
    auto add_pairs_for_basis = [&](const Mat& basis, bool all) {
        Mat Hb = geo.model().h() * basis;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                pairs.emplace_back(basis.col(i), lu.solve(Hb.col(j)));
                if (!all) return;
            }
    };
    add_pairs_for_basis(V, true);

    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int r = 0; r < rotations; ++r) {
        Mat gauss(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) gauss(i, j) = normal(rng);
        Eigen::HouseholderQR<Mat> qr(gauss);
        Mat Q = qr.householderQ();
        add_pairs_for_basis((V * Q).eval(), false);
    }
    return pairs;
}

}  // namespace detail

// Grid minimum over region_x x region_xbar of
// mtw_sectional / (h(xi,xi) hbar(xibar,xibar)) over the deterministic pair
// family; floored at 0 with the violation flagged.
inline KappaEstimate estimate_kappa(const CostGeometry& geo, const Box& region_x,
                                    const Box& region_xbar, int grid_per_axis,
                                    const KappaOptions& opt = {}) {
    KappaEstimate est;
    int n = geo.n();
    if (n < 2) {
        est.defined = false;
        return est;
    }
    if (grid_per_axis < 2) throw ConfigInvalid("kappa scan needs at least 2 points per axis");

    double best = std::numeric_limits<double>::infinity();
    Vec best_point;

    std::vector<std::vector<double>> grids;
    auto axis_ticks = [&](double lo, double hi) {
        std::vector<double> t(grid_per_axis);
        for (int i = 0; i < grid_per_axis; ++i)
            t[i] = lo + (hi - lo) * i / (grid_per_axis - 1.0);
        return t;
    };
    for (int a = 0; a < n; ++a) grids.push_back(axis_ticks(region_x.lo[a], region_x.hi[a]));
    for (int a = 0; a < n; ++a)
        grids.push_back(axis_ticks(region_xbar.lo[a], region_xbar.hi[a]));

    Vec p(2 * n);
    std::uint64_t point_counter = 0;
    std::function<void(int)> scan = [&](int axis) {
        if (axis == 2 * n) {
            Vec x = p.head(n), xb = p.tail(n);
            Tensor4 R = riemann_from_jet(geo.ghat_jet(p, true));
            Mat hb = geo.hbar(x, xb);
            auto pairs = detail::admissible_pairs(geo, x, xb, opt.rotations,
                                                  mix_seed(opt.seed, point_counter));
            for (const auto& [xi, xibar] : pairs) {
                Vec v = Vec::Zero(2 * n), w = Vec::Zero(2 * n);
                v.head(n) = xi;
                w.tail(n) = xibar;
                double num = R.contract(v, w, v, w);
                double denom = xi.dot(geo.model().h() * xi) * xibar.dot(hb * xibar);
                double val = num / denom;
                ++est.pairs_evaluated;
                if (val < best) {
                    best = val;
                    best_point = p;
                }
            }
            ++point_counter;
            return;
        }
        for (double t : grids[axis]) {
            p[axis] = t;
            scan(axis + 1);
        }
    };
    scan(0);

    est.min_value = best;
    est.argmin_point = best_point;
    est.mtw_violated = !(best > 0.0);
    est.kappa = est.mtw_violated ? 0.0 : best;
    return est;
}

}  // namespace otgeo
