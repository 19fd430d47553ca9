#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "otgeo/core.hpp"
#include "otgeo/curvature.hpp"
#include "otgeo/graph_geometry.hpp"

namespace otgeo {

class Tensor3 {
public:
    Tensor3() = default;
    explicit Tensor3(int dim) : dim_(dim), data_(static_cast<std::size_t>(dim) * dim * dim, 0.0) {}

    int dim() const { return dim_; }
    double& operator()(int a, int b, int c) {
        return data_[(static_cast<std::size_t>(a) * dim_ + b) * dim_ + c];
    }
    double operator()(int a, int b, int c) const {
        return data_[(static_cast<std::size_t>(a) * dim_ + b) * dim_ + c];
    }

private:
    int dim_ = 0;
    std::vector<double> data_;
};

// Covariant first derivative (D S)_{a; cd} from partials and Christoffels.
inline Tensor3 covariant_d1(const Mat& S, const std::vector<Mat>& dS,
                            const std::vector<Mat>& gamma) {
    int d = static_cast<int>(S.rows());
    Tensor3 out(d);
    for (int a = 0; a < d; ++a)
        for (int c = 0; c < d; ++c)
            for (int e = 0; e < d; ++e) {
                double v = dS[a](c, e);
                for (int s = 0; s < d; ++s)
                    v -= gamma[s](a, c) * S(s, e) + gamma[s](a, e) * S(c, s);
                out(a, c, e) = v;
            }
    return out;
}

// Covariant second derivative (D^2 S)_{ab; cd}.
inline Tensor4 covariant_d2(const Mat& S, const std::vector<Mat>& dS,
                            const std::vector<std::vector<Mat>>& d2S,
                            const ConnectionJet& conn) {
    int d = static_cast<int>(S.rows());
    const auto& gamma = conn.ch.gamma;
    Tensor3 DS = covariant_d1(S, dS, gamma);
    Tensor4 out(d);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            for (int c = 0; c < d; ++c)
                for (int e = 0; e < d; ++e) {
                    // d_a (DS)_{b; ce}
                    double v = d2S[a][b](c, e);
                    for (int s = 0; s < d; ++s) {
                        v -= conn.dgamma[a][s](b, c) * S(s, e) + gamma[s](b, c) * dS[a](s, e);
                        v -= conn.dgamma[a][s](b, e) * S(c, s) + gamma[s](b, e) * dS[a](c, s);
                    }
                    // connection corrections on the three slots of DS
                    for (int s = 0; s < d; ++s) {
                        v -= gamma[s](a, b) * DS(s, c, e);
                        v -= gamma[s](a, c) * DS(b, s, e);
                        v -= gamma[s](a, e) * DS(b, c, s);
                    }
                    out(a, b, c, e) = v;
                }
    return out;
}

// Inputs shared by the eight right-hand-side term groups, all expressed in
// the ambient chart at the point.
struct IdentityTermInputs {
    int n = 0;                               // tangent dimension
    Mat e;                                   // 2n x n ghat-orthonormal tangent frame
    Mat e_perp;                              // 2n x n hyperbolic normal frame
    std::vector<std::vector<Vec>> II;        // ambient II(e_k, e_l)
    Mat ghat;
    Mat sigma;                               // ghat^{-1} in the chart frame
    Tensor4 rhat;                            // lowered curvature tensor
    Mat shat;
    Tensor3 dS_cov;                          // (D Shat)_{a; cd}
    Tensor4 d2S_cov;                         // (D^2 Shat)_{ab; cd}
    Vec X, Y;                                // ambient tangent vectors at the point

    // frame coefficients of a tangent vector: v = sum_k ghat(v, e_k) e_k
    Vec frame_coeffs(const Vec& v) const {
        Vec c(n);
        for (int k = 0; k < n; ++k) c[k] = e.col(k).dot(ghat * v);
        return c;
    }

    Vec II_with(const Vec& coeffs, int l) const {
        Vec v = Vec::Zero(e.rows());
        for (int a = 0; a < n; ++a) v += coeffs[a] * II[l][a];
        return v;
    }

    double S_of(const Vec& a, const Vec& b) const { return a.dot(shat * b); }

    double dS_of(const Vec& dir, const Vec& a, const Vec& b) const {
        double total = 0.0;
        int d = static_cast<int>(ghat.rows());
        for (int al = 0; al < d; ++al) {
            if (dir[al] == 0.0) continue;
            for (int c = 0; c < d; ++c)
                for (int e2 = 0; e2 < d; ++e2) total += dir[al] * dS_cov(al, c, e2) * a[c] * b[e2];
        }
        return total;
    }
};

// G1 = sum_l (D^2 Shat)(e_l, e_l; X, Y)
inline double identity_term_ambient_hessian(const IdentityTermInputs& in) {
    double total = 0.0;
    for (int l = 0; l < in.n; ++l)
        total += in.d2S_cov.contract(in.e.col(l), in.e.col(l), in.X, in.Y);
    return total;
}

// G2 = 2 sum_l (D_{e_l} Shat)(II(e_l, X), Y)
inline double identity_term_dS_II_left(const IdentityTermInputs& in) {
    Vec cx = in.frame_coeffs(in.X);
    double total = 0.0;
    for (int l = 0; l < in.n; ++l) total += in.dS_of(in.e.col(l), in.II_with(cx, l), in.Y);
    return 2.0 * total;
}

// G3 = 2 sum_l (D_{e_l} Shat)(X, II(e_l, Y))
inline double identity_term_dS_II_right(const IdentityTermInputs& in) {
    Vec cy = in.frame_coeffs(in.Y);
    double total = 0.0;
    for (int l = 0; l < in.n; ++l) total += in.dS_of(in.e.col(l), in.X, in.II_with(cy, l));
    return 2.0 * total;
}

// G4 = 2 sum_l Shat(II(e_l, X), II(e_l, Y))
inline double identity_term_S_II_II(const IdentityTermInputs& in) {
    Vec cx = in.frame_coeffs(in.X), cy = in.frame_coeffs(in.Y);
    double total = 0.0;
    for (int l = 0; l < in.n; ++l) total += in.S_of(in.II_with(cx, l), in.II_with(cy, l));
    return 2.0 * total;
}

// G5 = - sum_{k,l} ghat(II(e_l, X), II(e_l, e_k)) S(e_k, Y)
inline double identity_term_g_II_II_left(const IdentityTermInputs& in) {
    Vec cx = in.frame_coeffs(in.X);
    double total = 0.0;
    for (int l = 0; l < in.n; ++l) {
        Vec iix = in.II_with(cx, l);
        for (int k = 0; k < in.n; ++k)
            total -= iix.dot(in.ghat * in.II[l][k]) * in.S_of(in.e.col(k), in.Y);
    }
    return total;
}

// G6 = - sum_{k,l} ghat(II(e_l, Y), II(e_l, e_k)) S(X, e_k)
inline double identity_term_g_II_II_right(const IdentityTermInputs& in) {
    Vec cy = in.frame_coeffs(in.Y);
    double total = 0.0;
    for (int l = 0; l < in.n; ++l) {
        Vec iiy = in.II_with(cy, l);
        for (int k = 0; k < in.n; ++k)
            total -= iiy.dot(in.ghat * in.II[l][k]) * in.S_of(in.X, in.e.col(k));
    }
    return total;
}

// G7 = - sum_{a,b} sigma^{ab} sum_l [ R(e_l, X, e_l, E_a) S(E_b, Y)
//                                   + R(e_l, Y, e_l, E_a) S(X, E_b) ]
inline double identity_term_sigma_curvature(const IdentityTermInputs& in) {
    int d = static_cast<int>(in.ghat.rows());
    double total = 0.0;
    for (int l = 0; l < in.n; ++l) {
        // r_x[a] = R(e_l, X, e_l, d_a), r_y[a] = R(e_l, Y, e_l, d_a)
        Vec rx = Vec::Zero(d), ry = Vec::Zero(d);
        for (int a = 0; a < d; ++a) {
            Vec unit = Vec::Zero(d);
            unit[a] = 1.0;
            rx[a] = in.rhat.contract(in.e.col(l), in.X, in.e.col(l), unit);
            ry[a] = in.rhat.contract(in.e.col(l), in.Y, in.e.col(l), unit);
        }
        Vec sy = in.shat * in.Y, sx = in.shat * in.X;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                total -= in.sigma(a, b) * (rx[a] * sy[b] + ry[a] * sx[b]);
    }
    return total;
}

// G8 = sum_{k,l} [ R(e_l, X, e_l, e_k) S(e_k, Y) + R(e_l, Y, e_l, e_k) S(X, e_k) ]
inline double identity_term_tangential_curvature(const IdentityTermInputs& in) {
    double total = 0.0;
    for (int l = 0; l < in.n; ++l)
        for (int k = 0; k < in.n; ++k) {
            total += in.rhat.contract(in.e.col(l), in.X, in.e.col(l), in.e.col(k)) *
                     in.S_of(in.e.col(k), in.Y);
            total += in.rhat.contract(in.e.col(l), in.Y, in.e.col(l), in.e.col(k)) *
                     in.S_of(in.X, in.e.col(k));
        }
    return total;
}

inline std::array<double, 8> identity_rhs_terms(const IdentityTermInputs& in) {
    return {identity_term_ambient_hessian(in),
            identity_term_dS_II_left(in),
            identity_term_dS_II_right(in),
            identity_term_S_II_II(in),
            identity_term_g_II_II_left(in),
            identity_term_g_II_II_right(in),
            identity_term_sigma_curvature(in),
            identity_term_tangential_curvature(in)};
}

struct IdentityReport {
    Vec point;
    double lhs = 0.0;
    std::array<double, 8> rhs_terms{};
    double rhs_total = 0.0;
    double residual = 0.0;
    double grid_step = 0.0;
    double mean_curvature = 0.0;
};

struct IdentityOptions {
    double stencil_h = 1e-2;            // ambient stencil for fields without closed forms
    double mean_curvature_factor = 10;  // applicability threshold: |H| < factor * grid step
};

namespace detail {

// Restriction samples of a field to the graph in the x-chart: lambda is
// called with the grid node's flat index; offsets are per-axis.
template <typename F>
Mat grid_sample(const GraphChart& chart, int flat, const std::vector<int>& offset, F&& fn) {
    std::vector<int> idx = chart.source.multi_index(flat);
    for (std::size_t a = 0; a < offset.size(); ++a) idx[a] += offset[a];
    return fn(chart.source.flat_index(idx));
}

}  // namespace detail

// Evaluates both sides of the elliptic identity for the restriction of
// S_field to Graph(F) at an interior node, with tangential directions X and
// Y given in the frame at that node (defaults: X = Y = e_n).
inline IdentityReport elliptic_identity_residual(const GraphChart& chart, const CostGeometry& geo,
                                                 const MetricField& S_field, int flat,
                                                 const Vec* X_dir = nullptr,
                                                 const Vec* Y_dir = nullptr,
                                                 const IdentityOptions& opt = {}) {
    int d = chart.n();
    if (!chart.interior(flat, 2))
        throw StencilOutOfDomain("identity stencil needs margin 2 on the source grid");

    GraphFrame frame = induced_frame(chart, geo, flat);
    SecondFundamentalForm II = second_fundamental_form(chart, geo, frame);
    Vec H = Vec::Zero(2 * d);
    for (int l = 0; l < d; ++l) H += II.ambient[l][l];
    Mat shat_p = geo.shat(frame.point);
    double mean_curv = std::sqrt(std::max(0.0, H.dot(shat_p * H)));
    double step = chart.max_spacing();
    if (mean_curv > opt.mean_curvature_factor * step)
        throw MeanCurvatureTooLarge("mean curvature exceeds the applicability threshold");

    Vec X = X_dir ? *X_dir : Vec(frame.e.col(d - 1));
    Vec Y = Y_dir ? *Y_dir : Vec(frame.e.col(d - 1));

    // ambient data at the lifted point
    MetricJet gjet = geo.ghat_jet(frame.point, true);
    ConnectionJet conn = connection_jet(gjet);
    MetricJet sjet = field_jet(S_field, frame.point, opt.stencil_h, true);

    IdentityTermInputs in;
    in.n = d;
    in.e = frame.e;
    in.e_perp = frame.e_perp;
    in.II = II.ambient;
    in.ghat = gjet.value;
    in.sigma = detail::invert_metric(gjet.value);
    in.rhat = riemann_from_connection(conn);
    in.shat = sjet.value;
    in.dS_cov = covariant_d1(sjet.value, sjet.d1, conn.ch.gamma);
    in.d2S_cov = covariant_d2(sjet.value, sjet.d1, sjet.d2, conn);
    in.X = X;
    in.Y = Y;

    // --- intrinsic side: Laplace-Beltrami of the restricted tensor in the
    // x-chart of the graph, from grid samples only -------------------------

    auto restricted = [&](int node) {
        Mat T = chart.tangent_basis(node);
        return (T.transpose() * S_field.eval(chart.lift(node)) * T).eval();
    };
    auto induced = [&](int node) {
        Mat T = chart.tangent_basis(node);
        return (T.transpose() * geo.ghat(chart.lift(node)) * T).eval();
    };

    auto sample_S = [&](const std::vector<int>& off) {
        return detail::grid_sample(chart, flat, off, restricted);
    };
    auto sample_g = [&](const std::vector<int>& off) {
        return detail::grid_sample(chart, flat, off, induced);
    };

    const Vec& spacing = chart.source.spacing;
    auto d1_of = [&](auto&& sample, int a) {
        std::vector<int> up(d, 0), dn(d, 0);
        up[a] = 1;
        dn[a] = -1;
        return ((sample(up) - sample(dn)) / (2.0 * spacing[a])).eval();
    };
    auto d2_of = [&](auto&& sample, int a, int b) {
        if (a == b) {
            std::vector<int> up(d, 0), dn(d, 0), zero(d, 0);
            up[a] = 1;
            dn[a] = -1;
            return ((sample(up) - 2.0 * sample(zero) + sample(dn)) /
                    (spacing[a] * spacing[a]))
                .eval();
        }
        std::vector<int> pp(d, 0), pm(d, 0), mp(d, 0), mm(d, 0);
        pp[a] = 1; pp[b] = 1;
        pm[a] = 1; pm[b] = -1;
        mp[a] = -1; mp[b] = 1;
        mm[a] = -1; mm[b] = -1;
        return ((sample(pp) - sample(pm) - sample(mp) + sample(mm)) /
                (4.0 * spacing[a] * spacing[b]))
            .eval();
    };

    Mat S0 = sample_S(std::vector<int>(d, 0));
    Mat g0 = sample_g(std::vector<int>(d, 0));
    MetricJet intrinsic;
    intrinsic.value = g0;
    intrinsic.d1.resize(d);
    intrinsic.d2.assign(d, std::vector<Mat>(d));
    std::vector<Mat> dS(d);
    std::vector<std::vector<Mat>> d2S(d, std::vector<Mat>(d));
    for (int a = 0; a < d; ++a) {
        intrinsic.d1[a] = d1_of(sample_g, a);
        dS[a] = d1_of(sample_S, a);
        for (int b = a; b < d; ++b) {
            intrinsic.d2[a][b] = d2_of(sample_g, a, b);
            d2S[a][b] = d2_of(sample_S, a, b);
            if (a != b) {
                intrinsic.d2[b][a] = intrinsic.d2[a][b];
                d2S[b][a] = d2S[a][b];
            }
        }
    }
    ConnectionJet intrinsic_conn = connection_jet(intrinsic);
    Tensor4 D2S = covariant_d2(S0, dS, d2S, intrinsic_conn);

    Mat g_inv = intrinsic_conn.ch.g_inv;
    // X, Y in chart coordinates: the x-components, since T_a = (d_a, J d_a)
    Vec Xc = X.head(d), Yc = Y.head(d);
    double lhs = 0.0;
    for (int c = 0; c < d; ++c)
        for (int e2 = 0; e2 < d; ++e2) {
            if (g_inv(c, e2) == 0.0) continue;
            double block = 0.0;
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) block += D2S(c, e2, a, b) * Xc[a] * Yc[b];
            lhs += g_inv(c, e2) * block;
        }

    IdentityReport report;
    report.point = frame.point;
    report.lhs = lhs;
    report.rhs_terms = identity_rhs_terms(in);
    report.rhs_total = 0.0;
    for (double t : report.rhs_terms) report.rhs_total += t;
    report.residual = std::abs(report.lhs - report.rhs_total);
    report.grid_step = step;
    report.mean_curvature = mean_curv;
    return report;
}

}  // namespace otgeo
