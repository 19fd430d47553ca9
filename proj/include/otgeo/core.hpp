#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace otgeo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error categories drive the CLI process exit codes.
enum class ErrorCategory { config = 2, solver = 3, geometry = 4, io = 5 };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory cat, std::string name, const std::string& msg)
        : std::runtime_error(name + ": " + msg), category_(cat), name_(std::move(name)) {}
    ErrorCategory category() const noexcept { return category_; }
    const std::string& name() const noexcept { return name_; }

private:
    ErrorCategory category_;
    std::string name_;
};

#define OTGEO_DEFINE_ERROR(NAME, CATEGORY)                            \
    class NAME : public Error {                                       \
    public:                                                           \
        explicit NAME(const std::string& msg)                         \
            : Error(ErrorCategory::CATEGORY, #NAME, msg) {}           \
    }

OTGEO_DEFINE_ERROR(ConfigInvalid, config);

OTGEO_DEFINE_ERROR(DomainError, geometry);
OTGEO_DEFINE_ERROR(DegenerateCost, geometry);
OTGEO_DEFINE_ERROR(StencilOutOfDomain, geometry);
OTGEO_DEFINE_ERROR(SingularMetric, geometry);
OTGEO_DEFINE_ERROR(NotOrthogonal, geometry);
OTGEO_DEFINE_ERROR(NotSpacelike, geometry);
OTGEO_DEFINE_ERROR(FrameDegeneracy, geometry);
OTGEO_DEFINE_ERROR(MeanCurvatureTooLarge, geometry);
OTGEO_DEFINE_ERROR(EmptySupport, geometry);
OTGEO_DEFINE_ERROR(SupportEscapesRegion, geometry);
OTGEO_DEFINE_ERROR(WrongCostKind, geometry);
OTGEO_DEFINE_ERROR(KappaNonpositive, geometry);
OTGEO_DEFINE_ERROR(NonpositiveDensity, geometry);

OTGEO_DEFINE_ERROR(InfeasibleMarginals, solver);
OTGEO_DEFINE_ERROR(SolverStall, solver);
OTGEO_DEFINE_ERROR(NoConvergence, solver);
OTGEO_DEFINE_ERROR(NumericalOverflow, solver);
OTGEO_DEFINE_ERROR(NonInjectiveMap, solver);

OTGEO_DEFINE_ERROR(IoError, io);

OTGEO_DEFINE_ERROR(StageFailure, solver);

#undef OTGEO_DEFINE_ERROR

// Default tolerances, matched to the stencil truncation orders used below.
namespace tol {
inline constexpr double a2 = 1e-10;            // |det d2c/dxdxbar| degeneracy cut
inline constexpr double orth = 1e-8;           // ghat-orthogonality of MTW pairs
inline constexpr double curv_sym_fd = 1e-6;    // Riemann symmetry residuals, fd mode
inline constexpr double curv_sym_analytic = 1e-9;
inline constexpr double frame = 1e-8;          // frame orthonormality residuals
inline constexpr double marginal_exact = 1e-9;
inline constexpr double marginal_sinkhorn = 1e-6;
inline constexpr double weight_sum = 1e-12;
}  // namespace tol

struct Box {
    Vec lo, hi;

    Box() = default;
    Box(Vec l, Vec h) : lo(std::move(l)), hi(std::move(h)) {
        if (lo.size() != hi.size()) throw ConfigInvalid("box lo/hi dimension mismatch");
        for (int i = 0; i < lo.size(); ++i)
            if (!(lo[i] < hi[i])) throw ConfigInvalid("box must have lo < hi on every axis");
    }

    int dim() const { return static_cast<int>(lo.size()); }

    double volume() const {
        double v = 1.0;
        for (int i = 0; i < dim(); ++i) v *= hi[i] - lo[i];
        return v;
    }

    bool contains(const Vec& p, double slack = 0.0) const {
        if (p.size() != lo.size()) return false;
        for (int i = 0; i < dim(); ++i)
            if (p[i] < lo[i] - slack || p[i] > hi[i] + slack) return false;
        return true;
    }

    Vec center() const { return 0.5 * (lo + hi); }

    // Product box on X x Xbar, coordinates ordered (x, xbar).
    static Box product(const Box& a, const Box& b) {
        Vec l(a.dim() + b.dim()), h(a.dim() + b.dim());
        l << a.lo, b.lo;
        h << a.hi, b.hi;
        return Box(std::move(l), std::move(h));
    }
};

// Multi-index over coordinates; order() is the total derivative order.
using MultiIndex = std::vector<int>;

inline int order(const MultiIndex& m) {
    int s = 0;
    for (int v : m) s += v;
    return s;
}

inline Vec concat(const Vec& a, const Vec& b) {
    Vec r(a.size() + b.size());
    r << a, b;
    return r;
}

inline Vec head(const Vec& p, int n) { return p.head(n); }
inline Vec tail(const Vec& p, int n) { return p.tail(n); }

// Deterministic RNG: one engine type everywhere, seeds mixed explicitly.
using Rng = std::mt19937_64;

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace otgeo
