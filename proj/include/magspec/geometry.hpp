#pragma once

// Martinet-Roussarie magnetic geometry in the circular-symmetric gauge:
// the 2-form, a vector potential for it, eigen-intensities f1 <= f2 of
// g^{jl}F_{lk} with their complex eigenframes, and the zone partition used
// to organise the remainder analysis.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string_view>

namespace magspec {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using CVec4 = Eigen::Vector4cd;

struct Point4 {
    double x1 = 0, x2 = 0, x3 = 0, x4 = 0;

    Vec4 vec() const { return {x1, x2, x3, x4}; }
    static Point4 from(const Vec4 &v) { return {v[0], v[1], v[2], v[3]}; }

    // distance to Lambda = {x1 = x3 = x4 = 0} in model coordinates
    double r() const { return std::hypot(x3, x4); }
    double theta() const { return std::atan2(x4, x3); }
    // distance to Sigma = {x1 = 0}
    double gamma() const { return std::abs(x1); }
    double norm() const { return vec().norm(); }
};

// Symbols of a magnetic Schroedinger operator in the convention with the
// global 1/2: A = 1/2 (sum P_j g^{jk} P_k - V), P_j = hD_j - mu V_j.
//
// `potential_jacobian(p)(l, k)` is d_l V_k. When `metric_derivative` or
// `scalar_gradient` are empty, callers fall back to central differences.
struct FieldModel {
    std::function<Mat4(const Point4 &)> metric;
    std::function<Vec4(const Point4 &)> potential;
    std::function<Mat4(const Point4 &)> potential_jacobian;
    std::function<double(const Point4 &)> scalar;
    std::function<Vec4(const Point4 &)> scalar_gradient;
    std::function<std::array<Mat4, 4>(const Point4 &)> metric_derivative;
    double mu = 1.0;
    double h = 0.1;

    // F_{jk} = d_j V_k - d_k V_j
    Mat4 form(const Point4 &p) const {
        const Mat4 j = potential_jacobian(p);
        return j - j.transpose();
    }
    Vec4 grad_scalar(const Point4 &p) const;
    std::array<Mat4, 4> grad_metric(const Point4 &p) const;
    bool circular_symmetric = false;
};

// Upper bound on mu*h accepted by the model factories.
inline constexpr double kMuHMax = 1.0;

// Martinet-Roussarie field with Euclidean metric and scalar potential `scalar`
// (constant 1 by default). Throws ConfigError on mu <= 1, h outside (0,1), or
// mu*h above kMuHMax.
FieldModel martinet_model(double mu, double h, std::function<double(const Point4 &)> scalar = {},
                          std::function<Vec4(const Point4 &)> scalar_gradient = {});

// Separable product A_I + A_II: V_2 = x1^2/2, V_4 = x3, V = 1 + k x1.
// Then f1 = |x1| and f2 = 1.
FieldModel separable_model(double mu, double h, double k = 0.0);

// Constant field F_12 = f1, F_34 = f2 with scalar potential V(x) = v0 + grad.x.
FieldModel constant_field_model(double mu, double h, double f1, double f2, double v0 = 1.0, Vec4 grad = Vec4::Zero());

Mat4 two_form(const Point4 &p);
Vec4 vector_potential(const Point4 &p);
// d_l V_k of vector_potential
Mat4 vector_potential_jacobian(const Point4 &p);

// Pfaffian F12 F34 - F13 F24 + F14 F23 of an antisymmetric 4x4 matrix.
double pfaffian(const Mat4 &f);

struct FieldInvariants {
    double f1 = 0, f2 = 0;
    CVec4 frame1 = CVec4::Zero();
    CVec4 frame2 = CVec4::Zero();
    Mat4 two_form = Mat4::Zero();
    // f2 - f1 below kFrameGap: the frames are not meaningful
    bool near_degenerate = false;
};

inline constexpr double kFrameGap = 1e-12;

// Eigen-intensities and frames of (g^{jl} F_{lk}) with
// g^{jl}F_{lk} k_a^k = i f_a k_a^j,  g(k_a, k_b) = 0,  g(k_a, conj k_b) = 2 delta_ab.
// The phase of each frame makes its largest-modulus component real positive.
FieldInvariants field_invariants(const Point4 &p, const FieldModel &model);

// Same decomposition for an explicit metric g^{jk} and form F_{jk}.
FieldInvariants field_invariants(const Mat4 &metric, const Mat4 &form);

// max over the two frames of |M k - i f k| with M = g^{jl}F_{lk}.
double frame_residual(const FieldInvariants &inv, const Mat4 &metric);

enum class ZoneLabel { OuterStrictI, OuterStrictII, OuterNear, InnerBulk, InnerTrue, InnerCore, OffZone };

std::string_view to_string(ZoneLabel z);

struct ZoneConstants {
    double C = 2.0;
    double c = 1.0;
    double eps = 0.05;
    double delta = 0.01;
};

struct ZoneReport {
    ZoneLabel label = ZoneLabel::OffZone;
    double gamma = 0; // dist(x, Sigma) = |x1|
    double r = 0;     // dist(x, Lambda)
};

// Classification in priority order InnerCore, InnerTrue, InnerBulk, OuterNear,
// OuterStrictI, OuterStrictII, OffZone. `rho` is the momentum scale |Z_1|.
ZoneReport classify_zone(const Point4 &p, double rho, const FieldModel &model, const ZoneConstants &k = {});

// Point at angle increment `s` along the magnetic line (Ker F restricted to
// Sigma) through p0. Throws OnLambda when r(p0) < 1e-9 and ConfigError when
// p0 is not on Sigma.
Point4 magnetic_line(const Point4 &p0, double s);

} // namespace magspec
