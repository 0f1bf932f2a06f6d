#include "magspec/geometry.hpp"

#include "magspec/errors.hpp"

#include <algorithm>
#include <complex>

namespace magspec {

namespace {

constexpr double kFdStep = 1e-6;

Point4 shifted(const Point4 &p, int axis, double d) {
    Vec4 v = p.vec();
    v[axis] += d;
    return Point4::from(v);
}

void check_mu_h(double mu, double h) {
    if (!(mu > 1.0) || !std::isfinite(mu))
        throw ConfigError("mu", "coupling must be finite and > 1");
    if (!(h > 0.0 && h < 1.0))
        throw ConfigError("h", "Planck parameter must lie in (0, 1)");
    if (mu * h > kMuHMax)
        throw ConfigError("mu", "mu*h exceeds the configured bound " + std::to_string(kMuHMax));
}

std::array<Mat4, 4> zero_metric_derivative(const Point4 &) {
    std::array<Mat4, 4> d;
    d.fill(Mat4::Zero());
    return d;
}

void fix_phase(CVec4 &u) {
    Eigen::Index j = 0;
    u.cwiseAbs().maxCoeff(&j);
    const double m = std::abs(u[j]);
    if (m > 0)
        u *= std::conj(u[j]) / m;
    u[j] = std::complex<double>(u[j].real(), 0.0);
}

} // namespace

Vec4 FieldModel::grad_scalar(const Point4 &p) const {
    if (scalar_gradient)
        return scalar_gradient(p);
    Vec4 g;
    for (int a = 0; a < 4; ++a)
        g[a] = (scalar(shifted(p, a, kFdStep)) - scalar(shifted(p, a, -kFdStep))) / (2 * kFdStep);
    return g;
}

std::array<Mat4, 4> FieldModel::grad_metric(const Point4 &p) const {
    if (metric_derivative)
        return metric_derivative(p);
    std::array<Mat4, 4> d;
    for (int a = 0; a < 4; ++a)
        d[a] = (metric(shifted(p, a, kFdStep)) - metric(shifted(p, a, -kFdStep))) / (2 * kFdStep);
    return d;
}

Mat4 two_form(const Point4 &p) {
    const double s = 2.0 * (p.x1 - 0.5 * (p.x3 * p.x3 + p.x4 * p.x4));
    Mat4 f;
    // clang-format off
    f <<  0.0,   1.0,  -p.x4,  p.x3,
         -1.0,   0.0,   p.x3,  p.x4,
          p.x4, -p.x3,  0.0,   s,
         -p.x3, -p.x4, -s,     0.0;
    // clang-format on
    return f;
}

Vec4 vector_potential(const Point4 &p) {
    // (x1 - r^2/2) dx2 + (x1 - r^2/4) r^2 dtheta,  r^2 dtheta = x3 dx4 - x4 dx3
    const double r2 = p.x3 * p.x3 + p.x4 * p.x4;
    const double q = p.x1 - 0.25 * r2;
    return {0.0, p.x1 - 0.5 * r2, -q * p.x4, q * p.x3};
}

Mat4 vector_potential_jacobian(const Point4 &p) {
    const double r2 = p.x3 * p.x3 + p.x4 * p.x4;
    const double q = p.x1 - 0.25 * r2;
    Mat4 j = Mat4::Zero(); // j(l, k) = d_l V_k
    j(0, 1) = 1.0;
    j(2, 1) = -p.x3;
    j(3, 1) = -p.x4;
    j(0, 2) = -p.x4;
    j(2, 2) = 0.5 * p.x3 * p.x4;
    j(3, 2) = -q + 0.5 * p.x4 * p.x4;
    j(0, 3) = p.x3;
    j(2, 3) = q - 0.5 * p.x3 * p.x3;
    j(3, 3) = -0.5 * p.x3 * p.x4;
    return j;
}

double pfaffian(const Mat4 &f) { return f(0, 1) * f(2, 3) - f(0, 2) * f(1, 3) + f(0, 3) * f(1, 2); }

FieldModel martinet_model(double mu, double h, std::function<double(const Point4 &)> scalar,
                          std::function<Vec4(const Point4 &)> scalar_gradient) {
    check_mu_h(mu, h);
    FieldModel m;
    m.mu = mu;
    m.h = h;
    m.metric = [](const Point4 &) { return Mat4::Identity().eval(); };
    m.metric_derivative = zero_metric_derivative;
    m.potential = vector_potential;
    m.potential_jacobian = vector_potential_jacobian;
    if (scalar) {
        m.scalar = std::move(scalar);
        m.scalar_gradient = std::move(scalar_gradient);
    } else {
        m.scalar = [](const Point4 &) { return 1.0; };
        m.scalar_gradient = [](const Point4 &) { return Vec4::Zero().eval(); };
    }
    return m;
}

FieldModel separable_model(double mu, double h, double k) {
    check_mu_h(mu, h);
    if (!(std::abs(k) <= 1.0))
        throw ConfigError("k", "tilt must satisfy |k| <= 1");
    FieldModel m;
    m.mu = mu;
    m.h = h;
    m.metric = [](const Point4 &) { return Mat4::Identity().eval(); };
    m.metric_derivative = zero_metric_derivative;
    m.potential = [](const Point4 &p) { return Vec4(0.0, 0.5 * p.x1 * p.x1, 0.0, p.x3); };
    m.potential_jacobian = [](const Point4 &p) {
        Mat4 j = Mat4::Zero();
        j(0, 1) = p.x1;
        j(2, 3) = 1.0;
        return j;
    };
    m.scalar = [k](const Point4 &p) { return 1.0 + k * p.x1; };
    m.scalar_gradient = [k](const Point4 &) { return Vec4(k, 0, 0, 0); };
    return m;
}

FieldModel constant_field_model(double mu, double h, double f1, double f2, double v0, Vec4 grad) {
    check_mu_h(mu, h);
    FieldModel m;
    m.mu = mu;
    m.h = h;
    m.metric = [](const Point4 &) { return Mat4::Identity().eval(); };
    m.metric_derivative = zero_metric_derivative;
    m.potential = [f1, f2](const Point4 &p) { return Vec4(0.0, f1 * p.x1, 0.0, f2 * p.x3); };
    m.potential_jacobian = [f1, f2](const Point4 &) {
        Mat4 j = Mat4::Zero();
        j(0, 1) = f1;
        j(2, 3) = f2;
        return j;
    };
    m.scalar = [v0, grad](const Point4 &p) { return v0 + grad.dot(p.vec()); };
    m.scalar_gradient = [grad](const Point4 &) { return grad; };
    return m;
}

FieldInvariants field_invariants(const Point4 &p, const FieldModel &model) {
    return field_invariants(model.metric(p), model.form(p));
}

FieldInvariants field_invariants(const Mat4 &metric, const Mat4 &form) {
    FieldInvariants out;
    out.two_form = form;

    // A = S F S with S = (g^{jk})^{1/2} is antisymmetric and similar to g^{jl}F_{lk}.
    const bool euclidean = metric.isIdentity(0.0);
    Mat4 s = Mat4::Identity();
    if (!euclidean) {
        Eigen::SelfAdjointEigenSolver<Mat4> es(metric);
        s = es.operatorSqrt();
    }
    const Mat4 a = euclidean ? form : Mat4(s * form * s);

    const double pf = std::abs(pfaffian(a));
    double sumsq = 0.0;
    for (int j = 0; j < 4; ++j)
        for (int k = j + 1; k < 4; ++k)
            sumsq += a(j, k) * a(j, k);
    const double disc = std::sqrt(std::max(0.0, sumsq * sumsq - 4.0 * pf * pf));
    const double f2sq = 0.5 * (sumsq + disc);
    out.f2 = std::sqrt(f2sq);
    out.f1 = out.f2 > 0 ? std::min(out.f2, pf / out.f2) : 0.0;

    out.near_degenerate = (out.f2 - out.f1) < kFrameGap;

    // -A^2 = A^T A has eigenvalues f1^2 (twice) and f2^2 (twice).
    Eigen::SelfAdjointEigenSolver<Mat4> es(a.transpose() * a);
    const Mat4 &ev = es.eigenvectors();

    auto frame_from = [&](const Vec4 &e, const Vec4 &fallback, double f) {
        Vec4 e2 = a * e;
        const double n = e2.norm();
        if (f > 0 && n > 1e-300) {
            e2 /= n;
        } else {
            e2 = fallback - fallback.dot(e) * e;
            e2.normalize();
        }
        CVec4 u = e.cast<std::complex<double>>() - std::complex<double>(0, 1) * e2.cast<std::complex<double>>();
        fix_phase(u);
        return CVec4(s.cast<std::complex<double>>() * u);
    };
    out.frame2 = frame_from(ev.col(3), ev.col(2), out.f2);
    out.frame1 = frame_from(ev.col(0), ev.col(1), out.f1);
    return out;
}

double frame_residual(const FieldInvariants &inv, const Mat4 &metric) {
    const Eigen::Matrix4cd m = (metric * inv.two_form).cast<std::complex<double>>();
    const std::complex<double> i(0, 1);
    const double r1 = (m * inv.frame1 - i * inv.f1 * inv.frame1).norm();
    const double r2 = (m * inv.frame2 - i * inv.f2 * inv.frame2).norm();
    return std::max(r1, r2);
}

std::string_view to_string(ZoneLabel z) {
    switch (z) {
    case ZoneLabel::OuterStrictI:
        return "OuterStrictI";
    case ZoneLabel::OuterStrictII:
        return "OuterStrictII";
    case ZoneLabel::OuterNear:
        return "OuterNear";
    case ZoneLabel::InnerBulk:
        return "InnerBulk";
    case ZoneLabel::InnerTrue:
        return "InnerTrue";
    case ZoneLabel::InnerCore:
        return "InnerCore";
    case ZoneLabel::OffZone:
        return "OffZone";
    }
    return "OffZone";
}

ZoneReport classify_zone(const Point4 &p, double rho, const FieldModel &model, const ZoneConstants &k) {
    ZoneReport out;
    out.gamma = p.gamma();
    out.r = p.r();
    const double g = out.gamma;
    const double r = out.r;
    const double mu = model.mu;

    if (p.norm() > 1.0) {
        out.label = ZoneLabel::OffZone;
        return out;
    }
    if (r <= k.C * std::pow(mu, -1.0 / 3.0) && g <= k.C * std::pow(mu, -2.0 / 3.0)) {
        out.label = ZoneLabel::InnerCore;
        return out;
    }
    if (g <= k.c * std::pow(mu, -0.5) * std::sqrt(r)) {
        out.label = (rho * r >= k.eps * mu * g * g) ? ZoneLabel::InnerTrue : ZoneLabel::InnerBulk;
        return out;
    }
    if (g <= std::pow(mu, -0.5) * std::pow(model.h, -k.delta)) {
        out.label = ZoneLabel::OuterNear;
        return out;
    }
    if (g >= k.C * std::pow(mu, -0.5) * std::sqrt(r) && g <= k.eps * r * r) {
        out.label = ZoneLabel::OuterStrictI;
        return out;
    }
    if (g >= k.C * std::max(r * r, std::pow(mu, -2.0 / 3.0))) {
        out.label = ZoneLabel::OuterStrictII;
        return out;
    }
    out.label = ZoneLabel::OffZone;
    return out;
}

Point4 magnetic_line(const Point4 &p0, double s) {
    if (!(std::abs(p0.x1) <= 1e-9))
        throw ConfigError("p0", "start point must lie on Sigma (|x1| <= 1e-9)");
    const double r = p0.r();
    if (r < 1e-9)
        throw OnLambda("magnetic line through a point of Lambda degenerates to a point");
    if (s == 0.0)
        return p0;
    const double th = p0.theta() + s;
    // Ker F on Sigma is spanned by d/dtheta - r^2 d/dx2.
    return {p0.x1, p0.x2 - r * r * s, r * std::cos(th), r * std::sin(th)};
}

} // namespace magspec
