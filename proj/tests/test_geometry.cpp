#include "doctest.h"

#include "magspec/errors.hpp"
#include "magspec/geometry.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <random>

using namespace magspec;

namespace {

Point4 pt(double a, double b, double c, double d) {
    Point4 p;
    p.x1 = a;
    p.x2 = b;
    p.x3 = c;
    p.x4 = d;
    return p;
}

Point4 random_point(std::mt19937_64 &rng, double radius = 0.5) {
    std::uniform_real_distribution<double> u(-radius, radius);
    return pt(u(rng), u(rng), u(rng), u(rng));
}

Point4 shifted(Point4 p, int axis, double d) {
    double *c[4] = {&p.x1, &p.x2, &p.x3, &p.x4};
    *c[axis] += d;
    return p;
}

} // namespace

TEST_CASE("two_form at the origin has only the 12 entry") {
    const Mat4 F = two_form(pt(0, 0, 0, 0));
    for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k) {
            const double expect = (j == 0 && k == 1) ? 1.0 : (j == 1 && k == 0) ? -1.0 : 0.0;
            CHECK(F(j, k) == expect);
        }
}

TEST_CASE("two_form is block diagonal off the x3-x4 plane") {
    const Mat4 F = two_form(pt(0.1, 0, 0, 0));
    CHECK(F(0, 1) == doctest::Approx(1.0));
    CHECK(F(2, 3) == doctest::Approx(0.2));
    CHECK(F(0, 2) == 0.0);
    CHECK(F(0, 3) == 0.0);
    CHECK(F(1, 2) == 0.0);
    CHECK(F(1, 3) == 0.0);
}

TEST_CASE("Pfaffian vanishes at (0,0,0.3,0.4)") {
    CHECK(std::abs(pfaffian(two_form(pt(0, 0, 0.3, 0.4)))) < 1e-15);
}

TEST_CASE("two_form is exactly antisymmetric") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
        const Mat4 F = two_form(random_point(rng, 1.0));
        CHECK((F + F.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("vector potential values") {
    CHECK(vector_potential(pt(0, 0, 0, 0)).cwiseAbs().maxCoeff() == 0.0);
    const Vec4 v = vector_potential(pt(0.37, 0, 0, 0));
    CHECK(v(0) == 0.0);
    CHECK(v(1) == doctest::Approx(0.37));
    CHECK(v(2) == 0.0);
    CHECK(v(3) == 0.0);
}

TEST_CASE("curl of the vector potential reproduces two_form") {
    std::mt19937_64 rng(2);
    const double step = 1e-4;
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        const Point4 p = random_point(rng, 0.6);
        Mat4 J;
        for (int l = 0; l < 4; ++l) {
            const Vec4 d = (vector_potential(shifted(p, l, step)) - vector_potential(shifted(p, l, -step))) / (2 * step);
            J.row(l) = d.transpose();
        }
        worst = std::max(worst, ((J - J.transpose()) - two_form(p)).cwiseAbs().maxCoeff());
        CHECK((vector_potential_jacobian(p) - J).cwiseAbs().maxCoeff() < 1e-6);
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("two_form is closed") {
    std::mt19937_64 rng(3);
    const double step = 1e-3;
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        const Point4 p = random_point(rng, 0.8);
        std::array<Mat4, 4> dF;
        for (int a = 0; a < 4; ++a)
            dF[a] = (two_form(shifted(p, a, step)) - two_form(shifted(p, a, -step))) / (2 * step);
        for (int j = 0; j < 4; ++j)
            for (int k = j + 1; k < 4; ++k)
                for (int l = k + 1; l < 4; ++l)
                    worst = std::max(worst, std::abs(dF[j](k, l) + dF[k](l, j) + dF[l](j, k)));
    }
    CHECK(worst <= 10 * step * step);
}

TEST_CASE("field invariants of the examples") {
    const FieldModel m = martinet_model(4.0, 0.1);
    const FieldInvariants a = field_invariants(pt(0.1, 0, 0, 0), m);
    CHECK(a.f1 == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(a.f2 == doctest::Approx(1.0).epsilon(1e-12));
    const FieldInvariants b = field_invariants(pt(0, 0, 0.3, 0.4), m);
    CHECK(std::abs(b.f1) < 1e-7);
    CHECK(b.f2 == doctest::Approx(1.25).epsilon(1e-12));
}

TEST_CASE("Euclidean invariants match the Pfaffian identities and frames solve the eigenproblem") {
    const FieldModel m = martinet_model(4.0, 0.1);
    std::mt19937_64 rng(4);
    for (int i = 0; i < 300; ++i) {
        const Point4 p = random_point(rng, 0.5);
        const FieldInvariants inv = field_invariants(p, m);
        const Mat4 F = two_form(p);
        double sq = 0;
        for (int j = 0; j < 4; ++j)
            for (int k = j + 1; k < 4; ++k)
                sq += F(j, k) * F(j, k);
        CHECK(inv.f1 <= inv.f2);
        CHECK(inv.f1 * inv.f1 + inv.f2 * inv.f2 == doctest::Approx(sq).epsilon(1e-11));
        CHECK(inv.f1 * inv.f2 == doctest::Approx(std::abs(pfaffian(F))).epsilon(1e-9).scale(1.0));
        if (!inv.near_degenerate && inv.f2 - inv.f1 > 1e-3)
            CHECK(frame_residual(inv, Mat4::Identity()) <= 1e-10 * F.norm());
    }
}

TEST_CASE("frame normalization") {
    const FieldModel m = martinet_model(4.0, 0.1);
    const FieldInvariants inv = field_invariants(pt(0.2, 0.1, 0.3, -0.1), m);
    const CVec4 &k1 = inv.frame1;
    const CVec4 &k2 = inv.frame2;
    // g(k_a, k_b) = 0 and g(k_a, conj k_b) = 2 delta_ab
    CHECK(std::abs((k1.transpose() * k1).value()) < 1e-12);
    CHECK(std::abs((k2.transpose() * k2).value()) < 1e-12);
    CHECK(std::abs((k1.transpose() * k2).value()) < 1e-12);
    CHECK(k1.squaredNorm() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(k2.squaredNorm() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::abs(k1.dot(k2)) < 1e-12);
}

TEST_CASE("f1 vanishes on Sigma and the Pfaffian changes sign with x1") {
    const FieldModel m = martinet_model(4.0, 0.1);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int i = 0; i < 1000; ++i) {
        const Point4 p = pt(0.0, u(rng), u(rng), u(rng));
        CHECK(std::abs(pfaffian(two_form(p))) <= 1e-12);
        CHECK(field_invariants(p, m).f1 < 1e-6);
        const double pos = pfaffian(two_form(pt(1e-3, p.x2, p.x3, p.x4)));
        const double neg = pfaffian(two_form(pt(-1e-3, p.x2, p.x3, p.x4)));
        CHECK(pos > 0);
        CHECK(neg < 0);
    }
}

TEST_CASE("f1 is comparable to |x1|") {
    const FieldModel m = martinet_model(4.0, 0.1);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> ux(1e-3, 0.3), ur(0.0, 0.5), ut(0.0, 2 * std::numbers::pi), us(-0.5, 0.5);
    for (int i = 0; i < 1000; ++i) {
        const double x1 = (i % 2 ? 1 : -1) * ux(rng);
        const double r = ur(rng), t = ut(rng);
        const FieldInvariants inv = field_invariants(pt(x1, us(rng), r * std::cos(t), r * std::sin(t)), m);
        const double q = inv.f1 / std::abs(x1);
        CHECK(q >= 1.0 - 1e-12);
        CHECK(q <= 2.5);
    }
}

TEST_CASE("intensities and zones are invariant under rotations of (x3, x4)") {
    const FieldModel m = martinet_model(100.0, 0.01);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ang(0, 2 * std::numbers::pi);
    for (int i = 0; i < 300; ++i) {
        const Point4 p = random_point(rng, 0.5);
        const double a = ang(rng);
        const Point4 q = pt(p.x1, p.x2, std::cos(a) * p.x3 - std::sin(a) * p.x4, std::sin(a) * p.x3 + std::cos(a) * p.x4);
        const FieldInvariants fp = field_invariants(p, m);
        const FieldInvariants fq = field_invariants(q, m);
        CHECK(std::abs(fp.f1 - fq.f1) <= 1e-12);
        CHECK(std::abs(fp.f2 - fq.f2) <= 1e-12);
        CHECK(classify_zone(p, 0.7, m).label == classify_zone(q, 0.7, m).label);
    }
}

TEST_CASE("equal intensities are flagged as near-degenerate") {
    const FieldModel m = constant_field_model(4.0, 0.1, 1.0, 1.0);
    const FieldInvariants inv = field_invariants(pt(0.1, 0.2, 0.3, 0.4), m);
    CHECK(inv.near_degenerate);
    CHECK(inv.f1 == doctest::Approx(1.0));
    CHECK(inv.f2 == doctest::Approx(1.0));
}

TEST_CASE("zone examples") {
    const FieldModel m = martinet_model(100.0, 0.01);
    ZoneConstants k;
    k.eps = 0.1;
    k.C = 1.0;
    CHECK(classify_zone(pt(0.3, 0, 0.5, 0), 1.0, m, k).label == ZoneLabel::OuterStrictII);

    for (double r : {0.0, 0.1, 0.5, 0.9}) {
        const ZoneLabel z = classify_zone(pt(0, 0, r, 0), 1.0, m).label;
        CHECK((z == ZoneLabel::InnerCore || z == ZoneLabel::InnerTrue || z == ZoneLabel::InnerBulk));
    }

    const FieldModel big = martinet_model(1e4, 1e-5);
    const ZoneLabel small_rho = classify_zone(pt(0.001, 0, 0.4, 0), 1e-6, big).label;
    const ZoneLabel large_rho = classify_zone(pt(0.001, 0, 0.4, 0), 10.0, big).label;
    CHECK(small_rho == ZoneLabel::InnerBulk);
    CHECK(large_rho == ZoneLabel::InnerTrue);
}

TEST_CASE("zone labels are total and outside the unit ball OffZone") {
    const FieldModel m = martinet_model(50.0, 0.01);
    std::mt19937_64 rng(8);
    for (int i = 0; i < 2000; ++i) {
        const Point4 p = random_point(rng, 0.6);
        const ZoneReport z = classify_zone(p, 1.0, m);
        CHECK(!to_string(z.label).empty());
        CHECK(z.gamma == std::abs(p.x1));
    }
    CHECK(classify_zone(pt(0.9, 0.9, 0, 0), 1.0, m).label == ZoneLabel::OffZone);
}

TEST_CASE("magnetic line closed form") {
    const double r = 0.3;
    const Point4 q = magnetic_line(pt(0, 0, r, 0), std::numbers::pi / 2);
    CHECK(q.x1 == 0.0);
    CHECK(q.x2 == doctest::Approx(-r * r * std::numbers::pi / 2));
    CHECK(std::abs(q.x3) < 1e-15);
    CHECK(q.x4 == doctest::Approx(r));

    const Point4 p0 = pt(0, 0.2, -0.1, 0.25);
    const Point4 same = magnetic_line(p0, 0.0);
    CHECK(same.x2 == p0.x2);
    CHECK(same.x3 == p0.x3);
    CHECK(same.x4 == p0.x4);
    CHECK(magnetic_line(p0, 1.7).r() == doctest::Approx(p0.r()).epsilon(1e-15));

    CHECK_THROWS_AS(magnetic_line(pt(0, 0, 0, 0), 1.0), OnLambda);
    CHECK_THROWS_AS(magnetic_line(pt(0.1, 0, 0.3, 0), 1.0), ConfigError);
}

TEST_CASE("magnetic line agrees with integration of the kernel direction field") {
    // tangent: kernel of F intersected with {v1 = 0}, scaled to unit angular speed
    auto field = [](const Eigen::Vector4d &x) {
        const Mat4 F = two_form(pt(x(0), x(1), x(2), x(3)));
        Eigen::Matrix<double, 5, 4> A;
        A.topRows<4>() = F;
        A.row(4) << 1, 0, 0, 0;
        Eigen::JacobiSVD<Eigen::Matrix<double, 5, 4>> svd(A, Eigen::ComputeFullV);
        Eigen::Vector4d v = svd.matrixV().col(3);
        const double r2 = x(2) * x(2) + x(3) * x(3);
        const double dtheta = (x(2) * v(3) - x(3) * v(2)) / r2;
        return Eigen::Vector4d(v / dtheta);
    };
    const Point4 p0 = pt(0, 0.1, 0.2, -0.15);
    Eigen::Vector4d x(p0.x1, p0.x2, p0.x3, p0.x4);
    const int steps = 4000;
    const double ds = 2 * std::numbers::pi / steps;
    double worst = 0;
    for (int i = 1; i <= steps; ++i) {
        const Eigen::Vector4d k1 = field(x);
        const Eigen::Vector4d k2 = field(x + 0.5 * ds * k1);
        const Eigen::Vector4d k3 = field(x + 0.5 * ds * k2);
        const Eigen::Vector4d k4 = field(x + ds * k3);
        x += ds / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        const Point4 q = magnetic_line(p0, i * ds);
        worst = std::max(worst, (Eigen::Vector4d(q.x1, q.x2, q.x3, q.x4) - x).norm());
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("model factories validate their parameters") {
    CHECK_THROWS_AS(martinet_model(1.0, 0.1), ConfigError);
    CHECK_THROWS_AS(martinet_model(4.0, 1.0), ConfigError);
    CHECK_THROWS_AS(martinet_model(40.0, 0.5), ConfigError);
    CHECK_THROWS_AS(separable_model(4.0, 0.1, 1.5), ConfigError);
}

TEST_CASE("separable model has f1 = |x1| and f2 = 1") {
    const FieldModel m = separable_model(4.0, 0.1, 0.2);
    std::mt19937_64 rng(9);
    for (int i = 0; i < 100; ++i) {
        const Point4 p = random_point(rng, 0.5);
        const FieldInvariants inv = field_invariants(p, m);
        CHECK(inv.f1 == doctest::Approx(std::abs(p.x1)).epsilon(1e-12).scale(1.0));
        CHECK(inv.f2 == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(m.scalar(p) == doctest::Approx(1.0 + 0.2 * p.x1));
    }
}
