#include "magspec/dynamics.hpp"

#include "magspec/errors.hpp"
#include "magspec/parallel.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace magspec {

namespace {

constexpr double kPi = std::numbers::pi;

using State = Eigen::Matrix<double, 8, 1>;

State pack(const PhasePoint &s) {
    State y;
    y << s.q.vec(), s.p;
    return y;
}

PhasePoint unpack(const State &y) { return {Point4::from(y.head<4>()), y.tail<4>()}; }

State rhs(const State &y, const FieldModel &m) {
    const FlowDerivative d = vector_field(unpack(y), m);
    State out;
    out << d.dq, d.dp;
    return out;
}

void check_blowup(const State &y, const FieldModel &m, double limit, double t) {
    if (!y.allFinite())
        throw BlowUp("non-finite state at t = " + std::to_string(t));
    const PhasePoint s = unpack(y);
    if (s.q.norm() > limit || kinetic_momentum(s, m).norm() > limit)
        throw BlowUp("state left the ball of radius " + std::to_string(limit) + " at t = " + std::to_string(t));
}

double fast_period_at(const PhasePoint &s, const FieldModel &m) {
    const double f2 = field_invariants(s.q, m).f2;
    return 2.0 * kPi / (m.mu * std::max(f2, 1e-3));
}

// Dormand-Prince 5(4) tableau (autonomous system, nodes unused)
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;

struct Dp45Step {
    State y;
    State k7;
    double err;
};

Dp45Step dp45(const State &y, const State &k1, double dt, const FieldModel &m, double tol) {
    const State k2 = rhs(y + dt * (a21 * k1), m);
    const State k3 = rhs(y + dt * (a31 * k1 + a32 * k2), m);
    const State k4 = rhs(y + dt * (a41 * k1 + a42 * k2 + a43 * k3), m);
    const State k5 = rhs(y + dt * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), m);
    const State k6 = rhs(y + dt * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), m);
    const State yn = y + dt * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const State k7 = rhs(yn, m);
    const State e = dt * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    return {yn, k7, e.cwiseAbs().maxCoeff() / tol};
}

// Two-stage Gauss-Legendre collocation, solved by fixed-point iteration.
State gauss_legendre(const State &y, double dt, const FieldModel &m) {
    const double s3 = std::sqrt(3.0);
    const double A11 = 0.25, A12 = 0.25 - s3 / 6, A21 = 0.25 + s3 / 6, A22 = 0.25;
    State k1 = rhs(y, m);
    State k2 = k1;
    for (int it = 0; it < 200; ++it) {
        const State n1 = rhs(y + dt * (A11 * k1 + A12 * k2), m);
        const State n2 = rhs(y + dt * (A21 * k1 + A22 * k2), m);
        const double change = std::max((n1 - k1).cwiseAbs().maxCoeff(), (n2 - k2).cwiseAbs().maxCoeff());
        k1 = n1;
        k2 = n2;
        if (std::abs(dt) * change <= 1e-15 * (1.0 + y.cwiseAbs().maxCoeff()))
            break;
    }
    return y + dt * 0.5 * (k1 + k2);
}

} // namespace

Vec4 kinetic_momentum(const PhasePoint &s, const FieldModel &m) { return s.p - m.mu * m.potential(s.q); }

PhasePoint from_kinetic(const Point4 &q, const Vec4 &p, const FieldModel &m) { return {q, p + m.mu * m.potential(q)}; }

double hamiltonian(const PhasePoint &s, const FieldModel &m) {
    const Vec4 p = kinetic_momentum(s, m);
    return 0.5 * (p.dot(m.metric(s.q) * p) - m.scalar(s.q));
}

FlowDerivative vector_field(const PhasePoint &s, const FieldModel &m) {
    const Vec4 p = kinetic_momentum(s, m);
    const Mat4 g = m.metric(s.q);
    const Vec4 gp = g * p;
    const Mat4 jac = m.potential_jacobian(s.q);
    const auto dg = m.grad_metric(s.q);
    const Vec4 dv = m.grad_scalar(s.q);
    FlowDerivative d;
    d.dq = gp;
    for (int l = 0; l < 4; ++l)
        d.dp[l] = -0.5 * p.dot(dg[l] * p) + m.mu * jac.row(l).dot(gp) + 0.5 * dv[l];
    return d;
}

ReducedState reduce(const PhasePoint &s, double mu) {
    const double r = s.q.r();
    if (!(r > 0))
        throw RAtZero("reduction needs r > 0");
    (void)mu;
    ReducedState out;
    out.x1 = s.q.x1;
    out.r = r;
    out.xi1 = s.p[0];
    out.xir = (s.q.x3 * s.p[2] + s.q.x4 * s.p[3]) / r;
    out.xi2 = s.p[1];
    out.xitheta = s.q.x3 * s.p[3] - s.q.x4 * s.p[2];
    return out;
}

double reduced_hamiltonian(const ReducedState &s, double mu, double V) {
    if (!(s.r > 0))
        throw RAtZero("reduced Hamiltonian needs r > 0");
    const double r2 = s.r * s.r;
    const double a = s.xi2 - mu * (s.x1 - 0.5 * r2);
    const double b = s.xitheta - mu * (s.x1 - 0.25 * r2) * r2;
    const double W = a * a + b * b / r2;
    return 0.5 * (s.xi1 * s.xi1 + s.xir * s.xir + W - V);
}

Trajectory integrate_flow(const PhasePoint &s0, const FieldModel &m, double T, const FlowOptions &opts) {
    if (!(opts.tol >= 1e-12 && opts.tol <= 1e-4))
        throw ConfigError("tol", "must lie in [1e-12, 1e-4]");
    if (!std::isfinite(T))
        throw ConfigError("T", "must be finite");
    if (opts.sample_dt < 0)
        throw ConfigError("sample_dt", "must be >= 0");

    Trajectory tr;
    tr.tol = opts.tol;
    tr.mu = m.mu;
    tr.fast_period = fast_period_at(s0, m);
    const double max_step = opts.max_step > 0 ? opts.max_step : tr.fast_period / 16.0;
    const double dir = T < 0 ? -1.0 : 1.0;
    const double span = std::abs(T);

    State y = pack(s0);
    check_blowup(y, m, opts.blowup, 0.0);
    double t = 0.0; // elapsed |time|
    auto record = [&](double elapsed) {
        tr.times.push_back(dir * elapsed);
        const PhasePoint s = unpack(y);
        tr.states.push_back(s);
        tr.energy.push_back(hamiltonian(s, m));
    };
    record(0.0);
    if (span == 0.0)
        return tr;

    std::size_t next_sample = 1;
    auto target = [&]() {
        double stop = span;
        if (opts.sample_dt > 0)
            stop = std::min(stop, static_cast<double>(next_sample) * opts.sample_dt);
        return stop;
    };
    auto after_step = [&]() {
        const double stop = target();
        const bool at_stop = std::abs(stop - t) <= 1e-12 * std::max(1.0, stop);
        if (at_stop)
            t = stop;
        if (opts.sample_dt <= 0 || at_stop) {
            record(t);
            if (opts.sample_dt > 0)
                ++next_sample;
        }
    };

    if (opts.method == Integrator::Symplectic) {
        const double step = opts.symplectic_step > 0 ? opts.symplectic_step : tr.fast_period / 40.0;
        while (t < span) {
            const double dt = std::min(step, target() - t);
            y = gauss_legendre(y, dir * dt, m);
            t += dt;
            ++tr.steps;
            check_blowup(y, m, opts.blowup, dir * t);
            after_step();
        }
        return tr;
    }

    State k1 = rhs(y, m);
    double dt = max_step / 4.0;
    double err_prev = 1.0;
    while (t < span) {
        const double room = target() - t;
        const double h = std::min({dt, max_step, room});
        if (h < opts.min_step && h < room)
            throw StepUnderflow("step " + std::to_string(h) + " below " + std::to_string(opts.min_step) +
                                " at t = " + std::to_string(dir * t));
        const Dp45Step st = dp45(y, k1, dir * h, m, opts.tol);
        const double err = std::max(st.err, 1e-10);
        if (st.err <= 1.0) {
            y = st.y;
            k1 = st.k7;
            t += h;
            ++tr.steps;
            check_blowup(y, m, opts.blowup, dir * t);
            after_step();
            const double fac = 0.9 * std::pow(err, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
            const double proposed = h * std::clamp(fac, 0.2, 5.0);
            // a step clipped to a sample time does not shrink the controller's step
            dt = h < dt ? std::max(dt, proposed) : proposed;
            err_prev = err;
        } else {
            ++tr.rejected;
            dt = h * std::max(0.2, 0.9 * std::pow(err, -0.2));
            if (dt < opts.min_step)
                throw StepUnderflow("step " + std::to_string(dt) + " below " + std::to_string(opts.min_step) +
                                    " at t = " + std::to_string(dir * t));
        }
    }
    return tr;
}

InvariantSeries invariant_series(const Trajectory &traj, const FieldModel &m, const ZoneConstants &k) {
    InvariantSeries out;
    const std::size_t n = traj.states.size();
    out.z1sq.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const PhasePoint &s = traj.states[i];
        const FieldInvariants inv = field_invariants(s.q, m);
        if (inv.f2 - inv.f1 < kFrameGapDynamics)
            throw NearDegenerateFrames("f2 - f1 = " + std::to_string(inv.f2 - inv.f1) + " at sample " +
                                       std::to_string(i));
        const Eigen::Vector4cd p = kinetic_momentum(s, m).cast<std::complex<double>>();
        const double z1 = std::norm(inv.frame1.cwiseProduct(p).sum());
        const double z2 = std::norm(inv.frame2.cwiseProduct(p).sum());
        out.z1sq.push_back(z1);
        out.z2sq.push_back(z2);
        out.z2sq_over_f2.push_back(z2 / inv.f2);
        out.x1sq.push_back(s.q.x1 * s.q.x1);
        out.gamma.push_back(s.q.gamma());
        out.r.push_back(s.q.r());
        out.zone.push_back(classify_zone(s.q, std::sqrt(z1), m, k).label);
    }
    return out;
}

namespace {

// Integral of the piecewise-linear interpolant from times[0] to t.
class RunningIntegral {
public:
    RunningIntegral(const std::vector<double> &t, const std::vector<double> &v) : t_(t), v_(v), acc_(t.size(), 0.0) {
        for (std::size_t i = 1; i < t.size(); ++i)
            acc_[i] = acc_[i - 1] + 0.5 * (t[i] - t[i - 1]) * (v[i] + v[i - 1]);
    }
    double operator()(double t) const {
        auto it = std::upper_bound(t_.begin(), t_.end(), t);
        std::size_t i = it == t_.begin() ? 0 : static_cast<std::size_t>(it - t_.begin()) - 1;
        if (i + 1 >= t_.size())
            i = t_.size() - 2;
        const double dt = t - t_[i];
        const double slope = (v_[i + 1] - v_[i]) / (t_[i + 1] - t_[i]);
        return acc_[i] + dt * (v_[i] + 0.5 * dt * slope);
    }

private:
    const std::vector<double> &t_;
    const std::vector<double> &v_;
    std::vector<double> acc_;
};

std::vector<double> elapsed(const std::vector<double> &times) {
    std::vector<double> e(times.size());
    for (std::size_t i = 0; i < times.size(); ++i)
        e[i] = std::abs(times[i] - times.front());
    return e;
}

std::pair<std::vector<double>, std::vector<double>> windows(const std::vector<double> &times,
                                                            const std::vector<double> &values, double window) {
    if (times.size() != values.size() || times.size() < 2)
        throw InsufficientData("window means need at least two samples");
    if (!(window > 0))
        throw ConfigError("window", "must be positive");
    const std::vector<double> e = elapsed(times);
    const double span = e.back();
    if (span < window)
        throw TooShort("trajectory shorter than one averaging window");
    const RunningIntegral I(e, values);
    const double stride = window / 4.0;
    const auto count = static_cast<std::size_t>(std::floor((span - window) / stride + 1e-9)) + 1;
    std::vector<double> centers, means;
    for (std::size_t j = 0; j < count; ++j) {
        const double a = j * stride;
        centers.push_back(a + 0.5 * window);
        means.push_back((I(a + window) - I(a)) / window);
    }
    // the last window ends exactly at the final sample
    if (span - (centers.back() + 0.5 * window) > 1e-12 * span) {
        centers.push_back(span - 0.5 * window);
        means.push_back((I(span) - I(span - window)) / window);
    }
    return {centers, means};
}

} // namespace

std::vector<double> window_means(const std::vector<double> &times, const std::vector<double> &values, double window) {
    return windows(times, values, window).second;
}

double windowed_mean_drift(const std::vector<double> &times, const std::vector<double> &values, double window) {
    const auto means = window_means(times, values, window);
    return std::abs(means.back() - means.front());
}

double ensemble_z2_drift(const std::vector<PhasePoint> &ensemble, const FieldModel &m, double T, double tol) {
    if (ensemble.empty())
        throw InsufficientData("empty ensemble");
    const auto d = parallel_map(ensemble.size(), [&](std::size_t i) {
        FlowOptions o;
        o.tol = tol;
        o.sample_dt = fast_period_at(ensemble[i], m) / 40.0;
        const Trajectory tr = integrate_flow(ensemble[i], m, T, o);
        const InvariantSeries s = invariant_series(tr, m);
        return windowed_mean_drift(tr.times, s.z2sq, 10.0 * tr.fast_period);
    });
    return ordered_sum(d) / static_cast<double>(d.size());
}

double drift_rate(const Trajectory &traj) {
    const double P = traj.fast_period;
    const std::size_t n = traj.times.size();
    if (n < 2 || std::abs(traj.times.back() - traj.times.front()) < 20.0 * P)
        throw TooShort("drift_rate needs at least 20 fast periods");
    std::vector<double> theta(n);
    theta[0] = traj.states[0].q.theta();
    for (std::size_t i = 1; i < n; ++i) {
        double d = traj.states[i].q.theta() - traj.states[i - 1].q.theta();
        d -= 2 * kPi * std::round(d / (2 * kPi));
        if (std::abs(d) > 0.5 * kPi)
            throw Error("theta jumps by more than pi/2 between samples; sample more densely");
        theta[i] = theta[i - 1] + d;
    }
    const auto [centers, means] = windows(traj.times, theta, 10.0 * P);
    if (centers.size() < 2)
        throw TooShort("drift_rate needs at least two averaging windows");
    double mc = 0, mm = 0;
    for (std::size_t j = 0; j < centers.size(); ++j) {
        mc += centers[j];
        mm += means[j];
    }
    mc /= centers.size();
    mm /= centers.size();
    double sxy = 0, sxx = 0;
    for (std::size_t j = 0; j < centers.size(); ++j) {
        sxy += (centers[j] - mc) * (means[j] - mm);
        sxx += (centers[j] - mc) * (centers[j] - mc);
    }
    const double dir = traj.times.back() < traj.times.front() ? -1.0 : 1.0;
    return dir * sxy / sxx;
}

double cusp_average_drift(double xi2, double rho) {
    if (!(rho > 0))
        throw ConfigError("rho", "must be positive");
    // s = xi2 - x1^2/2 runs over (a, b); dt ~ ds / sqrt((rho^2 - s^2)(xi2 - s)).
    // s = mid + half sin(phi) absorbs both square-root endpoint singularities.
    const bool single_well = xi2 < rho;
    const double a = -rho;
    const double b = single_well ? xi2 : rho;
    if (!(b > a))
        throw ConfigError("xi2", "energy shell is empty (xi2 <= -rho)");
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    auto weight = [&](double phi) {
        const double s = mid + half * std::sin(phi);
        const double rest = single_well ? rho - s : xi2 - s;
        return 1.0 / std::sqrt(rest);
    };
    boost::math::quadrature::tanh_sinh<double> q;
    const double lim = 0.5 * kPi;
    const double norm = q.integrate(weight, -lim, lim);
    const double first = q.integrate([&](double phi) { return (mid + half * std::sin(phi)) * weight(phi); }, -lim, lim);
    return 2.0 * first / norm;
}

double compute_k_star(double rho) {
    if (!(rho > 0))
        throw ConfigError("rho", "must be positive");
    double lo = 0.0, hi = 1.2;
    double flo = cusp_average_drift(lo * rho, rho);
    const double fhi = cusp_average_drift(hi * rho, rho);
    if (flo * fhi > 0)
        throw NoRoot("average drift does not change sign on xi2/rho in [0, 1.2]");
    while (hi - lo > 1e-13) {
        const double c = 0.5 * (lo + hi);
        const double fc = cusp_average_drift(c * rho, rho);
        if ((fc < 0) == (flo < 0)) {
            lo = c;
            flo = fc;
        } else {
            hi = c;
        }
    }
    return 0.5 * (lo + hi);
}

std::string_view to_string(Scenario s) {
    switch (s) {
    case Scenario::I:
        return "i";
    case Scenario::II:
        return "ii";
    case Scenario::III:
        return "iii";
    case Scenario::IV:
        return "iv";
    case Scenario::V:
        return "v";
    }
    return "i";
}

double scenario_horizon(Scenario sc, double gamma, double r, double mu, double eps) {
    switch (sc) {
    case Scenario::I:
        return eps * mu * gamma * r;
    case Scenario::II:
        return eps * mu * gamma * gamma / r;
    default:
        return eps;
    }
}

std::vector<PhasePoint> scenario_ensemble(std::size_t n, double gamma, double r, const FieldModel &m,
                                          std::uint64_t seed, double energy) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<PhasePoint> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double th = 2 * kPi * uni(rng);
        const double sign = uni(rng) < 0.5 ? -1.0 : 1.0;
        const Point4 q{sign * gamma, 0.2 * (uni(rng) - 0.5), r * std::cos(th), r * std::sin(th)};
        Vec4 dir(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
        dir.normalize();
        out.push_back(from_kinetic(q, std::sqrt(energy) * dir, m));
    }
    return out;
}

ConfinementReport confinement_report(const std::vector<PhasePoint> &ensemble, const FieldModel &m, double gamma,
                                     double r, Scenario sc, const ConfinementConfig &cfg) {
    ConfinementReport rep;
    rep.T = scenario_horizon(sc, gamma, r, m.mu, cfg.eps);
    rep.total = ensemble.size();
    rep.pass.assign(ensemble.size(), 1);
    const double C = cfg.C;
    const double mu = m.mu;
    auto inside = [&](const Point4 &q) {
        const double g = q.gamma();
        const double rr = q.r();
        switch (sc) {
        case Scenario::I:
        case Scenario::II:
            return g >= gamma / C && g <= C * gamma && rr >= r / C && rr <= C * r;
        case Scenario::III:
            return g >= gamma / C && g <= C * gamma && rr <= C * cfg.c / (mu * gamma);
        case Scenario::IV:
            return g <= C * gamma && rr >= r / C && rr <= C * r;
        case Scenario::V:
            return g <= C * gamma && rr <= C * std::pow(mu, -1.0 / 3.0);
        }
        return false;
    };
    if (rep.T > 0) {
        parallel_for(ensemble.size(), [&](std::size_t i) {
            try {
                const Trajectory tr = integrate_flow(ensemble[i], m, rep.T, cfg.flow);
                for (const auto &s : tr.states)
                    if (!inside(s.q)) {
                        rep.pass[i] = 0;
                        break;
                    }
            } catch (const Error &) {
                rep.pass[i] = 0;
            }
        });
    }
    for (int p : rep.pass)
        rep.passed += p;
    rep.pass_fraction = rep.total ? static_cast<double>(rep.passed) / rep.total : 1.0;
    return rep;
}

} // namespace magspec
