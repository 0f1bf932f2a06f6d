#pragma once

// Classical charged-particle flow for a FieldModel: Hamiltonian and its
// circular-symmetric reduction, an adaptive and a symplectic integrator,
// frame invariants along trajectories, drift diagnostics and the cusp
// drift-null constant.

#include "magspec/geometry.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace magspec {

struct PhasePoint {
    Point4 q;
    Vec4 p = Vec4::Zero(); // canonical momenta xi
};

// Coordinates adapted to (x3, x4)-rotations. xi2 and xitheta are integrals of
// motion of the circular-symmetric model.
struct ReducedState {
    double x1 = 0, r = 0, xi1 = 0, xir = 0;
    double xi2 = 0, xitheta = 0;
};

// Kinetic momentum p_j = xi_j - mu V_j(x).
Vec4 kinetic_momentum(const PhasePoint &s, const FieldModel &m);

// Canonical state with position q and kinetic momentum p.
PhasePoint from_kinetic(const Point4 &q, const Vec4 &p, const FieldModel &m);

// 1/2 (g^{jk} p_j p_k - V)
double hamiltonian(const PhasePoint &s, const FieldModel &m);

struct FlowDerivative {
    Vec4 dq;
    Vec4 dp;
};

// (dH/dxi, -dH/dx)
FlowDerivative vector_field(const PhasePoint &s, const FieldModel &m);

// Reduction of a Martinet state; requires r > 0 (RAtZero).
ReducedState reduce(const PhasePoint &s, double mu);

// 1/2 (xi1^2 + xir^2 + W - V) with
// W = (xi2 - mu (x1 - r^2/2))^2 + r^-2 (xitheta - mu (x1 - r^2/4) r^2)^2.
double reduced_hamiltonian(const ReducedState &s, double mu, double V = 0.0);

enum class Integrator { Adaptive, Symplectic };

struct FlowOptions {
    double tol = 1e-9;
    Integrator method = Integrator::Adaptive;
    // > 0: samples exactly at multiples of sample_dt; 0: every accepted step
    double sample_dt = 0.0;
    // 0: one sixteenth of the fast cyclotron period 2 pi / (mu f2) at the start
    double max_step = 0.0;
    // fixed step of the symplectic mode; 0: one fortieth of the fast period
    double symplectic_step = 0.0;
    double blowup = 1e3;
    double min_step = 1e-14;
};

struct Trajectory {
    std::vector<double> times; // monotone in the direction of integration
    std::vector<PhasePoint> states;
    std::vector<double> energy;
    double tol = 0.0;
    double mu = 0.0;
    double fast_period = 0.0;
    std::size_t steps = 0;
    std::size_t rejected = 0;
};

// Hamilton's equations from s0 over [0, T] (T < 0 integrates backwards).
// Adaptive mode: Dormand-Prince 5(4) with PI step control and per-step
// error <= tol. Throws StepUnderflow below min_step and BlowUp when |x| or the
// kinetic momentum exceeds `blowup`.
Trajectory integrate_flow(const PhasePoint &s0, const FieldModel &m, double T, const FlowOptions &opts = {});

struct InvariantSeries {
    std::vector<double> z1sq, z2sq, z2sq_over_f2, x1sq, gamma, r;
    std::vector<ZoneLabel> zone;
};

inline constexpr double kFrameGapDynamics = 1e-6;

// |Z_a|^2 with Z_a = sum_m k_a^m p_m along the trajectory, plus x1^2, gamma,
// r and the zone with rho = |Z_1|. Throws NearDegenerateFrames when
// f2 - f1 < kFrameGapDynamics at a sample.
InvariantSeries invariant_series(const Trajectory &traj, const FieldModel &m, const ZoneConstants &k = {});

// Means of `values` over sliding windows [t, t + window] (trapezoid rule,
// linear interpolation at the window ends), strided by window / 4.
std::vector<double> window_means(const std::vector<double> &times, const std::vector<double> &values, double window);

// |mean over the last window - mean over the first window|.
double windowed_mean_drift(const std::vector<double> &times, const std::vector<double> &values, double window);

// Ensemble mean of windowed_mean_drift of |Z_2|^2 over [0, T], windows of 10
// fast periods of each start point, samples every fast_period / 40.
double ensemble_z2_drift(const std::vector<PhasePoint> &ensemble, const FieldModel &m, double T, double tol = 1e-10);

// Least-squares slope of the windowed mean of unwrapped theta(t); windows span
// 10 fast periods. Throws TooShort when the trajectory covers < 20 periods.
double drift_rate(const Trajectory &traj);

// Period average of d a / d xi2 = 2 (xi2 - x1^2/2) for a = xi1^2 + (xi2 - x1^2/2)^2
// on the energy shell a = rho^2.
double cusp_average_drift(double xi2, double rho);

// xi2 / rho at which cusp_average_drift vanishes, searched in xi2/rho in
// [0, 1.2]. Throws NoRoot when the bracket does not change sign.
double compute_k_star(double rho);

enum class Scenario { I, II, III, IV, V };

std::string_view to_string(Scenario s);

struct ConfinementConfig {
    double eps = 0.05;   // time-scale constant in T
    double C = 4.0;      // bound factor
    double c = 1.0;      // start-region constant of scenarios iii-v
    FlowOptions flow{1e-8};
};

struct ConfinementReport {
    double T = 0.0;
    std::size_t passed = 0;
    std::size_t total = 0;
    double pass_fraction = 1.0;
    std::vector<int> pass; // per trajectory
};

// Horizon T of each scenario: (i) eps mu gamma r, (ii) eps mu gamma^2 / r, (iii)-(v) eps.
double scenario_horizon(Scenario sc, double gamma, double r, double mu, double eps);

// Start points with |x1| = gamma, distance r to Lambda, random angle, x2 and
// kinetic direction; |p|^2 = energy.
std::vector<PhasePoint> scenario_ensemble(std::size_t n, double gamma, double r, const FieldModel &m,
                                          std::uint64_t seed, double energy = 1.0);

// Fraction of trajectories whose |x1(t)| and r(t) obey the scenario bounds at
// every sample up to the scenario horizon.
ConfinementReport confinement_report(const std::vector<PhasePoint> &ensemble, const FieldModel &m, double gamma,
                                     double r, Scenario sc, const ConfinementConfig &cfg = {});

} // namespace magspec
