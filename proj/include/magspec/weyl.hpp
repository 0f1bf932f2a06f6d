#pragma once

// Semiclassical densities: the field-free Weyl density, the magnetic Weyl
// density summed over Landau pairs (m, n), the surface correction term, the
// oscillatory sum of the separable model and the nondegeneracy diagnostic.

#include "magspec/geometry.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace magspec {

// Which spectral parameter enters the thresholds:
//   Halved: operator with the global 1/2, effective level W = 2 tau + V
//   Model: operator without 1/2 (separable models), W = tau + V
enum class Convention { Halved, Model };

struct WeylInputs {
    double V = 1.0;
    double f1 = 0.0;
    double f2 = 1.0;
    double sqrt_g = 1.0; // (det g^{jk})^{-1/2}
    double tau = 0.0;
    double mu = 1.0;
    double h = 0.1;
    Convention convention = Convention::Halved;
};

double effective_level(const WeylInputs &in);

enum class DensityMode { Density, Coefficient };

// (1 / 32 pi^2) W_+^2 sqrt(g) h^-4; the coefficient mode drops h^-4.
double weyl_density(const WeylInputs &in, DensityMode mode = DensityMode::Density);

// #{(m, n) >= 0 : W - (2m+1) e1 - (2n+1) e2 > 0} with e_a = mu h f_a.
std::int64_t landau_pair_count(double W, double e1, double e2);

// Below this ratio f1/f2 the Landau sum in f1 is replaced by its integral.
inline constexpr double kF1LimitRatio = 1e-8;

double magnetic_weyl_density(const WeylInputs &in, double f1_limit_ratio = kF1LimitRatio);

struct QuadratureConfig {
    double half_width = 1.0;             // integration box [-half_width, half_width]^4
    std::array<int, 4> cells{16, 16, 16, 16}; // top-level cells per axis (even keeps x = 0 a node)
    int max_depth = 12;                  // dyadic refinement levels across Landau thresholds
    double rel_tol = 1e-3;               // tolerance on |I(depth) - I(depth-1)|
    double abs_floor = 1e-12;
    Convention convention = Convention::Halved;
    unsigned workers = 0;
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    std::size_t leaf_cells = 0;
};

// Integral of magnetic_weyl_density * psi over the box. Throws
// QuadratureNotConverged when the last refinement level moves the result by
// more than rel_tol * max(|value|, abs_floor).
QuadratureResult magnetic_weyl_integral(const FieldModel &model, const std::function<double(const Point4 &)> &psi,
                                        double tau, const QuadratureConfig &cfg = {});

// Closed x1-reduction for the separable model (f1 = |x1|, f2 = 1, V = 1 + k x1,
// Euclidean metric, operator without the global 1/2):
//   mu / (2 pi h) * integral of sum_m theta(level + k x - (2m+1) mu h |x|) |x| psi1(x) dx
// over [-support, support]. The 2D magnetic Weyl integral has level = tau + 1;
// Landau level n of the transverse factor shifts it by -(2n+1) mu h.
double separable_emw_2d(const std::function<double(double)> &psi1, double support, double level, double k,
                        double mu, double h);

// Per-level terms sum_n mu/(2 pi h) * separable_emw_2d(level - (2n+1) mu h) of
// the 4D separable model, n = 0, 1, ... while the level stays positive
// somewhere on the support.
std::vector<double> separable_emw_4d_levels(const std::function<double(double)> &psi1, double support, double tau,
                                            double k, double mu, double h);

// Periodic profile G together with the constants of the correction term.
struct CorrectionParams {
    std::function<double(double)> G;
    double S0 = 1.0;
    double kappa = 1.0;
    double phi = 1.0;     // edge slope |grad_{K1} f1|
    double g_prime = 1.0; // g' = g^{11} g; sqrt(g') enters the formula
};

// Surface correction density on Sigma; hbar = sqrt(mu) h must be < 1 and V > 0.
double correction_density(const CorrectionParams &params, double V, double f2, double mu, double h);

// I(eps, hbar) = eps * sum_n (V - (2n+1) f2 eps)_+^{1/8} phi^{1/4}
//                 G(S0 (V - (2n+1) f2 eps)^{3/4} phi^{-1/2} / (2 pi hbar)) f2 sqrt(g').
// Requires 0 < hbar <= eps <= 1.
double oscillatory_sum(double eps, double hbar, const CorrectionParams &params, double V, double phi, double f2,
                       double sqrt_gp);

// Number of active levels n with V - (2n+1) f2 mu h > 0.
int active_levels(double V, double f2, double mu_h);

// Linear interpolation in a sorted (argument, value) table; arguments outside
// the table are clamped, or wrapped when `periodic` is set (period = span).
class GTable {
public:
    GTable() = default;
    GTable(std::vector<std::pair<double, double>> rows, bool periodic = false);
    static GTable load(const std::string &path, bool periodic = false);

    double operator()(double x) const;
    const std::vector<std::pair<double, double>> &rows() const { return rows_; }
    bool periodic() const { return periodic_; }

private:
    std::vector<std::pair<double, double>> rows_;
    bool periodic_ = false;
};

struct NondegReport {
    double L = 0.0;
    double grad_norm = 0.0;
    std::array<double, 3> hess_eigs{0, 0, 0};
    int q_class = 0;
};

// Surface data on Sigma: (x2, x3, x4) -> (V, f2).
using SurfaceFn = std::function<std::pair<double, double>(const Eigen::Vector3d &)>;

// Gradient and Hessian of V/f2 along Sigma by central differences, the scale
// L = eps |grad(V/f2)| + min_n |V/f2 - (2n+1) mu h| and the number of Hessian
// eigenvalues with modulus >= eps0.
NondegReport nondegeneracy_diagnostic(const SurfaceFn &surface, const Eigen::Vector3d &point, double mu, double h,
                                      double eps0, double eps = 0.05, double fd_step = 1e-3);

} // namespace magspec
