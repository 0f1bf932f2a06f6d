#pragma once

// Spectral counting for the separable model operators by fiber decomposition:
// after the Fourier transform in x2 the 2D factor
//   A_I = h^2 D_1^2 + (h D_2 - mu x1^2 / 2)^2 - 1 - k x1
// splits into 1D problems h^2 D^2 + U(x1; xi2), solved by finite differences.
// The (x3, x4) factor contributes Landau levels (2n+1) mu h with sheet density
// mu / (2 pi h).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace magspec {

struct ModelParams {
    double mu = 4.0;
    double h = 1.0 / 32;
    double k = 0.0;
    double tau = 0.0;

    // mu > 0, h in (0, 1), mu h <= 1, |k| <= 1; ConfigError otherwise
    void validate() const;
};

struct Grid1D {
    double L = 1.0;     // domain [-L, L], Dirichlet ends
    std::size_t N = 256; // intervals; interior nodes x_i = -L + i 2L/N, i = 1..N-1
    double spacing() const { return 2.0 * L / static_cast<double>(N); }
    double node(std::size_t i) const { return -L + static_cast<double>(i) * spacing(); }
};

using Profile = std::function<double(double)>;

// U(x1) = (xi2 - mu x1^2 / 2)^2 - 1 - k x1
Profile fiber_potential(double xi2, const ModelParams &prm);

struct FiberOptions {
    double tail_tol = 1e-6;        // max |phi| at the outermost nodes
    double richardson_tol = 1e-3;  // |lambda_N - lambda_{N/2}| <= tol (1 + |lambda|)
    bool keep_densities = true;    // store |phi_k|^2 on the fine grid
};

struct FiberSpectrum {
    double xi2 = 0.0;
    Grid1D grid;
    // Richardson-extrapolated eigenvalues below the cutoff, increasing
    std::vector<double> eigenvalues;
    // |phi_k(x_i)|^2 at the interior nodes of `grid`, normalized so that
    // sum_i |phi_k(x_i)|^2 dx = 1
    std::vector<std::vector<double>> densities;
    // max |lambda_N - lambda_{N/2}| over the returned eigenvalues
    double richardson_gap = 0.0;
    // Gram residual max |<phi_j, phi_k> - delta_jk| on the fine grid
    double gram_residual = 0.0;
    // same densities on the half-resolution grid (N/2), for extrapolated weights
    Grid1D coarse_grid;
    std::vector<std::vector<double>> coarse_densities;

    // integral of |phi_k|^2 psi, Richardson-extrapolated from both grids
    double weight(std::size_t k, const Profile &psi) const;
};

// Eigenpairs of h^2 D^2 + U below `cutoff` on the grid (second-order
// differences; bisection and inverse iteration). Throws DomainTooSmall when an
// eigenfunction exceeds tail_tol at the outermost nodes and GridTooCoarse when
// the N versus N/2 comparison exceeds richardson_tol.
FiberSpectrum solve_potential(const Profile &U, double h, const Grid1D &grid, double cutoff,
                              const FiberOptions &opts = {});

FiberSpectrum solve_fiber(double xi2, const ModelParams &prm, const Grid1D &grid, double cutoff,
                          const FiberOptions &opts = {});

// Grid with U(x) >= cutoff + 5 for L0 <= |x| <= L (outward scan from
// x_start, U assumed to grow beyond), L = L0 + 8h for the decay of the tails,
// spacing <= h / points_per_h and N a power of two >= 256.
Grid1D auto_grid(const Profile &U, double h, double cutoff, double x_start, double points_per_h = 8.0);

struct LandauCount {
    long count = 0;
    double sheet_density = 0.0;
};

// #{n >= 0 : (2n+1) mu h < lambda} and mu / (2 pi h)
LandauCount landau_count(double lambda, const ModelParams &prm);

struct XiQuadrature {
    double step = 0.0;            // xi2 node spacing; 0: h / 2
    double support = 0.5;         // psi1 vanishes for |x1| >= support
    double points_per_h = 8.0;    // fine-grid resolution of each fiber
    double cutoff_margin = 1.0;   // fibers are solved up to max threshold + margin
    unsigned workers = 0;
    FiberOptions fiber{};
};

// xi2 band [-s - 1, mu support^2 / 2 + s + 1], s = sqrt(1 + |k| support + |tau|)
std::pair<double, double> xi2_band(const ModelParams &prm, double support);

// Integrals I_j = integral over the band of sum_k theta(thresholds_j - lambda_k(xi2)) w_k(xi2) d xi2
// for each profile, with lambda_k and w_k interpolated linearly between nodes
// and the threshold crossings located exactly. result[p][j]; `error` holds the
// difference to the same rule on every second node.
struct BandIntegral {
    std::vector<std::vector<double>> value;
    std::vector<std::vector<double>> error;
    std::size_t fibers = 0;
};

BandIntegral band_integral(const ModelParams &prm, const std::vector<Profile> &profiles,
                           const std::vector<double> &thresholds, const XiQuadrature &quad);

// e_I(x1, x1, tau) = (2 pi h)^-1 integral sum_k |phi_k(x1)|^2 theta(tau - lambda_k) d xi2
// for the 2D factor A_I, with the error estimate of band_integral.
struct DosValue {
    double value = 0.0;
    double error = 0.0;
};
DosValue local_dos_2d(double x1, double tau, const ModelParams &prm, const XiQuadrature &quad);

// Same quantity at several points with one pass over the fibers.
std::vector<DosValue> local_dos_2d(const std::vector<double> &x1, double tau, const ModelParams &prm,
                                   const XiQuadrature &quad);

struct CountReport {
    double mu = 0, h = 0, k = 0;
    double N_count = 0.0;
    double emw_integral = 0.0;
    double remainder = 0.0;
    std::vector<std::pair<int, double>> per_landau;     // N_count by transverse level n
    std::vector<std::pair<int, double>> per_landau_emw; // magnetic Weyl integral by n
    double quadrature_error = 0.0;
    std::size_t fibers = 0;
};

// Localized count of the 4D separable model below tau:
//   N = sum_n mu/(2 pi h) psi2_mass (2 pi h)^-1 integral sum_k theta(tau - (2n+1) mu h - lambda_k) <|phi_k|^2, psi1> d xi2
// next to the magnetic Weyl integral with the same weights (model convention).
CountReport count_states(const Profile &psi1, double psi2_mass, const ModelParams &prm, const XiQuadrature &quad = {});

struct Count2DReport {
    double N = 0.0;
    double emw = 0.0;
    double residual = 0.0;
    double quadrature_error = 0.0;
    std::size_t fibers = 0;
};

// Localized count of A_I alone below tau and its 2D magnetic Weyl integral.
Count2DReport count_states_2d(const Profile &psi1, const ModelParams &prm, const XiQuadrature &quad = {});

struct OscillatorCheck {
    double max_rel_error = 0.0; // max over n <= n_max of |lambda_n / ((2n+1) mu h) - 1|
    Grid1D grid;
};

// solve_potential on U = mu^2 x^2 against the levels (2n+1) mu h.
OscillatorCheck oscillator_check(double mu, double h, int n_max = 20, double points_per_h = 32.0);

// Smooth bump cos^2(pi x / (2 a)) on |x| < a, zero outside; equals 1 at 0.
Profile cos2_bump(double a);

} // namespace magspec
