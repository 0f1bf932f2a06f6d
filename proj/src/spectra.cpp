#include "magspec/spectra.hpp"

#include "magspec/errors.hpp"
#include "magspec/parallel.hpp"
#include "magspec/weyl.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace magspec {

namespace {

constexpr double kPi = std::numbers::pi;

struct RawSpectrum {
    std::vector<double> values;
    std::vector<std::vector<double>> densities; // |phi|^2, continuum-normalized
    double gram = 0.0;                          // max |Z^T Z - I|, when requested
};

// Eigenpairs of the tridiagonal h^2 D^2 + U below `cutoff`, or the lowest
// `count` of them when count > 0.
RawSpectrum tridiagonal_spectrum(const Profile &U, double h, const Grid1D &grid, double cutoff, bool vectors,
                                 bool gram = false, lapack_int count = 0) {
    const auto n = static_cast<lapack_int>(grid.N - 1);
    const double dx = grid.spacing();
    const double off = -h * h / (dx * dx);
    std::vector<double> d(n), e(std::max<lapack_int>(n - 1, 1), off);
    double lower = std::numeric_limits<double>::infinity();
    for (lapack_int i = 0; i < n; ++i) {
        d[i] = -2.0 * off + U(grid.node(static_cast<std::size_t>(i) + 1));
        lower = std::min(lower, d[i] + 2.0 * off);
    }
    RawSpectrum out;
    if (count == 0 && !(cutoff > lower))
        return out;
    if (count > n)
        throw GridTooCoarse("grid has fewer nodes than requested eigenvalues");

    lapack_int m = 0, nsplit = 0;
    std::vector<double> w(n);
    std::vector<lapack_int> iblock(n), isplit(n);
    const double abstol = 2.0 * LAPACKE_dlamch('S');
    lapack_int info = LAPACKE_dstebz(count > 0 ? 'I' : 'V', 'B', n, lower - 1.0, cutoff, 1, std::max<lapack_int>(count, 1), abstol, d.data(), e.data(), &m, &nsplit,
                                     w.data(), iblock.data(), isplit.data());
    if (info != 0)
        throw Error("tridiagonal bisection failed (info " + std::to_string(info) + ")");
    w.resize(m);
    out.values = w;
    if (!vectors || m == 0)
        return out;

    std::vector<double> z(static_cast<std::size_t>(n) * m);
    std::vector<lapack_int> ifail(m);
    info = LAPACKE_dstein(LAPACK_COL_MAJOR, n, d.data(), e.data(), m, w.data(), iblock.data(), isplit.data(), z.data(),
                          n, ifail.data());
    if (info != 0)
        throw Error("inverse iteration did not converge for " + std::to_string(info) + " eigenvectors");
    if (gram) {
        for (lapack_int a = 0; a < m; ++a)
            for (lapack_int b = a; b < m; ++b) {
                double g = 0;
                for (lapack_int i = 0; i < n; ++i)
                    g += z[static_cast<std::size_t>(a) * n + i] * z[static_cast<std::size_t>(b) * n + i];
                out.gram = std::max(out.gram, std::abs(g - (a == b ? 1.0 : 0.0)));
            }
    }
    out.densities.assign(m, std::vector<double>(n));
    for (lapack_int k = 0; k < m; ++k)
        for (lapack_int i = 0; i < n; ++i) {
            const double v = z[static_cast<std::size_t>(k) * n + i];
            out.densities[k][i] = v * v / dx;
        }
    // Order by value (one block for a nonzero off-diagonal, but keep it general).
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return out.values[a] < out.values[b]; });
    RawSpectrum sorted;
    sorted.gram = out.gram;
    for (auto i : order) {
        sorted.values.push_back(out.values[i]);
        sorted.densities.push_back(std::move(out.densities[i]));
    }
    return sorted;
}

// Weight vectors of a linear functional of |phi|^2 on the fine and coarse grids.
struct Functional {
    std::vector<double> fine, coarse;
};

Functional profile_functional(const Profile &psi, const Grid1D &fine, const Grid1D &coarse) {
    Functional f;
    for (std::size_t i = 1; i < fine.N; ++i)
        f.fine.push_back(psi(fine.node(i)) * fine.spacing());
    for (std::size_t i = 1; i < coarse.N; ++i)
        f.coarse.push_back(psi(coarse.node(i)) * coarse.spacing());
    return f;
}

// Linear interpolation of |phi|^2 at x (zero at the Dirichlet ends).
std::vector<double> hat_weights(double x, const Grid1D &g) {
    std::vector<double> w(g.N - 1, 0.0);
    const double s = (x + g.L) / g.spacing();
    if (s <= 0 || s >= static_cast<double>(g.N))
        return w;
    const auto i = static_cast<std::size_t>(std::floor(s));
    const double t = s - static_cast<double>(i);
    if (i >= 1)
        w[i - 1] += 1.0 - t;
    if (i + 1 <= g.N - 1)
        w[i] += t;
    return w;
}

Functional point_functional(double x, const Grid1D &fine, const Grid1D &coarse) {
    return {hat_weights(x, fine), hat_weights(x, coarse)};
}

double contract(const std::vector<double> &a, const std::vector<double> &density) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * density[i];
    return s;
}

// Members of a numerically degenerate cluster share the cluster mean, so that
// the basis chosen inside the cluster does not matter.
void cluster_average(const std::vector<double> &values, std::vector<double> &w) {
    std::size_t i = 0;
    while (i < values.size()) {
        std::size_t j = i + 1;
        while (j < values.size() && values[j] - values[j - 1] < 1e-9 * (1.0 + std::abs(values[j])))
            ++j;
        if (j - i > 1) {
            double s = 0;
            for (std::size_t q = i; q < j; ++q)
                s += w[q];
            for (std::size_t q = i; q < j; ++q)
                w[q] = s / static_cast<double>(j - i);
        }
        i = j;
    }
}

Grid1D half_grid(const Grid1D &g) { return {g.L, g.N / 2}; }

void check_grid(const Grid1D &g, double h) {
    if (g.N < 256 || (g.N & (g.N - 1)) != 0)
        throw ConfigError("N", "grid needs a power of two >= 256 intervals");
    if (!(g.L > 0))
        throw ConfigError("L", "must be positive");
    if (g.spacing() > h / 8.0 * (1 + 1e-12))
        throw GridTooCoarse("spacing " + std::to_string(g.spacing()) + " exceeds h/8 = " + std::to_string(h / 8));
}

struct Extrapolated {
    std::vector<double> values;
    double gap = 0.0;
    RawSpectrum fine, coarse;
};

Extrapolated extrapolated_spectrum(const Profile &U, double h, const Grid1D &grid, double cutoff,
                                   const FiberOptions &opts, bool vectors, bool gram = false) {
    check_grid(grid, h);
    Extrapolated ex;
    ex.fine = tridiagonal_spectrum(U, h, grid, cutoff, vectors, gram);
    const std::size_t m = ex.fine.values.size();
    if (m == 0)
        return ex;
    ex.coarse = tridiagonal_spectrum(U, h, half_grid(grid), cutoff, vectors, false, static_cast<lapack_int>(m));

    for (std::size_t k = 0; k < m; ++k) {
        const double lf = ex.fine.values[k];
        const double lc = ex.coarse.values[k];
        const double gap = std::abs(lf - lc);
        ex.gap = std::max(ex.gap, gap);
        if (gap > opts.richardson_tol * (1.0 + std::abs(lf)))
            throw GridTooCoarse("eigenvalue " + std::to_string(k) + " moves by " + std::to_string(gap) +
                                " between N and N/2");
        ex.values.push_back((4.0 * lf - lc) / 3.0);
    }
    if (vectors) {
        for (std::size_t k = 0; k < m; ++k) {
            const auto &dens = ex.fine.densities[k];
            const double tail = std::sqrt(std::max(dens.front(), dens.back()));
            if (tail > opts.tail_tol)
                throw DomainTooSmall("eigenfunction " + std::to_string(k) + " has |phi| = " + std::to_string(tail) +
                                     " at the boundary of [-" + std::to_string(grid.L) + ", " +
                                     std::to_string(grid.L) + "]");
        }
    }
    return ex;
}

} // namespace

void ModelParams::validate() const {
    if (!(mu > 0) || !std::isfinite(mu))
        throw ConfigError("mu", "must be positive and finite");
    if (!(h > 0 && h < 1))
        throw ConfigError("h", "must lie in (0, 1)");
    if (mu * h > 1.0)
        throw ConfigError("mu", "mu*h must not exceed 1");
    if (!(std::abs(k) <= 1.0))
        throw ConfigError("k", "|k| must not exceed 1");
    if (!std::isfinite(tau))
        throw ConfigError("tau", "must be finite");
}

Profile fiber_potential(double xi2, const ModelParams &prm) {
    const double mu = prm.mu;
    const double k = prm.k;
    return [=](double x) {
        const double s = xi2 - 0.5 * mu * x * x;
        return s * s - 1.0 - k * x;
    };
}

double FiberSpectrum::weight(std::size_t k, const Profile &psi) const {
    if (k >= eigenvalues.size() || densities.size() <= k)
        throw ConfigError("k", "no stored eigenfunction with index " + std::to_string(k));
    const Functional f = profile_functional(psi, grid, coarse_grid);
    const double wf = contract(f.fine, densities[k]);
    if (coarse_densities.size() <= k)
        return wf;
    return (4.0 * wf - contract(f.coarse, coarse_densities[k])) / 3.0;
}

FiberSpectrum solve_potential(const Profile &U, double h, const Grid1D &grid, double cutoff, const FiberOptions &opts) {
    Extrapolated ex = extrapolated_spectrum(U, h, grid, cutoff, opts, true, opts.keep_densities);
    FiberSpectrum out;
    out.grid = grid;
    out.coarse_grid = half_grid(grid);
    out.richardson_gap = ex.gap;
    std::size_t keep = 0;
    while (keep < ex.values.size() && ex.values[keep] < cutoff)
        ++keep;
    out.eigenvalues.assign(ex.values.begin(), ex.values.begin() + static_cast<long>(keep));
    if (opts.keep_densities) {
        out.densities.assign(ex.fine.densities.begin(), ex.fine.densities.begin() + static_cast<long>(keep));
        out.coarse_densities.assign(ex.coarse.densities.begin(), ex.coarse.densities.begin() + static_cast<long>(keep));
        out.gram_residual = ex.fine.gram;
    }
    return out;
}

FiberSpectrum solve_fiber(double xi2, const ModelParams &prm, const Grid1D &grid, double cutoff,
                          const FiberOptions &opts) {
    prm.validate();
    FiberSpectrum s = solve_potential(fiber_potential(xi2, prm), prm.h, grid, cutoff, opts);
    s.xi2 = xi2;
    return s;
}

Grid1D auto_grid(const Profile &U, double h, double cutoff, double x_start, double points_per_h) {
    if (!(points_per_h >= 8.0))
        throw ConfigError("points_per_h", "must be >= 8");
    const double need = cutoff + 5.0;
    double x = std::max(x_start, h);
    const double dx = 0.01 * std::max(x, 0.05);
    for (int it = 0; it < 1000000 && std::min(U(x), U(-x)) < need; ++it)
        x += dx;
    if (std::min(U(x), U(-x)) < need)
        throw DomainTooSmall("potential does not reach cutoff + 5");
    Grid1D g;
    g.L = x + 8.0 * h;
    const double max_dx = h / points_per_h;
    g.N = 256;
    while (g.spacing() > max_dx)
        g.N *= 2;
    return g;
}

LandauCount landau_count(double lambda, const ModelParams &prm) {
    LandauCount out;
    const double muh = prm.mu * prm.h;
    out.sheet_density = prm.mu / (2 * kPi * prm.h);
    if (lambda > muh)
        out.count = static_cast<long>(std::ceil((lambda / muh - 1.0) / 2.0));
    // strict inequality at the edge
    while (out.count > 0 && !((2 * (out.count - 1) + 1) * muh < lambda))
        --out.count;
    while ((2 * out.count + 1) * muh < lambda)
        ++out.count;
    return out;
}

std::pair<double, double> xi2_band(const ModelParams &prm, double support) {
    const double s = std::sqrt(1.0 + std::abs(prm.k) * support + std::abs(prm.tau));
    return {-s - 1.0, 0.5 * prm.mu * support * support + s + 1.0};
}

namespace {

struct FiberSample {
    std::vector<double> lam;
    std::vector<std::vector<double>> w; // [functional][k]
};

Grid1D band_grid(const ModelParams &prm, const std::pair<double, double> &band, double cutoff,
                 const XiQuadrature &quad) {
    // U >= cutoff + 5 for every xi2 in the band once mu x^2 / 2 clears the top
    // of the band by sqrt(cutoff + 6 + |k| x)
    double x = quad.support;
    for (int it = 0; it < 50; ++it) {
        const double need = band.second + std::sqrt(std::max(0.0, cutoff + 6.0 + std::abs(prm.k) * x));
        x = std::max(quad.support, std::sqrt(2.0 * need / prm.mu));
    }
    Grid1D g;
    g.L = x + 8.0 * prm.h;
    g.N = 256;
    while (g.spacing() > prm.h / quad.points_per_h)
        g.N *= 2;
    return g;
}

// Integral over [a, b] of the linear interpolant of (wa, wb) restricted to the
// part where the linear interpolant of (la, lb) is below E.
double below_part(double la, double lb, double wa, double wb, double E, double len) {
    const bool ia = la < E;
    const bool ib = lb < E;
    if (ia && ib)
        return 0.5 * (wa + wb) * len;
    if (!ia && !ib)
        return 0.0;
    const double t = (E - la) / (lb - la); // crossing in (0, 1)
    const double wt = wa + t * (wb - wa);
    if (ia)
        return 0.5 * (wa + wt) * t * len;
    return 0.5 * (wt + wb) * (1.0 - t) * len;
}

struct BandResult {
    std::vector<std::vector<double>> value, error;
    std::size_t fibers = 0;
};

BandResult integrate_band(const ModelParams &prm, const std::function<std::vector<Functional>(const Grid1D &, const Grid1D &)> &make,
                          const std::vector<double> &thresholds, const XiQuadrature &quad) {
    prm.validate();
    if (!(quad.support > 0))
        throw ConfigError("support", "must be positive");
    if (quad.step < 0)
        throw ConfigError("step", "must be >= 0");
    const auto band = xi2_band(prm, quad.support);
    double top = -std::numeric_limits<double>::infinity();
    for (double E : thresholds)
        top = std::max(top, E);
    const double cutoff = top + quad.cutoff_margin;
    // each fiber starts on the band grid and doubles N while the N versus N/2
    // comparison fails, at most kRefinements times
    constexpr int kRefinements = 3;
    std::vector<Grid1D> grids{band_grid(prm, band, cutoff, quad)};
    std::vector<std::vector<Functional>> funcs_at;
    for (int r = 0; r <= kRefinements; ++r) {
        if (r > 0)
            grids.push_back({grids.back().L, grids.back().N * 2});
        funcs_at.push_back(make(grids.back(), half_grid(grids.back())));
    }
    const std::size_t nfuncs = funcs_at.front().size();

    const double step = quad.step > 0 ? quad.step : 0.5 * prm.h;
    auto M = static_cast<std::size_t>(std::ceil((band.second - band.first) / step));
    M += M % 2;
    M = std::max<std::size_t>(M, 2);
    const double delta = (band.second - band.first) / static_cast<double>(M);

    std::vector<FiberSample> samples(M + 1);
    parallel_for(
        M + 1,
        [&](std::size_t i) {
            const double xi2 = band.first + static_cast<double>(i) * delta;
            const Profile U = fiber_potential(xi2, prm);
            std::size_t level = 0;
            Extrapolated ex;
            for (;; ++level) {
                try {
                    ex = extrapolated_spectrum(U, prm.h, grids[level], cutoff, quad.fiber, true);
                    break;
                } catch (const GridTooCoarse &) {
                    if (level == grids.size() - 1)
                        throw;
                }
            }
            FiberSample &s = samples[i];
            s.lam = ex.values;
            for (const auto &f : funcs_at[level]) {
                std::vector<double> wf(s.lam.size()), wc(s.lam.size());
                for (std::size_t k = 0; k < s.lam.size(); ++k) {
                    wf[k] = contract(f.fine, ex.fine.densities[k]);
                    wc[k] = contract(f.coarse, ex.coarse.densities[k]);
                }
                cluster_average(ex.fine.values, wf);
                cluster_average(ex.coarse.values, wc);
                std::vector<double> w(s.lam.size());
                for (std::size_t k = 0; k < w.size(); ++k)
                    w[k] = (4.0 * wf[k] - wc[k]) / 3.0;
                s.w.push_back(std::move(w));
            }
        },
        quad.workers);

    auto rule = [&](std::size_t stride) {
        std::vector<std::vector<double>> acc(nfuncs, std::vector<double>(thresholds.size(), 0.0));
        const double len = delta * static_cast<double>(stride);
        for (std::size_t i = 0; i + stride <= M; i += stride) {
            const FiberSample &a = samples[i];
            const FiberSample &b = samples[i + stride];
            const std::size_t kmax = std::max(a.lam.size(), b.lam.size());
            for (std::size_t k = 0; k < kmax; ++k) {
                const double la = k < a.lam.size() ? a.lam[k] : cutoff;
                const double lb = k < b.lam.size() ? b.lam[k] : cutoff;
                for (std::size_t p = 0; p < nfuncs; ++p) {
                    const double wa = k < a.lam.size() ? a.w[p][k] : 0.0;
                    const double wb = k < b.lam.size() ? b.w[p][k] : 0.0;
                    for (std::size_t j = 0; j < thresholds.size(); ++j)
                        acc[p][j] += below_part(la, lb, wa, wb, thresholds[j], len);
                }
            }
        }
        return acc;
    };
    BandResult out;
    out.value = rule(1);
    const auto coarse_rule = rule(2);
    out.error = out.value;
    for (std::size_t p = 0; p < nfuncs; ++p)
        for (std::size_t j = 0; j < thresholds.size(); ++j)
            out.error[p][j] = std::abs(out.value[p][j] - coarse_rule[p][j]);
    out.fibers = M + 1;
    return out;
}

} // namespace

BandIntegral band_integral(const ModelParams &prm, const std::vector<Profile> &profiles,
                           const std::vector<double> &thresholds, const XiQuadrature &quad) {
    auto make = [&](const Grid1D &fine, const Grid1D &coarse) {
        std::vector<Functional> f;
        for (const auto &p : profiles)
            f.push_back(profile_functional(p, fine, coarse));
        return f;
    };
    BandResult r = integrate_band(prm, make, thresholds, quad);
    return {std::move(r.value), std::move(r.error), r.fibers};
}

std::vector<DosValue> local_dos_2d(const std::vector<double> &x1, double tau, const ModelParams &prm,
                                   const XiQuadrature &quad) {
    ModelParams p = prm;
    p.tau = tau;
    auto make = [&](const Grid1D &fine, const Grid1D &coarse) {
        std::vector<Functional> f;
        for (double x : x1)
            f.push_back(point_functional(x, fine, coarse));
        return f;
    };
    const BandResult r = integrate_band(p, make, {tau}, quad);
    std::vector<DosValue> out;
    const double scale = 1.0 / (2 * kPi * prm.h);
    for (std::size_t i = 0; i < x1.size(); ++i)
        out.push_back({r.value[i][0] * scale, r.error[i][0] * scale});
    return out;
}

DosValue local_dos_2d(double x1, double tau, const ModelParams &prm, const XiQuadrature &quad) {
    return local_dos_2d(std::vector<double>{x1}, tau, prm, quad).front();
}

CountReport count_states(const Profile &psi1, double psi2_mass, const ModelParams &prm, const XiQuadrature &quad) {
    prm.validate();
    if (!(psi2_mass >= 0) || !std::isfinite(psi2_mass))
        throw ConfigError("psi2_mass", "must be finite and >= 0");
    CountReport rep;
    rep.mu = prm.mu;
    rep.h = prm.h;
    rep.k = prm.k;
    const double muh = prm.mu * prm.h;
    const double sheet = prm.mu / (2 * kPi * prm.h);

    const std::vector<double> emw = separable_emw_4d_levels(psi1, quad.support, prm.tau, prm.k, prm.mu, prm.h);
    std::vector<double> thresholds;
    // the fiber spectrum starts above -1 - |k| L_support
    const double bottom = -1.0 - std::abs(prm.k) * quad.support;
    for (int n = 0; prm.tau - (2 * n + 1) * muh > bottom; ++n)
        thresholds.push_back(prm.tau - (2 * n + 1) * muh);

    std::vector<double> counts(thresholds.size(), 0.0);
    if (!thresholds.empty() && psi2_mass > 0) {
        const BandIntegral bi = band_integral(prm, {psi1}, thresholds, quad);
        rep.fibers = bi.fibers;
        const double scale = sheet * psi2_mass / (2 * kPi * prm.h);
        for (std::size_t j = 0; j < thresholds.size(); ++j) {
            counts[j] = scale * bi.value[0][j];
            rep.quadrature_error += scale * bi.error[0][j];
        }
    }
    const std::size_t levels = std::max(counts.size(), emw.size());
    for (std::size_t n = 0; n < levels; ++n) {
        const double c = n < counts.size() ? counts[n] : 0.0;
        const double e = n < emw.size() ? psi2_mass * emw[n] : 0.0;
        rep.per_landau.emplace_back(static_cast<int>(n), c);
        rep.per_landau_emw.emplace_back(static_cast<int>(n), e);
        rep.N_count += c;
        rep.emw_integral += e;
    }
    rep.remainder = rep.N_count - rep.emw_integral;
    return rep;
}

Count2DReport count_states_2d(const Profile &psi1, const ModelParams &prm, const XiQuadrature &quad) {
    prm.validate();
    Count2DReport rep;
    rep.emw = separable_emw_2d(psi1, quad.support, prm.tau + 1.0, prm.k, prm.mu, prm.h);
    const BandIntegral bi = band_integral(prm, {psi1}, {prm.tau}, quad);
    const double scale = 1.0 / (2 * kPi * prm.h);
    rep.N = scale * bi.value[0][0];
    rep.quadrature_error = scale * bi.error[0][0];
    rep.fibers = bi.fibers;
    rep.residual = rep.N - rep.emw;
    return rep;
}

OscillatorCheck oscillator_check(double mu, double h, int n_max, double points_per_h) {
    if (!(mu > 0))
        throw ConfigError("mu", "must be positive");
    if (!(h > 0))
        throw ConfigError("h", "must be positive");
    if (n_max < 0)
        throw ConfigError("n_max", "must be >= 0");
    const double muh = mu * h;
    const Profile U = [mu](double x) { return mu * mu * x * x; };
    const double cutoff = (2 * n_max + 2) * muh;
    OscillatorCheck out;
    out.grid = auto_grid(U, h, cutoff, 0.0, points_per_h);
    const FiberSpectrum s = solve_potential(U, h, out.grid, cutoff, {1e-6, 1e-3, false});
    if (s.eigenvalues.size() < static_cast<std::size_t>(n_max + 1))
        throw DomainTooSmall("fewer than n_max + 1 eigenvalues below the cutoff");
    for (int n = 0; n <= n_max; ++n)
        out.max_rel_error = std::max(out.max_rel_error, std::abs(s.eigenvalues[n] / ((2 * n + 1) * muh) - 1.0));
    return out;
}

Profile cos2_bump(double a) {
    if (!(a > 0))
        throw ConfigError("support", "bump half-width must be positive");
    return [a](double x) {
        if (std::abs(x) >= a)
            return 0.0;
        const double c = std::cos(0.5 * kPi * x / a);
        return c * c;
    };
}

} // namespace magspec
