#include "magspec/weyl.hpp"

#include "magspec/errors.hpp"
#include "magspec/parallel.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/polygamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace magspec {

namespace {

constexpr double kPi = std::numbers::pi;

struct Sample {
    double value;
    std::int64_t signature; // Landau pair count, or -1 in the f1 -> 0 limit regime
    bool weighted;
};

} // namespace

double effective_level(const WeylInputs &in) {
    return in.convention == Convention::Halved ? 2.0 * in.tau + in.V : in.tau + in.V;
}

double weyl_density(const WeylInputs &in, DensityMode mode) {
    const double w = std::max(0.0, effective_level(in));
    const double coeff = w * w * in.sqrt_g / (32.0 * kPi * kPi);
    return mode == DensityMode::Coefficient ? coeff : coeff / std::pow(in.h, 4);
}

std::int64_t landau_pair_count(double W, double e1, double e2) {
    auto above = [&](std::int64_t m, std::int64_t n) {
        return W - (2 * m + 1) * e1 - (2 * n + 1) * e2 > 0;
    };
    std::int64_t total = 0;
    for (std::int64_t n = 0; above(0, n); ++n) {
        const double rest = W - (2 * n + 1) * e2;
        std::int64_t c = static_cast<std::int64_t>(std::ceil(0.5 * (rest / e1 - 1.0)));
        c = std::max<std::int64_t>(c, 1);
        // settle rounding at the edge with the exact predicate
        while (above(c, n))
            ++c;
        while (c > 0 && !above(c - 1, n))
            --c;
        total += c;
    }
    return total;
}

double magnetic_weyl_density(const WeylInputs &in, double f1_limit_ratio) {
    const double w = effective_level(in);
    const double muh = in.mu * in.h;
    if (!(muh > 0))
        throw ConfigError("mu*h", "must be positive");
    const double e2 = muh * in.f2;
    if (in.f1 < f1_limit_ratio * in.f2) {
        // sum over m replaced by its integral: (R / (2 mu h f1)) mu^2 h^-2 f1
        double s = 0.0;
        for (int n = 0;; ++n) {
            const double rest = w - (2 * n + 1) * e2;
            if (!(rest > 0))
                break;
            s += rest;
        }
        return s * in.mu / (2.0 * std::pow(in.h, 3)) * in.f2 * in.sqrt_g / (4.0 * kPi * kPi);
    }
    const auto count = landau_pair_count(w, muh * in.f1, e2);
    return static_cast<double>(count) * in.mu * in.mu / (in.h * in.h) * in.f1 * in.f2 * in.sqrt_g / (4.0 * kPi * kPi);
}

QuadratureResult magnetic_weyl_integral(const FieldModel &model, const std::function<double(const Point4 &)> &psi,
                                        double tau, const QuadratureConfig &cfg) {
    for (int d = 0; d < 4; ++d)
        if (cfg.cells[d] < 1)
            throw ConfigError("cells", "every axis needs at least one cell");
    if (cfg.max_depth < 1)
        throw ConfigError("max_depth", "must be >= 1");

    auto sample = [&](const Vec4 &x) -> Sample {
        const Point4 p = Point4::from(x);
        const double w = psi(p);
        const Mat4 g = model.metric(p);
        const FieldInvariants inv = field_invariants(g, model.form(p));
        WeylInputs in;
        in.V = model.scalar(p);
        in.f1 = inv.f1;
        in.f2 = inv.f2;
        in.sqrt_g = 1.0 / std::sqrt(g.determinant());
        in.tau = tau;
        in.mu = model.mu;
        in.h = model.h;
        in.convention = cfg.convention;
        std::int64_t sig = -1;
        if (inv.f1 >= kF1LimitRatio * inv.f2)
            sig = landau_pair_count(effective_level(in), model.mu * model.h * in.f1, model.mu * model.h * in.f2);
        const double dens = w == 0.0 ? 0.0 : magnetic_weyl_density(in);
        return {dens * w, sig, w != 0.0};
    };

    // Trapezoid on one cell; split along the axes whose edges cross a Landau
    // threshold until max_depth.
    std::function<double(const Vec4 &, const Vec4 &, int, int, std::size_t &)> cell;
    cell = [&](const Vec4 &lo, const Vec4 &hi, int depth, int max_depth, std::size_t &leaves) -> double {
        std::array<Sample, 16> s;
        for (int c = 0; c < 16; ++c) {
            Vec4 x;
            for (int d = 0; d < 4; ++d)
                x[d] = (c >> d) & 1 ? hi[d] : lo[d];
            s[c] = sample(x);
        }
        int split = 0;
        if (depth < max_depth) {
            for (int d = 0; d < 4; ++d)
                for (int c = 0; c < 16; ++c)
                    if (!((c >> d) & 1) && (s[c].weighted || s[c | (1 << d)].weighted) &&
                        s[c].signature != s[c | (1 << d)].signature) {
                        split |= 1 << d;
                        break;
                    }
        }
        if (split == 0) {
            ++leaves;
            double acc = 0.0;
            for (const auto &v : s)
                acc += v.value;
            return acc / 16.0 * (hi - lo).prod();
        }
        const Vec4 mid = 0.5 * (lo + hi);
        double acc = 0.0;
        for (int child = 0; child < 16; ++child) {
            if (child & ~split)
                continue;
            Vec4 clo = lo, chi = hi;
            for (int d = 0; d < 4; ++d) {
                if (!((split >> d) & 1))
                    continue;
                if ((child >> d) & 1)
                    clo[d] = mid[d];
                else
                    chi[d] = mid[d];
            }
            acc += cell(clo, chi, depth + 1, max_depth, leaves);
        }
        return acc;
    };

    const std::size_t ncells =
        static_cast<std::size_t>(cfg.cells[0]) * cfg.cells[1] * cfg.cells[2] * cfg.cells[3];
    auto run = [&](int max_depth, std::size_t &leaves_total) {
        std::vector<std::size_t> leaves(ncells, 0);
        const auto parts = parallel_map(
            ncells,
            [&](std::size_t idx) {
                Vec4 lo, hi;
                std::size_t rem = idx;
                for (int d = 0; d < 4; ++d) {
                    const int i = static_cast<int>(rem % cfg.cells[d]);
                    rem /= cfg.cells[d];
                    const double w = 2.0 * cfg.half_width / cfg.cells[d];
                    lo[d] = -cfg.half_width + i * w;
                    hi[d] = lo[d] + w;
                }
                return cell(lo, hi, 0, max_depth, leaves[idx]);
            },
            cfg.workers);
        leaves_total = 0;
        for (auto l : leaves)
            leaves_total += l;
        return ordered_sum(parts);
    };

    QuadratureResult out;
    std::size_t coarse_leaves = 0;
    const double coarse = run(cfg.max_depth - 1, coarse_leaves);
    out.value = run(cfg.max_depth, out.leaf_cells);
    out.error = std::abs(out.value - coarse);
    if (out.error > cfg.rel_tol * std::max(std::abs(out.value), cfg.abs_floor))
        throw QuadratureNotConverged("magnetic Weyl quadrature moved by " + std::to_string(out.error) +
                                     " at the last refinement level (value " + std::to_string(out.value) + ")");
    return out;
}

double separable_emw_2d(const std::function<double(double)> &psi1, double support, double level, double k,
                        double mu, double h) {
    if (!(support > 0))
        throw ConfigError("support", "must be positive");
    const double muh = mu * h;
    const double x_small = 1e-3 * support;
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    double total = 0.0;
    for (const double side : {1.0, -1.0}) {
        auto g = [&](double y) { return y * psi1(side * y); };
        auto piece = [&](double a, double b) { return b > a ? GK::integrate(g, a, b, 3, 1e-13) : 0.0; };
        // level m occupies {y in [0, S] : level + c_m y > 0}, c_m = side k - (2m+1) mu h
        for (long m = 0;; ++m) {
            const double c = side * k - (2 * m + 1) * muh;
            if (c >= 0) {
                if (level > 0)
                    total += piece(0.0, support);
                else if (c > 0)
                    total += piece(std::min(support, -level / c), support);
                continue;
            }
            if (level <= 0)
                break;
            const double X = level / -c;
            if (X >= x_small) {
                total += piece(0.0, std::min(X, support));
                continue;
            }
            // remaining levels: integral over [0, X] is psi(0) X^2/2 + side psi'(0) X^3/3 + O(X^4)
            const double d = 1e-5 * support;
            const double p0 = psi1(0.0);
            const double p1 = (psi1(d) - psi1(-d)) / (2 * d);
            const double scale = level / (2 * muh);
            const double z = m + (muh - side * k) / (2 * muh);
            const double s2 = scale * scale * boost::math::trigamma(z);
            const double s3 = scale * scale * scale * -0.5 * boost::math::polygamma(2, z);
            total += 0.5 * p0 * s2 + side * p1 * s3 / 3.0;
            break;
        }
    }
    return total * mu / (2 * kPi * h);
}

std::vector<double> separable_emw_4d_levels(const std::function<double(double)> &psi1, double support, double tau,
                                            double k, double mu, double h) {
    std::vector<double> out;
    const double muh = mu * h;
    const double top = tau + 1.0 + std::abs(k) * support;
    for (int n = 0; top - (2 * n + 1) * muh > 0; ++n)
        out.push_back(mu / (2 * kPi * h) *
                      separable_emw_2d(psi1, support, tau + 1.0 - (2 * n + 1) * muh, k, mu, h));
    return out;
}

int active_levels(double V, double f2, double mu_h) {
    int n = 0;
    while (V - (2 * n + 1) * f2 * mu_h > 0)
        ++n;
    return n;
}

double correction_density(const CorrectionParams &params, double V, double f2, double mu, double h) {
    const double hbar = std::sqrt(mu) * h;
    if (!(hbar < 1.0))
        throw ConfigError("hbar", "sqrt(mu) h must be < 1");
    if (!(V > 0.0))
        throw ConfigError("V", "must be positive");
    if (!params.G)
        throw ConfigError("G", "correction profile is required");
    const double muh = mu * h;
    double s = 0.0;
    for (int n = 0;; ++n) {
        const double base = V - (2 * n + 1) * f2 * muh;
        if (!(base > 0))
            break;
        const double arg = params.S0 * std::pow(base, 0.75) / std::sqrt(params.phi) / (2.0 * kPi * hbar);
        s += std::pow(base, 0.125) * std::pow(params.phi, 0.25) * params.G(arg);
    }
    return std::pow(2.0 * kPi, -1.5) * mu / (h * h) * std::sqrt(hbar) / std::sqrt(params.kappa) * s * f2 *
           std::sqrt(params.g_prime);
}

double oscillatory_sum(double eps, double hbar, const CorrectionParams &params, double V, double phi, double f2,
                       double sqrt_gp) {
    if (!(hbar > 0 && hbar <= eps && eps <= 1.0))
        throw ConfigError("eps", "need 0 < hbar <= eps <= 1");
    if (!params.G)
        throw ConfigError("G", "correction profile is required");
    double s = 0.0;
    for (int n = 0;; ++n) {
        const double base = V - (2 * n + 1) * f2 * eps;
        if (!(base > 0))
            break;
        const double arg = params.S0 * std::pow(base, 0.75) / std::sqrt(phi) / (2.0 * kPi * hbar);
        s += std::pow(base, 0.125) * std::pow(phi, 0.25) * params.G(arg) * f2 * sqrt_gp;
    }
    return s * eps;
}

GTable::GTable(std::vector<std::pair<double, double>> rows, bool periodic)
    : rows_(std::move(rows)), periodic_(periodic) {
    if (rows_.empty())
        throw ConfigError("G", "profile table is empty");
    std::sort(rows_.begin(), rows_.end());
    if (periodic_ && rows_.size() < 2)
        throw ConfigError("G", "a periodic table needs at least two rows");
}

GTable GTable::load(const std::string &path, bool periodic) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("G", "cannot open profile table " + path);
    std::vector<std::pair<double, double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        for (auto &ch : line)
            if (ch == ',')
                ch = ' ';
        std::istringstream ss(line);
        double a, v;
        if (!(ss >> a))
            continue;
        if (!(ss >> v))
            throw MalformedRecord(path + ":" + std::to_string(lineno) + ": expected two columns");
        rows.emplace_back(a, v);
    }
    return GTable(std::move(rows), periodic);
}

double GTable::operator()(double x) const {
    const double lo = rows_.front().first;
    const double hi = rows_.back().first;
    if (periodic_ && hi > lo) {
        const double span = hi - lo;
        x = lo + std::fmod(std::fmod(x - lo, span) + span, span);
    }
    if (x <= lo)
        return rows_.front().second;
    if (x >= hi)
        return rows_.back().second;
    auto it = std::upper_bound(rows_.begin(), rows_.end(), x,
                               [](double v, const std::pair<double, double> &r) { return v < r.first; });
    const auto &b = *it;
    const auto &a = *(it - 1);
    const double t = (x - a.first) / (b.first - a.first);
    return a.second + t * (b.second - a.second);
}

NondegReport nondegeneracy_diagnostic(const SurfaceFn &surface, const Eigen::Vector3d &point, double mu, double h,
                                      double eps0, double eps, double fd_step) {
    auto ratio = [&](const Eigen::Vector3d &y) {
        const auto [v, f2] = surface(y);
        return v / f2;
    };
    const double d = fd_step;
    const double c0 = ratio(point);
    Eigen::Vector3d grad;
    Eigen::Matrix3d hess;
    for (int a = 0; a < 3; ++a) {
        Eigen::Vector3d ea = Eigen::Vector3d::Zero();
        ea[a] = d;
        const double fp = ratio(point + ea);
        const double fm = ratio(point - ea);
        grad[a] = (fp - fm) / (2 * d);
        hess(a, a) = (fp - 2 * c0 + fm) / (d * d);
        for (int b = a + 1; b < 3; ++b) {
            Eigen::Vector3d eb = Eigen::Vector3d::Zero();
            eb[b] = d;
            const double v = (ratio(point + ea + eb) - ratio(point + ea - eb) - ratio(point - ea + eb) +
                              ratio(point - ea - eb)) /
                             (4 * d * d);
            hess(a, b) = hess(b, a) = v;
        }
    }
    NondegReport out;
    out.grad_norm = grad.norm();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(hess, Eigen::EigenvaluesOnly);
    for (int a = 0; a < 3; ++a) {
        out.hess_eigs[a] = es.eigenvalues()[a];
        if (std::abs(out.hess_eigs[a]) >= eps0)
            ++out.q_class;
    }
    // nearest Landau ratio (2n+1) mu h, n >= 0
    const double muh = mu * h;
    const double nstar = std::max(0.0, std::floor(0.5 * (c0 / muh - 1.0)));
    double best = std::abs(c0 - muh);
    for (double n : {nstar, nstar + 1.0})
        best = std::min(best, std::abs(c0 - (2 * n + 1) * muh));
    out.L = eps * out.grad_norm + best;
    return out;
}

} // namespace magspec
