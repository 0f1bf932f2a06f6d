#include "magspec/cli.hpp"

#include "magspec/dynamics.hpp"
#include "magspec/errors.hpp"
#include "magspec/geometry.hpp"
#include "magspec/harness.hpp"
#include "magspec/io.hpp"
#include "magspec/spectra.hpp"
#include "magspec/weyl.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace magspec::cli {

using nlohmann::json;

struct FieldOpts {
    double x1 = 0, x2 = 0, x3 = 0, x4 = 0;
    double mu = 4, h = 0.1, rho = 1;
    std::optional<double> line_s;
    std::string out;
};

struct DynamicsOpts {
    bool k_star = false;
    bool adiabatic = false;
    std::string scenario;
    double rho = 1;
    double x1 = 0.1, x2 = 0, x3 = 0.3, x4 = 0;
    double p1 = 0.6, p2 = 0, p3 = 0, p4 = 0.8;
    double mu = 100, h = 0.01, T = 1, tol = 1e-9;
    std::string method = "adaptive";
    double sample_dt = 0;
    double gamma = 0.1, r = 0.3, energy = 1;
    std::size_t n = 16;
    std::uint64_t seed = 42;
    std::string out;
};

struct SpectrumOpts {
    bool validate_oscillator = false;
    bool count = false;
    bool count_2d = false;
    std::optional<double> xi2;
    std::vector<double> dos;
    int n_max = 20;
    double mu = 4, h = 0, k = 0, tau = 0;
    double support = 0.5, psi2_mass = 1, step = 0, points_per_h = 8;
    unsigned workers = 0;
    std::string out;
};

struct WeylOpts {
    std::string density;
    bool correction = false;
    bool oscillatory = false;
    bool coefficient = false;
    double V = 1, f1 = 0, f2 = 1, sqrt_g = 1, tau = 0, mu = 1, h = 0;
    std::string convention = "halved";
    std::string g_table;
    bool periodic = false;
    double S0 = 1, kappa = 1, phi = 1, g_prime = 1;
    double eps = 0, hbar = 0;
};

struct SweepOpts {
    std::string config;
    std::string mode = "counts";
    std::string records, summary, out;
    std::optional<unsigned> workers;
};

struct ReportOpts {
    std::string records;
    std::string out_dir;
    std::string kind = "sweep";
};

struct Options {
    FieldOpts field;
    DynamicsOpts dynamics;
    SpectrumOpts spectrum;
    WeylOpts weyl;
    SweepOpts sweep;
    ReportOpts report;
    CLI::App *field_cmd = nullptr, *dynamics_cmd = nullptr, *spectrum_cmd = nullptr;
    CLI::App *weyl_cmd = nullptr, *sweep_cmd = nullptr, *report_cmd = nullptr;
};

namespace {

std::string fmt(double x, int digits = 10) {
    std::ostringstream os;
    os << std::setprecision(digits) << x;
    return os.str();
}

void build(CLI::App &app, Options &o) {
    // -h would collide with the --h option
    app.set_help_flag("--help", "Print this help message and exit");
    app.require_subcommand(1, 1);
    app.fallthrough(false);

    auto *f = app.add_subcommand("field", "Field invariants, Pfaffian and zone at a point of the Martinet model");
    o.field_cmd = f;
    f->add_option("--x1", o.field.x1, "coordinate x1");
    f->add_option("--x2", o.field.x2, "coordinate x2");
    f->add_option("--x3", o.field.x3, "coordinate x3");
    f->add_option("--x4", o.field.x4, "coordinate x4");
    f->add_option("--mu", o.field.mu, "field strength mu (> 1)")->capture_default_str();
    f->add_option("--h", o.field.h, "semiclassical parameter h")->capture_default_str();
    f->add_option("--rho", o.field.rho, "momentum scale |Z1| for the zone")->capture_default_str();
    f->add_option("--line-s", o.field.line_s, "also follow the magnetic line by this angle");
    f->add_option("--out", o.field.out, "JSON output file");

    auto *d = app.add_subcommand("dynamics", "Trajectories, confinement ensembles, adiabatic drift and k*");
    o.dynamics_cmd = d;
    d->add_flag("--k-star", o.dynamics.k_star, "compute the cusp drift-null constant");
    d->add_flag("--adiabatic", o.dynamics.adiabatic, "ensemble windowed drift of |Z2|^2");
    d->add_option("--scenario", o.dynamics.scenario, "confinement scenario")
        ->check(CLI::IsMember({"i", "ii", "iii", "iv", "v"}));
    d->add_option("--rho", o.dynamics.rho, "energy-shell radius for --k-star")->capture_default_str();
    d->add_option("--x1", o.dynamics.x1, "start x1")->capture_default_str();
    d->add_option("--x2", o.dynamics.x2, "start x2")->capture_default_str();
    d->add_option("--x3", o.dynamics.x3, "start x3")->capture_default_str();
    d->add_option("--x4", o.dynamics.x4, "start x4")->capture_default_str();
    d->add_option("--p1", o.dynamics.p1, "start kinetic momentum p1")->capture_default_str();
    d->add_option("--p2", o.dynamics.p2, "start kinetic momentum p2")->capture_default_str();
    d->add_option("--p3", o.dynamics.p3, "start kinetic momentum p3")->capture_default_str();
    d->add_option("--p4", o.dynamics.p4, "start kinetic momentum p4")->capture_default_str();
    d->add_option("--mu", o.dynamics.mu, "field strength mu")->capture_default_str();
    d->add_option("--h", o.dynamics.h, "semiclassical parameter h")->capture_default_str();
    d->add_option("--T", o.dynamics.T, "time horizon (negative: backwards)")->capture_default_str();
    d->add_option("--tol", o.dynamics.tol, "integrator tolerance")->capture_default_str();
    d->add_option("--method", o.dynamics.method, "integrator")
        ->check(CLI::IsMember({"adaptive", "symplectic"}))
        ->capture_default_str();
    d->add_option("--sample-dt", o.dynamics.sample_dt, "sampling interval (0: every step)");
    d->add_option("--gamma", o.dynamics.gamma, "ensemble |x1|")->capture_default_str();
    d->add_option("--r", o.dynamics.r, "ensemble distance to Lambda")->capture_default_str();
    d->add_option("--energy", o.dynamics.energy, "ensemble kinetic energy |p|^2")->capture_default_str();
    d->add_option("--n", o.dynamics.n, "ensemble size")->capture_default_str();
    d->add_option("--seed", o.dynamics.seed, "ensemble seed")->capture_default_str();
    d->add_option("--out", o.dynamics.out, "CSV output file");

    auto *s = app.add_subcommand("spectrum", "Fiber spectra, local density of states and localized counts");
    o.spectrum_cmd = s;
    s->add_flag("--validate-oscillator", o.spectrum.validate_oscillator, "compare with (2n+1) mu h for U = mu^2 x^2");
    s->add_flag("--count", o.spectrum.count, "localized count of the 4D separable model");
    s->add_flag("--count-2d", o.spectrum.count_2d, "localized count of the 2D factor");
    s->add_option("--xi2", o.spectrum.xi2, "eigenvalues of a single fiber");
    s->add_option("--dos", o.spectrum.dos, "local density of states at these x1")->delimiter(',');
    s->add_option("--n-max", o.spectrum.n_max, "highest oscillator level checked")->capture_default_str();
    s->add_option("--mu", o.spectrum.mu, "field strength mu")->capture_default_str();
    s->add_option("--h", o.spectrum.h, "semiclassical parameter h")->required();
    s->add_option("--k", o.spectrum.k, "slope of V = 1 + k x1")->capture_default_str();
    s->add_option("--tau", o.spectrum.tau, "spectral parameter")->capture_default_str();
    s->add_option("--support", o.spectrum.support, "half-width of the cos^2 weight")->capture_default_str();
    s->add_option("--psi2-mass", o.spectrum.psi2_mass, "mass of the transverse weight")->capture_default_str();
    s->add_option("--step", o.spectrum.step, "xi2 node spacing (0: h/2)")->capture_default_str();
    s->add_option("--points-per-h", o.spectrum.points_per_h, "fiber grid resolution")->capture_default_str();
    s->add_option("--workers", o.spectrum.workers, "worker threads (0: budget)")->capture_default_str();
    s->add_option("--out", o.spectrum.out, "output file (CSV or JSON)");

    auto *w = app.add_subcommand("weyl", "Weyl and magnetic Weyl densities, correction term, oscillatory sum");
    o.weyl_cmd = w;
    w->add_option("--density", o.weyl.density, "density kind")->check(CLI::IsMember({"plain", "magnetic"}));
    w->add_flag("--correction", o.weyl.correction, "surface correction density (needs --G-table)");
    w->add_flag("--oscillatory", o.weyl.oscillatory, "oscillatory sum I(eps, hbar) (needs --G-table)");
    w->add_flag("--coefficient", o.weyl.coefficient, "plain density without the h^-4 factor");
    w->add_option("--V", o.weyl.V, "scalar potential V")->capture_default_str();
    w->add_option("--f1", o.weyl.f1, "field intensity f1")->capture_default_str();
    w->add_option("--f2", o.weyl.f2, "field intensity f2")->capture_default_str();
    w->add_option("--sqrt-g", o.weyl.sqrt_g, "metric factor")->capture_default_str();
    w->add_option("--tau", o.weyl.tau, "spectral parameter")->capture_default_str();
    w->add_option("--mu", o.weyl.mu, "field strength mu")->capture_default_str();
    w->add_option("--h", o.weyl.h, "semiclassical parameter h")->required();
    w->add_option("--convention", o.weyl.convention, "spectral parameter convention")
        ->check(CLI::IsMember({"halved", "model"}))
        ->capture_default_str();
    w->add_option("--G-table", o.weyl.g_table, "two-column table of the profile G");
    w->add_flag("--periodic", o.weyl.periodic, "treat the G table as periodic");
    w->add_option("--S0", o.weyl.S0, "phase constant")->capture_default_str();
    w->add_option("--kappa", o.weyl.kappa, "correction prefactor")->capture_default_str();
    w->add_option("--phi", o.weyl.phi, "edge slope")->capture_default_str();
    w->add_option("--g-prime", o.weyl.g_prime, "metric factor g'")->capture_default_str();
    w->add_option("--eps", o.weyl.eps, "level spacing parameter of the oscillatory sum");
    w->add_option("--hbar", o.weyl.hbar, "effective Planck constant of the oscillatory sum");

    auto *sw = app.add_subcommand("sweep", "Parameter sweeps, correction profile, resonant-k experiment");
    o.sweep_cmd = sw;
    sw->add_option("--config", o.sweep.config, "JSON sweep configuration")->required();
    sw->add_option("--mode", o.sweep.mode, "what to run")
        ->check(CLI::IsMember({"counts", "correction", "necessity"}))
        ->capture_default_str();
    sw->add_option("--records", o.sweep.records, "override output.records");
    sw->add_option("--summary", o.sweep.summary, "override output.summary");
    sw->add_option("--out", o.sweep.out, "JSON-lines output of the correction and necessity modes");
    sw->add_option("--workers", o.sweep.workers, "override workers");

    auto *r = app.add_subcommand("report", "Summaries and plot data from stored records");
    o.report_cmd = r;
    r->add_option("--records", o.report.records, "JSON-lines records file")->required();
    r->add_option("--out-dir", o.report.out_dir, "output directory")->required();
    r->add_option("--kind", o.report.kind, "record kind")
        ->check(CLI::IsMember({"sweep", "correction"}))
        ->capture_default_str();
}

Point4 point(double a, double b, double c, double d) {
    Point4 p;
    p.x1 = a;
    p.x2 = b;
    p.x3 = c;
    p.x4 = d;
    return p;
}

std::string path_join(const std::string &dir, const std::string &name) {
    return (std::filesystem::path(dir) / name).string();
}

int run_field(const FieldOpts &o, std::ostream &out) {
    const FieldModel m = martinet_model(o.mu, o.h);
    const Point4 p = point(o.x1, o.x2, o.x3, o.x4);
    const FieldInvariants inv = field_invariants(p, m);
    const ZoneReport z = classify_zone(p, o.rho, m);
    const double pf = pfaffian(two_form(p));
    json j = {{"f1", inv.f1},       {"f2", inv.f2},   {"pfaffian", pf},
              {"gamma", z.gamma},   {"r", z.r},       {"zone", std::string(to_string(z.label))},
              {"near_degenerate", inv.near_degenerate}};
    out << "f1 " << fmt(inv.f1) << "\nf2 " << fmt(inv.f2) << "\npfaffian " << fmt(pf) << "\nzone "
        << to_string(z.label) << " (gamma " << fmt(z.gamma) << ", r " << fmt(z.r) << ")\n";
    if (o.line_s) {
        const Point4 q = magnetic_line(p, *o.line_s);
        j["line_point"] = {q.x1, q.x2, q.x3, q.x4};
        out << "line point " << fmt(q.x1) << ' ' << fmt(q.x2) << ' ' << fmt(q.x3) << ' ' << fmt(q.x4) << '\n';
    }
    if (!o.out.empty())
        io::atomic_write(o.out, j.dump(2) + '\n');
    return 0;
}

Scenario parse_scenario(const std::string &s) {
    static const std::map<std::string, Scenario> table = {
        {"i", Scenario::I}, {"ii", Scenario::II}, {"iii", Scenario::III}, {"iv", Scenario::IV}, {"v", Scenario::V}};
    return table.at(s);
}

int run_dynamics(const DynamicsOpts &o, std::ostream &out) {
    if (o.k_star) {
        out << "k* " << fmt(compute_k_star(o.rho), 14) << '\n';
        return 0;
    }
    const FieldModel m = martinet_model(o.mu, o.h);
    if (!o.scenario.empty()) {
        const Scenario sc = parse_scenario(o.scenario);
        const auto ens = scenario_ensemble(o.n, o.gamma, o.r, m, o.seed, o.energy);
        ConfinementConfig cfg;
        cfg.flow.tol = o.tol;
        const ConfinementReport rep = confinement_report(ens, m, o.gamma, o.r, sc, cfg);
        out << "scenario " << to_string(sc) << ": T " << fmt(rep.T) << ", " << rep.passed << "/" << rep.total
            << " confined (" << fmt(rep.pass_fraction, 4) << ")\n";
        if (!o.out.empty()) {
            std::string csv = "trajectory,confined\n";
            for (std::size_t i = 0; i < rep.pass.size(); ++i)
                csv += std::to_string(i) + ',' + std::to_string(rep.pass[i]) + '\n';
            io::atomic_write(o.out, csv);
        }
        return 0;
    }
    if (o.adiabatic) {
        const auto ens = scenario_ensemble(o.n, o.gamma, o.r, m, o.seed, o.energy);
        out << "mean windowed drift of |Z2|^2 " << fmt(ensemble_z2_drift(ens, m, o.T, o.tol)) << '\n';
        return 0;
    }
    Vec4 p;
    p << o.p1, o.p2, o.p3, o.p4;
    const PhasePoint s0 = from_kinetic(point(o.x1, o.x2, o.x3, o.x4), p, m);
    FlowOptions fo;
    fo.tol = o.tol;
    fo.method = o.method == "symplectic" ? Integrator::Symplectic : Integrator::Adaptive;
    fo.sample_dt = o.sample_dt;
    const Trajectory tr = integrate_flow(s0, m, o.T, fo);
    double drift = 0;
    for (double e : tr.energy)
        drift = std::max(drift, std::abs(e - tr.energy.front()));
    out << "steps " << tr.steps << " (rejected " << tr.rejected << "), samples " << tr.times.size()
        << ", max energy drift " << fmt(drift, 4) << '\n';
    if (!o.out.empty()) {
        std::ostringstream csv;
        csv << "t,x1,x2,x3,x4,xi1,xi2,xi3,xi4,H\n";
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
            const auto &st = tr.states[i];
            csv << io::format_double(tr.times[i]) << ',' << io::format_double(st.q.x1) << ','
                << io::format_double(st.q.x2) << ',' << io::format_double(st.q.x3) << ','
                << io::format_double(st.q.x4);
            for (int k = 0; k < 4; ++k)
                csv << ',' << io::format_double(st.p(k));
            csv << ',' << io::format_double(tr.energy[i]) << '\n';
        }
        io::atomic_write(o.out, csv.str());
    }
    return 0;
}

int run_spectrum(const SpectrumOpts &o, std::ostream &out) {
    const int modes = int(o.validate_oscillator) + int(o.count) + int(o.count_2d) + int(o.xi2.has_value()) +
                      int(!o.dos.empty());
    if (modes != 1)
        throw ConfigError("mode", "give exactly one of --validate-oscillator, --count, --count-2d, --xi2, --dos");
    if (o.validate_oscillator) {
        const OscillatorCheck c = oscillator_check(o.mu, o.h, o.n_max);
        out << "max relative eigenvalue error " << fmt(c.max_rel_error, 4) << " (n <= " << o.n_max << ", N "
            << c.grid.N << ")\n";
        return 0;
    }
    ModelParams prm;
    prm.mu = o.mu;
    prm.h = o.h;
    prm.k = o.k;
    prm.tau = o.tau;
    prm.validate();
    XiQuadrature q;
    q.step = o.step;
    q.support = o.support;
    q.points_per_h = o.points_per_h;
    q.workers = o.workers;
    if (o.xi2) {
        const Profile U = fiber_potential(*o.xi2, prm);
        const double cutoff = o.tau + 1.0;
        const double x0 = std::sqrt(2.0 * std::max(*o.xi2, 0.0) / prm.mu);
        Grid1D grid = auto_grid(U, prm.h, cutoff, x0, o.points_per_h);
        FiberSpectrum fs;
        // same refinement as the band quadrature: up to three doublings
        for (int level = 0;; ++level) {
            try {
                fs = solve_fiber(*o.xi2, prm, grid, cutoff);
                break;
            } catch (const GridTooCoarse &) {
                if (level == 3)
                    throw;
                grid.N *= 2;
            }
        }
        out << fs.eigenvalues.size() << " eigenvalues below " << fmt(cutoff) << '\n';
        std::string csv = "n,lambda\n";
        for (std::size_t i = 0; i < fs.eigenvalues.size(); ++i) {
            csv += std::to_string(i) + ',' + io::format_double(fs.eigenvalues[i]) + '\n';
            if (i < 10)
                out << "  " << i << ' ' << fmt(fs.eigenvalues[i], 12) << '\n';
        }
        if (!o.out.empty())
            io::atomic_write(o.out, csv);
        return 0;
    }
    if (!o.dos.empty()) {
        const auto vals = local_dos_2d(o.dos, o.tau, prm, q);
        std::string csv = "x1,e,error\n";
        for (std::size_t i = 0; i < vals.size(); ++i) {
            out << "e(" << fmt(o.dos[i]) << ") = " << fmt(vals[i].value) << " +- " << fmt(vals[i].error, 3) << '\n';
            csv += io::format_double(o.dos[i]) + ',' + io::format_double(vals[i].value) + ',' +
                   io::format_double(vals[i].error) + '\n';
        }
        if (!o.out.empty())
            io::atomic_write(o.out, csv);
        return 0;
    }
    if (o.count_2d) {
        const Count2DReport r = count_states_2d(cos2_bump(o.support), prm, q);
        out << "N " << fmt(r.N) << "\nEMW " << fmt(r.emw) << "\nresidual " << fmt(r.residual) << " (quadrature "
            << fmt(r.quadrature_error, 3) << ")\n";
        if (!o.out.empty())
            io::atomic_write(o.out, json({{"mu", prm.mu},
                                          {"h", prm.h},
                                          {"k", prm.k},
                                          {"N", r.N},
                                          {"EMW", r.emw},
                                          {"residual", r.residual},
                                          {"quadrature_error", r.quadrature_error}})
                                            .dump(2) +
                                        '\n');
        return 0;
    }
    const CountReport r = count_states(cos2_bump(o.support), o.psi2_mass, prm, q);
    out << "N " << fmt(r.N_count) << "\nEMW " << fmt(r.emw_integral) << "\nremainder " << fmt(r.remainder)
        << " (quadrature " << fmt(r.quadrature_error, 3) << ", " << r.fibers << " fibers)\n";
    if (!o.out.empty()) {
        json per = json::array();
        for (std::size_t i = 0; i < r.per_landau.size(); ++i)
            per.push_back({{"n", r.per_landau[i].first},
                           {"N", r.per_landau[i].second},
                           {"EMW", r.per_landau_emw[i].second}});
        io::atomic_write(o.out, json({{"mu", r.mu},
                                      {"h", r.h},
                                      {"k", r.k},
                                      {"N", r.N_count},
                                      {"EMW", r.emw_integral},
                                      {"remainder", r.remainder},
                                      {"quadrature_error", r.quadrature_error},
                                      {"per_landau", per}})
                                        .dump(2) +
                                    '\n');
    }
    return 0;
}

int run_weyl(const WeylOpts &o, std::ostream &out) {
    const int modes = int(!o.density.empty()) + int(o.correction) + int(o.oscillatory);
    if (modes != 1)
        throw ConfigError("mode", "give exactly one of --density, --correction, --oscillatory");
    WeylInputs in;
    in.V = o.V;
    in.f1 = o.f1;
    in.f2 = o.f2;
    in.sqrt_g = o.sqrt_g;
    in.tau = o.tau;
    in.mu = o.mu;
    in.h = o.h;
    in.convention = o.convention == "model" ? Convention::Model : Convention::Halved;
    if (o.density == "plain") {
        out << fmt(weyl_density(in, o.coefficient ? DensityMode::Coefficient : DensityMode::Density)) << '\n';
        return 0;
    }
    if (o.density == "magnetic") {
        out << fmt(magnetic_weyl_density(in)) << '\n';
        return 0;
    }
    if (o.g_table.empty())
        throw ConfigError("G-table", "required for --correction and --oscillatory");
    CorrectionParams cp;
    cp.G = GTable::load(o.g_table, o.periodic);
    cp.S0 = o.S0;
    cp.kappa = o.kappa;
    cp.phi = o.phi;
    cp.g_prime = o.g_prime;
    if (o.correction) {
        out << fmt(correction_density(cp, o.V, o.f2, o.mu, o.h)) << '\n';
        return 0;
    }
    out << fmt(oscillatory_sum(o.eps, o.hbar, cp, o.V, o.phi, o.f2, std::sqrt(o.g_prime))) << '\n';
    return 0;
}

int run_sweep_cmd(const SweepOpts &o, std::ostream &out) {
    SweepConfig cfg = load_sweep_config(o.config);
    if (!o.records.empty())
        cfg.records_path = o.records;
    if (!o.summary.empty())
        cfg.summary_path = o.summary;
    if (o.workers)
        cfg.quad.workers = *o.workers;
    if (o.mode == "counts") {
        const auto recs = run_sweep(cfg);
        out << recs.size() << " cells\n";
        for (const auto &r : recs)
            out << "  h " << fmt(r.h, 6) << " mu " << fmt(r.mu, 6) << " k " << fmt(r.k, 6) << "  remainder "
                << fmt(r.remainder, 6) << "  ratio " << fmt(r.ratio, 4) << (r.error.empty() ? "" : "  error: ")
                << r.error << '\n';
        return 0;
    }
    std::string lines;
    if (o.mode == "correction") {
        const CorrectionProfile prof = extract_correction_2d(cfg);
        for (const auto &s : prof.samples) {
            lines += to_json(s).dump() + '\n';
            out << "  h " << fmt(s.h, 6) << " mu " << fmt(s.mu, 6) << "  phase " << fmt(s.phase, 6)
                << "  normalized residual " << fmt(s.normalized, 4) << '\n';
        }
    } else {
        for (const auto &row : necessity_experiment_a3(cfg)) {
            lines += to_json(row).dump() + '\n';
            out << "  " << row.label << ": mu h " << fmt(row.record.mu * row.record.h, 6) << " k "
                << fmt(row.record.k, 6) << "  remainder / (mu^2 h^-2) " << fmt(row.ratio_mu2h2, 4)
                << (row.record.error.empty() ? "" : "  error: ") << row.record.error << '\n';
        }
    }
    if (!o.out.empty())
        io::atomic_write(o.out, lines);
    return 0;
}

int run_report(const ReportOpts &o, std::ostream &out) {
    if (o.kind == "correction") {
        auto samples = load_correction_samples(o.records);
        std::stable_sort(samples.begin(), samples.end(),
                         [](const CorrectionSample &a, const CorrectionSample &b) { return a.phase < b.phase; });
        std::vector<std::pair<double, double>> rows;
        std::string csv = "phase,normalized,h,mu,residual\n";
        for (const auto &s : samples) {
            rows.emplace_back(s.phase, s.normalized);
            csv += io::format_double(s.phase) + ',' + io::format_double(s.normalized) + ',' + io::format_double(s.h) +
                   ',' + io::format_double(s.mu) + ',' + io::format_double(s.residual) + '\n';
        }
        io::atomic_write(path_join(o.out_dir, "summary.csv"), csv);
        io::atomic_write(path_join(o.out_dir, "correction_profile.dat"),
                         io::two_column(rows, "phase normalized_residual"));
        out << samples.size() << " correction samples\n";
        return 0;
    }
    const auto recs = load_records(o.records);
    io::atomic_write(path_join(o.out_dir, "summary.csv"), summary_csv(recs));
    std::map<double, std::vector<std::pair<double, double>>> by_h;
    std::map<double, std::map<double, double>> ratio_table;
    std::set<double> betas;
    for (const auto &r : recs) {
        if (!r.error.empty())
            continue;
        by_h[r.h].emplace_back(r.mu, r.remainder);
        ratio_table[r.h][r.beta] = r.ratio;
        betas.insert(r.beta);
    }
    for (auto &[h, rows] : by_h) {
        std::sort(rows.begin(), rows.end());
        io::atomic_write(path_join(o.out_dir, "remainder_vs_mu_h" + io::format_double(h) + ".dat"),
                         io::two_column(rows, "mu remainder at h = " + io::format_double(h)));
    }
    std::string table = "h";
    for (double b : betas)
        table += ",beta=" + io::format_double(b);
    table += '\n';
    for (const auto &[h, row] : ratio_table) {
        table += io::format_double(h);
        for (double b : betas) {
            table += ',';
            if (const auto it = row.find(b); it != row.end())
                table += io::format_double(it->second);
        }
        table += '\n';
    }
    io::atomic_write(path_join(o.out_dir, "ratios.csv"), table);
    out << recs.size() << " records summarized\n";
    return 0;
}

} // namespace

Cli::Cli(std::ostream &out, std::ostream &err)
    : out_(out), err_(err), opt_(std::make_unique<Options>()),
      app_(std::make_unique<CLI::App>("Spectral asymptotics toolkit for magnetic Schroedinger operators", "magspec")) {
    build(*app_, *opt_);
}

Cli::~Cli() = default;

CLI::App &Cli::app() { return *app_; }

int Cli::run(const std::vector<std::string> &args) {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app_->parse(rev);
    } catch (const CLI::CallForHelp &e) {
        return app_->exit(e, out_, err_);
    } catch (const CLI::CallForAllHelp &e) {
        return app_->exit(e, out_, err_);
    } catch (const CLI::ParseError &e) {
        err_ << "error: " << e.what() << '\n';
        return 2;
    }
    try {
        return dispatch();
    } catch (const ConfigError &e) {
        err_ << "config error: " << e.what() << '\n';
        return 2;
    } catch (const Error &e) {
        err_ << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception &e) {
        err_ << "error: " << e.what() << '\n';
        return 1;
    }
}

int Cli::dispatch() {
    const Options &o = *opt_;
    if (o.field_cmd->parsed())
        return run_field(o.field, out_);
    if (o.dynamics_cmd->parsed())
        return run_dynamics(o.dynamics, out_);
    if (o.spectrum_cmd->parsed())
        return run_spectrum(o.spectrum, out_);
    if (o.weyl_cmd->parsed())
        return run_weyl(o.weyl, out_);
    if (o.sweep_cmd->parsed())
        return run_sweep_cmd(o.sweep, out_);
    return run_report(o.report, out_);
}

int main(int argc, char **argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    Cli cli(std::cout, std::cerr);
    return cli.run(args);
}

} // namespace magspec::cli
