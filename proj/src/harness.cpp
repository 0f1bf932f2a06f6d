#include "magspec/harness.hpp"
#include "magspec/errors.hpp"
#include "magspec/io.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace magspec {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

template <class T>
T get_as(const json &j, const std::string &key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception &e) {
        throw ConfigError(key, e.what());
    }
}

template <class T>
void read_opt(const json &j, const std::string &key, T &out) {
    if (j.contains(key))
        out = get_as<T>(j, key);
}

void reject_unknown(const json &j, const std::set<std::string> &allowed, const std::string &prefix = {}) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError(prefix + it.key(), "unknown key");
}

KRule parse_k_rule(const std::string &s) {
    if (s == "zero")
        return KRule::Zero;
    if (s == "fixed")
        return KRule::Fixed;
    if (s == "resonant")
        return KRule::Resonant;
    throw ConfigError("k_rule", "expected zero, fixed or resonant, got '" + s + "'");
}

double cell_k(const SweepConfig &cfg, double mu, double h) {
    switch (cfg.k_rule) {
    case KRule::Zero:
        return 0.0;
    case KRule::Fixed:
        return cfg.k;
    case KRule::Resonant:
        return (2 * cfg.p + 1) * mu * h;
    }
    return 0.0;
}

ModelParams cell_params(const SweepCell &c, double tau) {
    ModelParams prm;
    prm.mu = c.mu;
    prm.h = c.h;
    prm.k = c.k;
    prm.tau = tau;
    return prm;
}

XiQuadrature cell_quadrature(const SweepConfig &cfg) {
    XiQuadrature q = cfg.quad;
    q.support = cfg.support;
    return q;
}

// integral of cos2_bump(a) over its support
double bump_mass(double a) { return a; }

double num(const json &j, const char *key, std::size_t line) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number())
        throw MalformedRecord("line " + std::to_string(line) + ": missing or non-numeric '" + key + "'");
    return it->get<double>();
}

} // namespace

std::string_view to_string(KRule r) {
    switch (r) {
    case KRule::Zero:
        return "zero";
    case KRule::Fixed:
        return "fixed";
    case KRule::Resonant:
        return "resonant";
    }
    return "?";
}

void SweepConfig::validate() const {
    for (double h : h_list)
        if (!(h > 0 && h <= 0.25))
            throw ConfigError("h_list", "every h must lie in (0, 0.25], got " + io::format_double(h));
    for (double b : beta_list)
        if (!std::isfinite(b))
            throw ConfigError("beta_list", "must be finite");
    if (!(support > 0 && support <= 1))
        throw ConfigError("support", "must lie in (0, 1]");
    if (!(psi2_mass > 0) || !std::isfinite(psi2_mass))
        throw ConfigError("psi2_mass", "must be positive");
    if (!(bound_constant > 0))
        throw ConfigError("bound_constant", "must be positive");
    if (k_rule == KRule::Fixed && !(std::abs(k) <= 1))
        throw ConfigError("k", "|k| must be <= 1");
    if (p < 0)
        throw ConfigError("p", "must be >= 0");
    if (resonant_n < 0)
        throw ConfigError("resonant_n", "must be >= 0");
    if (!(control_ratio > 0))
        throw ConfigError("control_ratio", "must be positive");
    if (!(necessity_h > 0 && necessity_h <= 0.25))
        throw ConfigError("necessity_h", "must lie in (0, 0.25]");
    for (double h : h_list)
        for (double b : beta_list) {
            const double mu = std::pow(h, -b);
            if (!(mu * h <= 1))
                throw ConfigError("beta_list", "mu h = " + io::format_double(mu * h) + " exceeds 1 at h = " +
                                                   io::format_double(h) + ", beta = " + io::format_double(b));
            if (k_rule == KRule::Resonant && !(std::abs(cell_k(*this, mu, h)) <= 1))
                throw ConfigError("p", "resonant k exceeds 1 at h = " + io::format_double(h));
        }
}

SweepConfig sweep_config_from_json(const json &j) {
    if (!j.is_object())
        throw ConfigError("config", "top level must be an object");
    reject_unknown(j, {"h_list", "beta_list", "k_rule", "k", "p", "tau", "support", "psi2_mass", "bound_constant",
                       "S0", "resonant_n", "control_ratio", "necessity_h", "quadrature", "workers", "output"});
    SweepConfig c;
    c.h_list = get_as<std::vector<double>>(j, "h_list");
    c.beta_list = get_as<std::vector<double>>(j, "beta_list");
    if (j.contains("k_rule"))
        c.k_rule = parse_k_rule(get_as<std::string>(j, "k_rule"));
    read_opt(j, "k", c.k);
    read_opt(j, "p", c.p);
    read_opt(j, "tau", c.tau);
    read_opt(j, "support", c.support);
    read_opt(j, "psi2_mass", c.psi2_mass);
    read_opt(j, "bound_constant", c.bound_constant);
    read_opt(j, "S0", c.S0);
    read_opt(j, "resonant_n", c.resonant_n);
    read_opt(j, "control_ratio", c.control_ratio);
    read_opt(j, "necessity_h", c.necessity_h);
    read_opt(j, "workers", c.quad.workers);
    if (j.contains("quadrature")) {
        const json &q = j.at("quadrature");
        if (!q.is_object())
            throw ConfigError("quadrature", "must be an object");
        reject_unknown(q, {"step", "points_per_h", "cutoff_margin", "tail_tol", "richardson_tol"}, "quadrature.");
        read_opt(q, "step", c.quad.step);
        read_opt(q, "points_per_h", c.quad.points_per_h);
        read_opt(q, "cutoff_margin", c.quad.cutoff_margin);
        read_opt(q, "tail_tol", c.quad.fiber.tail_tol);
        read_opt(q, "richardson_tol", c.quad.fiber.richardson_tol);
    }
    if (j.contains("output")) {
        const json &o = j.at("output");
        if (!o.is_object())
            throw ConfigError("output", "must be an object");
        reject_unknown(o, {"records", "summary"}, "output.");
        read_opt(o, "records", c.records_path);
        read_opt(o, "summary", c.summary_path);
    }
    c.validate();
    return c;
}

SweepConfig load_sweep_config(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("config", "cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error &e) {
        throw ConfigError("config", e.what());
    }
    return sweep_config_from_json(j);
}

std::vector<SweepCell> sweep_cells(const SweepConfig &cfg) {
    std::vector<SweepCell> cells;
    for (double h : cfg.h_list)
        for (double b : cfg.beta_list) {
            SweepCell c;
            c.index = cells.size();
            c.h = h;
            c.beta = b;
            c.mu = std::pow(h, -b);
            c.k = cell_k(cfg, c.mu, h);
            cells.push_back(c);
        }
    return cells;
}

json to_json(const SweepRecord &r) {
    json j;
    j["cell"] = r.cell;
    j["beta"] = r.beta;
    j["mu"] = r.mu;
    j["h"] = r.h;
    j["k"] = r.k;
    j["N"] = r.N;
    j["EMW"] = r.EMW;
    j["remainder"] = r.remainder;
    j["quadrature_error"] = r.quadrature_error;
    j["weight"] = r.weight;
    j["bounds"] = {{"mu^{-1/2}h^{-3}", r.bound_mu}, {"mu^2h^{-2}", r.bound_h}};
    j["ratios"] = {{"mu^{-1/2}h^{-3}", r.ratio_mu}, {"mu^2h^{-2}", r.ratio_h}, {"sum", r.ratio}};
    j["error"] = r.error;
    return j;
}

SweepRecord record_from_json(const json &j, std::size_t line) {
    if (!j.is_object())
        throw MalformedRecord("line " + std::to_string(line) + ": not an object");
    SweepRecord r;
    const double cell = num(j, "cell", line);
    if (cell < 0 || cell != std::floor(cell))
        throw MalformedRecord("line " + std::to_string(line) + ": bad cell index");
    r.cell = static_cast<std::size_t>(cell);
    r.beta = num(j, "beta", line);
    r.mu = num(j, "mu", line);
    r.h = num(j, "h", line);
    r.k = num(j, "k", line);
    r.N = num(j, "N", line);
    r.EMW = num(j, "EMW", line);
    r.remainder = num(j, "remainder", line);
    r.quadrature_error = num(j, "quadrature_error", line);
    r.weight = num(j, "weight", line);
    const auto b = j.find("bounds");
    const auto q = j.find("ratios");
    if (b == j.end() || q == j.end() || !b->is_object() || !q->is_object())
        throw MalformedRecord("line " + std::to_string(line) + ": missing bounds or ratios");
    r.bound_mu = num(*b, "mu^{-1/2}h^{-3}", line);
    r.bound_h = num(*b, "mu^2h^{-2}", line);
    r.ratio_mu = num(*q, "mu^{-1/2}h^{-3}", line);
    r.ratio_h = num(*q, "mu^2h^{-2}", line);
    r.ratio = num(*q, "sum", line);
    const auto e = j.find("error");
    if (e != j.end()) {
        if (!e->is_string())
            throw MalformedRecord("line " + std::to_string(line) + ": 'error' must be a string");
        r.error = e->get<std::string>();
    }
    return r;
}

std::vector<SweepRecord> load_records(const std::string &path) {
    std::vector<SweepRecord> out;
    const auto lines = io::read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].find_first_not_of(" \t") == std::string::npos)
            continue;
        json j;
        try {
            j = json::parse(lines[i]);
        } catch (const json::parse_error &e) {
            throw MalformedRecord("line " + std::to_string(i + 1) + ": " + e.what());
        }
        out.push_back(record_from_json(j, i + 1));
    }
    return out;
}

std::string records_jsonl(const std::vector<SweepRecord> &records) {
    std::string s;
    for (const auto &r : records)
        s += to_json(r).dump() + '\n';
    return s;
}

std::string summary_csv(std::vector<SweepRecord> records) {
    std::stable_sort(records.begin(), records.end(), [](const SweepRecord &a, const SweepRecord &b) {
        return a.h != b.h ? a.h < b.h : a.mu < b.mu;
    });
    std::ostringstream os;
    os << "h,beta,mu,k,N,EMW,remainder,quadrature_error,bound_mu,bound_h,ratio_mu,ratio_h,ratio,error\n";
    for (const auto &r : records) {
        using io::format_double;
        os << format_double(r.h) << ',' << format_double(r.beta) << ',' << format_double(r.mu) << ','
           << format_double(r.k) << ',' << format_double(r.N) << ',' << format_double(r.EMW) << ','
           << format_double(r.remainder) << ',' << format_double(r.quadrature_error) << ','
           << format_double(r.bound_mu) << ',' << format_double(r.bound_h) << ',' << format_double(r.ratio_mu)
           << ',' << format_double(r.ratio_h) << ',' << format_double(r.ratio) << ',';
        std::string err = r.error;
        std::replace(err.begin(), err.end(), '"', '\'');
        if (!err.empty())
            os << '"' << err << '"';
        os << '\n';
    }
    return os.str();
}

SweepRecord run_cell(const SweepCell &cell, const SweepConfig &cfg) {
    SweepRecord r;
    r.cell = cell.index;
    r.beta = cell.beta;
    r.mu = cell.mu;
    r.h = cell.h;
    r.k = cell.k;
    r.weight = cfg.psi2_mass * bump_mass(cfg.support);
    r.bound_mu = cfg.bound_constant / (std::sqrt(cell.mu) * cell.h * cell.h * cell.h);
    r.bound_h = cfg.bound_constant * cell.mu * cell.mu / (cell.h * cell.h);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const CountReport rep =
            count_states(cos2_bump(cfg.support), cfg.psi2_mass, cell_params(cell, cfg.tau), cell_quadrature(cfg));
        r.N = rep.N_count;
        r.EMW = rep.emw_integral;
        r.remainder = rep.remainder;
        r.quadrature_error = rep.quadrature_error;
        const double a = std::abs(r.remainder) / r.weight;
        r.ratio_mu = a / r.bound_mu;
        r.ratio_h = a / r.bound_h;
        r.ratio = a / (r.bound_mu + r.bound_h);
    } catch (const Error &e) {
        r.error = e.what();
    }
    r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::vector<SweepRecord> run_sweep(const SweepConfig &cfg) {
    cfg.validate();
    const auto cells = sweep_cells(cfg);
    std::map<std::size_t, SweepRecord> done;
    if (!cfg.records_path.empty() && io::exists(cfg.records_path)) {
        for (auto &r : load_records(cfg.records_path))
            if (r.cell < cells.size()) {
                const SweepCell &c = cells[r.cell];
                if (r.h == c.h && r.beta == c.beta && r.k == c.k && r.error.empty())
                    done[r.cell] = std::move(r);
            }
    }
    const std::string timing_path = cfg.records_path.empty() ? std::string() : cfg.records_path + ".timing";
    std::string timing;
    auto persist = [&] {
        if (cfg.records_path.empty())
            return;
        std::vector<SweepRecord> sorted;
        for (const auto &kv : done)
            sorted.push_back(kv.second);
        io::atomic_write(cfg.records_path, records_jsonl(sorted));
        io::atomic_write(timing_path, timing);
    };
    for (const auto &c : cells) {
        if (done.count(c.index))
            continue;
        SweepRecord r = run_cell(c, cfg);
        timing += std::to_string(c.index) + ' ' + io::format_double(r.runtime_s) + '\n';
        done[c.index] = std::move(r);
        persist();
    }
    std::vector<SweepRecord> out;
    for (auto &kv : done)
        out.push_back(std::move(kv.second));
    if (!cfg.records_path.empty())
        io::atomic_write(cfg.records_path, records_jsonl(out));
    if (!cfg.summary_path.empty())
        io::atomic_write(cfg.summary_path, summary_csv(out));
    return out;
}

ScalingFit fit_scaling(const std::vector<SweepRecord> &records, Predictor predictor) {
    std::vector<double> y, xp, xo;
    for (const auto &r : records) {
        if (!r.error.empty() || r.remainder == 0 || !std::isfinite(r.remainder) || !(r.mu > 0) || !(r.h > 0))
            continue;
        y.push_back(std::log(std::abs(r.remainder)));
        const double lm = std::log(r.mu);
        const double lh = std::log(r.h);
        xp.push_back(predictor == Predictor::Mu ? lm : lh);
        xo.push_back(predictor == Predictor::Mu ? lh : lm);
    }
    const std::size_t n = y.size();
    if (n < 3)
        throw InsufficientData("fit_scaling needs >= 3 usable records, got " + std::to_string(n));
    const auto [mn, mx] = std::minmax_element(xp.begin(), xp.end());
    if (*mn == *mx)
        throw InsufficientData("predictor does not vary across records");
    const auto [on, ox] = std::minmax_element(xo.begin(), xo.end());
    const bool joint = *on != *ox;
    const Eigen::Index p = joint ? 3 : 2;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), p);
    Eigen::VectorXd Y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        X(r, 0) = 1.0;
        X(r, 1) = xp[i];
        if (joint)
            X(r, 2) = xo[i];
        Y(r) = y[i];
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < p)
        throw InsufficientData("log mu and log h are collinear; fix one of them");
    const Eigen::VectorXd beta = qr.solve(Y);
    ScalingFit fit;
    fit.slope = beta(1);
    fit.points = n;
    fit.joint = joint;
    const auto dof = static_cast<Eigen::Index>(n) - p;
    if (dof > 0) {
        const double rss = (Y - X * beta).squaredNorm();
        const Eigen::MatrixXd cov = (X.transpose() * X).inverse() * (rss / static_cast<double>(dof));
        fit.stderr_ = std::sqrt(std::max(0.0, cov(1, 1)));
    } else {
        fit.stderr_ = std::numeric_limits<double>::quiet_NaN();
    }
    return fit;
}

GTable CorrectionProfile::table() const {
    std::vector<std::pair<double, double>> rows;
    for (const auto &s : samples)
        rows.emplace_back(s.phase, s.normalized);
    return GTable(std::move(rows));
}

CorrectionProfile extract_correction_2d(const SweepConfig &cfg) {
    cfg.validate();
    CorrectionProfile prof;
    for (const auto &c : sweep_cells(cfg)) {
        const Count2DReport rep = count_states_2d(cos2_bump(cfg.support), cell_params(c, cfg.tau), cell_quadrature(cfg));
        CorrectionSample s;
        s.h = c.h;
        s.mu = c.mu;
        s.hbar = std::sqrt(c.mu) * c.h;
        s.N = rep.N;
        s.EMW = rep.emw;
        s.residual = rep.residual;
        s.quadrature_error = rep.quadrature_error;
        s.phase = cfg.S0 / (2 * kPi * s.hbar);
        s.normalized = s.residual * c.h / std::sqrt(s.hbar);
        prof.samples.push_back(s);
    }
    std::stable_sort(prof.samples.begin(), prof.samples.end(),
                     [](const CorrectionSample &a, const CorrectionSample &b) { return a.phase < b.phase; });
    return prof;
}

json to_json(const CorrectionSample &s) {
    return {{"h", s.h},
            {"mu", s.mu},
            {"hbar", s.hbar},
            {"N", s.N},
            {"EMW", s.EMW},
            {"residual", s.residual},
            {"quadrature_error", s.quadrature_error},
            {"phase", s.phase},
            {"normalized", s.normalized}};
}

std::vector<CorrectionSample> load_correction_samples(const std::string &path) {
    std::vector<CorrectionSample> out;
    const auto lines = io::read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].find_first_not_of(" \t") == std::string::npos)
            continue;
        json j;
        try {
            j = json::parse(lines[i]);
        } catch (const json::parse_error &e) {
            throw MalformedRecord("line " + std::to_string(i + 1) + ": " + e.what());
        }
        if (!j.is_object())
            throw MalformedRecord("line " + std::to_string(i + 1) + ": not an object");
        CorrectionSample s;
        s.h = num(j, "h", i + 1);
        s.mu = num(j, "mu", i + 1);
        s.hbar = num(j, "hbar", i + 1);
        s.N = num(j, "N", i + 1);
        s.EMW = num(j, "EMW", i + 1);
        s.residual = num(j, "residual", i + 1);
        s.quadrature_error = num(j, "quadrature_error", i + 1);
        s.phase = num(j, "phase", i + 1);
        s.normalized = num(j, "normalized", i + 1);
        out.push_back(s);
    }
    return out;
}

std::vector<NecessityRow> necessity_experiment_a3(const SweepConfig &cfg) {
    cfg.validate();
    const double h = cfg.necessity_h;
    const double muh_res = 1.0 / (2 * cfg.resonant_n + 1);
    const std::pair<const char *, double> cases[] = {{"resonant", muh_res}, {"control", muh_res * cfg.control_ratio}};
    std::vector<NecessityRow> rows;
    std::size_t index = 0;
    for (const auto &[label, muh] : cases) {
        SweepCell c;
        c.index = index++;
        c.h = h;
        c.mu = muh / h;
        c.beta = -std::log(c.mu) / std::log(h);
        c.k = (2 * cfg.p + 1) * muh;
        if (!(muh <= 1))
            throw ConfigError("control_ratio", "control cell has mu h > 1");
        if (!(std::abs(c.k) <= 1))
            throw ConfigError("p", "k = (2p+1) mu h exceeds 1");
        NecessityRow row;
        row.label = label;
        row.n = cfg.resonant_n;
        row.p = cfg.p;
        row.record = run_cell(c, cfg);
        row.ratio_mu2h2 = row.record.remainder / (row.record.weight * row.record.bound_h);
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json(const NecessityRow &r) {
    json j = to_json(r.record);
    j["label"] = r.label;
    j["n"] = r.n;
    j["p"] = r.p;
    j["ratio_mu2h2"] = r.ratio_mu2h2;
    return j;
}

} // namespace magspec
