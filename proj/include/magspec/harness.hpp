#pragma once

// Parameter sweeps over (mu, h, k) for the separable model, log-log scaling
// fits, the empirical 2D correction profile and the resonant-k experiment.

#include "magspec/spectra.hpp"
#include "magspec/weyl.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace magspec {

enum class KRule { Zero, Fixed, Resonant };

std::string_view to_string(KRule r);

struct SweepConfig {
    std::vector<double> h_list;
    std::vector<double> beta_list; // mu = h^-beta
    KRule k_rule = KRule::Zero;
    double k = 0.0;      // Fixed
    int p = 0;           // Resonant: k = (2p+1) mu h
    double tau = 0.0;
    double support = 0.5;   // psi1 = cos2_bump(support)
    double psi2_mass = 1.0; // integral of the transverse weight
    double bound_constant = 1.0;
    double S0 = 1.0;        // phase constant of the correction profile
    int resonant_n = 1;     // necessity experiment: mu h = 1 / (2n+1)
    double control_ratio = 0.75 * 1.2360679774997896964; // off-resonant mu h / resonant mu h
    double necessity_h = 1.0 / 32;
    XiQuadrature quad{};
    std::string records_path;
    std::string summary_path;

    // h in (0, 0.25], mu h <= 1 on every cell, |k| <= 1; ConfigError names the key
    void validate() const;
};

// Parses the JSON schema documented in the README; unknown keys are rejected.
SweepConfig sweep_config_from_json(const nlohmann::json &j);
SweepConfig load_sweep_config(const std::string &path);

struct SweepCell {
    std::size_t index = 0;
    double h = 0, beta = 0, mu = 0, k = 0;
};

// Cells in h-major order.
std::vector<SweepCell> sweep_cells(const SweepConfig &cfg);

struct SweepRecord {
    std::size_t cell = 0;
    double beta = 0, mu = 0, h = 0, k = 0;
    double N = 0, EMW = 0, remainder = 0, quadrature_error = 0;
    double weight = 0;         // psi2_mass * integral of psi1
    double bound_mu = 0;       // C mu^{-1/2} h^{-3}
    double bound_h = 0;        // C mu^2 h^{-2}
    double ratio_mu = 0;       // |remainder| / (weight bound_mu)
    double ratio_h = 0;        // |remainder| / (weight bound_h)
    double ratio = 0;          // |remainder| / (weight (bound_mu + bound_h))
    std::string error;         // non-empty when the cell failed
    double runtime_s = 0;      // kept out of the record file
};

nlohmann::json to_json(const SweepRecord &r);
// Throws MalformedRecord with `line` in the message.
SweepRecord record_from_json(const nlohmann::json &j, std::size_t line);
std::vector<SweepRecord> load_records(const std::string &path);
std::string records_jsonl(const std::vector<SweepRecord> &records);
// Rows sorted by (h, mu).
std::string summary_csv(std::vector<SweepRecord> records);

// One cell through count_states.
SweepRecord run_cell(const SweepCell &cell, const SweepConfig &cfg);

// Cells run in order; each finished cell is persisted (records sorted by cell
// index, atomic replace) when records_path is set, and cells already present
// there are reused. Failed cells keep their error message.
std::vector<SweepRecord> run_sweep(const SweepConfig &cfg);

enum class Predictor { Mu, H };

struct ScalingFit {
    double slope = 0.0;
    double stderr_ = 0.0; // NaN without residual degrees of freedom
    std::size_t points = 0;
    bool joint = false;   // both log mu and log h entered the regression
};

// Least-squares slope of log|remainder| in log(predictor); when the other
// variable varies too it enters as a second regressor. Records with errors
// or zero remainder are skipped. Throws InsufficientData below 3 points.
ScalingFit fit_scaling(const std::vector<SweepRecord> &records, Predictor predictor);

struct CorrectionSample {
    double h = 0, mu = 0, hbar = 0;
    double N = 0, EMW = 0, residual = 0, quadrature_error = 0;
    double phase = 0;      // S0 / (2 pi hbar) at V = 1, phi = 1
    double normalized = 0; // residual / (h^-1 hbar^{1/2})
};

struct CorrectionProfile {
    std::vector<CorrectionSample> samples; // sorted by phase
    GTable table() const;                  // (phase, normalized)
};

// 2D factor alone on the sweep cells (mu = h^-beta, k by rule).
CorrectionProfile extract_correction_2d(const SweepConfig &cfg);

nlohmann::json to_json(const CorrectionSample &s);
// JSON-lines of samples; throws MalformedRecord with the line number.
std::vector<CorrectionSample> load_correction_samples(const std::string &path);

struct NecessityRow {
    std::string label; // "resonant" or "control"
    int n = 0, p = 0;
    SweepRecord record;
    double ratio_mu2h2 = 0; // remainder / (weight mu^2 h^-2), signed
};

// Resonant cell mu h = 1/(2n+1), k = (2p+1) mu h at h = necessity_h, and the
// control cell with mu h scaled by control_ratio and k by the same rule.
std::vector<NecessityRow> necessity_experiment_a3(const SweepConfig &cfg);

nlohmann::json to_json(const NecessityRow &r);

} // namespace magspec
