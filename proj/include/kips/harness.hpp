#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kips/config.hpp"
#include "kips/contrast.hpp"
#include "kips/estimate.hpp"
#include "kips/model.hpp"
#include "kips/observe.hpp"
#include "kips/simulate.hpp"

namespace kips {

struct GridCell {
    int n_particles = 0;
    int obs_steps = 0;
    int fine_factor = 0;
    double n_delta = 0.0;  // N * Delta, recorded per cell
    bool nd_flagged = false;  // true when N Delta does not decrease along the grid
};

struct ExperimentConfig {
    std::string model_name = "mean_field_langevin";
    Theta theta0;
    double horizon = 1.0;
    std::vector<int> grid_N, grid_n, grid_m;
    int replications = 100;
    std::vector<ObsMode> modes{ObsMode::Complete, ObsMode::Partial};
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    int threads = 0;
    OptConfig opt;
    OracleConfig oracle;
    // scaling-study axes
    std::vector<int> surrogate_n;
    int surrogate_seeds = 5;
    int surrogate_N = 100;
    int surrogate_fine_factor = 50;
    std::vector<int> poc_N;
    int poc_seeds = 20;
    int poc_obs_steps = 50;
    int poc_fine_factor = 10;

    static ExperimentConfig from_config(const Config& raw);
    std::vector<GridCell> cells() const;  // cross product of the grid axes
};

struct ReplicationRow {
    int cell = 0;
    int replicate = 0;
    std::uint64_t seed = 0;
    ObsMode mode = ObsMode::Complete;
    int n_particles = 0, obs_steps = 0, fine_factor = 0;
    double n_delta = 0.0;
    bool converged = false;
    bool on_boundary = false;
    std::vector<double> mu_hat, sigma_hat;
    std::vector<double> err_mu, err_sigma;          // normalized errors
    std::vector<double> plugin_var_mu, plugin_var_sigma;  // plug-in variance diagonals
    double wall_s = 0.0;  // timing sidecar only, excluded from the rows CSV
};

// One row, fully regenerable from (config seed, cell, replicate, mode).
ReplicationRow run_one(const ExperimentConfig& cfg, int cell_index, int replicate, ObsMode mode);

// All cells x replicates x modes. Rows stream to `csv_path` in deterministic
// order as work items finish; a journal beside it makes interrupted runs
// resumable without duplicating rows. Wall times go to a separate sidecar.
std::vector<ReplicationRow> run_replications(const ExperimentConfig& cfg,
                                             const std::string& csv_path);

std::vector<ReplicationRow> rows_from_csv(const std::string& csv_path, int p_mu, int p_sigma);

// Asymptotic information and covariance targets evaluated by the integral
// oracle at the true parameter.
struct OracleVariances {
    int p_mu = 0, p_sigma = 0;
    std::vector<double> info_mu;             // Pibar( dmu b dmu b^T / a^2 )
    std::vector<double> info_sigma;          // Pibar( dsigma c dsigma c^T / c^2 )
    std::vector<double> cov_mu;              // inverse
    std::vector<double> cov_sigma_complete;  // 2 x inverse
    std::vector<double> cov_sigma_partial;   // 9/4 x inverse
};

OracleVariances oracle_variances(const Model& model, const Theta& theta0,
                                 const OracleConfig& cfg);

struct CltCellSummary {
    int cell = 0;
    ObsMode mode = ObsMode::Complete;
    long rows_used = 0;
    std::vector<double> err_mean;      // dimension p1 + p2
    std::vector<double> err_cov;       // (p1+p2)^2 row-major
    std::vector<double> plugin_var;    // averaged plug-in diagonals, p1 + p2
    std::vector<double> oracle_var;    // oracle diagonals, p1 + p2
    std::vector<double> variance_ratio;  // empirical / oracle
    std::vector<double> ad_stat;         // adjusted Anderson-Darling per marginal
    std::vector<bool> ad_pass_1pct;
};

struct CltSummary {
    std::vector<CltCellSummary> cells;
    const CltCellSummary* find(int cell, ObsMode mode) const;
};

// Normalized-error moments vs the plug-in and oracle targets, plus marginal
// normality diagnostics. Histogram and QQ plot data are written next to the
// summary. Requires >= min_rows converged rows per (cell, mode).
CltSummary clt_summary(const std::vector<ReplicationRow>& rows, const OracleVariances& oracle,
                       const std::string& out_dir, long min_rows = 100);

struct SlopeRow {
    std::string study;
    std::vector<double> x, y;
    double slope = 0.0;
    double r2 = 0.0;
    bool degenerate = false;
};

// Log-log scaling studies: estimator RMSE vs N (and N/Delta), surrogate
// velocity error vs Delta, coupled mean-square gap vs N.
std::vector<SlopeRow> scaling_study(const ExperimentConfig& cfg, const std::string& out_dir);

void write_slopes_csv(const std::vector<SlopeRow>& slopes, const std::string& path);

// Config copy plus a version stamp for provenance.
void write_manifest(const ExperimentConfig& cfg, const Config& raw, const std::string& path);

}  // namespace kips
