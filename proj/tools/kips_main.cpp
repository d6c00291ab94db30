// Command-line front end: simulation, fitting, Monte Carlo replication,
// limit-theorem diagnostics, scaling studies, and the rank check, all driven
// by one declarative config file.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "kips/contrast.hpp"
#include "kips/csv.hpp"
#include "kips/errors.hpp"
#include "kips/estimate.hpp"
#include "kips/harness.hpp"
#include "kips/hypocheck.hpp"
#include "kips/observe.hpp"
#include "kips/parallel.hpp"
#include "kips/simulate.hpp"

namespace fs = std::filesystem;
using namespace kips;

namespace {

struct CommonArgs {
    std::string config_path;
    long seed_override = -1;
    std::string out_override;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config file")->required();
    cmd->add_option("--seed", args.seed_override, "override [run] seed");
    cmd->add_option("--out", args.out_override, "override [run] output_dir");
    cmd->add_option("--threads", args.threads, "worker thread count (0 = library default)");
}

struct Loaded {
    Config raw;
    ExperimentConfig cfg;
};

Loaded load(const CommonArgs& args) {
    Loaded l{Config::parse_file(args.config_path), {}};
    l.cfg = ExperimentConfig::from_config(l.raw);
    if (args.seed_override >= 0) l.cfg.seed = static_cast<std::uint64_t>(args.seed_override);
    if (!args.out_override.empty()) l.cfg.output_dir = args.out_override;
    if (args.threads > 0) l.cfg.threads = args.threads;
    if (l.cfg.threads > 0) set_threads(l.cfg.threads);
    fs::create_directories(l.cfg.output_dir);
    write_manifest(l.cfg, l.raw, l.cfg.output_dir + "/manifest.txt");
    return l;
}

SimConfig first_cell_sim(const ExperimentConfig& cfg) {
    const auto cells = cfg.cells();
    SimConfig sim;
    sim.n_particles = cells.front().n_particles;
    sim.horizon = cfg.horizon;
    sim.obs_steps = cells.front().obs_steps;
    sim.fine_factor = cells.front().fine_factor;
    sim.seed = cfg.seed;
    return sim;
}

int cmd_simulate(const CommonArgs& args, bool dump_trajectory) {
    const Loaded l = load(args);
    const auto model = make_model(l.cfg.model_name);
    const SimConfig sim = first_cell_sim(l.cfg);
    if (dump_trajectory) {
        const TrajectoryGrid grid = simulate_ips(*model, l.cfg.theta0, sim);
        write_trajectory_binary(grid, l.cfg.output_dir + "/trajectory.bin");
        write_observation_csv(subsample(grid, sim), l.cfg.output_dir + "/observations.csv");
    } else {
        write_observation_csv(simulate_observations(*model, l.cfg.theta0, sim),
                              l.cfg.output_dir + "/observations.csv");
    }
    std::cout << "wrote " << l.cfg.output_dir << "/observations.csv\n";
    return 0;
}

int cmd_fit(const CommonArgs& args) {
    const Loaded l = load(args);
    const auto model = make_model(l.cfg.model_name);
    const SimConfig sim = first_cell_sim(l.cfg);
    const ObservationSet obs = simulate_observations(*model, l.cfg.theta0, sim);
    csv::Writer w(l.cfg.output_dir + "/fit.csv");
    bool first = true;
    for (ObsMode mode : l.cfg.modes) {
        const EstimateReport rep = fit(*model, obs, mode, l.cfg.opt, &l.cfg.theta0);
        std::cout << rep.to_kv() << "\n";
        std::ofstream kv(l.cfg.output_dir + "/fit_" + to_string(mode) + ".txt");
        kv << rep.to_kv();
        if (first) {
            std::vector<std::string> hdr = {"mode", "contrast", "converged", "boundary"};
            for (std::size_t k = 0; k < rep.mu_hat.size(); ++k)
                hdr.push_back("mu_hat_" + std::to_string(k + 1));
            for (std::size_t k = 0; k < rep.sigma_hat.size(); ++k)
                hdr.push_back("sigma_hat_" + std::to_string(k + 1));
            w.header(hdr);
            first = false;
        }
        std::vector<std::string> row = {to_string(mode), csv::fmt(rep.contrast_at_opt),
                                        rep.converged ? "1" : "0", rep.on_boundary ? "1" : "0"};
        for (double v : rep.mu_hat) row.push_back(csv::fmt(v));
        for (double v : rep.sigma_hat) row.push_back(csv::fmt(v));
        w.row(row);
    }
    return 0;
}

int cmd_replicate(const CommonArgs& args) {
    const Loaded l = load(args);
    const auto rows = run_replications(l.cfg, l.cfg.output_dir + "/rows.csv");
    std::cout << "wrote " << rows.size() << " rows to " << l.cfg.output_dir << "/rows.csv\n";
    return 0;
}

int cmd_clt(const CommonArgs& args) {
    const Loaded l = load(args);
    const auto model = make_model(l.cfg.model_name);
    const std::string rows_path = l.cfg.output_dir + "/rows.csv";
    std::vector<ReplicationRow> rows;
    if (fs::exists(rows_path)) {
        rows = rows_from_csv(rows_path, model->p_mu(), model->p_sigma());
    } else {
        rows = run_replications(l.cfg, rows_path);
    }
    const OracleVariances oracle = oracle_variances(*model, l.cfg.theta0, l.cfg.oracle);
    const CltSummary summary = clt_summary(rows, oracle, l.cfg.output_dir);
    for (const auto& cell : summary.cells) {
        std::cout << "cell " << cell.cell << " mode " << to_string(cell.mode) << ": "
                  << cell.rows_used << " rows";
        for (std::size_t k = 0; k < cell.variance_ratio.size(); ++k)
            std::cout << (k ? ", " : "; empirical/oracle variance: ") << cell.variance_ratio[k];
        std::cout << "\n";
    }
    std::cout << "summary in " << l.cfg.output_dir << "/clt_summary.csv\n";
    return 0;
}

int cmd_scaling(const CommonArgs& args) {
    const Loaded l = load(args);
    const auto slopes = scaling_study(l.cfg, l.cfg.output_dir);
    for (const auto& s : slopes)
        std::cout << s.study << ": slope " << s.slope << " (r2 " << s.r2 << ")"
                  << (s.degenerate ? " [degenerate fit]" : "") << "\n";
    return 0;
}

int cmd_hypo_check(const CommonArgs& args, int n_particles, int n_probes) {
    const Loaded l = load(args);
    const auto model = make_model(l.cfg.model_name);
    const auto probes = make_probe_states(n_particles, n_probes, l.cfg.seed);
    const auto reports = rank_check(*model, l.cfg.theta0, n_particles, probes);
    write_rank_csv(reports, l.cfg.output_dir + "/rank.csv");
    int full = 0;
    for (const auto& r : reports) full += r.full_rank ? 1 : 0;
    std::cout << full << "/" << reports.size() << " probes at full rank "
              << 2 * n_particles << "; report in " << l.cfg.output_dir << "/rank.csv\n";
    return 0;
}

int cmd_oracle(const CommonArgs& args) {
    const Loaded l = load(args);
    const auto model = make_model(l.cfg.model_name);
    const OracleVariances o = oracle_variances(*model, l.cfg.theta0, l.cfg.oracle);
    csv::Writer w(l.cfg.output_dir + "/oracle.csv");
    w.header({"quantity", "row", "col", "value"});
    const auto emit = [&w](const std::string& name, const std::vector<double>& m, int dim) {
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c)
                w.row({name, csv::fmt(r), csv::fmt(c),
                       csv::fmt(m[static_cast<std::size_t>(r * dim + c)])});
    };
    emit("info_mu", o.info_mu, o.p_mu);
    emit("info_sigma", o.info_sigma, o.p_sigma);
    emit("cov_mu", o.cov_mu, o.p_mu);
    emit("cov_sigma_complete", o.cov_sigma_complete, o.p_sigma);
    emit("cov_sigma_partial", o.cov_sigma_partial, o.p_sigma);
    std::cout << "wrote " << l.cfg.output_dir << "/oracle.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kinetic interacting-particle simulation and inference toolkit"};
    app.require_subcommand(1);

    CommonArgs sim_args, fit_args, rep_args, clt_args, scal_args, hypo_args, oracle_args;
    bool dump_traj = false;
    int hypo_particles = 3, hypo_probes = 10;

    auto* c_sim = app.add_subcommand("simulate", "simulate one dataset and write observations");
    add_common(c_sim, sim_args);
    c_sim->add_flag("--trajectory", dump_traj, "also dump the fine-grid trajectory (binary)");
    auto* c_fit = app.add_subcommand("fit", "simulate one dataset and fit it in each mode");
    add_common(c_fit, fit_args);
    auto* c_rep = app.add_subcommand("replicate", "run the Monte Carlo replication table");
    add_common(c_rep, rep_args);
    auto* c_clt = app.add_subcommand("clt", "normalized-error diagnostics against the oracle");
    add_common(c_clt, clt_args);
    auto* c_scal = app.add_subcommand("scaling", "log-log scaling studies");
    add_common(c_scal, scal_args);
    auto* c_hypo = app.add_subcommand("hypo-check", "numeric rank of the bracket system");
    add_common(c_hypo, hypo_args);
    c_hypo->add_option("--particles", hypo_particles, "system size N");
    c_hypo->add_option("--probes", hypo_probes, "number of random probe states");
    auto* c_oracle = app.add_subcommand("oracle", "integral-oracle information matrices");
    add_common(c_oracle, oracle_args);

    try {
        app.parse(argc, argv);
        if (c_sim->parsed()) return cmd_simulate(sim_args, dump_traj);
        if (c_fit->parsed()) return cmd_fit(fit_args);
        if (c_rep->parsed()) return cmd_replicate(rep_args);
        if (c_clt->parsed()) return cmd_clt(clt_args);
        if (c_scal->parsed()) return cmd_scaling(scal_args);
        if (c_hypo->parsed()) return cmd_hypo_check(hypo_args, hypo_particles, hypo_probes);
        if (c_oracle->parsed()) return cmd_oracle(oracle_args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
