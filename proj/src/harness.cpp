#include "kips/harness.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "kips/csv.hpp"
#include "kips/errors.hpp"
#include "kips/parallel.hpp"
#include "kips/rng.hpp"
#include "kips/stats.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace kips {

namespace fs = std::filesystem;

ExperimentConfig ExperimentConfig::from_config(const Config& raw) {
    ExperimentConfig cfg;
    cfg.model_name = raw.get_str("model", "name", cfg.model_name);
    const Theta dflt = default_theta0(cfg.model_name);
    cfg.theta0 = dflt;
    if (raw.has("model", "mu0")) cfg.theta0.mu = raw.get_doubles("model", "mu0");
    if (raw.has("model", "sigma0")) cfg.theta0.sigma = raw.get_doubles("model", "sigma0");
    cfg.horizon = raw.get_double("sim", "horizon", 1.0);

    const auto to_ints = [&](const std::string& sec, const std::string& key,
                             std::vector<int> dflt_v) {
        if (!raw.has(sec, key)) return dflt_v;
        std::vector<int> out;
        for (long v : raw.get_longs(sec, key)) out.push_back(static_cast<int>(v));
        return out;
    };
    cfg.grid_N = to_ints("grid", "N", {100});
    cfg.grid_n = to_ints("grid", "n", {200});
    cfg.grid_m = to_ints("grid", "fine_factor", {20});

    cfg.replications = static_cast<int>(raw.get_long("run", "replications", 100));
    if (raw.has("run", "modes")) {
        cfg.modes.clear();
        for (const auto& s : raw.get_strs("run", "modes")) cfg.modes.push_back(obs_mode_from_string(s));
    }
    cfg.seed = static_cast<std::uint64_t>(raw.get_long("run", "seed", 1));
    cfg.output_dir = raw.get_str("run", "output_dir", "out");
    cfg.threads = static_cast<int>(raw.get_long("run", "threads", 0));

    cfg.opt.starts = static_cast<int>(raw.get_long("optimizer", "starts", cfg.opt.starts));
    cfg.opt.max_evals = raw.get_long("optimizer", "max_evals", cfg.opt.max_evals);
    cfg.opt.grad_tol = raw.get_double("optimizer", "grad_tol", cfg.opt.grad_tol);
    cfg.opt.warm_start = raw.get_bool("optimizer", "warm_start", cfg.opt.warm_start);
    cfg.opt.seed = static_cast<std::uint64_t>(raw.get_long("optimizer", "seed", 0x5EED));

    cfg.oracle.particles = static_cast<int>(raw.get_long("oracle", "particles", 5000));
    cfg.oracle.fine_factor = static_cast<int>(raw.get_long("oracle", "fine_factor", 40));
    cfg.oracle.grid_steps = static_cast<int>(raw.get_long("oracle", "grid_steps", 200));
    cfg.oracle.seeds = static_cast<int>(raw.get_long("oracle", "seeds", 5));
    cfg.oracle.seed = static_cast<std::uint64_t>(raw.get_long("oracle", "seed", 20240901));
    cfg.oracle.horizon = cfg.horizon;

    cfg.surrogate_n = to_ints("scaling", "surrogate_n", {50, 100, 200, 400});
    cfg.surrogate_seeds = static_cast<int>(raw.get_long("scaling", "surrogate_seeds", 5));
    cfg.surrogate_N = static_cast<int>(raw.get_long("scaling", "surrogate_N", 100));
    cfg.surrogate_fine_factor =
        static_cast<int>(raw.get_long("scaling", "surrogate_fine_factor", 50));
    cfg.poc_N = to_ints("scaling", "poc_N", {10, 50, 250});
    cfg.poc_seeds = static_cast<int>(raw.get_long("scaling", "poc_seeds", 20));
    cfg.poc_obs_steps = static_cast<int>(raw.get_long("scaling", "poc_obs_steps", 50));
    cfg.poc_fine_factor = static_cast<int>(raw.get_long("scaling", "poc_fine_factor", 10));
    return cfg;
}

std::vector<GridCell> ExperimentConfig::cells() const {
    std::vector<GridCell> out;
    double prev_nd = std::numeric_limits<double>::infinity();
    for (int N : grid_N)
        for (int n : grid_n)
            for (int m : grid_m) {
                GridCell c;
                c.n_particles = N;
                c.obs_steps = n;
                c.fine_factor = m;
                c.n_delta = static_cast<double>(N) * horizon / n;
                c.nd_flagged = c.n_delta >= prev_nd;  // the asymptotics want N Delta -> 0
                prev_nd = c.n_delta;
                out.push_back(c);
            }
    return out;
}

namespace {

std::vector<std::string> row_header(int p1, int p2) {
    std::vector<std::string> h = {"cell", "replicate", "seed",     "mode", "N",
                                  "n",    "m",         "n_delta",  "converged", "boundary"};
    for (int k = 1; k <= p1; ++k) h.push_back("mu_hat_" + std::to_string(k));
    for (int k = 1; k <= p2; ++k) h.push_back("sigma_hat_" + std::to_string(k));
    for (int k = 1; k <= p1; ++k) h.push_back("err_mu_" + std::to_string(k));
    for (int k = 1; k <= p2; ++k) h.push_back("err_sigma_" + std::to_string(k));
    for (int k = 1; k <= p1; ++k) h.push_back("plugin_var_mu_" + std::to_string(k));
    for (int k = 1; k <= p2; ++k) h.push_back("plugin_var_sigma_" + std::to_string(k));
    return h;
}

std::vector<std::string> row_cells(const ReplicationRow& r) {
    std::vector<std::string> c = {csv::fmt(r.cell),
                                  csv::fmt(r.replicate),
                                  csv::fmt(static_cast<unsigned long long>(r.seed)),
                                  to_string(r.mode),
                                  csv::fmt(r.n_particles),
                                  csv::fmt(r.obs_steps),
                                  csv::fmt(r.fine_factor),
                                  csv::fmt(r.n_delta),
                                  r.converged ? "1" : "0",
                                  r.on_boundary ? "1" : "0"};
    const auto push_all = [&c](const std::vector<double>& v) {
        for (double t : v) c.push_back(csv::fmt(t));
    };
    push_all(r.mu_hat);
    push_all(r.sigma_hat);
    push_all(r.err_mu);
    push_all(r.err_sigma);
    push_all(r.plugin_var_mu);
    push_all(r.plugin_var_sigma);
    return c;
}

SimConfig cell_sim_config(const ExperimentConfig& cfg, const GridCell& cell, int cell_index,
                          int replicate) {
    SimConfig sim;
    sim.n_particles = cell.n_particles;
    sim.horizon = cfg.horizon;
    sim.obs_steps = cell.obs_steps;
    sim.fine_factor = cell.fine_factor;
    sim.seed = rng::mix(rng::mix(cfg.seed, static_cast<std::uint64_t>(cell_index)),
                        static_cast<std::uint64_t>(replicate));
    return sim;
}

ReplicationRow make_row(const ExperimentConfig& cfg, const GridCell& cell, int cell_index,
                        int replicate, ObsMode mode, const Model& model,
                        const ObservationSet& obs, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const EstimateReport rep = fit(model, obs, mode, cfg.opt, &cfg.theta0);
    ReplicationRow row;
    row.cell = cell_index;
    row.replicate = replicate;
    row.seed = seed;
    row.mode = mode;
    row.n_particles = cell.n_particles;
    row.obs_steps = cell.obs_steps;
    row.fine_factor = cell.fine_factor;
    row.n_delta = cell.n_delta;
    row.converged = rep.converged;
    row.on_boundary = rep.on_boundary;
    row.mu_hat = rep.mu_hat;
    row.sigma_hat = rep.sigma_hat;
    row.err_mu = rep.norm_err_mu.value();
    row.err_sigma = rep.norm_err_sigma.value();
    const int p1 = model.p_mu(), p2 = model.p_sigma();
    for (int k = 0; k < p1; ++k)
        row.plugin_var_mu.push_back(rep.plug_in.invertible
                                        ? rep.plug_in.asy_cov_mu[static_cast<std::size_t>(k * p1 + k)]
                                        : std::numeric_limits<double>::quiet_NaN());
    for (int k = 0; k < p2; ++k)
        row.plugin_var_sigma.push_back(
            rep.plug_in.invertible ? rep.plug_in.asy_cov_sigma[static_cast<std::size_t>(k * p2 + k)]
                                   : std::numeric_limits<double>::quiet_NaN());
    row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

}  // namespace

ReplicationRow run_one(const ExperimentConfig& cfg, int cell_index, int replicate, ObsMode mode) {
    const auto cells = cfg.cells();
    if (cell_index < 0 || cell_index >= static_cast<int>(cells.size()))
        throw ConfigError("run_one: cell index out of range");
    const GridCell& cell = cells[static_cast<std::size_t>(cell_index)];
    const auto model = make_model(cfg.model_name);
    const SimConfig sim = cell_sim_config(cfg, cell, cell_index, replicate);
    const ObservationSet obs = simulate_observations(*model, cfg.theta0, sim);
    return make_row(cfg, cell, cell_index, replicate, mode, *model, obs, sim.seed);
}

namespace {

struct Journal {
    std::vector<std::pair<int, int>> done;  // (cell, replicate) prefix
};

Journal read_journal(const std::string& path) {
    Journal j;
    std::ifstream in(path);
    if (!in) return j;
    std::string line;
    while (std::getline(in, line)) {
        int c = 0, r = 0;
        if (std::sscanf(line.c_str(), "%d,%d", &c, &r) == 2) j.done.emplace_back(c, r);
    }
    return j;
}

}  // namespace

std::vector<ReplicationRow> run_replications(const ExperimentConfig& cfg,
                                             const std::string& csv_path) {
    const auto model = make_model(cfg.model_name);
    const int p1 = model->p_mu(), p2 = model->p_sigma();
    const auto cells = cfg.cells();
    if (cfg.threads > 0) set_threads(cfg.threads);

    struct Item {
        int cell, rep;
    };
    std::vector<Item> items;
    for (int c = 0; c < static_cast<int>(cells.size()); ++c)
        for (int r = 0; r < cfg.replications; ++r) items.push_back({c, r});

    // resume bookkeeping: the journal lists finished (cell, replicate) items in
    // emission order; the rows CSV must hold exactly header + modes-per-item
    // rows for that prefix
    const std::string journal_path = csv_path + ".journal";
    const std::string timing_path = csv_path + ".timings.csv";
    Journal journal = read_journal(journal_path);
    std::size_t resume_items = 0;
    std::vector<std::vector<std::string>> kept_rows;
    if (!journal.done.empty()) {
        for (std::size_t k = 0; k < journal.done.size() && k < items.size(); ++k) {
            if (journal.done[k].first != items[k].cell || journal.done[k].second != items[k].rep)
                break;
            ++resume_items;
        }
        if (resume_items > 0 && fs::exists(csv_path)) {
            const auto old = csv::read(csv_path);
            const std::size_t want = 1 + resume_items * cfg.modes.size();
            if (old.size() >= want) {
                kept_rows.assign(old.begin(), old.begin() + static_cast<long>(want));
            } else {
                resume_items = 0;  // torn csv: recompute everything
            }
        } else {
            resume_items = 0;
        }
    }

    csv::Writer out(csv_path);
    csv::Writer jw(journal_path);
    csv::Writer tw(timing_path, resume_items > 0);
    if (resume_items > 0) {
        for (const auto& r : kept_rows) out.row(r);
        for (std::size_t k = 0; k < resume_items; ++k)
            jw.row({csv::fmt(items[k].cell), csv::fmt(items[k].rep)});
    } else {
        out.header(row_header(p1, p2));
        tw.header({"cell", "replicate", "mode", "wall_s"});
    }
    out.flush();
    jw.flush();

    std::vector<ReplicationRow> all_rows;
    all_rows.reserve(items.size() * cfg.modes.size());
    std::vector<std::vector<ReplicationRow>> results(items.size());
    std::vector<char> ready(items.size(), 0);
    std::size_t next_flush = resume_items;

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::int64_t idx = static_cast<std::int64_t>(resume_items);
         idx < static_cast<std::int64_t>(items.size()); ++idx) {
        const Item it = items[static_cast<std::size_t>(idx)];
        const GridCell& cell = cells[static_cast<std::size_t>(it.cell)];
        const SimConfig sim = cell_sim_config(cfg, cell, it.cell, it.rep);
        const ObservationSet obs = simulate_observations(*model, cfg.theta0, sim);
        std::vector<ReplicationRow> batch;
        for (ObsMode mode : cfg.modes)
            batch.push_back(make_row(cfg, cell, it.cell, it.rep, mode, *model, obs, sim.seed));
#ifdef _OPENMP
#pragma omp critical(kips_row_sink)
#endif
        {
            results[static_cast<std::size_t>(idx)] = std::move(batch);
            ready[static_cast<std::size_t>(idx)] = 1;
            while (next_flush < items.size() && ready[next_flush]) {
                for (const auto& row : results[next_flush]) {
                    out.row(row_cells(row));
                    tw.row({csv::fmt(row.cell), csv::fmt(row.replicate), to_string(row.mode),
                            csv::fmt(row.wall_s)});
                }
                jw.row({csv::fmt(items[next_flush].cell), csv::fmt(items[next_flush].rep)});
                out.flush();
                jw.flush();
                ++next_flush;
            }
        }
    }

    // assemble the full row list (resumed prefix re-read from the csv)
    if (resume_items > 0) {
        all_rows = rows_from_csv(csv_path, p1, p2);
        return all_rows;
    }
    for (std::size_t idx = 0; idx < items.size(); ++idx)
        for (auto& row : results[idx]) all_rows.push_back(std::move(row));
    return all_rows;
}

std::vector<ReplicationRow> rows_from_csv(const std::string& csv_path, int p_mu, int p_sigma) {
    const auto rows = csv::read(csv_path);
    if (rows.empty()) throw InsufficientDataError("rows csv is empty: " + csv_path);
    const std::size_t expect = 10 + 3 * static_cast<std::size_t>(p_mu + p_sigma);
    std::vector<ReplicationRow> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& c = rows[i];
        if (c.size() != expect)
            throw InsufficientDataError("rows csv has unexpected column count: " + csv_path);
        ReplicationRow r;
        std::size_t k = 0;
        r.cell = std::stoi(c[k++]);
        r.replicate = std::stoi(c[k++]);
        r.seed = std::stoull(c[k++]);
        r.mode = obs_mode_from_string(c[k++]);
        r.n_particles = std::stoi(c[k++]);
        r.obs_steps = std::stoi(c[k++]);
        r.fine_factor = std::stoi(c[k++]);
        r.n_delta = std::strtod(c[k++].c_str(), nullptr);
        r.converged = c[k++] == "1";
        r.on_boundary = c[k++] == "1";
        const auto grab = [&](int count) {
            std::vector<double> v;
            for (int q = 0; q < count; ++q) v.push_back(std::strtod(c[k++].c_str(), nullptr));
            return v;
        };
        r.mu_hat = grab(p_mu);
        r.sigma_hat = grab(p_sigma);
        r.err_mu = grab(p_mu);
        r.err_sigma = grab(p_sigma);
        r.plugin_var_mu = grab(p_mu);
        r.plugin_var_sigma = grab(p_sigma);
        out.push_back(std::move(r));
    }
    return out;
}

OracleVariances oracle_variances(const Model& model, const Theta& theta0,
                                 const OracleConfig& cfg) {
    const int p1 = model.p_mu(), p2 = model.p_sigma();
    std::vector<StateFn> fs;
    for (int k = 0; k < p1; ++k)
        for (int l = 0; l < p1; ++l)
            fs.push_back([&model, &theta0, k, l, p1](Point2 z, const MeasureSummary& s) {
                double g[8];
                model.drift_grad(theta0.mu, z, s, {g, static_cast<std::size_t>(p1)});
                const double a = model.diffusion(theta0.sigma, z, s);
                return g[k] * g[l] / (a * a);
            });
    for (int k = 0; k < p2; ++k)
        for (int l = 0; l < p2; ++l)
            fs.push_back([&model, &theta0, k, l, p2](Point2 z, const MeasureSummary& s) {
                double g[8];
                model.diffusion_grad(theta0.sigma, z, s, {g, static_cast<std::size_t>(p2)});
                const double a = model.diffusion(theta0.sigma, z, s);
                // c = a^2: dc_k / c = 2 da_k / a
                return (2.0 * g[k] / a) * (2.0 * g[l] / a);
            });
    const auto vals = pi_bar_oracle_many(fs, model, theta0, cfg);

    OracleVariances out;
    out.p_mu = p1;
    out.p_sigma = p2;
    Eigen::MatrixXd im(p1, p1), is(p2, p2);
    std::size_t idx = 0;
    for (int k = 0; k < p1; ++k)
        for (int l = 0; l < p1; ++l) im(k, l) = vals[idx++].mean;
    for (int k = 0; k < p2; ++k)
        for (int l = 0; l < p2; ++l) is(k, l) = vals[idx++].mean;
    out.info_mu.assign(im.data(), im.data() + im.size());
    out.info_sigma.assign(is.data(), is.data() + is.size());
    const Eigen::MatrixXd cm = im.inverse();
    const Eigen::MatrixXd cs = is.inverse();
    out.cov_mu.assign(cm.data(), cm.data() + cm.size());
    const Eigen::MatrixXd cs2 = 2.0 * cs;
    const Eigen::MatrixXd cs94 = 2.25 * cs;
    out.cov_sigma_complete.assign(cs2.data(), cs2.data() + cs2.size());
    out.cov_sigma_partial.assign(cs94.data(), cs94.data() + cs94.size());
    return out;
}

const CltCellSummary* CltSummary::find(int cell, ObsMode mode) const {
    for (const auto& c : cells)
        if (c.cell == cell && c.mode == mode) return &c;
    return nullptr;
}

CltSummary clt_summary(const std::vector<ReplicationRow>& rows, const OracleVariances& oracle,
                       const std::string& out_dir, long min_rows) {
    fs::create_directories(out_dir);
    const int p1 = oracle.p_mu, p2 = oracle.p_sigma;
    const int p = p1 + p2;
    CltSummary summary;

    std::map<std::pair<int, int>, std::vector<const ReplicationRow*>> groups;
    for (const auto& r : rows)
        if (r.converged) groups[{r.cell, static_cast<int>(r.mode)}].push_back(&r);

    csv::Writer hist(out_dir + "/clt_hist.csv");
    hist.header({"cell", "mode", "component", "bin_lo", "bin_hi", "count"});
    csv::Writer qq(out_dir + "/clt_qq.csv");
    qq.header({"cell", "mode", "component", "theoretical", "sample"});

    for (const auto& [key, group] : groups) {
        if (static_cast<long>(group.size()) < min_rows)
            throw InsufficientDataError("clt_summary: cell " + std::to_string(key.first) + " mode " +
                                        std::to_string(key.second) + " has only " +
                                        std::to_string(group.size()) + " converged rows (need " +
                                        std::to_string(min_rows) + ")");
        CltCellSummary cell;
        cell.cell = key.first;
        cell.mode = static_cast<ObsMode>(key.second);
        cell.rows_used = static_cast<long>(group.size());

        std::vector<std::vector<double>> err;
        err.reserve(group.size());
        for (const auto* r : group) {
            std::vector<double> e(r->err_mu);
            e.insert(e.end(), r->err_sigma.begin(), r->err_sigma.end());
            err.push_back(std::move(e));
        }
        cell.err_cov = stats::covariance(err);
        cell.err_mean.resize(static_cast<std::size_t>(p));
        std::vector<double> buf(group.size());
        for (int k = 0; k < p; ++k) {
            for (std::size_t i = 0; i < group.size(); ++i) buf[i] = err[i][static_cast<std::size_t>(k)];
            cell.err_mean[static_cast<std::size_t>(k)] = stats::csum(buf) / static_cast<double>(buf.size());
            const auto ad = stats::anderson_darling_normal(buf);
            cell.ad_stat.push_back(ad.a2_star);
            cell.ad_pass_1pct.push_back(ad.pass_1pct);

            // histogram (30 bins over mean +- 4 sd) and QQ pairs
            const auto mv = stats::mean_var(buf);
            const double sd = std::sqrt(mv.var);
            const int nbins = 30;
            const double lo = mv.mean - 4.0 * sd, hi = mv.mean + 4.0 * sd;
            std::vector<long> counts(nbins, 0);
            for (double v : buf) {
                int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * nbins));
                b = std::min(std::max(b, 0), nbins - 1);
                ++counts[static_cast<std::size_t>(b)];
            }
            for (int b = 0; b < nbins; ++b)
                hist.row({csv::fmt(cell.cell), to_string(cell.mode), csv::fmt(k),
                          csv::fmt(lo + (hi - lo) * b / nbins),
                          csv::fmt(lo + (hi - lo) * (b + 1) / nbins),
                          csv::fmt(counts[static_cast<std::size_t>(b)])});
            std::vector<double> sorted(buf);
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t i = 0; i < sorted.size(); ++i) {
                const double q = stats::normal_quantile((static_cast<double>(i) + 0.5) /
                                                        static_cast<double>(sorted.size()));
                qq.row({csv::fmt(cell.cell), to_string(cell.mode), csv::fmt(k),
                        csv::fmt(mv.mean + sd * q), csv::fmt(sorted[i])});
            }
        }

        // averaged plug-in variance diagonals
        cell.plugin_var.assign(static_cast<std::size_t>(p), 0.0);
        for (const auto* r : group) {
            for (int k = 0; k < p1; ++k)
                cell.plugin_var[static_cast<std::size_t>(k)] += r->plugin_var_mu[static_cast<std::size_t>(k)];
            for (int k = 0; k < p2; ++k)
                cell.plugin_var[static_cast<std::size_t>(p1 + k)] +=
                    r->plugin_var_sigma[static_cast<std::size_t>(k)];
        }
        for (auto& v : cell.plugin_var) v /= static_cast<double>(group.size());

        for (int k = 0; k < p1; ++k)
            cell.oracle_var.push_back(oracle.cov_mu[static_cast<std::size_t>(k * p1 + k)]);
        const auto& ocs = cell.mode == ObsMode::Partial ? oracle.cov_sigma_partial
                                                        : oracle.cov_sigma_complete;
        for (int k = 0; k < p2; ++k)
            cell.oracle_var.push_back(ocs[static_cast<std::size_t>(k * p2 + k)]);

        for (int k = 0; k < p; ++k)
            cell.variance_ratio.push_back(cell.err_cov[static_cast<std::size_t>(k * p + k)] /
                                          cell.oracle_var[static_cast<std::size_t>(k)]);
        summary.cells.push_back(std::move(cell));
    }

    csv::Writer sw(out_dir + "/clt_summary.csv");
    std::vector<std::string> hdr = {"cell", "mode", "rows"};
    for (int k = 0; k < p; ++k) hdr.push_back("err_mean_" + std::to_string(k + 1));
    for (int k = 0; k < p; ++k) hdr.push_back("err_var_" + std::to_string(k + 1));
    for (int k = 0; k < p; ++k) hdr.push_back("plugin_var_" + std::to_string(k + 1));
    for (int k = 0; k < p; ++k) hdr.push_back("oracle_var_" + std::to_string(k + 1));
    for (int k = 0; k < p; ++k) hdr.push_back("var_ratio_" + std::to_string(k + 1));
    for (int k = 0; k < p; ++k) hdr.push_back("ad_stat_" + std::to_string(k + 1));
    sw.header(hdr);
    for (const auto& c : summary.cells) {
        std::vector<std::string> row = {csv::fmt(c.cell), to_string(c.mode), csv::fmt(c.rows_used)};
        for (int k = 0; k < p; ++k) row.push_back(csv::fmt(c.err_mean[static_cast<std::size_t>(k)]));
        for (int k = 0; k < p; ++k)
            row.push_back(csv::fmt(c.err_cov[static_cast<std::size_t>(k * p + k)]));
        for (int k = 0; k < p; ++k) row.push_back(csv::fmt(c.plugin_var[static_cast<std::size_t>(k)]));
        for (int k = 0; k < p; ++k) row.push_back(csv::fmt(c.oracle_var[static_cast<std::size_t>(k)]));
        for (int k = 0; k < p; ++k)
            row.push_back(csv::fmt(c.variance_ratio[static_cast<std::size_t>(k)]));
        for (int k = 0; k < p; ++k) row.push_back(csv::fmt(c.ad_stat[static_cast<std::size_t>(k)]));
        sw.row(row);
    }
    return summary;
}

std::vector<SlopeRow> scaling_study(const ExperimentConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto model = make_model(cfg.model_name);
    std::vector<SlopeRow> out;

    // RMSE of the estimates vs N (mu) and vs N/Delta (sigma), complete mode
    {
        SlopeRow mu_row, sigma_row;
        mu_row.study = "rmse_mu_vs_N";
        sigma_row.study = "rmse_sigma_vs_N_over_delta";
        for (std::size_t ci = 0; ci < cfg.grid_N.size(); ++ci) {
            const GridCell cell{cfg.grid_N[ci], cfg.grid_n.front(), cfg.grid_m.front(), 0.0, false};
            std::vector<double> mu_sq, sigma_sq;
            for (int r = 0; r < cfg.replications; ++r) {
                const SimConfig sim = cell_sim_config(cfg, cell, static_cast<int>(ci), r);
                const ObservationSet obs = simulate_observations(*model, cfg.theta0, sim);
                const EstimateReport rep = fit(*model, obs, ObsMode::Complete, cfg.opt, &cfg.theta0);
                double smu = 0.0, ssd = 0.0;
                for (std::size_t k = 0; k < rep.mu_hat.size(); ++k)
                    smu += sq(rep.mu_hat[k] - cfg.theta0.mu[k]);
                for (std::size_t k = 0; k < rep.sigma_hat.size(); ++k)
                    ssd += sq(rep.sigma_hat[k] - cfg.theta0.sigma[k]);
                mu_sq.push_back(smu);
                sigma_sq.push_back(ssd);
            }
            const double delta = cfg.horizon / cfg.grid_n.front();
            mu_row.x.push_back(cell.n_particles);
            mu_row.y.push_back(std::sqrt(stats::csum(mu_sq) / static_cast<double>(mu_sq.size())));
            sigma_row.x.push_back(cell.n_particles / delta);
            sigma_row.y.push_back(
                std::sqrt(stats::csum(sigma_sq) / static_cast<double>(sigma_sq.size())));
        }
        out.push_back(std::move(mu_row));
        out.push_back(std::move(sigma_row));
    }

    // RMS surrogate velocity error vs Delta
    {
        SlopeRow row;
        row.study = "surrogate_err_vs_delta";
        for (int n : cfg.surrogate_n) {
            std::vector<double> ms;
            for (int s = 0; s < cfg.surrogate_seeds; ++s) {
                SimConfig sim;
                sim.n_particles = cfg.surrogate_N;
                sim.horizon = cfg.horizon;
                sim.obs_steps = n;
                sim.fine_factor = cfg.surrogate_fine_factor;
                sim.seed = rng::mix(cfg.seed, rng::mix(static_cast<std::uint64_t>(n),
                                                       static_cast<std::uint64_t>(s)));
                const TrajectoryGrid grid = simulate_ips(*model, cfg.theta0, sim);
                const ObservationSet obs = subsample(grid, sim);
                const SurrogateSet sur = surrogate(obs);
                double acc = 0.0;
                long cnt = 0;
                for (int i = 0; i < sim.n_particles; ++i)
                    for (int j = 0; j < n; ++j) {
                        acc += sq(sur.x_tilde(i, j) - (*obs.x)(i, j));
                        ++cnt;
                    }
                ms.push_back(acc / static_cast<double>(cnt));
            }
            row.x.push_back(cfg.horizon / n);
            row.y.push_back(std::sqrt(stats::csum(ms) / static_cast<double>(ms.size())));
        }
        out.push_back(std::move(row));
    }

    // coupled mean-square gap vs N
    {
        SlopeRow row;
        row.study = "poc_gap_vs_N";
        for (int N : cfg.poc_N) {
            std::vector<double> gaps;
            for (int s = 0; s < cfg.poc_seeds; ++s) {
                SimConfig sim;
                sim.n_particles = N;
                sim.horizon = cfg.horizon;
                sim.obs_steps = cfg.poc_obs_steps;
                sim.fine_factor = cfg.poc_fine_factor;
                sim.seed = rng::mix(cfg.seed, rng::mix(static_cast<std::uint64_t>(N),
                                                       static_cast<std::uint64_t>(2 * s)));
                CoupledOptions co;
                co.ref_seed = rng::mix(sim.seed, 0xC0FFEEull);
                const CoupledPair pair = simulate_coupled(*model, cfg.theta0, sim, co);
                gaps.push_back(coupled_gap(pair));
            }
            row.x.push_back(N);
            row.y.push_back(stats::csum(gaps) / static_cast<double>(gaps.size()));
        }
        out.push_back(std::move(row));
    }

    for (auto& row : out) {
        if (row.x.size() >= 3) {
            try {
                const auto f = stats::loglog_fit(row.x, row.y);
                row.slope = f.slope;
                row.r2 = f.r2;
                row.degenerate = !(f.r2 > 0.2);
            } catch (const std::invalid_argument&) {
                row.degenerate = true;
            }
        } else {
            row.degenerate = true;
        }
    }
    write_slopes_csv(out, out_dir + "/scaling.csv");
    return out;
}

void write_slopes_csv(const std::vector<SlopeRow>& slopes, const std::string& path) {
    csv::Writer w(path);
    w.header({"study", "x", "y", "slope", "r2", "degenerate"});
    for (const auto& s : slopes)
        for (std::size_t i = 0; i < s.x.size(); ++i)
            w.row({s.study, csv::fmt(s.x[i]), csv::fmt(s.y[i]), csv::fmt(s.slope), csv::fmt(s.r2),
                   s.degenerate ? "1" : "0"});
}

void write_manifest(const ExperimentConfig& cfg, const Config& raw, const std::string& path) {
    std::ofstream out(path);
    out << "# run manifest\n";
    out << "version = kips 1.0.0\n";
    out << "model = " << cfg.model_name << "\n";
    const auto cells = cfg.cells();
    for (std::size_t c = 0; c < cells.size(); ++c)
        out << "cell_" << c << " = N " << cells[c].n_particles << ", n " << cells[c].obs_steps
            << ", m " << cells[c].fine_factor << ", N*delta " << cells[c].n_delta
            << (cells[c].nd_flagged ? " (flagged: N*delta not decreasing)" : "") << "\n";
    out << "\n# config copy\n" << raw.text();
}

}  // namespace kips
