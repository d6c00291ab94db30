#include "kips/simulate.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <stdexcept>

#include "kips/csv.hpp"
#include "kips/errors.hpp"
#include "kips/rng.hpp"

namespace kips {

void SimConfig::validate() const {
    if (n_particles < 1) throw ConfigError("SimConfig: n_particles >= 1");
    if (obs_steps < 3) throw ConfigError("SimConfig: obs_steps >= 3");
    if (!(horizon > 0.0)) throw ConfigError("SimConfig: horizon > 0");
    if (fine_factor < 1) throw ConfigError("SimConfig: fine_factor >= 1");
}

namespace {

constexpr double kDivergenceCap = 1e9;

std::vector<Point2> draw_initial(const SimConfig& cfg) {
    std::vector<Point2> state(static_cast<std::size_t>(cfg.n_particles));
    if (cfg.init == InitLaw::Point) {
        for (auto& z : state) z = cfg.init_point;
    } else {
        for (int i = 0; i < cfg.n_particles; ++i) {
            const auto [gy, gx] =
                rng::normal_pair(cfg.seed, static_cast<std::uint64_t>(i), 0, rng::Stream::Init);
            state[static_cast<std::size_t>(i)] = {gy, gx};
        }
    }
    return state;
}

// One Euler-Maruyama step. The position update uses the pre-step velocity;
// the velocity update sees the coefficients at the supplied measure summary.
// noise(i) returns the Brownian increment consumed by particle i.
template <class NoiseFn>
void euler_step(const Model& model, std::span<const double> mu, std::span<const double> sigma,
                std::vector<Point2>& state, const MeasureSummary& s, long k, double dt,
                NoiseFn&& noise, double* db_out) {
    const int n = static_cast<int>(state.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int i = 0; i < n; ++i) {
        Point2& z = state[static_cast<std::size_t>(i)];
        const double b = model.drift(mu, z, s);
        const double a = model.diffusion(sigma, z, s);
        const double db = noise(i);
        const double ny = z.y + z.x * dt;
        const double nx = z.x + b * dt + a * db;
        z = {ny, nx};
        if (db_out) db_out[i] = db;
    }
    for (int i = 0; i < n; ++i) {
        const Point2 z = state[static_cast<std::size_t>(i)];
        if (!std::isfinite(z.y) || !std::isfinite(z.x) || std::abs(z.y) > kDivergenceCap ||
            std::abs(z.x) > kDivergenceCap)
            throw SimulationDiverged(i, k);
    }
}

void check_theta(const Model& model, const Theta& theta0) {
    if (!model.box().contains_mu(theta0.mu) || !model.box().contains_sigma(theta0.sigma))
        throw std::domain_error("simulate: theta0 outside the parameter box");
}

}  // namespace

TrajectoryGrid simulate_ips(const Model& model, const Theta& theta0, const SimConfig& cfg) {
    cfg.validate();
    check_theta(model, theta0);
    const long steps = cfg.fine_steps();
    const double dt = cfg.fine_delta();
    const double sq_dt = std::sqrt(dt);
    const int n = cfg.n_particles;

    TrajectoryGrid grid;
    grid.cfg = cfg;
    grid.mu0 = theta0.mu;
    grid.sigma0 = theta0.sigma;
    grid.times.resize(static_cast<std::size_t>(steps) + 1);
    for (long k = 0; k <= steps; ++k) grid.times[static_cast<std::size_t>(k)] = static_cast<double>(k) * dt;
    grid.y = Array2D(n, static_cast<int>(steps) + 1);
    grid.x = Array2D(n, static_cast<int>(steps) + 1);
    grid.db = Array2D(n, static_cast<int>(steps));

    std::vector<Point2> state = draw_initial(cfg);
    std::vector<double> db_col(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        grid.y(i, 0) = state[static_cast<std::size_t>(i)].y;
        grid.x(i, 0) = state[static_cast<std::size_t>(i)].x;
    }
    for (long k = 0; k < steps; ++k) {
        const MeasureSummary s = model.summarize(state);
        euler_step(
            model, theta0.mu, theta0.sigma, state, s, k, dt,
            [&](int i) {
                return sq_dt * rng::normal(cfg.seed, static_cast<std::uint64_t>(i),
                                           static_cast<std::uint64_t>(k), rng::Stream::Noise);
            },
            db_col.data());
        for (int i = 0; i < n; ++i) {
            grid.y(i, static_cast<int>(k) + 1) = state[static_cast<std::size_t>(i)].y;
            grid.x(i, static_cast<int>(k) + 1) = state[static_cast<std::size_t>(i)].x;
            grid.db(i, static_cast<int>(k)) = db_col[static_cast<std::size_t>(i)];
        }
    }
    return grid;
}

ObservationSet simulate_observations(const Model& model, const Theta& theta0,
                                     const SimConfig& cfg) {
    cfg.validate();
    check_theta(model, theta0);
    const long steps = cfg.fine_steps();
    const double dt = cfg.fine_delta();
    const double sq_dt = std::sqrt(dt);
    const int n = cfg.n_particles;
    const int m = cfg.fine_factor;

    ObservationSet obs;
    obs.delta = cfg.obs_delta();
    obs.mode = ObsMode::Complete;
    obs.times.resize(static_cast<std::size_t>(cfg.obs_steps) + 1);
    obs.y = Array2D(n, cfg.obs_steps + 1);
    obs.x = Array2D(n, cfg.obs_steps + 1);

    std::vector<Point2> state = draw_initial(cfg);
    const auto record = [&](long k) {
        if (k % m != 0) return;
        const int j = static_cast<int>(k / m);
        obs.times[static_cast<std::size_t>(j)] = static_cast<double>(k) * dt;
        for (int i = 0; i < n; ++i) {
            obs.y(i, j) = state[static_cast<std::size_t>(i)].y;
            (*obs.x)(i, j) = state[static_cast<std::size_t>(i)].x;
        }
    };
    record(0);
    for (long k = 0; k < steps; ++k) {
        const MeasureSummary s = model.summarize(state);
        euler_step(
            model, theta0.mu, theta0.sigma, state, s, k, dt,
            [&](int i) {
                return sq_dt * rng::normal(cfg.seed, static_cast<std::uint64_t>(i),
                                           static_cast<std::uint64_t>(k), rng::Stream::Noise);
            },
            nullptr);
        record(k + 1);
    }
    return obs;
}

ObservationSet subsample(const TrajectoryGrid& grid, const SimConfig& cfg) {
    if (grid.cfg.n_particles != cfg.n_particles || grid.cfg.obs_steps != cfg.obs_steps ||
        grid.cfg.fine_factor != cfg.fine_factor || grid.y.cols() != cfg.obs_steps * cfg.fine_factor + 1)
        throw std::invalid_argument("subsample: grid was not produced with this config");
    const int n = cfg.n_particles;
    const int m = cfg.fine_factor;
    ObservationSet obs;
    obs.delta = cfg.obs_delta();
    obs.mode = ObsMode::Complete;
    obs.times.resize(static_cast<std::size_t>(cfg.obs_steps) + 1);
    obs.y = Array2D(n, cfg.obs_steps + 1);
    obs.x = Array2D(n, cfg.obs_steps + 1);
    for (int j = 0; j <= cfg.obs_steps; ++j) {
        const int k = j * m;
        obs.times[static_cast<std::size_t>(j)] = grid.times[static_cast<std::size_t>(k)];
        for (int i = 0; i < n; ++i) {
            obs.y(i, j) = grid.y(i, k);
            (*obs.x)(i, j) = grid.x(i, k);
        }
    }
    return obs;
}

CoupledPair simulate_coupled(const Model& model, const Theta& theta0, const SimConfig& cfg,
                             const CoupledOptions& opts) {
    cfg.validate();
    check_theta(model, theta0);
    const int n_ref = opts.ref_particles > 0 ? opts.ref_particles
                                             : std::min(20 * cfg.n_particles, 5000);
    if (n_ref < cfg.n_particles)
        throw ConfigError("simulate_coupled: ref_particles must be >= n_particles");
    if (opts.ref_seed == cfg.seed)
        throw ConfigError("simulate_coupled: reference noise must use an independent seed");

    const long steps = cfg.fine_steps();
    const double dt = cfg.fine_delta();
    const double sq_dt = std::sqrt(dt);
    const int n = cfg.n_particles;
    const int m = cfg.fine_factor;

    auto make_grid = [&](std::uint64_t seed) {
        TrajectoryGrid g;
        g.cfg = cfg;
        g.cfg.seed = seed;
        g.mu0 = theta0.mu;
        g.sigma0 = theta0.sigma;
        g.times.resize(static_cast<std::size_t>(steps) + 1);
        for (long k = 0; k <= steps; ++k) g.times[static_cast<std::size_t>(k)] = static_cast<double>(k) * dt;
        g.y = Array2D(n, static_cast<int>(steps) + 1);
        g.x = Array2D(n, static_cast<int>(steps) + 1);
        g.db = Array2D(n, static_cast<int>(steps));
        return g;
    };

    CoupledPair pair;
    pair.ips = make_grid(cfg.seed);
    pair.mv_copies = make_grid(cfg.seed);

    SimConfig ref_cfg = cfg;
    ref_cfg.n_particles = n_ref;
    ref_cfg.seed = opts.ref_seed;
    std::vector<Point2> ref_state = draw_initial(ref_cfg);
    std::vector<Point2> ips_state = draw_initial(cfg);
    std::vector<Point2> mv_state = ips_state;  // copies start from the same Z_0

    std::vector<double> db_col(static_cast<std::size_t>(n));
    pair.reference_flow.reserve(static_cast<std::size_t>(cfg.obs_steps) + 1);

    for (long k = 0; k < steps; ++k) {
        const MeasureSummary s_ref = model.summarize(ref_state);
        const MeasureSummary s_ips = model.summarize(ips_state);
        if (k % m == 0) pair.reference_flow.emplace_back(ref_state);
        // record full fine columns
        for (int i = 0; i < n; ++i) {
            pair.ips.y(i, static_cast<int>(k)) = ips_state[static_cast<std::size_t>(i)].y;
            pair.ips.x(i, static_cast<int>(k)) = ips_state[static_cast<std::size_t>(i)].x;
            pair.mv_copies.y(i, static_cast<int>(k)) = mv_state[static_cast<std::size_t>(i)].y;
            pair.mv_copies.x(i, static_cast<int>(k)) = mv_state[static_cast<std::size_t>(i)].x;
        }
        euler_step(
            model, theta0.mu, theta0.sigma, ips_state, s_ips, k, dt,
            [&](int i) {
                return sq_dt * rng::normal(cfg.seed, static_cast<std::uint64_t>(i),
                                           static_cast<std::uint64_t>(k), rng::Stream::Noise);
            },
            db_col.data());
        euler_step(
            model, theta0.mu, theta0.sigma, mv_state, s_ref, k, dt,
            [&](int i) { return db_col[static_cast<std::size_t>(i)]; }, nullptr);
        euler_step(
            model, theta0.mu, theta0.sigma, ref_state, s_ref, k, dt,
            [&](int i) {
                return sq_dt * rng::normal(opts.ref_seed, static_cast<std::uint64_t>(i),
                                           static_cast<std::uint64_t>(k), rng::Stream::RefNoise);
            },
            nullptr);
        for (int i = 0; i < n; ++i) {
            pair.ips.db(i, static_cast<int>(k)) = db_col[static_cast<std::size_t>(i)];
            pair.mv_copies.db(i, static_cast<int>(k)) = db_col[static_cast<std::size_t>(i)];
        }
    }
    // final column and final reference measure
    for (int i = 0; i < n; ++i) {
        pair.ips.y(i, static_cast<int>(steps)) = ips_state[static_cast<std::size_t>(i)].y;
        pair.ips.x(i, static_cast<int>(steps)) = ips_state[static_cast<std::size_t>(i)].x;
        pair.mv_copies.y(i, static_cast<int>(steps)) = mv_state[static_cast<std::size_t>(i)].y;
        pair.mv_copies.x(i, static_cast<int>(steps)) = mv_state[static_cast<std::size_t>(i)].x;
    }
    pair.reference_flow.emplace_back(ref_state);
    return pair;
}

void stream_fine_states(
    const Model& model, const Theta& theta0, const SimConfig& cfg,
    const std::function<void(long, std::span<const Point2>, const MeasureSummary&)>& visit) {
    cfg.validate();
    check_theta(model, theta0);
    const long steps = cfg.fine_steps();
    const double dt = cfg.fine_delta();
    const double sq_dt = std::sqrt(dt);
    std::vector<Point2> state = draw_initial(cfg);
    for (long k = 0; k < steps; ++k) {
        const MeasureSummary s = model.summarize(state);
        visit(k, state, s);
        euler_step(
            model, theta0.mu, theta0.sigma, state, s, k, dt,
            [&](int i) {
                return sq_dt * rng::normal(cfg.seed, static_cast<std::uint64_t>(i),
                                           static_cast<std::uint64_t>(k), rng::Stream::Noise);
            },
            nullptr);
    }
    visit(steps, state, model.summarize(state));
}

double coupled_gap(const CoupledPair& pair) {
    const SimConfig& cfg = pair.ips.cfg;
    const int m = cfg.fine_factor;
    double worst = 0.0;
    for (int j = 0; j <= cfg.obs_steps; ++j) {
        const int k = j * m;
        double s = 0.0;
        for (int i = 0; i < cfg.n_particles; ++i) {
            s += sq(pair.ips.y(i, k) - pair.mv_copies.y(i, k)) +
                 sq(pair.ips.x(i, k) - pair.mv_copies.x(i, k));
        }
        worst = std::max(worst, s / cfg.n_particles);
    }
    return worst;
}

namespace {

constexpr std::uint64_t kTrajMagic = 0x4a52545350494b01ull;  // "KIPSTRJ" + version

template <class T>
void put(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& f) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

void put_vec(std::ofstream& f, const std::vector<double>& v) {
    put<std::uint64_t>(f, v.size());
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_vec(std::ifstream& f) {
    const auto n = get<std::uint64_t>(f);
    std::vector<double> v(n);
    f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    return v;
}

}  // namespace

void write_trajectory_binary(const TrajectoryGrid& grid, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    put(f, kTrajMagic);
    put<std::int64_t>(f, grid.cfg.n_particles);
    put<std::int64_t>(f, grid.cfg.obs_steps);
    put<std::int64_t>(f, grid.cfg.fine_factor);
    put<double>(f, grid.cfg.horizon);
    put<std::uint64_t>(f, grid.cfg.seed);
    put<std::int32_t>(f, static_cast<std::int32_t>(grid.cfg.init));
    put<double>(f, grid.cfg.init_point.y);
    put<double>(f, grid.cfg.init_point.x);
    put_vec(f, grid.mu0);
    put_vec(f, grid.sigma0);
    put_vec(f, grid.times);
    put_vec(f, grid.y.data());
    put_vec(f, grid.x.data());
    put_vec(f, grid.db.data());
    if (!f) throw std::runtime_error("short write to " + path);
}

TrajectoryGrid read_trajectory_binary(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    if (get<std::uint64_t>(f) != kTrajMagic)
        throw std::runtime_error("not a trajectory dump: " + path);
    TrajectoryGrid g;
    g.cfg.n_particles = static_cast<int>(get<std::int64_t>(f));
    g.cfg.obs_steps = static_cast<int>(get<std::int64_t>(f));
    g.cfg.fine_factor = static_cast<int>(get<std::int64_t>(f));
    g.cfg.horizon = get<double>(f);
    g.cfg.seed = get<std::uint64_t>(f);
    g.cfg.init = static_cast<InitLaw>(get<std::int32_t>(f));
    g.cfg.init_point.y = get<double>(f);
    g.cfg.init_point.x = get<double>(f);
    g.mu0 = get_vec(f);
    g.sigma0 = get_vec(f);
    g.times = get_vec(f);
    const long steps = g.cfg.fine_steps();
    g.y = Array2D(g.cfg.n_particles, static_cast<int>(steps) + 1);
    g.x = Array2D(g.cfg.n_particles, static_cast<int>(steps) + 1);
    g.db = Array2D(g.cfg.n_particles, static_cast<int>(steps));
    g.y.data() = get_vec(f);
    g.x.data() = get_vec(f);
    g.db.data() = get_vec(f);
    if (!f) throw std::runtime_error("short read from " + path);
    return g;
}

void write_trajectory_csv(const TrajectoryGrid& grid, const std::string& path) {
    csv::Writer w(path);
    w.header({"t", "particle", "y", "x", "dB"});
    const long cols = grid.y.cols();
    for (long k = 0; k < cols; ++k) {
        for (int i = 0; i < grid.cfg.n_particles; ++i) {
            std::vector<std::string> row = {csv::fmt(grid.times[static_cast<std::size_t>(k)]),
                                            csv::fmt(i), csv::fmt(grid.y(i, static_cast<int>(k))),
                                            csv::fmt(grid.x(i, static_cast<int>(k)))};
            row.push_back(k + 1 < cols ? csv::fmt(grid.db(i, static_cast<int>(k))) : std::string());
            w.row(row);
        }
    }
}

}  // namespace kips
