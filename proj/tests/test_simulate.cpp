#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "kips/errors.hpp"
#include "kips/simulate.hpp"
#include "kips/stats.hpp"

using namespace kips;

namespace {

// zero drift, fixed diffusion level; set a = 0 for deterministic motion
CustomModel make_free_model(double a_level) {
    CustomModel::Spec spec;
    spec.name = "free";
    spec.box = ParamBox{{-1.0}, {1.0}, {-1.0}, {1.0}};
    spec.a_min = -2.0;
    spec.drift = [](std::span<const double>, Point2, const MeasureSummary&) { return 0.0; };
    spec.drift_grad = [](std::span<const double>, Point2, const MeasureSummary&,
                         std::span<double> out) { out[0] = 0.0; };
    spec.diffusion = [a_level](std::span<const double>, Point2, const MeasureSummary&) {
        return a_level;
    };
    spec.diffusion_grad = [](std::span<const double>, Point2, const MeasureSummary&,
                             std::span<double> out) { out[0] = 0.0; };
    spec.constant_diffusion = true;
    return CustomModel(std::move(spec));
}

const Theta kFreeTheta{{0.0}, {0.0}};

}  // namespace

TEST_CASE("deterministic free motion: y linear in t, x constant") {
    const auto model = make_free_model(0.0);
    SimConfig cfg;
    cfg.n_particles = 3;
    cfg.obs_steps = 10;
    cfg.fine_factor = 4;
    cfg.init = InitLaw::Point;
    cfg.init_point = {0.5, 2.0};
    const TrajectoryGrid grid = simulate_ips(model, kFreeTheta, cfg);
    for (int i = 0; i < 3; ++i) {
        for (long k = 0; k <= cfg.fine_steps(); ++k) {
            CHECK(grid.x(i, static_cast<int>(k)) == doctest::Approx(2.0));
            CHECK(grid.y(i, static_cast<int>(k)) ==
                  doctest::Approx(0.5 + 2.0 * grid.times[static_cast<std::size_t>(k)]).epsilon(1e-13));
        }
    }
}

TEST_CASE("pure noise: terminal velocity variance matches sigma^2 T") {
    const auto model = make_mean_field_langevin();
    const Theta theta{{0.0, 0.0}, {0.7}};
    SimConfig cfg;
    cfg.n_particles = 10000;
    cfg.obs_steps = 4;
    cfg.fine_factor = 2;
    cfg.seed = 99;
    const TrajectoryGrid grid = simulate_ips(model, theta, cfg);
    std::vector<double> incr;
    const int last = static_cast<int>(cfg.fine_steps());
    for (int i = 0; i < cfg.n_particles; ++i) incr.push_back(grid.x(i, last) - grid.x(i, 0));
    const auto mv = stats::mean_var(incr);
    CHECK(mv.var == doctest::Approx(0.49).epsilon(0.05));
}

TEST_CASE("single particle reduces to the scalar oscillator driven by the same increments") {
    const auto model = make_mean_field_langevin();
    const Theta theta{{1.3, 0.0}, {0.5}};
    SimConfig cfg;
    cfg.n_particles = 1;
    cfg.obs_steps = 25;
    cfg.fine_factor = 8;
    cfg.seed = 1234;
    const TrajectoryGrid grid = simulate_ips(model, theta, cfg);
    // independent scalar reference replaying the retained increments
    const double dt = cfg.fine_delta();
    double y = grid.y(0, 0), x = grid.x(0, 0);
    for (long k = 0; k < cfg.fine_steps(); ++k) {
        const double b = -theta.mu[0] * x - theta.mu[1] * (y - y);
        const double ny = y + x * dt;
        const double nx = x + b * dt + theta.sigma[0] * grid.db(0, static_cast<int>(k));
        y = ny;
        x = nx;
        CHECK(grid.y(0, static_cast<int>(k) + 1) == y);
        CHECK(grid.x(0, static_cast<int>(k) + 1) == x);
    }
}

TEST_CASE("same seed gives bit-identical grids, different seed does not") {
    const auto model = make_mean_field_langevin();
    const Theta theta = default_theta0("mean_field_langevin");
    SimConfig cfg;
    cfg.n_particles = 20;
    cfg.obs_steps = 10;
    cfg.fine_factor = 5;
    cfg.seed = 77;
    const TrajectoryGrid a = simulate_ips(model, theta, cfg);
    const TrajectoryGrid b = simulate_ips(model, theta, cfg);
    CHECK(a.y == b.y);
    CHECK(a.x == b.x);
    CHECK(a.db == b.db);
    cfg.seed = 78;
    const TrajectoryGrid c = simulate_ips(model, theta, cfg);
    CHECK_FALSE(a.db == c.db);
}

TEST_CASE("subsample: index arithmetic and telescoped increments") {
    const auto model = make_mean_field_langevin();
    const Theta theta = default_theta0("mean_field_langevin");
    SimConfig cfg;
    cfg.n_particles = 7;
    cfg.obs_steps = 100;
    cfg.fine_factor = 10;
    cfg.seed = 5;
    const TrajectoryGrid grid = simulate_ips(model, theta, cfg);
    const ObservationSet obs = subsample(grid, cfg);
    CHECK(obs.times.size() == 101);
    for (int j = 0; j <= 100; ++j)
        CHECK(obs.times[static_cast<std::size_t>(j)] ==
              grid.times[static_cast<std::size_t>(j) * 10]);
    // Y_{(j+1)D} - Y_{jD} telescopes to dt * sum of the intermediate velocities
    const double dt = cfg.fine_delta();
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 100; ++j) {
            double acc = 0.0;
            for (int l = 0; l < 10; ++l) acc += grid.x(i, j * 10 + l);
            CHECK(obs.y(i, j + 1) - obs.y(i, j) ==
                  doctest::Approx(dt * acc).epsilon(1e-12));
        }

    SimConfig cfg1 = cfg;
    cfg1.fine_factor = 1;
    const TrajectoryGrid g1 = simulate_ips(model, theta, cfg1);
    const ObservationSet o1 = subsample(g1, cfg1);
    CHECK(o1.y == g1.y);
}

TEST_CASE("streamed observations equal the subsampled grid bit for bit") {
    const auto model = make_kramers_kernel();
    const Theta theta = default_theta0("kramers_kernel");
    SimConfig cfg;
    cfg.n_particles = 15;
    cfg.obs_steps = 20;
    cfg.fine_factor = 6;
    cfg.seed = 2024;
    const ObservationSet direct = simulate_observations(*model, theta, cfg);
    const ObservationSet via_grid = subsample(simulate_ips(*model, theta, cfg), cfg);
    CHECK(direct.y == via_grid.y);
    CHECK(*direct.x == *via_grid.x);
    CHECK(direct.times == via_grid.times);
}

TEST_CASE("coupled run with measure-free coefficients is an exact copy") {
    const auto model = make_mean_field_langevin();
    const Theta theta{{1.0, 0.0}, {0.6}};  // mu2 = 0: no measure dependence
    SimConfig cfg;
    cfg.n_particles = 12;
    cfg.obs_steps = 15;
    cfg.fine_factor = 4;
    cfg.seed = 31;
    CoupledOptions opts;
    opts.ref_seed = 32;
    const CoupledPair pair = simulate_coupled(*model, theta, cfg, opts);
    CHECK(pair.ips.y == pair.mv_copies.y);
    CHECK(pair.ips.x == pair.mv_copies.x);
    CHECK(pair.ips.db == pair.mv_copies.db);
    CHECK(coupled_gap(pair) == doctest::Approx(0.0));
    CHECK(pair.reference_flow.size() == 16);
    CHECK(pair.reference_flow.front().size() == std::min(20 * 12, 5000));
}

TEST_CASE("coupled run guards") {
    const auto model = make_mean_field_langevin();
    const Theta theta = default_theta0("mean_field_langevin");
    SimConfig cfg;
    cfg.n_particles = 5;
    cfg.obs_steps = 5;
    cfg.fine_factor = 2;
    cfg.seed = 40;
    CoupledOptions same_seed;
    same_seed.ref_seed = 40;
    CHECK_THROWS_AS((void)simulate_coupled(*model, theta, cfg, same_seed), ConfigError);
    CoupledOptions too_few;
    too_few.ref_seed = 41;
    too_few.ref_particles = 2;
    CHECK_THROWS_AS((void)simulate_coupled(*model, theta, cfg, too_few), ConfigError);
}

TEST_CASE("coupled gap shrinks with more particles") {
    const auto model = make_mean_field_langevin();
    const Theta theta = default_theta0("mean_field_langevin");
    double prev = std::numeric_limits<double>::infinity();
    for (int N : {10, 80}) {
        double acc = 0.0;
        const int seeds = 6;
        for (int s = 0; s < seeds; ++s) {
            SimConfig cfg;
            cfg.n_particles = N;
            cfg.obs_steps = 25;
            cfg.fine_factor = 4;
            cfg.seed = static_cast<std::uint64_t>(1000 + 7 * s);
            CoupledOptions opts;
            opts.ref_seed = cfg.seed + 500000;
            acc += coupled_gap(simulate_coupled(*model, theta, cfg, opts));
        }
        const double mean_gap = acc / seeds;
        CHECK(mean_gap < prev);
        prev = mean_gap;
    }
}

TEST_CASE("fourth-moment boundedness along the grid") {
    const auto model = make_mean_field_langevin();
    const Theta theta = default_theta0("mean_field_langevin");
    for (int s = 0; s < 20; ++s) {
        SimConfig cfg;
        cfg.n_particles = 50;
        cfg.obs_steps = 50;
        cfg.fine_factor = 5;
        cfg.seed = static_cast<std::uint64_t>(600 + s);
        const TrajectoryGrid grid = simulate_ips(*model, theta, cfg);
        double worst = 0.0;
        for (long k = 0; k <= cfg.fine_steps(); ++k) {
            double m4 = 0.0;
            for (int i = 0; i < cfg.n_particles; ++i)
                m4 += sq(sq(grid.y(i, static_cast<int>(k))) + sq(grid.x(i, static_cast<int>(k))));
            worst = std::max(worst, m4 / cfg.n_particles);
        }
        CHECK(worst < 200.0);
    }
}

TEST_CASE("increment root-mean-square scales like the square root of the gap") {
    const auto model = make_mean_field_langevin();
    const Theta theta = default_theta0("mean_field_langevin");
    SimConfig cfg;
    cfg.n_particles = 400;
    cfg.obs_steps = 64;
    cfg.fine_factor = 8;
    cfg.seed = 902;
    const TrajectoryGrid grid = simulate_ips(*model, theta, cfg);
    std::vector<double> gaps, rms;
    for (long gap = 2; gap <= 256; gap *= 2) {
        double acc = 0.0;
        long cnt = 0;
        for (long anchor = 0; anchor + gap <= cfg.fine_steps(); anchor += 128) {
            for (int i = 0; i < cfg.n_particles; ++i) {
                acc += sq(grid.y(i, static_cast<int>(anchor + gap)) - grid.y(i, static_cast<int>(anchor))) +
                       sq(grid.x(i, static_cast<int>(anchor + gap)) - grid.x(i, static_cast<int>(anchor)));
                ++cnt;
            }
        }
        gaps.push_back(static_cast<double>(gap) * cfg.fine_delta());
        rms.push_back(std::sqrt(acc / static_cast<double>(cnt)));
    }
    const auto fit = stats::loglog_fit(gaps, rms);
    CHECK(fit.slope > 0.4);
    CHECK(fit.slope < 0.6);
}

TEST_CASE("divergence raises with the offending particle") {
    CustomModel::Spec spec;
    spec.name = "explosive";
    spec.box = ParamBox{{-10.0}, {10.0}, {0.1}, {1.0}};
    spec.drift = [](std::span<const double>, Point2 z, const MeasureSummary&) {
        return 1e12 * (1.0 + std::abs(z.x));
    };
    spec.drift_grad = [](std::span<const double>, Point2, const MeasureSummary&,
                         std::span<double> out) { out[0] = 0.0; };
    spec.diffusion = [](std::span<const double>, Point2, const MeasureSummary&) { return 0.5; };
    spec.diffusion_grad = [](std::span<const double>, Point2, const MeasureSummary&,
                             std::span<double> out) { out[0] = 0.0; };
    const CustomModel model(std::move(spec));
    SimConfig cfg;
    cfg.n_particles = 2;
    cfg.obs_steps = 4;
    cfg.fine_factor = 2;
    CHECK_THROWS_AS((void)simulate_ips(model, Theta{{0.0}, {0.5}}, cfg), SimulationDiverged);
}

TEST_CASE("trajectory binary dump round-trips") {
    const auto model = make_mean_field_langevin();
    const Theta theta = default_theta0("mean_field_langevin");
    SimConfig cfg;
    cfg.n_particles = 4;
    cfg.obs_steps = 6;
    cfg.fine_factor = 3;
    cfg.seed = 314;
    const TrajectoryGrid grid = simulate_ips(*model, theta, cfg);
    const std::string path = "test_traj.bin";
    write_trajectory_binary(grid, path);
    const TrajectoryGrid back = read_trajectory_binary(path);
    CHECK(back.y == grid.y);
    CHECK(back.x == grid.x);
    CHECK(back.db == grid.db);
    CHECK(back.times == grid.times);
    CHECK(back.cfg.seed == grid.cfg.seed);
    write_trajectory_csv(grid, "test_traj.csv");
    CHECK(std::filesystem::exists("test_traj.csv"));
    std::filesystem::remove(path);
    std::filesystem::remove("test_traj.csv");
}

TEST_CASE("config validation") {
    SimConfig cfg;
    cfg.obs_steps = 2;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
