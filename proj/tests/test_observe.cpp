#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "kips/measure.hpp"
#include "kips/observe.hpp"
#include "kips/simulate.hpp"
#include "kips/stats.hpp"

using namespace kips;

namespace {

ObservationSet linear_positions(int n_particles, int n, double delta, double slope) {
    ObservationSet obs;
    obs.delta = delta;
    obs.mode = ObsMode::Complete;
    obs.times.resize(static_cast<std::size_t>(n) + 1);
    obs.y = Array2D(n_particles, n + 1);
    obs.x = Array2D(n_particles, n + 1);
    for (int j = 0; j <= n; ++j) {
        obs.times[static_cast<std::size_t>(j)] = delta * j;
        for (int i = 0; i < n_particles; ++i) {
            obs.y(i, j) = slope * delta * j + 0.1 * i;
            (*obs.x)(i, j) = slope;
        }
    }
    return obs;
}

TrajectoryGrid default_grid(int N, int n, int m, std::uint64_t seed) {
    const auto model = make_mean_field_langevin();
    const Theta theta = default_theta0("mean_field_langevin");
    SimConfig cfg;
    cfg.n_particles = N;
    cfg.obs_steps = n;
    cfg.fine_factor = m;
    cfg.seed = seed;
    return simulate_ips(*model, theta, cfg);
}

}  // namespace

TEST_CASE("make_partial drops velocities and is idempotent") {
    const ObservationSet obs = linear_positions(3, 10, 0.1, 2.0);
    const ObservationSet p1 = make_partial(obs);
    CHECK(p1.mode == ObsMode::Partial);
    CHECK_FALSE(p1.x.has_value());
    CHECK(p1.y == obs.y);
    const ObservationSet p2 = make_partial(p1);
    CHECK(p2.mode == ObsMode::Partial);
    CHECK(p2.y == obs.y);
}

TEST_CASE("surrogate of a linear path is the exact slope") {
    const ObservationSet obs = linear_positions(4, 12, 0.05, 3.25);
    const SurrogateSet sur = surrogate(make_partial(obs));
    CHECK(sur.x_tilde.cols() == 12);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 12; ++j)
            CHECK(sur.x_tilde(i, j) == doctest::Approx(3.25).epsilon(1e-12));
    CHECK(sur.measures.size() == 12);
    CHECK_THROWS_AS((void)surrogate(linear_positions(2, 1, 0.1, 1.0)), std::invalid_argument);
}

TEST_CASE("surrogate velocity telescopes the fine-grid velocities exactly") {
    const TrajectoryGrid grid = default_grid(6, 40, 10, 555);
    const ObservationSet obs = subsample(grid, grid.cfg);
    const SurrogateSet sur = surrogate(obs);
    const double dt = grid.cfg.fine_delta();
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 40; ++j) {
            double riemann = 0.0;
            for (int l = 0; l < 10; ++l) riemann += grid.x(i, j * 10 + l);
            riemann *= dt / obs.delta;
            CHECK(sur.x_tilde(i, j) == doctest::Approx(riemann).epsilon(1e-11));
        }
}

TEST_CASE("surrogate error and measure distortion scale like sqrt(delta)") {
    const int N = 40;
    std::vector<double> deltas, rms_x, rms_w2;
    for (int n : {50, 100, 200, 400}) {
        double acc_x = 0.0, acc_w = 0.0;
        long cnt_x = 0;
        int cnt_w = 0;
        for (std::uint64_t s = 0; s < 3; ++s) {
            const TrajectoryGrid grid = default_grid(N, n, 50, 7000 + s + 13 * n);
            const ObservationSet obs = subsample(grid, grid.cfg);
            const SurrogateSet sur = surrogate(obs);
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < n; ++j) {
                    acc_x += sq(sur.x_tilde(i, j) - (*obs.x)(i, j));
                    ++cnt_x;
                }
            // W2(Pi_tilde_j, Pi_j) on a thinned set of slices
            std::vector<Point2> slice(static_cast<std::size_t>(N));
            for (int j = 0; j < n; j += std::max(1, n / 8)) {
                for (int i = 0; i < N; ++i) slice[static_cast<std::size_t>(i)] = {obs.y(i, j), (*obs.x)(i, j)};
                acc_w += sq(w2(sur.measures[static_cast<std::size_t>(j)], EmpiricalMeasure(slice)));
                ++cnt_w;
            }
        }
        deltas.push_back(1.0 / n);
        rms_x.push_back(std::sqrt(acc_x / static_cast<double>(cnt_x)));
        rms_w2.push_back(std::sqrt(acc_w / static_cast<double>(cnt_w)));
    }
    const auto fit_x = stats::loglog_fit(deltas, rms_x);
    const auto fit_w = stats::loglog_fit(deltas, rms_w2);
    CHECK(fit_x.slope > 0.4);
    CHECK(fit_x.slope < 0.6);
    CHECK(fit_w.slope > 0.4);
    CHECK(fit_w.slope < 0.6);
}

TEST_CASE("gaussian weight moments at small scale") {
    // pure-noise grid so the weights see exact Brownian increments
    const auto model = make_mean_field_langevin();
    const Theta theta{{0.0, 0.0}, {1.0}};
    double var_xi = 0.0, var_u = 0.0, cov = 0.0;
    long n_xi = 0, n_u = 0;
    for (std::uint64_t s = 0; s < 4; ++s) {
        SimConfig cfg;
        cfg.n_particles = 50;
        cfg.obs_steps = 250;
        cfg.fine_factor = 50;
        cfg.seed = 4000 + s;
        const GaussianWeights w = gaussian_weights(simulate_ips(*model, theta, cfg));
        for (int i = 0; i < cfg.n_particles; ++i) {
            for (int j = 0; j < cfg.obs_steps; ++j) {
                var_xi += sq(w.xi(i, j));
                cov += w.xi(i, j) * w.xi_tilde(i, j);
                ++n_xi;
            }
            for (int j = 0; j + 1 < cfg.obs_steps; ++j) {
                var_u += sq(w.u(i, j));
                ++n_u;
            }
        }
    }
    CHECK(var_xi / static_cast<double>(n_xi) == doctest::Approx(1.0 / 3.0).epsilon(0.03));
    CHECK(cov / static_cast<double>(n_xi) == doctest::Approx(1.0 / 6.0).epsilon(0.05));
    CHECK(var_u / static_cast<double>(n_u) == doctest::Approx(2.0 / 3.0).epsilon(0.03));
}

TEST_CASE("weights on different intervals are uncorrelated") {
    const auto model = make_mean_field_langevin();
    const Theta theta{{0.0, 0.0}, {1.0}};
    SimConfig cfg;
    cfg.n_particles = 200;
    cfg.obs_steps = 60;
    cfg.fine_factor = 20;
    cfg.seed = 888;
    const GaussianWeights w = gaussian_weights(simulate_ips(*model, theta, cfg));
    double acc = 0.0;
    long cnt = 0;
    for (int i = 0; i < cfg.n_particles; ++i)
        for (int j = 0; j + 3 < cfg.obs_steps; ++j) {
            acc += w.xi(i, j) * w.xi_tilde(i, j + 3);
            ++cnt;
        }
    const double corr = acc / static_cast<double>(cnt) / (1.0 / 3.0);
    CHECK(std::abs(corr) < 3.0 / std::sqrt(static_cast<double>(cnt)) * 3.0);
}

TEST_CASE("surrogate decomposition residual scales like delta for constant diffusion") {
    // eps = (Xtilde - X) - sqrt(Delta) a xi
    const double sigma = 0.5;
    const auto model = make_mean_field_langevin();
    const Theta theta{{1.0, 0.5}, {sigma}};
    std::vector<double> deltas, rms_eps;
    for (int n : {50, 100, 200, 400}) {
        double acc = 0.0;
        long cnt = 0;
        for (std::uint64_t s = 0; s < 3; ++s) {
            SimConfig cfg;
            cfg.n_particles = 60;
            cfg.obs_steps = n;
            cfg.fine_factor = 50;
            cfg.seed = 12000 + s + 17 * static_cast<std::uint64_t>(n);
            const TrajectoryGrid grid = simulate_ips(*model, theta, cfg);
            const ObservationSet obs = subsample(grid, cfg);
            const SurrogateSet sur = surrogate(obs);
            const GaussianWeights w = gaussian_weights(grid);
            const double root_delta = std::sqrt(obs.delta);
            for (int i = 0; i < cfg.n_particles; ++i)
                for (int j = 0; j < n; ++j) {
                    const double eps =
                        (sur.x_tilde(i, j) - (*obs.x)(i, j)) - root_delta * sigma * w.xi(i, j);
                    acc += sq(eps);
                    ++cnt;
                }
        }
        deltas.push_back(1.0 / n);
        rms_eps.push_back(std::sqrt(acc / static_cast<double>(cnt)));
    }
    const auto fit = stats::loglog_fit(deltas, rms_eps);
    CHECK(fit.slope > 0.85);
    CHECK(fit.slope < 1.15);
}

TEST_CASE("gaussian weights preconditions") {
    TrajectoryGrid grid = default_grid(2, 5, 1, 3);
    CHECK_THROWS_AS((void)gaussian_weights(grid), std::invalid_argument);
}

TEST_CASE("observation csv round-trip is bit-exact") {
    const TrajectoryGrid grid = default_grid(5, 12, 4, 424242);
    const ObservationSet obs = subsample(grid, grid.cfg);
    write_observation_csv(obs, "test_obs.csv");
    const ObservationSet back = read_observation_csv("test_obs.csv");
    CHECK(back.mode == ObsMode::Complete);
    CHECK(back.y == obs.y);
    CHECK(*back.x == *obs.x);
    CHECK(back.times == obs.times);

    const ObservationSet part = make_partial(obs);
    write_observation_csv(part, "test_obs_p.csv");
    const ObservationSet backp = read_observation_csv("test_obs_p.csv");
    CHECK(backp.mode == ObsMode::Partial);
    CHECK(backp.y == obs.y);
    CHECK_FALSE(backp.x.has_value());
    std::filesystem::remove("test_obs.csv");
    std::filesystem::remove("test_obs_p.csv");
}
