#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kips/array2d.hpp"
#include "kips/measure.hpp"
#include "kips/model.hpp"
#include "kips/observe.hpp"

namespace kips {

enum class InitLaw { StdNormal, Point };

struct SimConfig {
    int n_particles = 100;
    double horizon = 1.0;  // T
    int obs_steps = 200;   // n, observation grid t_j = j T / n
    int fine_factor = 20;  // m, simulation step = Delta / m
    std::uint64_t seed = 1;
    InitLaw init = InitLaw::StdNormal;
    Point2 init_point{0.0, 0.0};

    void validate() const;
    double obs_delta() const { return horizon / obs_steps; }
    double fine_delta() const { return obs_delta() / fine_factor; }
    long fine_steps() const { return static_cast<long>(obs_steps) * fine_factor; }
};

// Full fine-grid paths with the Brownian increments that produced them;
// replaying db reproduces the grid bit for bit.
struct TrajectoryGrid {
    SimConfig cfg;
    std::vector<double> mu0, sigma0;
    std::vector<double> times;  // n*m + 1
    Array2D y, x;               // N x (n*m + 1)
    Array2D db;                 // N x (n*m)
};

// Euler-Maruyama on the fine grid; the velocity step sees the coefficients at
// the current empirical measure of all particles, the position step uses the
// current velocity. Deterministic given cfg.seed.
TrajectoryGrid simulate_ips(const Model& model, const Theta& theta0, const SimConfig& cfg);

// Same dynamics, recording only the observation rows. Bit-identical to
// subsample(simulate_ips(...)) while using O(N n) memory.
ObservationSet simulate_observations(const Model& model, const Theta& theta0, const SimConfig& cfg);

ObservationSet subsample(const TrajectoryGrid& grid, const SimConfig& cfg);

struct CoupledOptions {
    int ref_particles = 0;       // 0 -> default min(20 N, 5000)
    std::uint64_t ref_seed = 0;  // must differ from cfg.seed
};

struct CoupledPair {
    TrajectoryGrid ips;
    TrajectoryGrid mv_copies;  // driven by the same db, coefficients frozen at the reference flow
    std::vector<EmpiricalMeasure> reference_flow;  // at observation times
};

// Couples the N-particle system with N conditionally independent mean-field
// proxies: an auxiliary system with independent noise approximates the
// limiting flow, and each proxy reuses its partner's Brownian increments.
CoupledPair simulate_coupled(const Model& model, const Theta& theta0, const SimConfig& cfg,
                             const CoupledOptions& opts);

// sup over observation times of (1/N) sum |Z - Zbar|^2.
double coupled_gap(const CoupledPair& pair);

// Runs the same Euler scheme without materializing the trajectory, handing
// each fine-grid state (with its measure summary) to a visitor. Used by the
// integral oracle where the full grid would not fit in memory.
void stream_fine_states(
    const Model& model, const Theta& theta0, const SimConfig& cfg,
    const std::function<void(long, std::span<const Point2>, const MeasureSummary&)>& visit);

// Columnar little-endian binary dump (header: N, n, m, T, seed), plus a CSV
// export for small runs.
void write_trajectory_binary(const TrajectoryGrid& grid, const std::string& path);
TrajectoryGrid read_trajectory_binary(const std::string& path);
void write_trajectory_csv(const TrajectoryGrid& grid, const std::string& path);

}  // namespace kips
