#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kips/array2d.hpp"
#include "kips/measure.hpp"

namespace kips {

enum class ObsMode { Complete, Partial };

std::string to_string(ObsMode m);
ObsMode obs_mode_from_string(const std::string& s);

// Discrete observations on the grid t_j = j * delta. Partial mode carries
// positions only.
struct ObservationSet {
    double delta = 0.0;
    ObsMode mode = ObsMode::Complete;
    std::vector<double> times;  // n+1
    Array2D y;                  // N x (n+1)
    std::optional<Array2D> x;   // N x (n+1), complete mode only

    int n_particles() const { return y.rows(); }
    int n_intervals() const { return y.cols() - 1; }
    void validate() const;
};

// Drops the velocities.
ObservationSet make_partial(ObservationSet obs);

// Forward-difference velocities and the shifted empirical measures built from
// (Y_j, Xtilde_j), defined for j = 0..n-1.
struct SurrogateSet {
    double delta = 0.0;
    Array2D x_tilde;                         // N x n
    std::vector<EmpiricalMeasure> measures;  // n entries
};

SurrogateSet surrogate(const ObservationSet& obs);

struct TrajectoryGrid;  // simulate.hpp

// The two weighted Brownian integrals over each observation interval and
// their across-interval sum U, discretized on the retained fine increments
// with midpoint weights.
struct GaussianWeights {
    Array2D xi;        // N x n
    Array2D xi_tilde;  // N x n
    Array2D u;         // N x (n-1), u[j] = xi_tilde[j] + xi[j+1]
};

GaussianWeights gaussian_weights(const TrajectoryGrid& grid);

void write_observation_csv(const ObservationSet& obs, const std::string& path);
ObservationSet read_observation_csv(const std::string& path);

}  // namespace kips
