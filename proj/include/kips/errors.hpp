#pragma once

#include <stdexcept>
#include <string>

namespace kips {

// Bad config file / CLI arguments. Mapped to exit code 2 by the CLI.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A coefficient family violated one of its structural requirements
// (e.g. the diffusion floor).
struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SimulationDiverged : std::runtime_error {
    int particle;
    long step;
    SimulationDiverged(int particle_, long step_)
        : std::runtime_error("simulation diverged: particle " + std::to_string(particle_) +
                             " at fine step " + std::to_string(step_)),
          particle(particle_),
          step(step_) {}
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OptimizationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RankError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace kips
