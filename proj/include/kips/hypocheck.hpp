#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kips/model.hpp"

namespace kips {

// The 2N-dimensional system written in coordinates (y_1, x_1, ..., y_N, x_N):
// drift field B, one noise column per particle (nonzero only in its velocity
// slot), and the Stratonovich-corrected drift A0 whose correction
// -1/2 a^{(k)} d_{x_k} a^{(k)} acts on the velocity coordinates only.
struct VectorFieldSystem {
    int n_particles = 0;
    std::function<void(std::span<const double>, std::span<double>)> drift;        // B
    std::function<double(int, std::span<const double>)> noise;                    // a^{(k)}
    std::function<void(std::span<const double>, std::span<double>)> strat_drift;  // A0

    int dim() const { return 2 * n_particles; }
    // A_{2k} as a vector field value: a^{(k)}(z) in the velocity slot of
    // particle k, zero elsewhere.
    void noise_column(int k, std::span<const double> z, std::span<double> out) const;
};

// Integrated-form fields for a model: position drift is the velocity itself,
// velocity drift and noise come from the model evaluated at the empirical
// measure of the N particles.
VectorFieldSystem build_fields(const Model& model, const Theta& theta, int n_particles);

// As build_fields but with a custom position drift b1(z) per particle;
// used for degenerate counterexamples where b1 does not depend on x.
VectorFieldSystem build_fields_custom_b1(
    const Model& model, const Theta& theta, int n_particles,
    std::function<double(int, std::span<const double>)> b1);

// [A0, A_{2k}](z) by central-difference Jacobian-vector products
// (two field evaluations per product, no full Jacobians).
std::vector<double> lie_bracket(const VectorFieldSystem& sys, int k, std::span<const double> z,
                                double fd_step = 1e-5);

struct RankReport {
    std::vector<double> singular_values;  // descending, length 2N
    int numeric_rank = 0;
    bool full_rank = false;
    std::vector<double> probe_state;
};

RankReport rank_check_at(const VectorFieldSystem& sys, std::span<const double> z,
                         double rtol = 1e-8, double fd_step = 1e-5);

std::vector<RankReport> rank_check(const Model& model, const Theta& theta, int n_particles,
                                   const std::vector<std::vector<double>>& probes,
                                   double rtol = 1e-8);

// Probe states: standard-normal draws (the simulation's initial law) plus a
// few large-magnitude stress points.
std::vector<std::vector<double>> make_probe_states(int n_particles, int count, std::uint64_t seed);

void write_rank_csv(const std::vector<RankReport>& reports, const std::string& path);

}  // namespace kips
