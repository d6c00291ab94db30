#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "kips/model.hpp"
#include "kips/observe.hpp"
#include "kips/simulate.hpp"

namespace kips {

struct ContrastValue {
    double value = 0.0;
    std::vector<double> grad;  // d/d(mu_1..mu_p1, sigma_1..sigma_p2)
    long per_term_count = 0;
};

// A function of (state, measure); the measure enters through the model's
// per-slice summary, computed once per time slice by the caller.
using StateFn = std::function<double(Point2, const MeasureSummary&)>;

// Observation data reorganized for repeated contrast evaluation: one flat
// (i, j) term list with per-slice measure summaries precomputed. Partial mode
// uses the surrogate velocities with the paper's index shift: the quadratic
// term at step j is weighted 3/2 and the coefficients are evaluated at the
// shifted state (j-1).
class PreparedContrast {
public:
    PreparedContrast(const Model& model, const ObservationSet& obs, ObsMode mode);

    double value(std::span<const double> theta) const;
    double value_grad(std::span<const double> theta, std::span<double> grad) const;

    // Raw functionals over the same term list (no normalization applied).
    double nu(const StateFn& f) const;
    double functional_i(const StateFn& f, std::span<const double> mu0) const;
    double q(const StateFn& f) const;

    long term_count() const { return static_cast<long>(dx_.size()); }
    ObsMode mode() const { return mode_; }
    double delta() const { return delta_; }
    int n_particles() const { return n_particles_; }
    bool quadratic_path() const { return quadratic_; }

private:
    double value_grad_generic(std::span<const double> theta, std::span<double>* grad) const;
    double value_grad_quadratic(std::span<const double> theta, std::span<double>* grad) const;

    const Model& model_;
    ObsMode mode_;
    double delta_ = 0.0;
    double factor_ = 1.0;  // 3/2 on the quadratic term in partial mode
    int n_particles_ = 0;
    std::vector<Point2> z_;    // evaluation state per term
    std::vector<double> dx_;   // velocity increment per term
    std::vector<MeasureSummary> summaries_;  // one per time slice
    std::vector<int> slice_of_term_;         // term -> summary index

    // For linear drift with constant diffusion the contrast is a quadratic
    // form in mu plus a profile in sigma; these sufficient statistics make an
    // evaluation O(p^2) instead of O(N n). Exercised against the generic term
    // loop in the tests.
    bool quadratic_ = false;
    std::vector<double> s_phiphi;  // sum phi phi^T (row-major p1 x p1)
    std::vector<double> s_phidx;   // sum phi dx
    double s_dx2 = 0.0;            // sum dx^2
};

// Spec-level entry points (theta checked against the box, observation mode
// enforced). The partial contrast needs n >= 4 observation intervals.
ContrastValue contrast_complete(const Model& model, std::span<const double> theta,
                                const ObservationSet& obs);
ContrastValue contrast_partial(const Model& model, std::span<const double> theta,
                               const ObservationSet& obs);

namespace reference {

// Plain sequential contrast evaluation, written directly from the definition
// (per-slice summaries, naive accumulation order). Kept as the oracle for the
// blocked OpenMP kernel and exercised by the benchmark target.
ContrastValue contrast(const Model& model, std::span<const double> theta,
                       const ObservationSet& obs, ObsMode mode);

}  // namespace reference

// Raw sums of the limit-theorem functionals; every normalization (Delta/N,
// 1/N, ...) is applied by the caller.
double functional_nu(const Model& model, const StateFn& f, const ObservationSet& obs, ObsMode mode);
double functional_I(const Model& model, const StateFn& f, const ObservationSet& obs, ObsMode mode,
                    std::span<const double> mu0);
double functional_Q(const Model& model, const StateFn& f, const ObservationSet& obs, ObsMode mode);

struct OracleConfig {
    int particles = 5000;
    int fine_factor = 40;
    int grid_steps = 200;
    int seeds = 5;
    std::uint64_t seed = 20240901;
    double horizon = 1.0;
};

struct OracleValue {
    double mean = 0.0;
    double std_err = 0.0;
    std::vector<double> per_seed;
};

// Brute-force estimate of the time-integrated mean-field average
//   int_0^T ( int f dPi_t ) dt
// from one large independent system per seed, trapezoid rule on the fine
// grid. This is the project's declared ground-truth oracle.
std::vector<OracleValue> pi_bar_oracle_many(const std::vector<StateFn>& fs, const Model& model,
                                            const Theta& theta0, const OracleConfig& cfg);
OracleValue pi_bar_oracle(const StateFn& f, const Model& model, const Theta& theta0,
                          const OracleConfig& cfg);

}  // namespace kips
