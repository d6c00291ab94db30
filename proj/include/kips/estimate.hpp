#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kips/contrast.hpp"
#include "kips/model.hpp"
#include "kips/observe.hpp"

namespace kips {

struct OptConfig {
    int starts = 5;          // box center + (starts-1) random points
    long max_evals = 2000;   // per start
    double grad_tol = 1e-8;  // projected-gradient norm, scaled by 1 + |value|
    std::uint64_t seed = 0x5EED;
    // Seed one start at the closed-form solution when the model admits it
    // (linear drift, constant diffusion). Off by default so the
    // optimizer-vs-oracle equivalence test stays meaningful.
    bool warm_start = false;
};

// Plug-in versions of the invertibility blocks, with the implied asymptotic
// covariances. The sigma block is scaled by 2 (complete) or 9/4 (partial);
// the mu block uses the same formula in both modes.
struct PlugInSigma {
    int p_mu = 0, p_sigma = 0;
    std::vector<double> sigma1;         // p1 x p1, row-major
    std::vector<double> sigma2;         // p2 x p2
    std::vector<double> asy_cov_mu;     // [Sigma1 / 2]^{-1}
    std::vector<double> asy_cov_sigma;  // factor * [Sigma2]^{-1}
    double mu_factor = 1.0;
    double sigma_factor = 2.0;  // 9/4 in partial mode
    bool invertible = false;
};

struct EstimateReport {
    ObsMode mode = ObsMode::Complete;
    std::vector<double> mu_hat, sigma_hat;
    double contrast_at_opt = 0.0;
    long n_evals = 0;
    bool converged = false;
    bool on_boundary = false;
    PlugInSigma plug_in;
    std::optional<std::vector<double>> norm_err_mu;     // sqrt(N) (mu_hat - mu0)
    std::optional<std::vector<double>> norm_err_sigma;  // sqrt(N/Delta) (sigma_hat - sigma0)

    std::vector<double> theta_hat() const;
    std::string to_kv() const;  // flat key = value record
};

// Box-constrained minimum-contrast fit: multi-start spectral projected
// gradient with backtracking, with a small simplex fallback when the gradient
// path stalls. Deterministic given opt.seed; ties broken by parameter norm,
// then lexicographically.
EstimateReport fit(const Model& model, const ObservationSet& obs, ObsMode mode,
                   const OptConfig& opt = {}, const Theta* theta0 = nullptr);

// Exact minimizer for models whose drift is linear in mu and whose diffusion
// is the constant sigma_1: normal equations for mu, residual quadratic
// variation for sigma (with the 3/2 correction in partial mode).
Theta closed_form_linear(const Model& model, const ObservationSet& obs, ObsMode mode);

PlugInSigma plug_in_sigma(const Model& model, const ObservationSet& obs, const Theta& theta_hat,
                          ObsMode mode);

}  // namespace kips
