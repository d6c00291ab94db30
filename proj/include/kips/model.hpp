#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kips/measure.hpp"
#include "kips/point.hpp"

namespace kips {

// Compact convex parameter box Theta = Theta_1 x Theta_2.
struct ParamBox {
    std::vector<double> mu_lo, mu_hi;
    std::vector<double> sigma_lo, sigma_hi;

    void validate() const;  // lo < hi componentwise, finite
    int p_mu() const { return static_cast<int>(mu_lo.size()); }
    int p_sigma() const { return static_cast<int>(sigma_lo.size()); }
    int dim() const { return p_mu() + p_sigma(); }
    // concatenated (mu, sigma) view
    double lo(int k) const;
    double hi(int k) const;
    bool contains_mu(std::span<const double> mu, double tol = 0.0) const;
    bool contains_sigma(std::span<const double> sigma, double tol = 0.0) const;
    bool contains(std::span<const double> theta, double tol = 0.0) const;
    std::vector<double> center() const;
    std::vector<double> clamp(std::span<const double> theta) const;
};

struct Theta {
    std::vector<double> mu, sigma;
    std::vector<double> concat() const;
};

// Measure statistics a model needs from an empirical measure; computed once
// per time slice so coefficient evaluation stays O(1) per particle.
struct MeasureSummary {
    double v[4] = {0.0, 0.0, 0.0, 0.0};
};

// A parameterized coefficient family b_mu, a_sigma with analytic parameter
// gradients. Immutable after construction; all evaluations are pure.
class Model {
public:
    virtual ~Model() = default;

    const ParamBox& box() const { return box_; }
    int p_mu() const { return box_.p_mu(); }
    int p_sigma() const { return box_.p_sigma(); }
    double a_min() const { return a_min_; }
    virtual std::string name() const = 0;

    virtual MeasureSummary summarize(std::span<const Point2> pts) const = 0;
    virtual double drift(std::span<const double> mu, Point2 z, const MeasureSummary& s) const = 0;
    virtual double diffusion(std::span<const double> sigma, Point2 z,
                             const MeasureSummary& s) const = 0;
    virtual void drift_grad(std::span<const double> mu, Point2 z, const MeasureSummary& s,
                            std::span<double> out) const = 0;
    virtual void diffusion_grad(std::span<const double> sigma, Point2 z, const MeasureSummary& s,
                                std::span<double> out) const = 0;

    virtual bool linear_drift() const { return false; }
    virtual bool constant_diffusion() const { return false; }

protected:
    Model(ParamBox box, double a_min);
    ParamBox box_;
    double a_min_;
};

// Assembles a model from plain callables; used for custom coefficient
// families in tests and counterexamples.
class CustomModel final : public Model {
public:
    using SummarizeFn = std::function<MeasureSummary(std::span<const Point2>)>;
    using CoefFn = std::function<double(std::span<const double>, Point2, const MeasureSummary&)>;
    using GradFn =
        std::function<void(std::span<const double>, Point2, const MeasureSummary&, std::span<double>)>;

    struct Spec {
        std::string name = "custom";
        ParamBox box;
        double a_min = 1e-3;
        SummarizeFn summarize;
        CoefFn drift, diffusion;
        GradFn drift_grad, diffusion_grad;
        bool linear_drift = false;
        bool constant_diffusion = false;
    };

    explicit CustomModel(Spec spec);

    std::string name() const override { return spec_.name; }
    MeasureSummary summarize(std::span<const Point2> pts) const override;
    double drift(std::span<const double> mu, Point2 z, const MeasureSummary& s) const override;
    double diffusion(std::span<const double> sigma, Point2 z, const MeasureSummary& s) const override;
    void drift_grad(std::span<const double> mu, Point2 z, const MeasureSummary& s,
                    std::span<double> out) const override;
    void diffusion_grad(std::span<const double> sigma, Point2 z, const MeasureSummary& s,
                        std::span<double> out) const override;
    bool linear_drift() const override { return spec_.linear_drift; }
    bool constant_diffusion() const override { return spec_.constant_diffusion; }

private:
    Spec spec_;
};

// Built-ins. Drift of both is linear in mu; the kernel model carries genuine
// measure dependence in the diffusion through an integrated interaction kernel.
std::unique_ptr<Model> make_mean_field_langevin();
std::unique_ptr<Model> make_kramers_kernel();
std::unique_ptr<Model> make_model(const std::string& name);
Theta default_theta0(const std::string& name);

// Saturated cubic: ~u^3 near the origin, asymptotically linear, so the drift
// stays globally Lipschitz.
double cubic_saturated(double u);

// Spec-level entry points with precondition checks.
double eval_drift(const Model& model, std::span<const double> mu, Point2 z,
                  const EmpiricalMeasure& pi);
double eval_diffusion(const Model& model, std::span<const double> sigma, Point2 z,
                      const EmpiricalMeasure& pi);

struct AssumptionReport {
    int n_probes = 0;
    double drift_ratio = 0.0;      // max observed Lipschitz quotient
    double diffusion_ratio = 0.0;  // max observed Lipschitz quotient
    double min_diffusion = 0.0;
    double ratio_cap = 0.0;
    double floor = 0.0;
    bool lipschitz_pass = false;
    bool floor_pass = false;
    bool pass() const { return lipschitz_pass && floor_pass; }
};

// Randomized probe of the Lipschitz condition and the diffusion floor at a
// fixed parameter. Report-only; never throws on a violation.
AssumptionReport check_assumptions(const Model& model, std::span<const double> mu,
                                   std::span<const double> sigma, std::uint64_t seed,
                                   int n_probes, double ratio_cap = 50.0,
                                   int probe_measure_size = 4);

}  // namespace kips
