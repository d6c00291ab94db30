#include "kips/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "kips/errors.hpp"
#include "kips/rng.hpp"

namespace kips {

void ParamBox::validate() const {
    if (mu_lo.size() != mu_hi.size() || sigma_lo.size() != sigma_hi.size())
        throw std::invalid_argument("ParamBox: lo/hi length mismatch");
    if (mu_lo.empty() && sigma_lo.empty()) throw std::invalid_argument("ParamBox: empty box");
    for (std::size_t k = 0; k < mu_lo.size(); ++k)
        if (!(mu_lo[k] < mu_hi[k]) || !std::isfinite(mu_lo[k]) || !std::isfinite(mu_hi[k]))
            throw std::invalid_argument("ParamBox: need finite mu_lo < mu_hi");
    for (std::size_t k = 0; k < sigma_lo.size(); ++k)
        if (!(sigma_lo[k] < sigma_hi[k]) || !std::isfinite(sigma_lo[k]) || !std::isfinite(sigma_hi[k]))
            throw std::invalid_argument("ParamBox: need finite sigma_lo < sigma_hi");
}

double ParamBox::lo(int k) const {
    return k < p_mu() ? mu_lo[static_cast<std::size_t>(k)]
                      : sigma_lo[static_cast<std::size_t>(k - p_mu())];
}

double ParamBox::hi(int k) const {
    return k < p_mu() ? mu_hi[static_cast<std::size_t>(k)]
                      : sigma_hi[static_cast<std::size_t>(k - p_mu())];
}

bool ParamBox::contains_mu(std::span<const double> mu, double tol) const {
    if (mu.size() != mu_lo.size()) return false;
    for (std::size_t k = 0; k < mu.size(); ++k)
        if (mu[k] < mu_lo[k] - tol || mu[k] > mu_hi[k] + tol) return false;
    return true;
}

bool ParamBox::contains_sigma(std::span<const double> sigma, double tol) const {
    if (sigma.size() != sigma_lo.size()) return false;
    for (std::size_t k = 0; k < sigma.size(); ++k)
        if (sigma[k] < sigma_lo[k] - tol || sigma[k] > sigma_hi[k] + tol) return false;
    return true;
}

bool ParamBox::contains(std::span<const double> theta, double tol) const {
    if (theta.size() != static_cast<std::size_t>(dim())) return false;
    return contains_mu(theta.first(static_cast<std::size_t>(p_mu())), tol) &&
           contains_sigma(theta.subspan(static_cast<std::size_t>(p_mu())), tol);
}

std::vector<double> ParamBox::center() const {
    std::vector<double> c(static_cast<std::size_t>(dim()));
    for (int k = 0; k < dim(); ++k) c[static_cast<std::size_t>(k)] = 0.5 * (lo(k) + hi(k));
    return c;
}

std::vector<double> ParamBox::clamp(std::span<const double> theta) const {
    std::vector<double> c(theta.begin(), theta.end());
    for (int k = 0; k < dim(); ++k) {
        auto& v = c[static_cast<std::size_t>(k)];
        v = std::min(std::max(v, lo(k)), hi(k));
    }
    return c;
}

std::vector<double> Theta::concat() const {
    std::vector<double> t(mu);
    t.insert(t.end(), sigma.begin(), sigma.end());
    return t;
}

Model::Model(ParamBox box, double a_min) : box_(std::move(box)), a_min_(a_min) {
    box_.validate();
}

CustomModel::CustomModel(Spec spec) : Model(spec.box, spec.a_min), spec_(std::move(spec)) {}

MeasureSummary CustomModel::summarize(std::span<const Point2> pts) const {
    return spec_.summarize ? spec_.summarize(pts) : MeasureSummary{};
}

double CustomModel::drift(std::span<const double> mu, Point2 z, const MeasureSummary& s) const {
    return spec_.drift(mu, z, s);
}

double CustomModel::diffusion(std::span<const double> sigma, Point2 z,
                              const MeasureSummary& s) const {
    return spec_.diffusion(sigma, z, s);
}

void CustomModel::drift_grad(std::span<const double> mu, Point2 z, const MeasureSummary& s,
                             std::span<double> out) const {
    spec_.drift_grad(mu, z, s, out);
}

void CustomModel::diffusion_grad(std::span<const double> sigma, Point2 z, const MeasureSummary& s,
                                 std::span<double> out) const {
    spec_.diffusion_grad(sigma, z, s, out);
}

double cubic_saturated(double u) { return u * u * u / (1.0 + 0.01 * u * u); }

namespace {

double mean_y(std::span<const Point2> pts) {
    double s = 0.0;
    for (const Point2& z : pts) s += z.y;
    return s / static_cast<double>(pts.size());
}

// b(z, pi) = -mu1 x - mu2 (y - mean_y(pi)),  a = sigma1.
class MeanFieldLangevin final : public Model {
public:
    MeanFieldLangevin()
        : Model(ParamBox{{-4.0, -4.5}, {6.0, 5.5}, {0.05}, {5.7}}, 1e-3) {}

    std::string name() const override { return "mean_field_langevin"; }

    MeasureSummary summarize(std::span<const Point2> pts) const override {
        MeasureSummary s;
        s.v[0] = mean_y(pts);
        return s;
    }

    double drift(std::span<const double> mu, Point2 z, const MeasureSummary& s) const override {
        return -mu[0] * z.x - mu[1] * (z.y - s.v[0]);
    }

    double diffusion(std::span<const double> sigma, Point2, const MeasureSummary&) const override {
        return sigma[0];
    }

    void drift_grad(std::span<const double>, Point2 z, const MeasureSummary& s,
                    std::span<double> out) const override {
        out[0] = -z.x;
        out[1] = -(z.y - s.v[0]);
    }

    void diffusion_grad(std::span<const double>, Point2, const MeasureSummary&,
                        std::span<double> out) const override {
        out[0] = 1.0;
    }

    bool linear_drift() const override { return true; }
    bool constant_diffusion() const override { return true; }
};

inline double psi(double u) { return u / (1.0 + u * u); }

// b = -mu1 x - mu2 y - mu3 sat(y^3) + mu4 (mean_y - y)
// a = sigma1 + sigma2 tanh^2( psi(y) * mean(psi(Y)) )
// The kernel K(z, zbar) = psi(y) psi(ybar) integrates against the measure, so
// the diffusion genuinely depends on it. sigma2 <= 10 sigma1 over the box.
class KramersKernel final : public Model {
public:
    KramersKernel()
        : Model(ParamBox{{-4.0, -4.0, -4.5, -4.5},
                         {6.0, 6.0, 5.5, 5.5},
                         {0.25, 0.0},
                         {5.5, 2.5}},
                1e-3) {}

    std::string name() const override { return "kramers_kernel"; }

    MeasureSummary summarize(std::span<const Point2> pts) const override {
        MeasureSummary s;
        double sy = 0.0, sp = 0.0;
        for (const Point2& z : pts) {
            sy += z.y;
            sp += psi(z.y);
        }
        s.v[0] = sy / static_cast<double>(pts.size());
        s.v[1] = sp / static_cast<double>(pts.size());
        return s;
    }

    double drift(std::span<const double> mu, Point2 z, const MeasureSummary& s) const override {
        return -mu[0] * z.x - mu[1] * z.y - mu[2] * cubic_saturated(z.y) + mu[3] * (s.v[0] - z.y);
    }

    double diffusion(std::span<const double> sigma, Point2 z, const MeasureSummary& s) const override {
        const double t = std::tanh(psi(z.y) * s.v[1]);
        return sigma[0] + sigma[1] * t * t;
    }

    void drift_grad(std::span<const double>, Point2 z, const MeasureSummary& s,
                    std::span<double> out) const override {
        out[0] = -z.x;
        out[1] = -z.y;
        out[2] = -cubic_saturated(z.y);
        out[3] = s.v[0] - z.y;
    }

    void diffusion_grad(std::span<const double>, Point2 z, const MeasureSummary& s,
                        std::span<double> out) const override {
        const double t = std::tanh(psi(z.y) * s.v[1]);
        out[0] = 1.0;
        out[1] = t * t;
    }

    bool linear_drift() const override { return true; }
};

}  // namespace

std::unique_ptr<Model> make_mean_field_langevin() { return std::make_unique<MeanFieldLangevin>(); }
std::unique_ptr<Model> make_kramers_kernel() { return std::make_unique<KramersKernel>(); }

std::unique_ptr<Model> make_model(const std::string& name) {
    if (name == "mean_field_langevin") return make_mean_field_langevin();
    if (name == "kramers_kernel") return make_kramers_kernel();
    throw ConfigError("unknown model: " + name);
}

Theta default_theta0(const std::string& name) {
    if (name == "mean_field_langevin") return Theta{{1.0, 0.5}, {0.7}};
    if (name == "kramers_kernel") return Theta{{1.0, 1.0, 0.5, 0.5}, {0.5, 2.0}};
    throw ConfigError("unknown model: " + name);
}

double eval_drift(const Model& model, std::span<const double> mu, Point2 z,
                  const EmpiricalMeasure& pi) {
    if (!model.box().contains_mu(mu))
        throw std::domain_error("eval_drift: mu outside the parameter box");
    if (pi.size() < 1) throw std::invalid_argument("eval_drift: empty measure");
    return model.drift(mu, z, model.summarize(pi.points()));
}

double eval_diffusion(const Model& model, std::span<const double> sigma, Point2 z,
                      const EmpiricalMeasure& pi) {
    if (!model.box().contains_sigma(sigma))
        throw std::domain_error("eval_diffusion: sigma outside the parameter box");
    if (pi.size() < 1) throw std::invalid_argument("eval_diffusion: empty measure");
    const double a = model.diffusion(sigma, z, model.summarize(pi.points()));
    if (!(a >= model.a_min()))
        throw ModelError("eval_diffusion: value " + std::to_string(a) +
                         " below the floor (A3 breach)");
    return a;
}

AssumptionReport check_assumptions(const Model& model, std::span<const double> mu,
                                   std::span<const double> sigma, std::uint64_t seed,
                                   int n_probes, double ratio_cap, int probe_measure_size) {
    if (n_probes < 2) throw std::invalid_argument("check_assumptions: n_probes >= 2");
    AssumptionReport rep;
    rep.n_probes = n_probes;
    rep.ratio_cap = ratio_cap;
    rep.floor = model.a_min();
    rep.min_diffusion = std::numeric_limits<double>::infinity();

    const auto draw_point = [&](std::uint64_t id, std::uint64_t step) {
        const auto [g1, g2] = rng::normal_pair(seed, id, step, rng::Stream::Probe);
        return Point2{1.5 * g1, 1.5 * g2};
    };

    for (int p = 0; p < n_probes; ++p) {
        std::vector<Point2> pa, pb;
        for (int q = 0; q < probe_measure_size; ++q) {
            pa.push_back(draw_point(static_cast<std::uint64_t>(p), 2 * q));
            pb.push_back(draw_point(static_cast<std::uint64_t>(p), 2 * q + 1));
        }
        const EmpiricalMeasure ma{pa}, mb{pb};
        const Point2 za = draw_point(static_cast<std::uint64_t>(p) + (1ull << 32), 0);
        const Point2 zb = draw_point(static_cast<std::uint64_t>(p) + (1ull << 32), 1);

        const double denom = std::hypot(za.y - zb.y, za.x - zb.x) + w2(ma, mb);
        const MeasureSummary sa = model.summarize(ma.points());
        const MeasureSummary sb = model.summarize(mb.points());

        const double da = model.diffusion(sigma, za, sa);
        const double db = model.diffusion(sigma, zb, sb);
        rep.min_diffusion = std::min({rep.min_diffusion, da, db});
        if (denom > 1e-8) {
            const double rb =
                std::abs(model.drift(mu, za, sa) - model.drift(mu, zb, sb)) / denom;
            const double ra = std::abs(da - db) / denom;
            rep.drift_ratio = std::max(rep.drift_ratio, rb);
            rep.diffusion_ratio = std::max(rep.diffusion_ratio, ra);
        }
    }
    rep.lipschitz_pass = rep.drift_ratio <= ratio_cap && rep.diffusion_ratio <= ratio_cap;
    rep.floor_pass = rep.min_diffusion >= rep.floor;
    return rep;
}

}  // namespace kips
