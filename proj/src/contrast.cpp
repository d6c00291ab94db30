#include "kips/contrast.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "kips/errors.hpp"
#include "kips/parallel.hpp"
#include "kips/rng.hpp"
#include "kips/stats.hpp"

namespace kips {

PreparedContrast::PreparedContrast(const Model& model, const ObservationSet& obs, ObsMode mode)
    : model_(model), mode_(mode), delta_(obs.delta), n_particles_(obs.n_particles()) {
    const int N = obs.n_particles();
    const int n = obs.n_intervals();
    if (mode == ObsMode::Complete) {
        if (!obs.x) throw std::invalid_argument("contrast: complete mode needs velocities");
        if (n < 1) throw std::invalid_argument("contrast: need at least one interval");
        factor_ = 1.0;
        summaries_.reserve(static_cast<std::size_t>(n));
        z_.resize(static_cast<std::size_t>(N) * n);
        dx_.resize(static_cast<std::size_t>(N) * n);
        slice_of_term_.resize(z_.size());
        std::vector<Point2> slice(static_cast<std::size_t>(N));
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < N; ++i)
                slice[static_cast<std::size_t>(i)] = {obs.y(i, j), (*obs.x)(i, j)};
            summaries_.push_back(model.summarize(slice));
            for (int i = 0; i < N; ++i) {
                const std::size_t t = static_cast<std::size_t>(j) * N + i;
                z_[t] = slice[static_cast<std::size_t>(i)];
                dx_[t] = (*obs.x)(i, j + 1) - (*obs.x)(i, j);
                slice_of_term_[t] = j;
            }
        }
    } else {
        if (n < 4) throw std::invalid_argument("contrast: partial mode needs n >= 4");
        factor_ = 1.5;
        const SurrogateSet sur = surrogate(obs);
        // terms j = 1..n-2; coefficients at the shifted slice j-1
        const int terms_j = n - 2;
        summaries_.reserve(static_cast<std::size_t>(terms_j));
        z_.resize(static_cast<std::size_t>(N) * terms_j);
        dx_.resize(static_cast<std::size_t>(N) * terms_j);
        slice_of_term_.resize(z_.size());
        for (int j = 1; j <= n - 2; ++j) {
            const int jj = j - 1;  // shifted slice
            summaries_.push_back(model.summarize(sur.measures[static_cast<std::size_t>(jj)].points()));
            for (int i = 0; i < N; ++i) {
                const std::size_t t = static_cast<std::size_t>(j - 1) * N + i;
                z_[t] = sur.measures[static_cast<std::size_t>(jj)].points()[static_cast<std::size_t>(i)];
                dx_[t] = sur.x_tilde(i, j + 1) - sur.x_tilde(i, j);
                slice_of_term_[t] = j - 1;
            }
        }
    }

    if (model.linear_drift() && model.constant_diffusion() && model.p_mu() <= 8) {
        quadratic_ = true;
        const int p1 = model.p_mu();
        const std::size_t n_acc = static_cast<std::size_t>(p1) * p1 + static_cast<std::size_t>(p1) + 1;
        std::vector<double> acc(n_acc, 0.0);
        const std::vector<double> mu_probe(static_cast<std::size_t>(p1), 0.0);
        blocked_reduce(dx_.size(), n_acc, acc.data(),
                       [&](std::size_t lo, std::size_t hi, double* out) {
                           double phi[8];
                           for (std::size_t t = lo; t < hi; ++t) {
                               const MeasureSummary& ms =
                                   summaries_[static_cast<std::size_t>(slice_of_term_[t])];
                               model.drift_grad(mu_probe, z_[t], ms,
                                                {phi, static_cast<std::size_t>(p1)});
                               std::size_t a = 0;
                               for (int k = 0; k < p1; ++k)
                                   for (int l = 0; l < p1; ++l) out[a++] += phi[k] * phi[l];
                               for (int k = 0; k < p1; ++k) out[a++] += phi[k] * dx_[t];
                               out[a] += dx_[t] * dx_[t];
                           }
                       });
        s_phiphi.assign(acc.begin(), acc.begin() + static_cast<long>(p1) * p1);
        s_phidx.assign(acc.begin() + static_cast<long>(p1) * p1, acc.end() - 1);
        s_dx2 = acc.back();
    }
}

namespace {

struct FloorBreach {
    std::atomic<long> first{-1};
    void record(long t) {
        long cur = first.load();
        while ((cur == -1 || t < cur) && !first.compare_exchange_weak(cur, t)) {
        }
    }
    void raise_if_hit(double floor) const {
        if (first.load() >= 0)
            throw ModelError("contrast: squared diffusion fell to/below the floor " +
                             std::to_string(floor) + " (A3 breach) at term " +
                             std::to_string(first.load()));
    }
};

}  // namespace

double PreparedContrast::value(std::span<const double> theta) const {
    if (quadratic_) return value_grad_quadratic(theta, nullptr);
    const int p1 = model_.p_mu();
    const auto mu = theta.first(static_cast<std::size_t>(p1));
    const auto sigma = theta.subspan(static_cast<std::size_t>(p1));
    const double inv_delta = 1.0 / delta_;
    const double a_min = model_.a_min();
    FloorBreach breach;
    double out = 0.0;
    blocked_reduce(dx_.size(), 1, &out, [&](std::size_t lo, std::size_t hi, double* acc) {
        double s = 0.0;
        for (std::size_t t = lo; t < hi; ++t) {
            const Point2 z = z_[t];
            const MeasureSummary& ms = summaries_[static_cast<std::size_t>(slice_of_term_[t])];
            const double b = model_.drift(mu, z, ms);
            const double a = model_.diffusion(sigma, z, ms);
            if (!(a >= a_min)) {
                breach.record(static_cast<long>(t));
                continue;
            }
            const double c = a * a;
            const double q = dx_[t] - delta_ * b;
            s += factor_ * q * q * inv_delta / c + std::log(c);
        }
        acc[0] = s;
    });
    breach.raise_if_hit(a_min);
    return out;
}

double PreparedContrast::value_grad(std::span<const double> theta, std::span<double> grad) const {
    if (grad.size() != static_cast<std::size_t>(model_.box().dim()))
        throw std::invalid_argument("contrast: bad gradient size");
    if (quadratic_) return value_grad_quadratic(theta, &grad);
    return value_grad_generic(theta, &grad);
}

double PreparedContrast::value_grad_quadratic(std::span<const double> theta,
                                              std::span<double>* grad) const {
    const int p1 = model_.p_mu();
    const int p2 = model_.p_sigma();
    const auto mu = theta.first(static_cast<std::size_t>(p1));
    const auto sigma = theta.subspan(static_cast<std::size_t>(p1));
    const double a = model_.diffusion(sigma, z_[0], summaries_[0]);
    if (!(a >= model_.a_min()))
        throw ModelError("contrast: squared diffusion fell to/below the floor " +
                         std::to_string(model_.a_min()) + " (A3 breach)");
    const double c = a * a;
    double s_mu[8];
    double mu_s_mu = 0.0, mu_s_dx = 0.0;
    for (int k = 0; k < p1; ++k) {
        double acc = 0.0;
        for (int l = 0; l < p1; ++l)
            acc += s_phiphi[static_cast<std::size_t>(k) * p1 + l] * mu[static_cast<std::size_t>(l)];
        s_mu[k] = acc;
        mu_s_mu += mu[static_cast<std::size_t>(k)] * acc;
        mu_s_dx += mu[static_cast<std::size_t>(k)] * s_phidx[static_cast<std::size_t>(k)];
    }
    const double sum_q2 = s_dx2 - 2.0 * delta_ * mu_s_dx + delta_ * delta_ * mu_s_mu;
    const double count = static_cast<double>(term_count());
    const double value = factor_ * sum_q2 / (delta_ * c) + count * std::log(c);
    if (grad) {
        for (int k = 0; k < p1; ++k)
            (*grad)[static_cast<std::size_t>(k)] =
                -2.0 * factor_ * (s_phidx[static_cast<std::size_t>(k)] - delta_ * s_mu[k]) / c;
        double da[8];
        model_.diffusion_grad(sigma, z_[0], summaries_[0], {da, static_cast<std::size_t>(p2)});
        for (int k = 0; k < p2; ++k) {
            const double dc = 2.0 * a * da[k];
            (*grad)[static_cast<std::size_t>(p1 + k)] =
                dc * (count / c - factor_ * sum_q2 / (delta_ * c * c));
        }
    }
    return value;
}

double PreparedContrast::value_grad_generic(std::span<const double> theta,
                                            std::span<double>* grad_ptr) const {
    std::span<double>& grad = *grad_ptr;
    const int p1 = model_.p_mu();
    const int p2 = model_.p_sigma();
    const int p = p1 + p2;
    const auto mu = theta.first(static_cast<std::size_t>(p1));
    const auto sigma = theta.subspan(static_cast<std::size_t>(p1));
    const double inv_delta = 1.0 / delta_;
    const double a_min = model_.a_min();
    FloorBreach breach;
    std::vector<double> acc(static_cast<std::size_t>(p) + 1, 0.0);
    blocked_reduce(dx_.size(), static_cast<std::size_t>(p) + 1, acc.data(),
                   [&](std::size_t lo, std::size_t hi, double* a_out) {
                       double db[8], da[8];
                       for (std::size_t t = lo; t < hi; ++t) {
                           const Point2 z = z_[t];
                           const MeasureSummary& ms =
                               summaries_[static_cast<std::size_t>(slice_of_term_[t])];
                           const double b = model_.drift(mu, z, ms);
                           const double a = model_.diffusion(sigma, z, ms);
                           if (!(a >= a_min)) {
                               breach.record(static_cast<long>(t));
                               continue;
                           }
                           model_.drift_grad(mu, z, ms, {db, static_cast<std::size_t>(p1)});
                           model_.diffusion_grad(sigma, z, ms, {da, static_cast<std::size_t>(p2)});
                           const double c = a * a;
                           const double q = dx_[t] - delta_ * b;
                           a_out[0] += factor_ * q * q * inv_delta / c + std::log(c);
                           const double wmu = -2.0 * factor_ * q / c;
                           for (int k = 0; k < p1; ++k) a_out[1 + k] += wmu * db[k];
                           const double qq = factor_ * q * q * inv_delta / (c * c);
                           for (int k = 0; k < p2; ++k) {
                               const double dc = 2.0 * a * da[k];
                               a_out[1 + p1 + k] += dc * (1.0 / c - qq);
                           }
                       }
                   });
    breach.raise_if_hit(a_min);
    for (int k = 0; k < p; ++k) grad[static_cast<std::size_t>(k)] = acc[static_cast<std::size_t>(k) + 1];
    return acc[0];
}

double PreparedContrast::nu(const StateFn& f) const {
    double out = 0.0;
    blocked_reduce(dx_.size(), 1, &out, [&](std::size_t lo, std::size_t hi, double* acc) {
        double s = 0.0;
        for (std::size_t t = lo; t < hi; ++t)
            s += f(z_[t], summaries_[static_cast<std::size_t>(slice_of_term_[t])]);
        acc[0] = s;
    });
    return out;
}

double PreparedContrast::functional_i(const StateFn& f, std::span<const double> mu0) const {
    double out = 0.0;
    blocked_reduce(dx_.size(), 1, &out, [&](std::size_t lo, std::size_t hi, double* acc) {
        double s = 0.0;
        for (std::size_t t = lo; t < hi; ++t) {
            const MeasureSummary& ms = summaries_[static_cast<std::size_t>(slice_of_term_[t])];
            const double b = model_.drift(mu0, z_[t], ms);
            s += f(z_[t], ms) * (dx_[t] - delta_ * b);
        }
        acc[0] = s;
    });
    return out;
}

double PreparedContrast::q(const StateFn& f) const {
    double out = 0.0;
    blocked_reduce(dx_.size(), 1, &out, [&](std::size_t lo, std::size_t hi, double* acc) {
        double s = 0.0;
        for (std::size_t t = lo; t < hi; ++t)
            s += f(z_[t], summaries_[static_cast<std::size_t>(slice_of_term_[t])]) * dx_[t] * dx_[t];
        acc[0] = s;
    });
    return out;
}

namespace {

void check_theta_in_box(const Model& model, std::span<const double> theta) {
    if (theta.size() != static_cast<std::size_t>(model.box().dim()))
        throw std::invalid_argument("contrast: theta has wrong dimension");
    if (!model.box().contains(theta, 1e-12))
        throw std::domain_error("contrast: theta outside the parameter box");
}

ContrastValue eval_spec_contrast(const Model& model, std::span<const double> theta,
                                 const ObservationSet& obs, ObsMode mode) {
    check_theta_in_box(model, theta);
    const PreparedContrast pc(model, obs, mode);
    ContrastValue cv;
    cv.grad.resize(static_cast<std::size_t>(model.box().dim()));
    cv.value = pc.value_grad(theta, cv.grad);
    cv.per_term_count = pc.term_count();
    return cv;
}

}  // namespace

ContrastValue contrast_complete(const Model& model, std::span<const double> theta,
                                const ObservationSet& obs) {
    if (obs.mode != ObsMode::Complete)
        throw std::invalid_argument("contrast_complete: observations are not complete");
    return eval_spec_contrast(model, theta, obs, ObsMode::Complete);
}

ContrastValue contrast_partial(const Model& model, std::span<const double> theta,
                               const ObservationSet& obs) {
    if (obs.mode != ObsMode::Partial)
        throw std::invalid_argument("contrast_partial: observations are not partial");
    return eval_spec_contrast(model, theta, obs, ObsMode::Partial);
}

namespace reference {

ContrastValue contrast(const Model& model, std::span<const double> theta,
                       const ObservationSet& obs, ObsMode mode) {
    const int p1 = model.p_mu();
    const int p2 = model.p_sigma();
    const auto mu = theta.first(static_cast<std::size_t>(p1));
    const auto sigma = theta.subspan(static_cast<std::size_t>(p1));
    const double delta = obs.delta;
    const int N = obs.n_particles();
    const int n = obs.n_intervals();

    ContrastValue cv;
    cv.grad.assign(static_cast<std::size_t>(p1 + p2), 0.0);
    double db[8], da[8];

    const auto add_term = [&](Point2 z, const MeasureSummary& s, double dx, double factor) {
        const double b = model.drift(mu, z, s);
        const double a = model.diffusion(sigma, z, s);
        if (!(a >= model.a_min())) throw ModelError("contrast: diffusion floor breach (A3)");
        const double c = a * a;
        const double q = dx - delta * b;
        cv.value += factor * q * q / (delta * c) + std::log(c);
        model.drift_grad(mu, z, s, {db, static_cast<std::size_t>(p1)});
        model.diffusion_grad(sigma, z, s, {da, static_cast<std::size_t>(p2)});
        for (int k = 0; k < p1; ++k) cv.grad[static_cast<std::size_t>(k)] += -2.0 * factor * q * db[k] / c;
        for (int k = 0; k < p2; ++k) {
            const double dc = 2.0 * a * da[k];
            cv.grad[static_cast<std::size_t>(p1 + k)] +=
                dc / c - factor * q * q * dc / (delta * c * c);
        }
        ++cv.per_term_count;
    };

    std::vector<Point2> slice(static_cast<std::size_t>(N));
    if (mode == ObsMode::Complete) {
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < N; ++i) slice[static_cast<std::size_t>(i)] = {obs.y(i, j), (*obs.x)(i, j)};
            const MeasureSummary s = model.summarize(slice);
            for (int i = 0; i < N; ++i)
                add_term(slice[static_cast<std::size_t>(i)], s, (*obs.x)(i, j + 1) - (*obs.x)(i, j), 1.0);
        }
    } else {
        const SurrogateSet sur = surrogate(obs);
        for (int j = 1; j <= n - 2; ++j) {
            const auto pts = sur.measures[static_cast<std::size_t>(j - 1)].points();
            const MeasureSummary s = model.summarize(pts);
            for (int i = 0; i < N; ++i)
                add_term(pts[static_cast<std::size_t>(i)], s,
                         sur.x_tilde(i, j + 1) - sur.x_tilde(i, j), 1.5);
        }
    }
    return cv;
}

}  // namespace reference

double functional_nu(const Model& model, const StateFn& f, const ObservationSet& obs, ObsMode mode) {
    return PreparedContrast(model, obs, mode).nu(f);
}

double functional_I(const Model& model, const StateFn& f, const ObservationSet& obs, ObsMode mode,
                    std::span<const double> mu0) {
    return PreparedContrast(model, obs, mode).functional_i(f, mu0);
}

double functional_Q(const Model& model, const StateFn& f, const ObservationSet& obs, ObsMode mode) {
    return PreparedContrast(model, obs, mode).q(f);
}

std::vector<OracleValue> pi_bar_oracle_many(const std::vector<StateFn>& fs, const Model& model,
                                            const Theta& theta0, const OracleConfig& cfg) {
    if (cfg.particles < 1 || cfg.grid_steps < 3 || cfg.fine_factor < 1 || cfg.seeds < 1)
        throw ConfigError("pi_bar_oracle: bad oracle configuration");
    const std::size_t nf = fs.size();
    std::vector<std::vector<double>> per_seed(nf, std::vector<double>(static_cast<std::size_t>(cfg.seeds)));

    for (int s = 0; s < cfg.seeds; ++s) {
        SimConfig sim;
        sim.n_particles = cfg.particles;
        sim.horizon = cfg.horizon;
        sim.obs_steps = cfg.grid_steps;
        sim.fine_factor = cfg.fine_factor;
        sim.seed = rng::mix(cfg.seed, static_cast<std::uint64_t>(s));
        const long steps = sim.fine_steps();
        const double dt = sim.fine_delta();
        std::vector<double> acc(nf, 0.0);
        stream_fine_states(model, theta0, sim,
                           [&](long k, std::span<const Point2> state, const MeasureSummary& ms) {
                               const double w = (k == 0 || k == steps) ? 0.5 * dt : dt;
                               for (std::size_t fi = 0; fi < nf; ++fi) {
                                   double m = 0.0;
                                   for (const Point2& z : state) m += fs[fi](z, ms);
                                   acc[fi] += w * (m / static_cast<double>(state.size()));
                               }
                           });
        for (std::size_t fi = 0; fi < nf; ++fi) per_seed[fi][static_cast<std::size_t>(s)] = acc[fi];
    }

    std::vector<OracleValue> out(nf);
    for (std::size_t fi = 0; fi < nf; ++fi) {
        const auto mv = stats::mean_var(per_seed[fi]);
        out[fi].mean = mv.mean;
        out[fi].std_err = cfg.seeds > 1 ? std::sqrt(mv.var / cfg.seeds) : 0.0;
        out[fi].per_seed = per_seed[fi];
    }
    return out;
}

OracleValue pi_bar_oracle(const StateFn& f, const Model& model, const Theta& theta0,
                          const OracleConfig& cfg) {
    return pi_bar_oracle_many({f}, model, theta0, cfg)[0];
}

}  // namespace kips
