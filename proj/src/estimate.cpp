#include "kips/estimate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "kips/errors.hpp"
#include "kips/parallel.hpp"
#include "kips/rng.hpp"

namespace kips {

namespace {

using Vec = std::vector<double>;

Vec project(const ParamBox& box, const Vec& theta) { return box.clamp(theta); }

double inf_norm(const Vec& v) {
    double m = 0.0;
    for (double t : v) m = std::max(m, std::abs(t));
    return m;
}

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

struct StartResult {
    Vec theta;
    double value = std::numeric_limits<double>::infinity();
    bool converged = false;
    long evals = 0;
    std::string note;
};

// Derivative-free simplex descent inside the box; picks up the rare starts
// where the projected-gradient path stalls on a box face.
void simplex_fallback(const PreparedContrast& pc, const ParamBox& box, StartResult& r,
                      long eval_budget) {
    const int p = box.dim();
    const auto feval = [&](const Vec& t) {
        ++r.evals;
        return pc.value(project(box, t));
    };
    std::vector<std::pair<double, Vec>> simplex;
    simplex.reserve(static_cast<std::size_t>(p) + 1);
    simplex.emplace_back(r.value, r.theta);
    for (int k = 0; k < p; ++k) {
        Vec t = r.theta;
        const double h = 0.05 * (box.hi(k) - box.lo(k));
        t[static_cast<std::size_t>(k)] += (t[static_cast<std::size_t>(k)] + h <= box.hi(k)) ? h : -h;
        t = project(box, t);
        simplex.emplace_back(feval(t), t);
    }
    const long start_evals = r.evals;
    while (r.evals - start_evals < eval_budget) {
        std::sort(simplex.begin(), simplex.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        const double spread = simplex.back().first - simplex.front().first;
        if (spread < 1e-13 * (1.0 + std::abs(simplex.front().first))) break;
        Vec centroid(static_cast<std::size_t>(p), 0.0);
        for (std::size_t v = 0; v + 1 < simplex.size(); ++v)
            for (int k = 0; k < p; ++k)
                centroid[static_cast<std::size_t>(k)] += simplex[v].second[static_cast<std::size_t>(k)] / p;
        const Vec& worst = simplex.back().second;
        Vec refl(static_cast<std::size_t>(p));
        for (int k = 0; k < p; ++k)
            refl[static_cast<std::size_t>(k)] =
                2.0 * centroid[static_cast<std::size_t>(k)] - worst[static_cast<std::size_t>(k)];
        refl = project(box, refl);
        const double fr = feval(refl);
        if (fr < simplex.front().first) {
            Vec expand(static_cast<std::size_t>(p));
            for (int k = 0; k < p; ++k)
                expand[static_cast<std::size_t>(k)] =
                    centroid[static_cast<std::size_t>(k)] +
                    2.0 * (refl[static_cast<std::size_t>(k)] - centroid[static_cast<std::size_t>(k)]);
            expand = project(box, expand);
            const double fe = feval(expand);
            simplex.back() = fe < fr ? std::make_pair(fe, expand) : std::make_pair(fr, refl);
        } else if (fr < simplex[simplex.size() - 2].first) {
            simplex.back() = {fr, refl};
        } else {
            Vec contr(static_cast<std::size_t>(p));
            for (int k = 0; k < p; ++k)
                contr[static_cast<std::size_t>(k)] =
                    0.5 * (centroid[static_cast<std::size_t>(k)] + worst[static_cast<std::size_t>(k)]);
            const double fc = feval(contr);
            if (fc < simplex.back().first) {
                simplex.back() = {fc, contr};
            } else {
                for (std::size_t v = 1; v < simplex.size(); ++v) {
                    for (int k = 0; k < p; ++k)
                        simplex[v].second[static_cast<std::size_t>(k)] =
                            0.5 * (simplex[v].second[static_cast<std::size_t>(k)] +
                                   simplex[0].second[static_cast<std::size_t>(k)]);
                    simplex[v].first = feval(simplex[v].second);
                }
            }
        }
    }
    std::sort(simplex.begin(), simplex.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (simplex.front().first < r.value) {
        r.value = simplex.front().first;
        r.theta = simplex.front().second;
    }
}

StartResult spg_minimize(const PreparedContrast& pc, const ParamBox& box, Vec theta,
                         const OptConfig& cfg) {
    const int p = box.dim();
    StartResult r;
    r.theta = project(box, theta);
    Vec grad(static_cast<std::size_t>(p)), trial_grad(static_cast<std::size_t>(p));
    r.value = pc.value_grad(r.theta, grad);
    ++r.evals;
    double lambda = 1.0;
    bool stalled = false;

    while (r.evals < cfg.max_evals) {
        // projected-gradient stationarity
        Vec pg(static_cast<std::size_t>(p));
        for (int k = 0; k < p; ++k) {
            const double step = r.theta[static_cast<std::size_t>(k)] - grad[static_cast<std::size_t>(k)];
            pg[static_cast<std::size_t>(k)] =
                r.theta[static_cast<std::size_t>(k)] - std::min(std::max(step, box.lo(k)), box.hi(k));
        }
        if (inf_norm(pg) < cfg.grad_tol * (1.0 + std::abs(r.value))) {
            r.converged = true;
            break;
        }

        Vec dir(static_cast<std::size_t>(p));
        for (int k = 0; k < p; ++k) {
            const double step =
                r.theta[static_cast<std::size_t>(k)] - lambda * grad[static_cast<std::size_t>(k)];
            dir[static_cast<std::size_t>(k)] =
                std::min(std::max(step, box.lo(k)), box.hi(k)) - r.theta[static_cast<std::size_t>(k)];
        }
        double gd = dot(grad, dir);
        if (!(gd < 0.0)) {
            lambda = 1.0 / std::max(inf_norm(grad), 1e-12);
            for (int k = 0; k < p; ++k) {
                const double step =
                    r.theta[static_cast<std::size_t>(k)] - lambda * grad[static_cast<std::size_t>(k)];
                dir[static_cast<std::size_t>(k)] = std::min(std::max(step, box.lo(k)), box.hi(k)) -
                                                   r.theta[static_cast<std::size_t>(k)];
            }
            gd = dot(grad, dir);
            if (!(gd < 0.0)) {
                r.converged = inf_norm(pg) < 1e2 * cfg.grad_tol * (1.0 + std::abs(r.value));
                break;  // no descent direction inside the box
            }
        }

        double alpha = 1.0;
        Vec trial(static_cast<std::size_t>(p));
        double ftrial = 0.0;
        bool accepted = false;
        while (alpha > 1e-12 && r.evals < cfg.max_evals) {
            for (int k = 0; k < p; ++k)
                trial[static_cast<std::size_t>(k)] =
                    r.theta[static_cast<std::size_t>(k)] + alpha * dir[static_cast<std::size_t>(k)];
            trial = project(box, trial);
            ftrial = pc.value(trial);
            ++r.evals;
            if (ftrial <= r.value + 1e-4 * alpha * gd) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            stalled = true;
            break;
        }

        const double fnew = pc.value_grad(trial, trial_grad);
        ++r.evals;
        // Barzilai-Borwein step for the next iterate
        double ss = 0.0, sy = 0.0;
        for (int k = 0; k < p; ++k) {
            const double s = trial[static_cast<std::size_t>(k)] - r.theta[static_cast<std::size_t>(k)];
            const double yv =
                trial_grad[static_cast<std::size_t>(k)] - grad[static_cast<std::size_t>(k)];
            ss += s * s;
            sy += s * yv;
        }
        lambda = sy > 1e-14 * ss ? std::min(std::max(ss / sy, 1e-10), 1e10) : 1e4;
        r.theta = trial;
        r.value = fnew;
        grad = trial_grad;
    }

    if (stalled && r.evals < cfg.max_evals)
        simplex_fallback(pc, box, r, cfg.max_evals - r.evals);
    return r;
}

bool lex_less(const Vec& a, const Vec& b) {
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] < b[k]) return true;
        if (a[k] > b[k]) return false;
    }
    return false;
}

}  // namespace

std::vector<double> EstimateReport::theta_hat() const {
    std::vector<double> t(mu_hat);
    t.insert(t.end(), sigma_hat.begin(), sigma_hat.end());
    return t;
}

std::string EstimateReport::to_kv() const {
    std::ostringstream os;
    os.precision(17);
    os << "mode = " << to_string(mode) << "\n";
    for (std::size_t k = 0; k < mu_hat.size(); ++k) os << "mu_hat_" << k + 1 << " = " << mu_hat[k] << "\n";
    for (std::size_t k = 0; k < sigma_hat.size(); ++k)
        os << "sigma_hat_" << k + 1 << " = " << sigma_hat[k] << "\n";
    os << "contrast_at_opt = " << contrast_at_opt << "\n";
    os << "n_evals = " << n_evals << "\n";
    os << "converged = " << (converged ? "true" : "false") << "\n";
    os << "on_boundary = " << (on_boundary ? "true" : "false") << "\n";
    if (norm_err_mu)
        for (std::size_t k = 0; k < norm_err_mu->size(); ++k)
            os << "norm_err_mu_" << k + 1 << " = " << (*norm_err_mu)[k] << "\n";
    if (norm_err_sigma)
        for (std::size_t k = 0; k < norm_err_sigma->size(); ++k)
            os << "norm_err_sigma_" << k + 1 << " = " << (*norm_err_sigma)[k] << "\n";
    return os.str();
}

EstimateReport fit(const Model& model, const ObservationSet& obs, ObsMode mode,
                   const OptConfig& opt, const Theta* theta0) {
    if (mode == ObsMode::Complete && !obs.x)
        throw std::invalid_argument("fit: complete mode needs velocities in the observations");
    const ObservationSet* data = &obs;
    ObservationSet partial_view;
    if (mode == ObsMode::Partial && obs.mode == ObsMode::Complete) {
        partial_view = make_partial(obs);
        data = &partial_view;
    }
    const PreparedContrast pc(model, *data, mode);
    const ParamBox& box = model.box();
    const int p = box.dim();

    std::vector<Vec> starts;
    starts.push_back(box.center());
    for (int s = 1; s < opt.starts; ++s) {
        Vec t(static_cast<std::size_t>(p));
        for (int k = 0; k < p; ++k) {
            const double u = rng::uniform(opt.seed, static_cast<std::uint64_t>(s),
                                          static_cast<std::uint64_t>(k), rng::Stream::Start);
            t[static_cast<std::size_t>(k)] = box.lo(k) + u * (box.hi(k) - box.lo(k));
        }
        starts.push_back(std::move(t));
    }
    if (opt.warm_start && model.linear_drift() && model.constant_diffusion()) {
        try {
            starts.push_back(box.clamp(closed_form_linear(model, *data, mode).concat()));
        } catch (const RankError&) {
            // singular design: fall through to the generic starts
        }
    }

    StartResult best;
    long total_evals = 0;
    bool any_finite = false;
    std::string trace;
    for (std::size_t s = 0; s < starts.size(); ++s) {
        StartResult r = spg_minimize(pc, box, starts[s], opt);
        total_evals += r.evals;
        trace += "start " + std::to_string(s) + ": value " + std::to_string(r.value) +
                 (r.converged ? " (converged)\n" : " (not converged)\n");
        if (!std::isfinite(r.value)) continue;
        any_finite = true;
        bool take = best.theta.empty();
        if (!take) {
            const double tol = 1e-12 * (1.0 + std::abs(best.value));
            if (r.value < best.value - tol) {
                take = true;
            } else if (std::abs(r.value - best.value) <= tol) {
                const double nr = dot(r.theta, r.theta), nb = dot(best.theta, best.theta);
                take = nr < nb - 1e-15 || (std::abs(nr - nb) <= 1e-15 && lex_less(r.theta, best.theta));
            }
        }
        if (take) best = std::move(r);
    }
    if (!any_finite) throw OptimizationError("fit: every start diverged\n" + trace);

    EstimateReport rep;
    rep.mode = mode;
    rep.mu_hat.assign(best.theta.begin(), best.theta.begin() + model.p_mu());
    rep.sigma_hat.assign(best.theta.begin() + model.p_mu(), best.theta.end());
    rep.contrast_at_opt = best.value;
    rep.n_evals = total_evals;
    rep.converged = best.converged;
    rep.on_boundary = false;
    for (int k = 0; k < p; ++k) {
        const double w = box.hi(k) - box.lo(k);
        if (best.theta[static_cast<std::size_t>(k)] <= box.lo(k) + 1e-9 * w ||
            best.theta[static_cast<std::size_t>(k)] >= box.hi(k) - 1e-9 * w)
            rep.on_boundary = true;
    }
    rep.plug_in = plug_in_sigma(model, *data, Theta{rep.mu_hat, rep.sigma_hat}, mode);
    if (theta0) {
        const double n_particles = obs.n_particles();
        rep.norm_err_mu.emplace();
        for (std::size_t k = 0; k < rep.mu_hat.size(); ++k)
            rep.norm_err_mu->push_back(std::sqrt(n_particles) * (rep.mu_hat[k] - theta0->mu[k]));
        rep.norm_err_sigma.emplace();
        for (std::size_t k = 0; k < rep.sigma_hat.size(); ++k)
            rep.norm_err_sigma->push_back(std::sqrt(n_particles / obs.delta) *
                                          (rep.sigma_hat[k] - theta0->sigma[k]));
    }
    return rep;
}

Theta closed_form_linear(const Model& model, const ObservationSet& obs, ObsMode mode) {
    if (!model.linear_drift() || !model.constant_diffusion())
        throw std::invalid_argument(
            "closed_form_linear: needs linear drift and constant diffusion");
    if (model.p_sigma() != 1)
        throw std::invalid_argument("closed_form_linear: expects a single diffusion parameter");
    const ObservationSet* data = &obs;
    ObservationSet partial_view;
    if (mode == ObsMode::Partial && obs.mode == ObsMode::Complete) {
        partial_view = make_partial(obs);
        data = &partial_view;
    }
    const double delta = data->delta;
    const int p1 = model.p_mu();
    const PreparedContrast pc(model, *data, mode);
    const Vec mu_probe = model.box().center();  // gradients of a linear drift ignore mu
    const Vec mu_zero(static_cast<std::size_t>(p1), 0.0);

    // normal equations: (sum phi phi^T) mu = (sum phi dx) / delta, with
    // phi = grad_mu b and, by linearity, b_0 = 0 so I(phi_k; 0) = sum phi_k dx
    Eigen::MatrixXd a(p1, p1);
    Eigen::VectorXd r(p1);
    for (int k = 0; k < p1; ++k) {
        for (int l = k; l < p1; ++l) {
            const double v = pc.nu([&, k, l](Point2 z, const MeasureSummary& s) {
                double g[8];
                model.drift_grad(mu_probe, z, s, {g, static_cast<std::size_t>(p1)});
                return g[k] * g[l];
            });
            a(k, l) = v;
            a(l, k) = v;
        }
        r(k) = pc.functional_i(
            [&, k](Point2 z, const MeasureSummary& s) {
                double g[8];
                model.drift_grad(mu_probe, z, s, {g, static_cast<std::size_t>(p1)});
                return g[k];
            },
            mu_zero);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-10);
    if (lu.rank() < p1) throw RankError("closed_form_linear: singular normal matrix");
    const Eigen::VectorXd mu_vec = lu.solve(r / delta);
    const Vec mu(mu_vec.data(), mu_vec.data() + mu_vec.size());

    // residual quadratic variation at mu_hat:
    //   sum q^2 = Q(1) - 2 delta sum(b dx) + delta^2 nu(b^2)
    const double q1 = pc.q([](Point2, const MeasureSummary&) { return 1.0; });
    const double sum_b_dx = pc.functional_i(
        [&](Point2 z, const MeasureSummary& s) { return model.drift(mu, z, s); }, mu_zero);
    const double nub2 =
        pc.nu([&](Point2 z, const MeasureSummary& s) { return sq(model.drift(mu, z, s)); });
    const double sum_q2 = q1 - 2.0 * delta * sum_b_dx + delta * delta * nub2;
    const double corr = mode == ObsMode::Partial ? 1.5 : 1.0;
    const double sigma2 = corr * sum_q2 / (static_cast<double>(pc.term_count()) * delta);
    return Theta{mu, {std::sqrt(std::max(0.0, sigma2))}};
}

PlugInSigma plug_in_sigma(const Model& model, const ObservationSet& obs, const Theta& theta_hat,
                          ObsMode mode) {
    if (!model.box().contains_mu(theta_hat.mu, 1e-12) ||
        !model.box().contains_sigma(theta_hat.sigma, 1e-12))
        throw std::domain_error("plug_in_sigma: theta_hat outside the box");
    const ObservationSet* data = &obs;
    ObservationSet partial_view;
    if (mode == ObsMode::Partial && obs.mode == ObsMode::Complete) {
        partial_view = make_partial(obs);
        data = &partial_view;
    }
    const PreparedContrast pc(model, *data, mode);
    const int p1 = model.p_mu();
    const int p2 = model.p_sigma();
    const double norm = data->delta / data->n_particles();  // Delta/N on the raw sums

    PlugInSigma out;
    out.p_mu = p1;
    out.p_sigma = p2;
    out.mu_factor = 1.0;
    out.sigma_factor = mode == ObsMode::Partial ? 2.25 : 2.0;

    Eigen::MatrixXd s1(p1, p1), s2(p2, p2);
    for (int k = 0; k < p1; ++k)
        for (int l = k; l < p1; ++l) {
            const double v = norm * pc.nu([&](Point2 z, const MeasureSummary& s) {
                double g[8];
                model.drift_grad(theta_hat.mu, z, s, {g, static_cast<std::size_t>(p1)});
                const double a = model.diffusion(theta_hat.sigma, z, s);
                return 2.0 * g[k] * g[l] / (a * a);
            });
            s1(k, l) = v;
            s1(l, k) = v;
        }
    for (int k = 0; k < p2; ++k)
        for (int l = k; l < p2; ++l) {
            const double v = norm * pc.nu([&](Point2 z, const MeasureSummary& s) {
                double g[8];
                model.diffusion_grad(theta_hat.sigma, z, s, {g, static_cast<std::size_t>(p2)});
                const double a = model.diffusion(theta_hat.sigma, z, s);
                const double c = a * a;
                const double dck = 2.0 * a * g[k];
                const double dcl = 2.0 * a * g[l];
                return dck * dcl / (c * c);
            });
            s2(k, l) = v;
            s2(l, k) = v;
        }

    out.sigma1.assign(s1.data(), s1.data() + s1.size());
    out.sigma2.assign(s2.data(), s2.data() + s2.size());

    Eigen::FullPivLU<Eigen::MatrixXd> lu1(s1), lu2(s2);
    lu1.setThreshold(1e-10);
    lu2.setThreshold(1e-10);
    out.invertible = lu1.rank() == p1 && lu2.rank() == p2;
    if (out.invertible) {
        const Eigen::MatrixXd cov_mu = (0.5 * s1).inverse();
        const Eigen::MatrixXd cov_sigma = out.sigma_factor * s2.inverse();
        out.asy_cov_mu.assign(cov_mu.data(), cov_mu.data() + cov_mu.size());
        out.asy_cov_sigma.assign(cov_sigma.data(), cov_sigma.data() + cov_sigma.size());
    }
    return out;
}

}  // namespace kips
