#include "kips/hypocheck.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

#include "kips/csv.hpp"
#include "kips/errors.hpp"
#include "kips/rng.hpp"

namespace kips {

void VectorFieldSystem::noise_column(int k, std::span<const double> z,
                                     std::span<double> out) const {
    for (auto& v : out) v = 0.0;
    out[static_cast<std::size_t>(2 * k + 1)] = noise(k, z);
}

namespace {

std::vector<Point2> to_points(std::span<const double> z) {
    std::vector<Point2> pts(z.size() / 2);
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {z[2 * i], z[2 * i + 1]};
    return pts;
}

VectorFieldSystem assemble(const Model& model, const Theta& theta, int n_particles,
                           std::function<double(int, std::span<const double>)> b1) {
    VectorFieldSystem sys;
    sys.n_particles = n_particles;
    const std::vector<double> mu = theta.mu, sigma = theta.sigma;
    const Model* m = &model;

    sys.noise = [m, sigma](int k, std::span<const double> z) {
        const auto pts = to_points(z);
        const MeasureSummary s = m->summarize(pts);
        return m->diffusion(sigma, pts[static_cast<std::size_t>(k)], s);
    };
    sys.drift = [m, mu, b1](std::span<const double> z, std::span<double> out) {
        const auto pts = to_points(z);
        const MeasureSummary s = m->summarize(pts);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            out[2 * i] = b1 ? b1(static_cast<int>(i), z) : pts[i].x;
            out[2 * i + 1] = m->drift(mu, pts[i], s);
        }
    };
    const auto noise = sys.noise;
    const auto drift = sys.drift;
    const int n = n_particles;
    sys.strat_drift = [noise, drift, n](std::span<const double> z, std::span<double> out) {
        drift(z, out);
        // correction -1/2 a^{(k)} d_{x_k} a^{(k)} on the velocity coordinates
        std::vector<double> zp(z.begin(), z.end());
        for (int k = 0; k < n; ++k) {
            const std::size_t xi = static_cast<std::size_t>(2 * k + 1);
            const double h = 1e-6 * (1.0 + std::abs(z[xi]));
            const double saved = zp[xi];
            zp[xi] = saved + h;
            const double ap = noise(k, zp);
            zp[xi] = saved - h;
            const double am = noise(k, zp);
            zp[xi] = saved;
            const double a = noise(k, z);
            out[xi] -= 0.5 * a * (ap - am) / (2.0 * h);
        }
    };
    return sys;
}

// Central-difference Jacobian-vector product J_F(z) v.
std::vector<double> jvp(const std::function<void(std::span<const double>, std::span<double>)>& field,
                        std::span<const double> z, std::span<const double> v, double fd_step) {
    const std::size_t d = z.size();
    double zn = 0.0, vn = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        zn += z[i] * z[i];
        vn += v[i] * v[i];
    }
    zn = std::sqrt(zn);
    vn = std::sqrt(vn);
    std::vector<double> out(d, 0.0);
    if (vn == 0.0) return out;
    const double h = fd_step * (1.0 + zn) / vn;
    std::vector<double> zp(d), f_plus(d), f_minus(d);
    for (std::size_t i = 0; i < d; ++i) zp[i] = z[i] + h * v[i];
    field(zp, f_plus);
    for (std::size_t i = 0; i < d; ++i) zp[i] = z[i] - h * v[i];
    field(zp, f_minus);
    for (std::size_t i = 0; i < d; ++i) {
        out[i] = (f_plus[i] - f_minus[i]) / (2.0 * h);
        if (!std::isfinite(out[i])) throw NumericError("lie_bracket: non-finite derivative");
    }
    return out;
}

}  // namespace

VectorFieldSystem build_fields(const Model& model, const Theta& theta, int n_particles) {
    if (n_particles < 1) throw std::invalid_argument("build_fields: n_particles >= 1");
    return assemble(model, theta, n_particles, nullptr);
}

VectorFieldSystem build_fields_custom_b1(
    const Model& model, const Theta& theta, int n_particles,
    std::function<double(int, std::span<const double>)> b1) {
    if (n_particles < 1) throw std::invalid_argument("build_fields: n_particles >= 1");
    return assemble(model, theta, n_particles, std::move(b1));
}

std::vector<double> lie_bracket(const VectorFieldSystem& sys, int k, std::span<const double> z,
                                double fd_step) {
    if (k < 0 || k >= sys.n_particles) throw std::invalid_argument("lie_bracket: bad column index");
    const std::size_t d = static_cast<std::size_t>(sys.dim());
    std::vector<double> a0(d), a2k(d);
    sys.strat_drift(z, a0);
    sys.noise_column(k, z, a2k);
    const auto noise_field = [&sys, k](std::span<const double> zz, std::span<double> out) {
        sys.noise_column(k, zz, out);
    };
    // [A0, A_{2k}] = J_{A2k} A0 - J_{A0} A_{2k}
    const auto j_a2k_a0 = jvp(noise_field, z, a0, fd_step);
    const auto j_a0_a2k = jvp(sys.strat_drift, z, a2k, fd_step);
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = j_a2k_a0[i] - j_a0_a2k[i];
    return out;
}

RankReport rank_check_at(const VectorFieldSystem& sys, std::span<const double> z, double rtol,
                         double fd_step) {
    const int d = sys.dim();
    Eigen::MatrixXd cols(d, d);
    std::vector<double> col(static_cast<std::size_t>(d));
    for (int k = 0; k < sys.n_particles; ++k) {
        sys.noise_column(k, z, col);
        for (int i = 0; i < d; ++i) cols(i, 2 * k) = col[static_cast<std::size_t>(i)];
        const auto br = lie_bracket(sys, k, z, fd_step);
        for (int i = 0; i < d; ++i) cols(i, 2 * k + 1) = br[static_cast<std::size_t>(i)];
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cols);
    RankReport rep;
    rep.probe_state.assign(z.begin(), z.end());
    rep.singular_values.assign(svd.singularValues().data(),
                               svd.singularValues().data() + svd.singularValues().size());
    const double top = rep.singular_values.empty() ? 0.0 : rep.singular_values.front();
    for (double s : rep.singular_values)
        if (s > rtol * top && top > 0.0) ++rep.numeric_rank;
    rep.full_rank = rep.numeric_rank == d;
    return rep;
}

std::vector<RankReport> rank_check(const Model& model, const Theta& theta, int n_particles,
                                   const std::vector<std::vector<double>>& probes, double rtol) {
    const VectorFieldSystem sys = build_fields(model, theta, n_particles);
    std::vector<RankReport> out;
    out.reserve(probes.size());
    for (const auto& z : probes) {
        if (z.size() != static_cast<std::size_t>(sys.dim()))
            throw std::invalid_argument("rank_check: probe has wrong dimension");
        out.push_back(rank_check_at(sys, z, rtol));
    }
    return out;
}

std::vector<std::vector<double>> make_probe_states(int n_particles, int count, std::uint64_t seed) {
    std::vector<std::vector<double>> probes;
    const std::size_t d = static_cast<std::size_t>(2 * n_particles);
    for (int p = 0; p < count; ++p) {
        std::vector<double> z(d);
        for (int i = 0; i < n_particles; ++i) {
            const auto [gy, gx] = rng::normal_pair(seed, static_cast<std::uint64_t>(p),
                                                   static_cast<std::uint64_t>(i), rng::Stream::Probe);
            z[static_cast<std::size_t>(2 * i)] = gy;
            z[static_cast<std::size_t>(2 * i + 1)] = gx;
        }
        probes.push_back(std::move(z));
    }
    // stress points away from the bulk of the initial law
    std::vector<double> big(d), alt(d);
    for (std::size_t i = 0; i < d; ++i) {
        big[i] = 50.0;
        alt[i] = (i % 2 == 0) ? -35.0 : 25.0;
    }
    probes.push_back(std::move(big));
    probes.push_back(std::move(alt));
    return probes;
}

void write_rank_csv(const std::vector<RankReport>& reports, const std::string& path) {
    csv::Writer w(path);
    std::vector<std::string> hdr = {"probe", "numeric_rank", "full_rank"};
    const std::size_t nsv = reports.empty() ? 0 : reports.front().singular_values.size();
    for (std::size_t s = 0; s < nsv; ++s) hdr.push_back("sv" + std::to_string(s + 1));
    w.header(hdr);
    for (std::size_t p = 0; p < reports.size(); ++p) {
        std::vector<std::string> row = {csv::fmt(static_cast<long>(p)),
                                        csv::fmt(static_cast<long>(reports[p].numeric_rank)),
                                        reports[p].full_rank ? "1" : "0"};
        for (double s : reports[p].singular_values) row.push_back(csv::fmt(s));
        w.row(row);
    }
}

}  // namespace kips
