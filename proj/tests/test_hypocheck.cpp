#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "kips/hypocheck.hpp"
#include "kips/rng.hpp"

using namespace kips;

namespace {

std::vector<double> random_state(int n_particles, std::uint64_t seed) {
    std::vector<double> z(static_cast<std::size_t>(2 * n_particles));
    for (int i = 0; i < n_particles; ++i) {
        const auto [a, b] =
            rng::normal_pair(seed, static_cast<std::uint64_t>(i), 0, rng::Stream::Probe);
        z[static_cast<std::size_t>(2 * i)] = a;
        z[static_cast<std::size_t>(2 * i + 1)] = b;
    }
    return z;
}

// a depends on the velocity coordinate, so the Stratonovich correction and the
// bracket have nontrivial velocity terms
CustomModel make_velocity_diffusion_model() {
    CustomModel::Spec spec;
    spec.name = "velocity_diffusion";
    spec.box = ParamBox{{-2.0}, {2.0}, {0.1}, {3.0}};
    spec.drift = [](std::span<const double> mu, Point2 z, const MeasureSummary&) {
        return -mu[0] * z.x;
    };
    spec.drift_grad = [](std::span<const double>, Point2 z, const MeasureSummary&,
                         std::span<double> out) { out[0] = -z.x; };
    spec.diffusion = [](std::span<const double> sg, Point2 z, const MeasureSummary&) {
        return sg[0] + 0.5 * std::sin(z.x);
    };
    spec.diffusion_grad = [](std::span<const double>, Point2, const MeasureSummary&,
                             std::span<double> out) { out[0] = 1.0; };
    return CustomModel(std::move(spec));
}

// dense finite-difference Jacobian, used as an independent bracket oracle
std::vector<double> full_jacobian(
    const std::function<void(std::span<const double>, std::span<double>)>& field,
    std::span<const double> z, double h) {
    const std::size_t d = z.size();
    std::vector<double> jac(d * d);
    std::vector<double> zp(z.begin(), z.end()), fp(d), fm(d);
    for (std::size_t c = 0; c < d; ++c) {
        const double saved = zp[c];
        zp[c] = saved + h;
        field(zp, fp);
        zp[c] = saved - h;
        field(zp, fm);
        zp[c] = saved;
        for (std::size_t r = 0; r < d; ++r) jac[r * d + c] = (fp[r] - fm[r]) / (2.0 * h);
    }
    return jac;
}

std::vector<double> bracket_via_jacobians(const VectorFieldSystem& sys, int k,
                                          std::span<const double> z) {
    const std::size_t d = static_cast<std::size_t>(sys.dim());
    std::vector<double> a0(d), a2k(d);
    sys.strat_drift(z, a0);
    sys.noise_column(k, z, a2k);
    const auto j_a0 = full_jacobian(sys.strat_drift, z, 1e-5);
    const auto noise_field = [&sys, k](std::span<const double> zz, std::span<double> out) {
        sys.noise_column(k, zz, out);
    };
    const auto j_a2k = full_jacobian(noise_field, z, 1e-5);
    std::vector<double> out(d, 0.0);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c)
            out[r] += j_a2k[r * d + c] * a0[c] - j_a0[r * d + c] * a2k[c];
    return out;
}

}  // namespace

TEST_CASE("constant diffusion: the Stratonovich drift equals the plain drift") {
    const auto model = make_mean_field_langevin();
    const Theta theta0 = default_theta0("mean_field_langevin");
    const VectorFieldSystem sys = build_fields(*model, theta0, 4);
    const auto z = random_state(4, 9);
    std::vector<double> b(8), a0(8);
    sys.drift(z, b);
    sys.strat_drift(z, a0);
    for (int i = 0; i < 8; ++i) CHECK(a0[static_cast<std::size_t>(i)] == b[static_cast<std::size_t>(i)]);
    // integrated form: position rows carry the velocities
    for (int i = 0; i < 4; ++i)
        CHECK(b[static_cast<std::size_t>(2 * i)] == z[static_cast<std::size_t>(2 * i + 1)]);
}

TEST_CASE("velocity-dependent diffusion: correction matches the analytic derivative") {
    const CustomModel model = make_velocity_diffusion_model();
    const Theta theta{{1.0}, {1.0}};
    const VectorFieldSystem sys = build_fields(model, theta, 3);
    const auto z = random_state(3, 21);
    std::vector<double> b(6), a0(6);
    sys.drift(z, b);
    sys.strat_drift(z, a0);
    for (int k = 0; k < 3; ++k) {
        const double x = z[static_cast<std::size_t>(2 * k + 1)];
        const double a = 1.0 + 0.5 * std::sin(x);
        const double expected = b[static_cast<std::size_t>(2 * k + 1)] - 0.5 * a * 0.5 * std::cos(x);
        CHECK(a0[static_cast<std::size_t>(2 * k + 1)] == doctest::Approx(expected).epsilon(1e-8));
        CHECK(a0[static_cast<std::size_t>(2 * k)] == b[static_cast<std::size_t>(2 * k)]);
    }
}

TEST_CASE("bracket of constant fields vanishes exactly") {
    VectorFieldSystem sys;
    sys.n_particles = 2;
    sys.drift = [](std::span<const double>, std::span<double> out) {
        out[0] = 1.0; out[1] = -2.0; out[2] = 3.0; out[3] = 0.5;
    };
    sys.noise = [](int, std::span<const double>) { return 0.7; };
    sys.strat_drift = sys.drift;
    const std::vector<double> z{0.1, 0.2, 0.3, 0.4};
    const auto br = lie_bracket(sys, 0, z);
    for (double v : br) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("bracket for the linear mean-field system matches the hand computation") {
    const auto model = make_mean_field_langevin();
    const Theta theta{{1.7, 0.6}, {0.9}};
    const int n = 3;
    const VectorFieldSystem sys = build_fields(*model, theta, n);
    const auto z = random_state(n, 77);
    for (int k = 0; k < n; ++k) {
        const auto br = lie_bracket(sys, k, z);
        // -J_B (sigma e_{x_k}): position row -sigma, velocity row +sigma mu_1,
        // all other coordinates zero
        for (int i = 0; i < 2 * n; ++i) {
            double expected = 0.0;
            if (i == 2 * k) expected = -0.9;
            if (i == 2 * k + 1) expected = 0.9 * 1.7;
            CHECK(br[static_cast<std::size_t>(i)] == doctest::Approx(expected).epsilon(1e-6).scale(1.0));
        }
    }
}

TEST_CASE("jvp bracket agrees with the dense-Jacobian oracle and antisymmetry") {
    const CustomModel model = make_velocity_diffusion_model();
    const Theta theta{{0.8}, {1.2}};
    const VectorFieldSystem sys = build_fields(model, theta, 2);
    const auto z = random_state(2, 5);
    for (int k = 0; k < 2; ++k) {
        const auto fast = lie_bracket(sys, k, z);
        const auto dense = bracket_via_jacobians(sys, k, z);
        for (std::size_t i = 0; i < fast.size(); ++i)
            CHECK(fast[i] == doctest::Approx(dense[i]).epsilon(1e-5).scale(1.0));
        // [A_{2k}, A0] computed from the dense Jacobians flips the sign
        std::vector<double> a0(4), a2k(4);
        sys.strat_drift(z, a0);
        sys.noise_column(k, z, a2k);
        const auto j_a0 = full_jacobian(sys.strat_drift, z, 1e-5);
        const auto noise_field = [&sys, k](std::span<const double> zz, std::span<double> out) {
            sys.noise_column(k, zz, out);
        };
        const auto j_a2k = full_jacobian(noise_field, z, 1e-5);
        for (std::size_t r = 0; r < 4; ++r) {
            double rev = 0.0;
            for (std::size_t c = 0; c < 4; ++c)
                rev += j_a0[r * 4 + c] * a2k[c] - j_a2k[r * 4 + c] * a0[c];
            CHECK(rev == doctest::Approx(-fast[r]).epsilon(1e-5).scale(1.0));
        }
    }
}

TEST_CASE("integrated-form structure: noise column and bracket coordinates") {
    const auto model = make_kramers_kernel();
    const Theta theta0 = default_theta0("kramers_kernel");
    const int n = 3;
    const VectorFieldSystem sys = build_fields(*model, theta0, n);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto z = random_state(n, 100 + s);
        for (int k = 0; k < n; ++k) {
            std::vector<double> col(static_cast<std::size_t>(2 * n));
            sys.noise_column(k, z, col);
            CHECK(col[static_cast<std::size_t>(2 * k)] == 0.0);  // position slot empty
            const double a = sys.noise(k, z);
            CHECK(a > 0.0);
            const auto br = lie_bracket(sys, k, z);
            // the position coordinate of the bracket is forced to -a^{(k)}
            CHECK(br[static_cast<std::size_t>(2 * k)] == doctest::Approx(-a).epsilon(1e-6));
        }
    }
}

TEST_CASE("full rank for the mean-field model, degenerate without noise") {
    const auto model = make_mean_field_langevin();
    const Theta theta0 = default_theta0("mean_field_langevin");
    const auto probes = make_probe_states(3, 10, 2026);
    const auto reports = rank_check(*model, theta0, 3, probes);
    for (const auto& rep : reports) {
        CHECK(rep.full_rank);
        CHECK(rep.numeric_rank == 6);
    }

    // remove the noise: every column vanishes
    CustomModel::Spec spec;
    spec.name = "no_noise";
    spec.box = ParamBox{{-2.0}, {2.0}, {-1.0}, {1.0}};
    spec.a_min = -1.0;
    spec.drift = [](std::span<const double> mu, Point2 z, const MeasureSummary&) {
        return -mu[0] * z.x;
    };
    spec.drift_grad = [](std::span<const double>, Point2 z, const MeasureSummary&,
                         std::span<double> out) { out[0] = -z.x; };
    spec.diffusion = [](std::span<const double>, Point2, const MeasureSummary&) { return 0.0; };
    spec.diffusion_grad = [](std::span<const double>, Point2, const MeasureSummary&,
                             std::span<double> out) { out[0] = 0.0; };
    const CustomModel no_noise(std::move(spec));
    const auto degenerate = rank_check(no_noise, Theta{{1.0}, {0.0}}, 3, probes);
    for (const auto& rep : degenerate) {
        CHECK_FALSE(rep.full_rank);
        CHECK(rep.numeric_rank == 0);
    }
}

TEST_CASE("position drift independent of velocity caps the rank at N") {
    const auto model = make_mean_field_langevin();
    const Theta theta0 = default_theta0("mean_field_langevin");
    const int n = 3;
    const VectorFieldSystem sys = build_fields_custom_b1(
        *model, theta0, n,
        [](int i, std::span<const double> z) { return z[static_cast<std::size_t>(2 * i)]; });
    for (std::uint64_t s = 0; s < 4; ++s) {
        const auto z = random_state(n, 400 + s);
        const auto rep = rank_check_at(sys, z);
        CHECK_FALSE(rep.full_rank);
        CHECK(rep.numeric_rank <= n);
    }
}

TEST_CASE("numeric rank is invariant under scaling the noise columns") {
    const auto model = make_mean_field_langevin();
    const Theta theta0 = default_theta0("mean_field_langevin");
    VectorFieldSystem sys = build_fields(*model, theta0, 2);
    const auto z = random_state(2, 3030);
    const auto base = rank_check_at(sys, z);
    const auto noise = sys.noise;
    sys.noise = [noise](int k, std::span<const double> zz) { return 25.0 * noise(k, zz); };
    const auto scaled = rank_check_at(sys, z);
    CHECK(base.numeric_rank == scaled.numeric_rank);
    CHECK(scaled.singular_values.front() > base.singular_values.front());
}

TEST_CASE("rank reports serialize to csv") {
    const auto model = make_mean_field_langevin();
    const Theta theta0 = default_theta0("mean_field_langevin");
    const auto reports = rank_check(*model, theta0, 2, make_probe_states(2, 3, 1));
    write_rank_csv(reports, "test_rank.csv");
    CHECK(std::filesystem::exists("test_rank.csv"));
    std::filesystem::remove("test_rank.csv");
}
