#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kips/errors.hpp"
#include "kips/model.hpp"
#include "kips/rng.hpp"

using namespace kips;

namespace {

// a = sigma1 + sigma2 tanh^2( y * mean_y(pi) ): product-kernel diffusion used
// by the worked examples
CustomModel make_product_kernel_model() {
    CustomModel::Spec spec;
    spec.name = "product_kernel";
    spec.box = ParamBox{{-1.0}, {1.0}, {0.1, 0.0}, {5.0, 5.0}};
    spec.summarize = [](std::span<const Point2> pts) {
        MeasureSummary s;
        for (const Point2& z : pts) s.v[0] += z.y;
        s.v[0] /= static_cast<double>(pts.size());
        return s;
    };
    spec.drift = [](std::span<const double> mu, Point2 z, const MeasureSummary&) {
        return mu[0] * z.x;
    };
    spec.drift_grad = [](std::span<const double>, Point2 z, const MeasureSummary&,
                         std::span<double> out) { out[0] = z.x; };
    spec.diffusion = [](std::span<const double> sg, Point2 z, const MeasureSummary& s) {
        const double t = std::tanh(z.y * s.v[0]);
        return sg[0] + sg[1] * t * t;
    };
    spec.diffusion_grad = [](std::span<const double>, Point2 z, const MeasureSummary& s,
                             std::span<double> out) {
        const double t = std::tanh(z.y * s.v[0]);
        out[0] = 1.0;
        out[1] = t * t;
    };
    spec.linear_drift = true;
    return CustomModel(std::move(spec));
}

EmpiricalMeasure probe_measure(std::uint64_t seed, std::uint64_t tag, int n = 5) {
    std::vector<Point2> pts;
    for (int i = 0; i < n; ++i) {
        const auto [a, b] =
            rng::normal_pair(seed, tag, static_cast<std::uint64_t>(i), rng::Stream::Probe);
        pts.push_back({a, b});
    }
    return EmpiricalMeasure(pts);
}

}  // namespace

TEST_CASE("mean-field langevin drift values") {
    const auto model = make_mean_field_langevin();
    const EmpiricalMeasure pi({{0, 0}, {2, 0}});
    const std::vector<double> zero{0.0, 0.0};
    CHECK(eval_drift(*model, zero, {0.3, -1.7}, pi) == doctest::Approx(0.0));
    // b = -mu1 x - mu2 (y - mean_y), mean_y = 1
    const std::vector<double> mu{1.0, 2.0};
    CHECK(eval_drift(*model, mu, {1.0, 0.5}, pi) == doctest::Approx(-0.5));
    CHECK_THROWS_AS((void)eval_drift(*model, std::vector<double>{100.0, 0.0}, {0, 0}, pi),
                    std::domain_error);
}

TEST_CASE("mean-field langevin drift is exactly linear in mu") {
    const auto model = make_mean_field_langevin();
    const EmpiricalMeasure pi = probe_measure(42, 0);
    const MeasureSummary s = model->summarize(pi.points());
    const std::vector<double> mu1{1.2, -0.4}, mu2{-0.3, 2.1};
    for (int t = 0; t < 20; ++t) {
        const auto [gy, gx] = rng::normal_pair(99, static_cast<std::uint64_t>(t), 0, rng::Stream::Probe);
        const Point2 z{gy, gx};
        const double alpha = 0.7, beta = -1.3;
        std::vector<double> mix(2);
        for (int k = 0; k < 2; ++k) mix[static_cast<std::size_t>(k)] = alpha * mu1[static_cast<std::size_t>(k)] + beta * mu2[static_cast<std::size_t>(k)];
        const double lhs = model->drift(mix, z, s);
        const double rhs = alpha * model->drift(mu1, z, s) + beta * model->drift(mu2, z, s);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("kramers kernel without interaction weight reduces to the plain oscillator") {
    const auto model = make_kramers_kernel();
    const std::vector<double> mu{1.0, 0.8, 0.3, 0.0};  // mu4 = 0 kills the kernel term
    const EmpiricalMeasure pi1 = probe_measure(7, 0), pi2 = probe_measure(7, 1);
    const Point2 z{0.9, -1.4};
    const double expected = -mu[0] * z.x - mu[1] * z.y - mu[2] * cubic_saturated(z.y);
    CHECK(eval_drift(*model, mu, z, pi1) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(eval_drift(*model, mu, z, pi2) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("diffusion evaluation") {
    const auto mfl = make_mean_field_langevin();
    const EmpiricalMeasure pi = probe_measure(13, 0);
    CHECK(eval_diffusion(*mfl, std::vector<double>{0.7}, {3.0, -2.0}, pi) == doctest::Approx(0.7));

    const auto pk = make_product_kernel_model();
    const auto d1 = EmpiricalMeasure::dirac({1.0, 0.0});
    const std::vector<double> sg{1.0, 0.5};
    CHECK(eval_diffusion(pk, sg, {2.0, 0.3}, d1) ==
          doctest::Approx(1.0 + 0.5 * sq(std::tanh(2.0))).epsilon(1e-14));
    // sigma2 = 0 reduces the kernel model to the constant model
    const std::vector<double> sg0{1.3, 0.0};
    for (int t = 0; t < 10; ++t) {
        const EmpiricalMeasure pim = probe_measure(17, static_cast<std::uint64_t>(t));
        const auto [gy, gx] = rng::normal_pair(18, static_cast<std::uint64_t>(t), 0, rng::Stream::Probe);
        CHECK(eval_diffusion(pk, sg0, {gy, gx}, pim) == doctest::Approx(1.3));
    }
}

TEST_CASE("built-in diffusions respect the floor on random probes") {
    for (const auto& name : {"mean_field_langevin", "kramers_kernel"}) {
        const auto model = make_model(name);
        const Theta theta = default_theta0(name);
        for (int t = 0; t < 50; ++t) {
            const EmpiricalMeasure pi = probe_measure(23, static_cast<std::uint64_t>(t));
            const auto [gy, gx] =
                rng::normal_pair(29, static_cast<std::uint64_t>(t), 0, rng::Stream::Probe);
            CHECK(eval_diffusion(*model, theta.sigma, {3.0 * gy, 3.0 * gx}, pi) >= model->a_min());
        }
    }
}

TEST_CASE("analytic parameter gradients match central differences") {
    for (const auto& name : {"mean_field_langevin", "kramers_kernel"}) {
        const auto model = make_model(name);
        const Theta theta = default_theta0(name);
        const int p1 = model->p_mu(), p2 = model->p_sigma();
        for (int t = 0; t < 20; ++t) {
            const EmpiricalMeasure pi = probe_measure(31, static_cast<std::uint64_t>(t));
            const MeasureSummary s = model->summarize(pi.points());
            const auto [gy, gx] =
                rng::normal_pair(37, static_cast<std::uint64_t>(t), 0, rng::Stream::Probe);
            const Point2 z{gy, gx};
            std::vector<double> gb(static_cast<std::size_t>(p1)), ga(static_cast<std::size_t>(p2));
            model->drift_grad(theta.mu, z, s, gb);
            model->diffusion_grad(theta.sigma, z, s, ga);
            for (int k = 0; k < p1; ++k) {
                std::vector<double> mu = theta.mu;
                const double h = 1e-5 * std::max(1.0, std::abs(mu[static_cast<std::size_t>(k)]));
                mu[static_cast<std::size_t>(k)] += h;
                const double fp = model->drift(mu, z, s);
                mu[static_cast<std::size_t>(k)] -= 2 * h;
                const double fm = model->drift(mu, z, s);
                const double fd = (fp - fm) / (2 * h);
                CHECK(gb[static_cast<std::size_t>(k)] ==
                      doctest::Approx(fd).epsilon(1e-6).scale(std::max(1.0, std::abs(fd))));
            }
            for (int k = 0; k < p2; ++k) {
                std::vector<double> sg = theta.sigma;
                const double h = 1e-5 * std::max(1.0, std::abs(sg[static_cast<std::size_t>(k)]));
                sg[static_cast<std::size_t>(k)] += h;
                const double fp = model->diffusion(sg, z, s);
                sg[static_cast<std::size_t>(k)] -= 2 * h;
                const double fm = model->diffusion(sg, z, s);
                const double fd = (fp - fm) / (2 * h);
                CHECK(ga[static_cast<std::size_t>(k)] ==
                      doctest::Approx(fd).epsilon(1e-6).scale(std::max(1.0, std::abs(fd))));
            }
        }
    }
}

TEST_CASE("check_assumptions: constant diffusion") {
    const auto model = make_mean_field_langevin();
    const auto rep = check_assumptions(*model, std::vector<double>{1.0, 0.5},
                                       std::vector<double>{0.7}, 51, 40);
    CHECK(rep.diffusion_ratio == doctest::Approx(0.0));
    CHECK(rep.min_diffusion == doctest::Approx(0.7));
    CHECK(rep.pass());
}

TEST_CASE("check_assumptions: langevin drift ratio stays under the analytic bound") {
    const auto model = make_mean_field_langevin();
    // |b(z,pi)-b(z',pi')| <= mu1 |x-x'| + mu2 |y-y'| + mu2 W2 <= (1 + 2 (1+1)) scale
    const auto rep = check_assumptions(*model, std::vector<double>{1.0, 2.0},
                                       std::vector<double>{0.7}, 53, 60);
    CHECK(rep.drift_ratio <= 5.0 + 1e-9);
    CHECK(rep.lipschitz_pass);
}

TEST_CASE("check_assumptions reports a floor violation without throwing") {
    CustomModel::Spec spec;
    spec.name = "broken_floor";
    spec.box = ParamBox{{-1.0}, {1.0}, {0.1}, {2.0}};
    spec.drift = [](std::span<const double>, Point2, const MeasureSummary&) { return 0.0; };
    spec.drift_grad = [](std::span<const double>, Point2, const MeasureSummary&,
                         std::span<double> out) { out[0] = 0.0; };
    spec.diffusion = [](std::span<const double> sg, Point2, const MeasureSummary&) {
        return sg[0] - 1.0;
    };
    spec.diffusion_grad = [](std::span<const double>, Point2, const MeasureSummary&,
                             std::span<double> out) { out[0] = 1.0; };
    const CustomModel model(std::move(spec));
    const auto rep = check_assumptions(model, std::vector<double>{0.0}, std::vector<double>{0.5},
                                       61, 10);
    CHECK(rep.min_diffusion == doctest::Approx(-0.5));
    CHECK_FALSE(rep.floor_pass);
    CHECK_FALSE(rep.pass());
}

TEST_CASE("parameter box validation") {
    CHECK_THROWS_AS(ParamBox({{1.0}, {0.5}, {0.0}, {1.0}}).validate(), std::invalid_argument);
    const ParamBox box{{-1.0, 0.0}, {1.0, 2.0}, {0.1}, {0.9}};
    CHECK(box.contains(std::vector<double>{0.0, 1.0, 0.5}));
    CHECK_FALSE(box.contains(std::vector<double>{0.0, 3.0, 0.5}));
    const auto c = box.center();
    CHECK(c == std::vector<double>{0.0, 1.0, 0.5});
}
