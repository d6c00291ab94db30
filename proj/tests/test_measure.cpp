#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kips/measure.hpp"
#include "kips/rng.hpp"

using namespace kips;

namespace {

EmpiricalMeasure random_cloud(int n, std::uint64_t seed, std::uint64_t tag) {
    std::vector<Point2> pts;
    for (int i = 0; i < n; ++i) {
        const auto [a, b] =
            rng::normal_pair(seed, tag, static_cast<std::uint64_t>(i), rng::Stream::Synthetic);
        pts.push_back({2.0 * a, 2.0 * b});
    }
    return EmpiricalMeasure(pts);
}

}  // namespace

TEST_CASE("w2 basics") {
    const auto a = EmpiricalMeasure({{0, 0}, {1, 2}, {-1, 3}});
    CHECK(w2(a, a) == doctest::Approx(0.0));
    CHECK(w2(EmpiricalMeasure::dirac({0, 0}), EmpiricalMeasure::dirac({3, 4})) ==
          doctest::Approx(5.0));
    // two-point clouds, both pairings cost the same: distance 1
    const auto p = EmpiricalMeasure({{0, 0}, {1, 0}});
    const auto q = EmpiricalMeasure({{0, 1}, {1, 1}});
    CHECK(w2(p, q) == doctest::Approx(1.0));
    CHECK(w2(p, q) == doctest::Approx(w2_bruteforce(p, q)));
    CHECK_THROWS_AS((void)w2(a, p), std::invalid_argument);
}

TEST_CASE("assignment solver equals brute force on random clouds") {
    for (int trial = 0; trial < 120; ++trial) {
        const int n = 2 + trial % 5;  // 2..6
        const auto a = random_cloud(n, 100 + static_cast<std::uint64_t>(trial), 0);
        const auto b = random_cloud(n, 100 + static_cast<std::uint64_t>(trial), 1);
        CHECK(w2(a, b) == doctest::Approx(w2_bruteforce(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("w2 symmetry and triangle inequality on random triples") {
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 3 + trial % 4;
        const auto a = random_cloud(n, 300 + static_cast<std::uint64_t>(trial), 0);
        const auto b = random_cloud(n, 300 + static_cast<std::uint64_t>(trial), 1);
        const auto c = random_cloud(n, 300 + static_cast<std::uint64_t>(trial), 2);
        const double ab = w2(a, b), ba = w2(b, a), ac = w2(a, c), cb = w2(c, b);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        CHECK(ab <= ac + cb + 1e-9);
    }
}

TEST_CASE("moment oracle values") {
    CHECK(moment(EmpiricalMeasure::dirac({0, 0}), 2) == doctest::Approx(0.0));
    CHECK(moment(EmpiricalMeasure::dirac({3, 4}), 2) == doctest::Approx(25.0));
    CHECK(moment(EmpiricalMeasure({{1, 0}, {0, 2}}), 2) == doctest::Approx(2.5));
    CHECK_THROWS_AS((void)moment(EmpiricalMeasure::dirac({1, 1}), 0), std::invalid_argument);
}

TEST_CASE("w2 against the origin cloud squares to the second moment") {
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + trial % 5;
        const auto a = random_cloud(n, 500 + static_cast<std::uint64_t>(trial), 0);
        const auto zero = EmpiricalMeasure::dirac({0, 0}, n);
        CHECK(sq(w2(a, zero)) == doctest::Approx(moment(a, 2)).epsilon(1e-10));
    }
}

TEST_CASE("mean_position") {
    CHECK(mean_position(EmpiricalMeasure({{0, 7}, {2, -1}})) == doctest::Approx(1.0));
    CHECK(mean_position(EmpiricalMeasure::dirac({5, 0})) == doctest::Approx(5.0));
    CHECK(mean_position(EmpiricalMeasure({{1, 0}, {2, 0}, {3, 0}})) == doctest::Approx(2.0));
}

TEST_CASE("empirical measure rejects bad input") {
    CHECK_THROWS_AS(EmpiricalMeasure(std::vector<Point2>{}), std::invalid_argument);
    CHECK_THROWS_AS(EmpiricalMeasure({{std::nan(""), 0.0}}), std::invalid_argument);
}
