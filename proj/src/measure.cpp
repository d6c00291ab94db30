#include "kips/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace kips {

EmpiricalMeasure::EmpiricalMeasure(std::vector<Point2> pts) : pts_(std::move(pts)) {
    if (pts_.empty()) throw std::invalid_argument("EmpiricalMeasure: empty point set");
    for (const Point2& z : pts_)
        if (!std::isfinite(z.y) || !std::isfinite(z.x))
            throw std::invalid_argument("EmpiricalMeasure: non-finite coordinate");
}

EmpiricalMeasure EmpiricalMeasure::dirac(Point2 z, int copies) {
    return EmpiricalMeasure(std::vector<Point2>(static_cast<std::size_t>(copies), z));
}

double assignment_cost(std::span<const double> cost, int n) {
    if (n <= 0 || cost.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
        throw std::invalid_argument("assignment_cost: bad dimensions");
    const double INF = std::numeric_limits<double>::infinity();
    // potentials over rows/cols; way[j] = predecessor column on the shortest
    // augmenting path; p[j] = row matched to column j (1-based, 0 = free)
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, INF);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = INF;
            int j1 = -1;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] -
                                   u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0);
    }
    double total = 0.0;
    for (int j = 1; j <= n; ++j)
        total += cost[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1) * n + (j - 1)];
    return total;
}

namespace {

std::vector<double> pair_costs(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    const auto pa = a.points(), pb = b.points();
    const int n = a.size();
    std::vector<double> cost(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            cost[static_cast<std::size_t>(i) * n + j] =
                sq(pa[i].y - pb[j].y) + sq(pa[i].x - pb[j].x);
    return cost;
}

}  // namespace

double w2(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("w2: measures must have equal size");
    const int n = a.size();
    const double total = assignment_cost(pair_costs(a, b), n);
    return std::sqrt(std::max(0.0, total / n));
}

double w2_bruteforce(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("w2_bruteforce: measures must have equal size");
    const int n = a.size();
    if (n > 8) throw std::invalid_argument("w2_bruteforce: too large (N <= 8)");
    const auto cost = pair_costs(a, b);
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += cost[static_cast<std::size_t>(i) * n + perm[static_cast<std::size_t>(i)]];
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::sqrt(best / n);
}

double moment(const EmpiricalMeasure& pi, int p) {
    if (p < 1) throw std::invalid_argument("moment: p >= 1");
    double s = 0.0;
    for (const Point2& z : pi.points()) s += std::pow(norm(z), p);
    return s / pi.size();
}

double mean_position(const EmpiricalMeasure& pi) {
    double s = 0.0;
    for (const Point2& z : pi.points()) s += z.y;
    return s / pi.size();
}

}  // namespace kips
