#pragma once

#include <span>
#include <vector>

#include "kips/point.hpp"

namespace kips {

// Uniform empirical measure on the plane: N points, each of weight 1/N.
class EmpiricalMeasure {
public:
    EmpiricalMeasure() = default;
    explicit EmpiricalMeasure(std::vector<Point2> pts);
    static EmpiricalMeasure dirac(Point2 z, int copies = 1);

    std::span<const Point2> points() const { return pts_; }
    int size() const { return static_cast<int>(pts_.size()); }

private:
    std::vector<Point2> pts_;
};

// Exact Wasserstein-2 distance between equal-size point clouds, solved as a
// linear assignment problem on squared Euclidean costs.
double w2(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

// Oracle for small clouds: minimum over all N! pairings. N <= 8.
double w2_bruteforce(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

// (1/N) sum |z_i|^p, i.e. W_p^p(pi, delta_0).
double moment(const EmpiricalMeasure& pi, int p);

// Average of the position coordinates.
double mean_position(const EmpiricalMeasure& pi);

// Min-cost perfect matching of a dense n x n cost matrix (row-major) by the
// shortest-augmenting-path method with dual potentials. Returns total cost.
double assignment_cost(std::span<const double> cost, int n);

}  // namespace kips
