#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace kips {

// Dense row-major matrix of doubles; rows are particles, columns time slices.
class Array2D {
public:
    Array2D() = default;
    Array2D(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, fill) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
    std::span<const double> row(int i) const {
        return {a_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)};
    }
    std::span<double> row(int i) {
        return {a_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)};
    }
    const std::vector<double>& data() const { return a_; }
    std::vector<double>& data() { return a_; }

    friend bool operator==(const Array2D& l, const Array2D& r) {
        return l.rows_ == r.rows_ && l.cols_ == r.cols_ && l.a_ == r.a_;
    }

private:
    int rows_ = 0, cols_ = 0;
    std::vector<double> a_;
};

}  // namespace kips
