#pragma once

#include <span>
#include <vector>

namespace kips::stats {

// Neumaier-compensated sum: order-insensitive to 1e-16 level, used by all
// row-level aggregations.
double csum(std::span<const double> v);

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;  // unbiased
    long n = 0;
};
MeanVar mean_var(std::span<const double> v);

// Sample covariance matrix (unbiased) of rows[i] = one observation of
// dimension p. Returned row-major p*p.
std::vector<double> covariance(const std::vector<std::vector<double>>& rows);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};
LineFit linear_fit(std::span<const double> x, std::span<const double> y);
LineFit loglog_fit(std::span<const double> x, std::span<const double> y);

double normal_cdf(double z);
double normal_quantile(double p);

// Anderson-Darling test of composite normality (mean and variance estimated
// from the sample, small-sample adjusted statistic).
struct AdResult {
    double a2 = 0.0;       // raw statistic
    double a2_star = 0.0;  // adjusted
    long n = 0;
    bool pass_1pct = false;
    bool pass_5pct = false;
};
AdResult anderson_darling_normal(std::vector<double> sample);

}  // namespace kips::stats
