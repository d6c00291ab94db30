#include "kips/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace kips::stats {

double csum(std::span<const double> v) {
    double s = 0.0, c = 0.0;
    for (double x : v) {
        const double t = s + x;
        if (std::abs(s) >= std::abs(x))
            c += (s - t) + x;
        else
            c += (x - t) + s;
        s = t;
    }
    return s + c;
}

MeanVar mean_var(std::span<const double> v) {
    MeanVar out;
    out.n = static_cast<long>(v.size());
    if (out.n == 0) return out;
    out.mean = csum(v) / static_cast<double>(out.n);
    if (out.n < 2) return out;
    std::vector<double> d2(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = v[i] - out.mean;
        d2[i] = d * d;
    }
    out.var = csum(d2) / static_cast<double>(out.n - 1);
    return out;
}

std::vector<double> covariance(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    const std::size_t p = rows[0].size();
    const std::size_t n = rows.size();
    std::vector<double> mean(p, 0.0);
    std::vector<double> buf(n);
    for (std::size_t k = 0; k < p; ++k) {
        for (std::size_t i = 0; i < n; ++i) buf[i] = rows[i][k];
        mean[k] = csum(buf) / static_cast<double>(n);
    }
    std::vector<double> cov(p * p, 0.0);
    if (n < 2) return cov;
    for (std::size_t k = 0; k < p; ++k) {
        for (std::size_t l = k; l < p; ++l) {
            for (std::size_t i = 0; i < n; ++i)
                buf[i] = (rows[i][k] - mean[k]) * (rows[i][l] - mean[l]);
            const double c = csum(buf) / static_cast<double>(n - 1);
            cov[k * p + l] = c;
            cov[l * p + k] = c;
        }
    }
    return cov;
}

LineFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("linear_fit: need >= 2 points of equal length");
    const double n = static_cast<double>(x.size());
    const double mx = csum(x) / n, my = csum(y) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = (syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

LineFit loglog_fit(std::span<const double> x, std::span<const double> y) {
    std::vector<double> lx(x.size()), ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] <= 0.0 || y[i] <= 0.0)
            throw std::invalid_argument("loglog_fit: inputs must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    return linear_fit(lx, ly);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / 1.4142135623730950488); }

// Acklam's rational approximation, |relative error| < 1.15e-9.
double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p in (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p > phigh) {
        q = std::sqrt(-2 * std::log(1 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

AdResult anderson_darling_normal(std::vector<double> sample) {
    AdResult out;
    out.n = static_cast<long>(sample.size());
    if (out.n < 8) throw std::invalid_argument("anderson_darling_normal: need >= 8 samples");
    const MeanVar mv = mean_var(sample);
    const double sd = std::sqrt(mv.var);
    if (!(sd > 0.0)) throw std::invalid_argument("anderson_darling_normal: zero variance");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(out.n);
    double s = 0.0;
    for (long i = 0; i < out.n; ++i) {
        const double zi = (sample[static_cast<std::size_t>(i)] - mv.mean) / sd;
        const double zr = (sample[static_cast<std::size_t>(out.n - 1 - i)] - mv.mean) / sd;
        double fi = normal_cdf(zi);
        double fr = normal_cdf(zr);
        // clamp away from 0/1 so logs stay finite for extreme order statistics
        fi = std::min(std::max(fi, 1e-300), 1.0 - 1e-16);
        fr = std::min(std::max(fr, 1e-300), 1.0 - 1e-16);
        s += (2.0 * static_cast<double>(i) + 1.0) * (std::log(fi) + std::log1p(-fr));
    }
    out.a2 = -n - s / n;
    out.a2_star = out.a2 * (1.0 + 0.75 / n + 2.25 / (n * n));
    // critical values for composite normality (both parameters estimated)
    out.pass_5pct = out.a2_star < 0.752;
    out.pass_1pct = out.a2_star < 1.035;
    return out;
}

}  // namespace kips::stats
