#pragma once

// Statistical test helpers shared by the sampler tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// One-sample Kolmogorov-Smirnov statistic against an analytic cdf.
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, std::abs((i + 1) / n - f));
        d = std::max(d, std::abs(i / n - f));
    }
    return d;
}

// Large-sample critical value at alpha = 0.01.
inline double ks_critical_001(std::size_t n) {
    return 1.62762 / std::sqrt(static_cast<double>(n));
}

// Chi-square upper 1% critical value (Wilson-Hilferty approximation).
inline double chi2_critical_001(int dof) {
    const double z = 2.3263478740408408;  // Phi^{-1}(0.99)
    const double k = static_cast<double>(dof);
    const double t = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
    return k * t * t * t;
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double stddev(const std::vector<double>& v) {
    const double m = mean(v);
    double s2 = 0.0;
    for (double x : v) s2 += (x - m) * (x - m);
    return std::sqrt(s2 / static_cast<double>(v.size() - 1));
}

inline double sem(const std::vector<double>& v) {
    return stddev(v) / std::sqrt(static_cast<double>(v.size()));
}

// chi distribution cdf for small d via closed forms (r >= 0, scale sigma).
inline double chi_cdf(double r, double sigma, int d) {
    const double x = r / sigma;
    if (d == 1) return std::erf(x / std::sqrt(2.0));
    if (d == 2) return 1.0 - std::exp(-0.5 * x * x);
    if (d == 3)
        return std::erf(x / std::sqrt(2.0)) -
               std::sqrt(2.0 / 3.14159265358979323846) * x * std::exp(-0.5 * x * x);
    return -1.0;  // unsupported here
}

}  // namespace oracle
