#include "pvae/special.hpp"

#include <algorithm>

namespace pvae {

double log_binomial(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double log_erfcx(double t) {
    if (t < 26.0) {
        // erfc(t) stays normal up to t ~ 26.5, so the direct form is exact here.
        return t * t + std::log(std::erfc(t));
    }
    // Asymptotic tail: erfcx(t) ~ (1/(t sqrt(pi))) (1 - 1/(2t^2) + 3/(4t^4) - ...).
    const double it2 = 1.0 / (t * t);
    const double series = -0.5 * it2 + 0.75 * it2 * it2 - 1.875 * it2 * it2 * it2
                          + 6.5625 * it2 * it2 * it2 * it2;
    return -std::log(t) - 0.5 * std::log(kPi) + std::log1p(series);
}

double log_erfc(double t) {
    if (t <= 0.0) return std::log(std::erfc(t));  // erfc in [1, 2]
    return log_erfcx(t) - t * t;
}

double log_sphere_area(int d) {
    return std::log(2.0) + 0.5 * d * std::log(kPi) - std::lgamma(0.5 * d);
}

double tanhc(double x) {
    const double ax = std::abs(x);
    if (ax < 1e-4) {
        const double x2 = x * x;
        return 1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0;
    }
    return std::tanh(x) / x;
}

double artanhc(double x) {
    const double ax = std::abs(x);
    if (ax < 1e-4) {
        const double x2 = x * x;
        return 1.0 + x2 / 3.0 + x2 * x2 / 5.0;
    }
    return std::atanh(x) / x;
}

double sinhc(double x) {
    const double ax = std::abs(x);
    if (ax < 1e-4) {
        const double x2 = x * x;
        return 1.0 + x2 / 6.0 + x2 * x2 / 120.0;
    }
    return std::sinh(x) / x;
}

double log_sinhc(double x) {
    const double ax = std::abs(x);
    if (ax < 1e-4) {
        const double x2 = x * x;
        return std::log1p(x2 / 6.0 + x2 * x2 / 120.0);
    }
    // log(sinh x) = x - log 2 + log1p(-e^{-2x}) avoids sinh overflow
    return ax - std::log(2.0) + std::log1p(-std::exp(-2.0 * ax)) - std::log(ax);
}

SignedLog SignedLogSum::total(const char* context) const {
    double m = kNegInf;
    for (const auto& t : terms_) m = std::max(m, t.log_abs);
    if (m == kNegInf) return {kNegInf, 0};

    double pos = 0.0, neg = 0.0;
    for (const auto& t : terms_) {
        const double w = std::exp(t.log_abs - m);
        if (t.sign > 0) pos += w; else neg += w;
    }
    const double diff = pos - neg;
    if (diff == 0.0) return {kNegInf, 0};
    if (pos > 0.0 && neg > 0.0 && std::abs(diff) < tol_ * std::max(pos, neg)) {
        throw precision_loss(std::string(context) +
                             ": alternating sum cancelled below trusted precision");
    }
    return {m + std::log(std::abs(diff)), diff > 0.0 ? 1 : -1};
}

}  // namespace pvae
