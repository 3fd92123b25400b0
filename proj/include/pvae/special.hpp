#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "pvae/errors.hpp"

namespace pvae {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log C(n, k)
double log_binomial(int n, int k);

// log(erfcx(t)) = t^2 + log(erfc(t)), stable for all t.
// erfcx(t) = e^{t^2} erfc(t); note e^{x^2/2}(1 + erf(x/sqrt(2))) = erfcx(-x/sqrt(2)).
double log_erfcx(double t);

// log(erfc(t)) for all t.
double log_erfc(double t);

// log surface area of the unit (d-1)-sphere in R^d: log(2 pi^{d/2} / Gamma(d/2)).
double log_sphere_area(int d);

// tanh(x)/x, artanh(x)/x, sinh(x)/x and log(sinh(x)/x), with series guards
// near zero (and overflow-safe log form for large x).
double tanhc(double x);
double artanhc(double x);
double sinhc(double x);
double log_sinhc(double x);

// A term of a signed sum held in log space.
struct SignedLog {
    double log_abs = kNegInf;
    int sign = 0;  // -1, 0, +1
};

// Accumulates signed terms in log space and reduces with a single
// log-sum-exp pass over separate positive/negative accumulators.
// If the two sides cancel below `cancel_tol` of the largest side the
// result has no trustworthy digits and total() throws precision_loss.
class SignedLogSum {
public:
    explicit SignedLogSum(double cancel_tol = 1e-12) : tol_(cancel_tol) {}

    void add(double log_abs, int sign) {
        if (sign != 0 && log_abs != kNegInf) terms_.push_back({log_abs, sign});
    }
    void add(const SignedLog& t) { add(t.log_abs, t.sign); }

    SignedLog total(const char* context = "signed log-sum-exp") const;

    bool empty() const { return terms_.empty(); }

private:
    std::vector<SignedLog> terms_;
    double tol_;
};

// exp of a SignedLog, used where the result is known to be moderate.
inline double signed_exp(const SignedLog& t) {
    return t.sign == 0 ? 0.0 : t.sign * std::exp(t.log_abs);
}

}  // namespace pvae
