#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pvae/special.hpp"

using namespace pvae;

TEST_CASE("log_binomial matches exact small values") {
    CHECK(std::exp(log_binomial(4, 2)) == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(std::exp(log_binomial(19, 9)) == doctest::Approx(92378.0).epsilon(1e-11));
    CHECK(log_binomial(7, 0) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("log_erfcx agrees with the direct product and is continuous at the switch") {
    for (double t : {-3.0, -1.0, -0.1, 0.0, 0.5, 2.0, 10.0, 25.0}) {
        const double direct = t * t + std::log(std::erfc(t));
        CHECK(log_erfcx(t) == doctest::Approx(direct).epsilon(1e-12));
    }
    // asymptotic branch continuity (interval small enough that the true
    // slope -1/t contributes < 1e-11)
    const double lo = log_erfcx(26.0 - 1e-10);
    const double hi = log_erfcx(26.0 + 1e-10);
    CHECK(std::abs(lo - hi) < 1e-9);
    // large argument sanity: erfcx(t) ~ 1/(t sqrt(pi))
    CHECK(log_erfcx(1e4) == doctest::Approx(-std::log(1e4 * std::sqrt(kPi))).epsilon(1e-8));
}

TEST_CASE("log_sphere_area known dimensions") {
    CHECK(log_sphere_area(2) == doctest::Approx(std::log(2.0 * kPi)).epsilon(1e-14));
    CHECK(log_sphere_area(3) == doctest::Approx(std::log(4.0 * kPi)).epsilon(1e-14));
    CHECK(log_sphere_area(1) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("cardinal functions match series and direct forms across the guard") {
    for (double x : {1e-6, 5e-5, 1e-4, 2e-4, 0.1, 2.0}) {
        CHECK(tanhc(x) == doctest::Approx(std::tanh(x) / x).epsilon(1e-10));
        CHECK(sinhc(x) == doctest::Approx(std::sinh(x) / x).epsilon(1e-10));
        CHECK(log_sinhc(x) == doctest::Approx(std::log(std::sinh(x) / x)).epsilon(1e-10));
    }
    for (double x : {1e-6, 5e-5, 1e-4, 2e-4, 0.1, 0.9}) {
        CHECK(artanhc(x) == doctest::Approx(std::atanh(x) / x).epsilon(1e-10));
    }
    CHECK(log_sinhc(800.0) == doctest::Approx(800.0 - std::log(2.0) - std::log(800.0)));
    CHECK(tanhc(0.0) == 1.0);
    CHECK(sinhc(0.0) == 1.0);
}

TEST_CASE("SignedLogSum: totals, exact zero, cancellation guard") {
    SignedLogSum s;
    s.add(std::log(3.0), 1);
    s.add(std::log(1.0), -1);
    const SignedLog t = s.total();
    CHECK(t.sign == 1);
    CHECK(std::exp(t.log_abs) == doctest::Approx(2.0).epsilon(1e-14));

    SignedLogSum zero;
    zero.add(1.234, 1);
    zero.add(1.234, -1);
    const SignedLog z = zero.total();
    CHECK(z.sign == 0);

    SignedLogSum bad;
    bad.add(30.0, 1);
    bad.add(30.0 + 1e-14, -1);
    CHECK_THROWS_AS(bad.total(), precision_loss);
}
