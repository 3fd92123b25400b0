#include "pvae/hypdist.hpp"

#include <cmath>
#include <stdexcept>

#include "pvae/special.hpp"

namespace pvae {
namespace {

void check_radius_params(double sigma, double c, int d) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw std::domain_error("hypdist: sigma must be positive and finite");
    if (!(c > 0.0)) throw std::domain_error("hypdist: radius law needs c > 0");
    if (d < 1) throw std::domain_error("hypdist: dimension must be >= 1");
}

// Shared per-term quantities of the expanded density
//   rho(r) = (1/Z_r) (2 sqrt(c))^{-(d-1)} sum_k (-1)^k C(d-1,k)
//            exp(x_k^2/2) exp(-(r - b_k)^2 / 2 sigma^2)
// with a_k = (d-1-2k) sqrt(c), x_k = a_k sigma, b_k = a_k sigma^2.
struct Term {
    double a, x, b, v, log_c;
    int sign;
};

std::vector<Term> make_terms(double sigma, double c, int d) {
    const double sc = std::sqrt(c);
    std::vector<Term> ts(d);
    for (int k = 0; k < d; ++k) {
        Term& t = ts[k];
        t.a = (d - 1 - 2 * k) * sc;
        t.x = t.a * sigma;
        t.b = t.a * sigma * sigma;
        t.v = t.x / std::sqrt(2.0);
        t.log_c = log_binomial(d - 1, k);
        t.sign = (k % 2 == 0) ? 1 : -1;
    }
    return ts;
}

// sum_k (-1)^k C(d-1,k) e^{x_k^2/2} (1 + erf(v_k)) = sum_k (-1)^k C erfcx(-v_k)
SignedLog z_inner(const std::vector<Term>& ts) {
    SignedLogSum acc;
    for (const auto& t : ts) acc.add(t.log_c + log_erfcx(-t.v), t.sign);
    return acc.total("riemannian_log_Zr");
}

const double half_log_pi_over_2 = 0.5 * std::log(kPi / 2.0);

double log_prefactor(double sigma, double c, int d) {
    return half_log_pi_over_2 + std::log(sigma) - (d - 1) * std::log(2.0 * std::sqrt(c));
}

int sign_of(double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); }

}  // namespace

HypNormalParams::HypNormalParams(BallPoint mean, double dispersion, Family fam)
    : mu(std::move(mean)), sigma(dispersion), family(fam) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw std::domain_error("HypNormalParams: sigma must be positive and finite");
}

double riemannian_log_Zr(double sigma, double c, int d) {
    check_radius_params(sigma, c, d);
    const SignedLog s = z_inner(make_terms(sigma, c, d));
    if (s.sign <= 0)
        throw precision_loss("riemannian_log_Zr: non-positive total");
    return log_prefactor(sigma, c, d) + s.log_abs;
}

double riemannian_log_Z(double sigma, double c, int d) {
    return riemannian_log_Zr(sigma, c, d) + log_sphere_area(d);
}

double dlog_Zr_dsigma(double sigma, double c, int d) {
    check_radius_params(sigma, c, d);
    const auto ts = make_terms(sigma, c, d);
    const double half_log_2_over_pi = 0.5 * std::log(2.0 / kPi);
    SignedLogSum acc;
    for (const auto& t : ts) {
        if (t.a == 0.0) continue;
        acc.add(t.log_c + std::log(t.a * t.a * sigma) + log_erfcx(-t.v), t.sign);
        acc.add(t.log_c + half_log_2_over_pi + std::log(std::abs(t.a)),
                t.sign * sign_of(t.a));
    }
    const SignedLog dz = acc.total("dlog_Zr_dsigma");
    const SignedLog z = z_inner(ts);
    double out = 1.0 / sigma;
    if (dz.sign != 0) out += dz.sign * std::exp(dz.log_abs - z.log_abs);
    return out;
}

double riemannian_radius_log_density(double r, double sigma, double c, int d) {
    check_radius_params(sigma, c, d);
    if (r < 0.0) return kNegInf;
    const double sc = std::sqrt(c);
    double log_unnorm = -r * r / (2.0 * sigma * sigma);
    if (d > 1) {
        if (r == 0.0) return kNegInf;
        // log (sinh(sqrt(c) r)/sqrt(c))^{d-1} = (d-1) [log_sinhc(sc r) + log r]
        log_unnorm += (d - 1) * (log_sinhc(sc * r) + std::log(r));
    }
    return log_unnorm - riemannian_log_Zr(sigma, c, d);
}

double radius_density_developed(double r, double sigma, double c, int d) {
    check_radius_params(sigma, c, d);
    if (r < 0.0) return 0.0;
    const auto ts = make_terms(sigma, c, d);
    SignedLogSum acc;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (const auto& t : ts) {
        const double dr = r - t.b;
        acc.add(t.log_c + 0.5 * t.x * t.x - dr * dr * inv2s2, t.sign);
    }
    const SignedLog s = acc.total("radius_density_developed");
    if (s.sign == 0) return 0.0;
    if (s.sign < 0)
        throw precision_loss("radius_density_developed: negative density from cancellation");
    const double log_z = riemannian_log_Zr(sigma, c, d);
    return std::exp(s.log_abs - (d - 1) * std::log(2.0 * std::sqrt(c)) - log_z);
}

double riemannian_radius_cdf(double r, double sigma, double c, int d) {
    check_radius_params(sigma, c, d);
    if (r <= 0.0) return 0.0;
    const auto ts = make_terms(sigma, c, d);
    const double is2 = 1.0 / (std::sqrt(2.0) * sigma);
    SignedLogSum acc;
    for (const auto& t : ts) {
        const double u = (r - t.b) * is2;
        // e^{x^2/2} (erf(u) + erf(v)) = e^{x^2/2} erfc(-u) - e^{x^2/2} erfc(v)
        acc.add(t.log_c + 0.5 * t.x * t.x + log_erfc(-u), t.sign);
        acc.add(t.log_c + 0.5 * t.x * t.x + log_erfc(t.v), -t.sign);
    }
    const SignedLog num = acc.total("riemannian_radius_cdf");
    if (num.sign == 0) return 0.0;
    if (num.sign < 0)
        throw precision_loss("riemannian_radius_cdf: negative value from cancellation");
    const SignedLog den = z_inner(ts);
    return std::min(1.0, std::exp(num.log_abs - den.log_abs));
}

double riemannian_radius_cdf_dsigma(double r, double sigma, double c, int d) {
    check_radius_params(sigma, c, d);
    if (r <= 0.0) return 0.0;
    const auto ts = make_terms(sigma, c, d);
    const double is2 = 1.0 / (std::sqrt(2.0) * sigma);
    const double half_log_2_over_pi = 0.5 * std::log(2.0 / kPi);

    SignedLogSum t_acc, dt_acc, dz_acc;
    for (const auto& t : ts) {
        const double u = (r - t.b) * is2;
        const double half_x2 = 0.5 * t.x * t.x;
        t_acc.add(t.log_c + half_x2 + log_erfc(-u), t.sign);
        t_acc.add(t.log_c + half_x2 + log_erfc(t.v), -t.sign);

        // d/dsigma of e^{x^2/2}(erf u + erf v), with
        // e^{x^2/2 - u^2} = e^{a r - r^2/2 sigma^2} and e^{x^2/2 - v^2} = 1:
        //   a^2 sigma e^{x^2/2}(erf u + erf v)
        // - sqrt(2/pi) (r/sigma^2 + a) e^{a r - r^2/2 sigma^2}
        // + sqrt(2/pi) a
        if (t.a != 0.0) {
            const double log_a2s = std::log(t.a * t.a * sigma);
            dt_acc.add(t.log_c + log_a2s + half_x2 + log_erfc(-u), t.sign);
            dt_acc.add(t.log_c + log_a2s + half_x2 + log_erfc(t.v), -t.sign);
            dz_acc.add(t.log_c + log_a2s + log_erfcx(-t.v), t.sign);
            const int sa = sign_of(t.a);
            dt_acc.add(t.log_c + half_log_2_over_pi + std::log(std::abs(t.a)), t.sign * sa);
            dz_acc.add(t.log_c + half_log_2_over_pi + std::log(std::abs(t.a)), t.sign * sa);
        }
        const double w = r / (sigma * sigma) + t.a;
        if (w != 0.0) {
            const double e = t.a * r - r * r / (2.0 * sigma * sigma);
            dt_acc.add(t.log_c + half_log_2_over_pi + std::log(std::abs(w)) + e,
                       -t.sign * sign_of(w));
        }
    }
    const SignedLog T = t_acc.total("cdf_dsigma: numerator");
    const SignedLog Z = z_inner(ts);
    const SignedLog dT = dt_acc.total("cdf_dsigma: d(numerator)/dsigma");
    const SignedLog dZ = dz_acc.total("cdf_dsigma: dZ/dsigma");

    // d(T/Z)/dsigma = dT/Z - T dZ / Z^2
    double out = 0.0;
    if (dT.sign != 0) out += dT.sign * std::exp(dT.log_abs - Z.log_abs);
    if (T.sign != 0 && dZ.sign != 0)
        out -= T.sign * dZ.sign * std::exp(T.log_abs + dZ.log_abs - 2.0 * Z.log_abs);
    return out;
}

double riemannian_radius_drdsigma(double r, double sigma, double c, int d) {
    const double log_rho = riemannian_radius_log_density(r, sigma, c, d);
    return -riemannian_radius_cdf_dsigma(r, sigma, c, d) * std::exp(-log_rho);
}

double riemannian_radius_mean(double sigma, double c, int d) {
    check_radius_params(sigma, c, d);
    const auto ts = make_terms(sigma, c, d);
    const double log_pref = half_log_pi_over_2 + std::log(sigma);
    SignedLogSum acc;
    for (const auto& t : ts) {
        acc.add(t.log_c + 2.0 * std::log(sigma), t.sign);
        if (t.b != 0.0)
            acc.add(t.log_c + std::log(std::abs(t.b)) + log_pref + log_erfcx(-t.v),
                    t.sign * sign_of(t.b));
    }
    const SignedLog num = acc.total("riemannian_radius_mean");
    const SignedLog den = z_inner(ts);
    if (num.sign <= 0) throw precision_loss("riemannian_radius_mean: non-positive total");
    return std::exp(num.log_abs - log_pref - den.log_abs);
}

double riemannian_radius_stddev(double sigma, double c, int d) {
    check_radius_params(sigma, c, d);
    const auto ts = make_terms(sigma, c, d);
    const double log_pref = half_log_pi_over_2 + std::log(sigma);
    SignedLogSum acc;
    for (const auto& t : ts) {
        if (t.b != 0.0)
            acc.add(t.log_c + 2.0 * std::log(sigma) + std::log(std::abs(t.b)),
                    t.sign * sign_of(t.b));
        acc.add(t.log_c + std::log(sigma * sigma + t.b * t.b) + log_pref + log_erfcx(-t.v),
                t.sign);
    }
    const SignedLog num = acc.total("riemannian_radius_stddev");
    const SignedLog den = z_inner(ts);
    if (num.sign <= 0) throw precision_loss("riemannian_radius_stddev: non-positive total");
    const double second_moment = std::exp(num.log_abs - log_pref - den.log_abs);
    const double mean = riemannian_radius_mean(sigma, c, d);
    return std::sqrt(std::max(second_moment - mean * mean, 0.0));
}

double riemannian_radius_quantile(double u, double sigma, double c, int d) {
    check_radius_params(sigma, c, d);
    if (!(u >= 0.0 && u < 1.0))
        throw std::domain_error("riemannian_radius_quantile: u must be in [0, 1)");
    if (u == 0.0) return 0.0;
    double lo = 0.0;
    double hi = riemannian_radius_mean(sigma, c, d) + 12.0 * sigma +
                d * std::sqrt(c) * sigma * sigma;
    while (riemannian_radius_cdf(hi, sigma, c, d) < u) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (riemannian_radius_cdf(mid, sigma, c, d) < u) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

namespace {

double euclidean_log_pdf(const BallPoint& mu, double sigma, const BallPoint& z) {
    const int d = mu.dim();
    double sq = 0.0;
    for (int i = 0; i < d; ++i) {
        const double dx = z.coords()[i] - mu.coords()[i];
        sq += dx * dx;
    }
    return -0.5 * d * std::log(2.0 * kPi * sigma * sigma) - sq / (2.0 * sigma * sigma);
}

}  // namespace

double riemannian_log_pdf(const HypNormalParams& params, const BallPoint& z) {
    if (params.family != Family::riemannian)
        throw std::domain_error("riemannian_log_pdf: wrong family tag");
    const double c = params.mu.curvature();
    if (c == 0.0) return euclidean_log_pdf(params.mu, params.sigma, z);
    const double r = distance(params.mu, z);
    const int d = params.mu.dim();
    return -r * r / (2.0 * params.sigma * params.sigma) -
           riemannian_log_Z(params.sigma, c, d);
}

double wrapped_log_pdf(const HypNormalParams& params, const BallPoint& z) {
    if (params.family != Family::wrapped)
        throw std::domain_error("wrapped_log_pdf: wrong family tag");
    const double c = params.mu.curvature();
    if (c == 0.0) return euclidean_log_pdf(params.mu, params.sigma, z);
    const int d = params.mu.dim();
    const double r = distance(params.mu, z);
    const double s2 = params.sigma * params.sigma;
    return -0.5 * d * std::log(2.0 * kPi * s2) - r * r / (2.0 * s2) -
           (d - 1) * log_sinhc(std::sqrt(c) * r);
}

double wrapped_log_pdf_diag(const BallPoint& mu, const std::vector<double>& sigmas,
                            const BallPoint& z) {
    const int d = mu.dim();
    if (static_cast<int>(sigmas.size()) != d)
        throw std::domain_error("wrapped_log_pdf_diag: sigma dimension mismatch");
    for (double s : sigmas)
        if (!(s > 0.0)) throw std::domain_error("wrapped_log_pdf_diag: sigma must be > 0");
    const double c = mu.curvature();
    if (c == 0.0) {
        double out = 0.0;
        for (int i = 0; i < d; ++i) {
            const double dx = z.coords()[i] - mu.coords()[i];
            out += -0.5 * std::log(2.0 * kPi * sigmas[i] * sigmas[i]) -
                   dx * dx / (2.0 * sigmas[i] * sigmas[i]);
        }
        return out;
    }
    const TangentVector lm = log_map(mu, z);
    const double lam = lambda(mu);
    double out = 0.0, r2 = 0.0;
    for (int i = 0; i < d; ++i) {
        const double u = lam * lm.vec[i];
        r2 += u * u;
        out += -0.5 * std::log(2.0 * kPi * sigmas[i] * sigmas[i]) -
               u * u / (2.0 * sigmas[i] * sigmas[i]);
    }
    return out - (d - 1) * log_sinhc(std::sqrt(c) * std::sqrt(r2));
}

}  // namespace pvae
