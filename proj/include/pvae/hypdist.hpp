#pragma once

#include <vector>

#include "pvae/ball.hpp"

namespace pvae {

enum class Family { wrapped, riemannian };

// Parameters of a hyperbolic normal distribution on the ball carrying mu.
// sigma is the scalar dispersion (isotropic).
struct HypNormalParams {
    BallPoint mu;
    double sigma;
    Family family;

    HypNormalParams(BallPoint mean, double dispersion, Family fam);
};

// Log densities w.r.t. the metric-induced measure dM (Lebesgue at c = 0,
// where both families are the plain isotropic normal).
double riemannian_log_pdf(const HypNormalParams& params, const BallPoint& z);
double wrapped_log_pdf(const HypNormalParams& params, const BallPoint& z);

// Anisotropic wrapped normal with diagonal covariance diag(sigmas^2).
double wrapped_log_pdf_diag(const BallPoint& mu, const std::vector<double>& sigmas,
                            const BallPoint& z);

// --- Riemannian radius law, c > 0 ---------------------------------------
// rho^R(r) is proportional to exp(-r^2/2sigma^2) (sinh(sqrt(c) r)/sqrt(c))^{d-1}
// on r > 0. All alternating binomial sums below run through signed
// log-sum-exp accumulators and throw precision_loss when untrustworthy.

// log of the radius normalisation constant Z_r^R.
double riemannian_log_Zr(double sigma, double c, int d);
// log of the full constant Z^R = Z_r^R * (hypersphere area).
double riemannian_log_Z(double sigma, double c, int d);
double dlog_Zr_dsigma(double sigma, double c, int d);

// Normalised log density of the radius (sinh form).
double riemannian_radius_log_density(double r, double sigma, double c, int d);
// Same density evaluated through the expanded binomial (Gaussian mixture) form.
double radius_density_developed(double r, double sigma, double c, int d);

double riemannian_radius_cdf(double r, double sigma, double c, int d);
// dF/dsigma at fixed r, by term-wise differentiation of the expanded cdf.
double riemannian_radius_cdf_dsigma(double r, double sigma, double c, int d);
// Implicit reparametrisation gradient dr/dsigma = -(dF/dsigma) / rho(r).
double riemannian_radius_drdsigma(double r, double sigma, double c, int d);

double riemannian_radius_mean(double sigma, double c, int d);
double riemannian_radius_stddev(double sigma, double c, int d);

// Inverse cdf by bisection (used for quantile-matched gradient checks).
double riemannian_radius_quantile(double u, double sigma, double c, int d);

}  // namespace pvae
