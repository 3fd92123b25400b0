#pragma once

#include <cstdint>
#include <vector>

#include "pvae/ball.hpp"
#include "pvae/hypdist.hpp"
#include "pvae/rng.hpp"

namespace pvae {

// Uniform direction on the unit sphere S^{d-1}.
std::vector<double> sample_sphere(int d, RngState& rng);

struct AcceptStats {
    std::uint64_t proposals = 0;
    std::uint64_t accepts = 0;
    double bound_m = 0.0;  // theoretical M for the bounded proposals; 0 for ARS

    double rate() const {
        return proposals == 0 ? 0.0 : static_cast<double>(accepts) / proposals;
    }
};

// Initial abscissae for the piecewise-exponential envelope: K = 20 points
// m + eta_k * min(s, 0.95 m / eta_max) with eta sweeping -[3 .. 0.1] then
// +[0.1 .. 3] around the radius mean m (s is the radius stddev).
std::vector<double> ars_init_grid(double sigma, double c, int d);

// Piecewise-exponential upper envelope of log rho^R built from tangents at
// the initial abscissae. Not adapted after construction.
class ArsProposal {
public:
    ArsProposal(double sigma, double c, int d);

    double sample(RngState& rng) const;
    double log_hull(double r) const;
    double log_target_unnorm(double r) const;
    const std::vector<double>& abscissae() const { return abscissae_; }

private:
    struct Piece {
        double slope, intercept;  // hull(x) = intercept + slope * x on [lo, hi)
        double lo, hi;
        double prob;              // normalised mass
    };
    double sigma_, c_;
    int d_;
    std::vector<double> abscissae_;
    std::vector<Piece> pieces_;
};

enum class RadiusMethod { ars, truncnorm, gamma };

// Draws from rho^R(r) with the selected proposal. `stats`, when given,
// accumulates proposal counts (and the bound M for the bounded methods).
double sample_radius_ars(double sigma, double c, int d, RngState& rng,
                         AcceptStats* stats = nullptr);
double sample_radius_truncnorm(double sigma, double c, int d, RngState& rng,
                               AcceptStats* stats = nullptr);
double sample_radius_gamma(double sigma, double c, int d, RngState& rng,
                           AcceptStats* stats = nullptr);

// Reusable sampler: envelope/bounds are prepared once for fixed parameters.
class RadiusSampler {
public:
    RadiusSampler(double sigma, double c, int d, RadiusMethod method = RadiusMethod::ars);
    double draw(RngState& rng);
    const AcceptStats& stats() const { return stats_; }

private:
    double sigma_, c_;
    int d_;
    RadiusMethod method_;
    AcceptStats stats_;
    std::vector<ArsProposal> ars_;  // empty or one element
};

// Algorithm: wrapped draws v ~ N(0, sigma^2 I) in the tangent frame;
// riemannian draws a direction alpha ~ U(S^{d-1}) and a radius r ~ rho^R,
// v = r alpha. Both return exp_mu(v / lambda_mu). At c = 0 both reduce to
// z = mu + sigma * N(0, I).
BallPoint sample_hyp_normal(const HypNormalParams& params, RngState& rng,
                            RadiusMethod method = RadiusMethod::ars);

// Anisotropic wrapped normal with diagonal dispersion.
BallPoint sample_wrapped_diag(const BallPoint& mu, const std::vector<double>& sigmas,
                              RngState& rng);

}  // namespace pvae
