#pragma once

#include <vector>

namespace pvae {

// Curvature of the Poincare ball B_c^d (the ball has radius 1/sqrt(c)).
// c = 0 selects the exact Euclidean mode: every operation below switches to
// its flat-space formula rather than evaluating a limit.
struct Curvature {
    double c = 0.0;

    explicit Curvature(double value);
    Curvature() = default;
};

// A point strictly inside the ball of radius 1/sqrt(c). Construction clamps
// radially: densities and the conformal factor diverge at the boundary, so
// points are kept at norm <= (1/sqrt(c)) (1 - eps_ball) with
// eps_ball = 1e-5 / sqrt(c).
class BallPoint {
public:
    BallPoint(std::vector<double> coords, Curvature curv);
    static BallPoint origin(int dim, Curvature curv);

    int dim() const { return static_cast<int>(coords_.size()); }
    double curvature() const { return c_; }
    const std::vector<double>& coords() const { return coords_; }
    double sq_norm() const;

private:
    std::vector<double> coords_;
    double c_ = 0.0;
};

struct TangentVector {
    BallPoint base;
    std::vector<double> vec;
};

// Conformal factor lambda_z^c = 2 / (1 - c ||z||^2).
double lambda(const BallPoint& z);

// Norm of a tangent vector under the metric at its base point.
double metric_norm(const TangentVector& v);

// Geodesic distance. Equals ||z - y|| at c = 0.
double distance(const BallPoint& z, const BallPoint& y);

// Mobius addition z (+)_c y; plain vector addition at c = 0.
BallPoint mobius_add(const BallPoint& z, const BallPoint& y);

BallPoint negate(const BallPoint& z);

// exp_z^c(v); z + v at c = 0. The zero tangent maps to z.
BallPoint exp_map(const BallPoint& z, const std::vector<double>& v);
BallPoint exp_map(const TangentVector& v);

// log_z^c(y); y - z at c = 0. Returns the zero tangent when y = z.
TangentVector log_map(const BallPoint& z, const BallPoint& y);

// Distance from z to the gyroplane through p orthogonal to a.
// |<z - p, a>| / ||a|| at c = 0. Rejects a = 0.
double gyroplane_distance(const BallPoint& z, const std::vector<double>& a,
                          const BallPoint& p);

}  // namespace pvae
