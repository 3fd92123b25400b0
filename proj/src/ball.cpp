#include "pvae/ball.hpp"

#include <cmath>
#include <stdexcept>

#include "pvae/special.hpp"

namespace pvae {
namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double sq_norm(const std::vector<double>& a) { return dot(a, a); }

void check_pair(const BallPoint& z, const BallPoint& y) {
    if (z.curvature() != y.curvature())
        throw std::domain_error("ball: mixed curvatures");
    if (z.dim() != y.dim())
        throw std::domain_error("ball: dimension mismatch");
}

}  // namespace

Curvature::Curvature(double value) : c(value) {
    if (!(value >= 0.0) || !std::isfinite(value))
        throw std::domain_error("curvature must be finite and >= 0");
    if (value != 0.0 && value < 1e-10)
        throw std::domain_error("curvature below 1e-10: use c = 0 for the Euclidean mode");
}

BallPoint::BallPoint(std::vector<double> coords, Curvature curv)
    : coords_(std::move(coords)), c_(curv.c) {
    if (coords_.empty()) throw std::domain_error("ball point needs dimension >= 1");
    double n2 = 0.0;
    for (double x : coords_) {
        if (!std::isfinite(x)) throw std::domain_error("ball point has non-finite coordinate");
        n2 += x * x;
    }
    if (c_ == 0.0) return;
    const double sc = std::sqrt(c_);
    const double max_norm = (1.0 / sc) * (1.0 - 1e-5 / sc);
    const double n = std::sqrt(n2);
    if (n > max_norm) {
        const double scale = max_norm / n;
        for (double& x : coords_) x *= scale;
    }
}

BallPoint BallPoint::origin(int dim, Curvature curv) {
    return BallPoint(std::vector<double>(dim, 0.0), curv);
}

double BallPoint::sq_norm() const { return pvae::sq_norm(coords_); }

double lambda(const BallPoint& z) {
    const double t = 1.0 - z.curvature() * z.sq_norm();
    if (t <= 0.0) throw std::domain_error("lambda: point on or outside the ball");
    return 2.0 / t;
}

double metric_norm(const TangentVector& v) {
    return lambda(v.base) * std::sqrt(sq_norm(v.vec));
}

double distance(const BallPoint& z, const BallPoint& y) {
    check_pair(z, y);
    const double c = z.curvature();
    if (c == 0.0) {
        double s = 0.0;
        for (int i = 0; i < z.dim(); ++i) {
            const double dx = z.coords()[i] - y.coords()[i];
            s += dx * dx;
        }
        return std::sqrt(s);
    }
    // (2/sqrt(c)) artanh(sqrt(c) ||(-z) (+) y||), the geodesic form of the
    // cosh^-1 distance; better conditioned near coincident points.
    const BallPoint w = mobius_add(negate(z), y);
    const double sc = std::sqrt(c);
    return (2.0 / sc) * std::atanh(std::min(sc * std::sqrt(w.sq_norm()), 1.0 - 1e-15));
}

BallPoint mobius_add(const BallPoint& z, const BallPoint& y) {
    check_pair(z, y);
    const double c = z.curvature();
    const int d = z.dim();
    std::vector<double> out(d);
    if (c == 0.0) {
        for (int i = 0; i < d; ++i) out[i] = z.coords()[i] + y.coords()[i];
        return BallPoint(std::move(out), Curvature(c));
    }
    const double zy = dot(z.coords(), y.coords());
    const double z2 = z.sq_norm();
    const double y2 = y.sq_norm();
    const double a = 1.0 + 2.0 * c * zy + c * y2;
    const double b = 1.0 - c * z2;
    const double den = 1.0 + 2.0 * c * zy + c * c * z2 * y2;
    for (int i = 0; i < d; ++i)
        out[i] = (a * z.coords()[i] + b * y.coords()[i]) / den;
    return BallPoint(std::move(out), Curvature(c));
}

BallPoint negate(const BallPoint& z) {
    std::vector<double> out(z.coords());
    for (double& x : out) x = -x;
    return BallPoint(std::move(out), Curvature(z.curvature()));
}

BallPoint exp_map(const BallPoint& z, const std::vector<double>& v) {
    if (static_cast<int>(v.size()) != z.dim())
        throw std::domain_error("exp_map: tangent dimension mismatch");
    const double c = z.curvature();
    const int d = z.dim();
    if (c == 0.0) {
        std::vector<double> out(d);
        for (int i = 0; i < d; ++i) out[i] = z.coords()[i] + v[i];
        return BallPoint(std::move(out), Curvature(c));
    }
    const double vn = std::sqrt(sq_norm(v));
    if (vn == 0.0) return z;
    const double sc = std::sqrt(c);
    const double s = sc * lambda(z) * vn / 2.0;
    // tanh(s) v / (sqrt(c) ||v||) = (lambda/2) tanhc(s) v
    const double coef = 0.5 * lambda(z) * tanhc(s);
    std::vector<double> w(d);
    for (int i = 0; i < d; ++i) w[i] = coef * v[i];
    return mobius_add(z, BallPoint(std::move(w), Curvature(c)));
}

BallPoint exp_map(const TangentVector& v) {
    return exp_map(v.base, v.vec);
}

TangentVector log_map(const BallPoint& z, const BallPoint& y) {
    check_pair(z, y);
    const double c = z.curvature();
    const int d = z.dim();
    std::vector<double> out(d);
    if (c == 0.0) {
        for (int i = 0; i < d; ++i) out[i] = y.coords()[i] - z.coords()[i];
        return {z, std::move(out)};
    }
    if (z.coords() == y.coords()) return {z, std::vector<double>(d, 0.0)};
    const BallPoint w = mobius_add(negate(z), y);
    const double wn = std::sqrt(w.sq_norm());
    if (wn == 0.0) return {z, std::vector<double>(d, 0.0)};
    const double sc = std::sqrt(c);
    // (2 / (sqrt(c) lambda_z)) artanh(sqrt(c)||w||) w/||w|| = (2/lambda_z) artanhc(sqrt(c)||w||) w
    const double coef = (2.0 / lambda(z)) * artanhc(std::min(sc * wn, 1.0 - 1e-15));
    for (int i = 0; i < d; ++i) out[i] = coef * w.coords()[i];
    return {z, std::move(out)};
}

double gyroplane_distance(const BallPoint& z, const std::vector<double>& a,
                          const BallPoint& p) {
    check_pair(z, p);
    if (static_cast<int>(a.size()) != z.dim())
        throw std::domain_error("gyroplane: orientation dimension mismatch");
    const double an = std::sqrt(sq_norm(a));
    if (an < 1e-12) throw std::invalid_argument("gyroplane: zero orientation vector");
    const double c = z.curvature();
    if (c == 0.0) {
        double s = 0.0;
        for (int i = 0; i < z.dim(); ++i) s += (z.coords()[i] - p.coords()[i]) * a[i];
        return std::abs(s) / an;
    }
    const BallPoint w = mobius_add(negate(p), z);
    const double sc = std::sqrt(c);
    const double num = 2.0 * sc * std::abs(dot(w.coords(), a));
    const double den = (1.0 - c * w.sq_norm()) * an;
    return std::asinh(num / den) / sc;
}

}  // namespace pvae
