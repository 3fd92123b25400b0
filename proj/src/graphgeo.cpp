#include "pvae/graphgeo.hpp"

#include <cmath>
#include <stdexcept>

namespace pvae::geo {

using namespace ad;

Var lambda_rows(const Var& z, double c) {
    Var z2 = row_dot(z, z);
    return div(Var::scalar(2.0), add_const(scale(z2, -c), 1.0));
}

Var mobius_add_rows(const Var& x, const Var& y, double c) {
    if (c == 0.0) return add(x, y);
    Var xy = row_dot(x, y);
    Var x2 = row_dot(x, x);
    Var y2 = row_dot(y, y);
    Var a = add_const(add(scale(xy, 2.0 * c), scale(y2, c)), 1.0);
    Var b = add_const(scale(x2, -c), 1.0);
    Var den = add_const(add(scale(xy, 2.0 * c), scale(mul(x2, y2), c * c)), 1.0);
    return div(add(mul(a, x), mul(b, y)), den);
}

Var exp0_rows(const Var& v, double c) {
    if (c == 0.0) return v;
    Var t = tanhc(scale(row_norm(v), std::sqrt(c)));
    return mul(v, t);
}

Var log0_rows(const Var& z, double c) {
    if (c == 0.0) return z;
    Var t = artanhc(scale(row_norm(z), std::sqrt(c)));
    return mul(z, t);
}

Var dist0_rows(const Var& z, double c) {
    if (c == 0.0) return row_norm(z);
    const double sc = std::sqrt(c);
    return scale(artanh(scale(row_norm(z), sc)), 2.0 / sc);
}

Var expmap_pre_rows(const Var& mu, const Var& v, double c) {
    if (c == 0.0) return add(mu, v);
    // exp_mu(v / lambda_mu) = mu (+) (v tanhc(sqrt(c)||v||/2) / 2); the
    // conformal factor cancels inside the tanh argument.
    Var t = tanhc(scale(row_norm(v), 0.5 * std::sqrt(c)));
    return mobius_add_rows(mu, scale(mul(v, t), 0.5), c);
}

Var gyroplane_rows(const Var& z, const Var& a, const Var& p0, double c) {
    const std::size_t h = a.rows();
    if (p0.rows() != h || p0.cols() != a.cols())
        throw std::invalid_argument("gyroplane: orientation/offset shapes disagree");
    if (z.cols() != a.cols())
        throw std::invalid_argument("gyroplane: latent dimension mismatch");
    if (c == 0.0) {
        // <a_k, z> - <a_k, p_k> row-wise, vectorised over units
        Var zt = matmul(z, transpose(a));                       // {B,H}
        Var bias = transpose(row_dot(p0, a));                   // {1,H}
        return sub(zt, bias);
    }
    const double sc = std::sqrt(c);
    Var p = exp0_rows(p0, c);          // {H,d}
    Var lam = lambda_rows(p, c);       // {H,1}
    Var anorm = row_norm(a);           // {H,1}
    std::vector<Var> units;
    units.reserve(h);
    for (std::size_t k = 0; k < h; ++k) {
        Var ak = slice_rows(a, k, k + 1);
        Var pk = slice_rows(p, k, k + 1);
        Var w = mobius_add_rows(neg(pk), z, c);                 // {B,d}
        Var s = row_dot(w, ak);                                 // {B,1}
        Var w2 = row_dot(w, w);
        Var den = mul(add_const(scale(w2, -c), 1.0), slice_rows(anorm, k, k + 1));
        Var arg = div(scale(s, 2.0 * sc), den);
        // sign folds into asinh; scale by ||a||_p / sqrt(c) = lambda_p ||a|| / sqrt(c)
        Var coef = scale(mul(slice_rows(lam, k, k + 1), slice_rows(anorm, k, k + 1)),
                         1.0 / sc);
        units.push_back(mul(asinh_(arg), coef));
    }
    return concat_cols(units);
}

}  // namespace pvae::geo
