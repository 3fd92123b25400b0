#pragma once

#include "pvae/autodiff.hpp"

namespace pvae::geo {

using ad::Var;

// Ball geometry as differentiable graph ops over row batches {B, d}.
// Every op has an explicit c = 0 branch that computes the plain Euclidean
// formula (not a limit), matching the scalar module in pvae/ball.hpp.

// Conformal factor per row: {B,1}.
Var lambda_rows(const Var& z, double c);

Var mobius_add_rows(const Var& x, const Var& y, double c);

// exp / log maps based at the origin.
Var exp0_rows(const Var& v, double c);
Var log0_rows(const Var& z, double c);

// Geodesic distance to the origin per row: {B,1}.
Var dist0_rows(const Var& z, double c);

// exp_mu(v / lambda_mu): the sampling map of Algorithm-style draws, with
// v given in the tangent frame. z = mu + v at c = 0.
Var expmap_pre_rows(const Var& mu, const Var& v, double c);

// Gyroplane layer: unit k maps z to
//   sign(<a_k, log_{p_k} z>) ||a_k||_{p_k} d(z, H_{a_k, p_k})
// with p_k = exp_0(p0_k). Orientations `a` are rows of {H,d}, offset
// pre-images `p0` rows of {H,d}. Returns {B,H}; the affine map
// <a_k, z - p_k> at c = 0.
Var gyroplane_rows(const Var& z, const Var& a, const Var& p0, double c);

}  // namespace pvae::geo
