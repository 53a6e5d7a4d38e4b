#pragma once

#include <cstdlib>

#include "troplift/series.hpp"

namespace troplift {

// Theta factor of the multiplicative uniformization with nome q, zero orbit
// z*q^Z, evaluated at u:
//
//   theta(z, u, q) = prod_{j<=0} (1 - u q^{-j} / z) * prod_{j>=1} (1 - q^j z / u)
//
// The window is finite: factors outside it are 1 + O(t^trunc) relative to the
// running product, so the result carries relative precision trunc.  Each
// factor is normalized to valuation zero before multiplying; the accumulated
// shift is restored at the end, which keeps intermediate truncation loss-free
// even when v(theta) is negative.
inline Series theta(const Series& z, const Series& u, const Series& q,
                    const Rat& trunc = kDefaultTrunc) {
  Rat ell = require_valuation(q, "theta nome");
  if (!(ell > 0)) throw InputError("theta nome must have positive valuation");
  Rat vz = require_valuation(z, "theta zero");
  Rat vu = require_valuation(u, "theta argument");
  Rat spread = trunc + abs(vu) + abs(vz);
  long J = static_cast<long>(rat_ceil(spread / ell).get_si());
  if (J < 1) J = 1;
  // every factor is 1 - (monomial of valuation >= -spread); relative
  // precision trunc on the product needs no more than this
  Rat amb = trunc + abs(vu) + abs(vz) + 1;

  long d = std::max({z.fld.d, u.fld.d, q.fld.d});
  Series unit = s_from_q(1, d);
  Rat vsum = 0;
  for (long j = -J; j <= J; ++j) {
    Series f;
    if (j <= 0) {
      f = s_sub(s_from_q(1, d), s_div(s_mul(u, s_pow(q, -j, amb)), z, amb));
    } else {
      f = s_sub(s_from_q(1, d), s_div(s_mul(z, s_pow(q, j, amb)), u, amb));
    }
    if (f.exact_zero())
      throw MathError("EvaluationAtZeroOrPole",
                      "theta argument lies on the zero orbit");
    Rat vf = require_valuation(f, "theta factor");
    vsum += vf;
    Series fu = s_truncate(s_shift(f, -vf), XRat(trunc));
    unit = s_truncate(s_mul(unit, fu), XRat(trunc));
  }
  return s_shift(unit, vsum);
}

// v(theta(z, u, q)) without building the product.  A factor contributes its
// monomial-quotient valuation when that is negative, nothing when positive;
// only the tied case needs series work.
inline Rat theta_valuation(const Series& z, const Series& u, const Series& q,
                           const Rat& trunc = kDefaultTrunc) {
  Rat ell = require_valuation(q, "theta nome");
  if (!(ell > 0)) throw InputError("theta nome must have positive valuation");
  Rat vz = require_valuation(z, "theta zero");
  Rat vu = require_valuation(u, "theta argument");
  Rat spread = trunc + abs(vu) + abs(vz);
  long J = static_cast<long>(rat_ceil(spread / ell).get_si());
  if (J < 1) J = 1;
  Rat amb = trunc + abs(vu) + abs(vz) + 1;
  long d = std::max({z.fld.d, u.fld.d, q.fld.d});
  Rat vsum = 0;
  for (long j = -J; j <= J; ++j) {
    Rat w = j <= 0 ? vu + Rat(-j) * ell - vz : vz + Rat(j) * ell - vu;
    if (w > 0) continue;
    if (w < 0) {
      vsum += w;
      continue;
    }
    Series f;
    if (j <= 0) {
      f = s_sub(s_from_q(1, d), s_div(s_mul(u, s_pow(q, -j, amb)), z, amb));
    } else {
      f = s_sub(s_from_q(1, d), s_div(s_mul(z, s_pow(q, j, amb)), u, amb));
    }
    if (f.exact_zero())
      throw MathError("EvaluationAtZeroOrPole",
                      "theta argument lies on the zero orbit");
    vsum += require_valuation(f, "theta factor");
  }
  return vsum;
}

}  // namespace troplift
