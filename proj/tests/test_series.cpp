#include <catch2/catch_amalgamated.hpp>

#include "support/rng.hpp"
#include "troplift/series.hpp"

using namespace troplift;
using troplift::testing::Rng;

static Series tp(long num, long den = 1) {
  Rat e(num, den);
  e.canonicalize();
  return t_pow(e);
}

TEST_CASE("addition cancels and truncates") {
  Series a = s_add(tp(1), tp(2));  // t + t^2
  Series r = s_add(a, s_neg(tp(1)));
  REQUIRE(s_exact_eq(r, tp(2)));

  Series x = s_add(s_from_q(7), tp(3));
  REQUIRE(s_exact_eq(s_add(s_zero(), x), x));

  Series trunc3 = s_truncate(s_add(s_from_q(1), tp(1)), XRat(Rat(3)));
  Series sum = s_add(trunc3, tp(3));
  REQUIRE(sum.terms.size() == 2);  // the t^3 term is below the precision floor
  REQUIRE(sum.trunc == XRat(Rat(3)));
}

TEST_CASE("multiplication, inversion, t powers") {
  Series inv = s_invert(s_sub(s_from_q(1), tp(1)), Rat(6));
  Series expect = s_zero();
  for (long k = 0; k < 6; ++k) expect = s_add(expect, tp(k));
  expect = s_truncate(std::move(expect), XRat(Rat(6)));
  REQUIRE(s_sub(inv, expect).terms.empty());
  REQUIRE(inv.trunc == XRat(Rat(6)));

  REQUIRE(s_exact_eq(s_mul(tp(1, 2), tp(1, 2)), tp(1)));

  Series a = s_add(s_scale(nf_from_q(2, 1), tp(1)), tp(3));
  Series b = s_scale(nf_from_q(3, 1), tp(-1));
  Series prod = s_mul(a, b);
  REQUIRE(valuation(prod) == Val::finite(0));
  REQUIRE(s_residue(prod) == nf_from_q(6, 1));
}

TEST_CASE("valuation tri-state and residue") {
  REQUIRE(valuation(s_add(tp(-2), s_from_q(1))) == Val::finite(-2));
  REQUIRE(s_residue(s_add(s_from_q(3), tp(1))) == nf_from_q(3, 1));

  Series unk = s_truncate(s_zero(), XRat(Rat(5)));
  REQUIRE(valuation(unk).kind == Val::kUnknown);
  REQUIRE(valuation(s_zero()).kind == Val::kInf);
  REQUIRE_THROWS_AS(s_residue(unk), PrecisionError);
  REQUIRE_THROWS_AS(s_residue(tp(1)), MathError);
  REQUIRE_THROWS_AS(s_invert(unk), PrecisionError);
}

TEST_CASE("exact monomial inversion stays exact") {
  Series m = s_scale(nf_from_q(Rat(3, 2), 1), tp(-5));
  Series i = s_invert(m);
  REQUIRE(i.trunc.inf);
  REQUIRE(s_exact_eq(s_mul(m, i), s_from_q(1)));
}

TEST_CASE("cross ratio reference values") {
  P1 zero = P1::of(s_zero());
  P1 one = P1::of(s_from_q(1));
  P1 inf = P1::infinity();
  P1 tm3 = P1::of(tp(-3));
  P1 two = P1::of(s_from_q(2));

  auto a = cross_ratio_valuation(zero, one, inf, tm3);
  REQUIRE(a.v_c == 0);
  REQUIRE(a.v_c_minus_1 == 3);

  auto b = cross_ratio_valuation(zero, inf, one, tm3);
  REQUIRE(b.v_c == 3);

  auto c = cross_ratio_valuation(zero, one, inf, two);
  REQUIRE(c.v_c == 0);
  REQUIRE(c.v_c_minus_1 == 0);
}

TEST_CASE("cross ratio rejects coincident points") {
  P1 zero = P1::of(s_zero());
  P1 one = P1::of(s_from_q(1));
  P1 inf = P1::infinity();
  REQUIRE_THROWS_AS(cross_ratio_valuation(zero, zero, one, inf), InputError);
}

TEST_CASE("valuation laws on random series") {
  Rng g(20240811);
  for (int iter = 0; iter < 200; ++iter) {
    Series a = testing::rnd_series(g, testing::rnd_int(g, 1, 4), 6, 3);
    Series b = testing::rnd_series(g, testing::rnd_int(g, 1, 4), 6, 3);
    Val va = valuation(a), vb = valuation(b);
    Val vab = valuation(s_mul(a, b));
    if (va.is_finite() && vb.is_finite()) {
      REQUIRE(vab == Val::finite(va.v + vb.v));
    }
    Val vsum = valuation(s_add(a, b));
    if (va.is_finite() && vb.is_finite()) {
      Rat m = std::min(va.v, vb.v);
      if (vsum.is_finite()) REQUIRE(vsum.v >= m);
      if (va.v != vb.v) REQUIRE(vsum == Val::finite(m));
    }
  }
}

TEST_CASE("inversion is a two-sided inverse for random units") {
  Rng g(777);
  for (int iter = 0; iter < 1000; ++iter) {
    Series u = testing::rnd_unit(g, testing::rnd_int(g, 1, 4));
    Series i = s_invert(u, kDefaultTrunc);
    Series lhs = s_sub(s_mul(u, i), s_from_q(1));
    Series rhs = s_sub(s_mul(i, u), s_from_q(1));
    REQUIRE(lhs.terms.empty());
    REQUIRE(rhs.terms.empty());
    REQUIRE(val_geq(lhs, kDefaultTrunc) == Cmp3::kYes);
  }
}

TEST_CASE("cross ratio symmetries on random quadruples") {
  Rng g(424242);
  int done = 0;
  while (done < 200) {
    auto q = testing::rnd_quadruple(g);
    CrossRatioVal a, b, c;
    try {
      a = cross_ratio_valuation(q[0], q[1], q[2], q[3]);
      b = cross_ratio_valuation(q[2], q[3], q[0], q[1]);
      c = cross_ratio_valuation(q[0], q[1], q[3], q[2]);
    } catch (const PrecisionError&) {
      continue;
    }
    REQUIRE(a.v_c == b.v_c);
    REQUIRE(a.v_c == -c.v_c);
    ++done;
  }
}

TEST_CASE("degree three field arithmetic") {
  long d = 3;
  NF s = nf_zero(d);
  s[1] = 1;  // the element 2^{1/3}
  NF s3 = nf_mul(nf_mul(s, s), s);
  REQUIRE(nf_eq(s3, nf_from_q(2, d)));

  NF a = nf_add(nf_one(d), s);  // 1 + s
  NF ainv = nf_inv(a);
  REQUIRE(nf_eq(nf_mul(a, ainv), nf_one(d)));

  NF p = nf_pow2(Rat(5, 3), d);  // 2^{5/3} = 2 s^2
  NF expect = nf_zero(d);
  expect[2] = 2;
  REQUIRE(nf_eq(p, expect));
  REQUIRE_THROWS_AS(nf_pow2(Rat(1, 2), d), MathError);
}

TEST_CASE("random field inverses across degrees") {
  Rng g(99);
  for (int iter = 0; iter < 200; ++iter) {
    long d = testing::rnd_int(g, 1, 5);
    NF a = nf_zero(d);
    bool nz = false;
    for (long i = 0; i < d; ++i) {
      a[i] = testing::rnd_rat(g, 6, 3);
      if (a[i] != 0) nz = true;
    }
    if (!nz) continue;
    REQUIRE(nf_eq(nf_mul(a, nf_inv(a)), nf_one(d)));
  }
}

TEST_CASE("series json round trip") {
  Rng g(31337);
  for (int iter = 0; iter < 50; ++iter) {
    Series a = testing::rnd_series(g, testing::rnd_int(g, 0, 4), 5, 3,
                                   testing::rnd_int(g, 0, 1) == 0);
    Series back = series_from_json(series_to_json(a));
    REQUIRE(s_sub(a, back).terms.empty());
    REQUIRE(a.trunc == back.trunc);
  }
  // Field coefficients survive too.
  Series c = s_monomial(nf_pow2(Rat(1, 2), 2), Rat(-3, 2));
  Series cb = series_from_json(series_to_json(c));
  REQUIRE(s_exact_eq(c, cb));
}

TEST_CASE("mixed field series arithmetic promotes") {
  Series a = tp(1);                                    // over Q
  Series b = s_monomial(nf_pow2(Rat(1, 2), 2), Rat(1));  // over Q(2^{1/2})
  Series sum = s_add(a, b);
  REQUIRE(sum.fld.d == 2);
  NF want = nf_add(nf_one(2), nf_pow2(Rat(1, 2), 2));
  REQUIRE(s_exact_eq(sum, s_monomial(want, Rat(1))));
}
