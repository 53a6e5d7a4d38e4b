#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <string>
#include <vector>

#include "support/generators.hpp"
#include "support/rng.hpp"
#include "troplift/genus1.hpp"

using namespace troplift;
using namespace troplift::testing;

namespace {

Series mono(const Rat& c, const Rat& e) { return s_monomial(nf_from_q(c, 1), e); }

Series lin(long a, long b) {  // a + b t
  return s_add(s_from_q(Rat(a)), mono(Rat(b), Rat(1)));
}

std::string solve_kind(const TateSkeleton& t, const ZTCurve& c) {
  try {
    solve_units_superabundant(t, c);
  } catch (const MathError& e) {
    return e.kind;
  }
  return "";
}

// residual of w_i - 1 is at or beyond the default truncation
bool residual_clears(const TateSkeleton& t, long i) {
  Val v = valuation(s_sub(tate_w(t, i), s_from_q(1, tate_degree(t))));
  return v.kind != Val::kFinite || !(v.v < kDefaultTrunc);
}

}  // namespace

TEST_CASE("theta obeys the q-shift functional equation") {
  Rng g(20250301);
  Rat trunc(6);
  int checked = 0;
  for (int iter = 0; iter < 200; ++iter) {
    Rat ell = Rat(rnd_int(g, 1, 6)) / 2;
    Series q = t_pow(ell);
    Series z = mono(Rat(rnd_int(g, 1, 6)), Rat(rnd_int(g, -6, 6)) / 2);
    if (rnd_int(g, 0, 2) == 0)
      z = s_add(z, mono(Rat(rnd_int(g, 1, 3)), Rat(rnd_int(g, 1, 4)) / 2 +
                                                    require_valuation(z, "z")));
    Series u = mono(Rat(rnd_int(g, 1, 6)), Rat(rnd_int(g, -6, 6)) / 2);
    CAPTURE(iter, s_to_string(z), s_to_string(u), format_rat(ell));
    try {
      Series lhs = theta(z, s_mul(q, u), q, trunc);
      Series rhs = s_mul(s_neg(s_div(z, u, trunc)), theta(z, u, q, trunc));
      REQUIRE(s_agree(lhs, rhs));
      REQUIRE(theta_valuation(z, u, q, trunc) == valuation(theta(z, u, q, trunc)).v);
      ++checked;
    } catch (const MathError& e) {
      REQUIRE(e.kind == "EvaluationAtZeroOrPole");  // u met the orbit of z
    }
  }
  REQUIRE(checked > 150);
}

TEST_CASE("theta rejects evaluation on the divisor") {
  Series q = t_pow(Rat(2));
  Series z = mono(Rat(3), Rat(1));
  std::string kind;
  try {
    theta(z, s_mul(z, q), q);
  } catch (const MathError& e) {
    kind = e.kind;
  }
  REQUIRE(kind == "EvaluationAtZeroOrPole");
}

TEST_CASE("square loop skeleton") {
  ZTCurve c = load_curve("square.json");
  TateSkeleton t = build_tate_skeleton(c);

  REQUIRE(tate_ell(t) == Rat(4));
  REQUIRE(s_exact_eq(t.q, t_pow(Rat(4))));
  REQUIRE(t.tau == std::vector<Rat>{Rat(1), Rat(1)});
  REQUIRE(t.shifted == std::vector<int>{0, -1});  // only the x row gets a q twist

  // all four punctures sit one per circuit vertex, one cluster each
  REQUIRE(t.punctures.size() == 4);
  for (int k = 0; k < 4; ++k) REQUIRE(t.punctures[k].cluster == k);

  auto zs = [&](const std::vector<TateEntry>& row) {
    std::vector<Series> out;
    for (const auto& e : row) out.push_back(e.z);
    return out;
  };
  auto row_eq = [&](const std::vector<TateEntry>& row, std::vector<Series> want) {
    auto got = zs(row);
    REQUIRE(got.size() == want.size());
    for (size_t k = 0; k < got.size(); ++k)
      if (!s_exact_eq(got[k], want[k])) return false;
    return true;
  };
  REQUIRE(row_eq(t.zplus[0], {t_pow(Rat(4)), t_pow(Rat(1))}));
  REQUIRE(row_eq(t.zminus[0], {t_pow(Rat(2)), t_pow(Rat(3))}));
  REQUIRE(row_eq(t.zplus[1], {s_from_q(Rat(1)), t_pow(Rat(3))}));
  REQUIRE(row_eq(t.zminus[1], {t_pow(Rat(1)), t_pow(Rat(2))}));

  // both multipliers are exactly 1, so the solver has nothing to do
  for (long i = 0; i < t.n; ++i) REQUIRE(s_exact_eq(tate_w(t, i), s_from_q(Rat(1))));
  SolveReport rep = solve_units_ordinary(t);
  REQUIRE(rep.field_degree == 1);
  REQUIRE(rep.progress.empty());
  REQUIRE(rep.retries == 0);
}

TEST_CASE("square loop tropicalization and samples") {
  ZTCurve c = load_curve("square.json");
  TateSkeleton t = build_tate_skeleton(c);
  OrbitTrop tr = trop_orbit(t);

  REQUIRE(tr.spine.size() == 4);
  std::vector<ZVec> want = {{Int(0), Int(-1)},
                            {Int(-1), Int(0)},
                            {Int(0), Int(1)},
                            {Int(1), Int(0)}};
  for (size_t k = 0; k < 4; ++k) REQUIRE(tr.slope[tr.spine[k]] == want[k]);

  REQUIRE(embedded_equal(tr.image, curve_image(c)));

  std::vector<Series> probes = standard_tate_probes(tr);
  REQUIRE(probes.size() == 8);
  REQUIRE(s_exact_eq(probes[0], s_from_q(Rat(2))));
  REQUIRE(s_exact_eq(probes.back(), lin(1, 1)));
  REQUIRE(sample_pairs(t, tr, probes) == 0);

  // the radius-0 probe lands on the cut vertex, at tau on the nose
  REQUIRE(orbit_position(tr, probes[0]) == t.tau);
}

TEST_CASE("well spaced superabundant curve lifts") {
  ZTCurve c = load_curve("ws2.json");
  REQUIRE(!is_ordinary(c));
  REQUIRE(is_well_spaced(c).ok);
  TateSkeleton t = build_tate_skeleton(c);

  REQUIRE(t.punctures.size() == 4);
  REQUIRE(t.punctures[0].leaf_id == 12);
  REQUIRE(s_exact_eq(t.punctures[0].z, s_from_q(Rat(1))));
  REQUIRE(t.punctures[0].sigma == ZVec{Int(1), Int(1)});
  REQUIRE(t.punctures[0].cluster == 0);
  REQUIRE(t.punctures[1].leaf_id == 13);
  REQUIRE(s_exact_eq(t.punctures[1].z, s_from_q(Rat(2))));
  REQUIRE(t.punctures[2].leaf_id == 10);
  REQUIRE(s_exact_eq(t.punctures[2].z, t_pow(Rat(1))));
  REQUIRE(t.punctures[2].cluster == 1);
  REQUIRE(t.punctures[3].leaf_id == 11);
  REQUIRE(s_exact_eq(t.punctures[3].z, mono(Rat(2), Rat(1))));

  // the circuit clusters alone cannot move the second coordinate
  std::string kind;
  try {
    solve_units_ordinary(t);
  } catch (const MathError& e) {
    kind = e.kind;
  }
  REQUIRE(kind == "RankDeficient");

  SolveReport rep = solve_units_superabundant(t, c);
  REQUIRE(rep.field_degree == 1);
  REQUIRE(rep.retries == 0);
  REQUIRE(rep.progress == std::vector<Rat>{Rat(0)});

  // one residue step fixes both coordinates exactly
  for (long i = 0; i < rep.data.n; ++i)
    REQUIRE(s_exact_eq(tate_w(rep.data, i), s_from_q(Rat(1))));
  REQUIRE(s_exact_eq(rep.data.punctures[0].z, s_from_q(Rat(2))));
  REQUIRE(s_exact_eq(rep.data.punctures[1].z, s_from_q(Rat(1))));
  REQUIRE(s_exact_eq(rep.data.punctures[2].z, t_pow(Rat(1))));
  REQUIRE(s_exact_eq(rep.data.punctures[3].z, mono(Rat(2), Rat(1))));

  OrbitTrop tr = trop_orbit(rep.data);
  REQUIRE(embedded_equal(tr.image, curve_image(c)));
  REQUIRE(sample_pairs(rep.data, tr, standard_tate_probes(tr)) == 0);
}

TEST_CASE("obstructed curve is reported, not lifted") {
  ZTCurve c = load_curve("nws2.json");
  REQUIRE(!is_ordinary(c));
  REQUIRE(!is_well_spaced(c).ok);
  TateSkeleton t = build_tate_skeleton(c);

  std::string kind, msg;
  try {
    solve_units_superabundant(t, c);
  } catch (const MathError& e) {
    kind = e.kind;
    msg = e.what();
  }
  REQUIRE(kind == "NotWellSpaced");
  REQUIRE(msg.find("x-axis flat") != std::string::npos);

  NecessityReport nec = necessity_check(t, c);
  REQUIRE(nec.loop_length == Rat(4));
  REQUIRE(nec.j_valuation == Rat(-4));
  REQUIRE(!nec.trivalent);
  REQUIRE(!nec.embedding_tame);
  REQUIRE(nec.obstructions.size() == 1);
  const FlatObstruction& ob = nec.obstructions[0];
  REQUIRE(ob.name == "x-axis flat");
  REQUIRE(ob.vertex_id == 1);
  REQUIRE(ob.level == Rat(0));
  REQUIRE(ob.ratio_level);
  REQUIRE(*ob.ratio_level == Rat(0));
  REQUIRE(ob.confirmed);
}

TEST_CASE("skew ray forces a quadratic constant field") {
  ZTCurve c = load_curve("square.json");
  int maxid = 0;
  for (const auto& v : c.vertices) maxid = std::max(maxid, v.id);
  int host = -1;
  for (auto& e : c.edges) {
    if (e.len.is_finite()) continue;
    if (e.dir == ZVec{Int(1), Int(1)}) {
      e.dir = {Int(2), Int(1)};
      host = c.vertices[c.index(e.from)].boundary ? e.to : e.from;
      break;
    }
  }
  REQUIRE(host >= 0);
  ZTCurve::Vertex nb;
  nb.id = maxid + 1;
  nb.boundary = true;
  c.vertices.push_back(nb);
  ZTCurve::Edge ne;
  ne.from = host;
  ne.to = nb.id;
  ne.dir = {Int(-1), Int(0)};
  ne.mult = 1;
  ne.len = XRat::infinity();
  c.edges.push_back(ne);
  REQUIRE(validate(c).ok);
  REQUIRE(is_ordinary(c));

  TateSkeleton t = build_tate_skeleton(c);
  SolveReport rep = solve_units_ordinary(t);
  REQUIRE(rep.field_degree == 2);
  REQUIRE(rep.notices.size() == 1);
  REQUIRE(rep.notices[0].find("Q(2^(1/2))") != std::string::npos);
  for (long i = 0; i < rep.data.n; ++i)
    REQUIRE(s_exact_eq(tate_w(rep.data, i), s_from_q(Rat(1), 2)));

  OrbitTrop tr = trop_orbit(rep.data);
  REQUIRE(embedded_equal(tr.image, curve_image(c)));
  REQUIRE(sample_pairs(rep.data, tr, standard_tate_probes(tr)) == 0);
}

TEST_CASE("contracted circuit edge only stretches the loop") {
  ZTCurve c;
  c.n = 1;
  c.vertices = {{0, false, std::vector<Rat>{Rat(0)}}, {1, false, {}}, {2, false, {}},
                {10, true, {}}, {11, true, {}}, {12, true, {}}};
  auto edge = [](int a, int b, long d, long m, XRat len) {
    ZTCurve::Edge e;
    e.from = a;
    e.to = b;
    e.dir = {Int(d)};
    e.mult = m;
    e.len = len;
    return e;
  };
  c.edges = {edge(0, 1, 1, 1, XRat(Rat(1))), edge(1, 2, 0, 1, XRat(Rat(1))),
             edge(2, 0, -1, 1, XRat(Rat(1))), edge(0, 10, -1, 2, XRat::infinity()),
             edge(1, 11, 1, 1, XRat::infinity()), edge(2, 12, 1, 1, XRat::infinity())};
  REQUIRE(validate(c).ok);
  REQUIRE(genus(c) == 1);
  REQUIRE(is_ordinary(c));

  TateSkeleton t = build_tate_skeleton(c);
  REQUIRE(tate_ell(t) == Rat(3));  // the contracted edge still has length
  SolveReport rep = solve_units_ordinary(t);
  for (long i = 0; i < rep.data.n; ++i) REQUIRE(residual_clears(rep.data, i));
  OrbitTrop tr = trop_orbit(rep.data);
  REQUIRE(embedded_equal(tr.image, curve_image(c)));
  REQUIRE(sample_pairs(rep.data, tr, standard_tate_probes(tr)) == 0);
}

TEST_CASE("bare multiset data closes exactly when valuations balance") {
  Rng g(20250302);
  for (int iter = 0; iter < 100; ++iter) {
    long n = rnd_int(g, 1, 3);
    Rat ell = Rat(rnd_int(g, 2, 8)) / 2;
    TateSkeleton t;
    t.n = n;
    t.q = t_pow(ell);
    t.shifted.assign(n, -1);
    t.tau.assign(n, Rat(0));
    t.zplus.resize(n);
    t.zminus.resize(n);
    for (long i = 0; i < n; ++i) {
      int k = rnd_int(g, 1, 3);
      long two_ell = Rat(2 * ell).get_num().get_si();
      std::vector<Rat> exps;
      for (int a = 0; a < k; ++a)
        exps.push_back(Rat(rnd_int(g, 0, two_ell - 1)) / 2);
      for (int a = 0; a < k; ++a)
        t.zplus[i].push_back({mono(Rat(rnd_int(g, 1, 8)), exps[a])});
      std::shuffle(exps.begin(), exps.end(), g);
      for (int a = 0; a < k; ++a)
        t.zminus[i].push_back({mono(Rat(rnd_int(g, 1, 8)), exps[a])});
    }
    CAPTURE(iter, n, format_rat(ell));
    REQUIRE_NOTHROW(validate_tate(t));
    REQUIRE_NOTHROW(trop_orbit(t));

    // tilting one zero by half a step breaks both the check and the walk
    TateSkeleton bad = t;
    bad.zplus[0][0].z = s_shift(bad.zplus[0][0].z, Rat(1) / 2);
    REQUIRE_THROWS_AS(validate_tate(bad), InputError);
    std::string kind;
    try {
      trop_orbit(bad);
    } catch (const MathError& e) {
      kind = e.kind;
    }
    REQUIRE(kind == "CycleDoesNotClose");
  }
}

TEST_CASE("malformed skeletons are refused") {
  TateSkeleton t;
  t.n = 1;
  t.q = s_add(s_from_q(Rat(1)), t_pow(Rat(1)));  // not a monomial
  t.zplus = {{}};
  t.zminus = {{}};
  t.shifted = {-1};
  t.tau = {Rat(0)};
  REQUIRE_THROWS_AS(validate_tate(t), InputError);

  t.q = t_pow(Rat(2));
  t.zplus = {{TateEntry{t_pow(Rat(1)), -1, -1}}};
  REQUIRE_THROWS_AS(validate_tate(t), InputError);  // sizes differ

  REQUIRE_THROWS_AS(build_tate_skeleton(load_curve("example1.json")), InputError);
}

TEST_CASE("random ordinary loops lift end to end") {
  Rng g(20260823);
  for (int iter = 0; iter < 12; ++iter) {
    long n = 2 + (iter % 2);
    ZTCurve c = rnd_genus1_ordinary(g, n);
    CAPTURE(iter, n, c.vertices.size(), c.edges.size());
    REQUIRE(validate(c).ok);
    REQUIRE(genus(c) == 1);

    TateSkeleton t = build_tate_skeleton(c);
    SolveReport rep = solve_units_ordinary(t);
    for (size_t k = 1; k < rep.progress.size(); ++k)
      REQUIRE(rep.progress[k - 1] < rep.progress[k]);
    for (long i = 0; i < rep.data.n; ++i) REQUIRE(residual_clears(rep.data, i));
    REQUIRE(detail::span_signature(t) == detail::span_signature(rep.data));

    OrbitTrop tr = trop_orbit(rep.data);
    REQUIRE(embedded_equal(tr.image, curve_image(c)));
    std::vector<Series> probes = standard_tate_probes(tr);
    if (probes.size() > 6) probes.resize(6);
    REQUIRE(sample_pairs(rep.data, tr, probes) == 0);
  }
}
