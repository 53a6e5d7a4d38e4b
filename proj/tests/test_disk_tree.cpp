#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "support/rng.hpp"
#include "support/trees.hpp"
#include "troplift/disk_tree.hpp"

using namespace troplift;
using troplift::testing::Rng;

static Series tp(long num, long den = 1) {
  Rat e(num, den);
  e.canonicalize();
  return t_pow(e);
}

static Disk mkdisk(Series c, long r) { return Disk{std::move(c), Rat(r)}; }

static BTPoint pt(Series s) { return BTPoint::point(P1::of(std::move(s))); }

TEST_CASE("disk distances") {
  REQUIRE(bt_distance(mkdisk(s_zero(), 0), mkdisk(s_zero(), 4)) == 4);
  REQUIRE(bt_distance(mkdisk(tp(2), 1), mkdisk(tp(2), 1)) == 0);
  REQUIRE(bt_distance(mkdisk(s_zero(), 0), mkdisk(tp(1), 1)) == 1);
  // Centers split below both radii: path climbs to the meet and back down.
  REQUIRE(bt_distance(mkdisk(tp(1), 2), mkdisk(s_scale(nf_from_q(2, 1), tp(1)), 2)) == 2);
}

TEST_CASE("distance four point condition") {
  Rng g(6021);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<Disk> d;
    for (int i = 0; i < 4; ++i)
      d.push_back(Disk{testing::rnd_series(g, testing::rnd_int(g, 1, 3), 4, 2),
                       testing::rnd_rat(g, 5, 2)});
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        Rat dij = bt_distance(d[i], d[j]);
        REQUIRE(dij >= 0);
        REQUIRE(dij == bt_distance(d[j], d[i]));
        REQUIRE((dij == 0) == disk_eq(d[i], d[j]));
      }
    Rat s1 = bt_distance(d[0], d[1]) + bt_distance(d[2], d[3]);
    Rat s2 = bt_distance(d[0], d[2]) + bt_distance(d[1], d[3]);
    Rat s3 = bt_distance(d[0], d[3]) + bt_distance(d[1], d[2]);
    Rat mx = std::max({s1, s2, s3});
    int hits = (s1 == mx) + (s2 == mx) + (s3 == mx);
    REQUIRE(hits >= 2);
  }
}

TEST_CASE("span of four reference points") {
  std::vector<BTPoint> z{pt(s_zero()), pt(tp(1)), pt(s_from_q(1)), pt(tp(-1))};
  SpanResult s = span_tree(z);
  // Topmost bend has degree 2 and melts away; what remains is a single finite
  // edge of length 1 joining two branch vertices, each carrying two rays.
  MetricTree sm = smoothed(s.tree);
  REQUIRE(sm.vertices.size() == 6);
  int finite_edges = 0;
  for (const auto& e : sm.edges)
    if (!e.len.inf) {
      ++finite_edges;
      REQUIRE(e.len.q == 1);
    }
  REQUIRE(finite_edges == 1);
  std::vector<int> ids;
  for (int a : s.at) ids.push_back(a);
  auto m = dist_matrix(sm, ids);
  // Unit-truncated leaf distances of the expected shape.
  Rat e2(2), e3(3);
  std::vector<std::vector<Rat>> want = {{Rat(0), e2, e3, e3},
                                        {e2, Rat(0), e3, e3},
                                        {e3, e3, Rat(0), e2},
                                        {e3, e3, e2, Rat(0)}};
  REQUIRE(m == want);
  // Branch vertices sit at radii 0 and 1 on the center line.
  bool saw0 = false, saw1 = false;
  for (size_t i = 0; i < s.pos.size(); ++i) {
    if (s.pos[i].is_p1) continue;
    if (disk_eq(s.pos[i].d, Disk{s_zero(), Rat(0)})) saw0 = true;
    if (disk_eq(s.pos[i].d, Disk{s_zero(), Rat(1)})) saw1 = true;
  }
  REQUIRE(saw0);
  REQUIRE(saw1);
}

TEST_CASE("span star and line") {
  SpanResult s = span_tree({pt(s_zero()), pt(s_from_q(1)), BTPoint::point(P1::infinity())});
  REQUIRE(s.tree.vertices.size() == 4);
  for (const auto& e : s.tree.edges) REQUIRE(e.len.inf);
  REQUIRE(disk_eq(s.pos[s.root].d, Disk{s_zero(), Rat(0)}));

  SpanResult s4 = span_tree({pt(s_from_q(1)), pt(s_from_q(2)), pt(s_from_q(3)), pt(s_from_q(4))});
  REQUIRE(s4.tree.vertices.size() == 5);
  for (const auto& e : s4.tree.edges) REQUIRE(e.len.inf);
  REQUIRE(disk_eq(s4.pos[s4.root].d, Disk{s_zero(), Rat(0)}));

  SpanResult s2 = span_tree({pt(s_zero()), BTPoint::point(P1::infinity())});
  REQUIRE(s2.tree.vertices.size() == 2);
  REQUIRE(s2.tree.edges.size() == 1);
  REQUIRE(s2.tree.edges[0].len.inf);
}

TEST_CASE("attach reference points") {
  std::vector<BTPoint> z{pt(s_zero()), pt(tp(1)), pt(s_from_q(1)), pt(tp(-1))};
  SpanResult s = span_tree(z);

  AttachResult a = attach_point(s, z, P1::of(s_from_q(2)));
  REQUIRE(disk_eq(a.b, Disk{s_zero(), Rat(0)}));
  REQUIRE(a.vertex >= 0);

  AttachResult b = attach_point(s, z, P1::of(s_add(tp(1), tp(5))));
  REQUIRE(disk_eq(b.b, Disk{tp(1), Rat(5)}));
  REQUIRE(b.vertex == -1);
  REQUIRE(b.edge >= 0);
  REQUIRE(b.offset == XRat(Rat(4)));
  // The host edge is the unbounded ray ending at the point t.
  int far = s.tree.edges[b.edge].b;
  REQUIRE(far == s.at[1]);

  std::vector<BTPoint> line{pt(s_zero()), BTPoint::point(P1::infinity())};
  AttachResult c = attach_point(line, P1::of(tp(3)));
  REQUIRE(disk_eq(c.b, Disk{s_zero(), Rat(3)}));
  REQUIRE(c.offset.inf);

  std::vector<BTPoint> tri{pt(s_zero()), pt(tp(1)), pt(s_from_q(1))};
  AttachResult d = attach_point(tri, P1::infinity());
  REQUIRE(disk_eq(d.b, Disk{s_zero(), Rat(0)}));
}

TEST_CASE("attach equals the branch point of the enlarged span") {
  Rng g(515151);
  int done = 0;
  while (done < 300) {
    auto q = testing::rnd_quadruple(g, false);
    std::vector<BTPoint> z;
    for (int i = 0; i < 3; ++i) z.push_back(BTPoint::point(q[i]));
    P1 u = q[3];
    AttachResult a = attach_point(z, u);
    std::vector<BTPoint> z2 = z;
    z2.push_back(BTPoint::point(u));
    SpanResult s1 = span_tree(z);
    SpanResult s2 = span_tree(z2);
    int uv = s2.at.back();
    auto adj = s2.tree.adjacency();
    REQUIRE(adj[uv].size() == 1);
    int nb = adj[uv][0].second;
    REQUIRE_FALSE(s2.pos[nb].is_p1);
    // When u climbs over the top, the glue point is the old span's apex.
    const Disk& top = s1.pos[s1.root].d;
    const Disk& expect = s2.pos[nb].d.r < top.r ? top : s2.pos[nb].d;
    REQUIRE(disk_eq(expect, a.b));
    ++done;
  }
}

TEST_CASE("medians of reference triples") {
  REQUIRE(disk_eq(bt_median(P1::of(s_zero()), P1::of(tp(1)), P1::of(s_from_q(1))),
                  Disk{s_zero(), Rat(1)}));
  REQUIRE(disk_eq(bt_median(P1::of(s_zero()), P1::of(s_from_q(1)), P1::of(tp(-1))),
                  Disk{s_zero(), Rat(0)}));
  REQUIRE(disk_eq(bt_median(P1::of(s_zero()), P1::of(s_from_q(1)), P1::infinity()),
                  Disk{s_zero(), Rat(0)}));
  REQUIRE(disk_eq(bt_median(P1::of(s_zero()), P1::of(tp(2)), P1::of(tp(1))),
                  Disk{s_zero(), Rat(2)}));
}

TEST_CASE("signed overlap reference values") {
  P1 zero = P1::of(s_zero());
  P1 one = P1::of(s_from_q(1));
  P1 inf = P1::infinity();
  P1 tm3 = P1::of(tp(-3));

  CrossRatioVal a = tree_cross_ratio(zero, one, inf, tm3);
  REQUIRE(a.v_c == 0);
  REQUIRE(a.v_c_minus_1 == 3);

  CrossRatioVal b = tree_cross_ratio(zero, inf, one, tm3);
  REQUIRE(b.v_c == 3);

  CrossRatioVal c = tree_cross_ratio(zero, one, inf, P1::of(s_from_q(2)));
  REQUIRE(c.v_c == 0);
  REQUIRE(c.v_c_minus_1 == 0);
}

TEST_CASE("tree oracle agrees with series cross ratio") {
  Rng g(90210);
  int done = 0, zero_cases = 0, nonzero_cases = 0, skipped = 0;
  while (done < 1000) {
    auto q = testing::rnd_quadruple(g);
    CrossRatioVal ser, tre;
    try {
      ser = cross_ratio_valuation(q[0], q[1], q[2], q[3]);
      tre = tree_cross_ratio(q[0], q[1], q[2], q[3]);
    } catch (const PrecisionError&) {
      ++skipped;
      REQUIRE(skipped < 200);
      continue;
    }
    REQUIRE(ser.v_c == tre.v_c);
    REQUIRE(ser.v_c_minus_1 == tre.v_c_minus_1);
    (tre.v_c == 0 ? zero_cases : nonzero_cases)++;
    ++done;
  }
  REQUIRE(zero_cases >= 50);
  REQUIRE(nonzero_cases >= 50);
}

TEST_CASE("realize reference trees") {
  // A single doubly unbounded edge realizes as {0, infinity}.
  MetricTree line;
  line.vertices = {{0, true}, {1, true}};
  line.edges = {{0, 1, XRat::infinity()}};
  RealizeResult r = realize_tree(line);
  REQUIRE(r.leaves[0].is_p1);
  REQUIRE_FALSE(r.leaves[0].p.inf);
  REQUIRE(r.leaves[0].p.z.exact_zero());
  REQUIRE(r.leaves[1].p.inf);

  // Star with three rays: all leaves land in P^1, span comes back isometric.
  MetricTree star;
  star.vertices = {{0, false}, {1, true}, {2, true}, {3, true}};
  star.edges = {{0, 1, XRat::infinity()}, {0, 2, XRat::infinity()}, {0, 3, XRat::infinity()}};
  RealizeResult rs = realize_tree(star);
  std::vector<BTPoint> zs;
  for (const auto& p : rs.leaves) {
    REQUIRE(p.is_p1);
    zs.push_back(p);
  }
  SpanResult ss = span_tree(zs);
  std::vector<int> at_ids(ss.at.begin(), ss.at.end());
  std::set<int> keep(at_ids.begin(), at_ids.end());
  REQUIRE(dist_matrix(smoothed(ss.tree, keep), at_ids) ==
          dist_matrix(smoothed(star), testing::leaf_ids(star)));
}

TEST_CASE("realize matches the reference pairwise valuation pattern") {
  // Two trivalent vertices joined by a unit edge, two rays at each.
  MetricTree t;
  t.vertices = {{0, true}, {1, true}, {2, true}, {3, true}, {4, false}, {5, false}};
  t.edges = {{4, 0, XRat::infinity()},
             {4, 1, XRat::infinity()},
             {5, 2, XRat::infinity()},
             {5, 3, XRat::infinity()},
             {4, 5, XRat(Rat(1))}};
  RealizeResult r = realize_tree(t);
  REQUIRE(r.leaves.size() == 4);
  std::vector<Rat> got;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      Val v = valuation(s_sub(r.leaves[i].p.z, r.leaves[j].p.z));
      REQUIRE(v.is_finite());
      got.push_back(v.v);
    }
  std::sort(got.begin(), got.end());
  // Pattern of {0, t, 1, t^-1}.
  std::vector<Rat> want = {Rat(-1), Rat(-1), Rat(-1), Rat(0), Rat(0), Rat(1)};
  REQUIRE(got == want);
  // The designated first ray carries the climb above the rest.
  REQUIRE(s_exact_eq(r.leaves[0].p.z, tp(-1)));
}

TEST_CASE("realize a marked chain with rays") {
  // Unit chain of length 4 with one ray per interior stop; endpoints marked.
  MetricTree t;
  for (int i = 0; i <= 4; ++i) t.vertices.push_back({i, i == 4});
  for (int i = 0; i < 4; ++i) t.vertices.push_back({5 + i, true});
  for (int i = 0; i < 4; ++i) t.edges.push_back({i, i + 1, XRat(Rat(1))});
  for (int i = 0; i < 4; ++i) t.edges.push_back({i, 5 + i, XRat::infinity()});
  t.marked = {0, 4};
  RealizeResult r = realize_tree(t);
  REQUIRE_FALSE(r.marked[0].is_p1);
  REQUIRE(disk_eq(r.marked[0].d, Disk{s_zero(), Rat(0)}));
  REQUIRE(disk_eq(r.marked[1].d, Disk{s_zero(), Rat(4)}));
  // Leaf order: the chain end (vertex 4) first, then the four rays.
  REQUIRE_FALSE(r.leaves[0].is_p1);
  for (int i = 0; i < 4; ++i) {
    const BTPoint& p = r.leaves[i + 1];
    REQUIRE(p.is_p1);
    REQUIRE(s_exact_eq(p.p.z, tp(i)));
  }
}

TEST_CASE("realize round trip on random trees") {
  Rng g(777222);
  for (int iter = 0; iter < 200; ++iter) {
    MetricTree t = testing::rnd_tree(g, 12);
    RealizeResult r = realize_tree(t);
    std::vector<BTPoint> z = r.leaves;
    auto lids = testing::leaf_ids(t);
    REQUIRE(z.size() == lids.size());
    for (size_t i = 0; i < z.size(); ++i) {
      int li = t.leaf_indices()[i];
      bool unb = false;
      auto adj = t.adjacency();
      for (auto [e, w] : adj[li]) unb = unb || t.edges[e].len.inf;
      REQUIRE(z[i].is_p1 == unb);
    }
    SpanResult s = span_tree(z);
    std::vector<int> at_ids(s.at.begin(), s.at.end());
    std::set<int> keep(at_ids.begin(), at_ids.end());
    auto got = dist_matrix(smoothed(s.tree, keep), at_ids);
    auto want = dist_matrix(smoothed(t), lids);
    REQUIRE(got == want);
  }
}
