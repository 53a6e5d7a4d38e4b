#pragma once

// Genus-1 lifting. The circuit is cut at its first edge and unrolled over the
// fundamental segment [0, ell); hanging forests are realized as disk-tree
// stalks and every boundary ray becomes a point of K^*. The resulting
// zero/pole multisets define coordinatewise quotients of theta factors whose
// multipliers w_i are then driven to 1 level by level with unit corrections
// attached to clusters of the multisets.

#include <algorithm>
#include <cassert>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "troplift/curve.hpp"
#include "troplift/disk_tree.hpp"
#include "troplift/embed.hpp"
#include "troplift/errors.hpp"
#include "troplift/genus0.hpp"
#include "troplift/linalg.hpp"
#include "troplift/series.hpp"
#include "troplift/theta.hpp"

namespace troplift {

// One puncture of the quotient: the K^* point realizing a boundary ray, the
// ray's outward weighted slope, and the spine position of the circuit vertex
// whose hanging forest carries it.
struct TatePuncture {
  int leaf_id = -1;
  Series z;
  ZVec sigma;
  int cluster = -1;
};

// Multiset entry; the value equals its puncture's value except for the one
// designated entry per coordinate that carries an extra factor of q^{s}.
struct TateEntry {
  Series z;
  int puncture = -1;  // -1 when loaded from a certificate
  int cluster = -1;
};

// Zero/pole data of a degree-zero theta quotient on the punctured Tate curve
// with parameter q, plus the image tau of the cut vertex.
struct TateSkeleton {
  long n = 0;
  Series q;
  std::vector<std::vector<TateEntry>> zplus, zminus;
  std::vector<TatePuncture> punctures;  // empty when loaded from a certificate
  std::vector<int> shifted;             // per coordinate: index into zplus[i], -1 if none
  std::vector<Rat> tau;
};

inline Rat tate_ell(const TateSkeleton& t) {
  return require_valuation(t.q, "Tate parameter");
}

inline long tate_degree(const TateSkeleton& t) {
  long d = t.q.fld.d;
  for (const auto& side : {&t.zplus, &t.zminus})
    for (const auto& row : *side)
      for (const auto& e : row) d = std::max(d, e.z.fld.d);
  return d;
}

inline void tate_promote(TateSkeleton& t, long d) {
  t.q = s_promote(t.q, d);
  for (auto* side : {&t.zplus, &t.zminus})
    for (auto& row : *side)
      for (auto& e : row) e.z = s_promote(e.z, d);
  for (auto& p : t.punctures) p.z = s_promote(p.z, d);
}

// w_i = prod zplus[i] / prod zminus[i].  Small products stay exact; once the
// term count grows the partial product is clipped to relative precision
// ambient + 1, which the final quotient cannot exceed anyway.
inline Series tate_w(const TateSkeleton& t, long i, const Rat& ambient = kDefaultTrunc) {
  long d = tate_degree(t);
  auto clip = [&](Series x) {
    if (x.terms.size() <= 64) return x;
    Rat v = require_valuation(x, "multiset product");
    return s_truncate(std::move(x), XRat(v + ambient + 1));
  };
  Series num = s_from_q(1, d), den = s_from_q(1, d);
  for (const auto& e : t.zplus[i]) num = clip(s_mul(num, e.z));
  for (const auto& e : t.zminus[i]) den = clip(s_mul(den, e.z));
  return s_div(num, den, ambient);
}

inline void validate_tate(const TateSkeleton& t) {
  if (static_cast<long>(t.zplus.size()) != t.n ||
      static_cast<long>(t.zminus.size()) != t.n ||
      static_cast<long>(t.shifted.size()) != t.n ||
      static_cast<long>(t.tau.size()) != t.n)
    throw InputError("Tate data arrays disagree with the lattice rank");
  Rat ell = tate_ell(t);
  if (!(ell > 0)) throw InputError("Tate parameter needs positive valuation");
  if (t.q.terms.size() != 1 || !t.q.trunc.inf)
    throw InputError("Tate parameter must be an exact monomial");
  for (long i = 0; i < t.n; ++i) {
    if (t.zplus[i].size() != t.zminus[i].size())
      throw InputError("zero and pole multisets differ in size");
    Rat bal = 0;
    for (const auto& e : t.zplus[i]) bal += require_valuation(e.z, "multiset element");
    for (const auto& e : t.zminus[i]) bal -= require_valuation(e.z, "multiset element");
    // v(w_i) = 0 makes v of the quotient descend to the Tate curve
    if (bal != 0) throw InputError("multiplier valuation is nonzero in coordinate " +
                                   std::to_string(i));
  }
}

namespace detail {

// strict comparison v(a) > r, demanding enough precision to decide
inline bool val_gt(const Series& a, const Rat& r) {
  if (!a.terms.empty()) return a.terms.front().exp > r;
  if (a.trunc.inf) return true;
  if (a.trunc.q > r) return true;
  throw PrecisionError("side of a tree edge undecided at this truncation");
}

// v(a * t^sh - b) > r without forming the difference; terms are walked in
// exponent order and the first surviving one decides
inline bool val_shift_sub_gt(const Series& a, const Rat& sh, const Series& b,
                             const Rat& r) {
  XRat lim = xr_min(a.trunc + sh, b.trunc);
  long d = std::max(a.fld.d, b.fld.d);
  size_t ia = 0, ib = 0;
  while (ia < a.terms.size() || ib < b.terms.size()) {
    bool ha = ia < a.terms.size(), hb = ib < b.terms.size();
    Rat ea = ha ? Rat(a.terms[ia].exp + sh) : Rat(0);
    Rat eb = hb ? b.terms[ib].exp : Rat(0);
    Rat e;
    bool nonzero;
    if (ha && (!hb || ea < eb)) {
      e = ea;
      nonzero = true;
      ++ia;
    } else if (hb && (!ha || eb < ea)) {
      e = eb;
      nonzero = true;
      ++ib;
    } else {
      e = ea;
      nonzero = !nf_eq(nf_promote(a.terms[ia].coeff, d), nf_promote(b.terms[ib].coeff, d));
      ++ia;
      ++ib;
    }
    if (!(XRat(e) < lim)) break;
    if (nonzero) return e > r;
  }
  if (lim > XRat(r)) return true;
  throw PrecisionError("side of a tree edge undecided at this truncation");
}

// a = 2^k s^b with positive rational coefficient: exact base-2 logarithm
inline std::optional<Rat> nf_log2(const NF& a, long d) {
  int nz = -1;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] != 0) {
      if (nz >= 0) return std::nullopt;
      nz = static_cast<int>(i);
    }
  if (nz < 0) return std::nullopt;
  long k = 0;
  if (!log2_exact(a[nz], &k)) return std::nullopt;
  return Rat(k) + Rat(nz) / Rat(d);
}

}  // namespace detail

// Quotient tree of the multiset orbits: span of the q-normalized
// representatives with marks at the lifts 0 and ell of the cut vertex.
struct OrbitSpan {
  Rat ell;
  Series q;
  std::vector<Series> reps;    // distinct representatives, pts[2 + k]
  std::vector<BTPoint> pts;    // span input, cut marks first
  SpanResult span;
  int cut0 = -1, cut1 = -1;    // vertex indices of the marks
};

inline OrbitSpan orbit_span(const TateSkeleton& t) {
  OrbitSpan o;
  o.ell = tate_ell(t);
  o.q = t.q;
  std::map<int, size_t> by_puncture;  // copies of one puncture are one point
  for (const auto* side : {&t.zplus, &t.zminus})
    for (const auto& row : *side)
      for (const auto& e : row) {
        Rat v = require_valuation(e.z, "multiset element");
        long j = static_cast<long>(rat_floor(v / o.ell).get_si());
        Series rep = e.z;
        if (j != 0) {
          Rat amb = kDefaultTrunc + abs(v) + Rat(std::abs(j) + 1) * o.ell;
          rep = s_mul(rep, s_pow(t.q, -j, amb));
        }
        if (e.puncture >= 0) {
          auto it = by_puncture.find(e.puncture);
          if (it != by_puncture.end()) {
            if (!s_agree(o.reps[it->second], rep))
              throw MathError("Internal", "copies of one puncture drifted apart");
            continue;
          }
          by_puncture[e.puncture] = o.reps.size();
          o.reps.push_back(rep);
          continue;
        }
        // bare entries (certificates) carry no puncture ids; literal copies
        // are the same point, anything else stays separate
        bool dup = false;
        for (const auto& r : o.reps)
          if (!s_lex_less(r, rep) && !s_lex_less(rep, r)) {
            dup = true;
            break;
          }
        if (!dup) o.reps.push_back(rep);
      }
  o.pts.push_back(BTPoint::lattice(s_zero(1), Rat(0)));
  o.pts.push_back(BTPoint::lattice(s_zero(1), o.ell));
  for (const auto& r : o.reps) o.pts.push_back(BTPoint::point(P1::of(r)));
  o.span = span_tree(o.pts);
  o.cut0 = o.span.at[0];
  o.cut1 = o.span.at[1];
  if (o.span.root != o.cut0)
    throw MathError("Internal", "cut mark is not the top of the orbit span");
  return o;
}

namespace detail {

// Integer slopes of the quotient tree, oriented along each stored edge
// a -> b. The slope of an edge in coordinate i counts, over all q-translates
// of the multisets, zeros minus poles on the child side; the window is sized
// so that translates beyond it miss the whole span.
inline std::vector<ZVec> orbit_slopes(const OrbitSpan& o, const TateSkeleton& t,
                                      const std::vector<int>& parent_edge) {
  const auto& tr = o.span.tree;
  Rat maxv = 0, maxr = o.ell;
  for (const auto* side : {&t.zplus, &t.zminus})
    for (const auto& row : *side)
      for (const auto& e : row)
        maxv = std::max(maxv, Rat(abs(require_valuation(e.z, "multiset element"))));
  for (const auto& p : o.span.pos)
    if (!p.is_p1) maxr = std::max(maxr, p.d.r);
  long W = static_cast<long>(rat_ceil((maxv + maxr) / o.ell).get_si()) + 1;

  std::vector<ZVec> slope(tr.edges.size(), ZVec(t.n, 0));
  for (size_t e = 0; e < tr.edges.size(); ++e) {
    int a = tr.edges[e].a, b = tr.edges[e].b;
    int ch = parent_edge[b] == static_cast<int>(e) ? b : a;
    int pa = ch == b ? a : b;
    if (o.span.pos[pa].is_p1)
      throw MathError("Internal", "orbit span edge hangs from a leaf");
    Rat ra = o.span.pos[pa].d.r;
    Series cb;
    if (o.span.pos[ch].is_p1) {
      if (o.span.pos[ch].p.inf)
        throw MathError("Internal", "orbit span contains the point at infinity");
      cb = o.span.pos[ch].p.z;
    } else {
      cb = o.span.pos[ch].d.c;
    }
    for (long i = 0; i < t.n; ++i) {
      long s = 0;
      for (long j = -W; j <= W; ++j) {
        // multiplying an entry by q^j only shifts exponents; q is a monomial
        Rat sh = Rat(j) * o.ell;
        long cnt = 0;
        for (const auto& te : t.zplus[i])
          if (val_shift_sub_gt(te.z, sh, cb, ra)) ++cnt;
        for (const auto& te : t.zminus[i])
          if (val_shift_sub_gt(te.z, sh, cb, ra)) --cnt;
        if (std::abs(j) == W && cnt != 0)
          throw MathError("Internal", "orbit slope window too small");
        s += cnt;
      }
      slope[e][i] = ch == b ? s : -s;
    }
  }
  return slope;
}

}  // namespace detail

// Quotient tree with slopes, positions, and its weighted embedded image.
struct OrbitTrop {
  OrbitSpan o;
  std::vector<int> parent;       // per vertex, -1 at root
  std::vector<int> parent_edge;  // per vertex, -1 at root
  std::vector<int> order;        // BFS order from the root
  std::vector<ZVec> slope;       // per edge, oriented a -> b
  std::vector<int> spine;        // edges on the root -> cut1 path, in order
  std::vector<std::optional<std::vector<Rat>>> vertex_pos;
  EmbeddedGraph image;
};

inline OrbitTrop trop_orbit(const TateSkeleton& t) {
  OrbitTrop r;
  r.o = orbit_span(t);
  const auto& tr = r.o.span.tree;
  size_t nv = tr.vertices.size();
  r.parent.assign(nv, -1);
  r.parent_edge.assign(nv, -1);
  auto adj = tr.adjacency();
  std::vector<char> seen(nv, 0);
  std::queue<int> bfs;
  int root = r.o.span.root;
  seen[root] = 1;
  bfs.push(root);
  while (!bfs.empty()) {
    int v = bfs.front();
    bfs.pop();
    r.order.push_back(v);
    for (auto [e, w] : adj[v]) {
      if (seen[w]) continue;
      seen[w] = 1;
      r.parent[w] = v;
      r.parent_edge[w] = e;
      bfs.push(w);
    }
  }

  r.slope = detail::orbit_slopes(r.o, t, r.parent_edge);

  for (int v = r.o.cut1; v != root; v = r.parent[v]) r.spine.push_back(r.parent_edge[v]);
  std::reverse(r.spine.begin(), r.spine.end());

  r.vertex_pos.assign(nv, std::nullopt);
  r.vertex_pos[root] = t.tau;
  for (int v : r.order) {
    if (v == root) continue;
    int e = r.parent_edge[v];
    if (!tr.edges[e].len.is_finite()) continue;
    long sgn = tr.edges[e].b == v ? 1 : -1;
    std::vector<Rat> p = *r.vertex_pos[r.parent[v]];
    for (long i = 0; i < t.n; ++i) p[i] += Rat(sgn) * tr.edges[e].len.q * Rat(r.slope[e][i]);
    r.vertex_pos[v] = std::move(p);
  }
  if (!r.vertex_pos[r.o.cut1] || *r.vertex_pos[r.o.cut1] != t.tau)
    throw MathError("CycleDoesNotClose",
                    "quotient positions do not return to the cut image");

  for (size_t e = 0; e < tr.edges.size(); ++e) {
    if (is_zero_vec(r.slope[e])) continue;
    ZVec d = r.slope[e];
    long cont = static_cast<long>(content(d).get_si());
    for (auto& x : d) x /= cont;
    Seg s;
    s.dir = d;
    s.weight = cont;
    if (tr.edges[e].len.is_finite()) {
      s.p = *r.vertex_pos[tr.edges[e].a];
      s.len = tr.edges[e].len.q * Rat(cont);
      s.unbounded = false;
    } else {
      int fin = r.o.span.pos[tr.edges[e].a].is_p1 ? tr.edges[e].b : tr.edges[e].a;
      s.p = *r.vertex_pos[fin];
      if (fin != tr.edges[e].a)
        for (auto& x : s.dir) x = -x;
      s.unbounded = true;
    }
    r.image.push_back(std::move(s));
  }
  return r;
}

inline EmbeddedGraph forward_trop_tate(const TateSkeleton& t) {
  return trop_orbit(t).image;
}

// Cut the circuit at its first edge, unroll the hanging forests along
// [0, ell), and realize every boundary ray as a point of K^*. Fresh leading
// coefficients are powers of two in canonical child order; the spine keeps
// center 0.
inline TateSkeleton build_tate_skeleton(const ZTCurve& c) {
  auto rep = validate(c);
  if (!rep.ok) throw InputError("invalid curve: " + rep.problems.front());
  if (genus(c) != 1) throw InputError("Tate lifting needs a genus-1 curve");

  auto walk = circuit(c);
  long r = static_cast<long>(walk.size());
  if (!walk[0].forward) throw MathError("Internal", "circuit walk starts backward");
  auto step_end = [&](const CircuitStep& st) {
    return c.index(st.forward ? c.edges[st.edge].to : c.edges[st.edge].from);
  };
  std::vector<int> ids(r);
  std::vector<Rat> depth(r);
  Rat ell = c.edges[walk[0].edge].len.q;
  ids[0] = step_end(walk[0]);
  depth[0] = 0;
  for (long k = 1; k < r; ++k) {
    ids[k] = step_end(walk[k]);
    depth[k] = depth[k - 1] + c.edges[walk[k].edge].len.q;
    ell += c.edges[walk[k].edge].len.q;
  }
  if (!(ell > 0)) throw InputError("circuit has zero length");

  TateSkeleton t;
  t.n = c.n;
  t.q = t_pow(ell);

  std::set<int> circ_edges;
  for (const auto& st : walk) circ_edges.insert(st.edge);
  auto adj = c.adjacency();

  std::function<void(int, const Series&, const Rat&, int, int)> grow =
      [&](int vi, const Series& center, const Rat& rad, int arrival, int cl) {
        Rat alpha = 1;
        for (auto [e, wi] : adj[vi]) {
          if (e == arrival || circ_edges.count(e)) continue;
          Series cw = detail::ray_value(center, alpha, rad);
          alpha *= 2;
          if (!c.edges[e].len.is_finite()) {
            TatePuncture p;
            p.leaf_id = c.vertices[wi].id;
            p.z = cw;
            ZVec d = c.dir_from(e, vi);
            for (auto& x : d) x *= c.edges[e].mult;
            p.sigma = std::move(d);
            p.cluster = cl;
            t.punctures.push_back(std::move(p));
          } else {
            grow(wi, cw, rad + c.edges[e].len.q, e, cl);
          }
        }
      };
  for (long k = 0; k < r; ++k) grow(ids[k], s_zero(1), depth[k], -1, static_cast<int>(k));

  t.zplus.assign(c.n, {});
  t.zminus.assign(c.n, {});
  for (size_t p = 0; p < t.punctures.size(); ++p) {
    const auto& pc = t.punctures[p];
    for (long i = 0; i < c.n; ++i) {
      long sig = static_cast<long>(pc.sigma[i].get_si());
      for (long cnt = 0; cnt < std::labs(sig); ++cnt)
        (sig > 0 ? t.zplus[i] : t.zminus[i])
            .push_back({pc.z, static_cast<int>(p), pc.cluster});
    }
  }

  // cut-edge twist: the lex-smallest element of zplus[i] picks up q^{s_i}
  t.shifted.assign(c.n, -1);
  const auto& e0 = c.edges[walk[0].edge];
  for (long i = 0; i < c.n; ++i) {
    long s0 = static_cast<long>(Int(e0.dir[i] * e0.mult).get_si());
    if (s0 == 0) continue;
    if (t.zplus[i].empty())
      throw MathError("Internal", "circuit slope without matching rays");
    size_t best = 0;
    for (size_t k = 1; k < t.zplus[i].size(); ++k)
      if (s_lex_less(t.zplus[i][k].z, t.zplus[i][best].z)) best = k;
    t.zplus[i][best].z = s_mul(t.zplus[i][best].z, s_pow(t.q, s0));
    t.shifted[i] = static_cast<int>(best);
  }

  auto pos = positions(c);
  t.tau = pos.at(c.vertices[ids[0]].id);
  validate_tate(t);
  return t;
}

// ---- sampling ----

// coordinatewise valuations of the theta quotient at u
inline std::vector<Rat> tate_log_valuations(const TateSkeleton& t, const Series& u,
                                            const Rat& trunc = kDefaultTrunc) {
  std::vector<Rat> out;
  for (long i = 0; i < t.n; ++i) {
    Rat v = 0;
    for (const auto& e : t.zplus[i]) v += theta_valuation(e.z, u, t.q, trunc);
    for (const auto& e : t.zminus[i]) v -= theta_valuation(e.z, u, t.q, trunc);
    out.push_back(v);
  }
  return out;
}

// graph-side position of the probe's attachment point (q-periodic)
inline std::vector<Rat> orbit_position(const OrbitTrop& tr, const Series& u) {
  Rat vu = require_valuation(u, "probe");
  long j = static_cast<long>(rat_floor(vu / tr.o.ell).get_si());
  Series un = u;
  if (j != 0) {
    Rat amb = kDefaultTrunc + abs(vu) + Rat(std::abs(j) + 1) * tr.o.ell;
    un = s_mul(un, s_pow(tr.o.q, -j, amb));
  }
  auto at = attach_point(tr.o.span, tr.o.pts, P1::of(un));
  if (at.vertex >= 0) {
    if (!tr.vertex_pos[at.vertex])
      throw MathError("Internal", "probe attached to an unplaced vertex");
    return *tr.vertex_pos[at.vertex];
  }
  const auto& ed = tr.o.span.tree.edges[at.edge];
  int fin = tr.o.span.pos[ed.a].is_p1 ? ed.b : ed.a;
  Rat dist = abs(at.b.r - tr.o.span.pos[fin].d.r);
  long sgn = fin == ed.a ? 1 : -1;
  std::vector<Rat> p = *tr.vertex_pos[fin];
  for (size_t i = 0; i < p.size(); ++i)
    p[i] += Rat(sgn) * dist * Rat(tr.slope[at.edge][i]);
  return p;
}

inline bool sample_check_tate(const TateSkeleton& t, const OrbitTrop& tr,
                              const Series& a, const Series& b,
                              const Rat& trunc = kDefaultTrunc) {
  auto va = tate_log_valuations(t, a, trunc);
  auto vb = tate_log_valuations(t, b, trunc);
  auto pa = orbit_position(tr, a);
  auto pb = orbit_position(tr, b);
  for (long i = 0; i < t.n; ++i)
    if (va[i] - vb[i] != pa[i] - pb[i]) return false;
  return true;
}

// consecutive-pair sampling with each probe evaluated once; returns the
// number of failing pairs
inline int sample_pairs(const TateSkeleton& t, const OrbitTrop& tr,
                        const std::vector<Series>& probes,
                        const Rat& trunc = kDefaultTrunc) {
  if (probes.size() < 2) return 0;
  std::vector<std::vector<Rat>> vals, poss;
  for (const auto& u : probes) {
    vals.push_back(tate_log_valuations(t, u, trunc));
    poss.push_back(orbit_position(tr, u));
  }
  int bad = 0;
  for (size_t a = 0; a + 1 < probes.size(); ++a) {
    for (long i = 0; i < t.n; ++i)
      if (vals[a][i] - vals[a + 1][i] != poss[a][i] - poss[a + 1][i]) {
        ++bad;
        break;
      }
  }
  return bad;
}

// one fresh probe at every finite span vertex strictly below the seam mark,
// plus a deep probe inside each puncture stalk
inline std::vector<Series> standard_tate_probes(const OrbitTrop& tr) {
  std::vector<P1> zs;
  for (const auto& rp : tr.o.reps) zs.push_back(P1::of(rp));
  std::vector<Series> out;
  for (size_t v = 0; v < tr.o.span.pos.size(); ++v) {
    const auto& p = tr.o.span.pos[v];
    if (p.is_p1 || !(p.d.r < tr.o.ell)) continue;
    out.push_back(detail::fresh_probe(zs, p.d.c, p.d.r));
  }
  for (size_t v = 0; v < tr.o.span.pos.size(); ++v) {
    const auto& p = tr.o.span.pos[v];
    if (!p.is_p1) continue;
    int pa = tr.parent[v];
    if (pa < 0 || tr.o.span.pos[pa].is_p1) continue;
    out.push_back(detail::fresh_probe(zs, p.p.z, tr.o.span.pos[pa].d.r + 1));
  }
  return out;
}

// ---- unit solving ----

struct SolveReport {
  TateSkeleton data;
  long field_degree = 1;
  std::vector<Rat> progress;         // correction levels, strictly increasing
  std::vector<std::string> notices;  // e.g. field extensions taken
  int retries = 0;                   // genericity redraws used
};

inline std::string flat_name(const Flat& f, long n) {
  static const char* axes[] = {"x", "y", "z", "w"};
  if (f.dirs.size() == 1) {
    int nz = -1;
    bool single = true;
    for (long k = 0; k < n; ++k)
      if (f.dirs[0][k] != 0) {
        if (nz >= 0) single = false;
        nz = nz < 0 ? static_cast<int>(k) : nz;
      }
    if (single && nz >= 0)
      return (nz < 4 ? std::string(axes[nz]) : "x" + std::to_string(nz)) +
             "-axis flat";
  }
  std::ostringstream os;
  os << "flat spanned by";
  for (const auto& row : f.dirs) {
    os << " (";
    for (size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << format_rat(row[k]);
    os << ")";
  }
  return os.str();
}

namespace detail {

// Hanging forests of the circuit in the domain metric (plain edge lengths).
struct HangForest {
  std::set<int> circuit_ids;
  std::map<int, Rat> depth;                   // vertex id -> distance
  std::map<int, std::pair<int, int>> up;      // vertex id -> (edge, parent id)
};

inline HangForest hang_forest(const ZTCurve& c) {
  HangForest f;
  f.circuit_ids = circuit_vertex_ids(c);
  std::set<int> circ_edges;
  for (const auto& st : circuit(c)) circ_edges.insert(st.edge);
  auto adj = c.adjacency();
  std::queue<int> bfs;
  for (int id : f.circuit_ids) {
    f.depth[id] = 0;
    bfs.push(c.index(id));
  }
  while (!bfs.empty()) {
    int vi = bfs.front();
    bfs.pop();
    int vid = c.vertices[vi].id;
    for (auto [e, wi] : adj[vi]) {
      if (circ_edges.count(e) || !c.edges[e].len.is_finite()) continue;
      int wid = c.vertices[wi].id;
      if (f.depth.count(wid)) continue;
      f.depth[wid] = f.depth[vid] + c.edges[e].len.q;
      f.up[wid] = {e, vid};
      bfs.push(wi);
    }
  }
  return f;
}

// edge chain from the circuit down to the puncture's ray, ray last
inline std::vector<int> leaf_chain(const ZTCurve& c, const HangForest& f,
                                   const TatePuncture& p) {
  int ray = -1, inner = -1;
  for (size_t e = 0; e < c.edges.size(); ++e) {
    if (c.edges[e].len.is_finite()) continue;
    if (c.edges[e].from == p.leaf_id) {
      ray = static_cast<int>(e);
      inner = c.edges[e].to;
    } else if (c.edges[e].to == p.leaf_id) {
      ray = static_cast<int>(e);
      inner = c.edges[e].from;
    }
  }
  if (ray < 0) throw MathError("Internal", "puncture without a ray");
  std::vector<int> chain{ray};
  int v = inner;
  while (!f.circuit_ids.count(v)) {
    auto it = f.up.find(v);
    if (it == f.up.end()) throw MathError("Internal", "hanging forest chain broken");
    chain.push_back(it->second.first);
    v = it->second.second;
  }
  std::reverse(chain.begin(), chain.end());
  return chain;
}

// A family of unit corrections: each column multiplies the listed punctures
// (and their multiset entries) by a common unit; mat[i][j] is the resulting
// exponent on w_i. Usable at correction levels >= level.
struct UnitSystem {
  Rat level;
  QMat mat;
  std::vector<std::vector<int>> members;
  ZMat kernel;
};

inline QMat count_matrix(const TateSkeleton& t,
                         const std::vector<std::vector<int>>& members) {
  QMat m(t.n, std::vector<Rat>(members.size(), 0));
  std::vector<int> col(t.punctures.size(), -1);
  for (size_t j = 0; j < members.size(); ++j)
    for (int p : members[j]) col[p] = static_cast<int>(j);
  for (long i = 0; i < t.n; ++i) {
    for (const auto& e : t.zplus[i])
      if (e.puncture >= 0 && col[e.puncture] >= 0) m[i][col[e.puncture]] += 1;
    for (const auto& e : t.zminus[i])
      if (e.puncture >= 0 && col[e.puncture] >= 0) m[i][col[e.puncture]] -= 1;
  }
  return m;
}

inline ZMat integer_kernel_rows(const QMat& m) {
  ZMat zm;
  int cols = 0;
  for (const auto& row : m) {
    ZVec r;
    for (const auto& x : row) r.push_back(rat_num(x));  // entries are counts
    cols = static_cast<int>(r.size());
    zm.push_back(std::move(r));
  }
  return integer_kernel(zm, cols);
}

inline UnitSystem circuit_system(const TateSkeleton& t) {
  int ncl = 0;
  for (const auto& p : t.punctures) ncl = std::max(ncl, p.cluster + 1);
  std::vector<std::vector<int>> mem(ncl);
  for (size_t p = 0; p < t.punctures.size(); ++p)
    mem[t.punctures[p].cluster].push_back(static_cast<int>(p));
  std::vector<std::vector<int>> nonempty;
  for (auto& m : mem)
    if (!m.empty()) nonempty.push_back(std::move(m));
  UnitSystem s;
  s.level = 0;
  s.members = std::move(nonempty);
  s.mat = count_matrix(t, s.members);
  s.kernel = integer_kernel_rows(s.mat);
  return s;
}

// Cut-germ systems at every radius where the affine span of the
// R-neighborhood of the circuit jumps in dimension. A germ at radius R is an
// edge whose near endpoint is at distance <= R and whose far endpoint is
// deeper; its column collects the punctures beyond it.
inline std::vector<UnitSystem> germ_systems(const TateSkeleton& t, const ZTCurve& c,
                                            const HangForest& f) {
  std::map<Rat, std::vector<int>> starts;  // near depth -> hanging edge indices
  std::set<int> circ_edges;
  for (const auto& st : circuit(c)) circ_edges.insert(st.edge);
  for (size_t e = 0; e < c.edges.size(); ++e) {
    if (circ_edges.count(static_cast<int>(e))) continue;
    const auto& ed = c.edges[e];
    Rat near;
    if (!ed.len.is_finite()) {
      int inner = c.vertices[c.index(ed.from)].boundary ? ed.to : ed.from;
      if (!f.depth.count(inner)) continue;  // ray of a component off the circuit
      near = f.depth.at(inner);
    } else {
      if (!f.depth.count(ed.from) || !f.depth.count(ed.to)) continue;
      near = std::min(f.depth.at(ed.from), f.depth.at(ed.to));
    }
    starts[near].push_back(static_cast<int>(e));
  }

  QMat running = circuit_directions(c);
  int rank = rank_q(running);
  std::vector<Rat> jumps;
  for (const auto& [dep, edges] : starts) {
    for (int e : edges) {
      std::vector<Rat> row;
      for (const auto& x : c.edges[e].dir) row.push_back(Rat(x));
      running.push_back(std::move(row));
    }
    int nr = rank_q(running);
    if (nr > rank) {
      rank = nr;
      jumps.push_back(dep);
    }
  }

  std::vector<std::vector<int>> chains;
  for (const auto& p : t.punctures) chains.push_back(leaf_chain(c, f, p));
  auto far_depth = [&](int e) -> XRat {
    if (!c.edges[e].len.is_finite()) return XRat::infinity();
    return XRat(std::max(f.depth.at(c.edges[e].from), f.depth.at(c.edges[e].to)));
  };

  std::vector<UnitSystem> out;
  for (const Rat& R : jumps) {
    std::map<int, std::vector<int>> germ;  // cut edge -> punctures beyond
    for (size_t p = 0; p < chains.size(); ++p) {
      int cut = -1;
      for (int e : chains[p])
        if (far_depth(e) > XRat(R)) {
          cut = e;
          break;
        }
      if (cut < 0) throw MathError("Internal", "puncture chain below a jump radius");
      germ[cut].push_back(static_cast<int>(p));
    }
    UnitSystem s;
    s.level = R;
    for (auto& [e, mem] : germ) s.members.push_back(std::move(mem));
    s.mat = count_matrix(t, s.members);
    s.kernel = integer_kernel_rows(s.mat);
    out.push_back(std::move(s));
  }
  return out;
}

// Orbit span shape: vertex kinds and radii, edge lengths, mark placement.
// Unit corrections must keep it pointwise equal, or the quotient tree (and
// with it the tropicalization) would change.
inline std::string span_signature(const TateSkeleton& t) {
  OrbitSpan o = orbit_span(t);
  std::ostringstream os;
  for (const auto& p : o.span.pos) {
    if (p.is_p1)
      os << "P;";
    else
      os << "D" << format_rat(p.d.r) << ";";
  }
  os << "|";
  for (const auto& e : o.span.tree.edges)
    os << e.a << "-" << e.b << ":" << format_xrat(e.len) << ";";
  os << "|";
  for (int a : o.span.at) os << a << ",";
  os << "|" << o.span.root;
  return os.str();
}

// cap is the retained relative precision; corrected values would otherwise
// accumulate a term per level without bound
inline void apply_unit(TateSkeleton& t, const std::vector<int>& members,
                       const Series& u, const XRat& cap = XRat::infinity()) {
  auto mul = [&](const Series& z) {
    Series r = s_mul(z, u);
    if (cap.inf || r.terms.size() <= 64) return r;
    Rat v = require_valuation(r, "corrected point");
    return s_truncate(std::move(r), XRat(v + cap.q));
  };
  std::vector<char> in(t.punctures.size(), 0);
  for (int p : members) in[p] = 1;
  for (auto* side : {&t.zplus, &t.zminus})
    for (auto& row : *side)
      for (auto& e : row)
        if (e.puncture >= 0 && in[e.puncture]) e.z = mul(e.z);
  for (int p : members) t.punctures[p].z = mul(t.punctures[p].z);
}

inline SolveReport solve_units(TateSkeleton t, std::vector<UnitSystem> systems,
                               const Rat& trunc) {
  SolveReport rep;
  long d = tate_degree(t);
  std::string sig0 = span_signature(t);
  std::stable_sort(systems.begin(), systems.end(),
                   [](const UnitSystem& a, const UnitSystem& b) { return a.level < b.level; });

  // precision cap for corrected values; every later tree or level decision
  // happens strictly below it
  Rat ell = tate_ell(t);
  Rat maxv = 0;
  for (const auto* side : {&t.zplus, &t.zminus})
    for (const auto& row : *side)
      for (const auto& e : row)
        maxv = std::max(maxv, Rat(abs(require_valuation(e.z, "multiset element"))));
  Rat maxr = ell;
  {
    OrbitSpan o0 = orbit_span(t);
    for (const auto& p : o0.span.pos)
      if (!p.is_p1) maxr = std::max(maxr, p.d.r);
  }
  XRat cap(trunc + ell + maxr + maxv + 2);

  // the running multipliers carry one spare level of precision
  Rat wamb = trunc + 1;
  std::vector<Series> wrun(t.n);
  for (long i = 0; i < t.n; ++i) wrun[i] = s_truncate(tate_w(t, i, wamb), XRat(wamb));

  bool first = true;
  Rat last = 0;
  for (int guard = 0;; ++guard) {
    if (guard > 4096) throw MathError("Internal", "unit solve failed to terminate");
    std::vector<Series> diffs(t.n);
    Rat m;
    bool active = false;
    for (long i = 0; i < t.n; ++i) {
      diffs[i] = s_sub(wrun[i], s_from_q(1, wrun[i].fld.d));
      Val v = valuation(diffs[i]);
      if (v.kind == Val::kFinite && v.v < trunc) {
        if (!active || v.v < m) m = v.v;
        active = true;
      }
    }
    if (!active) break;
    if (!first && !(m > last))
      throw MathError("Internal", "no solver progress at level " + format_rat(m));
    first = false;
    last = m;
    rep.progress.push_back(m);

    const UnitSystem* sys = nullptr;
    for (const auto& s : systems)
      if (s.level <= m) sys = &s;
    if (!sys) throw MathError("Internal", "no unit system available");
    size_t p = sys->members.size();

    bool residue_level = (m == 0);
    std::vector<Rat> xres;
    std::vector<NF> yadd;
    if (residue_level) {
      std::vector<Rat> target;
      for (long i = 0; i < t.n; ++i) {
        NF res = nf_one(d);
        if (!diffs[i].terms.empty() && diffs[i].terms.front().exp == 0)
          res = nf_add(nf_promote(res, std::max<long>(d, diffs[i].fld.d)),
                       nf_promote(diffs[i].terms.front().coeff,
                                  std::max<long>(d, diffs[i].fld.d)));
        auto lg = nf_log2(res, std::max<long>(d, static_cast<long>(res.size())));
        if (!lg)
          throw MathError("Unsupported",
                          "unit residue is outside the power-of-two lattice");
        target.push_back(-*lg);
      }
      auto x = solve_q(sys->mat, target);
      if (!x) throw MathError("Internal", "residue correction system is inconsistent");
      xres = *x;
      // Shift along the kernel to the solution of least denominator: in a
      // unimodular basis whose first rows span the kernel, the free
      // coordinates can be zeroed and the rest are invariants of the fiber.
      if (!sys->kernel.empty()) {
        size_t k = sys->kernel.size();
        ZMat u = extend_to_unimodular(sys->kernel, static_cast<int>(p));
        ZMat ui = invert_unimodular(u);
        std::vector<Rat> a(p, Rat(0));
        for (size_t cc = 0; cc < p; ++cc)
          for (size_t rr = 0; rr < p; ++rr)
            if (xres[rr] != 0) a[cc] += xres[rr] * Rat(ui[rr][cc]);
        for (size_t rr = 0; rr < k; ++rr) a[rr] = 0;
        std::vector<Rat> xmin(p, Rat(0));
        for (size_t cc = 0; cc < p; ++cc)
          for (size_t rr = k; rr < p; ++rr)
            if (a[rr] != 0) xmin[cc] += a[rr] * Rat(u[rr][cc]);
        xres = xmin;
      }
      Int need(1);
      for (const auto& v : xres) need = int_lcm(need, rat_den(v));
      long dn = static_cast<long>(int_lcm(need, Int(d)).get_si());
      if (dn != d) {
        tate_promote(t, dn);
        for (auto& w : wrun) w = s_promote(w, dn);
        d = dn;
        rep.notices.push_back("FieldExtensionRequired: continuing over Q(2^(1/" +
                              std::to_string(d) + "))");
      }
    } else {
      std::vector<NF> target;
      for (long i = 0; i < t.n; ++i) {
        NF co = nf_zero(d);
        if (!diffs[i].terms.empty() && diffs[i].terms.front().exp == m)
          co = nf_promote(diffs[i].terms.front().coeff, d);
        target.push_back(nf_neg(co));
      }
      auto y = solve_linear<NF>(
          sys->mat, target, nf_zero(d),
          [](const Rat& fct, const NF& v) { return nf_scale(fct, v); },
          [](const NF& u, const NF& v) { return nf_add(u, v); },
          [](const NF& v) { return nf_is_zero(v); });
      if (!y)
        throw MathError("Internal",
                        "correction system is inconsistent at level " + format_rat(m));
      yadd = *y;
    }

    auto multiplier = [&](size_t j, int draw) -> Series {
      if (residue_level) {
        NF u = nf_pow2(xres[j], d);
        if (draw > 0) {
          Rat cf = 1;
          for (size_t row = 0; row < sys->kernel.size(); ++row) {
            long kk = static_cast<long>(sys->kernel[row][j].get_si());
            if (kk)
              cf *= rat_pow(Rat(1) + pow2_rat(draw + static_cast<long>(row)), kk);
          }
          u = nf_scale(cf, u);
        }
        return s_monomial(u, 0);
      }
      NF yj = yadd[j];
      if (draw > 0) {
        Rat extra = 0;
        for (size_t row = 0; row < sys->kernel.size(); ++row)
          extra += pow2_rat(draw + static_cast<long>(row)) * Rat(sys->kernel[row][j]);
        yj = nf_add(yj, nf_from_q(extra, d));
      }
      return s_add(s_from_q(1, d), s_monomial(yj, m));
    };

    // A correction 1 + y t^m perturbs every normalized representative at
    // valuation >= m, so once m clears the deepest branching radius the
    // span cannot move and the draw check is settled in advance.
    bool settled = !residue_level && m > maxr;
    bool accepted = false;
    for (int draw = 0; draw < 64; ++draw) {
      if (draw > 0 && sys->kernel.empty()) break;
      TateSkeleton t2 = settled ? std::move(t) : t;
      for (size_t j = 0; j < p; ++j)
        apply_unit(t2, sys->members[j], multiplier(j, draw), cap);
      bool ok = false;
      if (settled)
        ok = true;
      else
        try {
          ok = span_signature(t2) == sig0;
        } catch (const InputError&) {
          ok = false;
        } catch (const PrecisionError&) {
          ok = false;
        }
      if (ok) {
        t = std::move(t2);
        for (long i = 0; i < t.n; ++i) {
          for (size_t j = 0; j < p; ++j) {
            long a = static_cast<long>(rat_num(sys->mat[i][j]).get_si());
            if (a == 0) continue;
            wrun[i] = s_mul(wrun[i], s_pow(multiplier(j, draw), a, wamb));
          }
          wrun[i] = s_truncate(std::move(wrun[i]), XRat(wamb));
        }
        rep.retries += draw;
        accepted = true;
        break;
      }
    }
    if (!accepted)
      throw MathError("GenericityExhausted",
                      "every unit draw collided the orbit span at level " + format_rat(m));
  }
  rep.field_degree = d;
  rep.data = std::move(t);
  return rep;
}

}  // namespace detail

// Ordinary case: circuit-vertex clusters alone reach every coordinate.
inline SolveReport solve_units_ordinary(const TateSkeleton& t,
                                        const Rat& trunc = kDefaultTrunc) {
  auto sys = detail::circuit_system(t);
  if (rank_q(sys.mat) < static_cast<int>(t.n))
    throw MathError("RankDeficient",
                    "circuit clusters span a proper subspace; the input is superabundant");
  return detail::solve_units(t, {sys}, trunc);
}

// Superabundant case: well-spacedness is required up front, then cut-germ
// systems extend the circuit clusters radius by radius.
inline SolveReport solve_units_superabundant(const TateSkeleton& t, const ZTCurve& c,
                                             const Rat& trunc = kDefaultTrunc) {
  auto ws = is_well_spaced(c);
  if (!ws.ok)
    throw MathError("NotWellSpaced", "obstructed flat: " + flat_name(*ws.witness, c.n));
  if (is_ordinary(c)) return solve_units_ordinary(t, trunc);
  auto f = detail::hang_forest(c);
  std::vector<detail::UnitSystem> systems{detail::circuit_system(t)};
  for (auto& s : detail::germ_systems(t, c, f)) systems.push_back(std::move(s));
  return detail::solve_units(t, std::move(systems), trunc);
}

// ---- necessity reporting ----

struct FlatObstruction {
  Flat flat;
  std::string name;
  int vertex_id = -1;              // unique closest exit vertex
  Rat level;                       // its domain distance to the circuit
  std::optional<Rat> ratio_level;  // v(product of punctures beyond it - 1)
  bool confirmed = false;          // ratio_level == level
};

struct NecessityReport {
  Rat loop_length;   // v(q) = domain length of the circuit
  Rat j_valuation;   // -v(q)
  bool trivalent = false;
  bool embedding_tame = false;  // image carries the graph with multiplicity one
  std::vector<FlatObstruction> obstructions;
};

// For every flat whose closest exit vertex x is unique, the product of the
// punctures beyond x, weighted by an integer functional vanishing on the
// flat, sits at exact valuation dist(x); a lifted curve would need that
// valuation to cancel, which single-handed exits cannot do.
inline NecessityReport necessity_check(const TateSkeleton& t, const ZTCurve& c) {
  bool have_entries = false;
  for (const auto& row : t.zplus) have_entries |= !row.empty();
  if (t.punctures.empty() && have_entries)
    throw InputError("necessity check needs construction data, not a bare certificate");

  NecessityReport rep;
  rep.loop_length = tate_ell(t);
  rep.j_valuation = -rep.loop_length;
  auto degs = detail::vertex_degrees(c);
  rep.trivalent = true;
  for (size_t v = 0; v < c.vertices.size(); ++v)
    if (!c.vertices[v].boundary && degs[v] != 3) rep.trivalent = false;
  rep.embedding_tame = trivalent_reduce(c).ok;

  auto f = detail::hang_forest(c);
  for (const auto& flat : hyperplane_classes(c)) {
    auto reg = detail::flat_region(c, flat);
    std::set<int> exit_ids;
    for (int e : reg.exit_edges) {
      if (reg.vertex_ids.count(c.edges[e].from)) exit_ids.insert(c.edges[e].from);
      if (reg.vertex_ids.count(c.edges[e].to)) exit_ids.insert(c.edges[e].to);
    }
    if (exit_ids.empty()) continue;
    std::map<int, Rat> dist;
    for (int id : exit_ids) dist[id] = f.depth.at(id);
    Rat lo = dist.begin()->second;
    for (const auto& [id, dv] : dist) lo = std::min(lo, dv);
    std::vector<int> at_min;
    for (const auto& [id, dv] : dist)
      if (dv == lo) at_min.push_back(id);
    if (at_min.size() != 1) continue;
    int x = at_min[0];

    FlatObstruction ob;
    ob.flat = flat;
    ob.name = flat_name(flat, c.n);
    ob.vertex_id = x;
    ob.level = lo;

    std::vector<int> xexits;
    for (int e : reg.exit_edges)
      if (c.edges[e].from == x || c.edges[e].to == x) xexits.push_back(e);
    ZVec lambda;
    for (const auto& row : nullspace_q(flat.dirs)) {
      Int l = 1;
      for (const auto& v : row) l = int_lcm(l, rat_den(v));
      ZVec cand;
      for (const auto& v : row) cand.push_back(rat_num(v * Rat(l)));
      for (int e : xexits) {
        Int pair = 0;
        for (long k = 0; k < c.n; ++k) pair += cand[k] * c.edges[e].dir[k];
        if (pair != 0) {
          lambda = cand;
          break;
        }
      }
      if (!lambda.empty()) break;
    }

    if (!lambda.empty()) {
      std::set<int> xset(xexits.begin(), xexits.end());
      Series prod = s_from_q(1, tate_degree(t));
      bool any = false;
      for (const auto& pc : t.punctures) {
        auto chain = detail::leaf_chain(c, f, pc);
        bool beyond = false;
        for (int e : chain) beyond |= xset.count(e) > 0;
        if (!beyond) continue;
        Int g = 0;
        for (long k = 0; k < c.n; ++k) g += lambda[k] * pc.sigma[k];
        if (g == 0) continue;
        any = true;
        prod = s_mul(prod, s_pow(pc.z, static_cast<long>(g.get_si()),
                                 kDefaultTrunc + abs(lo) + 1));
      }
      if (any) {
        Series diff = s_sub(prod, s_from_q(1, prod.fld.d));
        Val v = valuation(diff);
        if (v.kind == Val::kFinite) ob.ratio_level = v.v;
        ob.confirmed = ob.ratio_level && *ob.ratio_level == ob.level;
      }
    }
    rep.obstructions.push_back(std::move(ob));
  }
  return rep;
}

}  // namespace troplift
