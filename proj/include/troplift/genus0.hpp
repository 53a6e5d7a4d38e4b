#pragma once

#include <algorithm>
#include <cassert>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "troplift/curve.hpp"
#include "troplift/disk_tree.hpp"
#include "troplift/embed.hpp"
#include "troplift/errors.hpp"
#include "troplift/linalg.hpp"
#include "troplift/series.hpp"

namespace troplift {

// A rational map P^1 -> (K^*)^n recorded through its zeros and poles:
// component i is prod over zplus[i] of (u - z[k]) divided by prod over
// zminus[i] of (u - z[k]), entries repeated for multiplicity. The point at
// infinity never appears in a list; its orders are whatever makes the degree
// sum vanish. tau translates valuation vectors into the curve's coordinates.
struct RationalMapData {
  long n = 0;
  std::vector<P1> z;
  std::vector<int> leaf_ids;  // boundary vertex per puncture, empty if hand built
  std::vector<std::vector<int>> zplus;
  std::vector<std::vector<int>> zminus;
  std::vector<Rat> tau;
};

inline void validate_map_data(const RationalMapData& d) {
  if (d.n <= 0) throw InputError("map data needs a positive ambient dimension");
  if (static_cast<long>(d.zplus.size()) != d.n ||
      static_cast<long>(d.zminus.size()) != d.n ||
      static_cast<long>(d.tau.size()) != d.n)
    throw InputError("map data lists do not match the ambient dimension");
  if (!d.leaf_ids.empty() && d.leaf_ids.size() != d.z.size())
    throw InputError("puncture labels do not match the puncture list");
  long ninf = 0;
  for (const auto& p : d.z) ninf += p.inf ? 1 : 0;
  if (ninf > 1) throw InputError("repeated puncture at infinity");
  for (long i = 0; i < d.n; ++i)
    for (const auto* lst : {&d.zplus[i], &d.zminus[i]})
      for (int k : *lst) {
        if (k < 0 || k >= static_cast<int>(d.z.size()))
          throw InputError("factor list references a missing puncture");
        if (d.z[k].inf)
          throw InputError("infinity cannot appear in a factor list");
      }
}

inline std::vector<ZVec> puncture_orders(const RationalMapData& d) {
  std::vector<ZVec> ord(d.z.size(), ZVec(d.n, Int(0)));
  for (long i = 0; i < d.n; ++i) {
    for (int k : d.zplus[i]) ord[k][i] += 1;
    for (int k : d.zminus[i]) ord[k][i] -= 1;
  }
  return ord;
}

inline ZVec infinity_order(const RationalMapData& d) {
  ZVec o(d.n, Int(0));
  for (long i = 0; i < d.n; ++i)
    o[i] = Int(static_cast<long>(d.zminus[i].size()) -
               static_cast<long>(d.zplus[i].size()));
  return o;
}

// Zero/pole order vector per listed puncture, with the implicit orders filled
// in at a listed infinity. Rejects data whose unlisted infinity would carry a
// zero or pole.
inline std::vector<ZVec> effective_orders(const RationalMapData& d) {
  std::vector<ZVec> ord = puncture_orders(d);
  ZVec oinf = infinity_order(d);
  bool has_inf = false;
  for (size_t k = 0; k < d.z.size(); ++k)
    if (d.z[k].inf) {
      ord[k] = oinf;
      has_inf = true;
    }
  if (!has_inf && !is_zero_vec(oinf))
    throw InputError("map data has an unlisted zero or pole at infinity");
  return ord;
}

// Order vectors of all actual zeros and poles, infinity included, sorted.
inline std::vector<ZVec> map_degree(const RationalMapData& d) {
  std::vector<ZVec> eff = effective_orders(d);
  std::vector<ZVec> out;
  for (const auto& o : eff)
    if (!is_zero_vec(o)) out.push_back(o);
  std::sort(out.begin(), out.end());
  return out;
}

// v(phi_i(u)) for all i by exact factor-by-factor valuation
inline std::vector<Rat> eval_valuation(const RationalMapData& d, const Series& u) {
  std::vector<Rat> out(d.n, Rat(0));
  for (long i = 0; i < d.n; ++i) {
    Rat v = 0;
    for (int k : d.zplus[i]) v += require_valuation(s_sub(u, d.z[k].z), "map factor");
    for (int k : d.zminus[i]) v -= require_valuation(s_sub(u, d.z[k].z), "map factor");
    out[i] = v;
  }
  return out;
}

namespace detail {

// residue directions already taken at radius r below the center c by points
// of z lying that deep
inline std::vector<NF> used_residues(const std::vector<P1>& z, const Series& c,
                                     const Rat& r) {
  std::vector<NF> used;
  for (const auto& p : z) {
    if (p.inf) continue;
    Series dev = s_sub(p.z, c);
    if (val_lower_bound(dev) < XRat(r)) continue;
    if (!dev.terms.empty() && dev.terms.front().exp == r)
      used.push_back(dev.terms.front().coeff);
    else
      used.push_back(nf_zero(dev.fld.d));
  }
  return used;
}

// c deviated at radius r in a residue direction no point of z follows; every
// factor u - z with z at least r deep then has valuation exactly r
inline Series fresh_probe(const std::vector<P1>& z, const Series& c, const Rat& r) {
  std::vector<NF> used = used_residues(z, c, r);
  used.push_back(nf_zero(1));
  long dd = c.fld.d;
  for (const auto& u : used) dd = std::max(dd, static_cast<long>(u.size()));
  for (long k = 1;; ++k) {
    NF cand = nf_from_q(Rat(k), dd);
    bool clash = false;
    for (const auto& u : used)
      clash = clash || nf_eq(nf_promote(u, dd), cand);
    if (!clash) return s_add(c, s_monomial(nf_from_q(Rat(k), c.fld.d), r));
  }
}

}  // namespace detail

// The span of the punctures with integer slopes on its edges, vertex images
// in Q^n, and the resulting weighted image complex.
struct TropEmbedding {
  bool full_line = false;  // one finite puncture plus infinity; image is a line
  std::vector<Rat> base;   // image of the integration root (line point if full_line)
  ZVec line_dir;           // full_line only: order vector at the finite puncture
  SpanResult span;
  std::vector<BTPoint> zpts;
  std::vector<std::optional<std::vector<Rat>>> vertex_pos;  // by span vertex
  std::vector<ZVec> edge_slope;                             // oriented a -> b
  EmbeddedGraph image;
};

inline TropEmbedding forward_trop(const RationalMapData& d) {
  validate_map_data(d);
  TropEmbedding e;
  std::vector<ZVec> eff = effective_orders(d);

  long finite = 0;
  int inf_at = -1, fin_at = -1;
  for (size_t k = 0; k < d.z.size(); ++k) {
    if (d.z[k].inf) {
      inf_at = static_cast<int>(k);
    } else {
      ++finite;
      if (fin_at < 0) fin_at = static_cast<int>(k);
    }
  }
  if (finite == 0) throw InputError("map data needs a finite puncture");
  bool all_zero = true;
  for (const auto& o : eff) all_zero = all_zero && is_zero_vec(o);
  if (all_zero) throw InputError("constant map data");

  for (const auto& p : d.z) e.zpts.push_back(BTPoint::point(p));
  e.span = span_tree(e.zpts);

  if (finite == 1) {
    assert(inf_at >= 0);
    e.full_line = true;
    e.line_dir = eff[fin_at];
    Series probe = s_add(d.z[fin_at].z, t_pow(Rat(1), d.z[fin_at].z.fld.d));
    std::vector<Rat> v0 = eval_valuation(d, probe);
    e.base.resize(d.n);
    for (long i = 0; i < d.n; ++i) e.base[i] = v0[i] + d.tau[i];
    Int m = content(e.line_dir);
    Seg ray;
    ray.p = e.base;
    ray.dir = e.line_dir;
    for (auto& x : ray.dir) x /= m;
    ray.unbounded = true;
    ray.weight = m.get_si();
    e.image.push_back(ray);
    for (auto& x : ray.dir) x = -x;
    e.image.push_back(ray);
    return e;
  }

  auto adj = e.span.tree.adjacency();
  size_t nv = e.span.tree.vertices.size();
  size_t ne = e.span.tree.edges.size();

  // slope of an edge = total order on its far side
  e.edge_slope.assign(ne, ZVec(d.n, Int(0)));
  for (size_t ei = 0; ei < ne; ++ei) {
    std::vector<char> side(nv, 0);
    std::vector<int> stack{e.span.tree.edges[ei].b};
    side[e.span.tree.edges[ei].b] = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (auto [f, w] : adj[v])
        if (f != static_cast<int>(ei) && !side[w]) {
          side[w] = 1;
          stack.push_back(w);
        }
    }
    for (size_t k = 0; k < d.z.size(); ++k)
      if (side[e.span.at[k]])
        for (long i = 0; i < d.n; ++i) e.edge_slope[ei][i] += eff[k][i];
  }

  // positions by integrating slopes away from one evaluated base point
  int root = e.span.root;
  assert(root >= 0 && !e.span.pos[root].is_p1);
  const Disk& rd = e.span.pos[root].d;
  std::vector<Rat> v0 = eval_valuation(d, detail::fresh_probe(d.z, rd.c, rd.r));
  e.base.resize(d.n);
  for (long i = 0; i < d.n; ++i) e.base[i] = v0[i] + d.tau[i];
  e.vertex_pos.assign(nv, std::nullopt);
  e.vertex_pos[root] = e.base;
  std::vector<int> stack{root};
  std::vector<char> seen(nv, 0);
  seen[root] = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (auto [f, w] : adj[v]) {
      if (seen[w]) continue;
      seen[w] = 1;
      const auto& ed = e.span.tree.edges[f];
      if (ed.len.inf) continue;
      bool fwd = ed.b == w;
      std::vector<Rat> gw = *e.vertex_pos[v];
      for (long i = 0; i < d.n; ++i) {
        Rat s(e.edge_slope[f][i]);
        gw[i] += ed.len.q * (fwd ? s : -s);
      }
      e.vertex_pos[w] = std::move(gw);
      stack.push_back(w);
    }
  }

  for (size_t ei = 0; ei < ne; ++ei) {
    const auto& ed = e.span.tree.edges[ei];
    if (is_zero_vec(e.edge_slope[ei])) continue;  // contracted by the map
    Int m = content(e.edge_slope[ei]);
    ZVec p = e.edge_slope[ei];
    for (auto& x : p) x /= m;
    Seg sg;
    sg.weight = m.get_si();
    if (!ed.len.inf) {
      sg.p = *e.vertex_pos[ed.a];
      sg.dir = p;
      sg.len = ed.len.q * Rat(m);
    } else {
      int fin = !e.span.pos[ed.a].is_p1 ? ed.a : ed.b;
      sg.p = *e.vertex_pos[fin];
      sg.dir = p;
      if (fin != ed.a)
        for (auto& x : sg.dir) x = -x;
      sg.unbounded = true;
    }
    e.image.push_back(sg);
  }
  return e;
}

// Image point of b(u) read off the span, not by evaluating the map.
inline std::vector<Rat> point_position(const TropEmbedding& e,
                                       const RationalMapData& d, const P1& u) {
  if (e.full_line) {
    if (u.inf) throw InputError("position of a puncture");
    int fin = -1;
    for (size_t k = 0; k < d.z.size(); ++k)
      if (!d.z[k].inf) fin = static_cast<int>(k);
    Rat r0 = require_valuation(s_sub(u.z, d.z[fin].z), "probe position");
    std::vector<Rat> out = e.base;
    for (long i = 0; i < d.n; ++i) out[i] += (r0 - 1) * Rat(e.line_dir[i]);
    return out;
  }
  AttachResult att = attach_point(e.span, e.zpts, u);
  if (att.vertex >= 0) {
    if (!e.vertex_pos[att.vertex])
      throw MathError("Internal", "probe attached at a puncture");
    return *e.vertex_pos[att.vertex];
  }
  const auto& ed = e.span.tree.edges[att.edge];
  if (att.offset.inf || !e.vertex_pos[ed.a])
    throw MathError("Internal", "probe attached from an unbounded end");
  std::vector<Rat> out = *e.vertex_pos[ed.a];
  for (long i = 0; i < d.n; ++i)
    out[i] += att.offset.q * Rat(e.edge_slope[att.edge][i]);
  return out;
}

// Deterministic probe set: one point held at each branch vertex, one inside
// each puncture's edge.
inline std::vector<P1> standard_probes(const RationalMapData& d,
                                       const TropEmbedding& e) {
  std::vector<P1> out;
  if (e.full_line) {
    int fin = -1;
    for (size_t k = 0; k < d.z.size(); ++k)
      if (!d.z[k].inf) fin = static_cast<int>(k);
    const Series& c = d.z[fin].z;
    for (long w : {2, 0, -3})
      out.push_back(P1::of(s_add(c, t_pow(Rat(w), c.fld.d))));
    return out;
  }
  for (size_t vi = 0; vi < e.span.tree.vertices.size(); ++vi) {
    if (e.span.pos[vi].is_p1) continue;
    const Disk& dk = e.span.pos[vi].d;
    out.push_back(P1::of(detail::fresh_probe(d.z, dk.c, dk.r)));
  }
  for (size_t k = 0; k < d.z.size(); ++k) {
    int leaf = e.span.at[k];
    int parent = -1;
    for (const auto& ed : e.span.tree.edges) {
      if (ed.b == leaf) {
        parent = ed.a;
        break;
      }
      if (ed.a == leaf) {
        parent = ed.b;
        break;
      }
    }
    if (parent < 0 || e.span.pos[parent].is_p1) continue;
    const Disk& pd = e.span.pos[parent].d;
    if (d.z[k].inf)
      out.push_back(P1::of(detail::fresh_probe(d.z, pd.c, pd.r - 1)));
    else
      out.push_back(P1::of(detail::fresh_probe(d.z, d.z[k].z, pd.r + 1)));
  }
  return out;
}

// Difference identity between direct evaluation and the span prediction; the
// translation cancels on both sides.
inline bool sample_check(const TropEmbedding& e, const RationalMapData& d,
                         const P1& a, const P1& b) {
  if (a.inf || b.inf) throw InputError("sample probes must be finite");
  std::vector<Rat> va = eval_valuation(d, a.z);
  std::vector<Rat> vb = eval_valuation(d, b.z);
  std::vector<Rat> pa = point_position(e, d, a);
  std::vector<Rat> pb = point_position(e, d, b);
  for (long i = 0; i < d.n; ++i)
    if (va[i] - vb[i] != pa[i] - pb[i]) return false;
  return true;
}

inline bool sample_check(const TropEmbedding& e, const RationalMapData& d,
                         const std::vector<P1>& probes) {
  for (size_t i = 1; i < probes.size(); ++i)
    if (!sample_check(e, d, probes[0], probes[i])) return false;
  return true;
}

inline bool sample_check(const TropEmbedding& e, const RationalMapData& d) {
  return sample_check(e, d, standard_probes(d, e));
}

struct Genus0Lift {
  RationalMapData map;
  MetricTree tree;  // the curve's metric tree, vertex ids preserved
  RealizeResult realization;
};

inline Genus0Lift lift_genus0(const ZTCurve& c) {
  ValidationReport rep = validate(c);
  if (!rep.ok) {
    std::string msg = "invalid curve";
    for (const auto& p : rep.problems) msg += "; " + p;
    throw InputError(msg);
  }
  if (genus(c) != 0) throw InputError("tree parameterization of a curve with a cycle");

  Genus0Lift out;
  out.map.n = c.n;
  out.tree = curve_tree(c);
  out.realization = realize_tree(out.tree);

  std::vector<int> bidx;
  for (size_t vi = 0; vi < c.vertices.size(); ++vi)
    if (c.vertices[vi].boundary) bidx.push_back(static_cast<int>(vi));
  if (bidx.size() < 2)
    throw InputError("curve needs at least two unbounded edges to parameterize");

  for (int vi : bidx) {
    const BTPoint& pt =
        out.realization.vertex_pos[out.tree.index(c.vertices[vi].id)];
    if (pt.is_p1) {
      out.map.leaf_ids.push_back(c.vertices[vi].id);
      out.map.z.push_back(pt.p);
    } else {
      throw MathError("Internal", "boundary vertex realized at a branch point");
    }
  }

  auto adj = c.adjacency();
  out.map.zplus.assign(c.n, {});
  out.map.zminus.assign(c.n, {});
  ZVec total(c.n, Int(0));
  for (size_t k = 0; k < bidx.size(); ++k) {
    int vi = bidx[k];
    assert(adj[vi].size() == 1);
    auto [eidx, wi] = adj[vi][0];
    ZVec sigma = c.dir_from(eidx, wi);  // outward, at the internal end
    for (long i = 0; i < c.n; ++i) {
      sigma[i] *= c.edges[eidx].mult;
      total[i] += sigma[i];
    }
    if (out.map.z[k].inf) continue;  // implicit orders
    for (long i = 0; i < c.n; ++i) {
      long s = sigma[i].get_si();
      for (long rep2 = 0; rep2 < (s > 0 ? s : -s); ++rep2) {
        if (s > 0)
          out.map.zplus[i].push_back(static_cast<int>(k));
        else
          out.map.zminus[i].push_back(static_cast<int>(k));
      }
    }
  }
  if (!is_zero_vec(total))
    throw MathError("Internal", "ray slopes do not balance");

  std::map<int, std::vector<Rat>> pos = positions(c);
  int anchor = -1;
  for (size_t vi = 0; vi < c.vertices.size(); ++vi)
    if (!c.vertices[vi].boundary && pos.count(c.vertices[vi].id)) {
      anchor = static_cast<int>(vi);
      break;
    }
  if (anchor < 0) throw InputError("curve has no placed internal vertex");
  const BTPoint& apt =
      out.realization.vertex_pos[out.tree.index(c.vertices[anchor].id)];
  assert(!apt.is_p1);
  Series u0 = detail::fresh_probe(out.map.z, apt.d.c, apt.d.r);
  std::vector<Rat> v0 = eval_valuation(out.map, u0);
  const std::vector<Rat>& ac = pos.at(c.vertices[anchor].id);
  out.map.tau.resize(c.n);
  for (long i = 0; i < c.n; ++i) out.map.tau[i] = ac[i] - v0[i];
  return out;
}

}  // namespace troplift
