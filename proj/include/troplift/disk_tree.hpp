#pragma once
// Tree of valuation disks over the series field: distances, spans of point
// sets, attachment points, medians, and realization of abstract metric trees
// as sets of P^1 points and disks.

#include <algorithm>
#include <cassert>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "troplift/series.hpp"

namespace troplift {

// The disk {x : v(x - c) >= r}; stands for the lattice class spanned by
// (c, 1) and (t^r, 0). Equal iff radii agree and centers agree to radius r.
struct Disk {
  Series c;
  Rat r;
};

struct BTPoint {
  bool is_p1 = true;
  P1 p;
  Disk d;
  static BTPoint point(P1 q) {
    BTPoint b;
    b.is_p1 = true;
    b.p = std::move(q);
    return b;
  }
  static BTPoint lattice(Series c, Rat r) {
    BTPoint b;
    b.is_p1 = false;
    b.d.c = std::move(c);
    b.d.r = std::move(r);
    return b;
  }
};

inline Rat bt_distance(const Disk& a, const Disk& b) {
  Val m = valuation(s_sub(a.c, b.c));
  if (m.kind == Val::kUnknown)
    throw PrecisionError("disk distance: center difference below truncation");
  Rat lo = std::min(a.r, b.r);
  if (m.kind == Val::kInf || m.v >= lo) return abs(a.r - b.r);
  return a.r + b.r - 2 * m.v;
}

inline bool disk_eq(const Disk& a, const Disk& b) {
  if (a.r != b.r) return false;
  Cmp3 s = val_geq(s_sub(a.c, b.c), a.r);
  if (s == Cmp3::kUnknown)
    throw PrecisionError("disk equality: center difference below truncation");
  return s == Cmp3::kYes;
}

struct MetricTree {
  struct Vertex {
    int id = 0;
    bool leaf = false;
  };
  struct Edge {
    int a = 0;
    int b = 0;
    XRat len;
  };
  std::vector<Vertex> vertices;
  std::vector<Edge> edges;
  std::vector<int> marked;  // ids; kept through smoothing, drive realization

  int index(int id) const {
    for (size_t i = 0; i < vertices.size(); ++i)
      if (vertices[i].id == id) return static_cast<int>(i);
    throw InputError("tree: unknown vertex id");
  }
  // vertex index -> list of (edge index, neighbor vertex index), in edge order
  std::vector<std::vector<std::pair<int, int>>> adjacency() const {
    std::vector<std::vector<std::pair<int, int>>> adj(vertices.size());
    for (size_t e = 0; e < edges.size(); ++e) {
      int ai = index(edges[e].a), bi = index(edges[e].b);
      adj[ai].push_back({static_cast<int>(e), bi});
      adj[bi].push_back({static_cast<int>(e), ai});
    }
    return adj;
  }
  std::vector<int> leaf_indices() const {
    std::vector<int> out;
    for (size_t i = 0; i < vertices.size(); ++i)
      if (vertices[i].leaf) out.push_back(static_cast<int>(i));
    return out;
  }
};

inline void validate_tree(const MetricTree& t) {
  std::set<int> ids;
  for (const auto& v : t.vertices)
    if (!ids.insert(v.id).second) throw InputError("tree: duplicate vertex id");
  if (t.vertices.empty()) throw InputError("tree: empty");
  auto adj = t.adjacency();
  if (t.edges.size() + 1 != t.vertices.size())
    throw InputError("tree: edge count does not match a tree");
  std::vector<char> seen(t.vertices.size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (auto [e, w] : adj[v])
      if (!seen[w]) {
        seen[w] = 1;
        stack.push_back(w);
      }
  }
  for (char s : seen)
    if (!s) throw InputError("tree: not connected");
  for (const auto& e : t.edges) {
    if (!e.len.inf && e.len.q <= 0) throw InputError("tree: nonpositive edge length");
    if (e.len.inf) {
      bool leaf_end = t.vertices[t.index(e.a)].leaf || t.vertices[t.index(e.b)].leaf;
      if (!leaf_end) throw InputError("tree: unbounded edge between internal vertices");
    }
  }
  for (size_t i = 0; i < t.vertices.size(); ++i) {
    size_t deg = adj[i].size();
    bool should = t.vertices.size() == 1 ? true : deg == 1;
    if (t.vertices[i].leaf != should) throw InputError("tree: leaf flag does not match degree");
  }
  for (int m : t.marked) t.index(m);
}

inline nlohmann::ordered_json tree_to_json(const MetricTree& t) {
  nlohmann::ordered_json j;
  j["vertices"] = nlohmann::ordered_json::array();
  for (const auto& v : t.vertices) j["vertices"].push_back({{"id", v.id}, {"leaf", v.leaf}});
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : t.edges)
    j["edges"].push_back({{"a", e.a}, {"b", e.b}, {"length", format_xrat(e.len)}});
  if (!t.marked.empty()) j["marked"] = t.marked;
  return j;
}

inline MetricTree tree_from_json(const nlohmann::json& j) {
  MetricTree t;
  try {
    for (const auto& v : j.at("vertices"))
      t.vertices.push_back({v.at("id").get<int>(), v.at("leaf").get<bool>()});
    for (const auto& e : j.at("edges"))
      t.edges.push_back({e.at("a").get<int>(), e.at("b").get<int>(),
                         parse_xrat(e.at("length").get<std::string>())});
    if (j.contains("marked"))
      for (const auto& m : j.at("marked")) t.marked.push_back(m.get<int>());
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(std::string("tree json: ") + ex.what());
  }
  validate_tree(t);
  return t;
}

// Suppresses degree-2 vertices (except kept ids), merging the incident edges.
inline MetricTree smoothed(const MetricTree& t, const std::set<int>& keep_ids = {}) {
  MetricTree cur = t;
  for (;;) {
    auto adj = cur.adjacency();
    int victim = -1;
    for (size_t i = 0; i < cur.vertices.size(); ++i)
      if (adj[i].size() == 2 && !keep_ids.count(cur.vertices[i].id)) {
        victim = static_cast<int>(i);
        break;
      }
    if (victim < 0) return cur;
    auto [e1, n1] = adj[victim][0];
    auto [e2, n2] = adj[victim][1];
    MetricTree next;
    next.marked = cur.marked;
    for (size_t i = 0; i < cur.vertices.size(); ++i)
      if (static_cast<int>(i) != victim) next.vertices.push_back(cur.vertices[i]);
    for (size_t e = 0; e < cur.edges.size(); ++e)
      if (static_cast<int>(e) != e1 && static_cast<int>(e) != e2)
        next.edges.push_back(cur.edges[e]);
    next.edges.push_back({cur.vertices[n1].id, cur.vertices[n2].id,
                          cur.edges[e1].len + cur.edges[e2].len});
    cur = std::move(next);
  }
}

// Pairwise distances between the given vertices, with every unbounded edge
// replaced by ray_len per leaf end (a leaf-leaf unbounded edge counts twice).
inline std::vector<std::vector<Rat>> dist_matrix(const MetricTree& t,
                                                 const std::vector<int>& vertex_ids,
                                                 const Rat& ray_len = Rat(1)) {
  MetricTree ft = t;
  for (auto& e : ft.edges)
    if (e.len.inf) {
      int ends = (ft.vertices[ft.index(e.a)].leaf ? 1 : 0) +
                 (ft.vertices[ft.index(e.b)].leaf ? 1 : 0);
      e.len = XRat(ray_len * ends);
    }
  auto adj = ft.adjacency();
  std::vector<std::vector<Rat>> out;
  for (int id : vertex_ids) {
    int src = ft.index(id);
    std::vector<Rat> dist(ft.vertices.size(), Rat(-1));
    dist[src] = 0;
    std::vector<int> stack{src};
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (auto [e, w] : adj[v])
        if (dist[w] < 0) {
          dist[w] = dist[v] + ft.edges[e].len.q;
          stack.push_back(w);
        }
    }
    std::vector<Rat> row;
    for (int jd : vertex_ids) row.push_back(dist[ft.index(jd)]);
    out.push_back(std::move(row));
  }
  return out;
}

namespace detail {

struct Ent {
  Series c;
  XRat depth;  // +inf for P^1 points
  int idx;
};

// Radius at which the vertical paths of the two entities merge.
inline Rat ent_meet(const Ent& a, const Ent& b) {
  Val m = valuation(s_sub(a.c, b.c));
  if (m.kind == Val::kUnknown)
    throw PrecisionError("span: pairwise position below truncation");
  XRat mm = xr_min(a.depth, b.depth);
  if (m.kind != Val::kInf) mm = xr_min(mm, XRat(m.v));
  assert(!mm.inf);
  return mm.q;
}

}  // namespace detail

struct SpanResult {
  MetricTree tree;             // vertex ids equal vertex indices
  std::vector<BTPoint> pos;    // by vertex index
  std::vector<int> at;         // input index -> vertex index
  int root = -1;               // topmost finite vertex, -1 if none
};

namespace detail {

struct SpanBuilder {
  SpanResult* out;

  int new_vertex(BTPoint p) {
    int idx = static_cast<int>(out->tree.vertices.size());
    out->tree.vertices.push_back({idx, false});
    out->pos.push_back(std::move(p));
    return idx;
  }

  std::pair<int, XRat> build(const std::vector<Ent>& s) {
    if (s.size() == 1) {
      const Ent& e = s[0];
      BTPoint p = e.depth.inf ? BTPoint::point(P1::of(e.c))
                              : BTPoint::lattice(e.c, e.depth.q);
      int v = new_vertex(std::move(p));
      out->at[e.idx] = v;
      return {v, e.depth};
    }
    Rat rstar;
    bool first = true;
    for (size_t i = 0; i < s.size(); ++i)
      for (size_t j = i + 1; j < s.size(); ++j) {
        Rat m = ent_meet(s[i], s[j]);
        if (first || m < rstar) rstar = m;
        first = false;
      }
    int rv = new_vertex(BTPoint::lattice(s[0].c, rstar));
    std::vector<std::vector<Ent>> classes;
    for (const auto& e : s) {
      if (!e.depth.inf && e.depth.q == rstar) {
        // This entity is the branch disk itself.
        assert(out->at[e.idx] < 0);
        out->at[e.idx] = rv;
        continue;
      }
      bool placed = false;
      for (auto& cl : classes) {
        Val m = valuation(s_sub(cl[0].c, e.c));
        if (m.kind == Val::kUnknown)
          throw PrecisionError("span: pairwise position below truncation");
        if (m.kind == Val::kInf || m.v > rstar) {
          cl.push_back(e);
          placed = true;
          break;
        }
        assert(m.v >= rstar);
      }
      if (!placed) classes.push_back({e});
    }
    for (const auto& cl : classes) {
      auto [cv, crad] = build(cl);
      out->tree.edges.push_back({rv, cv, crad - rstar});
    }
    return {rv, XRat(rstar)};
  }
};

}  // namespace detail

inline void check_pairwise_distinct(const std::vector<BTPoint>& z) {
  for (size_t i = 0; i < z.size(); ++i)
    for (size_t j = i + 1; j < z.size(); ++j) {
      const BTPoint &a = z[i], &b = z[j];
      if (a.is_p1 != b.is_p1) continue;
      if (a.is_p1) {
        if (a.p.inf || b.p.inf) {
          if (a.p.inf && b.p.inf) throw InputError("coincident points");
          continue;
        }
        Val m = valuation(s_sub(a.p.z, b.p.z));
        if (m.kind == Val::kUnknown)
          throw PrecisionError("coincidence check below truncation");
        if (m.kind == Val::kInf) throw InputError("coincident points");
      } else {
        if (disk_eq(a.d, b.d)) throw InputError("coincident points");
      }
    }
}

inline SpanResult span_tree(const std::vector<BTPoint>& z) {
  if (z.empty()) throw InputError("span of empty set");
  check_pairwise_distinct(z);
  SpanResult out;
  out.at.assign(z.size(), -1);
  std::vector<detail::Ent> ents;
  int inf_idx = -1;
  for (size_t i = 0; i < z.size(); ++i) {
    if (z[i].is_p1 && z[i].p.inf) {
      inf_idx = static_cast<int>(i);
      continue;
    }
    detail::Ent e;
    if (z[i].is_p1) {
      e.c = z[i].p.z;
      e.depth = XRat::infinity();
    } else {
      e.c = z[i].d.c;
      e.depth = XRat(z[i].d.r);
    }
    e.idx = static_cast<int>(i);
    ents.push_back(std::move(e));
  }
  detail::SpanBuilder sb{&out};
  if (!ents.empty()) {
    auto [rv, rad] = sb.build(ents);
    out.root = rv;
    // The leaf case returns a P^1 vertex only when a single finite point was
    // given; the topmost finite vertex may then be that leaf.
  }
  if (inf_idx >= 0) {
    int iv = sb.new_vertex(BTPoint::point(P1::infinity()));
    out.at[inf_idx] = iv;
    if (out.root >= 0) out.tree.edges.push_back({out.root, iv, XRat::infinity()});
  }
  for (int a : out.at) {
    (void)a;
    assert(a >= 0);
  }
  auto adj = out.tree.adjacency();
  for (size_t i = 0; i < out.tree.vertices.size(); ++i)
    out.tree.vertices[i].leaf = out.tree.vertices.size() == 1 || adj[i].size() == 1;
  return out;
}

struct AttachResult {
  Disk b;
  int vertex = -1;  // vertex index when b sits at a tree vertex
  int edge = -1;    // host edge index otherwise
  XRat offset;      // distance from the edge's a endpoint; inf when a is a P^1 leaf
};

inline AttachResult attach_point(const SpanResult& s, const std::vector<BTPoint>& z,
                                 const P1& u) {
  AttachResult res;
  if (u.inf) {
    for (const auto& p : z)
      if (p.is_p1 && p.p.inf) throw InputError("attach point already in the set");
    if (s.root < 0) throw InputError("attach at infinity needs a finite point in the set");
    res.b = s.pos[s.root].d;
    res.vertex = s.root;
    return res;
  }
  bool first = true;
  Rat r;
  for (const auto& p : z) {
    if (p.is_p1 && p.p.inf) continue;
    detail::Ent eu{u.z, XRat::infinity(), 0};
    detail::Ent ez;
    if (p.is_p1) {
      ez = {p.p.z, XRat::infinity(), 1};
      Val m = valuation(s_sub(u.z, p.p.z));
      if (m.kind == Val::kUnknown)
        throw PrecisionError("attach: position below truncation");
      if (m.kind == Val::kInf) throw InputError("attach point already in the set");
    } else {
      ez = {p.d.c, XRat(p.d.r), 1};
    }
    Rat m = detail::ent_meet(eu, ez);
    if (first || m > r) r = m;
    first = false;
  }
  if (first) throw InputError("attach needs a finite point in the set");
  bool has_inf_pt = false;
  for (const auto& p : z) has_inf_pt = has_inf_pt || (p.is_p1 && p.p.inf);
  if (!has_inf_pt && s.root >= 0) {
    const BTPoint& rp = s.pos[s.root];
    if (rp.is_p1) throw InputError("attach: span is a single point of P^1");
    // The end toward u climbs over the top of the span and attaches at its
    // topmost point.
    if (r < rp.d.r) {
      res.b = rp.d;
      res.vertex = s.root;
      return res;
    }
  }
  res.b.c = u.z;
  res.b.r = r;
  for (size_t i = 0; i < s.tree.vertices.size(); ++i) {
    if (s.pos[i].is_p1) continue;
    if (disk_eq(res.b, s.pos[i].d)) {
      res.vertex = static_cast<int>(i);
      return res;
    }
  }
  for (size_t e = 0; e < s.tree.edges.size(); ++e) {
    int ai = s.tree.edges[e].a, bi = s.tree.edges[e].b;
    const BTPoint &pa = s.pos[ai], &pb = s.pos[bi];
    if (!pa.is_p1 && !pb.is_p1) {
      Rat ra = pa.d.r, rb = pb.d.r;
      if (!(ra < res.b.r && res.b.r < rb)) continue;
      Cmp3 c = val_geq(s_sub(u.z, pb.d.c), res.b.r);
      if (c == Cmp3::kUnknown) throw PrecisionError("attach: position below truncation");
      if (c != Cmp3::kYes) continue;
    } else if (!pa.is_p1 && pb.is_p1) {
      if (pb.p.inf) {
        if (!(res.b.r < pa.d.r)) continue;
        Cmp3 c = val_geq(s_sub(u.z, pa.d.c), res.b.r);
        if (c == Cmp3::kUnknown) throw PrecisionError("attach: position below truncation");
        if (c != Cmp3::kYes) continue;
      } else {
        if (!(res.b.r > pa.d.r)) continue;
        Cmp3 c = val_geq(s_sub(u.z, pb.p.z), res.b.r);
        if (c == Cmp3::kUnknown) throw PrecisionError("attach: position below truncation");
        if (c != Cmp3::kYes) continue;
      }
    } else {
      // Both ends in P^1: the span is a single doubly unbounded edge.
      const P1& fin = pa.p.inf ? pb.p : pa.p;
      if (pa.p.inf && pb.p.inf) throw MathError("Internal", "degenerate span");
      Cmp3 c = val_geq(s_sub(u.z, fin.z), res.b.r);
      if (c == Cmp3::kUnknown) throw PrecisionError("attach: position below truncation");
      if (c != Cmp3::kYes) continue;
    }
    res.edge = static_cast<int>(e);
    res.offset = pa.is_p1 ? XRat::infinity() : XRat(abs(res.b.r - pa.d.r));
    return res;
  }
  throw MathError("Internal", "attach point not located on the span");
}

inline AttachResult attach_point(const std::vector<BTPoint>& z, const P1& u) {
  SpanResult s = span_tree(z);
  return attach_point(s, z, u);
}

// ---- medians and the signed-overlap oracle ----

// Meet radius of the vertical paths of two distinct P^1 points; nullopt when
// one of them is infinity (the paths only merge arbitrarily far up).
inline std::optional<Rat> p1_meet(const P1& a, const P1& b) {
  if (a.inf && b.inf) throw InputError("coincident points");
  if (a.inf || b.inf) return std::nullopt;
  Val m = valuation(s_sub(a.z, b.z));
  if (m.kind == Val::kUnknown) throw PrecisionError("meet below truncation");
  if (m.kind == Val::kInf) throw InputError("coincident points");
  return m.v;
}

// The unique point lying on all three pairwise segments.
inline Disk bt_median(const P1& a, const P1& b, const P1& c) {
  std::optional<Rat> m[3] = {p1_meet(a, b), p1_meet(a, c), p1_meet(b, c)};
  const P1* pts[3][2] = {{&a, &b}, {&a, &c}, {&b, &c}};
  int best = -1;
  for (int i = 0; i < 3; ++i) {
    if (!m[i]) continue;
    if (best < 0 || *m[i] > *m[best]) best = i;
  }
  assert(best >= 0);
  Disk d;
  d.c = pts[best][0]->inf ? pts[best][1]->z : pts[best][0]->z;
  d.r = *m[best];
  return d;
}

// Signed length of [w,x] n [y,z]; positive when the overlap is traversed in
// the w->x direction.
inline Rat signed_overlap(const P1& w, const P1& x, const P1& y, const P1& z) {
  Disk a = bt_median(w, x, y);
  Disk b = bt_median(w, x, z);
  if (disk_eq(a, b)) return Rat(0);
  Rat len = bt_distance(a, b);
  auto key = [&](const Disk& d) -> std::pair<int, Rat> {
    if (!w.inf) {
      Cmp3 s = val_geq(s_sub(w.z, d.c), d.r);
      if (s == Cmp3::kUnknown) throw PrecisionError("overlap: side below truncation");
      if (s == Cmp3::kYes) return {0, -d.r};
    }
    return {1, d.r};
  };
  return key(a) < key(b) ? len : -len;
}

// Independent tree-side computation of the two cross-ratio valuations.
inline CrossRatioVal tree_cross_ratio(const P1& w, const P1& x, const P1& y, const P1& z) {
  const P1* pts[4] = {&w, &x, &y, &z};
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) (void)p1_meet(*pts[i], *pts[j]);
  CrossRatioVal r;
  r.v_c = signed_overlap(w, x, y, z);
  r.v_c_minus_1 = signed_overlap(w, y, x, z);
  return r;
}

// ---- realization ----

struct RealizeResult {
  std::vector<BTPoint> leaves;      // in the tree's leaf order
  std::vector<BTPoint> marked;      // in the tree's marked order
  std::vector<BTPoint> vertex_pos;  // by vertex index
};

namespace detail {

inline Series ray_value(const Series& c, const Rat& alpha, const Rat& r) {
  return s_add(c, s_monomial(nf_from_q(alpha, 1), r));
}

}  // namespace detail

// Produces points of P^1 (for leaves on unbounded edges) and disks (all other
// vertices) whose span is isometric to the input tree, leaf for leaf.
inline RealizeResult realize_tree(const MetricTree& t) {
  validate_tree(t);
  RealizeResult out;
  size_t n = t.vertices.size();
  out.vertex_pos.resize(n);
  auto adj = t.adjacency();
  auto leaves = t.leaf_indices();

  auto finish = [&]() {
    for (int li : leaves) out.leaves.push_back(out.vertex_pos[li]);
    for (int m : t.marked) out.marked.push_back(out.vertex_pos[t.index(m)]);
    return out;
  };

  if (n == 1) {
    out.vertex_pos[0] = BTPoint::lattice(s_zero(), Rat(0));
    return finish();
  }

  // Path from a to b as a set of edge indices.
  auto path_edges = [&](int a, int b) {
    std::vector<int> par_edge(n, -1), par(n, -1);
    std::vector<int> stack{a};
    std::vector<char> seen(n, 0);
    seen[a] = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (auto [e, w] : adj[v])
        if (!seen[w]) {
          seen[w] = 1;
          par[w] = v;
          par_edge[w] = e;
          stack.push_back(w);
        }
    }
    std::set<int> es;
    for (int v = b; v != a; v = par[v]) es.insert(par_edge[v]);
    return es;
  };

  // Descends from a root vertex at disk (0, 0); edges in zero_path keep the
  // center, every other child direction takes a fresh power-of-two residue.
  auto descend = [&](int root, const std::set<int>& zero_path, int skip_edge) {
    out.vertex_pos[root] = BTPoint::lattice(s_zero(), Rat(0));
    std::vector<std::pair<int, int>> stack{{root, -1}};
    while (!stack.empty()) {
      auto [v, from_edge] = stack.back();
      stack.pop_back();
      assert(!out.vertex_pos[v].is_p1 || adj[v].size() <= 1);
      const Disk& here = out.vertex_pos[v].d;
      Rat alpha = 1;
      for (auto [e, w] : adj[v]) {
        if (e == from_edge || e == skip_edge) continue;
        Rat a;
        if (zero_path.count(e)) {
          a = 0;
        } else {
          a = alpha;
          alpha *= 2;
        }
        Series cw = detail::ray_value(here.c, a, here.r);
        if (t.edges[e].len.inf) {
          assert(t.vertices[w].leaf);
          out.vertex_pos[w] = BTPoint::point(P1::of(cw));
        } else {
          out.vertex_pos[w] = BTPoint::lattice(cw, here.r + t.edges[e].len.q);
          stack.push_back({w, e});
        }
      }
    }
  };

  if (!t.marked.empty()) {
    int root = t.index(t.marked[0]);
    std::set<int> zero;
    if (t.marked.size() >= 2) zero = path_edges(root, t.index(t.marked[1]));
    descend(root, zero, -1);
    return finish();
  }

  if (leaves.size() == 2) {
    // Plain path: walk it, placing everything on the center line.
    std::vector<int> order{leaves[0]};
    std::vector<char> seen(n, 0);
    seen[leaves[0]] = 1;
    while (order.size() < n) {
      int v = order.back();
      for (auto [e, w] : adj[v])
        if (!seen[w]) {
          seen[w] = 1;
          order.push_back(w);
          break;
        }
    }
    bool lo_inf = t.edges[adj[leaves[0]][0].first].len.inf;
    bool hi_inf = t.edges[adj[leaves[1]][0].first].len.inf;
    if (n == 2) {
      if (lo_inf) {
        out.vertex_pos[leaves[0]] = BTPoint::point(P1::of(s_zero()));
        out.vertex_pos[leaves[1]] = hi_inf ? BTPoint::point(P1::infinity())
                                           : BTPoint::lattice(s_zero(), Rat(0));
      } else {
        out.vertex_pos[leaves[0]] = BTPoint::lattice(s_zero(), Rat(0));
        out.vertex_pos[leaves[1]] =
            hi_inf ? BTPoint::point(P1::of(s_zero()))
                   : BTPoint::lattice(s_zero(), t.edges[0].len.q);
      }
      return finish();
    }
    // Interior vertices exist; anchor by cumulative position along the path.
    {
      std::vector<XRat> step(order.size() - 1);
      for (size_t i = 0; i + 1 < order.size(); ++i) {
        for (auto [e, w] : adj[order[i]])
          if (w == order[i + 1]) step[i] = t.edges[e].len;
      }
      if (lo_inf) {
        out.vertex_pos[order[0]] = BTPoint::point(P1::of(s_zero()));
        Rat r = 0;
        for (size_t i = 1; i < order.size(); ++i) {
          if (i == order.size() - 1) {
            if (hi_inf)
              out.vertex_pos[order[i]] = BTPoint::point(P1::infinity());
            else
              out.vertex_pos[order[i]] = BTPoint::lattice(s_zero(), r);
          } else {
            out.vertex_pos[order[i]] = BTPoint::lattice(s_zero(), r);
            if (!step[i].inf) r = r - step[i].q;
          }
        }
      } else {
        Rat r = 0;
        for (size_t i = 0; i < order.size(); ++i) {
          if (i + 1 == order.size() && hi_inf) {
            out.vertex_pos[order[i]] = BTPoint::point(P1::of(s_zero()));
          } else {
            out.vertex_pos[order[i]] = BTPoint::lattice(s_zero(), r);
            if (i + 1 < order.size() && !step[i].inf) r = r + step[i].q;
          }
        }
      }
    }
    return finish();
  }

  // Three or more leaves. If some leaf edge is unbounded, route that leaf's
  // ray through an elbow one unit above its attachment vertex, so spans of
  // the produced points need no point at infinity.
  int star = -1;
  for (int li : leaves)
    if (t.edges[adj[li][0].first].len.inf) {
      star = li;
      break;
    }
  if (star >= 0) {
    auto [se, sv] = adj[star][0];
    descend(sv, {}, se);
    out.vertex_pos[star] = BTPoint::point(P1::of(s_monomial(nf_one(1), Rat(-1))));
    return finish();
  }
  descend(leaves[0], {}, -1);
  return finish();
}

}  // namespace troplift
