#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "troplift/disk_tree.hpp"
#include "troplift/embed.hpp"
#include "troplift/errors.hpp"
#include "troplift/linalg.hpp"
#include "troplift/rational.hpp"

namespace troplift {

// Metric graph with a piecewise-integer-affine map to Q^n. Edge directions are
// recorded at the `from` end; displacement along e is len * mult * dir.
struct ZTCurve {
  struct Vertex {
    int id = 0;
    bool boundary = false;
    std::optional<std::vector<Rat>> coords;
  };
  struct Edge {
    int from = 0;
    int to = 0;
    ZVec dir;
    long mult = 1;
    XRat len;
  };

  long n = 0;
  std::vector<Vertex> vertices;
  std::vector<Edge> edges;

  int index(int id) const {
    for (size_t i = 0; i < vertices.size(); ++i)
      if (vertices[i].id == id) return static_cast<int>(i);
    throw InputError("unknown vertex id " + std::to_string(id));
  }

  // per vertex index: (edge index, other-endpoint vertex index)
  std::vector<std::vector<std::pair<int, int>>> adjacency() const {
    std::vector<std::vector<std::pair<int, int>>> adj(vertices.size());
    for (size_t e = 0; e < edges.size(); ++e) {
      int a = index(edges[e].from), b = index(edges[e].to);
      adj[a].push_back({static_cast<int>(e), b});
      adj[b].push_back({static_cast<int>(e), a});
    }
    return adj;
  }

  // direction of e leaving the endpoint with vertex index vi
  ZVec dir_from(int e, int vi) const {
    ZVec d = edges[e].dir;
    if (index(edges[e].to) == vi && index(edges[e].from) != vi)
      for (auto& c : d) c = -c;
    return d;
  }
};

inline Rat coord_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_rat(j.get<std::string>());
  if (j.is_number_integer()) return Rat(j.get<long>());
  throw InputError("coordinate must be an integer or a \"p/q\" string");
}

inline ZTCurve curve_from_json(const nlohmann::json& j) {
  ZTCurve c;
  if (!j.is_object() || !j.contains("lattice_rank") || !j.contains("vertices") ||
      !j.contains("edges"))
    throw InputError("curve JSON needs lattice_rank, vertices, edges");
  c.n = j.at("lattice_rank").get<long>();
  if (c.n < 1) throw InputError("lattice_rank must be positive");
  std::set<int> ids;
  for (const auto& vj : j.at("vertices")) {
    ZTCurve::Vertex v;
    v.id = vj.at("id").get<int>();
    if (!ids.insert(v.id).second) throw InputError("duplicate vertex id " + std::to_string(v.id));
    v.boundary = vj.value("boundary", false);
    if (vj.contains("coords") && !vj.at("coords").is_null()) {
      std::vector<Rat> x;
      for (const auto& cj : vj.at("coords")) x.push_back(coord_from_json(cj));
      if (static_cast<long>(x.size()) != c.n)
        throw InputError("coords of vertex " + std::to_string(v.id) + " have wrong length");
      v.coords = std::move(x);
    }
    c.vertices.push_back(std::move(v));
  }
  if (c.vertices.empty()) throw InputError("curve has no vertices");
  for (const auto& ej : j.at("edges")) {
    ZTCurve::Edge e;
    e.from = ej.at("from").get<int>();
    e.to = ej.at("to").get<int>();
    c.index(e.from);
    c.index(e.to);
    e.dir.clear();
    for (const auto& dj : ej.at("direction")) e.dir.push_back(Int(dj.get<long>()));
    if (static_cast<long>(e.dir.size()) != c.n)
      throw InputError("edge direction has wrong length");
    e.mult = ej.value("multiplicity", 1L);
    if (e.mult < 1) throw InputError("edge multiplicity must be >= 1");
    const auto& lj = ej.at("length");
    e.len = lj.is_string() ? parse_xrat(lj.get<std::string>()) : XRat(Rat(lj.get<long>()));
    if (e.len.is_finite() && !(e.len.q > 0)) throw InputError("edge length must be positive");
    c.edges.push_back(std::move(e));
  }
  bool anchored = false;
  for (const auto& v : c.vertices) anchored = anchored || v.coords.has_value();
  if (!anchored) throw InputError("no vertex carries coordinates");
  return c;
}

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> problems;

  void fail(const std::string& p) {
    ok = false;
    problems.push_back(p);
  }
};

namespace detail {

inline std::vector<long> vertex_degrees(const ZTCurve& c) {
  std::vector<long> deg(c.vertices.size(), 0);
  for (const auto& e : c.edges) {
    deg[c.index(e.from)] += 1;
    deg[c.index(e.to)] += 1;
  }
  return deg;
}

}  // namespace detail

// Positions of the non-boundary vertices, propagated from the anchored vertex
// across finite edges. Inconsistencies surface in validate(), not here.
inline std::map<int, std::vector<Rat>> positions(const ZTCurve& c) {
  int start = -1;
  for (size_t i = 0; i < c.vertices.size(); ++i)
    if (c.vertices[i].coords) {
      start = static_cast<int>(i);
      break;
    }
  if (start < 0) throw InputError("no vertex carries coordinates");
  auto adj = c.adjacency();
  std::map<int, std::vector<Rat>> pos;
  std::vector<char> seen(c.vertices.size(), 0);
  std::queue<int> bfs;
  pos[c.vertices[start].id] = *c.vertices[start].coords;
  seen[start] = 1;
  bfs.push(start);
  while (!bfs.empty()) {
    int vi = bfs.front();
    bfs.pop();
    const auto& here = pos.at(c.vertices[vi].id);
    for (auto [e, wi] : adj[vi]) {
      if (seen[wi] || !c.edges[e].len.is_finite()) continue;
      ZVec d = c.dir_from(e, vi);
      std::vector<Rat> next(here);
      Rat step = c.edges[e].len.q * Rat(c.edges[e].mult);
      for (long k = 0; k < c.n; ++k) next[k] += step * Rat(d[k]);
      pos[c.vertices[wi].id] = std::move(next);
      seen[wi] = 1;
      bfs.push(wi);
    }
  }
  return pos;
}

inline ValidationReport validate(const ZTCurve& c) {
  ValidationReport rep;
  auto adj = c.adjacency();
  auto deg = detail::vertex_degrees(c);

  for (size_t e = 0; e < c.edges.size(); ++e) {
    const auto& ed = c.edges[e];
    if (!is_zero_vec(ed.dir) && content(ed.dir) != 1)
      rep.fail("edge " + std::to_string(e) + " direction is not primitive");
    bool from_b = c.vertices[c.index(ed.from)].boundary;
    bool to_b = c.vertices[c.index(ed.to)].boundary;
    if (!ed.len.is_finite() && !from_b && !to_b)
      rep.fail("edge " + std::to_string(e) + " is unbounded but touches no boundary vertex");
    if (ed.len.is_finite() && (from_b || to_b))
      rep.fail("edge " + std::to_string(e) + " is bounded but touches a boundary vertex");
    if (!ed.len.is_finite() && is_zero_vec(ed.dir))
      rep.fail("edge " + std::to_string(e) + " is an unbounded contracted edge");
  }
  for (size_t vi = 0; vi < c.vertices.size(); ++vi) {
    const auto& v = c.vertices[vi];
    if (v.boundary && deg[vi] != 1)
      rep.fail("boundary vertex " + std::to_string(v.id) + " has degree " + std::to_string(deg[vi]));
    if (v.boundary) continue;
    std::vector<Rat> tension(c.n, 0);
    for (auto [e, wi] : adj[vi]) {
      ZVec d = c.edges[e].from == c.edges[e].to ? ZVec(c.n, 0) : c.dir_from(e, vi);
      for (long k = 0; k < c.n; ++k) tension[k] += Rat(c.edges[e].mult) * Rat(d[k]);
    }
    bool zero = true;
    for (const auto& t : tension) zero = zero && t == 0;
    if (!zero) rep.fail("vertex " + std::to_string(v.id) + " is not tension free");
  }

  // connectivity
  if (!c.vertices.empty()) {
    std::vector<char> seen(c.vertices.size(), 0);
    std::queue<int> bfs;
    seen[0] = 1;
    bfs.push(0);
    size_t count = 1;
    while (!bfs.empty()) {
      int vi = bfs.front();
      bfs.pop();
      for (auto [e, wi] : adj[vi])
        if (!seen[wi]) {
          seen[wi] = 1;
          ++count;
          bfs.push(wi);
        }
    }
    if (count != c.vertices.size()) rep.fail("graph is disconnected");
  }

  // coordinate consistency: propagated positions must satisfy every finite
  // edge relation and agree with any explicitly given coords
  if (rep.ok) {
    auto pos = positions(c);
    for (size_t e = 0; e < c.edges.size(); ++e) {
      const auto& ed = c.edges[e];
      if (!ed.len.is_finite()) continue;
      auto itf = pos.find(ed.from);
      auto itt = pos.find(ed.to);
      if (itf == pos.end() || itt == pos.end()) continue;
      Rat step = ed.len.q * Rat(ed.mult);
      for (long k = 0; k < c.n; ++k) {
        if (itt->second[k] - itf->second[k] != step * Rat(ed.dir[k])) {
          rep.fail("edge " + std::to_string(e) + " closes a cycle with nonzero displacement");
          break;
        }
      }
    }
    for (const auto& v : c.vertices) {
      if (!v.coords || !pos.count(v.id)) continue;
      if (*v.coords != pos.at(v.id))
        rep.fail("vertex " + std::to_string(v.id) + " coords disagree with propagation");
    }
  }
  return rep;
}

// first Betti number of the bounded part
inline long genus(const ZTCurve& c) {
  std::vector<int> comp(c.vertices.size(), -1);
  auto adj = c.adjacency();
  int ncomp = 0;
  long nfin = 0;
  for (const auto& e : c.edges)
    if (e.len.is_finite()) ++nfin;
  std::vector<char> internal(c.vertices.size(), 1);
  for (size_t i = 0; i < c.vertices.size(); ++i) internal[i] = !c.vertices[i].boundary;
  for (size_t s = 0; s < c.vertices.size(); ++s) {
    if (!internal[s] || comp[s] >= 0) continue;
    comp[s] = ncomp++;
    std::queue<int> bfs;
    bfs.push(static_cast<int>(s));
    while (!bfs.empty()) {
      int vi = bfs.front();
      bfs.pop();
      for (auto [e, wi] : adj[vi])
        if (c.edges[e].len.is_finite() && internal[wi] && comp[wi] < 0) {
          comp[wi] = comp[vi];
          bfs.push(wi);
        }
    }
  }
  long nint = 0;
  for (size_t i = 0; i < c.vertices.size(); ++i)
    if (internal[i]) ++nint;
  return nfin - nint + ncomp;
}

// outward weighted direction of every unbounded edge, in edge order
inline std::vector<ZVec> degree_data(const ZTCurve& c) {
  std::vector<ZVec> out;
  for (size_t e = 0; e < c.edges.size(); ++e) {
    const auto& ed = c.edges[e];
    if (ed.len.is_finite()) continue;
    bool from_internal = !c.vertices[c.index(ed.from)].boundary;
    ZVec d = ed.dir;
    if (!from_internal)
      for (auto& x : d) x = -x;
    for (auto& x : d) x *= ed.mult;
    out.push_back(std::move(d));
  }
  return out;
}

struct CircuitStep {
  int edge = 0;
  bool forward = true;  // traversed from -> to
};

// The unique cycle of a genus-1 curve as a closed walk. Starts with the
// lowest-index circuit edge traversed forward.
inline std::vector<CircuitStep> circuit(const ZTCurve& c) {
  if (genus(c) != 1) throw InputError("circuit requires a genus-1 curve");
  auto adj = c.adjacency();
  // DFS spanning forest over bounded edges; the first non-tree bounded edge
  // closes the cycle
  std::vector<int> par_edge(c.vertices.size(), -1);
  std::vector<int> par_vertex(c.vertices.size(), -1);
  std::vector<char> seen(c.vertices.size(), 0);
  std::set<int> cycle_edges;
  for (size_t s = 0; s < c.vertices.size() && cycle_edges.empty(); ++s) {
    if (seen[s]) continue;
    std::vector<int> stack = {static_cast<int>(s)};
    seen[s] = 1;
    while (!stack.empty() && cycle_edges.empty()) {
      int vi = stack.back();
      stack.pop_back();
      for (auto [e, wi] : adj[vi]) {
        if (!c.edges[e].len.is_finite()) continue;
        if (!seen[wi]) {
          seen[wi] = 1;
          par_edge[wi] = e;
          par_vertex[wi] = vi;
          stack.push_back(wi);
        } else if (e != par_edge[vi] && e != par_edge[wi]) {
          // walk both endpoints up to their meet
          std::vector<int> pa, pb;
          for (int x = vi; x >= 0; x = par_vertex[x]) pa.push_back(x);
          for (int x = wi; x >= 0; x = par_vertex[x]) pb.push_back(x);
          std::set<int> in_a(pa.begin(), pa.end());
          int meet = wi;
          for (int x : pb)
            if (in_a.count(x)) {
              meet = x;
              break;
            }
          cycle_edges.insert(e);
          for (int x = vi; x != meet; x = par_vertex[x]) cycle_edges.insert(par_edge[x]);
          for (int x = wi; x != meet; x = par_vertex[x]) cycle_edges.insert(par_edge[x]);
          break;
        }
      }
    }
  }
  if (cycle_edges.empty()) throw MathError("NoCircuit", "no cycle found in genus-1 curve");

  int e0 = *cycle_edges.begin();
  std::vector<CircuitStep> walk;
  walk.push_back({e0, true});
  int start = c.index(c.edges[e0].from);
  int cur = c.index(c.edges[e0].to);
  int prev_edge = e0;
  while (cur != start) {
    bool advanced = false;
    for (auto [e, wi] : adj[cur]) {
      if (e == prev_edge || !cycle_edges.count(e)) continue;
      walk.push_back({e, c.index(c.edges[e].from) == cur});
      prev_edge = e;
      cur = wi;
      advanced = true;
      break;
    }
    if (!advanced) throw MathError("NoCircuit", "cycle walk failed to close");
  }
  return walk;
}

inline std::set<int> circuit_vertex_ids(const ZTCurve& c) {
  std::set<int> ids;
  for (const auto& st : circuit(c)) {
    ids.insert(c.edges[st.edge].from);
    ids.insert(c.edges[st.edge].to);
  }
  return ids;
}

// shortest-path distance to the circuit in the weighted metric (len * mult)
inline Rat dist_to_circuit(const ZTCurve& c, int vertex_id) {
  auto ids = circuit_vertex_ids(c);
  auto adj = c.adjacency();
  std::vector<std::optional<Rat>> dist(c.vertices.size());
  for (int id : ids) dist[c.index(id)] = Rat(0);
  // small graphs: relax until stable
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t e = 0; e < c.edges.size(); ++e) {
      if (!c.edges[e].len.is_finite()) continue;
      int a = c.index(c.edges[e].from), b = c.index(c.edges[e].to);
      Rat w = c.edges[e].len.q * Rat(c.edges[e].mult);
      if (dist[a] && (!dist[b] || *dist[b] > *dist[a] + w)) {
        dist[b] = *dist[a] + w;
        changed = true;
      }
      if (dist[b] && (!dist[a] || *dist[a] > *dist[b] + w)) {
        dist[a] = *dist[b] + w;
        changed = true;
      }
    }
  }
  int vi = c.index(vertex_id);
  if (!dist[vi]) throw MathError("Disconnected", "vertex not connected to the circuit");
  return *dist[vi];
}

inline QMat circuit_directions(const ZTCurve& c) {
  QMat rows;
  for (const auto& st : circuit(c)) {
    const auto& d = c.edges[st.edge].dir;
    if (is_zero_vec(d)) continue;
    std::vector<Rat> r;
    for (const auto& x : d) r.push_back(Rat(x));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline bool is_ordinary(const ZTCurve& c) {
  return rank_q(circuit_directions(c)) == static_cast<int>(c.n);
}

// Affine subspace through the circuit, recorded by a base point and a
// canonical basis of its direction space.
struct Flat {
  std::vector<Rat> base;
  QMat dirs;  // reduced row echelon basis

  int dim() const { return static_cast<int>(dirs.size()); }
};

namespace detail {

inline std::string flat_key(const QMat& dirs) {
  std::ostringstream os;
  for (const auto& row : dirs) {
    for (const auto& x : row) os << format_rat(x) << ",";
    os << ";";
  }
  return os.str();
}

// vertices of the connected component of the flat's preimage that contains
// the circuit, plus the incident edges that leave the flat
struct FlatRegion {
  std::set<int> vertex_ids;
  std::vector<int> exit_edges;  // edge indices with a region endpoint, not inside the flat
};

inline bool edge_in_flat(const ZTCurve& c, const Flat& f, int e) {
  std::vector<Rat> d;
  for (const auto& x : c.edges[e].dir) d.push_back(Rat(x));
  return in_rowspan(f.dirs, d);
}

inline FlatRegion flat_region(const ZTCurve& c, const Flat& f) {
  FlatRegion reg;
  auto adj = c.adjacency();
  std::queue<int> bfs;
  for (int id : circuit_vertex_ids(c)) {
    if (reg.vertex_ids.insert(id).second) bfs.push(c.index(id));
  }
  while (!bfs.empty()) {
    int vi = bfs.front();
    bfs.pop();
    for (auto [e, wi] : adj[vi]) {
      if (!edge_in_flat(c, f, e)) continue;
      if (!c.edges[e].len.is_finite()) continue;  // in-flat ray, stays inside
      if (reg.vertex_ids.insert(c.vertices[wi].id).second) bfs.push(wi);
    }
  }
  for (int id : reg.vertex_ids) {
    int vi = c.index(id);
    for (auto [e, wi] : adj[vi])
      if (!edge_in_flat(c, f, e)) reg.exit_edges.push_back(e);
  }
  std::sort(reg.exit_edges.begin(), reg.exit_edges.end());
  reg.exit_edges.erase(std::unique(reg.exit_edges.begin(), reg.exit_edges.end()),
                       reg.exit_edges.end());
  return reg;
}

}  // namespace detail

// Proper affine subspaces containing the circuit that are cut out by walking
// outward: each one is the span of the circuit directions together with the
// directions of finitely many adjacent edges. One representative per
// direction space; empty when the circuit already spans.
inline std::vector<Flat> hyperplane_classes(const ZTCurve& c) {
  std::vector<Flat> out;
  auto pos = positions(c);
  Flat f0;
  f0.base = pos.at(*circuit_vertex_ids(c).begin());
  f0.dirs = rref_q(circuit_directions(c));
  if (f0.dim() >= c.n) return out;

  std::set<std::string> seen = {detail::flat_key(f0.dirs)};
  std::queue<Flat> work;
  work.push(f0);
  while (!work.empty()) {
    Flat f = work.front();
    work.pop();
    out.push_back(f);
    auto reg = detail::flat_region(c, f);
    for (int e : reg.exit_edges) {
      QMat ext = f.dirs;
      std::vector<Rat> d;
      for (const auto& x : c.edges[e].dir) d.push_back(Rat(x));
      ext.push_back(std::move(d));
      ext = rref_q(ext);
      if (static_cast<long>(ext.size()) >= c.n) continue;
      std::string key = detail::flat_key(ext);
      if (!seen.insert(key).second) continue;
      Flat nf;
      nf.base = f.base;
      nf.dirs = std::move(ext);
      work.push(nf);
    }
  }
  return out;
}

struct WellSpacedResult {
  bool ok = true;
  std::optional<Flat> witness;
  std::vector<Rat> witness_dists;
};

// For every flat through the circuit, the minimum circuit distance among the
// vertices where the curve leaves the flat must be attained at least twice.
inline WellSpacedResult is_well_spaced(const ZTCurve& c) {
  WellSpacedResult res;
  for (const auto& f : hyperplane_classes(c)) {
    auto reg = detail::flat_region(c, f);
    std::set<int> exit_ids;
    for (int e : reg.exit_edges) {
      if (reg.vertex_ids.count(c.edges[e].from)) exit_ids.insert(c.edges[e].from);
      if (reg.vertex_ids.count(c.edges[e].to)) exit_ids.insert(c.edges[e].to);
    }
    if (exit_ids.empty()) continue;
    std::vector<Rat> dists;
    for (int id : exit_ids) dists.push_back(dist_to_circuit(c, id));
    Rat lo = *std::min_element(dists.begin(), dists.end());
    long hits = std::count(dists.begin(), dists.end(), lo);
    if (hits < 2) {
      res.ok = false;
      res.witness = f;
      res.witness_dists = dists;
      return res;
    }
  }
  return res;
}

inline bool leaf_span_check(const ZTCurve& c) {
  QMat rows;
  for (const auto& d : degree_data(c)) {
    std::vector<Rat> r;
    for (const auto& x : d) r.push_back(Rat(x));
    rows.push_back(std::move(r));
  }
  return rank_q(rows) == static_cast<int>(c.n);
}

// Weighted image of the curve under its map to Q^n; contracted edges add
// nothing one-dimensional.
inline EmbeddedGraph curve_image(const ZTCurve& c) {
  auto pos = positions(c);
  EmbeddedGraph g;
  for (size_t e = 0; e < c.edges.size(); ++e) {
    const auto& ed = c.edges[e];
    if (is_zero_vec(ed.dir)) continue;
    Seg s;
    s.dir = ed.dir;
    s.weight = ed.mult;
    if (ed.len.is_finite()) {
      s.p = pos.at(ed.from);
      s.len = ed.len.q * Rat(ed.mult);
    } else {
      bool from_internal = !c.vertices[c.index(ed.from)].boundary;
      s.p = pos.at(from_internal ? ed.from : ed.to);
      if (!from_internal)
        for (auto& x : s.dir) x = -x;
      s.unbounded = true;
    }
    g.push_back(std::move(s));
  }
  return g;
}

struct ReduceResult {
  bool ok = true;
  std::string problem;
  std::vector<int> kept_edges;  // indices of the non-contracted edges
};

// Drop contracted edges; the remainder must cover its image once (an
// isometry onto a multiplicity-one graph). Reports failure otherwise.
inline ReduceResult trivalent_reduce(const ZTCurve& c) {
  ReduceResult res;
  for (size_t e = 0; e < c.edges.size(); ++e)
    if (!is_zero_vec(c.edges[e].dir)) res.kept_edges.push_back(static_cast<int>(e));
  if (!covers_simply(curve_image(c))) {
    res.ok = false;
    res.problem = "image is covered with multiplicity other than one";
  }
  return res;
}

// Underlying metric tree of a genus-0 curve; vertex ids are reused, so leaf
// order matches the curve's vertex order.
inline MetricTree curve_tree(const ZTCurve& c) {
  if (genus(c) != 0) throw InputError("curve_tree requires a genus-0 curve");
  MetricTree t;
  for (const auto& v : c.vertices) t.vertices.push_back({v.id, false});
  for (const auto& e : c.edges) t.edges.push_back({e.from, e.to, e.len});
  auto deg = detail::vertex_degrees(c);
  for (size_t i = 0; i < t.vertices.size(); ++i) t.vertices[i].leaf = deg[i] == 1;
  validate_tree(t);
  return t;
}

}  // namespace troplift
