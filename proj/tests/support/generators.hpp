#pragma once

#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rng.hpp"
#include "troplift/curve.hpp"
#include "troplift/linalg.hpp"

namespace troplift {
namespace testing {

inline ZTCurve load_curve(const std::string& name) {
  const char* root = std::getenv("TROPLIFT_DATA");
  if (!root) throw InputError("TROPLIFT_DATA is not set");
  std::ifstream f(std::string(root) + "/" + name);
  if (!f) throw InputError("missing data file " + name);
  nlohmann::json j;
  f >> j;
  return curve_from_json(j);
}

inline ZVec rnd_ivec(Rng& g, long n, long lo = -3, long hi = 3) {
  ZVec v(n, Int(0));
  for (long i = 0; i < n; ++i) v[i] = Int(rnd_int(g, lo, hi));
  return v;
}

inline ZVec rnd_ivec_nz(Rng& g, long n) {
  for (;;) {
    ZVec v = rnd_ivec(g, n);
    if (!is_zero_vec(v)) return v;
  }
}

inline Rat rnd_edge_len(Rng& g) {
  return Rat(rnd_int(g, 1, 6)) / Rat(rnd_int(g, 1, 3));
}

inline ZVec curve_tension(const ZTCurve& c, int vi) {
  ZVec t(c.n, Int(0));
  auto adj = c.adjacency();
  for (auto [e, w] : adj[vi]) {
    (void)w;
    ZVec d = c.dir_from(e, vi);
    for (long i = 0; i < c.n; ++i) t[i] += Int(c.edges[e].mult) * d[i];
  }
  return t;
}

// unbounded edge to a fresh boundary vertex, outward displacement vector w
inline void add_ray(ZTCurve& c, int from_id, const ZVec& w, int* next_id) {
  Int m = content(w);
  ZTCurve::Edge e;
  e.from = from_id;
  e.to = (*next_id)++;
  e.dir = w;
  for (auto& x : e.dir) x /= m;
  e.mult = m.get_si();
  e.len = XRat::infinity();
  c.vertices.push_back({e.to, true, std::nullopt});
  c.edges.push_back(std::move(e));
}

// cancel the tension of every internal vertex with one extra ray each
inline void balance_with_rays(ZTCurve& c, int* next_id) {
  size_t ni = c.vertices.size();
  for (size_t vi = 0; vi < ni; ++vi) {
    if (c.vertices[vi].boundary) continue;
    ZVec t = curve_tension(c, static_cast<int>(vi));
    if (is_zero_vec(t)) continue;
    for (auto& x : t) x = -x;
    add_ray(c, c.vertices[vi].id, t, next_id);
  }
}

// Random zero-tension tree curve: random internal tree, random bounded edge
// slopes, decorative rays, then per-vertex balancing rays. Occasionally the
// only placed vertex hangs off the rest by a contracted edge.
inline ZTCurve rnd_genus0_curve(Rng& g, long n, int max_internal = 5) {
  ZTCurve c;
  c.n = n;
  int ni = static_cast<int>(rnd_int(g, 1, max_internal));
  for (int i = 0; i < ni; ++i) {
    ZTCurve::Vertex v;
    v.id = i;
    if (i == 0) {
      std::vector<Rat> x;
      for (long j = 0; j < n; ++j) x.push_back(rnd_rat(g, 4, 2));
      v.coords = std::move(x);
    }
    c.vertices.push_back(std::move(v));
  }
  for (int i = 1; i < ni; ++i) {
    ZVec v = rnd_ivec_nz(g, n);
    Int m = content(v);
    ZTCurve::Edge e;
    e.from = static_cast<int>(rnd_int(g, 0, i - 1));
    e.to = i;
    e.dir = v;
    for (auto& x : e.dir) x /= m;
    e.mult = m.get_si();
    e.len = XRat(rnd_edge_len(g));
    c.edges.push_back(std::move(e));
  }
  int next_id = 100;
  for (int i = 0; i < ni; ++i)
    for (long k = rnd_int(g, 0, 2); k > 0; --k)
      add_ray(c, i, rnd_ivec_nz(g, n), &next_id);
  balance_with_rays(c, &next_id);
  long ends = 0;
  for (const auto& v : c.vertices) ends += v.boundary ? 1 : 0;
  if (ends < 2) {
    ZVec w = rnd_ivec_nz(g, n);
    add_ray(c, 0, w, &next_id);
    for (auto& x : w) x = -x;
    add_ray(c, 0, w, &next_id);
  }
  if (rnd_int(g, 0, 4) == 0) {
    // move the coordinates onto a dangling contracted vertex, listed first so
    // it anchors the translation
    ZTCurve::Vertex v;
    v.id = 50;
    v.coords = c.vertices[0].coords;
    c.vertices[0].coords.reset();
    c.vertices.insert(c.vertices.begin(), std::move(v));
    ZTCurve::Edge e;
    e.from = 0;
    e.to = 50;
    e.dir = ZVec(n, Int(0));
    e.mult = 1;
    e.len = XRat(rnd_edge_len(g));
    c.edges.push_back(std::move(e));
  }
  return c;
}

// Random genus-one curve whose circuit directions span Q^n: a closed rational
// polygon, decorated and balanced as above.
inline ZTCurve rnd_genus1_ordinary(Rng& g, long n, int max_cycle = 5) {
  for (;;) {
    int k = static_cast<int>(rnd_int(g, 3, max_cycle));
    std::vector<std::vector<Rat>> w(k, std::vector<Rat>(n, Rat(0)));
    for (int j = 0; j + 1 < k; ++j)
      for (long i = 0; i < n; ++i) {
        w[j][i] = Rat(rnd_int(g, -3, 3)) / Rat(rnd_int(g, 1, 2));
        w[k - 1][i] -= w[j][i];
      }
    bool ok = true;
    QMat dirs;
    for (int j = 0; j < k; ++j) {
      bool zero = true;
      for (long i = 0; i < n; ++i) zero = zero && w[j][i] == 0;
      ok = ok && !zero;
      dirs.push_back(w[j]);
    }
    if (!ok || rank_q(dirs) < n) continue;

    ZTCurve c;
    c.n = n;
    for (int j = 0; j < k; ++j) {
      ZTCurve::Vertex v;
      v.id = j;
      if (j == 0) {
        std::vector<Rat> x;
        for (long i = 0; i < n; ++i) x.push_back(rnd_rat(g, 4, 2));
        v.coords = std::move(x);
      }
      c.vertices.push_back(std::move(v));
    }
    for (int j = 0; j < k; ++j) {
      // displacement w[j] = len * mult * dir with dir primitive integral
      Int den(1);
      for (long i = 0; i < n; ++i) den = int_lcm(den, w[j][i].get_den());
      ZVec u(n, Int(0));
      for (long i = 0; i < n; ++i) {
        Rat s = w[j][i] * Rat(den);
        u[i] = s.get_num();
      }
      Int m = content(u);
      ZTCurve::Edge e;
      e.from = j;
      e.to = (j + 1) % k;
      e.dir = u;
      for (auto& x : e.dir) x /= m;
      e.mult = static_cast<long>(rnd_int(g, 1, 2));
      e.len = XRat(Rat(m) / (Rat(den) * Rat(e.mult)));
      c.edges.push_back(std::move(e));
    }
    int next_id = 100;
    if (rnd_int(g, 0, 2) == 0) {
      // hang one extra internal vertex off the circuit
      ZTCurve::Vertex v;
      v.id = k;
      c.vertices.push_back(std::move(v));
      ZVec u = rnd_ivec_nz(g, n);
      Int m = content(u);
      ZTCurve::Edge e;
      e.from = static_cast<int>(rnd_int(g, 0, k - 1));
      e.to = k;
      e.dir = u;
      for (auto& x : e.dir) x /= m;
      e.mult = m.get_si();
      e.len = XRat(rnd_edge_len(g));
      c.edges.push_back(std::move(e));
    }
    for (size_t vi = 0, nv = c.vertices.size(); vi < nv; ++vi)
      for (long r = rnd_int(g, 0, 2); r > 0; --r)
        add_ray(c, c.vertices[vi].id, rnd_ivec_nz(g, n), &next_id);
    balance_with_rays(c, &next_id);
    return c;
  }
}

}  // namespace testing
}  // namespace troplift
