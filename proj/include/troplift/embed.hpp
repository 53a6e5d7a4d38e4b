#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "troplift/errors.hpp"
#include "troplift/linalg.hpp"
#include "troplift/rational.hpp"

namespace troplift {

// Weighted straight piece of a 1-complex in Q^n: {p + s*dir : 0 <= s <= len},
// or a ray when unbounded. dir is primitive, len is in dir units.
struct Seg {
  std::vector<Rat> p;
  ZVec dir;
  Rat len = 0;
  bool unbounded = false;
  long weight = 1;
};

using EmbeddedGraph = std::vector<Seg>;

namespace detail {

struct LineKey {
  ZVec dir;               // sign-normalized primitive direction
  std::vector<Rat> base;  // point on the line with pivot coordinate zero

  bool operator<(const LineKey& o) const {
    if (dir != o.dir) return dir < o.dir;
    return std::lexicographical_compare(base.begin(), base.end(), o.base.begin(), o.base.end());
  }
};

// Parameter interval on a line, weight counted with sign for comparisons.
struct WInterval {
  bool lo_unb = false;
  bool hi_unb = false;
  Rat lo = 0, hi = 0;
  long w = 0;
};

inline void push_seg(std::map<LineKey, std::vector<WInterval>>& lines, const Seg& s, long sign) {
  if (s.weight == 0) return;
  if (!s.unbounded && s.len == 0) return;
  if (is_zero_vec(s.dir)) throw MathError("BadSegment", "embedded segment with zero direction");
  int n = static_cast<int>(s.dir.size());
  bool flip = false;
  for (int k = 0; k < n; ++k) {
    if (s.dir[k] == 0) continue;
    flip = s.dir[k] < 0;
    break;
  }
  LineKey key;
  key.dir = s.dir;
  if (flip)
    for (auto& c : key.dir) c = -c;
  int piv = 0;
  while (key.dir[piv] == 0) ++piv;
  Rat t0 = s.p[piv] / Rat(key.dir[piv]);
  key.base.resize(n);
  for (int k = 0; k < n; ++k) key.base[k] = s.p[k] - t0 * Rat(key.dir[k]);

  WInterval iv;
  iv.w = sign * s.weight;
  if (!flip) {
    iv.lo = t0;
    if (s.unbounded)
      iv.hi_unb = true;
    else
      iv.hi = t0 + s.len;
  } else {
    iv.hi = t0;
    if (s.unbounded)
      iv.lo_unb = true;
    else
      iv.lo = t0 - s.len;
  }
  lines[key].push_back(iv);
}

inline bool profile_vanishes(const std::vector<WInterval>& ivs) {
  std::vector<Rat> cuts;
  for (const auto& iv : ivs) {
    if (!iv.lo_unb) cuts.push_back(iv.lo);
    if (!iv.hi_unb) cuts.push_back(iv.hi);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<Rat> samples;
  if (cuts.empty()) {
    samples.push_back(0);
  } else {
    samples.push_back(cuts.front() - 1);
    for (size_t i = 0; i + 1 < cuts.size(); ++i) samples.push_back((cuts[i] + cuts[i + 1]) / 2);
    samples.push_back(cuts.back() + 1);
  }
  for (const Rat& x : samples) {
    long total = 0;
    for (const auto& iv : ivs) {
      bool above = iv.lo_unb || iv.lo < x;
      bool below = iv.hi_unb || x < iv.hi;
      if (above && below) total += iv.w;
    }
    if (total != 0) return false;
  }
  return true;
}

}  // namespace detail

// Pointwise equality of weighted images; invariant under subdivision and
// under re-chopping overlaps, so two parameterizations compare correctly.
inline bool embedded_equal(const EmbeddedGraph& a, const EmbeddedGraph& b) {
  std::map<detail::LineKey, std::vector<detail::WInterval>> lines;
  for (const auto& s : a) detail::push_seg(lines, s, +1);
  for (const auto& s : b) detail::push_seg(lines, s, -1);
  for (const auto& [key, ivs] : lines)
    if (!detail::profile_vanishes(ivs)) return false;
  return true;
}

// All positions covered by total weight exactly one (used to recognize an
// embedding that is one-to-one with multiplicity one onto its image).
inline bool covers_simply(const EmbeddedGraph& g) {
  std::map<detail::LineKey, std::vector<detail::WInterval>> lines;
  for (const auto& s : g) detail::push_seg(lines, s, +1);
  for (const auto& [key, ivs] : lines) {
    std::vector<Rat> cuts;
    for (const auto& iv : ivs) {
      if (!iv.lo_unb) cuts.push_back(iv.lo);
      if (!iv.hi_unb) cuts.push_back(iv.hi);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<Rat> samples;
    if (cuts.empty()) {
      samples.push_back(0);
    } else {
      samples.push_back(cuts.front() - 1);
      for (size_t i = 0; i + 1 < cuts.size(); ++i) samples.push_back((cuts[i] + cuts[i + 1]) / 2);
      samples.push_back(cuts.back() + 1);
    }
    for (const Rat& x : samples) {
      long total = 0;
      for (const auto& iv : ivs) {
        bool above = iv.lo_unb || iv.lo < x;
        bool below = iv.hi_unb || x < iv.hi;
        if (above && below) total += iv.w;
      }
      if (total != 0 && total != 1) return false;
    }
  }
  return true;
}

}  // namespace troplift
