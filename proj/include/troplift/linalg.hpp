#pragma once

#include <cassert>
#include <optional>
#include <vector>

#include "troplift/rational.hpp"

namespace troplift {

using QMat = std::vector<std::vector<Rat>>;
using ZVec = std::vector<Int>;
using ZMat = std::vector<ZVec>;

inline int rank_q(QMat a) {
  int rows = static_cast<int>(a.size());
  int cols = rows ? static_cast<int>(a[0].size()) : 0;
  int r = 0;
  for (int c = 0; c < cols && r < rows; ++c) {
    int p = -1;
    for (int i = r; i < rows; ++i)
      if (a[i][c] != 0) {
        p = i;
        break;
      }
    if (p < 0) continue;
    std::swap(a[r], a[p]);
    for (int i = 0; i < rows; ++i) {
      if (i == r || a[i][c] == 0) continue;
      Rat f = a[i][c] / a[r][c];
      for (int j = c; j < cols; ++j) a[i][j] -= f * a[r][j];
    }
    ++r;
  }
  return r;
}

// Reduced row echelon form with zero rows dropped; canonical for a row space.
inline QMat rref_q(QMat a) {
  int rows = static_cast<int>(a.size());
  int cols = rows ? static_cast<int>(a[0].size()) : 0;
  int r = 0;
  for (int c = 0; c < cols && r < rows; ++c) {
    int p = -1;
    for (int i = r; i < rows; ++i)
      if (a[i][c] != 0) {
        p = i;
        break;
      }
    if (p < 0) continue;
    std::swap(a[r], a[p]);
    Rat lead = a[r][c];
    for (int j = c; j < cols; ++j) a[r][j] /= lead;
    for (int i = 0; i < rows; ++i) {
      if (i == r || a[i][c] == 0) continue;
      Rat f = a[i][c];
      for (int j = c; j < cols; ++j) a[i][j] -= f * a[r][j];
    }
    ++r;
  }
  a.resize(r);
  return a;
}

inline bool in_rowspan(const QMat& rows, const std::vector<Rat>& v) {
  QMat a = rows;
  a.push_back(v);
  return rank_q(a) == rank_q(rows);
}

// Solve A x = b over Q with RHS entries in any Q-vector space E.
// Free variables are set to zero; returns nullopt on inconsistency.
template <class E, class ScaleFn, class AddFn, class IsZeroFn>
std::optional<std::vector<E>> solve_linear(QMat a, std::vector<E> b, const E& zero,
                                           ScaleFn scale, AddFn add, IsZeroFn is_zero) {
  int rows = static_cast<int>(a.size());
  assert(static_cast<int>(b.size()) == rows);
  int cols = rows ? static_cast<int>(a[0].size()) : 0;
  std::vector<int> pivot_col;
  int r = 0;
  for (int c = 0; c < cols && r < rows; ++c) {
    int p = -1;
    for (int i = r; i < rows; ++i)
      if (a[i][c] != 0) {
        p = i;
        break;
      }
    if (p < 0) continue;
    std::swap(a[r], a[p]);
    std::swap(b[r], b[p]);
    for (int i = 0; i < rows; ++i) {
      if (i == r || a[i][c] == 0) continue;
      Rat f = a[i][c] / a[r][c];
      for (int j = c; j < cols; ++j) a[i][j] -= f * a[r][j];
      b[i] = add(b[i], scale(-f, b[r]));
    }
    pivot_col.push_back(c);
    ++r;
  }
  for (int i = r; i < rows; ++i)
    if (!is_zero(b[i])) return std::nullopt;
  std::vector<E> x(cols, zero);
  for (int i = 0; i < r; ++i) x[pivot_col[i]] = scale(Rat(1) / a[i][pivot_col[i]], b[i]);
  return x;
}

inline std::optional<std::vector<Rat>> solve_q(const QMat& a, const std::vector<Rat>& b) {
  return solve_linear<Rat>(
      a, b, Rat(0), [](const Rat& f, const Rat& v) { return Rat(f * v); },
      [](const Rat& u, const Rat& v) { return Rat(u + v); },
      [](const Rat& v) { return v == 0; });
}

inline QMat nullspace_q(QMat a) {
  int rows = static_cast<int>(a.size());
  int cols = rows ? static_cast<int>(a[0].size()) : 0;
  std::vector<int> pivot_of_col(cols, -1);
  int r = 0;
  for (int c = 0; c < cols && r < rows; ++c) {
    int p = -1;
    for (int i = r; i < rows; ++i)
      if (a[i][c] != 0) {
        p = i;
        break;
      }
    if (p < 0) continue;
    std::swap(a[r], a[p]);
    Rat lead = a[r][c];
    for (int j = 0; j < cols; ++j) a[r][j] /= lead;
    for (int i = 0; i < rows; ++i) {
      if (i == r || a[i][c] == 0) continue;
      Rat f = a[i][c];
      for (int j = 0; j < cols; ++j) a[i][j] -= f * a[r][j];
    }
    pivot_of_col[c] = r;
    ++r;
  }
  QMat basis;
  for (int c = 0; c < cols; ++c) {
    if (pivot_of_col[c] >= 0) continue;
    std::vector<Rat> v(cols, 0);
    v[c] = 1;
    for (int j = 0; j < cols; ++j)
      if (pivot_of_col[j] >= 0) v[j] = -a[pivot_of_col[j]][c];
    basis.push_back(v);
  }
  return basis;
}

inline Int content(const ZVec& v) {
  Int g = 0;
  for (const Int& x : v) g = int_gcd(g, x);
  return g;
}

inline bool is_zero_vec(const ZVec& v) {
  for (const Int& x : v)
    if (x != 0) return false;
  return true;
}

// Column-style integer echelon with transform: returns U with A*U = H,
// U unimodular. Zero columns of H are moved last; their U columns span ker A.
struct ColEchelon {
  ZMat h;  // same shape as A
  ZMat u;  // n x n, columns tracked
};

inline ColEchelon col_echelon(const ZMat& a0) {
  int rows = static_cast<int>(a0.size());
  int cols = rows ? static_cast<int>(a0[0].size()) : 0;
  if (rows == 0) {
    // No constraints: treat as 0 x cols with caller-supplied cols unknown.
    return {ZMat{}, ZMat{}};
  }
  ZMat a = a0;
  ZMat u(cols, ZVec(cols, 0));
  for (int i = 0; i < cols; ++i) u[i][i] = 1;
  auto col_sub = [&](int dst, int src, const Int& f) {
    for (int i = 0; i < rows; ++i) a[i][dst] -= f * a[i][src];
    for (int i = 0; i < cols; ++i) u[i][dst] -= f * u[i][src];
  };
  auto col_swap = [&](int x, int y) {
    if (x == y) return;
    for (int i = 0; i < rows; ++i) std::swap(a[i][x], a[i][y]);
    for (int i = 0; i < cols; ++i) std::swap(u[i][x], u[i][y]);
  };
  auto col_neg = [&](int x) {
    for (int i = 0; i < rows; ++i) a[i][x] = -a[i][x];
    for (int i = 0; i < cols; ++i) u[i][x] = -u[i][x];
  };
  int c = 0;
  for (int r = 0; r < rows && c < cols; ++r) {
    // Reduce row r across columns c..cols-1 to a single nonzero entry.
    while (true) {
      int best = -1;
      for (int j = c; j < cols; ++j)
        if (a[r][j] != 0 && (best < 0 || abs(a[r][j]) < abs(a[r][best]))) best = j;
      if (best < 0) break;
      bool others = false;
      for (int j = c; j < cols; ++j) {
        if (j == best || a[r][j] == 0) continue;
        Int f = a[r][j] / a[r][best];  // truncated division is fine for gcd steps
        col_sub(j, best, f);
        if (a[r][j] != 0) others = true;
      }
      if (!others) {
        col_swap(c, best);
        if (a[r][c] < 0) col_neg(c);
        ++c;
        break;
      }
    }
  }
  return {a, u};
}

// Basis (as rows) of {x in Z^n : A x = 0}; saturated by construction.
inline ZMat integer_kernel(const ZMat& a, int n_cols) {
  if (a.empty()) {
    ZMat id(n_cols, ZVec(n_cols, 0));
    for (int i = 0; i < n_cols; ++i) id[i][i] = 1;
    return id;
  }
  assert(static_cast<int>(a[0].size()) == n_cols);
  ColEchelon ce = col_echelon(a);
  int rows = static_cast<int>(a.size());
  ZMat out;
  for (int j = 0; j < n_cols; ++j) {
    bool zero = true;
    for (int i = 0; i < rows; ++i)
      if (ce.h[i][j] != 0) {
        zero = false;
        break;
      }
    if (!zero) continue;
    ZVec v(n_cols);
    for (int i = 0; i < n_cols; ++i) v[i] = ce.u[i][j];
    out.push_back(v);
  }
  return out;
}

// Basis of the saturation of the row span of m inside Z^n.
inline ZMat saturate_rows(const ZMat& m, int n_cols) {
  ZMat k = integer_kernel(m, n_cols);
  return integer_kernel(k, n_cols);
}

// Exact inverse of a unimodular integer matrix.
inline ZMat invert_unimodular(const ZMat& u) {
  int n = static_cast<int>(u.size());
  QMat a(n, std::vector<Rat>(2 * n, 0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a[i][j] = Rat(u[i][j]);
    a[i][n + i] = 1;
  }
  for (int c = 0; c < n; ++c) {
    int p = -1;
    for (int i = c; i < n; ++i)
      if (a[i][c] != 0) {
        p = i;
        break;
      }
    assert(p >= 0);
    std::swap(a[c], a[p]);
    Rat lead = a[c][c];
    for (int j = 0; j < 2 * n; ++j) a[c][j] /= lead;
    for (int i = 0; i < n; ++i) {
      if (i == c || a[i][c] == 0) continue;
      Rat f = a[i][c];
      for (int j = 0; j < 2 * n; ++j) a[i][j] -= f * a[c][j];
    }
  }
  ZMat inv(n, ZVec(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Rat e = a[i][n + j];
      assert(e.get_den() == 1);
      inv[i][j] = e.get_num();
    }
  return inv;
}

inline ZMat mat_mul(const ZMat& a, const ZMat& b) {
  int n = static_cast<int>(a.size());
  int m = b.empty() ? 0 : static_cast<int>(b[0].size());
  int k = static_cast<int>(b.size());
  ZMat c(n, ZVec(m, 0));
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < k; ++l)
      if (a[i][l] != 0)
        for (int j = 0; j < m; ++j) c[i][j] += a[i][l] * b[l][j];
  return c;
}

// Extend rows of s (a basis of a saturated rank-k sublattice of Z^n) to a
// unimodular n x n matrix whose first k rows equal s.
inline ZMat extend_to_unimodular(const ZMat& s, int n_cols) {
  int k = static_cast<int>(s.size());
  if (k == 0) {
    ZMat id(n_cols, ZVec(n_cols, 0));
    for (int i = 0; i < n_cols; ++i) id[i][i] = 1;
    return id;
  }
  ColEchelon ce = col_echelon(s);
  // s * U = [H | 0] with H k x k lower triangular; saturated basis => |det H| = 1.
  Int det = 1;
  for (int i = 0; i < k; ++i) det *= ce.h[i][i];
  assert(abs(det) == 1 && "extend_to_unimodular requires a saturated basis");
  ZMat uinv = invert_unimodular(ce.u);
  ZMat block(n_cols, ZVec(n_cols, 0));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j <= i; ++j) block[i][j] = ce.h[i][j];
  for (int i = k; i < n_cols; ++i) block[i][i] = 1;
  ZMat b = mat_mul(block, uinv);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n_cols; ++j) assert(b[i][j] == s[i][j]);
  return b;
}

// Unimodular basis adapted to a flag of subspaces given by integer generators.
// stage_gens[j] generates D_j with D_0 < D_1 < ... < D_{s-1} = Q^n; the result
// B has its first dim(D_j) rows spanning the saturation of D_j for every j.
inline ZMat flag_adapted_basis(const std::vector<ZMat>& stage_gens, int n) {
  ZMat rows;  // current partial basis
  for (const ZMat& gens : stage_gens) {
    ZMat sat = saturate_rows(gens, n);
    int nj = static_cast<int>(sat.size());
    // Express current rows in the sat basis (integer coordinates).
    QMat a(n, std::vector<Rat>(nj));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < nj; ++j) a[i][j] = Rat(sat[j][i]);
    ZMat coords;
    for (const ZVec& r : rows) {
      std::vector<Rat> rhs(n);
      for (int i = 0; i < n; ++i) rhs[i] = Rat(r[i]);
      auto sol = solve_q(a, rhs);
      assert(sol && "flag member does not contain earlier stage");
      ZVec c(nj);
      for (int j = 0; j < nj; ++j) {
        assert(sol->at(j).get_den() == 1);
        c[j] = sol->at(j).get_num();
      }
      coords.push_back(c);
    }
    ZMat v = extend_to_unimodular(coords, nj);
    ZMat next = mat_mul(v, sat);
    rows = next;
  }
  assert(static_cast<int>(rows.size()) == n);
  return rows;
}

}  // namespace troplift
