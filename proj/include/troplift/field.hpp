#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "troplift/linalg.hpp"
#include "troplift/rational.hpp"

namespace troplift {

// Coefficient field: Q for d = 1, else Q(s) with s^d = 2 (s = real d-th root
// of 2; x^d - 2 is Eisenstein at 2, hence irreducible, for every d >= 1).
struct FieldDesc {
  long d = 1;
  friend bool operator==(const FieldDesc& a, const FieldDesc& b) { return a.d == b.d; }
  friend bool operator!=(const FieldDesc& a, const FieldDesc& b) { return a.d != b.d; }
};

inline nlohmann::ordered_json field_to_json(const FieldDesc& f) {
  nlohmann::ordered_json j;
  j["field"] = f.d == 1 ? "Q" : ("Q(2^(1/" + std::to_string(f.d) + "))");
  j["d"] = f.d;
  return j;
}

inline FieldDesc field_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("d") || !j["d"].is_number_integer())
    throw InputError("field descriptor must be an object with integer \"d\"");
  FieldDesc f;
  f.d = j["d"].get<long>();
  if (f.d < 1) throw InputError("field degree d must be >= 1");
  return f;
}

// Element of Q(2^{1/d}): coefficient vector of 1, s, ..., s^{d-1}.
using NF = std::vector<Rat>;

inline NF nf_zero(long d) { return NF(d, Rat(0)); }

inline NF nf_from_q(const Rat& q, long d) {
  NF x(d, Rat(0));
  x[0] = q;
  return x;
}

inline NF nf_one(long d) { return nf_from_q(1, d); }

inline bool nf_is_zero(const NF& a) {
  for (const Rat& c : a)
    if (c != 0) return false;
  return true;
}

inline bool nf_eq(const NF& a, const NF& b) { return a == b; }

inline NF nf_add(const NF& a, const NF& b) {
  assert(a.size() == b.size());
  NF r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline NF nf_neg(const NF& a) {
  NF r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = -a[i];
  return r;
}

inline NF nf_sub(const NF& a, const NF& b) { return nf_add(a, nf_neg(b)); }

inline NF nf_scale(const Rat& f, const NF& a) {
  NF r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = f * a[i];
  return r;
}

// Reduce modulo s^d = 2 while multiplying.
inline NF nf_mul(const NF& a, const NF& b) {
  assert(a.size() == b.size());
  long d = static_cast<long>(a.size());
  NF r(d, Rat(0));
  for (long i = 0; i < d; ++i) {
    if (a[i] == 0) continue;
    for (long j = 0; j < d; ++j) {
      if (b[j] == 0) continue;
      long e = i + j;
      if (e < d)
        r[e] += a[i] * b[j];
      else
        r[e - d] += 2 * a[i] * b[j];
    }
  }
  return r;
}

inline NF nf_inv(const NF& a) {
  long d = static_cast<long>(a.size());
  if (nf_is_zero(a)) throw MathError("DivisionByZero", "inverse of zero field element");
  if (d == 1) return NF{Rat(1) / a[0]};
  long nz = -1;
  int cnt = 0;
  for (long i = 0; i < d && cnt < 2; ++i)
    if (a[i] != 0) {
      ++cnt;
      nz = i;
    }
  if (cnt == 1) {
    // (c s^k)^-1 = s^(d-k) / (2c) since s^d = 2
    NF r(d, Rat(0));
    if (nz == 0)
      r[0] = Rat(1) / a[0];
    else
      r[d - nz] = Rat(1) / (Rat(2) * a[nz]);
    return r;
  }
  // Columns of m are a * s^j; solve m x = e_0.
  QMat m(d, std::vector<Rat>(d));
  NF col = a;
  for (long j = 0; j < d; ++j) {
    for (long i = 0; i < d; ++i) m[i][j] = col[i];
    // multiply col by s
    NF next(d, Rat(0));
    for (long i = 0; i < d; ++i) {
      if (i + 1 < d)
        next[i + 1] = col[i];
      else
        next[0] += 2 * col[i];
    }
    col = next;
  }
  std::vector<Rat> e0(d, Rat(0));
  e0[0] = 1;
  auto x = solve_q(m, e0);
  assert(x && "s^d - 2 is irreducible, nonzero elements are invertible");
  return *x;
}

inline NF nf_div(const NF& a, const NF& b) { return nf_mul(a, nf_inv(b)); }

// 2^e where e*d is an integer: 2^{(ad+b)/d} = 2^a s^b.
inline NF nf_pow2(const Rat& e, long d) {
  Rat k = e * d;
  if (k.get_den() != 1)
    throw MathError("FieldExtensionRequired",
                    "2^(" + format_rat(e) + ") is not in Q(2^(1/" + std::to_string(d) + "))");
  Int ki = k.get_num();
  Int a = ki / d, b = ki % d;
  if (b < 0) {
    b += d;
    a -= 1;
  }
  NF x(d, Rat(0));
  long ai = static_cast<long>(a.get_si());
  x[static_cast<size_t>(b.get_ui())] = pow2_rat(ai);
  return x;
}

// Embed an element of Q(2^{1/d_from}) into Q(2^{1/d_to}); d_from | d_to.
inline NF nf_promote(const NF& a, long d_to) {
  long d_from = static_cast<long>(a.size());
  if (d_from == d_to) return a;
  assert(d_to % d_from == 0);
  long k = d_to / d_from;
  NF r(d_to, Rat(0));
  for (long i = 0; i < d_from; ++i) r[i * k] = a[i];
  return r;
}

inline bool nf_lex_less(const NF& a, const NF& b) {
  assert(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

inline std::string nf_to_string(const NF& a) {
  std::string out;
  bool first = true;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0) continue;
    if (!first) out += "+";
    out += format_rat(a[i]);
    if (i == 1) out += "*s";
    if (i > 1) out += "*s^" + std::to_string(i);
    first = false;
  }
  return first ? "0" : out;
}

inline nlohmann::ordered_json nf_to_json(const NF& a) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const Rat& c : a) arr.push_back(format_rat(c));
  return arr;
}

inline NF nf_from_json(const nlohmann::json& j, long d) {
  if (!j.is_array() || j.empty() || static_cast<long>(j.size()) > d)
    throw InputError("coefficient must be a nonempty array of at most d rationals");
  NF a(d, Rat(0));
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) throw InputError("coefficient entries must be rational strings");
    a[i] = parse_rat(j[i].get<std::string>());
  }
  return a;
}

}  // namespace troplift
