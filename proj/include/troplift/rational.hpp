#pragma once

#include <gmpxx.h>

#include <string>

#include "troplift/errors.hpp"

namespace troplift {

using Rat = mpq_class;
using Int = mpz_class;

inline Rat parse_rat(const std::string& s) {
  if (s.empty()) throw InputError("empty rational literal");
  for (char c : s)
    if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '/'))
      throw InputError("bad rational literal: " + s);
  Rat q;
  if (q.set_str(s, 10) != 0) throw InputError("bad rational literal: " + s);
  if (q.get_den() == 0) throw InputError("zero denominator: " + s);
  q.canonicalize();
  return q;
}

inline std::string format_rat(const Rat& q) { return q.get_str(); }

// Rational extended with +infinity; used for edge lengths and truncation orders.
struct XRat {
  bool inf = false;
  Rat q = 0;

  XRat() = default;
  XRat(const Rat& v) : q(v) {}  // NOLINT: implicit by design
  XRat(long v) : q(v) {}        // NOLINT
  static XRat infinity() {
    XRat x;
    x.inf = true;
    return x;
  }
  bool is_finite() const { return !inf; }

  friend bool operator==(const XRat& a, const XRat& b) {
    if (a.inf || b.inf) return a.inf == b.inf;
    return a.q == b.q;
  }
  friend bool operator!=(const XRat& a, const XRat& b) { return !(a == b); }
  friend bool operator<(const XRat& a, const XRat& b) {
    if (a.inf) return false;
    if (b.inf) return true;
    return a.q < b.q;
  }
  friend bool operator<=(const XRat& a, const XRat& b) { return a < b || a == b; }
  friend bool operator>(const XRat& a, const XRat& b) { return b < a; }
  friend bool operator>=(const XRat& a, const XRat& b) { return b <= a; }
  friend XRat operator+(const XRat& a, const XRat& b) {
    if (a.inf || b.inf) return infinity();
    return XRat(a.q + b.q);
  }
  friend XRat operator-(const XRat& a, const Rat& b) {
    if (a.inf) return infinity();
    return XRat(a.q - b);
  }
};

inline XRat xr_min(const XRat& a, const XRat& b) { return a < b ? a : b; }
inline XRat xr_max(const XRat& a, const XRat& b) { return a < b ? b : a; }

inline XRat parse_xrat(const std::string& s) {
  if (s == "inf") return XRat::infinity();
  return XRat(parse_rat(s));
}

inline std::string format_xrat(const XRat& x) {
  return x.inf ? std::string("inf") : format_rat(x.q);
}

inline Int rat_num(const Rat& q) { return q.get_num(); }
inline Int rat_den(const Rat& q) { return q.get_den(); }

inline Int int_pow(const Int& b, unsigned long e) {
  Int r;
  mpz_pow_ui(r.get_mpz_t(), b.get_mpz_t(), e);
  return r;
}

inline Int int_gcd(const Int& a, const Int& b) {
  Int r;
  mpz_gcd(r.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return r;
}

inline Int int_lcm(const Int& a, const Int& b) {
  Int r;
  mpz_lcm(r.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return r;
}

inline Int rat_floor(const Rat& q) {
  Int r;
  mpz_fdiv_q(r.get_mpz_t(), q.get_num().get_mpz_t(), q.get_den().get_mpz_t());
  return r;
}

inline Int rat_ceil(const Rat& q) {
  Int r;
  mpz_cdiv_q(r.get_mpz_t(), q.get_num().get_mpz_t(), q.get_den().get_mpz_t());
  return r;
}

inline Rat rat_pow(const Rat& b, long e) {
  if (e < 0) {
    if (b == 0) throw MathError("DivisionByZero", "0 to a negative power");
    return rat_pow(Rat(1) / b, -e);
  }
  Rat r;
  mpz_pow_ui(r.get_num().get_mpz_t(), b.get_num().get_mpz_t(),
             static_cast<unsigned long>(e));
  mpz_pow_ui(r.get_den().get_mpz_t(), b.get_den().get_mpz_t(),
             static_cast<unsigned long>(e));
  r.canonicalize();
  return r;
}

// 2^e for integer e as an exact rational.
inline Rat pow2_rat(long e) {
  if (e >= 0) return Rat(int_pow(2, static_cast<unsigned long>(e)));
  return Rat(1) / Rat(int_pow(2, static_cast<unsigned long>(-e)));
}

// Exact log2 for rationals of the form +-2^k; nullopt-style via bool.
inline bool log2_exact(const Rat& v, long* out) {
  if (v <= 0) return false;
  Int num = v.get_num(), den = v.get_den();
  auto is_p2 = [](const Int& x, long* k) {
    if (x <= 0) return false;
    size_t bits = mpz_sizeinbase(x.get_mpz_t(), 2);
    Int p = int_pow(2, bits - 1);
    if (p != x) return false;
    *k = static_cast<long>(bits - 1);
    return true;
  };
  long kn = 0, kd = 0;
  if (!is_p2(num, &kn) || !is_p2(den, &kd)) return false;
  *out = kn - kd;
  return true;
}

}  // namespace troplift
