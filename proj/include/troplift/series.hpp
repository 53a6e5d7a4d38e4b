#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <json.hpp>

#include "troplift/field.hpp"

namespace troplift {

inline const Rat kDefaultTrunc = Rat(24);

struct Val {
  enum Kind { kFinite, kInf, kUnknown } kind = kInf;
  Rat v;  // meaningful only for kFinite

  static Val finite(const Rat& q) { return Val{kFinite, q}; }
  static Val inf() { return Val{kInf, Rat(0)}; }
  static Val unknown() { return Val{kUnknown, Rat(0)}; }
  bool is_finite() const { return kind == kFinite; }
  friend bool operator==(const Val& a, const Val& b) {
    if (a.kind != b.kind) return false;
    return a.kind != kFinite || a.v == b.v;
  }
};

struct Term {
  Rat exp;
  NF coeff;
};

// Truncated generalized power series in t: finitely many known terms below
// trunc, nothing known at or above trunc. trunc = inf with no terms is the
// exact zero.
struct Series {
  std::vector<Term> terms;
  XRat trunc = XRat::infinity();
  FieldDesc fld;

  bool exact_zero() const { return terms.empty() && trunc.inf; }
};

inline void canon(Series& s) {
  std::stable_sort(s.terms.begin(), s.terms.end(),
                   [](const Term& a, const Term& b) { return a.exp < b.exp; });
  std::vector<Term> out;
  for (auto& t : s.terms) {
    if (!(XRat(t.exp) < s.trunc)) continue;
    if (!out.empty() && out.back().exp == t.exp)
      out.back().coeff = nf_add(out.back().coeff, t.coeff);
    else
      out.push_back(t);
  }
  s.terms.clear();
  for (auto& t : out)
    if (!nf_is_zero(t.coeff)) s.terms.push_back(t);
}

inline Series s_zero(long d = 1) {
  Series s;
  s.fld.d = d;
  return s;
}

inline Series s_monomial(const NF& c, const Rat& e) {
  Series s;
  s.fld.d = static_cast<long>(c.size());
  s.terms.push_back({e, c});
  canon(s);
  return s;
}

inline Series s_from_q(const Rat& q, long d = 1) { return s_monomial(nf_from_q(q, d), 0); }

inline Series t_pow(const Rat& w, long d = 1) { return s_monomial(nf_one(d), w); }

inline Val valuation(const Series& a) {
  if (!a.terms.empty()) return Val::finite(a.terms.front().exp);
  if (a.trunc.inf) return Val::inf();
  return Val::unknown();
}

// Verified lower bound on the valuation: first exponent, or trunc when no
// term is known (inf for the exact zero).
inline XRat val_lower_bound(const Series& a) {
  if (!a.terms.empty()) return XRat(a.terms.front().exp);
  return a.trunc;
}

enum class Cmp3 { kYes, kNo, kUnknown };

// Is v(a) >= r certain, refuted, or undecidable at this precision?
inline Cmp3 val_geq(const Series& a, const Rat& r) {
  if (!a.terms.empty()) return a.terms.front().exp >= r ? Cmp3::kYes : Cmp3::kNo;
  if (a.trunc.inf || a.trunc.q >= r) return Cmp3::kYes;
  return Cmp3::kUnknown;
}

inline NF leading_coeff(const Series& a) {
  if (a.terms.empty())
    throw PrecisionError("leading coefficient of a series with no known terms");
  return a.terms.front().coeff;
}

inline Rat require_valuation(const Series& a, const char* what) {
  Val v = valuation(a);
  if (v.kind == Val::kUnknown)
    throw PrecisionError(std::string(what) + ": valuation truncated away");
  if (v.kind == Val::kInf)
    throw MathError("DivisionByZero", std::string(what) + ": exact zero");
  return v.v;
}

inline void align_fields(Series& a, Series& b) {
  if (a.fld.d == b.fld.d) return;
  long l = int_lcm(Int(a.fld.d), Int(b.fld.d)).get_si();
  for (auto& t : a.terms) t.coeff = nf_promote(t.coeff, l);
  for (auto& t : b.terms) t.coeff = nf_promote(t.coeff, l);
  a.fld.d = b.fld.d = l;
}

inline Series s_promote(Series a, long d) {
  if (a.fld.d != d) {
    for (auto& t : a.terms) t.coeff = nf_promote(t.coeff, d);
    a.fld.d = d;
  }
  return a;
}

inline Series s_add(Series a, Series b) {
  align_fields(a, b);
  Series r;
  r.fld = a.fld;
  r.trunc = xr_min(a.trunc, b.trunc);
  r.terms = a.terms;
  r.terms.insert(r.terms.end(), b.terms.begin(), b.terms.end());
  canon(r);
  return r;
}

inline Series s_neg(Series a) {
  for (auto& t : a.terms) t.coeff = nf_neg(t.coeff);
  return a;
}

inline Series s_sub(const Series& a, const Series& b) { return s_add(a, s_neg(b)); }

inline Series s_scale(const NF& c, Series a) {
  long d = std::max<long>(a.fld.d, static_cast<long>(c.size()));
  a = s_promote(std::move(a), d);
  NF cc = nf_promote(c, d);
  for (auto& t : a.terms) t.coeff = nf_mul(cc, t.coeff);
  canon(a);
  return a;
}

inline Series s_shift(Series a, const Rat& e) {
  for (auto& t : a.terms) t.exp += e;
  if (!a.trunc.inf) a.trunc.q += e;
  return a;
}

inline Series s_mul(Series a, Series b) {
  align_fields(a, b);
  Series r;
  r.fld = a.fld;
  r.trunc = xr_min(val_lower_bound(a) + b.trunc, val_lower_bound(b) + a.trunc);
  for (const auto& ta : a.terms)
    for (const auto& tb : b.terms) {
      Rat e = ta.exp + tb.exp;
      if (XRat(e) < r.trunc) r.terms.push_back({e, nf_mul(ta.coeff, tb.coeff)});
    }
  canon(r);
  return r;
}

inline Series s_truncate(Series a, const XRat& t) {
  a.trunc = xr_min(a.trunc, t);
  canon(a);
  return a;
}

// Inverse by geometric expansion. `ambient` caps the absolute precision of
// the result when the input is exact but not a monomial.
inline Series s_invert(const Series& a, const Rat& ambient = kDefaultTrunc) {
  Rat v = require_valuation(a, "invert");
  NF c = leading_coeff(a);
  Series lead_inv = s_monomial(nf_inv(c), -v);
  if (a.terms.size() == 1 && a.trunc.inf) return lead_inv;
  XRat out_trunc = xr_min(a.trunc - v - v, XRat(ambient));
  // h = a / (c t^v) - 1 has positive valuation; 1/a = (1/(c t^v)) sum (-h)^k.
  Series h = s_mul(a, lead_inv);
  Series one = s_from_q(1, a.fld.d);
  h = s_sub(h, one);
  XRat rel = out_trunc + v;  // needed relative precision of the geometric sum
  h = s_truncate(std::move(h), rel);
  Series acc = one;
  Series pw = one;
  Series neg_h = s_neg(h);
  while (true) {
    pw = s_truncate(s_mul(pw, neg_h), rel);
    if (!(val_lower_bound(pw) < rel)) break;
    acc = s_add(acc, pw);
  }
  Series r = s_mul(lead_inv, acc);
  return s_truncate(std::move(r), out_trunc);
}

inline Series s_div(const Series& a, const Series& b, const Rat& ambient = kDefaultTrunc) {
  return s_mul(a, s_invert(b, ambient));
}

inline Series s_pow(const Series& a, long k, const Rat& ambient = kDefaultTrunc) {
  if (k < 0) return s_pow(s_invert(a, ambient), -k, ambient);
  Series r = s_from_q(1, a.fld.d);
  Series base = a;
  unsigned long e = static_cast<unsigned long>(k);
  while (e) {
    if (e & 1) r = s_mul(r, base);
    e >>= 1;
    if (e) base = s_mul(base, base);
  }
  return r;
}

inline NF s_residue(const Series& a) {
  Val v = valuation(a);
  if (v.kind == Val::kUnknown) throw PrecisionError("residue: valuation truncated away");
  if (v.kind == Val::kInf || v.v != 0)
    throw MathError("ResidueUndefined", "residue requires valuation exactly 0");
  return a.terms.front().coeff;
}

inline bool s_exact_eq(const Series& a, const Series& b) {
  Series d = s_sub(a, b);
  return d.terms.empty() && d.trunc.inf;
}

// Equal as far as the available precision can tell.
inline bool s_agree(const Series& a, const Series& b) {
  return s_sub(a, b).terms.empty();
}

// Deterministic total order on series: by term sequence (exp, then coeff),
// then by truncation. Sorts multisets of realized points canonically.
inline bool s_lex_less(const Series& a, const Series& b) {
  size_t n = std::min(a.terms.size(), b.terms.size());
  for (size_t i = 0; i < n; ++i) {
    if (a.terms[i].exp != b.terms[i].exp) return a.terms[i].exp < b.terms[i].exp;
    NF ca = a.terms[i].coeff, cb = b.terms[i].coeff;
    long d = static_cast<long>(std::max(ca.size(), cb.size()));
    ca = nf_promote(ca, d);
    cb = nf_promote(cb, d);
    if (!nf_eq(ca, cb)) return nf_lex_less(ca, cb);
  }
  if (a.terms.size() != b.terms.size()) return a.terms.size() < b.terms.size();
  return b.trunc < a.trunc;
}

inline std::string s_to_string(const Series& a) {
  std::string out;
  for (const auto& t : a.terms) {
    std::string c = nf_to_string(t.coeff);
    if (!out.empty()) out += " + ";
    if (t.exp == 0) {
      out += c;
    } else {
      std::string mono = "t^(" + format_rat(t.exp) + ")";
      out += (c == "1") ? mono : c + "*" + mono;
    }
  }
  if (out.empty()) out = "0";
  if (!a.trunc.inf) out += " + O(t^(" + format_rat(a.trunc.q) + "))";
  return out;
}

inline nlohmann::ordered_json series_to_json(const Series& a) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json terms = nlohmann::ordered_json::array();
  for (const auto& t : a.terms) {
    nlohmann::ordered_json tt;
    tt["exp"] = format_rat(t.exp);
    tt["coeff"] = nf_to_json(t.coeff);
    terms.push_back(tt);
  }
  j["terms"] = terms;
  j["trunc"] = format_xrat(a.trunc);
  j["field"] = field_to_json(a.fld);
  return j;
}

inline Series series_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("terms") || !j.contains("trunc") || !j.contains("field"))
    throw InputError("series must be an object with terms/trunc/field");
  Series s;
  s.fld = field_from_json(j["field"]);
  if (!j["terms"].is_array()) throw InputError("series terms must be an array");
  for (const auto& tt : j["terms"]) {
    if (!tt.is_object() || !tt.contains("exp") || !tt.contains("coeff"))
      throw InputError("series term must have exp and coeff");
    Term t;
    t.exp = parse_rat(tt["exp"].get<std::string>());
    t.coeff = nf_from_json(tt["coeff"], s.fld.d);
    s.terms.push_back(t);
  }
  s.trunc = parse_xrat(j["trunc"].get<std::string>());
  canon(s);
  return s;
}

// A point of P^1(K) = K together with infinity.
struct P1 {
  bool inf = false;
  Series z;

  static P1 infinity() {
    P1 p;
    p.inf = true;
    return p;
  }
  static P1 of(Series s) {
    P1 p;
    p.z = std::move(s);
    return p;
  }
};

inline bool p1_exact_eq(const P1& a, const P1& b) {
  if (a.inf || b.inf) return a.inf == b.inf;
  return s_exact_eq(a.z, b.z);
}

inline bool p1_lex_less(const P1& a, const P1& b) {
  if (a.inf || b.inf) return !a.inf && b.inf;  // infinity sorts last
  return s_lex_less(a.z, b.z);
}

inline std::string p1_to_string(const P1& p) { return p.inf ? "inf" : s_to_string(p.z); }

inline nlohmann::ordered_json p1_to_json(const P1& p) {
  if (p.inf) {
    nlohmann::ordered_json j;
    j["inf"] = true;
    return j;
  }
  return series_to_json(p.z);
}

inline P1 p1_from_json(const nlohmann::json& j) {
  if (j.is_object() && j.contains("inf")) {
    if (j["inf"].get<bool>() != true) throw InputError("point marker must be {\"inf\":true}");
    return P1::infinity();
  }
  return P1::of(series_from_json(j));
}

struct CrossRatioVal {
  Rat v_c;
  Rat v_c_minus_1;
};

// v(c(w,x:y,z)) and v(c - 1) for the cross ratio (w-y)(x-z)/((w-z)(x-y)),
// with the usual limits when one of the points is infinity.
inline CrossRatioVal cross_ratio_valuation(const P1& w, const P1& x, const P1& y,
                                           const P1& z, const Rat& ambient = kDefaultTrunc) {
  const P1* pts[4] = {&w, &x, &y, &z};
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      if (p1_exact_eq(*pts[i], *pts[j]))
        throw InputError("cross ratio requires four distinct points");
  // Factors after cancelling the point at infinity: numerator (w-y)(x-z),
  // denominator (w-z)(x-y).
  std::vector<Series> num, den;
  auto diff = [&](const P1& a, const P1& b) -> std::optional<Series> {
    if (a.inf || b.inf) return std::nullopt;  // cancelled against its partner
    return s_sub(a.z, b.z);
  };
  auto push = [&](std::vector<Series>& side, const std::optional<Series>& f) {
    if (f) side.push_back(*f);
  };
  if (w.inf) {
    push(num, diff(x, z));
    push(den, diff(x, y));
  } else if (x.inf) {
    push(num, diff(w, y));
    push(den, diff(w, z));
  } else if (y.inf) {
    push(num, diff(x, z));
    push(den, diff(w, z));
  } else if (z.inf) {
    push(num, diff(w, y));
    push(den, diff(x, y));
  } else {
    push(num, diff(w, y));
    push(num, diff(x, z));
    push(den, diff(w, z));
    push(den, diff(x, y));
  }
  Rat v_c = 0;
  for (const auto& f : num) v_c += require_valuation(f, "cross ratio factor");
  for (const auto& f : den) v_c -= require_valuation(f, "cross ratio factor");
  Rat v_cm1;
  if (v_c != 0) {
    v_cm1 = std::min(v_c, Rat(0));
  } else {
    Series c = s_from_q(1);
    for (const auto& f : num) c = s_mul(c, f);
    for (const auto& f : den) c = s_mul(c, s_invert(f, ambient));
    Series cm1 = s_sub(c, s_from_q(1, c.fld.d));
    Val v = valuation(cm1);
    if (v.kind == Val::kUnknown)
      throw PrecisionError("cross ratio: c - 1 cancels beyond the truncation");
    if (v.kind == Val::kInf)
      throw InputError("cross ratio is exactly 1 (degenerate quadruple)");
    v_cm1 = v.v;
  }
  return {v_c, v_cm1};
}

}  // namespace troplift
