#pragma once

// Certificates: self-contained JSON witnesses for a computed parameterization.
// The verifier re-derives the tropicalization from certificate data alone and
// compares it against the input graph, so nothing from the construction phase
// has to be trusted.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "troplift/curve.hpp"
#include "troplift/genus0.hpp"
#include "troplift/genus1.hpp"

namespace troplift {

inline nlohmann::ordered_json certificate_genus0(const RationalMapData& m, bool verified,
                                                 const Rat& trunc = kDefaultTrunc) {
  nlohmann::ordered_json j;
  j["genus"] = 0;
  nlohmann::ordered_json z = nlohmann::ordered_json::array();
  for (const auto& p : m.z) z.push_back(p1_to_json(p));
  j["Z"] = z;
  j["Zplus"] = m.zplus;
  j["Zminus"] = m.zminus;
  nlohmann::ordered_json tr = nlohmann::ordered_json::array();
  for (const auto& x : m.tau) tr.push_back(format_rat(x));
  j["translation"] = tr;
  j["verified"] = verified;
  j["trunc"] = format_rat(trunc);
  return j;
}

inline RationalMapData certificate_genus0_parse(const nlohmann::json& j) {
  for (const char* key : {"Z", "Zplus", "Zminus", "translation"})
    if (!j.contains(key) || !j[key].is_array())
      throw InputError(std::string("certificate needs array \"") + key + "\"");
  RationalMapData m;
  for (const auto& p : j["Z"]) m.z.push_back(p1_from_json(p));
  for (const auto& row : j["Zplus"]) m.zplus.push_back(row.get<std::vector<int>>());
  for (const auto& row : j["Zminus"]) m.zminus.push_back(row.get<std::vector<int>>());
  for (const auto& x : j["translation"]) m.tau.push_back(parse_rat(x.get<std::string>()));
  m.n = static_cast<long>(m.tau.size());
  if (m.zplus.size() != m.tau.size() || m.zminus.size() != m.tau.size())
    throw InputError("certificate row counts disagree with the translation length");
  return m;
}

// lower bound on v(w_i - 1), exact when the difference is exact
inline XRat residual_valuation(const TateSkeleton& t, long i,
                               const Rat& ambient = kDefaultTrunc) {
  Series diff = s_sub(tate_w(t, i, ambient), s_from_q(1, tate_degree(t)));
  Val v = valuation(diff);
  if (v.kind == Val::kInf) return XRat::infinity();
  if (v.kind == Val::kFinite) return XRat(v.v);
  return diff.trunc;
}

inline nlohmann::ordered_json certificate_genus1(const TateSkeleton& t, bool verified,
                                                 const Rat& trunc = kDefaultTrunc) {
  nlohmann::ordered_json j;
  j["genus"] = 1;
  j["q"] = series_to_json(t.q);
  auto rows = [](const std::vector<std::vector<TateEntry>>& side) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& row : side) {
      nlohmann::ordered_json r = nlohmann::ordered_json::array();
      for (const auto& e : row) r.push_back(series_to_json(e.z));
      out.push_back(r);
    }
    return out;
  };
  j["Zplus"] = rows(t.zplus);
  j["Zminus"] = rows(t.zminus);
  nlohmann::ordered_json cl = nlohmann::ordered_json::array();
  for (const auto& p : t.punctures) {
    nlohmann::ordered_json item;
    item["z"] = series_to_json(p.z);
    item["component"] = p.cluster;
    cl.push_back(item);
  }
  j["clusters"] = cl;
  FieldDesc fld;
  fld.d = tate_degree(t);
  j["field"] = field_to_json(fld);
  nlohmann::ordered_json res = nlohmann::ordered_json::array();
  for (long i = 0; i < t.n; ++i) res.push_back(format_xrat(residual_valuation(t, i, trunc)));
  j["w_residual_valuations"] = res;
  nlohmann::ordered_json tr = nlohmann::ordered_json::array();
  for (const auto& x : t.tau) tr.push_back(format_rat(x));
  j["translation"] = tr;
  j["verified"] = verified;
  j["trunc"] = format_rat(trunc);
  return j;
}

inline TateSkeleton certificate_genus1_parse(const nlohmann::json& j) {
  for (const char* key : {"q", "Zplus", "Zminus", "clusters", "field",
                          "w_residual_valuations", "translation"})
    if (!j.contains(key)) throw InputError(std::string("certificate needs \"") + key + "\"");
  TateSkeleton t;
  t.q = series_from_json(j["q"]);
  auto rows = [](const nlohmann::json& side) {
    if (!side.is_array()) throw InputError("certificate multisets must be arrays");
    std::vector<std::vector<TateEntry>> out;
    for (const auto& row : side) {
      std::vector<TateEntry> r;
      for (const auto& e : row) r.push_back({series_from_json(e), -1, -1});
      out.push_back(r);
    }
    return out;
  };
  t.zplus = rows(j["Zplus"]);
  t.zminus = rows(j["Zminus"]);
  field_from_json(j["field"]);  // shape check; degrees live on the series
  for (const auto& item : j["clusters"]) {
    if (!item.is_object() || !item.contains("z") || !item.contains("component"))
      throw InputError("cluster items need z and component");
    series_from_json(item["z"]);
  }
  for (const auto& x : j["w_residual_valuations"]) parse_xrat(x.get<std::string>());
  for (const auto& x : j["translation"]) t.tau.push_back(parse_rat(x.get<std::string>()));
  t.n = static_cast<long>(t.tau.size());
  t.shifted.assign(t.n, -1);
  validate_tate(t);
  return t;
}

struct VerifyOutcome {
  bool ok = true;
  std::vector<std::string> problems;

  void fail(std::string why) {
    ok = false;
    problems.push_back(std::move(why));
  }
};

inline VerifyOutcome verify_genus0(const RationalMapData& m, const ZTCurve& c) {
  VerifyOutcome out;
  try {
    TropEmbedding emb = forward_trop(m);
    if (!embedded_equal(emb.image, curve_image(c)))
      out.fail("tropicalization of the map disagrees with the input graph");
    else if (!sample_check(emb, m))
      out.fail("sampled valuations disagree with graph positions");
  } catch (const std::exception& e) {
    out.fail(e.what());
  }
  return out;
}

inline VerifyOutcome verify_genus1(const TateSkeleton& t, const ZTCurve& c,
                                   const Rat& trunc = kDefaultTrunc) {
  VerifyOutcome out;
  try {
    validate_tate(t);
    for (long i = 0; i < t.n; ++i) {
      XRat r = residual_valuation(t, i, trunc);
      if (!r.inf && r.q < trunc)
        out.fail("multiplier residual below truncation in coordinate " + std::to_string(i));
    }
    OrbitTrop tr = trop_orbit(t);
    if (!embedded_equal(tr.image, curve_image(c)))
      out.fail("tropicalization of the theta quotient disagrees with the input graph");
    else {
      std::vector<Series> probes = standard_tate_probes(tr);
      if (probes.size() > 6) probes.resize(6);
      if (sample_pairs(t, tr, probes, trunc) != 0)
        out.fail("sampled valuations disagree with graph positions");
    }
  } catch (const std::exception& e) {
    out.fail(e.what());
  }
  return out;
}

inline VerifyOutcome verify_certificate(const nlohmann::json& cert, const ZTCurve& c) {
  VerifyOutcome out;
  if (!cert.is_object() || !cert.contains("genus") || !cert["genus"].is_number_integer()) {
    out.fail("certificate needs an integer \"genus\"");
    return out;
  }
  long g = cert["genus"].get<long>();
  try {
    if (g == 0) return verify_genus0(certificate_genus0_parse(cert), c);
    if (g == 1) {
      Rat trunc = kDefaultTrunc;
      if (cert.contains("trunc")) trunc = parse_rat(cert["trunc"].get<std::string>());
      return verify_genus1(certificate_genus1_parse(cert), c, trunc);
    }
  } catch (const std::exception& e) {
    out.fail(e.what());
    return out;
  }
  out.fail("unsupported genus " + std::to_string(g));
  return out;
}

}  // namespace troplift
