#ifndef WEFE_REPORT_HPP
#define WEFE_REPORT_HPP

// JSON rendering of verification reports.
//
// Layout: {"header": {...}, "meta": {...}, "points": [...], "aggregate": {...},
// "classification": {...}}.  Everything except "header" is the body; the
// header holds a FNV-1a checksum of the compact body dump and, on request,
// wall-clock timing.  Keys are sorted, so the body is byte-stable for a fixed
// run configuration.

#include <cstdint>
#include <cstdio>
#include <string>

#include <json.hpp>

#include "wefe/analysis.hpp"

namespace wefe {

using json = nlohmann::json;

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline json residual_json(const Residual& r) { return json{{"value", r.value}, {"scale", r.scale}}; }

inline json optical_json(const OpticalScalars& o) {
  return json{{"theta", o.expansion}, {"sigma2", o.shear2}, {"omega2", o.twist2}, {"sigma2_hessian", o.shear2_norm}};
}

inline json point_json(const PointRecord& r) {
  json j;
  j["coords"] = r.coords;
  json res;
  res["gh"] = residual_json(r.gh);
  // Short aliases for the schema's fixed keys.
  if (auto it = r.identities.find("bianchi_contracted"); it != r.identities.end())
    res["bianchi"] = residual_json(it->second);
  if (auto it = r.identities.find("bochner"); it != r.identities.end()) res["bochner"] = residual_json(it->second);
  if (auto it = r.identities.find("trace"); it != r.identities.end()) res["trace"] = residual_json(it->second);
  json ids = json::object();
  for (const auto& [k, v] : r.identities) ids[k] = residual_json(v);
  res["identities"] = ids;
  if (r.tau) res["tau"] = residual_json(*r.tau);
  if (r.cpe) res["cpe"] = residual_json(*r.cpe);
  if (r.lemma) {
    res["lemma"] = json{{"grad_norm2", residual_json(r.lemma->grad_norm2)},
                        {"tau", residual_json(r.lemma->tau)},
                        {"laplacian", residual_json(r.lemma->laplacian)},
                        {"hes_grad", residual_json(r.lemma->hes_grad)},
                        {"ricci_grad", residual_json(r.lemma->ricci_grad)},
                        {"reduced", residual_json(r.lemma->reduced)}};
  }
  j["residuals"] = res;
  const ClassificationResult& c = r.classification;
  json cl;
  cl["nilpotency"] = c.nilpotency;
  cl["gradient_status"] = std::string(status_name(c.gradient));
  cl["kundt"] = c.kundt ? json(*c.kundt) : json(nullptr);
  cl["isotropic"] = c.isotropic;
  cl["weyl_null"] = c.weyl_null ? json(*c.weyl_null) : json(nullptr);
  j["classification"] = cl;
  if (r.optical) j["optical"] = optical_json(*r.optical);
  j["degenerate"] = r.degenerate;
  return j;
}

inline json report_body(const VerificationReport& rep) {
  json meta;
  meta["family"] = rep.family;
  json params = json::object();
  for (const auto& [k, v] : rep.params) params[k] = v;
  meta["params"] = params;
  json resolved = json::object();
  for (const auto& [k, v] : rep.resolved_reals) resolved[k] = v;
  for (const auto& [k, v] : rep.resolved_functions) resolved[k] = v;
  meta["resolved_params"] = resolved;
  meta["seed"] = rep.seed;
  meta["order"] = rep.order;
  meta["tol"] = rep.tol;
  meta["points"] = rep.points.size();
  meta["convention"] = rep.convention;
  if (rep.resolution) {
    json r;
    r["selected"] = rep.resolution->selected ? json(*rep.resolution->selected) : json(nullptr);
    r["ambiguous"] = rep.resolution->ambiguous;
    r["max_residual"] = rep.resolution->max_residual;
    r["note"] = rep.resolution->note;
    meta["convention_resolution"] = r;
  }
  meta["checks"] = rep.checks;
  meta["thresholds"] = json{{"residual", rep.tol},
                            {"isotropy", kIsotropyTol},
                            {"nilpotency", "|Ric^k| < tol*scale^k"},
                            {"recurrence", "2x2 minors < tol*scale^2"},
                            {"degenerate_factor", kDegenerateFactor},
                            {"scale", "1 + max |input| per formula"}};

  json points = json::array();
  for (const auto& p : rep.points) points.push_back(point_json(p));

  json aggregate;
  aggregate["max_residuals"] = rep.max_residuals;
  aggregate["verdict"] = rep.pass ? "pass" : "fail";
  aggregate["failures"] = rep.failures;
  aggregate["notes"] = rep.notes;

  const ModalSummary& m = rep.classification;
  json cls;
  cls["nilpotency"] = m.nilpotency;
  cls["nilpotency_agreement"] = m.nilpotency_agreement;
  cls["gradient_status"] = m.gradient_status;
  cls["gradient_agreement"] = m.gradient_agreement;
  cls["kundt"] = m.kundt ? json(*m.kundt) : json(nullptr);
  cls["isotropic"] = m.isotropic;
  cls["excluded"] = m.excluded;
  aggregate["classification"] = cls;

  json body;
  body["meta"] = meta;
  body["points"] = points;
  body["aggregate"] = aggregate;
  body["classification"] = cls;
  return body;
}

/// Full report document.  Timing is only included when asked for, so the
/// default output is byte-identical across runs.
inline json report_json(const VerificationReport& rep, bool with_timing = false) {
  json doc = report_body(rep);
  json header;
  header["checksum"] = "fnv1a64:" + hex64(fnv1a64(doc.dump()));
  header["checksum_covers"] = "compact dump of all top-level keys except header";
  if (with_timing) header["elapsed_ms"] = rep.elapsed_ms;
  doc["header"] = header;
  return doc;
}

/// Recomputes the body checksum of a parsed report.
inline bool checksum_matches(const json& doc) {
  if (!doc.contains("header")) return false;
  json body = doc;
  body.erase("header");
  return doc["header"].value("checksum", "") == "fnv1a64:" + hex64(fnv1a64(body.dump()));
}

}  // namespace wefe

#endif  // WEFE_REPORT_HPP
