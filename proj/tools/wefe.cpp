// wefe: command-line front end for the weighted Einstein field equation checks.
//
// Exit codes: 0 verdict pass, 1 a check failed, 2 usage error, 3 evaluation error.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wefe/analysis.hpp"
#include "wefe/catalog.hpp"
#include "wefe/config.hpp"
#include "wefe/curvature.hpp"
#include "wefe/report.hpp"

namespace {

using wefe::json;

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;
constexpr int kEval = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

wefe::ParamText parse_param_flags(const std::vector<std::string>& flags) {
  wefe::ParamText out;
  for (const auto& f : flags) {
    const auto eq = f.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--param expects name=value, got '" + f + "'");
    std::string value = f.substr(eq + 1);
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
      value = value.substr(1, value.size() - 2);
    out[f.substr(0, eq)] = value;
  }
  return out;
}

std::set<std::string> parse_checks(const std::string& text) {
  std::set<std::string> out;
  if (text.empty() || text == "all") return {wefe::all_checks().begin(), wefe::all_checks().end()};
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (std::find(wefe::all_checks().begin(), wefe::all_checks().end(), item) == wefe::all_checks().end())
      throw UsageError("unknown check '" + item + "'");
    out.insert(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Applies --param overrides to a loaded config (reals only).
void override_params(wefe::MetricConfig& cfg, const wefe::ParamText& given) {
  for (const auto& [k, v] : given) {
    if (!cfg.params.count(k)) throw UsageError("config has no parameter '" + k + "'");
    try {
      cfg.params[k] = wefe::eval_double(wefe::parse(v, {}), {}, {});
    } catch (const std::exception& e) {
      throw UsageError("parameter '" + k + "': " + e.what());
    }
  }
}

wefe::FamilyInstance instance_from_config(const wefe::MetricConfig& cfg, const std::string& path) {
  wefe::FamilyInstance inst;
  inst.id = "config:" + path;
  inst.metric = cfg.metric;
  inst.density = cfg.density;
  inst.lambda = cfg.lambda;
  inst.cpe_potential = std::nullopt;
  inst.bindings.reals = cfg.params;
  inst.box = cfg.box;
  inst.expectations = false;
  if (inst.box.empty()) throw UsageError("config '" + path + "' has no [box] table to sample from");
  return inst;
}

int write_output(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return kPass;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot write '" << path << "'\n";
    return kUsage;
  }
  out << text;
  return kPass;
}

// list --------------------------------------------------------------------------

int cmd_list(bool as_json) {
  const auto families = wefe::list_families();
  if (as_json) {
    json arr = json::array();
    for (const auto& f : families) arr.push_back({{"id", f.id}, {"description", f.description}, {"anchor", f.anchor}});
    std::cout << arr.dump(2) << "\n";
    return kPass;
  }
  std::size_t w = 0;
  for (const auto& f : families) w = std::max(w, f.id.size());
  for (const auto& f : families) {
    std::cout << f.id << std::string(w + 2 - f.id.size(), ' ') << f.description << "\n"
              << std::string(w + 2, ' ') << "anchor: \"" << f.anchor << "\"\n";
  }
  return kPass;
}

// verify / identities -------------------------------------------------------------

struct RunConfig {
  std::string family;
  std::string config;
  std::vector<std::string> params;
  int points = 200;
  std::uint64_t seed = 42;
  int order = 3;
  double tol = 1e-9;
  std::string out;
  std::string checks = "all";
  bool timing = false;
  unsigned threads = 0;
};

wefe::VerificationReport run(const RunConfig& rc, const std::set<std::string>& checks) {
  if (rc.family.empty() == rc.config.empty()) throw UsageError("give exactly one of --family or --config");
  if (rc.points < 1) throw UsageError("--points must be >= 1");
  if (rc.order < 3) throw UsageError("--order must be >= 3 (divergence identities need third-order jets)");
  wefe::VerifyOptions opt;
  opt.points = rc.points;
  opt.seed = rc.seed;
  opt.order = rc.order;
  opt.tol = rc.tol;
  opt.checks = checks;
  opt.threads = rc.threads;
  const wefe::ParamText given = parse_param_flags(rc.params);
  const auto t0 = std::chrono::steady_clock::now();
  wefe::VerificationReport rep;
  if (!rc.family.empty()) {
    const wefe::SolutionFamily* fam = nullptr;
    try {
      fam = &wefe::find_family(rc.family);
    } catch (const wefe::SchemaError& e) {
      throw UsageError(e.what());
    }
    try {
      rep = wefe::verify(*fam, given, opt);
    } catch (const wefe::SchemaError& e) {
      throw UsageError(e.what());
    }
  } else {
    wefe::MetricConfig cfg;
    try {
      cfg = wefe::load_metric_config_file(rc.config);
    } catch (const wefe::ConfigError& e) {
      throw UsageError(rc.config + ": " + e.what());
    }
    override_params(cfg, given);
    rep.params = given;
    wefe::verify_instance(instance_from_config(cfg, rc.config), opt, rep);
  }
  rep.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

int cmd_verify(const RunConfig& rc) {
  const wefe::VerificationReport rep = run(rc, parse_checks(rc.checks));
  const std::string text = wefe::report_json(rep, rc.timing).dump(2) + "\n";
  if (!rc.out.empty()) {
    if (const int rc_out = write_output(text, rc.out); rc_out != kPass) return rc_out;
  }
  std::cerr << rep.family << ": " << (rep.pass ? "pass" : "FAIL") << " (" << rep.points.size() << " points, seed "
            << rep.seed << ")\n";
  for (const auto& n : rep.notes) std::cerr << "  note: " << n << "\n";
  for (const auto& f : rep.failures) std::cerr << "  " << f << "\n";
  if (rc.out.empty()) std::cout << text;
  return rep.pass ? kPass : kFail;
}

int cmd_identities(const RunConfig& rc) {
  const wefe::VerificationReport rep = run(rc, {"identities"});
  json table = json::object();
  table["family"] = rep.family;
  table["points"] = rep.points.size();
  json rows = json::object();
  for (const auto& [name, value] : rep.max_residuals) {
    if (name == "gh" || name == "tau" || name == "cpe" || name.rfind("lemma", 0) == 0 || name == "grad_norm2") continue;
    rows[name] = {{"max_normalized_residual", value}, {"pass", value < rep.tol}};
  }
  table["identities"] = rows;
  table["verdict"] = rep.pass ? "pass" : "fail";
  std::cout << table.dump(2) << "\n";
  return rep.pass ? kPass : kFail;
}

// eval ----------------------------------------------------------------------------

json tensor_json(const wefe::RealTensor& t) {
  // Nested arrays, outermost index first.
  std::function<json(std::vector<int>&)> rec = [&](std::vector<int>& idx) -> json {
    if (static_cast<int>(idx.size()) == t.rank()) return t.at(idx);
    json arr = json::array();
    for (int i = 0; i < t.dim(); ++i) {
      idx.push_back(i);
      arr.push_back(rec(idx));
      idx.pop_back();
    }
    return arr;
  };
  std::vector<int> idx;
  return rec(idx);
}

std::vector<double> parse_point(const std::string& spec, const std::vector<std::string>& coords) {
  std::vector<double> pt(coords.size(), 0.0);
  std::vector<bool> seen(coords.size(), false);
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto comma = spec.find(',', start);
    parts.push_back(spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (parts.size() != coords.size())
    throw UsageError("--point needs " + std::to_string(coords.size()) + " values, got " + std::to_string(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    std::string p = parts[i];
    std::size_t slot = i;
    if (const auto eq = p.find('='); eq != std::string::npos) {
      const std::string name = p.substr(0, eq);
      const auto it = std::find(coords.begin(), coords.end(), name);
      if (it == coords.end()) throw UsageError("--point names unknown coordinate '" + name + "'");
      slot = static_cast<std::size_t>(it - coords.begin());
      p = p.substr(eq + 1);
    }
    if (seen[slot]) throw UsageError("--point gives coordinate '" + coords[slot] + "' twice");
    seen[slot] = true;
    try {
      pt[slot] = wefe::eval_double(wefe::parse(p, {}), {}, {});
    } catch (const std::exception& e) {
      throw UsageError("--point value '" + p + "': " + e.what());
    }
  }
  return pt;
}

const std::vector<std::string>& quantity_names() {
  static const std::vector<std::string> names{"christoffel", "riemann", "ricci", "tau", "weyl", "gh",
                                              "bakry_emery", "cpe",     "optical", "invariants"};
  return names;
}

int cmd_eval(const std::string& config_path, const std::string& point_spec, const std::string& quantities,
             const std::vector<std::string>& params, int order) {
  wefe::MetricConfig cfg;
  try {
    cfg = wefe::load_metric_config_file(config_path);
  } catch (const wefe::ConfigError& e) {
    throw UsageError(config_path + ": " + e.what());
  }
  override_params(cfg, parse_param_flags(params));
  if (order < 2) throw UsageError("--order must be >= 2");
  std::vector<std::string> wanted;
  {
    std::size_t start = 0;
    while (true) {
      const auto comma = quantities.find(',', start);
      std::string q = quantities.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (std::find(quantity_names().begin(), quantity_names().end(), q) == quantity_names().end())
        throw UsageError("unknown quantity '" + q + "'");
      wanted.push_back(q);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  const std::vector<double> pt = parse_point(point_spec, cfg.metric.chart().coords);
  if (std::find(wanted.begin(), wanted.end(), "cpe") != wanted.end() && !cfg.potential)
    throw UsageError("quantity 'cpe' needs density.f in the config");

  const double lambda = wefe::eval_double(cfg.lambda, {}, cfg.params);
  const wefe::PointGeometry pg =
      wefe::evaluate_geometry(cfg.metric, cfg.density.h, lambda, pt, cfg.params, order);
  const wefe::RealTensor giv = wefe::values(pg.g_inv);
  json out;
  out["point"] = pt;
  out["coords"] = cfg.metric.chart().coords;
  for (const auto& q : wanted) {
    if (q == "christoffel") {
      out[q] = tensor_json(wefe::values(pg.pack.gamma));
    } else if (q == "riemann") {
      out[q] = tensor_json(wefe::values(pg.pack.riemann));
    } else if (q == "ricci") {
      out[q] = tensor_json(wefe::values(pg.pack.ricci));
    } else if (q == "tau") {
      out[q] = pg.pack.scalar.value();
    } else if (q == "weyl") {
      const wefe::WeylResult w = wefe::weyl(pg.pack, pg.g);
      out[q] = tensor_json(wefe::values(w.tensor));
      out["weyl_vanishes_by_dimension"] = w.vanishes_by_dimension;
    } else if (q == "gh") {
      out[q] = tensor_json(wefe::values(pg.gh));
    } else if (q == "bakry_emery") {
      const wefe::Jet f = cfg.potential ? wefe::eval_jet(*cfg.potential, pt, cfg.params, order)
                                        : -wefe::log(pg.density.h);
      out[q] = tensor_json(wefe::values(wefe::bakry_emery(pg.pack, f, cfg.mu)));
    } else if (q == "cpe") {
      const wefe::Jet f = wefe::eval_jet(*cfg.potential, pt, cfg.params, order);
      out[q] = tensor_json(wefe::values(wefe::cpe_tensor(pg.pack, f, pg.g, pg.g_inv)));
    } else if (q == "optical") {
      const wefe::RealTensor nv = wefe::values(wefe::cov_derivative(pg.density.dh, pg.pack.gamma));
      const wefe::OpticalScalars o = wefe::optical_scalars(wefe::values(pg.density.grad), nv, wefe::values(pg.g), giv);
      out[q] = wefe::optical_json(o);
    } else if (q == "invariants") {
      const wefe::ScalarInvariants s = wefe::scalar_invariants(pg.pack, giv);
      out[q] = {{"tau", s.scalar}, {"ricci_square", s.ricci_square}, {"kretschmann", s.kretschmann}};
    }
  }
  std::cout << out.dump(2) << "\n";
  return kPass;
}

// export --------------------------------------------------------------------------

int cmd_export(const std::string& family, const std::vector<std::string>& params, const std::string& out) {
  wefe::FamilyInstance inst;
  try {
    inst = wefe::instantiate(family, parse_param_flags(params));
  } catch (const wefe::SchemaError& e) {
    throw UsageError(e.what());
  }
  return write_output(wefe::write_config_text(wefe::export_family(inst)), out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical checks of the vacuum weighted Einstein field equation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  bool list_json = false;
  auto* list = app.add_subcommand("list", "List catalog families with their anchors");
  list->add_flag("--json", list_json, "Machine-readable roster");

  RunConfig vc;
  auto add_run_options = [](CLI::App* sub, RunConfig& rc) {
    sub->add_option("--family", rc.family, "Catalog family id");
    sub->add_option("--config", rc.config, "Metric config file");
    sub->add_option("--param", rc.params, "Parameter binding name=value (repeatable)")
        ->expected(1)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    sub->add_option("--points", rc.points, "Number of sample points");
    sub->add_option("--seed", rc.seed, "Sampling seed");
    sub->add_option("--order", rc.order, "Jet order K");
    sub->add_option("--tol", rc.tol, "Residual tolerance");
    sub->add_option("--threads", rc.threads, "Worker threads (default: WEFE_THREADS or hardware)");
  };
  auto* verify = app.add_subcommand("verify", "Verify a family or config at sampled points; writes a JSON report");
  add_run_options(verify, vc);
  verify->add_option("--out", vc.out, "Report path (default: stdout)");
  verify->add_option("--checks", vc.checks, "Comma-separated checks to enable (default: all)");
  verify->add_flag("--timing", vc.timing, "Include wall-clock timing in the report header");

  RunConfig ic;
  ic.points = 20;
  auto* identities = app.add_subcommand("identities", "Run the identity suite only");
  add_run_options(identities, ic);

  std::string eval_config, eval_point, eval_quantities = "tau";
  std::vector<std::string> eval_params;
  int eval_order = 3;
  auto* eval = app.add_subcommand("eval", "Evaluate quantities of a config metric at one point");
  eval->add_option("--config", eval_config, "Metric config file")->required();
  eval->add_option("--point", eval_point, "Point, e.g. u=0.1,v=0.5,x=1 or 0.1,0.5,1")->required();
  eval->add_option("--quantities", eval_quantities,
                   "Comma-separated: christoffel,riemann,ricci,tau,weyl,gh,bakry_emery,cpe,optical,invariants");
  eval->add_option("--param", eval_params, "Parameter override name=value (repeatable)")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  eval->add_option("--order", eval_order, "Jet order K");

  std::string export_family_id, export_out;
  std::vector<std::string> export_params;
  auto* exp = app.add_subcommand("export", "Write a catalog family as a config file");
  exp->add_option("--family", export_family_id, "Catalog family id")->required();
  exp->add_option("--param", export_params, "Parameter binding name=value (repeatable)")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  exp->add_option("--out", export_out, "Output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }

  try {
    if (*list) return cmd_list(list_json);
    if (*verify) return cmd_verify(vc);
    if (*identities) return cmd_identities(ic);
    if (*eval) return cmd_eval(eval_config, eval_point, eval_quantities, eval_params, eval_order);
    if (*exp) return cmd_export(export_family_id, export_params, export_out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "evaluation error: " << e.what() << "\n";
    return kEval;
  }
  return kUsage;
}
