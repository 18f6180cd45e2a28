// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "support.hpp"
#include "wefe/analysis.hpp"
#include "wefe/report.hpp"

using namespace wefe;
namespace wt = wefe::testing;

namespace {

constexpr double kTol = 1e-9;
constexpr int kPoints = 200;

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

PointGeometry geometry(const FamilyInstance& inst, const Point& p, const GammaHook& hook = {}) {
  return evaluate_geometry(inst.metric, inst.density.h, inst.lambda_value(), p, inst.bindings.reals, 3, hook);
}

double gh_scale(const PointGeometry& pg) {
  return 1 + std::max({std::abs(pg.density.h.value()), max_abs(values(pg.pack.ricci)),
                       max_abs(values(pg.density.hessian)), std::abs(pg.density.laplacian.value()),
                       std::abs(pg.lambda), max_abs(values(pg.g))});
}

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(3);
  s << x;
  return s.str();
}

// Richardson-extrapolated central difference, O(h^4).
double fd_richardson(const std::function<wt::LD(const std::vector<wt::LD>&)>& f, const std::vector<wt::LD>& p,
                     const MultiIndex& m) {
  const wt::LD coarse = wt::fd_partial(f, p, m, 2e-3L), fine = wt::fd_partial(f, p, m, 1e-3L);
  return static_cast<double>((4 * fine - coarse) / 3);
}

Expr expr3(const std::string& s) { return parse(s, {"u", "v", "x"}); }

MetricSpec brinkmann(const std::vector<std::string>& coords, const std::string& f) {
  const int n = static_cast<int>(coords.size());
  std::vector<Expr> up;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      std::string s = "0";
      if (i == 0 && j == 1) s = "1";
      if (i == 1 && j == 1) s = f;
      if (i >= 2 && i == j) s = "1";
      up.push_back(parse(s, coords));
    }
  return MetricSpec(Chart{coords, {}}, up);
}

// 1 ----------------------------------------------------------------------------------

Outcome solution_residuals() {
  Outcome o;
  std::vector<std::pair<std::string, ParamText>> runs;
  for (const char* a : {"2+sin(v)", "exp(v)", "1+v^2"}) runs.push_back({"plane-wave-3d", {{"alpha", a}}});
  runs.push_back({"pp-wave-spacelike", {}});
  runs.push_back({"kundt-3d", {}});
  runs.push_back({"kundt-3d", {{"alpha1", "v"}, {"alpha2", "v^2"}, {"alpha3", "1"}}});
  runs.push_back({"kundt-3d", {{"alpha1", "sin(v)"}, {"alpha2", "exp(v)"}, {"alpha3", "v^3"}}});
  runs.push_back({"ds-density", {}});
  runs.push_back({"ads-density", {}});
  runs.push_back({"pc-family", {}});
  runs.push_back({"cahen-wallach", {{"eps", "0.5"}}});
  runs.push_back({"cahen-wallach", {{"eps", "-0.5"}}});
  runs.push_back({"brinkmann-nonisotropic", {}});
  runs.push_back({"tau-positive", {}});
  runs.push_back({"tau-negative", {}});
  runs.push_back({"brinkmann-4d-nonpp", {}});
  double worst = 0;
  for (const auto& [id, params] : runs) {
    const FamilyInstance inst = instantiate(id, params);
    for (const auto& p : sample_points(inst, kPoints, 42)) {
      const PointGeometry pg = geometry(inst, p);
      const double r = max_abs(values(pg.gh)) / gh_scale(pg);
      worst = std::max(worst, r);
      o.require(r < kTol, id + " residual " + fmt(r));
    }
  }
  if (o.ok) o.detail = std::to_string(runs.size()) + " runs x " + std::to_string(kPoints) + " points, worst " + fmt(worst);
  return o;
}

// 2 ----------------------------------------------------------------------------------

Outcome golden_scalars() {
  Outcome o;
  for (const auto& [id, want] : {std::pair<const char*, double>{"ds-density", 6.0}, {"ads-density", -6.0}}) {
    const FamilyInstance inst = instantiate(id, {{"kappa", "1"}});
    for (const auto& p : sample_points(inst, 50, 3)) {
      const double tau = geometry(inst, p).pack.scalar.value();
      o.require(std::abs(tau - want) < 1e-10, std::string(id) + " tau " + fmt(tau));
    }
  }
  // tau = d_u^2 F against a long-double finite-difference oracle.
  const std::vector<std::string> uvx{"u", "v", "x"};
  const std::vector<std::string> profiles{"u^2*sin(v)*x + u*x^3", "exp(u*v)*x^2", "u^2/x^2 + u*log(x)/v",
                                          "(1+u^2)*cos(x)"};
  std::mt19937_64 rng(5);
  for (const auto& f : profiles) {
    const MetricSpec m = brinkmann(uvx, f);
    const Expr fe = expr3(f);
    for (int k = 0; k < 30; ++k) {
      const std::vector<double> p{wt::uniform(rng, -1, 1), wt::uniform(rng, 0.5, 1.5), wt::uniform(rng, 0.5, 1.5)};
      const PointGeometry pg = evaluate_geometry(m, parse("1", uvx), 0, p, {}, 3);
      auto fn = [&](const std::vector<wt::LD>& q) { return wt::ld_eval(fe.root(), q, {}); };
      const double want = fd_richardson(fn, {p[0], p[1], p[2]}, {2, 0, 0});
      o.require(std::abs(pg.pack.scalar.value() - want) < 1e-9 * (1 + std::abs(want)), "Brinkmann tau for " + f);
    }
  }
  // pp-wave: rho_vv = -1/2 transverse Laplacian of F, all else zero.
  const std::vector<std::string> c4{"u", "v", "x1", "x2"};
  for (const std::string f : {"sin(v)*x1^2 + v*x2^3 + x1*x2", "exp(x1)*cos(v) + x2^4"}) {
    const MetricSpec m = brinkmann(c4, f);
    const Expr fe = parse(f, c4);
    for (int k = 0; k < 30; ++k) {
      const std::vector<double> p{wt::uniform(rng, -1, 1), wt::uniform(rng, -1, 1), wt::uniform(rng, -1, 1),
                                  wt::uniform(rng, -1, 1)};
      const PointGeometry pg = evaluate_geometry(m, parse("1", c4), 0, p, {}, 3);
      auto fn = [&](const std::vector<wt::LD>& q) { return wt::ld_eval(fe.root(), q, {}); };
      const std::vector<wt::LD> pl(p.begin(), p.end());
      const double lap = fd_richardson(fn, pl, {0, 0, 2, 0}) + fd_richardson(fn, pl, {0, 0, 0, 2});
      const RealTensor rho = values(pg.pack.ricci);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          const double want = (i == 1 && j == 1) ? -0.5 * lap : 0.0;
          o.require(std::abs(rho(i, j) - want) < 1e-9 * (1 + std::abs(lap)), "pp-wave Ricci for " + f);
        }
    }
  }
  return o;
}

// 3 ----------------------------------------------------------------------------------

Outcome nilpotency_classes() {
  Outcome o;
  std::string log;
  for (const auto& [id, k] : {std::pair<const char*, int>{"plane-wave-3d", 2}, {"kundt-3d", 3}, {"pp-wave-nd-ricciflat", 1}}) {
    const FamilyInstance inst = instantiate(id);
    int agree = 0, used = 0, excluded = 0;
    for (const auto& p : sample_points(inst, kPoints, 42)) {
      const PointGeometry pg = geometry(inst, p);
      const NilpotencyResult nil = nilpotency(ricci_operator(pg.pack, values(pg.g_inv)), kTol);
      if (nil.degenerate) {
        ++excluded;
        continue;
      }
      ++used;
      agree += nil.index == k;
      if (k == 1) {
        const double hes = max_abs(values(pg.density.hessian));
        o.require(hes < kTol * gh_scale(pg), std::string(id) + " Hes_h " + fmt(hes));
      }
    }
    o.require(used > 0 && agree >= 0.99 * used,
              std::string(id) + " agreement " + std::to_string(agree) + "/" + std::to_string(used));
    log += std::string(log.empty() ? "" : ", ") + id + " " + std::to_string(agree) + "/" + std::to_string(used) +
           " (" + std::to_string(excluded) + " degenerate excluded)";
  }
  if (o.ok) o.detail = log;
  return o;
}

// 4 ----------------------------------------------------------------------------------

Outcome isotropic_lemma() {
  Outcome o;
  int families = 0;
  for (const auto& fam : catalog()) {
    if (!fam.tags.isotropic) continue;
    ++families;
    const FamilyInstance inst = instantiate(fam);
    for (const auto& p : sample_points(inst, kPoints, 42)) {
      const LemmaResiduals l = lemma_residuals(geometry(inst, p));
      const std::pair<const char*, const Residual*> rs[] = {{"|grad h|^2", &l.grad_norm2}, {"tau", &l.tau},
                                                             {"Delta h", &l.laplacian},    {"Hes(grad h)", &l.hes_grad},
                                                             {"Ric(grad h)", &l.ricci_grad}, {"h rho - Hes", &l.reduced}};
      for (const auto& [name, r] : rs) o.require(r->passes(kTol), fam.id + " " + name + " " + fmt(r->normalized()));
    }
  }
  if (o.ok) o.detail = std::to_string(families) + " isotropic families";
  return o;
}

// 5 ----------------------------------------------------------------------------------

Outcome identity_suite() {
  Outcome o;
  std::mt19937_64 rng(2026);
  int metrics = 0, tries = 0;
  while (metrics < 100 && tries < 1000) {
    ++tries;
    const auto rm = wt::perturbed_minkowski(rng, 3 + metrics % 2);
    std::vector<std::vector<double>> pts;
    for (int attempt = 0; attempt < 60 && pts.size() < 20; ++attempt)
      if (const auto p = wt::lorentzian_point(rng, rm)) pts.push_back(*p);
    if (pts.size() < 20) continue;
    for (const auto& p : pts) {
      const PointGeometry pg = evaluate_geometry(rm.metric, rm.density, 0.3, p, {}, 3);
      for (const auto& [name, r] : identity_residuals(pg))
        o.require(r.passes(kTol), "perturbed Minkowski " + name + " " + fmt(r.normalized()));
    }
    ++metrics;
  }
  o.require(metrics == 100, "only " + std::to_string(metrics) + " random metrics sampled");
  for (const auto& fam : catalog()) {
    const FamilyInstance inst = instantiate(fam);
    for (const auto& p : sample_points(inst, 50, 42))
      for (const auto& [name, r] : identity_residuals(geometry(inst, p)))
        o.require(r.passes(kTol), fam.id + " " + name + " " + fmt(r.normalized()));
  }
  const FamilyInstance ds = instantiate("ds-density");
  const GammaHook corrupt = [](JetTensor& g) { g(0, 1, 1) += 1e-3; };
  for (const auto& p : sample_points(ds, 5, 1)) {
    const IdentityTable bad = identity_residuals(geometry(ds, p, corrupt));
    o.require(!bad.at("bianchi_contracted").passes(kTol), "mutation not detected by contracted Bianchi");
    o.require(!bad.at("metric_compatibility").passes(kTol), "mutation not detected by metric compatibility");
  }
  if (o.ok) o.detail = "100 random metrics x 20 points, catalog, mutation detected";
  return o;
}

// 6 ----------------------------------------------------------------------------------

Outcome optical() {
  Outcome o;
  for (const char* id : {"kundt-3d", "plane-wave-3d"}) {
    const FamilyInstance inst = instantiate(id);
    for (const auto& p : sample_points(inst, kPoints, 42)) {
      const GradientOptics go = gradient_optics(geometry(inst, p));
      const OpticalScalars& s = go.scalars;
      o.require(std::abs(s.expansion) < 1e-10 * go.scale && std::abs(s.shear2) < 1e-10 * go.scale &&
                    std::abs(s.twist2) < 1e-10 * go.scale,
                std::string(id) + " optical scalars");
    }
  }
  for (const auto& fam : catalog()) {
    const FamilyInstance inst = instantiate(fam);
    for (const auto& p : sample_points(inst, 50, 42)) {
      const double w = gradient_optics(geometry(inst, p)).scalars.twist2;
      o.require(std::abs(w) < 1e-10, fam.id + " twist " + fmt(w));
    }
  }
  return o;
}

// 7 ----------------------------------------------------------------------------------

Outcome vsi() {
  Outcome o;
  const FamilyInstance k = instantiate("kundt-3d");
  for (const auto& p : sample_points(k, kPoints, 42)) {
    const PointGeometry pg = geometry(k, p);
    const RealTensor giv = values(pg.g_inv);
    const ScalarInvariants s = scalar_invariants(pg.pack, giv);
    const double r = max_abs(values(pg.pack.riemann)), gi = max_abs(giv);
    const double scale = 1 + std::max(r, gi);
    o.require(std::abs(s.scalar) < kTol * scale, "tau " + fmt(s.scalar));
    o.require(std::abs(s.ricci_square) < kTol * scale * scale, "rho.rho " + fmt(s.ricci_square));
    o.require(std::abs(s.kretschmann) < kTol * scale * scale, "Kretschmann " + fmt(s.kretschmann));
  }
  return o;
}

// 8 ----------------------------------------------------------------------------------

Outcome warped() {
  Outcome o;
  const std::vector<double> du{1, 0, 0, 0};
  for (const char* id : {"warped-M1", "warped-M2", "warped-M3"}) {
    const FamilyInstance inst = instantiate(id);
    for (const auto& p : sample_points(inst, kPoints, 42)) {
      const PointGeometry pg = geometry(inst, p);
      const double scale = 1 + std::max(max_abs(values(pg.pack.riemann)), max_abs(values(pg.g)));
      o.require(max_abs(values(pg.pack.ricci)) < kTol * scale, std::string(id) + " not Ricci-flat");
      const RealTensor w = values(weyl(pg.pack, pg.g).tensor);
      const NullContraction nc = weyl_null_contraction(w, du);
      const double v = p[1], x = p[2];
      if (std::string(id) == "warped-M1") {
        const double a = 2 + std::sin(v), a2 = -std::sin(v);
        o.require(std::abs(w(1, 2, 1, 2) - a2 / a) < 1e-8 * std::abs(a2 / a) + 1e-14, "M1 W(v,x,v,x)");
      }
      if (std::string(id) == "warped-M3") {
        const double want = -1 / (v * x);
        o.require(std::abs(w(0, 1, 1, 2) - want) < 1e-8 * std::abs(want), "M3 W(u,v,v,x)");
        for (int j = 0; j < 4; ++j)
          for (int k = 0; k < 4; ++k)
            for (int l = 0; l < 4; ++l) {
              double c = 0;
              if (j == 1 && k == 1 && l == 2) c = want;
              if (j == 1 && k == 2 && l == 1) c = -want;
              o.require(std::abs(nc.contraction(j, k, l) - c) < 1e-8 * scale, "M3 contraction pattern");
            }
      } else {
        o.require(nc.max_abs < kTol * scale, std::string(id) + " contraction " + fmt(nc.max_abs));
      }
    }
  }
  return o;
}

// 9 ----------------------------------------------------------------------------------

Outcome four_dim() {
  Outcome o;
  const FamilyInstance pp = instantiate("pp-wave-nd-ricciflat");
  for (const auto& p : sample_points(pp, kPoints, 42)) {
    const PointGeometry pg = geometry(pp, p);
    const RealTensor r = values(pg.pack.riemann);
    const std::vector<double> grad = vec_values(pg.density.grad);
    // grad h = d_u, so its orthogonal complement is spanned by d_u, d_x1, d_x2.
    o.require(std::abs(grad[0] - 1) < 1e-14 && max_abs(std::vector<double>(grad.begin() + 1, grad.end())) < 1e-14,
              "pp-wave gradient is not d_u");
    double worst = 0;
    for (int i : {0, 2, 3})
      for (int j : {0, 2, 3})
        for (int k = 0; k < 4; ++k)
          for (int l = 0; l < 4; ++l) worst = std::max(worst, std::abs(r(i, j, k, l)));
    o.require(worst < kTol * (1 + max_abs(r)), "pp-wave R(V^perp, V^perp) " + fmt(worst));
  }
  const FamilyInstance b = instantiate("brinkmann-4d-nonpp");
  for (const auto& p : sample_points(b, kPoints, 42)) {
    const PointGeometry pg = geometry(b, p);
    const double r = values(pg.pack.riemann)(2, 3, 1, 3);
    o.require(std::abs(r - 0.5) < 1e-9, "R(x1,x2,v,x2) " + fmt(r));
    const ClassificationResult c = classify(pg, kTol);
    o.require(c.gradient == GradientStatus::Recurrent, "gradient status not recurrent");
    o.require(c.nilpotency == 2, "nilpotency " + std::to_string(c.nilpotency));
  }
  return o;
}

// 10 ---------------------------------------------------------------------------------

Outcome cpe() {
  Outcome o;
  for (const char* eps : {"0.5", "-0.5", "2", "-1.3"}) {
    const FamilyInstance inst = instantiate("cahen-wallach", {{"eps", eps}});
    for (const auto& p : sample_points(inst, kPoints, 42)) {
      const PointGeometry pg = geometry(inst, p);
      const Jet f = eval_jet(*inst.cpe_potential, p, inst.bindings.reals, 3);
      const JetTensor c = cpe_tensor(pg.pack, f, pg.g, pg.g_inv);
      const double scale =
          1 + std::max({std::abs(f.value()), max_abs(values(pg.pack.ricci)),
                        max_abs(values(hessian(f, pg.pack.gamma))), max_abs(values(pg.g)), std::abs(pg.pack.scalar.value())});
      o.require(max_abs(values(c)) < kTol * scale, std::string("eps=") + eps + " CPE " + fmt(max_abs(values(c))));
    }
  }
  return o;
}

// 11 ---------------------------------------------------------------------------------

Outcome ad_vs_fd() {
  Outcome o;
  std::mt19937_64 rng(11);
  const std::vector<std::string> coords{"u", "v", "x"};
  const auto indices = wt::multi_indices(3, 3);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Expr e = parse(wt::random_expr(rng, coords, 3), coords);
    std::vector<double> p(3);
    for (double& c : p) c = wt::uniform(rng, -0.5, 0.5);
    const Jet j = eval_jet(e, p, {}, 3);
    auto f = [&](const std::vector<wt::LD>& q) { return wt::ld_eval(e.root(), q, {}); };
    const std::vector<wt::LD> pl(p.begin(), p.end());
    for (const auto& m : indices) {
      const double fd = static_cast<double>(wt::fd_partial(f, pl, m, 1e-4L));
      const double rel = std::abs(j.partial(m) - fd) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, rel);
      o.require(rel < 1e-5, serialize(e) + " relative error " + fmt(rel));
    }
  }
  if (o.ok) o.detail = "100 pairs x " + std::to_string(indices.size()) + " partials, worst " + fmt(worst);
  return o;
}

// 12 ---------------------------------------------------------------------------------

Outcome convention() {
  Outcome o;
  std::optional<std::string> first;
  for (std::uint64_t seed : {1u, 7u, 42u, 1234u, 99991u}) {
    const ConventionResolution r = resolve_kundt_convention("kundt-3d", {}, seed);
    o.require(r.selected.has_value() && !r.ambiguous, "no unique convention for seed " + std::to_string(seed));
    if (!r.selected) continue;
    if (!first) first = r.selected;
    o.require(*first == *r.selected, "selection changes with seed");
  }
  VerifyOptions opt;
  opt.points = 20;
  const json doc = report_json(verify("kundt-3d", {}, opt));
  std::ifstream in(WEFE_SOURCE_DIR "/tests/golden/kundt-3d.json");
  o.require(static_cast<bool>(in), "golden report missing");
  if (in) {
    const json golden = json::parse(in);
    o.require(checksum_matches(golden), "golden checksum");
    for (const char* key : {"family", "convention", "seed", "order"})
      o.require(golden["meta"][key] == doc["meta"][key], std::string("meta.") + key + " differs from golden");
    o.require(golden["classification"] == doc["classification"], "classification differs from golden");
    o.require(golden["aggregate"]["verdict"] == doc["aggregate"]["verdict"], "verdict differs from golden");
    o.require(golden["points"].size() == doc["points"].size(), "point count differs from golden");
    if (first) o.require(golden["meta"]["convention"] == *first, "golden records a different convention");
  }
  if (o.ok && first) o.detail = "selected " + *first;
  return o;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"solution residuals", solution_residuals},
      {"golden scalars", golden_scalars},
      {"nilpotency", nilpotency_classes},
      {"isotropic lemma", isotropic_lemma},
      {"identity suite", identity_suite},
      {"Kundt optical scalars", optical},
      {"VSI invariants", vsi},
      {"warped products", warped},
      {"4-dim theorems", four_dim},
      {"CPE", cpe},
      {"AD vs finite differences", ad_vs_fd},
      {"convention resolution", convention},
  };
  int failed = 0, index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    Outcome r;
    try {
      r = run();
    } catch (const std::exception& e) {
      r.ok = false;
      r.detail = std::string("exception: ") + e.what();
    }
    failed += !r.ok;
    std::cout << (r.ok ? "PASS" : "FAIL") << "  " << index << ". " << name;
    if (!r.detail.empty()) std::cout << " (" << r.detail << ")";
    std::cout << "\n";
  }
  std::cout << (failed == 0 ? "all criteria pass" : std::to_string(failed) + " criteria fail") << "\n";
  return failed == 0 ? 0 : 1;
}
