#ifndef WEFE_ANALYSIS_HPP
#define WEFE_ANALYSIS_HPP

// Pointwise classification, the identity suite and the verification pipeline.
//
// Thresholds (all multiplied by a per-formula scale = 1 + max |input|):
//   residual checks          tol (default 1e-9)
//   isotropy of grad h       1e-10
//   nilpotency               |Ric^k| < tol * scale^k
//   recurrence               2x2 minors < tol * scale^2
// A point is degenerate when a discriminating quantity sits below 10 * tol.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <limits>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "wefe/catalog.hpp"
#include "wefe/curvature.hpp"

namespace wefe {

inline constexpr double kIsotropyTol = 1e-10;
inline constexpr double kDegenerateFactor = 10.0;

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Small matrix helpers -----------------------------------------------------------

inline RealTensor matmul(const RealTensor& a, const RealTensor& b) {
  const int n = a.dim();
  RealTensor c(n, {Slot::Up, Slot::Down}, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < n; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline std::vector<double> lower_contract(const RealTensor& t, const std::vector<double>& v) {
  const int n = t.dim();
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i)] += t(i, j) * v[static_cast<std::size_t>(j)];
  return out;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Nilpotency ---------------------------------------------------------------------

struct NilpotencyResult {
  int index = 0;
  /// The power below the index is itself small (within 10 * tol).
  bool degenerate = false;
};

inline NilpotencyResult nilpotency(const RealTensor& ric, double tol) {
  const int n = ric.dim();
  const double scale = 1.0 + max_abs(ric);
  RealTensor power = ric;
  double prev_norm = 0.0;
  for (int k = 1; k <= n; ++k) {
    if (k > 1) power = matmul(power, ric);
    const double norm = max_abs(power);
    if (norm < tol * std::pow(scale, k)) {
      const bool degenerate = k > 1 && prev_norm < kDegenerateFactor * tol * std::pow(scale, k - 1);
      return {k, degenerate};
    }
    prev_norm = norm;
  }
  return {0, false};
}

/// Smallest k <= n with |Ric^k|_max < tol * scale^k, else 0.
inline int nilpotency_index(const RealTensor& ric, double tol) { return nilpotency(ric, tol).index; }

// Gradient status ----------------------------------------------------------------

class VanishingGradientError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// grad: (nabla h)^i; hes: Hes_h (down, down); both at the point.
inline GradientStatus gradient_status(const std::vector<double>& grad, const RealTensor& hes,
                                      const RealTensor& g_inv, double tol) {
  const int n = hes.dim();
  const double scale = 1.0 + std::max({max_abs(grad), max_abs(hes), max_abs(g_inv)});
  if (max_abs(grad) < tol * scale) throw VanishingGradientError("gradient of h vanishes at the point");
  if (max_abs(hes) < tol * scale) return GradientStatus::Parallel;
  const RealTensor op = [&] {
    RealTensor o(n, {Slot::Up, Slot::Down}, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) o(i, j) += g_inv(i, k) * hes(k, j);
    return o;
  }();
  for (int j = 0; j < n; ++j)
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        const double minor = op(a, j) * grad[static_cast<std::size_t>(b)] - op(b, j) * grad[static_cast<std::size_t>(a)];
        if (std::abs(minor) >= tol * scale * scale) return GradientStatus::Neither;
      }
  return GradientStatus::Recurrent;
}

// Kundt test -----------------------------------------------------------------------

/// geodesic: (nabla_{grad h} grad h) lowered; optical scalars of grad h.
inline bool kundt_check(const std::vector<double>& geodesic, const OpticalScalars& o, double scale, double tol) {
  const double optical = std::max({std::abs(o.expansion), std::abs(o.shear2), std::abs(o.twist2)});
  return max_abs(geodesic) < tol * scale && optical < tol * scale;
}

// Weyl null contraction -------------------------------------------------------------

struct NullContraction {
  RealTensor contraction;  // (iota_V C)_{jkl} = V^i C_{ijkl}
  double max_abs = 0.0;
};

inline NullContraction weyl_null_contraction(const RealTensor& c, const std::vector<double>& v) {
  const int n = c.dim();
  if (n < 4) throw std::invalid_argument("Weyl null contraction needs n >= 4");
  NullContraction out{RealTensor::covariant(n, 3, 0.0), 0.0};
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += v[static_cast<std::size_t>(i)] * c(i, j, k, l);
        out.contraction(j, k, l) = s;
        out.max_abs = std::max(out.max_abs, std::abs(s));
      }
  return out;
}

// Pointwise geometry ------------------------------------------------------------

/// Optional corruption of the connection before curvature is assembled.
using GammaHook = std::function<void(JetTensor&)>;

struct PointGeometry {
  std::vector<double> point;
  JetTensor g;
  JetTensor g_inv;
  CurvaturePack pack;
  DensityPack density;
  JetTensor gh;
  double lambda = 0.0;
  int order = 3;
};

inline PointGeometry evaluate_geometry(const MetricSpec& metric, const Expr& h, double lambda,
                                       std::span<const double> point, const ParamMap& params, int order,
                                       const GammaHook& hook = {}) {
  if (order < 2) throw InsufficientOrderError("curvature needs jet order >= 2");
  PointGeometry pg;
  pg.point.assign(point.begin(), point.end());
  pg.order = order;
  pg.lambda = lambda;
  pg.g = metric_eval(metric, point, params, order);
  const Signature sig = signature(values(pg.g));
  if (metric.riemannian() ? sig.negative != 0 : sig.negative != 1)
    throw DegenerateMetricError("metric has signature (" + std::to_string(sig.negative) + "," +
                                std::to_string(sig.positive) + ") at " + format_point(metric.chart(), point));
  pg.g_inv = metric_inverse(pg.g);
  JetTensor gamma = christoffel(pg.g, pg.g_inv);
  if (hook) hook(gamma);
  pg.pack = riemann_ricci_scalar(std::move(gamma), pg.g, pg.g_inv);
  Jet hj;
  try {
    hj = eval_jet(h, point, params, order);
  } catch (const DomainError& e) {
    throw DomainError("density h = '" + serialize(h) + "' at " + format_point(metric.chart(), point) + ": " +
                      e.what());
  }
  pg.density = density_pack(hj, pg.g_inv, pg.pack.gamma, lambda);
  pg.gh = weighted_einstein(pg.pack, pg.density, pg.g);
  return pg;
}

inline std::vector<double> vec_values(const JetTensor& t) {
  std::vector<double> out;
  for (const auto& j : t.data()) out.push_back(j.value());
  return out;
}

// Identity suite ----------------------------------------------------------------

struct Residual {
  double value = 0.0;
  double scale = 1.0;

  bool passes(double tol) const { return value < tol * scale; }
  double normalized() const { return value / scale; }
};

inline Residual residual_of(double value, std::initializer_list<double> inputs) {
  double s = 0.0;
  for (double x : inputs) s = std::max(s, std::abs(x));
  return {value, 1.0 + s};
}

/// Residual table keyed by identity name.
using IdentityTable = std::map<std::string, Residual>;

inline IdentityTable identity_residuals(const PointGeometry& pg) {
  const int n = pg.g.dim();
  IdentityTable out;
  const CurvaturePack& p = pg.pack;
  const RealTensor r = values(p.riemann);
  const RealTensor rup = values(p.riemann_up);

  double sym = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          const double x = r(i, j, k, l);
          sym = std::max({sym, std::abs(x + r(j, i, k, l)), std::abs(x + r(i, j, l, k)), std::abs(x - r(k, l, i, j))});
        }
  out["riemann_symmetries"] = residual_of(sym, {max_abs(r)});

  double b1 = 0.0;
  for (int m = 0; m < n; ++m)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          b1 = std::max(b1, std::abs(rup(m, i, j, k) + rup(m, j, k, i) + rup(m, k, i, j)));
  out["bianchi_first"] = residual_of(b1, {max_abs(rup)});

  const RealTensor gv = values(pg.g);
  const RealTensor giv = values(pg.g_inv);
  const RealTensor rho = values(p.ricci);
  const RealTensor hes = values(pg.density.hessian);
  const double tau = p.scalar.value();
  const double h = pg.density.h.value();
  const double lap = pg.density.laplacian.value();

  double tr = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) tr += giv(i, j) * pg.gh(i, j).value();
  const double tr_expected = h * tau + (n - 1) * lap + n * pg.lambda;
  out["trace"] = residual_of(std::abs(tr - tr_expected), {h, tau, lap, pg.lambda, max_abs(gv), max_abs(giv),
                                                          max_abs(rho), max_abs(hes)});

  const JetTensor nabla_g = cov_derivative(truncated(pg.g, pg.order - 1), p.gamma);
  out["metric_compatibility"] = residual_of(max_abs(nabla_g), {max_abs(gv), max_abs(values(p.gamma))});

  // h rho^f + (Delta h + Lambda) g = G^h with f = -log h, mu = 1.
  {
    const Jet f = -log(pg.density.h);
    const JetTensor be = bakry_emery(p, f, 1.0);
    double m = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        m = std::max(m, std::abs(h * be(i, j).value() + (lap + pg.lambda) * gv(i, j) - pg.gh(i, j).value()));
    out["bakry_emery"] = residual_of(m, {h, lap, pg.lambda, max_abs(values(be)), max_abs(gv), max_abs(rho),
                                         max_abs(hes)});
  }

  if (pg.order >= 3) {
    const JetTensor div_rho = divergence(p.ricci, pg.g_inv, p.gamma);
    double cb = 0.0;
    for (int j = 0; j < n; ++j) cb = std::max(cb, std::abs(div_rho(j).value() - 0.5 * p.scalar.d(j)));
    out["bianchi_contracted"] = residual_of(cb, {max_abs(div_rho), max_abs(values(p.gamma)), max_abs(rho), tau});

    const JetTensor div_hes = divergence(pg.density.hessian, pg.g_inv, p.gamma);
    const std::vector<double> grad = vec_values(pg.density.grad);
    double bo = 0.0;
    for (int j = 0; j < n; ++j) {
      double iota = 0.0;
      for (int i = 0; i < n; ++i) iota += grad[static_cast<std::size_t>(i)] * rho(i, j);
      bo = std::max(bo, std::abs(div_hes(j).value() - pg.density.laplacian.d(j) - iota));
    }
    out["bochner"] = residual_of(bo, {max_abs(div_hes), max_abs(grad), max_abs(rho), max_abs(hes)});

    // div G^h = (h/2) d tau for any h; on solutions tau is constant and div G^h = 0.
    const JetTensor div_gh = divergence(pg.gh, pg.g_inv, p.gamma);
    double dg = 0.0, dtau = 0.0;
    for (int j = 0; j < n; ++j) {
      dg = std::max(dg, std::abs(div_gh(j).value() - 0.5 * h * p.scalar.d(j)));
      dtau = std::max(dtau, std::abs(p.scalar.d(j)));
    }
    out["div_gh"] = residual_of(dg, {h, max_abs(div_gh), h * dtau, max_abs(rho), max_abs(hes), max_abs(gv),
                                     max_abs(giv)});
  }
  return out;
}

// Classification at a point -----------------------------------------------------

struct ClassificationResult {
  int nilpotency = 0;
  bool nilpotency_degenerate = false;
  GradientStatus gradient = GradientStatus::NotApplicable;
  bool isotropic = false;
  std::optional<bool> kundt;          // only when isotropic
  std::optional<double> weyl_null;    // n >= 4 and isotropic: max |iota_{grad h} C|
};

struct LemmaResiduals {
  Residual grad_norm2;
  Residual tau;
  Residual laplacian;
  Residual hes_grad;     // Hes_h(grad h, .)
  Residual ricci_grad;   // rho(grad h, .)
  Residual reduced;      // h rho - Hes_h
};

inline LemmaResiduals lemma_residuals(const PointGeometry& pg) {
  const int n = pg.g.dim();
  const std::vector<double> grad = vec_values(pg.density.grad);
  const RealTensor hes = values(pg.density.hessian);
  const RealTensor rho = values(pg.pack.ricci);
  const double h = pg.density.h.value();
  const std::vector<double> dh = vec_values(pg.density.dh);
  LemmaResiduals l;
  l.grad_norm2 = residual_of(std::abs(pg.density.grad_norm2.value()), {max_abs(dh), max_abs(values(pg.g_inv))});
  l.tau = residual_of(std::abs(pg.pack.scalar.value()), {max_abs(rho), max_abs(values(pg.g_inv))});
  l.laplacian = residual_of(std::abs(pg.density.laplacian.value()), {max_abs(hes), max_abs(values(pg.g_inv))});
  l.hes_grad = residual_of(max_abs(lower_contract(hes, grad)), {max_abs(hes), max_abs(grad)});
  l.ricci_grad = residual_of(max_abs(lower_contract(rho, grad)), {max_abs(rho), max_abs(grad)});
  double red = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) red = std::max(red, std::abs(h * rho(i, j) - hes(i, j)));
  l.reduced = residual_of(red, {h, max_abs(rho), max_abs(hes)});
  return l;
}

/// Optical scalars of grad h computed from nabla(dh), plus the geodesic vector.
struct GradientOptics {
  OpticalScalars scalars;
  std::vector<double> geodesic;  // Hes_h(grad h, .)
  double scale = 1.0;
};

inline GradientOptics gradient_optics(const PointGeometry& pg) {
  const JetTensor ndh = cov_derivative(pg.density.dh, pg.pack.gamma);
  const RealTensor nv = values(ndh);
  const std::vector<double> grad = vec_values(pg.density.grad);
  GradientOptics go;
  go.scalars = optical_scalars_unchecked(nv, values(pg.g_inv));
  go.geodesic = lower_contract(nv, grad);
  go.scale = 1.0 + std::max({max_abs(nv), max_abs(grad), max_abs(values(pg.g_inv))});
  return go;
}

inline ClassificationResult classify(const PointGeometry& pg, double tol) {
  ClassificationResult c;
  const RealTensor giv = values(pg.g_inv);
  const NilpotencyResult nil = nilpotency(ricci_operator(pg.pack, giv), tol);
  c.nilpotency = nil.index;
  c.nilpotency_degenerate = nil.degenerate;
  const std::vector<double> grad = vec_values(pg.density.grad);
  const RealTensor hes = values(pg.density.hessian);
  try {
    c.gradient = gradient_status(grad, hes, giv, tol);
  } catch (const VanishingGradientError&) {
    c.gradient = GradientStatus::NotApplicable;
  }
  const LemmaResiduals l = lemma_residuals(pg);
  const double grad_scale = 1.0 + std::max(max_abs(grad), max_abs(giv));
  c.isotropic = l.grad_norm2.passes(kIsotropyTol) && max_abs(grad) >= tol * grad_scale;
  if (c.isotropic) {
    const GradientOptics go = gradient_optics(pg);
    c.kundt = kundt_check(go.geodesic, go.scalars, go.scale, tol);
    if (pg.g.dim() >= 4) {
      const WeylResult w = weyl(pg.pack, pg.g);
      c.weyl_null = weyl_null_contraction(values(w.tensor), grad).max_abs;
    }
  }
  return c;
}

// Kundt convention ----------------------------------------------------------------

struct ConventionResolution {
  std::optional<std::string> selected;
  std::map<std::string, double> max_residual;  // normalized G^h residual per variant
  bool ambiguous = false;
  std::string note;
};

inline double max_normalized_gh(const FamilyInstance& inst, const std::vector<Point>& pts, int order) {
  double worst = 0.0;
  const double lambda = inst.lambda_value();
  for (const auto& p : pts) {
    const PointGeometry pg = evaluate_geometry(inst.metric, inst.density.h, lambda, p, inst.bindings.reals, order);
    const RealTensor gv = values(pg.g);
    const RealTensor rho = values(pg.pack.ricci);
    const RealTensor hes = values(pg.density.hessian);
    const Residual r = residual_of(max_abs(pg.gh), {pg.density.h.value(), max_abs(rho), max_abs(hes),
                                                    pg.density.laplacian.value(), lambda, max_abs(gv)});
    worst = std::max(worst, r.normalized());
  }
  return worst;
}

inline ConventionResolution resolve_kundt_convention(const SolutionFamily& family, const ParamText& given,
                                                     std::uint64_t seed, double tol = 1e-9, int order = 3) {
  auto it = std::find_if(family.choices.begin(), family.choices.end(),
                         [](const ChoiceParam& c) { return c.name == "convention"; });
  if (it == family.choices.end())
    throw PreconditionError("convention resolution applies only to the kundt-3d family, not '" + family.id + "'");
  ConventionResolution res;
  std::vector<std::string> passing;
  for (const std::string& conv : {std::string("du"), std::string("2du")}) {
    ParamText p = given;
    p["convention"] = conv;
    const FamilyInstance inst = instantiate(family, p);
    const auto pts = sample_points(inst, 20, seed);
    const double worst = max_normalized_gh(inst, pts, order);
    res.max_residual[conv] = worst;
    if (worst < tol) passing.push_back(conv);
  }
  if (passing.size() == 1) {
    res.selected = passing.front();
    res.note = "exactly one convention solves G^h = 0";
  } else {
    res.ambiguous = true;
    res.note = passing.empty() ? "neither convention solves G^h = 0; flagged for review"
                               : "both conventions solve G^h = 0; flagged for review";
  }
  return res;
}

inline ConventionResolution resolve_kundt_convention(std::string_view id, const ParamText& given = {},
                                                     std::uint64_t seed = 7, double tol = 1e-9) {
  return resolve_kundt_convention(find_family(id), given, seed, tol);
}

// Verification pipeline ----------------------------------------------------------

inline const std::vector<std::string>& all_checks() {
  static const std::vector<std::string> checks{"gh",       "identities", "isotropy", "classification",
                                               "tau",      "precondition", "cpe",    "convention"};
  return checks;
}

struct VerifyOptions {
  int points = 200;
  std::uint64_t seed = 42;
  int order = 3;
  double tol = 1e-9;
  std::set<std::string> checks{all_checks().begin(), all_checks().end()};
  unsigned threads = 0;  // 0: hardware concurrency
  GammaHook gamma_hook;

  bool enabled(const std::string& c) const { return checks.count(c) != 0; }
};

struct PointRecord {
  Point coords;
  Residual gh;
  IdentityTable identities;
  ClassificationResult classification;
  std::optional<LemmaResiduals> lemma;
  std::optional<Residual> tau;
  std::optional<Residual> cpe;
  std::optional<OpticalScalars> optical;
  double precondition = 0.0;  // min |nonvanishing quantity| / scale
  bool degenerate = false;
};

struct ModalSummary {
  int nilpotency = 0;
  double nilpotency_agreement = 0.0;
  std::string gradient_status;
  double gradient_agreement = 0.0;
  std::optional<bool> kundt;
  bool isotropic = false;
  std::vector<std::size_t> excluded;
};

struct VerificationReport {
  std::string family;
  ParamText params;
  ParamMap resolved_reals;
  std::map<std::string, std::string, std::less<>> resolved_functions;
  std::uint64_t seed = 0;
  int order = 3;
  double tol = 1e-9;
  std::string convention = "n/a";
  std::optional<ConventionResolution> resolution;
  std::vector<std::string> checks;
  std::vector<PointRecord> points;
  std::map<std::string, double> max_residuals;  // normalized
  ModalSummary classification;
  std::vector<std::string> failures;
  std::vector<std::string> notes;
  bool pass = false;
  double elapsed_ms = 0.0;
};

inline unsigned worker_count(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("WEFE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on a small worker pool.  The first
/// exception (lowest index) is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned t = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < t; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace detail {

inline PointRecord analyse_point(const FamilyInstance& inst, const Point& p, const VerifyOptions& opt,
                                 const std::optional<Expr>& tau_expected) {
  PointRecord rec;
  rec.coords = p;
  const double lambda = inst.lambda_value();
  const ParamMap& params = inst.bindings.reals;
  PointGeometry pg;
  try {
    pg = evaluate_geometry(inst.metric, inst.density.h, lambda, p, params, opt.order, opt.gamma_hook);
  } catch (const std::exception& e) {
    throw EvaluationError(std::string(e.what()) + " [at " + format_point(inst.metric.chart(), p) + "]");
  }
  const RealTensor gv = values(pg.g);
  const RealTensor rho = values(pg.pack.ricci);
  const RealTensor hes = values(pg.density.hessian);
  const double h = pg.density.h.value();
  rec.gh = residual_of(max_abs(pg.gh), {h, max_abs(rho), max_abs(hes), pg.density.laplacian.value(), lambda,
                                        max_abs(gv)});
  rec.identities = identity_residuals(pg);
  rec.classification = classify(pg, opt.tol);
  if (inst.expectations && inst.tags.isotropic) rec.lemma = lemma_residuals(pg);
  if (rec.classification.isotropic) rec.optical = gradient_optics(pg).scalars;
  if (tau_expected) {
    const double want = eval_double(*tau_expected, {}, params);
    const double got = pg.pack.scalar.value();
    rec.tau = residual_of(std::abs(got - want), {want, max_abs(rho), max_abs(values(pg.g_inv))});
  }
  if (inst.cpe_potential) {
    const Jet f = eval_jet(*inst.cpe_potential, p, params, opt.order);
    const JetTensor cpe = cpe_tensor(pg.pack, f, pg.g, pg.g_inv);
    rec.cpe = residual_of(max_abs(cpe), {f.value(), max_abs(rho), pg.pack.scalar.value(), max_abs(gv)});
  }
  rec.precondition = std::numeric_limits<double>::infinity();
  for (const auto& e : inst.nonvanishing) {
    const Jet q = eval_jet(e, p, params, 1);
    rec.precondition = std::min(rec.precondition, std::abs(q.value()) / (1.0 + q.max_abs()));
  }
  const bool precondition_small = rec.precondition < kDegenerateFactor * opt.tol;
  rec.degenerate = precondition_small || rec.classification.nilpotency_degenerate;
  return rec;
}

}  // namespace detail

inline void verify_instance(const FamilyInstance& inst, const VerifyOptions& opt, VerificationReport& rep);

inline VerificationReport verify(const SolutionFamily& family, const ParamText& given, const VerifyOptions& opt) {
  VerificationReport rep;
  rep.family = family.id;
  rep.params = given;
  rep.seed = opt.seed;
  rep.order = opt.order;
  rep.tol = opt.tol;
  rep.checks.assign(opt.checks.begin(), opt.checks.end());

  ParamText params = given;
  const bool has_convention = std::any_of(family.choices.begin(), family.choices.end(),
                                          [](const ChoiceParam& c) { return c.name == "convention"; });
  if (has_convention) {
    rep.resolution = resolve_kundt_convention(family, given, opt.seed, opt.tol, opt.order);
    if (auto it = given.find("convention"); it != given.end()) {
      rep.convention = it->second;
    } else {
      rep.convention = rep.resolution->selected.value_or("du");
      params["convention"] = rep.convention;
    }
    if (opt.enabled("convention") && rep.resolution->ambiguous)
      rep.failures.push_back("convention: " + rep.resolution->note);
  }

  verify_instance(instantiate(family, params), opt, rep);
  return rep;
}

/// Runs the pipeline on an instance; `rep` may already carry meta and failures.
inline void verify_instance(const FamilyInstance& inst, const VerifyOptions& opt, VerificationReport& rep) {
  if (rep.family.empty()) rep.family = inst.id;
  rep.seed = opt.seed;
  rep.order = opt.order;
  rep.tol = opt.tol;
  rep.checks.assign(opt.checks.begin(), opt.checks.end());
  rep.resolved_reals = inst.bindings.reals;
  rep.resolved_functions = inst.bindings.functions;
  const std::vector<Point> pts = sample_points(inst, opt.points, opt.seed);
  std::optional<Expr> tau_expected;
  if (inst.expectations && inst.tags.tau) {
    std::vector<std::string> names;
    for (const auto& [k, _] : inst.bindings.reals) names.push_back(k);
    tau_expected = parse(*inst.tags.tau, {}, names);
  }

  rep.points.resize(pts.size());
  parallel_for(pts.size(), worker_count(opt.threads),
               [&](std::size_t i) { rep.points[i] = detail::analyse_point(inst, pts[i], opt, tau_expected); });

  // Reduction in sample order.
  auto bump = [&](const std::string& key, const Residual& r) {
    double& m = rep.max_residuals[key];
    m = std::max(m, r.normalized());
  };
  std::map<std::string, std::size_t> first_fail;
  auto fail = [&](const std::string& what, std::size_t i) { first_fail.emplace(what, i); };

  std::map<int, std::size_t> nil_votes;
  std::map<std::string, std::size_t> grad_votes;
  std::size_t counted = 0, kundt_true = 0, kundt_seen = 0, iso_count = 0, degenerate_pre = 0;
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    const PointRecord& r = rep.points[i];
    bump("gh", r.gh);
    if (opt.enabled("gh") && !r.gh.passes(opt.tol)) fail("gh", i);
    for (const auto& [name, res] : r.identities) {
      bump(name, res);
      if (opt.enabled("identities") && !res.passes(opt.tol)) fail("identity " + name, i);
    }
    if (r.lemma && inst.expectations) {
      const LemmaResiduals& l = *r.lemma;
      const std::pair<const char*, const Residual*> items[] = {
          {"lemma_tau", &l.tau},           {"lemma_laplacian", &l.laplacian}, {"lemma_hes_grad", &l.hes_grad},
          {"lemma_ricci_grad", &l.ricci_grad}, {"lemma_reduced", &l.reduced}};
      bump("grad_norm2", l.grad_norm2);
      if (opt.enabled("isotropy") && !l.grad_norm2.passes(kIsotropyTol)) fail("isotropy grad_norm2", i);
      for (const auto& [name, res] : items) {
        bump(name, *res);
        if (opt.enabled("isotropy") && !res->passes(opt.tol)) fail(std::string("isotropy ") + name, i);
      }
    }
    if (r.tau) {
      bump("tau", *r.tau);
      if (opt.enabled("tau") && !r.tau->passes(opt.tol)) fail("tau", i);
    }
    if (r.cpe) {
      bump("cpe", *r.cpe);
      if (opt.enabled("cpe") && !r.cpe->passes(opt.tol)) fail("cpe", i);
    }
    if (r.precondition < kDegenerateFactor * opt.tol) ++degenerate_pre;
    if (r.classification.isotropic) ++iso_count;
    if (r.degenerate) {
      rep.classification.excluded.push_back(i);
      continue;
    }
    ++counted;
    ++nil_votes[r.classification.nilpotency];
    ++grad_votes[std::string(status_name(r.classification.gradient))];
    if (r.classification.kundt) {
      ++kundt_seen;
      if (*r.classification.kundt) ++kundt_true;
    }
  }

  ModalSummary& ms = rep.classification;
  auto modal = [](const auto& votes) {
    auto best = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it)
      if (it->second > best->second) best = it;
    return best;
  };
  if (counted > 0) {
    const auto n = modal(nil_votes);
    ms.nilpotency = n->first;
    ms.nilpotency_agreement = static_cast<double>(n->second) / static_cast<double>(counted);
    const auto g = modal(grad_votes);
    ms.gradient_status = g->first;
    ms.gradient_agreement = static_cast<double>(g->second) / static_cast<double>(counted);
  }
  if (kundt_seen > 0) ms.kundt = kundt_true == kundt_seen;
  ms.isotropic = iso_count == rep.points.size();

  const double n_points = static_cast<double>(rep.points.size());
  if (!inst.nonvanishing.empty() && static_cast<double>(degenerate_pre) > 0.01 * n_points) {
    rep.notes.push_back("family precondition broken: a required nonvanishing quantity is ~0 at " +
                        std::to_string(degenerate_pre) + " of " + std::to_string(rep.points.size()) + " samples");
    if (opt.enabled("precondition")) rep.failures.push_back("precondition: " + rep.notes.back());
  }
  if (!ms.excluded.empty())
    rep.notes.push_back(std::to_string(ms.excluded.size()) + " degenerate samples excluded from classification");

  if (opt.enabled("classification") && inst.expectations) {
    const ExpectedTags& t = inst.tags;
    const double nil_share = counted ? static_cast<double>(nil_votes[t.nilpotency]) / static_cast<double>(counted) : 0.0;
    if (counted == 0 || nil_share < 0.99)
      rep.failures.push_back("classification: nilpotency " + std::to_string(t.nilpotency) + " expected, matched at " +
                             std::to_string(nil_share * 100.0) + "% of samples (modal " +
                             std::to_string(ms.nilpotency) + ")");
    if (t.gradient) {
      const std::string want(status_name(*t.gradient));
      const double share =
          counted ? static_cast<double>(grad_votes[want]) / static_cast<double>(counted) : 0.0;
      if (share < 0.99)
        rep.failures.push_back("classification: gradient status " + want + " expected, matched at " +
                               std::to_string(share * 100.0) + "% of samples");
    }
    if (t.kundt && ms.kundt != true) rep.failures.push_back("classification: Kundt test failed");
    if (t.isotropic && !ms.isotropic) rep.failures.push_back("classification: grad h not lightlike at every sample");
    // Consistency with the main classification theorem.
    for (std::size_t i = 0; i < rep.points.size(); ++i) {
      const ClassificationResult& c = rep.points[i].classification;
      if (!c.isotropic || rep.points[i].degenerate) continue;
      const bool ok = (c.nilpotency == 1 && c.gradient == GradientStatus::Parallel) ||
                      (c.nilpotency == 2 &&
                       (c.gradient == GradientStatus::Parallel || c.gradient == GradientStatus::Recurrent)) ||
                      (c.nilpotency == 3 && c.kundt == true);
      if (!ok) fail("classification theorem consistency", i);
    }
  }

  for (const auto& [what, i] : first_fail)
    rep.failures.push_back(what + " failed (first at sample " + std::to_string(i) + ", " +
                           format_point(inst.metric.chart(), rep.points[i].coords) + ")");
  rep.pass = rep.failures.empty();
}

inline VerificationReport verify(std::string_view id, const ParamText& given, const VerifyOptions& opt) {
  return verify(find_family(id), given, opt);
}

}  // namespace wefe

#endif  // WEFE_ANALYSIS_HPP
