#ifndef WEFE_CATALOG_HPP
#define WEFE_CATALOG_HPP

// Built-in solution families of the vacuum weighted Einstein equation.
//
// A family is a set of string templates.  Real parameters stay symbolic and
// are bound through a ParamMap at evaluation time; scalar-function slots are
// substituted textually (as parenthesized expressions) for "{name}" before
// parsing.  Sampling is deterministic: mt19937_64 with a fixed 53-bit
// mapping to [0, 1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wefe/expr.hpp"
#include "wefe/curvature.hpp"
#include "wefe/tensor.hpp"

namespace wefe {

class SchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FamilyClass { PlaneWave, PpWave, Brinkmann, Kundt, EinsteinBackground, WarpedProduct };

inline std::string_view class_name(FamilyClass c) {
  switch (c) {
    case FamilyClass::PlaneWave: return "plane-wave";
    case FamilyClass::PpWave: return "pp-wave";
    case FamilyClass::Brinkmann: return "Brinkmann";
    case FamilyClass::Kundt: return "Kundt";
    case FamilyClass::EinsteinBackground: return "Einstein-background";
    case FamilyClass::WarpedProduct: return "warped-product";
  }
  return "?";
}

enum class GradientStatus { Parallel, Recurrent, Neither, NotApplicable };

inline std::string_view status_name(GradientStatus s) {
  switch (s) {
    case GradientStatus::Parallel: return "parallel";
    case GradientStatus::Recurrent: return "recurrent-not-parallel";
    case GradientStatus::Neither: return "neither";
    case GradientStatus::NotApplicable: return "n/a";
  }
  return "?";
}

struct RealParam {
  std::string name;
  double fallback = 0.0;
  std::string note;
};

struct FunctionSlot {
  std::string name;
  std::vector<std::string> variables;
  std::string fallback;
  std::string note;
};

struct ChoiceParam {
  std::string name;
  std::vector<std::string> options;
  std::string fallback;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct ExpectedTags {
  bool isotropic = false;
  int nilpotency = 0;
  std::optional<std::string> tau;  // expression in the real parameters
  FamilyClass family_class = FamilyClass::Brinkmann;
  std::optional<GradientStatus> gradient;
  bool kundt = false;
};

/// Template text after function-slot substitution.  Every string is an
/// expression in the chart coordinates and the real parameters.
struct FamilyTemplate {
  std::vector<std::string> metric;       // upper triangle, row-major
  std::string density;
  std::string lambda = "0";
  std::vector<std::string> constraints;  // must be > 0
  std::vector<std::string> nonvanishing; // family precondition, checked at samples
  std::string cpe_potential;             // optional f for the CPE check
};

/// Parameter values after schema validation.
struct Bindings {
  ParamMap reals;
  std::map<std::string, std::string, std::less<>> functions;
  std::map<std::string, std::string, std::less<>> choices;

  const std::string& choice(std::string_view name) const {
    auto it = choices.find(name);
    if (it == choices.end()) throw SchemaError("missing choice parameter '" + std::string(name) + "'");
    return it->second;
  }
};

struct SolutionFamily {
  std::string id;
  std::string description;
  std::string anchor;
  std::vector<std::string> coords;
  std::vector<Interval> box;
  std::vector<RealParam> reals;
  std::vector<FunctionSlot> functions;
  std::vector<ChoiceParam> choices;
  /// Expressions in the real parameters that must be > 0.
  std::vector<std::string> param_constraints;
  ExpectedTags tags;
  bool riemannian = false;
  std::function<FamilyTemplate(const Bindings&)> make;
  /// Base family and warp when the metric is built as a warped product.
  std::string warp_base;
  std::string warp;
};

struct FamilyInstance {
  std::string id;
  MetricSpec metric;
  DensitySpec density;
  Expr lambda;
  std::vector<Expr> nonvanishing;
  std::optional<Expr> cpe_potential;
  Bindings bindings;
  ExpectedTags tags;
  std::vector<Interval> box;
  /// False for ad-hoc metrics: no expected tags to compare against.
  bool expectations = true;

  ParamMap params() const { return bindings.reals; }
  double lambda_value() const { return eval_double(lambda, {}, bindings.reals); }
};

namespace detail {

inline std::string substitute(std::string text, const Bindings& b) {
  for (const auto& [name, body] : b.functions) {
    const std::string key = "{" + name + "}";
    const std::string repl = "(" + body + ")";
    for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + repl.size()))
      text.replace(pos, key.size(), repl);
  }
  if (auto open = text.find('{'); open != std::string::npos)
    throw SchemaError("unbound function slot in template: " + text.substr(open));
  return text;
}

inline std::vector<std::string> brinkmann3(std::string f) { return {"0", "1", "0", std::move(f), "0", "1"}; }

inline std::vector<std::string> param_names(const SolutionFamily& f) {
  std::vector<std::string> out;
  for (const auto& p : f.reals) out.push_back(p.name);
  return out;
}

inline const std::string kKundtF =
    "u^2/x^2 + ({alpha1} - 2*log(x)/v)*u + x^2*((log(x) - 2)*log(x) + 2)/v^2 + "
    "x^2*{alpha1}*(1 - log(x))/v + x^2*{alpha2} + x*{alpha3}";

inline const std::string kPpSpacelikeF =
    "(gamma1*{alpha} + 2*{gamma0}*diff({gamma0}, v, 2))*log({gamma0} + gamma1*x)/gamma1^2 - "
    "2*x*diff({gamma0}, v, 2)/gamma1 + {beta}";

inline const std::string kPlaneWaveF = "-diff({alpha}, v, 2)/{alpha}*x^2";

inline std::vector<SolutionFamily> build_catalog() {
  std::vector<SolutionFamily> out;
  const std::vector<std::string> uvx{"u", "v", "x"};

  {
    SolutionFamily f;
    f.id = "plane-wave-3d";
    f.description = "3-dim plane wave, isotropic density h = alpha(v)";
    f.anchor = "where h(u,v,x)=α(v) is an arbitrary function";
    f.coords = uvx;
    f.box = {{-1, 1}, {0.2, 2}, {-1, 1}};
    f.functions = {{"alpha", {"v"}, "2+sin(v)", "density profile, alpha'' != 0"}};
    f.tags = {true, 2, "0", FamilyClass::PlaneWave, GradientStatus::Recurrent, true};
    f.make = [](const Bindings& b) {
      FamilyTemplate t;
      t.metric = brinkmann3(substitute(kPlaneWaveF, b));
      t.density = substitute("{alpha}", b);
      t.nonvanishing = {substitute("diff({alpha}, v, 2)", b)};
      return t;
    };
    out.push_back(std::move(f));
  }
  {
    SolutionFamily f;
    f.id = "pp-wave-spacelike";
    f.description = "3-dim pp-wave with spacelike gradient, h = gamma1*x + gamma0(v)";
    f.anchor = "∇h is spacelike and (M,g) can be written";
    f.coords = uvx;
    f.box = {{-1, 1}, {-1, 1}, {-1, 1}};
    f.reals = {{"gamma1", 1.5, "nonzero constant"}};
    f.functions = {{"gamma0", {"v"}, "2+v^2", ""}, {"alpha", {"v"}, "2+sin(v)", ""}, {"beta", {"v"}, "0", ""}};
    f.param_constraints = {"gamma1^2"};
    f.tags = {false, 2, "0", FamilyClass::PpWave, std::nullopt, false};
    f.make = [](const Bindings& b) {
      FamilyTemplate t;
      t.metric = brinkmann3(substitute(kPpSpacelikeF, b));
      t.density = substitute("gamma1*x + {gamma0}", b);
      t.constraints = {substitute("{gamma0} + gamma1*x", b)};
      t.nonvanishing = {substitute("gamma1*{alpha} + 2*{gamma0}*diff({gamma0}, v, 2)", b)};
      return t;
    };
    out.push_back(std::move(f));
  }
  {
    SolutionFamily f;
    f.id = "kundt-3d";
    f.description = "3-dim Kundt solutions with 3-step nilpotent Ricci operator, h = v";
    f.anchor = "the Ricci operator is nilpotent and one of the following holds";
    f.coords = uvx;
    f.box = {{0.2, 2}, {0.2, 2}, {0.2, 2}};
    f.functions = {{"alpha1", {"v"}, "0", ""}, {"alpha2", {"v"}, "0", ""}, {"alpha3", {"v"}, "0", ""}};
    f.choices = {{"convention", {"du", "2du"}, "du"}};
    f.tags = {true, 3, "0", FamilyClass::Kundt, GradientStatus::Neither, true};
    f.make = [](const Bindings& b) {
      FamilyTemplate t;
      const std::string guv = b.choice("convention") == "2du" ? "2" : "1";
      t.metric = {"0", guv, "0", substitute(kKundtF, b), "-2*u/x", "1"};
      t.density = "v";
      t.constraints = {"v", "x"};
      return t;
    };
    out.push_back(std::move(f));
  }
  {
    SolutionFamily f;
    f.id = "ds-density";
    f.description = "de Sitter background with a non-isotropic density, arbitrary Lambda";
    f.anchor = "We consider de Sitter space with coordinates";
    f.coords = {"x", "y", "z"};
    f.box = {{-1, 1}, {0.6, 1.2}, {-0.6, 0.6}};
    f.reals = {{"kappa", 1.0, ""}, {"Lambda", 0.5, ""}, {"c1", 1.0, ""}, {"c2", 0.0, ""}};
    f.param_constraints = {"kappa^2"};
    f.tags = {false, 0, "6/kappa^2", FamilyClass::EinsteinBackground, std::nullopt, false};
    f.make = [](const Bindings&) {
      FamilyTemplate t;
      t.metric = {"-kappa^2*cos(y)^2", "0", "0", "kappa^2", "0", "kappa^2*sin(y)^2"};
      t.density = "-kappa^2*Lambda/2 + sin(y)*(c1*cos(z) + c2*sin(z))";
      t.lambda = "Lambda";
      t.constraints = {"sin(y)", "cos(y)"};
      return t;
    };
    out.push_back(std::move(f));
  }
  {
    SolutionFamily f;
    f.id = "ads-density";
    f.description = "anti-de Sitter background with a non-isotropic density, arbitrary Lambda";
    f.anchor = "We consider the Anti-de Sitter space with coordinates";
    f.coords = {"x", "y", "z"};
    f.box = {{-1, 1}, {0.3, 1.5}, {-0.6, 0.6}};
    f.reals = {{"kappa", 1.0, ""}, {"Lambda", 0.5, ""}, {"c1", 1.0, ""}, {"c2", 0.0, ""}};
    f.param_constraints = {"kappa^2"};
    f.tags = {false, 0, "-6/kappa^2", FamilyClass::EinsteinBackground, std::nullopt, false};
    f.make = [](const Bindings&) {
      FamilyTemplate t;
      t.metric = {"-kappa^2*cosh(y)^2", "0", "0", "kappa^2", "0", "kappa^2*sinh(y)^2"};
      t.density = "kappa^2*Lambda/2 + sinh(y)*(c1*cos(z) + c2*sin(z))";
      t.lambda = "Lambda";
      t.constraints = {"y"};
      return t;
    };
    out.push_back(std::move(f));
  }
  {
    SolutionFamily f;
    f.id = "pc-family";
    f.description = "locally homogeneous plane waves P_c with power-law density";
    f.anchor = "two families that are locally homogeneous";
    f.coords = uvx;
    f.box = {{-1, 1}, {0.5, 2}, {-1, 1}};
    f.reals = {{"c", 1.5, "positive constant"}, {"a1", 1.0, ""}, {"a2", 0.5, ""}};
    f.param_constraints = {"c"};
    f.tags = {true, 2, "0", FamilyClass::PlaneWave, GradientStatus::Recurrent, true};
    f.make = [](const Bindings&) {
      FamilyTemplate t;
      t.metric = brinkmann3("-4/(c^2*v^2)*x^2");
      t.density =
          "a1*exp((c - sqrt(c^2 + 16))/(2*c)*log(c*v)) + a2*exp((c + sqrt(c^2 + 16))/(2*c)*log(c*v))";
      t.constraints = {"v"};
      return t;
    };
    out.push_back(std::move(f));
  }
  {
    SolutionFamily f;
    f.id = "cahen-wallach";
    f.description = "Cahen-Wallach symmetric plane waves CW_eps (g_vv = -eps x^2)";
    f.anchor = "two families that are locally homogeneous";
    f.coords = uvx;
    f.box = {{-1, 1}, {-1, 1}, {-1, 1}};
    f.reals = {{"eps", 0.5, "nonzero"}, {"b1", 1.0, ""}, {"b2", 0.5, ""}};
    f.param_constraints = {"eps^2"};
    f.tags = {true, 2, "0", FamilyClass::PlaneWave, GradientStatus::Recurrent, true};
    f.make = [](const Bindings& b) {
      FamilyTemplate t;
      t.metric = brinkmann3("-eps*x^2");
      const bool positive = b.reals.at("eps") > 0.0;
      t.density = positive ? "b1*exp(v*sqrt(eps)) + b2*exp(-v*sqrt(eps))"
                           : "b1*cos(v*sqrt(-eps)) + b2*sin(v*sqrt(-eps))";
      t.cpe_potential = positive ? "b1*exp(v*sqrt(eps)) + b2*exp(-v*sqrt(eps)) - 1"
                                 : "b1*cos(v*sqrt(-eps)) + b2*sin(v*sqrt(-eps)) - 1";
      return t;
    };
    out.push_back(std::move(f));
  }
  {
    SolutionFamily f;
    f.id = "brinkmann-nonisotropic";
    f.description = "3-dim Brinkmann wave with 3-step nilpotent Ricci operator, h = vx";
    f.anchor = "The Ricci operator is given by";
    f.coords = uvx;
    f.box = {{-1, 1}, {0.2, 2}, {0.2, 2}};
    f.tags = {false, 3, "0", FamilyClass::Brinkmann, std::nullopt, false};
    f.make = [](const Bindings&) {
      FamilyTemplate t;
      t.metric = brinkmann3("((4*u*v - x^2)*log(v*x) + x^2)/(2*v^2)");
      t.density = "v*x";
      t.constraints = {"v", "x"};
      return t;
    };
    out.push_back(std::move(f));
  }
  {
    SolutionFamily f;
    f.id = "tau-positive";
    f.description = "Brinkmann wave with constant scalar curvature tau = kappa > 0";
    f.anchor = "any constant scalar curvature τ is realizable";
    f.coords = uvx;
    f.box = {{-1, 1}, {-1, 1}, {0.15, 1.65}};
    f.reals = {{"kappa", 1.0, "positive"}};
    f.functions = {{"alpha", {"v"}, "2+sin(v)", ""}};
    f.param_constraints = {"kappa"};
    f.tags = {false, 0, "kappa", FamilyClass::Brinkmann, std::nullopt, false};
    f.make = [](const Bindings& b) {
      FamilyTemplate t;
      t.metric = brinkmann3(substitute(
          "u^2*kappa/2 + {alpha}*(u + 2*sqrt(2/kappa)*arctanh(tan(x*sqrt(kappa)/(2*sqrt(2)))))", b));
      t.density = "cos(x*sqrt(kappa/2))";
      t.constraints = {"x*sqrt(kappa)/(2*sqrt(2)) - 0.05", "0.6 - x*sqrt(kappa)/(2*sqrt(2))"};
      return t;
    };
    out.push_back(std::move(f));
  }
  {
    SolutionFamily f;
    f.id = "tau-negative";
    f.description = "Brinkmann wave with constant scalar curvature tau = kappa < 0";
    f.anchor = "any constant scalar curvature τ is realizable";
    f.coords = uvx;
    f.box = {{-1, 1}, {-1, 1}, {-1, 1}};
    f.reals = {{"kappa", -1.0, "negative"}};
    f.functions = {{"alpha", {"v"}, "2+sin(v)", ""}};
    f.param_constraints = {"-kappa"};
    f.tags = {false, 0, "kappa", FamilyClass::Brinkmann, std::nullopt, false};
    f.make = [](const Bindings& b) {
      FamilyTemplate t;
      t.metric =
          brinkmann3(substitute("u^2*kappa/2 + sqrt(2/(-kappa))*{alpha}*exp(-x*sqrt(-kappa)/sqrt(2))", b));
      t.density = "exp(sqrt(-kappa/2)*x)";
      return t;
    };
    out.push_back(std::move(f));
  }
  {
    SolutionFamily f;
    f.id = "brinkmann-4d-nonpp";
    f.description = "4-dim isotropic Brinkmann wave that is not a pp-wave, h = v";
    f.anchor = "We consider local coordinates (u,v,x₁,x₂)";
    f.coords = {"u", "v", "x1", "x2"};
    f.box = {{-1, 1}, {0.5, 2}, {-1, 1}, {-1, 1}};
    f.tags = {true, 2, "0", FamilyClass::Brinkmann, GradientStatus::Recurrent, true};
    f.make = [](const Bindings&) {
      FamilyTemplate t;
      // Printed u-coefficient (-2 v x2 - x1 + 2 v x2) simplified to -x1.
      t.metric = {"0", "1", "0", "0",
                  "-x1*u + (-2*v^2*x1^3*x2 - v*x1^4 + 3*v*x1^2*x2^2 + 12*v*x1^2*x2 + x1^3)/(6*v)",
                  "0", "x1*x2 + v*x2^2", "1", "0", "1"};
      t.density = "v";
      t.constraints = {"v"};
      return t;
    };
    out.push_back(std::move(f));
  }
  {
    SolutionFamily f;
    f.id = "pp-wave-nd-ricciflat";
    f.description = "4-dim Ricci-flat pp-wave with harmonic profile F(x1,x2), h = v";
    f.anchor = "a pp-wave is Ricci-flat if and only if";
    f.coords = {"u", "v", "x1", "x2"};
    f.box = {{-1, 1}, {0.2, 2}, {-1, 1}, {-1, 1}};
    f.functions = {{"F", {"x1", "x2"}, "x1^2 - x2^2", "harmonic in (x1, x2)"}};
    f.tags = {true, 1, "0", FamilyClass::PpWave, GradientStatus::Parallel, true};
    f.make = [](const Bindings& b) {
      FamilyTemplate t;
      t.metric = {"0", "1", "0", "0", substitute("{F}", b), "0", "0", "1", "0", "1"};
      t.density = "v";
      t.constraints = {"v"};
      return t;
    };
    out.push_back(std::move(f));
  }

  auto warped = [&](std::string id, std::string description, std::string base, std::string warp,
                    std::vector<FunctionSlot> functions, std::vector<RealParam> reals, std::vector<Interval> box) {
    SolutionFamily f;
    f.id = std::move(id);
    f.description = std::move(description);
    f.anchor = "Weyl tensor (hence its curvature";
    f.coords = {"u", "v", "x", "t"};
    f.box = std::move(box);
    f.box.push_back({-1, 1});
    f.functions = std::move(functions);
    f.reals = std::move(reals);
    f.tags = {false, 1, "0", FamilyClass::WarpedProduct, GradientStatus::NotApplicable, false};
    f.warp_base = std::move(base);
    f.warp = std::move(warp);
    out.push_back(std::move(f));
  };
  warped("warped-M1", "plane wave x_alpha R, Ricci-flat of Weyl type N", "plane-wave-3d", "{alpha}",
         {{"alpha", {"v"}, "2+sin(v)", ""}}, {}, {{-1, 1}, {0.2, 2}, {-1, 1}});
  warped("warped-M2", "spacelike pp-wave x_h R, Ricci-flat of Weyl type N", "pp-wave-spacelike",
         "gamma1*x + {gamma0}",
         {{"gamma0", {"v"}, "2+v^2", ""}, {"alpha", {"v"}, "2+sin(v)", ""}, {"beta", {"v"}, "0", ""}},
         {{"gamma1", 1.5, "nonzero constant"}}, {{-1, 1}, {-1, 1}, {-1, 1}});
  warped("warped-M3", "Kundt solution x_v R, Ricci-flat of Weyl type III", "kundt-3d", "v",
         {{"alpha1", {"v"}, "0", ""}, {"alpha2", {"v"}, "0", ""}, {"alpha3", {"v"}, "0", ""}}, {},
         {{0.2, 2}, {0.2, 2}, {0.2, 2}});
  return out;
}

}  // namespace detail

inline const std::vector<SolutionFamily>& catalog() {
  static const std::vector<SolutionFamily> families = detail::build_catalog();
  return families;
}

struct FamilyListing {
  std::string id;
  std::string description;
  std::string anchor;
};

inline std::vector<FamilyListing> list_families() {
  std::vector<FamilyListing> out;
  for (const auto& f : catalog()) out.push_back({f.id, f.description, f.anchor});
  return out;
}

inline const SolutionFamily& find_family(std::string_view id) {
  for (const auto& f : catalog())
    if (f.id == id) return f;
  throw SchemaError("unknown family '" + std::string(id) + "'");
}

/// User parameter text: name -> value text (a constant expression for reals,
/// an expression in the slot variables for functions, an option name for choices).
using ParamText = std::map<std::string, std::string, std::less<>>;

inline Bindings bind_params(const SolutionFamily& f, const ParamText& given) {
  Bindings b;
  for (const auto& [name, _] : given) {
    const bool known =
        std::any_of(f.reals.begin(), f.reals.end(), [&](const auto& p) { return p.name == name; }) ||
        std::any_of(f.functions.begin(), f.functions.end(), [&](const auto& p) { return p.name == name; }) ||
        std::any_of(f.choices.begin(), f.choices.end(), [&](const auto& p) { return p.name == name; });
    if (!known) throw SchemaError("family '" + f.id + "' has no parameter '" + name + "'");
  }
  for (const auto& p : f.reals) {
    auto it = given.find(p.name);
    if (it == given.end()) {
      b.reals[p.name] = p.fallback;
      continue;
    }
    try {
      b.reals[p.name] = eval_double(parse(it->second, {}), {}, {});
    } catch (const std::exception& e) {
      throw SchemaError("parameter '" + p.name + "' must be a real constant: " + e.what());
    }
  }
  for (const auto& s : f.functions) {
    auto it = given.find(s.name);
    const std::string text = it == given.end() ? s.fallback : it->second;
    try {
      (void)parse(text, s.variables);
    } catch (const ParseError& e) {
      std::string vars;
      for (const auto& v : s.variables) vars += (vars.empty() ? "" : ",") + v;
      throw SchemaError("function slot '" + s.name + "(" + vars + ")': " + e.what());
    }
    b.functions[s.name] = text;
  }
  for (const auto& c : f.choices) {
    auto it = given.find(c.name);
    const std::string text = it == given.end() ? c.fallback : it->second;
    if (std::find(c.options.begin(), c.options.end(), text) == c.options.end())
      throw SchemaError("parameter '" + c.name + "' must be one of the listed options, got '" + text + "'");
    b.choices[c.name] = text;
  }
  for (const auto& pc : f.param_constraints) {
    const double v = eval_double(parse(pc, {}, detail::param_names(f)), {}, b.reals);
    if (!(v > 0.0)) throw SchemaError("parameter constraint '" + pc + " > 0' violated for family '" + f.id + "'");
  }
  return b;
}

inline FamilyInstance instantiate(const SolutionFamily& f, const ParamText& given = {}) {
  FamilyInstance inst;
  inst.id = f.id;
  inst.bindings = bind_params(f, given);
  inst.tags = f.tags;
  inst.box = f.box;
  const auto params = detail::param_names(f);
  auto p = [&](const std::string& text) { return parse(text, f.coords, params); };

  if (!f.warp_base.empty()) {
    const SolutionFamily& base = find_family(f.warp_base);
    ParamText base_params;
    for (const auto& [k, v] : inst.bindings.functions) base_params[k] = v;
    for (const auto& [k, v] : inst.bindings.reals) base_params[k] = detail::format_double(v);
    const FamilyInstance b = instantiate(base, base_params);
    const std::vector<std::string> base_coords(f.coords.begin(), f.coords.end() - 1);
    const Expr warp = parse(detail::substitute(f.warp, inst.bindings), base_coords, params);
    inst.metric = warped_product(b.metric, warp);
    inst.density.h = p("1");
    inst.lambda = parse("0", {});
    return inst;
  }

  const FamilyTemplate t = f.make(inst.bindings);
  Chart chart;
  chart.coords = f.coords;
  for (const auto& c : t.constraints) chart.constraints.push_back(p(c));
  chart.constraints.push_back(p(t.density));
  std::vector<Expr> upper;
  for (const auto& m : t.metric) upper.push_back(p(m));
  inst.metric = MetricSpec(std::move(chart), std::move(upper), f.riemannian);
  inst.density.h = p(t.density);
  inst.lambda = parse(t.lambda, {}, params);
  for (const auto& nv : t.nonvanishing) inst.nonvanishing.push_back(p(nv));
  if (!t.cpe_potential.empty()) inst.cpe_potential = p(t.cpe_potential);
  return inst;
}

inline FamilyInstance instantiate(std::string_view id, const ParamText& given = {}) {
  return instantiate(find_family(id), given);
}

// Sampling ------------------------------------------------------------------------

inline constexpr double kSampleMargin = 1e-3;

/// Uniform double in [0, 1) from the top 53 bits.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

using Point = std::vector<double>;

inline std::vector<Point> sample_points(const Chart& chart, const std::vector<Interval>& box, const ParamMap& params,
                                        int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  if (static_cast<int>(box.size()) != chart.dim()) throw std::invalid_argument("sampling box does not match chart");
  std::mt19937_64 rng(seed);
  std::vector<Point> out;
  const long cap = 100L * count;
  Point p(box.size());
  for (long attempt = 0; attempt < cap && static_cast<int>(out.size()) < count; ++attempt) {
    for (std::size_t i = 0; i < box.size(); ++i) p[i] = box[i].lo + (box[i].hi - box[i].lo) * unit_uniform(rng);
    try {
      check_domain(chart, p, params, kSampleMargin);
    } catch (const DomainError&) {
      continue;
    }
    out.push_back(p);
  }
  if (static_cast<int>(out.size()) < count)
    throw SamplingError("rejection cap of " + std::to_string(cap) + " attempts exceeded with " +
                        std::to_string(out.size()) + "/" + std::to_string(count) +
                        " admissible points (box and domain constraints inconsistent?)");
  return out;
}

inline std::vector<Point> sample_points(const FamilyInstance& inst, int count, std::uint64_t seed) {
  return sample_points(inst.metric.chart(), inst.box, inst.bindings.reals, count, seed);
}

}  // namespace wefe

#endif  // WEFE_CATALOG_HPP
