// Test-only oracles and generators.  Nothing here calls into the jet layer:
// the long-double evaluator walks the AST on its own so finite-difference
// oracles stay independent of the code under test.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <random>
#include <string>
#include <vector>

#include "wefe/analysis.hpp"
#include "wefe/expr.hpp"

namespace wefe::testing {

using LD = long double;

inline LD ld_eval(const Node& n, const std::vector<LD>& p, const ParamMap& params) {
  auto arg = [&](std::size_t i) { return ld_eval(*n.args[i], p, params); };
  switch (n.op) {
    case Op::Number: return n.number;
    case Op::Coord: return p[static_cast<std::size_t>(n.index)];
    case Op::Param: return params.at(n.name);
    case Op::Neg: return -arg(0);
    case Op::Add: return arg(0) + arg(1);
    case Op::Sub: return arg(0) - arg(1);
    case Op::Mul: return arg(0) * arg(1);
    case Op::Div: return arg(0) / arg(1);
    case Op::PowInt: return std::pow(arg(0), static_cast<LD>(n.index));
    case Op::PowReal: return std::pow(arg(0), static_cast<LD>(n.number));
    case Op::Call: {
      const LD x = arg(0);
      switch (n.func) {
        case Func::Exp: return std::exp(x);
        case Func::Log: return std::log(x);
        case Func::Sin: return std::sin(x);
        case Func::Cos: return std::cos(x);
        case Func::Sinh: return std::sinh(x);
        case Func::Cosh: return std::cosh(x);
        case Func::Tan: return std::tan(x);
        case Func::Arctanh: return std::atanh(x);
        case Func::Sqrt: return std::sqrt(x);
      }
      break;
    }
    case Op::Diff: {
      // Central differences in long double, nested count times.
      const LD h = 1e-3L;
      std::function<LD(std::vector<LD>, int)> d = [&](std::vector<LD> q, int k) -> LD {
        if (k == 0) return ld_eval(*n.args[0], q, params);
        auto up = q, dn = q;
        up[static_cast<std::size_t>(n.index)] += h;
        dn[static_cast<std::size_t>(n.index)] -= h;
        return (d(up, k - 1) - d(dn, k - 1)) / (2 * h);
      };
      return d(p, n.count);
    }
  }
  throw std::logic_error("ld_eval: unknown node");
}

inline LD ld_eval(const Expr& e, const std::vector<double>& p, const ParamMap& params = {}) {
  return ld_eval(e.root(), std::vector<LD>(p.begin(), p.end()), params);
}

/// Central finite-difference partial d^m f at p with step h (nested per unit).
inline LD fd_partial(const std::function<LD(const std::vector<LD>&)>& f, const std::vector<LD>& p,
                     const MultiIndex& m, LD h) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] == 0) continue;
    MultiIndex rest = m;
    rest[i] -= 1;
    auto up = p, dn = p;
    up[i] += h;
    dn[i] -= h;
    return (fd_partial(f, up, rest, h) - fd_partial(f, dn, rest, h)) / (2 * h);
  }
  return f(p);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline int pick(std::mt19937_64& rng, int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); }

/// Random expression text over the primitives, well defined on [-0.5, 0.5]^n.
inline std::string random_expr(std::mt19937_64& rng, const std::vector<std::string>& coords, int depth) {
  auto leaf = [&]() -> std::string {
    if (pick(rng, 3) == 0) return detail::format_double(std::round(uniform(rng, 0.2, 2.0) * 100) / 100);
    return coords[static_cast<std::size_t>(pick(rng, static_cast<int>(coords.size())))];
  };
  if (depth <= 0) return leaf();
  const std::string a = random_expr(rng, coords, depth - 1);
  switch (pick(rng, 15)) {
    case 0: return "(" + a + " + " + random_expr(rng, coords, depth - 1) + ")";
    case 1: return "(" + a + " - " + random_expr(rng, coords, depth - 1) + ")";
    case 2: return "(" + a + ")*(" + random_expr(rng, coords, depth - 1) + ")";
    case 3: return "(" + a + ")/(1.5 + (" + random_expr(rng, coords, depth - 1) + ")^2)";
    case 4: return "(" + a + ")^" + std::to_string(2 + pick(rng, 2));
    case 5: return "exp(0.5*sin(" + a + "))";
    case 6: return "log(2 + (" + a + ")^2)";
    case 7: return "sin(" + a + ")";
    case 8: return "cos(" + a + ")";
    case 9: return "sinh(0.5*sin(" + a + "))";
    case 10: return "cosh(0.5*sin(" + a + "))";
    case 11: return "tan(0.4*sin(" + a + "))";
    case 12: return "arctanh(0.5*sin(" + a + "))";
    case 13: return "sqrt(1.2 + (" + a + ")^2)";
    default: return "(1.3 + cos(" + a + "))^0.7";
  }
}

inline std::vector<MultiIndex> multi_indices(int dim, int max_degree) {
  std::vector<MultiIndex> out;
  MultiIndex m(static_cast<std::size_t>(dim), 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t pos, int left) {
    if (pos == m.size()) {
      out.push_back(m);
      return;
    }
    for (int k = 0; k <= left; ++k) {
      m[pos] = k;
      rec(pos + 1, left - k);
    }
    m[pos] = 0;
  };
  rec(0, max_degree);
  return out;
}

/// Random polynomial with `terms` monomials of degree <= 3, coefficients in [-c, c].
inline std::string random_poly(std::mt19937_64& rng, const std::vector<std::string>& coords, int terms, double c) {
  std::string s;
  for (int t = 0; t < terms; ++t) {
    const double coef = uniform(rng, -c, c);
    std::string mono = detail::format_double(coef);
    const int degree = pick(rng, 4);
    for (int d = 0; d < degree; ++d) mono += "*" + coords[static_cast<std::size_t>(pick(rng, static_cast<int>(coords.size())))];
    s += (t ? " + (" : "(") + mono + ")";
  }
  return s;
}

/// Minkowski metric plus random polynomial perturbations, with a random density.
struct RandomMetric {
  MetricSpec metric;
  Expr density;
};

inline RandomMetric perturbed_minkowski(std::mt19937_64& rng, int n) {
  std::vector<std::string> coords;
  for (int i = 0; i < n; ++i) coords.push_back("x" + std::to_string(i));
  std::vector<Expr> upper;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const std::string base = i != j ? "0" : (i == 0 ? "-1" : "1");
      upper.push_back(parse(base + " + " + random_poly(rng, coords, 3, 0.3), coords));
    }
  const std::string h = "1 + 0.3*(" + random_poly(rng, coords, 3, 1.0) + ")";
  Chart chart{coords, {parse(h, coords)}};
  return {MetricSpec(chart, std::move(upper)), parse(h, coords)};
}

/// Admissible random point for a perturbed metric, or nullopt after 50 tries.
inline std::optional<std::vector<double>> lorentzian_point(std::mt19937_64& rng, const RandomMetric& m) {
  for (int attempt = 0; attempt < 50; ++attempt) {
    std::vector<double> p(static_cast<std::size_t>(m.metric.dim()));
    for (double& x : p) x = uniform(rng, -0.5, 0.5);
    try {
      check_domain(m.metric.chart(), p, {}, 0.05);
      const auto g = metric_eval(m.metric, p, {}, 0);
      const Signature s = signature(values(g));
      if (s.negative == 1) return p;
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

}  // namespace wefe::testing
