#ifndef WEFE_CURVATURE_HPP
#define WEFE_CURVATURE_HPP

// Levi-Civita connection, curvature and the density-weighted tensors.
//
// Conventions:
//   R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z
//   R^l_{ijk} d_l = R(d_i, d_j) d_k
//   R_{ijkl} = g(R(d_i, d_j) d_l, d_k)     (so R(X,Y,Z,W) = g(R(X,Y)W, Z))
//   rho_{jk} = R^i_{ijk} = g^{il} R_{ijlk}, tau = g^{jk} rho_{jk}
// With these, de Sitter has tau = +6/kappa^2 and the pp-wave has
// rho(d_v, d_v) = -1/2 (flat Laplacian of F).
//
// Jet orders: with metric jets of order K, Christoffel symbols carry order
// K-1 and every curvature quantity order K-2.  One covariant derivative
// costs one more order.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wefe/expr.hpp"
#include "wefe/jet.hpp"
#include "wefe/tensor.hpp"

namespace wefe {

class InsufficientOrderError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_order(const JetTensor& t, int k, const char* what) {
  if (jet_order(t) < k)
    throw InsufficientOrderError(std::string(what) + " needs jets of order >= " + std::to_string(k));
}

/// Gamma^k_{ij}, slots (Up, Down, Down).
inline JetTensor christoffel(const JetTensor& g, const JetTensor& g_inv) {
  require_order(g, 1, "christoffel");
  const int n = g.dim();
  const int order = jet_order(g) - 1;
  const JetTensor gi = truncated(g_inv, order);
  const Jet zero = Jet::zero_like(gi(0, 0));

  JetTensor dg = JetTensor::covariant(n, 3, zero);  // dg(l, i, j) = d_l g_ij
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        dg(l, i, j) = g(i, j).derivative(l);
        dg(l, j, i) = dg(l, i, j);
      }

  JetTensor gamma(n, {Slot::Up, Slot::Down, Slot::Down}, zero);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        Jet s = zero;
        for (int l = 0; l < n; ++l) s += gi(k, l) * (dg(i, j, l) + dg(j, i, l) - dg(l, i, j));
        s *= 0.5;
        gamma(k, i, j) = s;
        gamma(k, j, i) = std::move(s);
      }
  return gamma;
}

struct CurvaturePack {
  JetTensor gamma;       // Gamma^k_ij, order K-1
  JetTensor riemann_up;  // R^l_ijk, slots (Up, Down, Down, Down)
  JetTensor riemann;     // R_ijkl = g(R(d_i,d_j)d_l, d_k)
  JetTensor ricci;       // rho_jk
  Jet scalar;            // tau

  int dim() const { return ricci.dim(); }
};

/// Riemann, Ricci and scalar curvature from a (possibly modified) connection.
inline CurvaturePack riemann_ricci_scalar(JetTensor gamma, const JetTensor& g, const JetTensor& g_inv) {
  require_order(gamma, 1, "riemann");
  const int n = g.dim();
  const int order = jet_order(gamma) - 1;
  const JetTensor gm = truncated(gamma, order);
  const JetTensor gl = truncated(g, order);
  const JetTensor gi = truncated(g_inv, order);
  const Jet zero = Jet::zero_like(gl(0, 0));

  JetTensor dgamma(n, {Slot::Down, Slot::Up, Slot::Down, Slot::Down}, zero);  // d_m Gamma^l_jk
  for (int m = 0; m < n; ++m)
    for (int l = 0; l < n; ++l)
      for (int j = 0; j < n; ++j)
        for (int k = j; k < n; ++k) {
          dgamma(m, l, j, k) = gamma(l, j, k).derivative(m);
          dgamma(m, l, k, j) = dgamma(m, l, j, k);
        }

  JetTensor rup(n, {Slot::Up, Slot::Down, Slot::Down, Slot::Down}, zero);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          Jet s = dgamma(i, l, j, k) - dgamma(j, l, i, k);
          for (int m = 0; m < n; ++m) s += gm(l, i, m) * gm(m, j, k) - gm(l, j, m) * gm(m, i, k);
          rup(l, j, i, k) = -s;
          rup(l, i, j, k) = std::move(s);
        }

  JetTensor r = JetTensor::covariant(n, 4, zero);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          Jet s = zero;
          for (int m = 0; m < n; ++m) s += gl(k, m) * rup(m, i, j, l);
          r(i, j, k, l) = std::move(s);
        }

  JetTensor rho = JetTensor::covariant(n, 2, zero);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      Jet s = zero;
      for (int i = 0; i < n; ++i) s += rup(i, i, j, k);
      rho(j, k) = std::move(s);
    }

  Jet tau = zero;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) tau += gi(j, k) * rho(j, k);

  return CurvaturePack{std::move(gamma), std::move(rup), std::move(r), std::move(rho), std::move(tau)};
}

inline CurvaturePack curvature(const JetTensor& g, const JetTensor& g_inv) {
  return riemann_ricci_scalar(christoffel(g, g_inv), g, g_inv);
}

/// Mixed Ricci operator Ric^i_j at the base point (rho(X,Y) = g(Ric X, Y)).
inline RealTensor ricci_operator(const CurvaturePack& pack, const RealTensor& g_inv) {
  const int n = pack.dim();
  RealTensor op(n, {Slot::Up, Slot::Down}, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) op(i, j) += g_inv(i, k) * pack.ricci(k, j).value();
  return op;
}

struct WeylResult {
  JetTensor tensor;
  /// True when n < 4: the Weyl tensor vanishes identically and is returned as zero.
  bool vanishes_by_dimension = false;
};

inline WeylResult weyl(const CurvaturePack& pack, const JetTensor& g) {
  const int n = pack.dim();
  const Jet zero = Jet::zero_like(pack.scalar);
  if (n < 4) return {JetTensor::covariant(n, 4, zero), true};
  const JetTensor gl = truncated(g, pack.scalar.order());
  const JetTensor& rho = pack.ricci;
  const double a = 1.0 / (n - 2);
  const double b = 1.0 / ((n - 1) * (n - 2));
  JetTensor c = JetTensor::covariant(n, 4, zero);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          Jet s = pack.riemann(i, j, k, l);
          s -= (gl(i, k) * rho(j, l) - gl(i, l) * rho(j, k) - gl(j, k) * rho(i, l) + gl(j, l) * rho(i, k)) * a;
          s += (gl(i, k) * gl(j, l) - gl(i, l) * gl(j, k)) * pack.scalar * b;
          c(i, j, k, l) = std::move(s);
        }
  return {std::move(c), false};
}

// Density quantities ------------------------------------------------------------

/// Hes_f(i,j) = d_i d_j f - Gamma^k_ij d_k f, one order below the connection.
inline JetTensor hessian(const Jet& f, const JetTensor& gamma) {
  const int n = gamma.dim();
  const int order = jet_order(gamma) - 1;
  if (f.order() < order + 2) throw InsufficientOrderError("hessian needs the function two orders above the result");
  const Jet zero = Jet::constant(n, order, 0.0);
  std::vector<Jet> df;
  for (int k = 0; k < n; ++k) df.push_back(f.derivative(k).truncated(order));
  JetTensor hes = JetTensor::covariant(n, 2, zero);
  for (int i = 0; i < n; ++i) {
    const Jet di = f.derivative(i);
    for (int j = i; j < n; ++j) {
      Jet s = di.derivative(j).truncated(order);
      for (int k = 0; k < n; ++k) s -= gamma(k, i, j).truncated(order) * df[static_cast<std::size_t>(k)];
      hes(i, j) = s;
      hes(j, i) = std::move(s);
    }
  }
  return hes;
}

inline Jet trace(const JetTensor& t, const JetTensor& g_inv) {
  const JetTensor gi = truncated(g_inv, jet_order(t));
  Jet s = Jet::zero_like(t(0, 0));
  for (int i = 0; i < t.dim(); ++i)
    for (int j = 0; j < t.dim(); ++j) s += gi(i, j) * t(i, j);
  return s;
}

struct DensityPack {
  Jet h;               // order K
  JetTensor dh;        // d_i h, order K-1
  JetTensor grad;      // (nabla h)^i, order K-1
  JetTensor hessian;   // Hes_h, order K-2
  Jet laplacian;       // Delta h, order K-2
  Jet grad_norm2;      // g(nabla h, nabla h), order K-1
  double lambda = 0.0; // cosmological constant
  double mu = 1.0;     // Bakry-Emery parameter
};

inline DensityPack density_pack(const Jet& h, const JetTensor& g_inv, const JetTensor& gamma, double lambda,
                                double mu = 1.0) {
  if (!(h.value() > 0.0))
    throw DomainError("density must be positive, got h = " + std::to_string(h.value()));
  const int n = g_inv.dim();
  const int order = h.order() - 1;
  const JetTensor gi = truncated(g_inv, order);
  const Jet zero = Jet::constant(n, order, 0.0);
  DensityPack d;
  d.h = h;
  d.dh = JetTensor(n, {Slot::Down}, zero);
  d.grad = JetTensor(n, {Slot::Up}, zero);
  for (int i = 0; i < n; ++i) d.dh(i) = h.derivative(i);
  d.grad_norm2 = zero;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      d.grad(i) += gi(i, j) * d.dh(j);
      d.grad_norm2 += gi(i, j) * d.dh(i) * d.dh(j);
    }
  d.hessian = hessian(h, gamma);
  d.laplacian = trace(d.hessian, g_inv);
  d.lambda = lambda;
  d.mu = mu;
  return d;
}

/// G^h = h rho - Hes_h + (Delta h + Lambda) g.
inline JetTensor weighted_einstein(const CurvaturePack& pack, const DensityPack& d, const JetTensor& g) {
  const int n = pack.dim();
  const int order = pack.scalar.order();
  const JetTensor gl = truncated(g, order);
  const Jet h = d.h.truncated(order);
  const Jet trace_part = d.laplacian + d.lambda;
  JetTensor out = JetTensor::covariant(n, 2, Jet::zero_like(h));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = h * pack.ricci(i, j) - d.hessian(i, j) + trace_part * gl(i, j);
  return out;
}

/// rho^f = rho + Hes_f - mu df (x) df.
inline JetTensor bakry_emery(const CurvaturePack& pack, const Jet& f, double mu) {
  const int n = pack.dim();
  const int order = pack.scalar.order();
  const JetTensor hes = hessian(f, pack.gamma);
  JetTensor out = JetTensor::covariant(n, 2, Jet::zero_like(pack.scalar));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out(i, j) = pack.ricci(i, j) + hes(i, j) -
                  f.derivative(i).truncated(order) * f.derivative(j).truncated(order) * mu;
  return out;
}

/// (f + 1) rho - Hes_f + (Delta f - tau / n) g.
inline JetTensor cpe_tensor(const CurvaturePack& pack, const Jet& f, const JetTensor& g, const JetTensor& g_inv) {
  const int n = pack.dim();
  const int order = pack.scalar.order();
  const JetTensor gl = truncated(g, order);
  const JetTensor hes = hessian(f, pack.gamma);
  const Jet trace_part = trace(hes, g_inv) - pack.scalar * (1.0 / n);
  const Jet f1 = f.truncated(order) + 1.0;
  JetTensor out = JetTensor::covariant(n, 2, Jet::zero_like(pack.scalar));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = f1 * pack.ricci(i, j) - hes(i, j) + trace_part * gl(i, j);
  return out;
}

// Covariant derivatives ---------------------------------------------------------

/// (nabla T)_{k i_1 ... i_s} for a covariant tensor T.  The result has the
/// derivative slot first and one jet order less than T.
inline JetTensor cov_derivative(const JetTensor& t, const JetTensor& gamma) {
  for (Slot s : t.variance())
    if (s != Slot::Down) throw std::invalid_argument("cov_derivative expects a covariant tensor");
  require_order(t, 1, "cov_derivative");
  const int n = t.dim();
  const int s = t.rank();
  const int order = jet_order(t) - 1;
  if (jet_order(gamma) < order) throw InsufficientOrderError("connection order too low for cov_derivative");
  const JetTensor gm = truncated(gamma, order);
  JetTensor tt = truncated(t, order);
  JetTensor out = JetTensor::covariant(n, s + 1, Jet::zero_like(gm(0, 0, 0)));
  std::vector<int> sub(static_cast<std::size_t>(s));
  for (std::size_t f = 0; f < out.size(); ++f) {
    const std::vector<int> idx = out.unflatten(f);
    const int k = idx[0];
    for (int m = 0; m < s; ++m) sub[static_cast<std::size_t>(m)] = idx[static_cast<std::size_t>(m) + 1];
    Jet v = t.at(sub).derivative(k);
    for (int m = 0; m < s; ++m) {
      const int im = sub[static_cast<std::size_t>(m)];
      for (int l = 0; l < n; ++l) {
        sub[static_cast<std::size_t>(m)] = l;
        v -= gm(l, k, im) * tt.at(sub);
      }
      sub[static_cast<std::size_t>(m)] = im;
    }
    out.data()[f] = std::move(v);
  }
  return out;
}

/// (div T)_j = g^{ik} (nabla_i T)_{kj}.
inline JetTensor divergence(const JetTensor& t, const JetTensor& g_inv, const JetTensor& gamma) {
  if (t.rank() != 2) throw std::invalid_argument("divergence expects a (0,2) tensor");
  const JetTensor nt = cov_derivative(t, gamma);
  const int n = t.dim();
  const JetTensor gi = truncated(g_inv, jet_order(nt));
  JetTensor out(n, {Slot::Down}, Jet::zero_like(nt(0, 0, 0)));
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) out(j) += gi(i, k) * nt(i, k, j);
  return out;
}

// Optical scalars ----------------------------------------------------------------

class NotLightlikeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct OpticalScalars {
  double expansion = 0.0;     // theta
  double shear2 = 0.0;        // sigma^2 = (nabla^i V^j) nabla_(i V_j) - (n-2) theta^2
  double twist2 = 0.0;        // omega^2 = (nabla^i V^j) nabla_[i V_j]
  double shear2_norm = 0.0;   // |nabla V|^2 - (n-2) theta^2
};

/// Expansion, shear and twist from nabla_i V_j (lowered) at a point.
/// Symmetrization and antisymmetrization carry the factor 1/2.
inline OpticalScalars optical_scalars_unchecked(const RealTensor& nabla_v, const RealTensor& g_inv) {
  const int n = g_inv.dim();
  if (n < 3) throw std::invalid_argument("optical scalars need n >= 3");
  OpticalScalars o;
  double div = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) div += g_inv(i, j) * nabla_v(i, j);
  o.expansion = div / (n - 2);
  double sym = 0.0, anti = 0.0, full = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double up = 0.0;  // nabla^i V^j
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) up += g_inv(i, a) * g_inv(j, b) * nabla_v(a, b);
      sym += up * 0.5 * (nabla_v(i, j) + nabla_v(j, i));
      anti += up * 0.5 * (nabla_v(i, j) - nabla_v(j, i));
      full += up * nabla_v(i, j);
    }
  o.shear2 = sym - (n - 2) * o.expansion * o.expansion;
  o.twist2 = anti;
  o.shear2_norm = full - (n - 2) * o.expansion * o.expansion;
  return o;
}

/// As above, requiring V lightlike: |g(V,V)| < 1e-10 * scale.
inline OpticalScalars optical_scalars(const RealTensor& v_up, const RealTensor& nabla_v, const RealTensor& g,
                                      const RealTensor& g_inv) {
  const int n = g.dim();
  double norm2 = 0.0, scale = 1.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) norm2 += g(i, j) * v_up(i) * v_up(j);
  for (int i = 0; i < n; ++i) scale = std::max(scale, 1.0 + std::abs(v_up(i)));
  if (std::abs(norm2) >= 1e-10 * scale * scale)
    throw NotLightlikeError("vector field is not lightlike (|V|^2 = " + std::to_string(norm2) + ")");
  return optical_scalars_unchecked(nabla_v, g_inv);
}

// Invariants ---------------------------------------------------------------------

struct ScalarInvariants {
  double scalar = 0.0;        // tau
  double ricci_square = 0.0;  // rho_ij rho^ij
  double kretschmann = 0.0;   // R_ijkl R^ijkl
};

inline ScalarInvariants scalar_invariants(const CurvaturePack& pack, const RealTensor& g_inv) {
  const int n = pack.dim();
  const RealTensor rho = values(pack.ricci);
  const RealTensor r = values(pack.riemann);
  ScalarInvariants s;
  s.scalar = pack.scalar.value();
  RealTensor rho_up(n, {Slot::Up, Slot::Up}, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) rho_up(i, j) += g_inv(i, a) * g_inv(j, b) * rho(a, b);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s.ricci_square += rho(i, j) * rho_up(i, j);
  RealTensor r_up = r;
  for (int slot = 0; slot < 4; ++slot) {
    RealTensor next = r_up;
    for (std::size_t f = 0; f < next.size(); ++f) {
      std::vector<int> idx = next.unflatten(f);
      const int a = idx[static_cast<std::size_t>(slot)];
      double v = 0.0;
      for (int b = 0; b < n; ++b) {
        idx[static_cast<std::size_t>(slot)] = b;
        v += g_inv(a, b) * r_up.at(idx);
      }
      next.data()[f] = v;
    }
    r_up = std::move(next);
  }
  for (std::size_t f = 0; f < r.size(); ++f) s.kretschmann += r.data()[f] * r_up.data()[f];
  return s;
}

// Warped products ------------------------------------------------------------------

/// N x_f R with metric g_N + f^2 dt^2; the fiber coordinate "t" is appended.
inline MetricSpec warped_product(const MetricSpec& base, const Expr& warp) {
  const int n = base.dim();
  Chart chart;
  chart.coords = base.chart().coords;
  chart.coords.push_back("t");
  std::vector<std::string> params = warp.params();
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      for (const auto& p : base.component(i, j).params())
        if (std::find(params.begin(), params.end(), p) == params.end()) params.push_back(p);
  auto rebind = [&](const Expr& e) { return Expr(e.root_ptr(), chart.coords, params); };
  for (const auto& c : base.chart().constraints) chart.constraints.push_back(rebind(c));
  chart.constraints.push_back(rebind(warp));

  std::vector<Expr> upper;
  for (int i = 0; i <= n; ++i)
    for (int j = i; j <= n; ++j) {
      if (j < n)
        upper.push_back(rebind(base.component(i, j)));
      else if (i < n)
        upper.push_back(Expr(ast::number(0.0), chart.coords, params));
      else
        upper.push_back(Expr(ast::pow_int(warp.root_ptr(), 2), chart.coords, params));
    }
  return MetricSpec(std::move(chart), std::move(upper), base.riemannian());
}

}  // namespace wefe

#endif  // WEFE_CURVATURE_HPP
