#ifndef WEFE_TENSOR_HPP
#define WEFE_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wefe/expr.hpp"
#include "wefe/jet.hpp"

namespace wefe {

enum class Slot { Up, Down };

/// Dense point tensor with per-slot variance.  Components are stored in
/// row-major order over the slots.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int dim, std::vector<Slot> variance, T fill = T{})
      : dim_(dim), variance_(std::move(variance)), data_(count(dim, variance_.size()), std::move(fill)) {
    if (dim < 1) throw std::invalid_argument("tensor dimension must be positive");
  }

  static Tensor covariant(int dim, int rank, T fill = T{}) {
    return Tensor(dim, std::vector<Slot>(static_cast<std::size_t>(rank), Slot::Down), std::move(fill));
  }

  int dim() const { return dim_; }
  int rank() const { return static_cast<int>(variance_.size()); }
  const std::vector<Slot>& variance() const { return variance_; }
  std::size_t size() const { return data_.size(); }
  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  template <class... I>
  T& operator()(I... idx) {
    return data_[flat({static_cast<int>(idx)...})];
  }
  template <class... I>
  const T& operator()(I... idx) const {
    return data_[flat({static_cast<int>(idx)...})];
  }

  T& at(std::span<const int> idx) { return data_[flat(idx)]; }
  const T& at(std::span<const int> idx) const { return data_[flat(idx)]; }

  std::vector<int> unflatten(std::size_t f) const {
    std::vector<int> idx(variance_.size());
    for (std::size_t s = idx.size(); s-- > 0;) {
      idx[s] = static_cast<int>(f % static_cast<std::size_t>(dim_));
      f /= static_cast<std::size_t>(dim_);
    }
    return idx;
  }

  std::size_t flat(std::span<const int> idx) const {
    if (idx.size() != variance_.size()) throw std::out_of_range("tensor index has wrong rank");
    std::size_t f = 0;
    for (int i : idx) {
      if (i < 0 || i >= dim_) throw std::out_of_range("tensor index out of range");
      f = f * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(i);
    }
    return f;
  }
  std::size_t flat(std::initializer_list<int> idx) const {
    return flat(std::span<const int>(idx.begin(), idx.size()));
  }

 private:
  static std::size_t count(int dim, std::size_t rank) {
    std::size_t c = 1;
    for (std::size_t r = 0; r < rank; ++r) c *= static_cast<std::size_t>(dim);
    return c;
  }

  int dim_ = 0;
  std::vector<Slot> variance_;
  std::vector<T> data_;
};

using JetTensor = Tensor<Jet>;
using RealTensor = Tensor<double>;

inline RealTensor values(const JetTensor& t) {
  RealTensor r(t.dim(), t.variance(), 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) r.data()[i] = t.data()[i].value();
  return r;
}

inline JetTensor truncated(const JetTensor& t, int order) {
  JetTensor r = t;
  for (auto& j : r.data()) j = j.truncated(order);
  return r;
}

inline int jet_order(const JetTensor& t) { return t.data()[0].order(); }

inline double max_abs(const RealTensor& t) {
  double m = 0.0;
  for (double x : t.data()) m = std::max(m, std::abs(x));
  return m;
}

/// Value-level max over a jet tensor.
inline double max_abs(const JetTensor& t) {
  double m = 0.0;
  for (const auto& j : t.data()) m = std::max(m, std::abs(j.value()));
  return m;
}

// Charts and specs ---------------------------------------------------------

struct Chart {
  std::vector<std::string> coords;
  /// Expressions that must be strictly positive on the chart domain.
  std::vector<Expr> constraints;

  int dim() const { return static_cast<int>(coords.size()); }
};

inline void validate_chart(const Chart& c) {
  if (c.dim() < 2) throw std::invalid_argument("chart dimension must be at least 2");
  for (std::size_t i = 0; i < c.coords.size(); ++i)
    for (std::size_t j = i + 1; j < c.coords.size(); ++j)
      if (c.coords[i] == c.coords[j]) throw std::invalid_argument("duplicate coordinate name '" + c.coords[i] + "'");
}

/// Symmetric metric given by its upper triangle; (i, j) and (j, i) share
/// one expression.
class MetricSpec {
 public:
  MetricSpec() = default;
  MetricSpec(Chart chart, std::vector<Expr> upper, bool riemannian = false)
      : chart_(std::move(chart)), upper_(std::move(upper)), riemannian_(riemannian) {
    validate_chart(chart_);
    const auto n = static_cast<std::size_t>(chart_.dim());
    if (upper_.size() != n * (n + 1) / 2) throw std::invalid_argument("metric needs n(n+1)/2 components");
  }

  const Chart& chart() const { return chart_; }
  int dim() const { return chart_.dim(); }
  bool riemannian() const { return riemannian_; }

  const Expr& component(int i, int j) const { return upper_[slot(i, j)]; }
  Expr& component(int i, int j) { return upper_[slot(i, j)]; }

 private:
  std::size_t slot(int i, int j) const {
    if (i > j) std::swap(i, j);
    const auto n = static_cast<std::size_t>(dim());
    if (i < 0 || static_cast<std::size_t>(j) >= n) throw std::out_of_range("metric index out of range");
    const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(j);
    return a * n - a * (a - 1) / 2 + (b - a);
  }

  Chart chart_;
  std::vector<Expr> upper_;
  bool riemannian_ = false;
};

struct DensitySpec {
  Expr h;
};

/// Throws DomainError unless every chart constraint exceeds `margin`.
inline void check_domain(const Chart& chart, std::span<const double> point, const ParamMap& params, double margin = 0.0) {
  for (const auto& c : chart.constraints) {
    double v = 0.0;
    try {
      v = eval_double(c, point, params);
    } catch (const DomainError& e) {
      throw DomainError("domain constraint '" + serialize(c) + "' not evaluable: " + e.what());
    }
    if (!(v > margin))
      throw DomainError("domain constraint '" + serialize(c) + "' violated (value " + std::to_string(v) + ")");
  }
}

inline std::string format_point(const Chart& chart, std::span<const double> point) {
  std::string s = "(";
  for (std::size_t i = 0; i < point.size(); ++i) {
    if (i) s += ", ";
    s += chart.coords[i] + "=" + detail::format_double(point[i]);
  }
  return s + ")";
}

/// Jet-valued metric components at a point.
inline JetTensor metric_eval(const MetricSpec& m, std::span<const double> point, const ParamMap& params, int order) {
  const int n = m.dim();
  if (static_cast<int>(point.size()) != n) throw std::invalid_argument("point dimension does not match chart");
  check_domain(m.chart(), point, params);
  JetTensor g = JetTensor::covariant(n, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const Expr& e = m.component(i, j);
      try {
        g(i, j) = eval_jet(e, point, params, order);
      } catch (const DomainError& err) {
        throw DomainError("metric component g(" + m.chart().coords[static_cast<std::size_t>(i)] + "," +
                          m.chart().coords[static_cast<std::size_t>(j)] + ") = '" + serialize(e) + "' at " +
                          format_point(m.chart(), point) + ": " + err.what());
      }
      g(j, i) = g(i, j);
    }
  }
  return g;
}

// Linear algebra on small dense matrices --------------------------------------

class SingularMetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inverse by Gauss-Jordan elimination with partial pivoting; rejects
/// matrices whose infinity-norm condition number exceeds 1e12.
inline RealTensor invert(const RealTensor& a) {
  const int n = a.dim();
  std::vector<double> m(static_cast<std::size_t>(n * n)), inv(static_cast<std::size_t>(n * n), 0.0);
  auto at = [n](std::vector<double>& v, int i, int j) -> double& { return v[static_cast<std::size_t>(i * n + j)]; };
  double norm_a = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      at(m, i, j) = a(i, j);
      row += std::abs(a(i, j));
    }
    norm_a = std::max(norm_a, row);
    at(inv, i, i) = 1.0;
  }
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(at(m, r, col)) > std::abs(at(m, piv, col))) piv = r;
    if (at(m, piv, col) == 0.0) throw SingularMetricError("singular matrix");
    if (piv != col)
      for (int j = 0; j < n; ++j) {
        std::swap(at(m, piv, j), at(m, col, j));
        std::swap(at(inv, piv, j), at(inv, col, j));
      }
    const double p = at(m, col, col);
    for (int j = 0; j < n; ++j) {
      at(m, col, j) /= p;
      at(inv, col, j) /= p;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = at(m, r, col);
      if (f == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        at(m, r, j) -= f * at(m, col, j);
        at(inv, r, j) -= f * at(inv, col, j);
      }
    }
  }
  RealTensor out(n, a.variance(), 0.0);
  double norm_inv = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      out(i, j) = at(inv, i, j);
      row += std::abs(at(inv, i, j));
    }
    norm_inv = std::max(norm_inv, row);
  }
  if (norm_a * norm_inv > 1e12) throw SingularMetricError("matrix is near-singular (condition number > 1e12)");
  return out;
}

/// Jet-valued inverse.  With g = A + N (A the value part, N nilpotent),
/// g^-1 = sum_k (-A^-1 N)^k A^-1, which terminates at the jet order.
inline JetTensor metric_inverse(const JetTensor& g) {
  const int n = g.dim();
  const int order = jet_order(g);
  const RealTensor a_inv = invert(values(g));
  const Jet zero = Jet::zero_like(g(0, 0));

  JetTensor result(n, {Slot::Up, Slot::Up}, zero);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) result(i, j) = Jet::constant_like(zero, a_inv(i, j));

  // P = -A^-1 N
  JetTensor p(n, {Slot::Up, Slot::Down}, zero);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Jet s = zero;
      for (int k = 0; k < n; ++k) s += g(k, j).tail() * (-a_inv(i, k));
      p(i, j) = s;
    }

  JetTensor term = result;
  for (int step = 1; step <= order; ++step) {
    JetTensor next(n, {Slot::Up, Slot::Up}, zero);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Jet s = zero;
        for (int k = 0; k < n; ++k) s += p(i, k) * term(k, j);
        next(i, j) = s;
      }
    term = std::move(next);
    for (std::size_t f = 0; f < result.size(); ++f) result.data()[f] += term.data()[f];
  }
  return result;
}

// Signature -----------------------------------------------------------------

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> symmetric_eigenvalues(const RealTensor& s, double tol = 1e-12) {
  const int n = s.dim();
  std::vector<double> a(static_cast<std::size_t>(n * n));
  auto at = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i * n + j)]; };
  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      at(i, j) = 0.5 * (s(i, j) + s(j, i));
      scale = std::max(scale, std::abs(at(i, j)));
    }
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off = std::max(off, std::abs(at(i, j)));
    if (off <= tol * std::max(scale, 1e-300)) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (at(p, q) == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * at(p, q));
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), sn = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - sn * akq;
          at(k, q) = sn * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - sn * aqk;
          at(q, k) = sn * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = at(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

struct Signature {
  int negative = 0;
  int positive = 0;
  friend bool operator==(const Signature&, const Signature&) = default;
};

class DegenerateMetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Signature signature(const RealTensor& g) {
  Signature sig;
  for (double ev : symmetric_eigenvalues(g)) {
    if (std::abs(ev) < 1e-10) throw DegenerateMetricError("eigenvalue within 1e-10 of zero");
    (ev < 0 ? sig.negative : sig.positive)++;
  }
  return sig;
}

// Index gymnastics ------------------------------------------------------------

namespace detail {
inline double zero_of(const double&) { return 0.0; }
inline Jet zero_of(const Jet& j) { return Jet::zero_like(j); }
}  // namespace detail

/// Flips the variance of one slot by contracting with g (lowering) or
/// g^-1 (raising).
template <class T>
Tensor<T> raise_lower(const Tensor<T>& t, int slot, const Tensor<T>& g, const Tensor<T>& g_inv) {
  if (slot < 0 || slot >= t.rank())
    throw std::out_of_range("slot " + std::to_string(slot) + " out of range for rank " + std::to_string(t.rank()));
  const int n = t.dim();
  const bool raising = t.variance()[static_cast<std::size_t>(slot)] == Slot::Down;
  const Tensor<T>& m = raising ? g_inv : g;
  std::vector<Slot> var = t.variance();
  var[static_cast<std::size_t>(slot)] = raising ? Slot::Up : Slot::Down;
  const T zero = detail::zero_of(t.data()[0]);
  Tensor<T> out(n, var, zero);
  for (std::size_t f = 0; f < out.size(); ++f) {
    std::vector<int> idx = out.unflatten(f);
    const int a = idx[static_cast<std::size_t>(slot)];
    T s = zero;
    for (int b = 0; b < n; ++b) {
      idx[static_cast<std::size_t>(slot)] = b;
      s += m(a, b) * t.at(idx);
    }
    out.data()[f] = s;
  }
  return out;
}

}  // namespace wefe

#endif  // WEFE_TENSOR_HPP
