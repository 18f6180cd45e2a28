#ifndef WEFE_JET_HPP
#define WEFE_JET_HPP

// Truncated multivariate Taylor arithmetic.
//
// A Jet of dimension n and order K stores the Taylor coefficients of a
// scalar function around a point for every multi-index of total degree <= K,
// i.e. c_m = (d^m f)(p) / m!.  Slots are kept in graded lexicographic order
// (degree first, then lexicographically descending exponents), so slot 0 is
// the value and slots 1..n the first partials.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wefe {

/// Raised when a primitive is evaluated outside its domain (log of a
/// non-positive value, division by zero, tan near a pole, ...).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class JetShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using MultiIndex = std::vector<int>;

inline int total_degree(const MultiIndex& m) {
  int d = 0;
  for (int e : m) d += e;
  return d;
}

inline double multi_factorial(const MultiIndex& m) {
  double f = 1.0;
  for (int e : m)
    for (int k = 2; k <= e; ++k) f *= k;
  return f;
}

inline std::size_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::size_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
  return r;
}

/// Shared index tables for one (dim, order) pair.
class JetLayout {
 public:
  struct Product {
    int a;
    int b;
    int c;
  };

  JetLayout(int dim, int order) : dim_(dim), order_(order) {
    if (dim < 1) throw JetShapeError("jet dimension must be positive");
    if (order < 0) throw JetShapeError("jet order must be non-negative");
    for (int deg = 0; deg <= order; ++deg) {
      std::vector<MultiIndex> level;
      MultiIndex m(static_cast<std::size_t>(dim), 0);
      enumerate(level, m, 0, deg);
      std::sort(level.begin(), level.end(), std::greater<>());
      for (auto& mi : level) indices_.push_back(std::move(mi));
    }
    for (std::size_t s = 0; s < indices_.size(); ++s) lookup_.emplace(indices_[s], static_cast<int>(s));

    shift_.assign(static_cast<std::size_t>(dim), std::vector<int>(indices_.size(), -1));
    for (std::size_t s = 0; s < indices_.size(); ++s) {
      for (int i = 0; i < dim; ++i) {
        MultiIndex up = indices_[s];
        ++up[static_cast<std::size_t>(i)];
        shift_[static_cast<std::size_t>(i)][s] = slot_or_minus_one(up);
      }
    }

    for (std::size_t a = 0; a < indices_.size(); ++a) {
      const int da = total_degree(indices_[a]);
      for (std::size_t b = 0; b < indices_.size(); ++b) {
        if (da + total_degree(indices_[b]) > order) continue;
        MultiIndex sum = indices_[a];
        for (int i = 0; i < dim; ++i) sum[static_cast<std::size_t>(i)] += indices_[b][static_cast<std::size_t>(i)];
        products_.push_back({static_cast<int>(a), static_cast<int>(b), lookup_.at(sum)});
      }
    }
  }

  int dim() const { return dim_; }
  int order() const { return order_; }
  std::size_t size() const { return indices_.size(); }
  const MultiIndex& index(std::size_t slot) const { return indices_[slot]; }
  const std::vector<Product>& products() const { return products_; }

  /// Slot of m + e_i, or -1 when that exceeds the order.
  int shifted(std::size_t slot, int i) const { return shift_[static_cast<std::size_t>(i)][slot]; }

  int slot_or_minus_one(const MultiIndex& m) const {
    auto it = lookup_.find(m);
    return it == lookup_.end() ? -1 : it->second;
  }

 private:
  static void enumerate(std::vector<MultiIndex>& out, MultiIndex& m, std::size_t pos, int remaining) {
    if (pos + 1 == m.size()) {
      m[pos] = remaining;
      out.push_back(m);
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      m[pos] = e;
      enumerate(out, m, pos + 1, remaining - e);
    }
    m[pos] = 0;
  }

  int dim_;
  int order_;
  std::vector<MultiIndex> indices_;
  std::map<MultiIndex, int> lookup_;
  std::vector<std::vector<int>> shift_;
  std::vector<Product> products_;
};

/// Process-wide cache of layouts; layouts are immutable once built.
inline std::shared_ptr<const JetLayout> jet_layout(int dim, int order) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const JetLayout>> cache;
  std::lock_guard lock(mutex);
  auto key = std::make_pair(dim, order);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto layout = std::make_shared<const JetLayout>(dim, order);
  cache.emplace(key, layout);
  return layout;
}

class Jet {
 public:
  Jet() = default;

  static Jet constant(int dim, int order, double value) {
    Jet j(jet_layout(dim, order));
    j.c_[0] = value;
    return j;
  }

  static Jet zero_like(const Jet& other) { return Jet(other.layout_); }

  static Jet constant_like(const Jet& other, double value) {
    Jet j(other.layout_);
    j.c_[0] = value;
    return j;
  }

  /// Jet of the coordinate function x_index at a point where x_index = value.
  static Jet variable(int index, double value, int dim, int order) {
    if (index < 0 || index >= dim)
      throw JetShapeError("coordinate index " + std::to_string(index) + " out of range for dimension " +
                          std::to_string(dim));
    Jet j(jet_layout(dim, order));
    j.c_[0] = value;
    if (order >= 1) j.c_[static_cast<std::size_t>(1 + index)] = 1.0;
    return j;
  }

  bool valid() const { return layout_ != nullptr; }
  int dim() const { return layout_->dim(); }
  int order() const { return layout_->order(); }
  std::size_t size() const { return c_.size(); }
  const JetLayout& layout() const { return *layout_; }

  double value() const { return c_[0]; }
  std::span<const double> coeffs() const { return c_; }
  double coeff(std::size_t slot) const { return c_[slot]; }
  double& coeff(std::size_t slot) { return c_[slot]; }

  double coeff(const MultiIndex& m) const {
    check_index(m);
    return c_[static_cast<std::size_t>(layout_->slot_or_minus_one(m))];
  }

  /// Partial derivative d^m f at the base point.
  double partial(const MultiIndex& m) const { return coeff(m) * multi_factorial(m); }

  /// First partial d_i f.
  double d(int i) const {
    require_order(1);
    return c_[static_cast<std::size_t>(1 + i)];
  }

  double max_abs() const {
    double m = 0.0;
    for (double x : c_) m = std::max(m, std::abs(x));
    return m;
  }

  Jet truncated(int new_order) const {
    if (new_order > order()) throw JetShapeError("cannot raise jet order by truncation");
    if (new_order == order()) return *this;
    Jet j(jet_layout(dim(), new_order));
    // Graded ordering makes the lower-order slots a prefix.
    std::copy_n(c_.begin(), j.c_.size(), j.c_.begin());
    return j;
  }

  /// Jet of d_i f, one order lower.
  Jet derivative(int i) const {
    if (i < 0 || i >= dim()) throw JetShapeError("derivative index out of range");
    require_order(1);
    Jet j(jet_layout(dim(), order() - 1));
    for (std::size_t s = 0; s < j.c_.size(); ++s) {
      const int up = layout_->shifted(s, i);
      j.c_[s] = c_[static_cast<std::size_t>(up)] * (layout_->index(s)[static_cast<std::size_t>(i)] + 1);
    }
    return j;
  }

  Jet& operator+=(const Jet& o) {
    check_same(o);
    for (std::size_t s = 0; s < c_.size(); ++s) c_[s] += o.c_[s];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    check_same(o);
    for (std::size_t s = 0; s < c_.size(); ++s) c_[s] -= o.c_[s];
    return *this;
  }
  Jet& operator*=(double k) {
    for (double& x : c_) x *= k;
    return *this;
  }
  Jet& operator+=(double k) {
    c_[0] += k;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator+(Jet a, double k) { return a += k; }
  friend Jet operator+(double k, Jet a) { return a += k; }
  friend Jet operator-(Jet a, double k) { return a += -k; }
  friend Jet operator-(double k, Jet a) {
    a *= -1.0;
    return a += k;
  }
  friend Jet operator*(Jet a, double k) { return a *= k; }
  friend Jet operator*(double k, Jet a) { return a *= k; }
  friend Jet operator-(Jet a) { return a *= -1.0; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    a.check_same(b);
    Jet r(a.layout_);
    for (const auto& p : a.layout_->products())
      r.c_[static_cast<std::size_t>(p.c)] += a.c_[static_cast<std::size_t>(p.a)] * b.c_[static_cast<std::size_t>(p.b)];
    return r;
  }

  friend Jet operator/(const Jet& a, const Jet& b);
  friend Jet operator/(Jet a, double k) {
    if (k == 0.0) throw DomainError("division by zero");
    return a *= 1.0 / k;
  }

  /// Nilpotent part: the jet minus its value.
  Jet tail() const {
    Jet j = *this;
    j.c_[0] = 0.0;
    return j;
  }

 private:
  explicit Jet(std::shared_ptr<const JetLayout> layout)
      : layout_(std::move(layout)), c_(layout_->size(), 0.0) {}

  void check_same(const Jet& o) const {
    if (layout_ != o.layout_)
      throw JetShapeError("jet arithmetic requires equal dimension and order (got " + shape_str() + " and " +
                          o.shape_str() + ")");
  }

  void require_order(int k) const {
    if (order() < k) throw JetShapeError("jet order " + std::to_string(order()) + " too low");
  }

  void check_index(const MultiIndex& m) const {
    if (static_cast<int>(m.size()) != dim()) throw JetShapeError("multi-index length does not match jet dimension");
    for (int e : m)
      if (e < 0) throw JetShapeError("negative multi-index entry");
    if (total_degree(m) > order())
      throw JetShapeError("multi-index degree " + std::to_string(total_degree(m)) + " exceeds jet order " +
                          std::to_string(order()));
  }

  std::string shape_str() const { return "(dim " + std::to_string(dim()) + ", order " + std::to_string(order()) + ")"; }

  std::shared_ptr<const JetLayout> layout_;
  std::vector<double> c_;
};

inline double extract_partial(const Jet& a, const MultiIndex& m) { return a.partial(m); }

// Univariate composition ----------------------------------------------------

/// Evaluates sum_k taylor[k] * (a - a0)^k by Horner's rule.  Exact to the jet
/// order since (a - a0) is nilpotent.
inline Jet compose_taylor(const Jet& a, std::span<const double> taylor) {
  const Jet t = a.tail();
  Jet r = Jet::constant_like(a, taylor.back());
  for (std::size_t k = taylor.size() - 1; k-- > 0;) {
    r = r * t;
    r += taylor[k];
  }
  return r;
}

namespace detail {

inline std::vector<double> reciprocal_series(double x0, int order) {
  std::vector<double> c(static_cast<std::size_t>(order) + 1);
  double p = 1.0 / x0;
  for (int k = 0; k <= order; ++k) {
    c[static_cast<std::size_t>(k)] = p;
    p *= -1.0 / x0;
  }
  return c;
}

}  // namespace detail

inline Jet operator/(const Jet& a, const Jet& b) {
  a.check_same(b);
  if (b.value() == 0.0) throw DomainError("division by a jet with zero value");
  const auto inv = detail::reciprocal_series(b.value(), b.order());
  return a * compose_taylor(b, inv);
}

inline Jet operator/(double k, const Jet& b) { return Jet::constant_like(b, k) / b; }

inline Jet exp(const Jet& a) {
  std::vector<double> c(static_cast<std::size_t>(a.order()) + 1);
  double e = std::exp(a.value());
  for (int k = 0; k <= a.order(); ++k) {
    c[static_cast<std::size_t>(k)] = e;
    e /= (k + 1);
  }
  return compose_taylor(a, c);
}

inline Jet log(const Jet& a) {
  const double x0 = a.value();
  if (!(x0 > 0.0)) throw DomainError("log of non-positive value " + std::to_string(x0));
  std::vector<double> c(static_cast<std::size_t>(a.order()) + 1);
  c[0] = std::log(x0);
  double p = 1.0;
  for (int k = 1; k <= a.order(); ++k) {
    p /= x0;
    c[static_cast<std::size_t>(k)] = ((k % 2 == 1) ? 1.0 : -1.0) * p / k;
  }
  return compose_taylor(a, c);
}

namespace detail {

// f(x0 + t) where the derivatives cycle with period 4 (sin, cos) or 2
// (sinh, cosh).
inline std::vector<double> cyclic_series(std::span<const double> derivs, int order) {
  std::vector<double> c(static_cast<std::size_t>(order) + 1);
  double fact = 1.0;
  for (int k = 0; k <= order; ++k) {
    if (k > 0) fact *= k;
    c[static_cast<std::size_t>(k)] = derivs[static_cast<std::size_t>(k) % derivs.size()] / fact;
  }
  return c;
}

// Binomial series of (x0 + t)^p.
inline std::vector<double> power_series(double x0, double p, int order) {
  std::vector<double> c(static_cast<std::size_t>(order) + 1);
  double coef = std::pow(x0, p);
  for (int k = 0; k <= order; ++k) {
    c[static_cast<std::size_t>(k)] = coef;
    coef *= (p - k) / ((k + 1) * x0);
  }
  return c;
}

}  // namespace detail

inline Jet sin(const Jet& a) {
  const double s = std::sin(a.value()), co = std::cos(a.value());
  const double d[4] = {s, co, -s, -co};
  return compose_taylor(a, detail::cyclic_series(d, a.order()));
}

inline Jet cos(const Jet& a) {
  const double s = std::sin(a.value()), co = std::cos(a.value());
  const double d[4] = {co, -s, -co, s};
  return compose_taylor(a, detail::cyclic_series(d, a.order()));
}

inline Jet sinh(const Jet& a) {
  const double d[2] = {std::sinh(a.value()), std::cosh(a.value())};
  return compose_taylor(a, detail::cyclic_series(d, a.order()));
}

inline Jet cosh(const Jet& a) {
  const double d[2] = {std::cosh(a.value()), std::sinh(a.value())};
  return compose_taylor(a, detail::cyclic_series(d, a.order()));
}

/// Points closer than this to a pole of tan are rejected.
inline constexpr double kTanPoleMargin = 1e-3;

inline Jet tan(const Jet& a) {
  const double x0 = a.value();
  const double shifted = x0 - std::numbers::pi / 2;
  const double dist = std::abs(shifted - std::numbers::pi * std::round(shifted / std::numbers::pi));
  if (dist < kTanPoleMargin) throw DomainError("tan evaluated within pole margin at " + std::to_string(x0));
  // T' = 1 + T^2  =>  (k+1) T_{k+1} = [k == 0] + sum_j T_j T_{k-j}
  const int n = a.order();
  std::vector<double> c(static_cast<std::size_t>(n) + 1);
  c[0] = std::tan(x0);
  for (int k = 0; k < n; ++k) {
    double s = (k == 0) ? 1.0 : 0.0;
    for (int j = 0; j <= k; ++j) s += c[static_cast<std::size_t>(j)] * c[static_cast<std::size_t>(k - j)];
    c[static_cast<std::size_t>(k) + 1] = s / (k + 1);
  }
  return compose_taylor(a, c);
}

inline Jet arctanh(const Jet& a) {
  const double x0 = a.value();
  if (!(std::abs(x0) < 1.0)) throw DomainError("arctanh argument outside (-1, 1): " + std::to_string(x0));
  // d/dy arctanh y = 1/2 (1/(1-y) + 1/(1+y))
  const int n = a.order();
  std::vector<double> c(static_cast<std::size_t>(n) + 1);
  c[0] = std::atanh(x0);
  for (int k = 0; k < n; ++k) {
    const double left = 1.0 / std::pow(1.0 - x0, k + 1);
    const double right = ((k % 2 == 0) ? 1.0 : -1.0) / std::pow(1.0 + x0, k + 1);
    c[static_cast<std::size_t>(k) + 1] = 0.5 * (left + right) / (k + 1);
  }
  return compose_taylor(a, c);
}

inline Jet sqrt(const Jet& a) {
  if (!(a.value() > 0.0)) throw DomainError("sqrt of non-positive value " + std::to_string(a.value()));
  return compose_taylor(a, detail::power_series(a.value(), 0.5, a.order()));
}

/// Integer powers by repeated squaring; negative exponents divide.
inline Jet pow(const Jet& a, int n) {
  if (n < 0) return 1.0 / pow(a, -n);
  Jet result = Jet::constant_like(a, 1.0);
  Jet base = a;
  while (n > 0) {
    if (n & 1) result = result * base;
    n >>= 1;
    if (n > 0) base = base * base;
  }
  return result;
}

/// Real powers via exp(p log a); requires a positive base.
inline Jet pow(const Jet& a, double p) {
  if (!(a.value() > 0.0)) throw DomainError("real power of non-positive base " + std::to_string(a.value()));
  return exp(log(a) * p);
}

}  // namespace wefe

#endif  // WEFE_JET_HPP
