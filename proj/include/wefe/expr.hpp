#ifndef WEFE_EXPR_HPP
#define WEFE_EXPR_HPP

// Scalar expression language for metric components, densities and
// function-slot parameters.
//
//   expr     := term (('+' | '-') term)*
//   term     := unary (('*' | '/') unary)*
//   unary    := '-' unary | power
//   power    := primary ('^' exponent)*
//   exponent := ['+' | '-'] number
//   primary  := number | name | func '(' expr ')' | 'diff' '(' expr ',' coord [',' int] ')' | '(' expr ')'
//
// Exponents are literals only: an integer literal is expanded by repeated
// multiplication, any other literal goes through exp(p log x).

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wefe/jet.hpp"

namespace wefe {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

using ParamMap = std::map<std::string, double, std::less<>>;

enum class Func { Exp, Log, Sin, Cos, Sinh, Cosh, Tan, Arctanh, Sqrt };

inline constexpr std::array<std::pair<std::string_view, Func>, 9> kFunctions{{
    {"exp", Func::Exp},
    {"log", Func::Log},
    {"sin", Func::Sin},
    {"cos", Func::Cos},
    {"sinh", Func::Sinh},
    {"cosh", Func::Cosh},
    {"tan", Func::Tan},
    {"arctanh", Func::Arctanh},
    {"sqrt", Func::Sqrt},
}};

inline std::string_view func_name(Func f) {
  for (const auto& [name, fn] : kFunctions)
    if (fn == f) return name;
  return "?";
}

inline std::optional<Func> func_from_name(std::string_view name) {
  for (const auto& [n, fn] : kFunctions)
    if (n == name) return fn;
  return std::nullopt;
}

enum class Op { Number, Coord, Param, Neg, Add, Sub, Mul, Div, PowInt, PowReal, Call, Diff };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::Number;
  double number = 0.0;  // literal value, or the real exponent of PowReal
  int index = 0;        // coordinate index (Coord, Diff), integer exponent (PowInt)
  int count = 0;        // derivative count (Diff)
  std::string name;     // parameter name
  Func func = Func::Exp;
  std::vector<NodePtr> args;
};

namespace ast {

inline NodePtr make(Node n) { return std::make_shared<const Node>(std::move(n)); }

inline NodePtr neg(NodePtr a) {
  Node n;
  n.op = Op::Neg;
  n.args = {std::move(a)};
  return make(std::move(n));
}

/// Literal nodes are non-negative; negative values become Neg(literal).
inline NodePtr number(double v) {
  if (std::signbit(v)) return neg(number(-v));
  Node n;
  n.op = Op::Number;
  n.number = v;
  return make(std::move(n));
}

inline NodePtr coord(int i) {
  Node n;
  n.op = Op::Coord;
  n.index = i;
  return make(std::move(n));
}

inline NodePtr param(std::string name) {
  Node n;
  n.op = Op::Param;
  n.name = std::move(name);
  return make(std::move(n));
}

inline NodePtr binary(Op op, NodePtr a, NodePtr b) {
  Node n;
  n.op = op;
  n.args = {std::move(a), std::move(b)};
  return make(std::move(n));
}

inline NodePtr pow_int(NodePtr a, int e) {
  Node n;
  n.op = Op::PowInt;
  n.index = e;
  n.args = {std::move(a)};
  return make(std::move(n));
}

inline NodePtr pow_real(NodePtr a, double e) {
  Node n;
  n.op = Op::PowReal;
  n.number = e;
  n.args = {std::move(a)};
  return make(std::move(n));
}

inline NodePtr call(Func f, NodePtr a) {
  Node n;
  n.op = Op::Call;
  n.func = f;
  n.args = {std::move(a)};
  return make(std::move(n));
}

inline NodePtr diff(NodePtr a, int coord_index, int count) {
  Node n;
  n.op = Op::Diff;
  n.index = coord_index;
  n.count = count;
  n.args = {std::move(a)};
  return make(std::move(n));
}

}  // namespace ast

/// A parsed expression together with the names it was resolved against.
class Expr {
 public:
  Expr() = default;
  Expr(NodePtr root, std::vector<std::string> coords, std::vector<std::string> params)
      : root_(std::move(root)), coords_(std::move(coords)), params_(std::move(params)) {}

  const Node& root() const { return *root_; }
  const NodePtr& root_ptr() const { return root_; }
  const std::vector<std::string>& coords() const { return coords_; }
  const std::vector<std::string>& params() const { return params_; }
  bool empty() const { return root_ == nullptr; }

 private:
  NodePtr root_;
  std::vector<std::string> coords_;
  std::vector<std::string> params_;
};

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& coords, const std::vector<std::string>& params)
      : text_(text), coords_(coords), params_(params) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError("syntax error: " + what, pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
                                   text_[pos_] == '\r'))
      ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= text_.size()) fail(std::string("expected '") + c + "' but input ended");
      fail(std::string("expected '") + c + "'");
    }
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = ast::binary(Op::Add, lhs, term());
      else if (accept('-'))
        lhs = ast::binary(Op::Sub, lhs, term());
      else
        return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*'))
        lhs = ast::binary(Op::Mul, lhs, unary());
      else if (accept('/'))
        lhs = ast::binary(Op::Div, lhs, unary());
      else
        return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return ast::neg(unary());
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    while (accept('^')) {
      skip_ws();
      bool negative = false;
      if (accept('-'))
        negative = true;
      else
        accept('+');
      skip_ws();
      const std::size_t start = pos_;
      if (pos_ >= text_.size() || !(std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
        fail("exponent must be a numeric literal");
      auto [value, literal] = number_literal();
      const bool integral = literal.find_first_not_of("0123456789") == std::string_view::npos;
      if (integral) {
        if (value > 1e6) {
          pos_ = start;
          fail("integer exponent too large");
        }
        const int e = static_cast<int>(value);
        base = ast::pow_int(base, negative ? -e : e);
      } else {
        base = ast::pow_real(base, negative ? -value : value);
      }
    }
    return base;
  }

  std::pair<double, std::string_view> number_literal() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
        pos_ = p;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    const std::string_view lit = text_.substr(start, pos_ - start);
    double value = 0.0;
    auto res = std::from_chars(lit.data(), lit.data() + lit.size(), value);
    if (res.ec != std::errc() || res.ptr != lit.data() + lit.size()) {
      pos_ = start;
      fail("malformed number '" + std::string(lit) + "'");
    }
    return {value, lit};
  }

  std::string_view identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    return text_.substr(start, pos_ - start);
  }

  int coord_index(std::string_view name) const {
    for (std::size_t i = 0; i < coords_.size(); ++i)
      if (coords_[i] == name) return static_cast<int>(i);
    return -1;
  }

  bool is_param(std::string_view name) const {
    for (const auto& p : params_)
      if (p == name) return true;
    return false;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("expected expression but input ended");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      auto [value, lit] = number_literal();
      skip_ws();
      if (pos_ < text_.size() && (std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        fail("implicit multiplication is not allowed");
      return ast::number(value);
    }
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      expect(')');
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      const std::string_view name = identifier();
      skip_ws();
      const bool called = pos_ < text_.size() && text_[pos_] == '(';
      if (name == "diff") {
        if (!called) {
          pos_ = start;
          fail("diff requires arguments");
        }
        return diff_call();
      }
      if (auto f = func_from_name(name)) {
        if (!called) {
          pos_ = start;
          fail("function '" + std::string(name) + "' requires an argument");
        }
        ++pos_;
        NodePtr arg = expr();
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',')
          throw ParseError("arity mismatch: '" + std::string(name) + "' takes one argument", pos_);
        expect(')');
        return ast::call(*f, arg);
      }
      if (called) {
        pos_ = start;
        throw ParseError("unknown function '" + std::string(name) + "'", start);
      }
      const int ci = coord_index(name);
      if (ci >= 0) return ast::coord(ci);
      if (is_param(name)) return ast::param(std::string(name));
      throw ParseError("unknown identifier '" + std::string(name) + "'", start);
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr diff_call() {
    ++pos_;  // '('
    NodePtr arg = expr();
    expect(',');
    skip_ws();
    const std::size_t at = pos_;
    const std::string_view var = identifier();
    const int ci = coord_index(var);
    if (ci < 0) throw ParseError("diff variable must be a coordinate", at);
    int count = 1;
    if (accept(',')) {
      skip_ws();
      const std::size_t cat = pos_;
      auto [value, lit] = number_literal();
      if (lit.find_first_not_of("0123456789") != std::string_view::npos || value < 1 || value > 8)
        throw ParseError("diff order must be an integer in [1, 8]", cat);
      count = static_cast<int>(value);
    }
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == ',') throw ParseError("arity mismatch: diff takes at most three arguments", pos_);
    expect(')');
    return ast::diff(arg, ci, count);
  }

  std::string_view text_;
  const std::vector<std::string>& coords_;
  const std::vector<std::string>& params_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse(std::string_view text, std::vector<std::string> coords, std::vector<std::string> params = {}) {
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (func_from_name(coords[i]) || coords[i] == "diff")
      throw std::invalid_argument("coordinate name '" + coords[i] + "' is reserved");
    for (std::size_t j = 0; j < params.size(); ++j)
      if (coords[i] == params[j]) throw std::invalid_argument("name '" + coords[i] + "' is both coordinate and parameter");
  }
  detail::Parser p(text, coords, params);
  NodePtr root = p.parse();
  return Expr(std::move(root), std::move(coords), std::move(params));
}

// Serialization ---------------------------------------------------------

namespace detail {

inline int precedence(const Node& n) {
  switch (n.op) {
    case Op::Add:
    case Op::Sub:
      return 1;
    case Op::Mul:
    case Op::Div:
      return 2;
    case Op::Neg:
      return 3;
    case Op::PowInt:
    case Op::PowReal:
      return 4;
    default:
      return 5;
  }
}

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void write(std::string& out, const Node& n, const std::vector<std::string>& coords);

inline void write_wrapped(std::string& out, const Node& n, const std::vector<std::string>& coords, bool wrap) {
  if (wrap) out += '(';
  write(out, n, coords);
  if (wrap) out += ')';
}

inline void write(std::string& out, const Node& n, const std::vector<std::string>& coords) {
  const int prec = precedence(n);
  switch (n.op) {
    case Op::Number:
      out += format_double(n.number);
      break;
    case Op::Coord:
      out += coords.at(static_cast<std::size_t>(n.index));
      break;
    case Op::Param:
      out += n.name;
      break;
    case Op::Neg:
      out += '-';
      write_wrapped(out, *n.args[0], coords, precedence(*n.args[0]) < 3);
      break;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      static constexpr std::string_view sym[] = {" + ", " - ", "*", "/"};
      write_wrapped(out, *n.args[0], coords, precedence(*n.args[0]) < prec);
      out += sym[static_cast<int>(n.op) - static_cast<int>(Op::Add)];
      write_wrapped(out, *n.args[1], coords, precedence(*n.args[1]) <= prec);
      break;
    }
    case Op::PowInt:
      write_wrapped(out, *n.args[0], coords, precedence(*n.args[0]) < 5);
      out += '^';
      out += std::to_string(n.index);
      break;
    case Op::PowReal: {
      write_wrapped(out, *n.args[0], coords, precedence(*n.args[0]) < 5);
      out += '^';
      std::string e = format_double(n.number);
      if (e.find_first_of(".e") == std::string::npos) e += ".0";
      out += e;
      break;
    }
    case Op::Call:
      out += func_name(n.func);
      out += '(';
      write(out, *n.args[0], coords);
      out += ')';
      break;
    case Op::Diff:
      out += "diff(";
      write(out, *n.args[0], coords);
      out += ", ";
      out += coords.at(static_cast<std::size_t>(n.index));
      if (n.count != 1) {
        out += ", ";
        out += std::to_string(n.count);
      }
      out += ')';
      break;
  }
}

}  // namespace detail

inline std::string serialize(const Node& n, const std::vector<std::string>& coords) {
  std::string out;
  detail::write(out, n, coords);
  return out;
}

inline std::string serialize(const Expr& e) { return serialize(e.root(), e.coords()); }

inline bool structurally_equal(const Node& a, const Node& b) {
  if (a.op != b.op || a.args.size() != b.args.size()) return false;
  switch (a.op) {
    case Op::Number:
    case Op::PowReal:
      if (a.number != b.number) return false;
      break;
    case Op::Coord:
    case Op::PowInt:
      if (a.index != b.index) return false;
      break;
    case Op::Param:
      if (a.name != b.name) return false;
      break;
    case Op::Call:
      if (a.func != b.func) return false;
      break;
    case Op::Diff:
      if (a.index != b.index || a.count != b.count) return false;
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!structurally_equal(*a.args[i], *b.args[i])) return false;
  return true;
}

inline bool structurally_equal(const Expr& a, const Expr& b) { return structurally_equal(a.root(), b.root()); }

// Evaluation --------------------------------------------------------------

inline double param_value(const ParamMap& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw std::invalid_argument("unbound parameter '" + name + "'");
  return it->second;
}

namespace detail {

inline Jet apply(Func f, const Jet& a) {
  switch (f) {
    case Func::Exp:
      return exp(a);
    case Func::Log:
      return log(a);
    case Func::Sin:
      return sin(a);
    case Func::Cos:
      return cos(a);
    case Func::Sinh:
      return sinh(a);
    case Func::Cosh:
      return cosh(a);
    case Func::Tan:
      return tan(a);
    case Func::Arctanh:
      return arctanh(a);
    case Func::Sqrt:
      return sqrt(a);
  }
  throw std::logic_error("unknown function");
}

inline Jet eval_node(const Node& n, std::span<const double> point, const ParamMap& params, int order) {
  const int dim = static_cast<int>(point.size());
  switch (n.op) {
    case Op::Number:
      return Jet::constant(dim, order, n.number);
    case Op::Coord:
      return Jet::variable(n.index, point[static_cast<std::size_t>(n.index)], dim, order);
    case Op::Param:
      return Jet::constant(dim, order, param_value(params, n.name));
    case Op::Neg:
      return -eval_node(*n.args[0], point, params, order);
    case Op::Add:
      return eval_node(*n.args[0], point, params, order) + eval_node(*n.args[1], point, params, order);
    case Op::Sub:
      return eval_node(*n.args[0], point, params, order) - eval_node(*n.args[1], point, params, order);
    case Op::Mul:
      return eval_node(*n.args[0], point, params, order) * eval_node(*n.args[1], point, params, order);
    case Op::Div:
      return eval_node(*n.args[0], point, params, order) / eval_node(*n.args[1], point, params, order);
    case Op::PowInt:
      return pow(eval_node(*n.args[0], point, params, order), n.index);
    case Op::PowReal:
      return pow(eval_node(*n.args[0], point, params, order), n.number);
    case Op::Call:
      return apply(n.func, eval_node(*n.args[0], point, params, order));
    case Op::Diff: {
      Jet j = eval_node(*n.args[0], point, params, order + n.count);
      for (int k = 0; k < n.count; ++k) j = j.derivative(n.index);
      return j;
    }
  }
  throw std::logic_error("unknown node");
}

inline double eval_value(const Node& n, std::span<const double> point, const ParamMap& params) {
  auto unary = [&](double x) -> double {
    switch (n.func) {
      case Func::Exp:
        return std::exp(x);
      case Func::Log:
        if (!(x > 0.0)) throw DomainError("log of non-positive value " + std::to_string(x));
        return std::log(x);
      case Func::Sin:
        return std::sin(x);
      case Func::Cos:
        return std::cos(x);
      case Func::Sinh:
        return std::sinh(x);
      case Func::Cosh:
        return std::cosh(x);
      case Func::Tan:
        return tan(Jet::constant(1, 0, x)).value();
      case Func::Arctanh:
        if (!(std::abs(x) < 1.0)) throw DomainError("arctanh argument outside (-1, 1)");
        return std::atanh(x);
      case Func::Sqrt:
        if (!(x > 0.0)) throw DomainError("sqrt of non-positive value " + std::to_string(x));
        return std::sqrt(x);
    }
    throw std::logic_error("unknown function");
  };
  switch (n.op) {
    case Op::Number:
      return n.number;
    case Op::Coord:
      return point[static_cast<std::size_t>(n.index)];
    case Op::Param:
      return param_value(params, n.name);
    case Op::Neg:
      return -eval_value(*n.args[0], point, params);
    case Op::Add:
      return eval_value(*n.args[0], point, params) + eval_value(*n.args[1], point, params);
    case Op::Sub:
      return eval_value(*n.args[0], point, params) - eval_value(*n.args[1], point, params);
    case Op::Mul:
      return eval_value(*n.args[0], point, params) * eval_value(*n.args[1], point, params);
    case Op::Div: {
      const double d = eval_value(*n.args[1], point, params);
      if (d == 0.0) throw DomainError("division by zero");
      return eval_value(*n.args[0], point, params) / d;
    }
    case Op::PowInt: {
      const double b = eval_value(*n.args[0], point, params);
      if (n.index < 0 && b == 0.0) throw DomainError("division by zero");
      double r = 1.0;
      for (int k = 0; k < std::abs(n.index); ++k) r *= b;
      return n.index < 0 ? 1.0 / r : r;
    }
    case Op::PowReal: {
      const double b = eval_value(*n.args[0], point, params);
      if (!(b > 0.0)) throw DomainError("real power of non-positive base");
      return std::exp(n.number * std::log(b));
    }
    case Op::Call:
      return unary(eval_value(*n.args[0], point, params));
    case Op::Diff:
      return eval_node(n, point, params, 0).value();
  }
  throw std::logic_error("unknown node");
}

}  // namespace detail

/// Jet of the expression at `point` (ordered like e.coords()).
inline Jet eval_jet(const Expr& e, std::span<const double> point, const ParamMap& params, int order) {
  if (point.size() != e.coords().size()) throw std::invalid_argument("point dimension does not match coordinates");
  return detail::eval_node(e.root(), point, params, order);
}

inline Jet eval_jet(const Expr& e, const ParamMap& point, const ParamMap& params, int order) {
  std::vector<double> p;
  for (const auto& c : e.coords()) {
    auto it = point.find(c);
    if (it == point.end()) throw std::invalid_argument("coordinate '" + c + "' not bound");
    p.push_back(it->second);
  }
  return eval_jet(e, p, params, order);
}

/// Plain double evaluation, independent of jet arithmetic.
inline double eval_double(const Expr& e, std::span<const double> point, const ParamMap& params) {
  if (point.size() != e.coords().size()) throw std::invalid_argument("point dimension does not match coordinates");
  return detail::eval_value(e.root(), point, params);
}

}  // namespace wefe

#endif  // WEFE_EXPR_HPP
