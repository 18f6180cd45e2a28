#ifndef WEFE_CONFIG_HPP
#define WEFE_CONFIG_HPP

// Metric configuration files.
//
// The format is a small subset of TOML:
//
//   # comment
//   [chart]
//   coords = ["u", "v", "x"]          # dim is implied, or given as dim = 3
//   constraints = ["v", "x"]          # expressions that must be > 0
//   riemannian = false
//
//   [params]
//   kappa = 1.5
//
//   [metric]                          # unlisted components are 0
//   "u,v" = "1"                       # keys: coordinate names or 0-based indices
//   "v,v" = "-x^2"
//
//   [density]
//   h = "v"
//   lambda = "0"                      # number or expression in the params
//   f = "v - 1"                       # optional potential for cpe / bakry_emery
//   mu = 1
//
//   [box]                             # optional sampling box
//   v = [0.2, 2.0]
//
// Values are strings (double quotes, escapes \" \\ \n \t), numbers, booleans
// and arrays of those; arrays may span lines.  Tables cannot nest.

#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "wefe/catalog.hpp"
#include "wefe/expr.hpp"
#include "wefe/tensor.hpp"

namespace wefe {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct ConfigValue {
  std::variant<std::string, double, bool, std::vector<ConfigValue>> v;

  bool is_string() const { return std::holds_alternative<std::string>(v); }
  bool is_number() const { return std::holds_alternative<double>(v); }
  bool is_bool() const { return std::holds_alternative<bool>(v); }
  bool is_array() const { return std::holds_alternative<std::vector<ConfigValue>>(v); }
  const std::string& str() const { return std::get<std::string>(v); }
  double num() const { return std::get<double>(v); }
  bool boolean() const { return std::get<bool>(v); }
  const std::vector<ConfigValue>& array() const { return std::get<std::vector<ConfigValue>>(v); }
};

struct ConfigTable {
  std::vector<std::pair<std::string, ConfigValue>> entries;
  int line = 0;

  const ConfigValue* find(std::string_view key) const {
    for (const auto& [k, val] : entries)
      if (k == key) return &val;
    return nullptr;
  }
};

/// Tables in file order; the unnamed root table has the empty name.
struct ConfigDocument {
  std::vector<std::pair<std::string, ConfigTable>> tables;

  const ConfigTable* table(std::string_view name) const {
    for (const auto& [n, t] : tables)
      if (n == name) return &t;
    return nullptr;
  }
};

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(std::string_view text) : s_(text) {}

  ConfigDocument read() {
    ConfigDocument doc;
    doc.tables.emplace_back("", ConfigTable{});
    while (true) {
      skip_blank_lines();
      if (pos_ >= s_.size()) break;
      if (s_[pos_] == '[') {
        ++pos_;
        skip_inline_ws();
        std::string name = key();
        skip_inline_ws();
        expect(']');
        end_of_line();
        if (doc.table(name)) throw ConfigError("duplicate table [" + name + "]", line_);
        doc.tables.emplace_back(name, ConfigTable{{}, line_});
        continue;
      }
      const int at = line_;
      std::string k = key();
      skip_inline_ws();
      expect('=');
      skip_inline_ws();
      ConfigValue v = value();
      end_of_line();
      ConfigTable& t = doc.tables.back().second;
      if (t.find(k)) throw ConfigError("duplicate key '" + k + "'", at);
      t.entries.emplace_back(std::move(k), std::move(v));
    }
    return doc;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(what, line_); }

  void skip_inline_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
  }
  void skip_comment() {
    if (pos_ < s_.size() && s_[pos_] == '#')
      while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
  }
  void skip_blank_lines() {
    while (pos_ < s_.size()) {
      skip_inline_ws();
      skip_comment();
      if (pos_ < s_.size() && s_[pos_] == '\n') {
        ++pos_;
        ++line_;
      } else {
        return;
      }
    }
  }
  /// Whitespace, comments and newlines inside arrays.
  void skip_array_ws() { skip_blank_lines(); }

  void end_of_line() {
    skip_inline_ws();
    skip_comment();
    if (pos_ < s_.size()) {
      if (s_[pos_] != '\n') fail("unexpected trailing characters");
      ++pos_;
      ++line_;
    }
  }
  void expect(char c) {
    if (pos_ >= s_.size() || s_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string key() {
    if (pos_ < s_.size() && s_[pos_] == '"') return quoted();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
                                s_[pos_] == '-' || s_[pos_] == '.'))
      ++pos_;
    if (pos_ == start) fail("expected a key");
    return std::string(s_.substr(start, pos_ - start));
  }

  std::string quoted() {
    expect('"');
    std::string out;
    while (true) {
      if (pos_ >= s_.size() || s_[pos_] == '\n') fail("unterminated string");
      const char c = s_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (pos_ >= s_.size()) fail("unterminated escape");
      switch (s_[pos_++]) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        default: fail("unsupported escape sequence");
      }
    }
  }

  ConfigValue value() {
    if (pos_ >= s_.size()) fail("expected a value");
    const char c = s_[pos_];
    if (c == '"') return {quoted()};
    if (c == '[') {
      ++pos_;
      std::vector<ConfigValue> items;
      skip_array_ws();
      while (pos_ < s_.size() && s_[pos_] != ']') {
        items.push_back(value());
        skip_array_ws();
        if (pos_ < s_.size() && s_[pos_] == ',') {
          ++pos_;
          skip_array_ws();
        } else {
          break;
        }
      }
      expect(']');
      return {std::move(items)};
    }
    if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return {true};
    }
    if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return {false};
    }
    const std::size_t start = pos_;
    if (s_[pos_] == '+' || s_[pos_] == '-') ++pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                                ((s_[pos_] == '+' || s_[pos_] == '-') && (s_[pos_ - 1] == 'e' || s_[pos_ - 1] == 'E'))))
      ++pos_;
    std::string_view tok = s_.substr(start, pos_ - start);
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    double d = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), d);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
      fail("invalid value '" + std::string(s_.substr(start, pos_ - start)) + "'");
    return {d};
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

inline void write_value(std::string& out, const ConfigValue& v) {
  if (v.is_string()) {
    out += quote(v.str());
  } else if (v.is_number()) {
    out += format_double(v.num());
  } else if (v.is_bool()) {
    out += v.boolean() ? "true" : "false";
  } else {
    out += "[";
    bool first = true;
    for (const auto& item : v.array()) {
      if (!first) out += ", ";
      first = false;
      write_value(out, item);
    }
    out += "]";
  }
}

inline bool is_bare_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

}  // namespace detail

inline ConfigDocument parse_config_text(std::string_view text) { return detail::ConfigReader(text).read(); }

inline std::string write_config_text(const ConfigDocument& doc) {
  std::string out;
  for (const auto& [name, table] : doc.tables) {
    if (name.empty() && table.entries.empty()) continue;
    if (!name.empty()) out += (out.empty() ? "" : "\n") + std::string("[") + name + "]\n";
    for (const auto& [k, v] : table.entries) {
      out += detail::is_bare_key(k) ? k : detail::quote(k);
      out += " = ";
      detail::write_value(out, v);
      out += "\n";
    }
  }
  return out;
}

/// A metric read from a config file, ready for evaluation.
struct MetricConfig {
  MetricSpec metric;
  DensitySpec density;
  Expr lambda;
  std::optional<Expr> potential;
  double mu = 1.0;
  ParamMap params;
  std::vector<Interval> box;  // empty when not given
};

namespace detail {

inline const ConfigValue& require(const ConfigTable& t, std::string_view table, std::string_view key) {
  const ConfigValue* v = t.find(key);
  if (!v) throw ConfigError("[" + std::string(table) + "] is missing '" + std::string(key) + "'", t.line);
  return *v;
}

inline std::string expr_text(const ConfigValue& v, std::string_view what) {
  if (v.is_string()) return v.str();
  if (v.is_number()) return format_double(v.num());
  throw ConfigError(std::string(what) + " must be an expression string or a number", 0);
}

inline int coord_slot(const std::string& part, const std::vector<std::string>& coords) {
  std::string t = part;
  t.erase(0, t.find_first_not_of(' '));
  t.erase(t.find_last_not_of(' ') + 1);
  for (std::size_t i = 0; i < coords.size(); ++i)
    if (coords[i] == t) return static_cast<int>(i);
  int idx = -1;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), idx);
  if (ec != std::errc() || ptr != t.data() + t.size() || idx < 0 || idx >= static_cast<int>(coords.size()))
    throw ConfigError("metric key component '" + t + "' is neither a coordinate nor an index", 0);
  return idx;
}

}  // namespace detail

inline MetricConfig load_metric_config(const ConfigDocument& doc) {
  MetricConfig cfg;
  const ConfigTable* chart_t = doc.table("chart");
  if (!chart_t) throw ConfigError("missing [chart] table", 0);
  Chart chart;
  const ConfigValue& coords = detail::require(*chart_t, "chart", "coords");
  if (!coords.is_array()) throw ConfigError("chart.coords must be an array of names", chart_t->line);
  for (const auto& c : coords.array()) {
    if (!c.is_string()) throw ConfigError("chart.coords must be an array of names", chart_t->line);
    chart.coords.push_back(c.str());
  }
  if (const ConfigValue* d = chart_t->find("dim"); d && (!d->is_number() || d->num() != chart.dim()))
    throw ConfigError("chart.dim does not match the number of coordinates", chart_t->line);
  bool riemannian = false;
  if (const ConfigValue* r = chart_t->find("riemannian")) {
    if (!r->is_bool()) throw ConfigError("chart.riemannian must be a boolean", chart_t->line);
    riemannian = r->boolean();
  }

  std::vector<std::string> param_names;
  if (const ConfigTable* p = doc.table("params")) {
    for (const auto& [k, v] : p->entries) {
      double val = 0.0;
      if (v.is_number()) {
        val = v.num();
      } else if (v.is_string()) {
        try {
          val = eval_double(parse(v.str(), {}), {}, {});
        } catch (const std::exception& e) {
          throw ConfigError("param '" + k + "': " + e.what(), p->line);
        }
      } else {
        throw ConfigError("param '" + k + "' must be a number", p->line);
      }
      cfg.params[k] = val;
      param_names.push_back(k);
    }
  }
  auto expr = [&](const std::string& text, const std::string& where) {
    try {
      return parse(text, chart.coords, param_names);
    } catch (const ParseError& e) {
      throw ConfigError(where + ": " + e.what(), 0);
    }
  };

  if (const ConfigValue* cs = chart_t->find("constraints")) {
    if (!cs->is_array()) throw ConfigError("chart.constraints must be an array", chart_t->line);
    for (const auto& c : cs->array()) chart.constraints.push_back(expr(detail::expr_text(c, "constraint"), "constraint"));
  }

  try {
    validate_chart(chart);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), chart_t->line);
  }
  const int n = chart.dim();
  std::vector<std::optional<std::string>> comps(static_cast<std::size_t>(n * (n + 1) / 2));
  auto upper_slot = [n](int i, int j) {
    if (i > j) std::swap(i, j);
    return static_cast<std::size_t>(i * n - i * (i - 1) / 2 + (j - i));
  };
  const ConfigTable* metric_t = doc.table("metric");
  if (!metric_t) throw ConfigError("missing [metric] table", 0);
  for (const auto& [k, v] : metric_t->entries) {
    const auto comma = k.find(',');
    if (comma == std::string::npos) throw ConfigError("metric key '" + k + "' must look like \"i,j\"", metric_t->line);
    const int i = detail::coord_slot(k.substr(0, comma), chart.coords);
    const int j = detail::coord_slot(k.substr(comma + 1), chart.coords);
    auto& slot = comps[upper_slot(i, j)];
    if (slot) throw ConfigError("metric component '" + k + "' given twice", metric_t->line);
    slot = detail::expr_text(v, "metric component");
  }
  std::vector<Expr> upper;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const auto& text = comps[upper_slot(i, j)];
      upper.push_back(expr(text.value_or("0"), "metric component " + chart.coords[static_cast<std::size_t>(i)] +
                                                   "," + chart.coords[static_cast<std::size_t>(j)]));
    }

  std::vector<Interval> box;
  if (const ConfigTable* b = doc.table("box")) {
    box.assign(static_cast<std::size_t>(n), Interval{});
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (const auto& [k, v] : b->entries) {
      const int i = detail::coord_slot(k, chart.coords);
      if (!v.is_array() || v.array().size() != 2 || !v.array()[0].is_number() || !v.array()[1].is_number())
        throw ConfigError("box entry '" + k + "' must be [lo, hi]", b->line);
      box[static_cast<std::size_t>(i)] = {v.array()[0].num(), v.array()[1].num()};
      seen[static_cast<std::size_t>(i)] = true;
    }
    for (int i = 0; i < n; ++i)
      if (!seen[static_cast<std::size_t>(i)])
        throw ConfigError("box is missing coordinate '" + chart.coords[static_cast<std::size_t>(i)] + "'", b->line);
  }

  std::string h_text = "1", lambda_text = "0";
  if (const ConfigTable* d = doc.table("density")) {
    if (const ConfigValue* h = d->find("h")) h_text = detail::expr_text(*h, "density.h");
    if (const ConfigValue* l = d->find("lambda")) lambda_text = detail::expr_text(*l, "density.lambda");
    if (const ConfigValue* f = d->find("f")) cfg.potential = expr(detail::expr_text(*f, "density.f"), "density.f");
    if (const ConfigValue* mu = d->find("mu")) {
      if (!mu->is_number()) throw ConfigError("density.mu must be a number", d->line);
      cfg.mu = mu->num();
    }
  }
  cfg.density.h = expr(h_text, "density.h");
  try {
    cfg.lambda = parse(lambda_text, {}, param_names);
  } catch (const ParseError& e) {
    throw ConfigError(std::string("density.lambda: ") + e.what(), 0);
  }
  cfg.metric = MetricSpec(std::move(chart), std::move(upper), riemannian);
  cfg.box = std::move(box);
  return cfg;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'", 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline MetricConfig load_metric_config_file(const std::string& path) {
  return load_metric_config(parse_config_text(read_file(path)));
}

/// Config document describing an instantiated catalog family.
inline ConfigDocument export_family(const FamilyInstance& inst) {
  ConfigDocument doc;
  const Chart& chart = inst.metric.chart();
  const int n = chart.dim();
  ConfigTable root;
  root.entries.push_back({"family", {inst.id}});
  doc.tables.emplace_back("", std::move(root));

  ConfigTable ct;
  ct.entries.push_back({"dim", {static_cast<double>(n)}});
  std::vector<ConfigValue> coords, constraints;
  for (const auto& c : chart.coords) coords.push_back({c});
  for (const auto& c : chart.constraints) constraints.push_back({serialize(c)});
  ct.entries.push_back({"coords", {std::move(coords)}});
  ct.entries.push_back({"constraints", {std::move(constraints)}});
  ct.entries.push_back({"riemannian", {inst.metric.riemannian()}});
  doc.tables.emplace_back("chart", std::move(ct));

  ConfigTable pt;
  for (const auto& [k, v] : inst.bindings.reals) pt.entries.push_back({k, {v}});
  doc.tables.emplace_back("params", std::move(pt));

  ConfigTable mt;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const Expr& e = inst.metric.component(i, j);
      if (e.root().op == Op::Number && e.root().number == 0.0) continue;
      mt.entries.push_back({chart.coords[static_cast<std::size_t>(i)] + "," + chart.coords[static_cast<std::size_t>(j)],
                            {serialize(e)}});
    }
  doc.tables.emplace_back("metric", std::move(mt));

  ConfigTable dt;
  dt.entries.push_back({"h", {serialize(inst.density.h)}});
  dt.entries.push_back({"lambda", {serialize(inst.lambda)}});
  if (inst.cpe_potential) dt.entries.push_back({"f", {serialize(*inst.cpe_potential)}});
  doc.tables.emplace_back("density", std::move(dt));

  ConfigTable bt;
  for (int i = 0; i < n; ++i) {
    const Interval& iv = inst.box[static_cast<std::size_t>(i)];
    bt.entries.push_back({chart.coords[static_cast<std::size_t>(i)], {std::vector<ConfigValue>{{iv.lo}, {iv.hi}}}});
  }
  doc.tables.emplace_back("box", std::move(bt));
  return doc;
}

}  // namespace wefe

#endif  // WEFE_CONFIG_HPP
