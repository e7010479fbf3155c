#pragma once

// Immutable expression trees over real symbols.
//
// Nodes are shared and never mutated after construction, so an Expr can be
// copied freely and read from any number of threads.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace clairaut {

enum class Func : std::uint8_t { Sin, Cos, Exp, Log, Sqrt };

struct FunctionInfo {
  Func id;
  std::string_view name;
  double (*apply)(double);
  // Smallest admissible argument; arguments below it are a domain error.
  // Log excludes its bound, sqrt includes it.
  std::optional<double> lower_bound;
  bool bound_inclusive;
};

inline const std::array<FunctionInfo, 5>& function_table() {
  static const std::array<FunctionInfo, 5> table{{
      {Func::Sin, "sin", [](double x) { return std::sin(x); }, std::nullopt, false},
      {Func::Cos, "cos", [](double x) { return std::cos(x); }, std::nullopt, false},
      {Func::Exp, "exp", [](double x) { return std::exp(x); }, std::nullopt, false},
      {Func::Log, "log", [](double x) { return std::log(x); }, 0.0, false},
      {Func::Sqrt, "sqrt", [](double x) { return std::sqrt(x); }, 0.0, true},
  }};
  return table;
}

inline const FunctionInfo& function_info(Func f) {
  return function_table()[static_cast<std::size_t>(f)];
}

inline std::optional<Func> find_function(std::string_view name) {
  for (const auto& info : function_table())
    if (info.name == name) return info.id;
  return std::nullopt;
}

inline bool in_domain(Func f, double x) {
  const auto& info = function_info(f);
  if (!info.lower_bound) return true;
  return info.bound_inclusive ? x >= *info.lower_bound : x > *info.lower_bound;
}

class Expr {
 public:
  enum class Kind : std::uint8_t { Constant, Symbol, Sum, Product, Power, Negate, Quotient, Call };

  Expr() : Expr(constant(0.0)) {}

  static Expr constant(double value) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Constant;
    n->value = value;
    return Expr(std::move(n));
  }
  static Expr symbol(std::string name) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Symbol;
    n->name = std::move(name);
    return Expr(std::move(n));
  }
  static Expr sum(std::vector<Expr> terms) { return list(Kind::Sum, std::move(terms)); }
  static Expr product(std::vector<Expr> factors) { return list(Kind::Product, std::move(factors)); }
  static Expr power(Expr base, Expr exponent) {
    return list(Kind::Power, {std::move(base), std::move(exponent)});
  }
  static Expr negate(Expr child) { return list(Kind::Negate, {std::move(child)}); }
  static Expr quotient(Expr num, Expr den) {
    return list(Kind::Quotient, {std::move(num), std::move(den)});
  }
  static Expr call(Func f, Expr child) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Call;
    n->func = f;
    n->children.push_back(std::move(child));
    return Expr(std::move(n));
  }

  Kind kind() const noexcept { return node_->kind; }
  double value() const noexcept { return node_->value; }
  const std::string& name() const noexcept { return node_->name; }
  Func func() const noexcept { return node_->func; }
  const std::vector<Expr>& children() const noexcept { return node_->children; }
  const Expr& child(std::size_t i) const { return node_->children.at(i); }

  bool is_constant() const noexcept { return kind() == Kind::Constant; }
  bool is_constant(double v) const noexcept { return is_constant() && value() == v; }
  bool is_symbol() const noexcept { return kind() == Kind::Symbol; }

  // Identity of the shared node, not structural equality.
  bool same_node(const Expr& other) const noexcept { return node_ == other.node_; }

 private:
  struct Node {
    Kind kind = Kind::Constant;
    double value = 0.0;
    std::string name;
    Func func = Func::Sin;
    std::vector<Expr> children;
  };

  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  static Expr list(Kind kind, std::vector<Expr> children) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->children = std::move(children);
    return Expr(std::move(n));
  }

  std::shared_ptr<const Node> node_;
};

inline Expr operator+(const Expr& a, const Expr& b) { return Expr::sum({a, b}); }
inline Expr operator-(const Expr& a, const Expr& b) { return Expr::sum({a, Expr::negate(b)}); }
inline Expr operator*(const Expr& a, const Expr& b) { return Expr::product({a, b}); }
inline Expr operator/(const Expr& a, const Expr& b) { return Expr::quotient(a, b); }
inline Expr operator-(const Expr& a) { return Expr::negate(a); }

/// Total structural order: negative, zero or positive like strcmp.
inline int compare(const Expr& a, const Expr& b) {
  if (a.same_node(b)) return 0;
  if (a.kind() != b.kind()) return a.kind() < b.kind() ? -1 : 1;
  switch (a.kind()) {
    case Expr::Kind::Constant:
      if (a.value() == b.value()) return 0;
      return a.value() < b.value() ? -1 : 1;
    case Expr::Kind::Symbol:
      return a.name().compare(b.name()) < 0 ? -1 : (a.name() == b.name() ? 0 : 1);
    case Expr::Kind::Call:
      if (a.func() != b.func()) return a.func() < b.func() ? -1 : 1;
      break;
    default:
      break;
  }
  const auto& ca = a.children();
  const auto& cb = b.children();
  for (std::size_t i = 0; i < ca.size() && i < cb.size(); ++i)
    if (int c = compare(ca[i], cb[i]); c != 0) return c;
  if (ca.size() == cb.size()) return 0;
  return ca.size() < cb.size() ? -1 : 1;
}

inline bool operator==(const Expr& a, const Expr& b) { return compare(a, b) == 0; }

inline void collect_symbols(const Expr& e, std::set<std::string>& out) {
  if (e.is_symbol()) {
    out.insert(e.name());
    return;
  }
  for (const auto& c : e.children()) collect_symbols(c, out);
}

inline std::set<std::string> free_symbols(const Expr& e) {
  std::set<std::string> out;
  collect_symbols(e, out);
  return out;
}

inline bool depends_on(const Expr& e, const std::string& s) {
  if (e.is_symbol()) return e.name() == s;
  for (const auto& c : e.children())
    if (depends_on(c, s)) return true;
  return false;
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double v) {
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

/// Fixed 17-significant-digit rendering used by the CSV writer.
inline std::string format_number17(double v) {
  std::array<char, 40> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                           std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

namespace detail {

inline bool negative_coefficient(const Expr& e) {
  if (e.is_constant()) return e.value() < 0 || std::signbit(e.value());
  return e.kind() == Expr::Kind::Product && !e.children().empty() &&
         e.child(0).is_constant() && e.child(0).value() < 0;
}

inline bool atomic_for_power(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Symbol:
    case Expr::Kind::Call:
      return true;
    case Expr::Kind::Constant:
      return !std::signbit(e.value());
    default:
      return false;
  }
}

}  // namespace detail

std::string to_string(const Expr& e);

namespace detail {

inline std::string factor_text(const Expr& f) {
  switch (f.kind()) {
    case Expr::Kind::Sum:
    case Expr::Kind::Quotient:
    case Expr::Kind::Negate:
      return "(" + to_string(f) + ")";
    default:
      return to_string(f);
  }
}

// Product printed with its leading coefficient flipped in sign; used for
// "a - 2*b" style rendering of negative terms.
inline std::string negated_text(const Expr& e) {
  if (e.is_constant()) return format_number(-e.value());
  std::vector<Expr> rest(e.children().begin(), e.children().end());
  double c = -rest.front().value();
  rest.erase(rest.begin());
  if (c != 1.0) rest.insert(rest.begin(), Expr::constant(c));
  if (rest.size() == 1) return factor_text(rest.front());
  return to_string(Expr::product(std::move(rest)));
}

}  // namespace detail

/// Infix rendering that parses back to the same tree (after simplification
/// for trees carrying negative coefficients).
inline std::string to_string(const Expr& e) {
  using K = Expr::Kind;
  switch (e.kind()) {
    case K::Constant:
      return format_number(e.value());
    case K::Symbol:
      return e.name();
    case K::Sum: {
      std::string out;
      bool first = true;
      for (const auto& t : e.children()) {
        if (first) {
          out = t.kind() == K::Sum ? "(" + to_string(t) + ")" : to_string(t);
          first = false;
        } else if (detail::negative_coefficient(t)) {
          out += " - " + detail::negated_text(t);
        } else {
          out += " + " + (t.kind() == K::Sum ? "(" + to_string(t) + ")" : to_string(t));
        }
      }
      return out;
    }
    case K::Product: {
      std::string out;
      const auto& fs = e.children();
      std::size_t start = 0;
      if (!fs.empty() && fs[0].is_constant() && fs[0].value() == -1.0 && fs.size() > 1) {
        out = "-";
        start = 1;
      }
      for (std::size_t i = start; i < fs.size(); ++i) {
        if (i > start) out += "*";
        // A negative constant after the first slot needs parentheses.
        if (i > 0 && fs[i].is_constant() && std::signbit(fs[i].value()))
          out += "(" + to_string(fs[i]) + ")";
        else
          out += detail::factor_text(fs[i]);
      }
      return out;
    }
    case K::Power: {
      const auto& b = e.child(0);
      const auto& x = e.child(1);
      std::string bs = detail::atomic_for_power(b) ? to_string(b) : "(" + to_string(b) + ")";
      std::string xs = (x.is_symbol() || x.is_constant() || x.kind() == K::Call)
                           ? to_string(x)
                           : "(" + to_string(x) + ")";
      return bs + "^" + xs;
    }
    case K::Negate: {
      const auto& c = e.child(0);
      if (c.is_symbol() || c.kind() == K::Call || (c.is_constant() && !std::signbit(c.value())))
        return "-" + to_string(c);
      return "-(" + to_string(c) + ")";
    }
    case K::Quotient: {
      const auto& n = e.child(0);
      const auto& d = e.child(1);
      std::string ns = (n.kind() == K::Sum || n.kind() == K::Negate) ? "(" + to_string(n) + ")"
                                                                      : to_string(n);
      bool wrap = d.kind() == K::Sum || d.kind() == K::Product || d.kind() == K::Quotient ||
                  d.kind() == K::Negate;
      std::string ds = wrap ? "(" + to_string(d) + ")" : to_string(d);
      return ns + "/" + ds;
    }
    case K::Call:
      return std::string(function_info(e.func()).name) + "(" + to_string(e.child(0)) + ")";
  }
  return {};
}

}  // namespace clairaut
