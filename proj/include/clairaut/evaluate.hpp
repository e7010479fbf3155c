#pragma once

// Two evaluators. evaluate() walks the tree against a name map and is used
// for one-off values. CompiledExpr flattens a tree to a postfix tape over
// numbered slots; the transform layer evaluates its partials this way.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "clairaut/errors.hpp"
#include "clairaut/expr.hpp"

namespace clairaut {

using Bindings = std::map<std::string, double>;

namespace detail {

inline double checked_div(double n, double d) {
  if (d == 0.0) throw EvalError::domain("division by zero");
  return n / d;
}

inline double checked_pow(double b, double x) {
  if (b == 0.0 && x < 0.0) throw EvalError::domain("division by zero in 0^" + format_number(x));
  if (b < 0.0 && std::floor(x) != x)
    throw EvalError::domain("negative base " + format_number(b) + " to non-integer power");
  double v = std::pow(b, x);
  if (!std::isfinite(v)) throw EvalError::domain("pow overflow");
  return v;
}

inline double checked_call(Func f, double x) {
  if (!in_domain(f, x)) {
    const auto& info = function_info(f);
    throw EvalError::domain(std::string(info.name) + " of " + format_number(x));
  }
  return function_info(f).apply(x);
}

}  // namespace detail

inline double evaluate(const Expr& e, const Bindings& b) {
  using K = Expr::Kind;
  switch (e.kind()) {
    case K::Constant:
      return e.value();
    case K::Symbol: {
      auto it = b.find(e.name());
      if (it == b.end()) throw EvalError::unbound(e.name());
      return it->second;
    }
    case K::Sum: {
      double s = 0.0;
      for (const auto& c : e.children()) s += evaluate(c, b);
      return s;
    }
    case K::Product: {
      double p = 1.0;
      for (const auto& c : e.children()) p *= evaluate(c, b);
      return p;
    }
    case K::Power:
      return detail::checked_pow(evaluate(e.child(0), b), evaluate(e.child(1), b));
    case K::Negate:
      return -evaluate(e.child(0), b);
    case K::Quotient:
      return detail::checked_div(evaluate(e.child(0), b), evaluate(e.child(1), b));
    case K::Call:
      return detail::checked_call(e.func(), evaluate(e.child(0), b));
  }
  return 0.0;
}

/// Ordered symbol names; index in the table is the slot number.
class SymbolTable {
 public:
  SymbolTable() = default;
  explicit SymbolTable(std::vector<std::string> names) {
    for (auto& n : names) add(std::move(n));
  }

  std::size_t add(std::string name) {
    auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    std::size_t i = names_.size();
    index_.emplace(name, i);
    names_.push_back(std::move(name));
    return i;
  }
  std::optional<std::size_t> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

class CompiledExpr {
 public:
  CompiledExpr() = default;

  /// Throws EvalError naming the first symbol missing from the table.
  CompiledExpr(const Expr& e, const SymbolTable& table) {
    emit(e, table);
    std::size_t depth = 0;
    for (const auto& op : tape_) {
      switch (op.code) {
        case Op::Const:
        case Op::Slot:
          ++depth;
          break;
        case Op::Add:
        case Op::Mul:
          depth -= op.count - 1;
          break;
        case Op::Pow:
        case Op::Div:
          --depth;
          break;
        default:
          break;
      }
      max_depth_ = std::max(max_depth_, depth);
    }
    constant_ = tape_.size() == 1 && tape_[0].code == Op::Const;
  }

  bool is_constant() const { return constant_; }

  double operator()(std::span<const double> slots) const {
    // Small fixed stack covers every expression the fixtures produce.
    double small[64] = {};
    std::vector<double> big;
    double* st = small;
    if (max_depth_ > 64) {
      big.resize(max_depth_);
      st = big.data();
    }
    std::size_t top = 0;
    for (const auto& op : tape_) {
      switch (op.code) {
        case Op::Const:
          st[top++] = op.value;
          break;
        case Op::Slot:
          st[top++] = slots[op.count];
          break;
        case Op::Add: {
          double s = 0.0;
          for (std::size_t k = top - op.count; k < top; ++k) s += st[k];
          top -= op.count;
          st[top++] = s;
          break;
        }
        case Op::Mul: {
          double p = 1.0;
          for (std::size_t k = top - op.count; k < top; ++k) p *= st[k];
          top -= op.count;
          st[top++] = p;
          break;
        }
        case Op::Pow:
          --top;
          st[top - 1] = detail::checked_pow(st[top - 1], st[top]);
          break;
        case Op::Div:
          --top;
          st[top - 1] = detail::checked_div(st[top - 1], st[top]);
          break;
        case Op::Neg:
          st[top - 1] = -st[top - 1];
          break;
        case Op::Call:
          st[top - 1] = detail::checked_call(op.func, st[top - 1]);
          break;
      }
    }
    return st[0];
  }

 private:
  enum class Op : std::uint8_t { Const, Slot, Add, Mul, Pow, Div, Neg, Call };
  struct Instr {
    Op code;
    Func func = Func::Sin;
    std::size_t count = 0;
    double value = 0.0;
  };

  void emit(const Expr& e, const SymbolTable& table) {
    using K = Expr::Kind;
    switch (e.kind()) {
      case K::Constant:
        tape_.push_back({Op::Const, Func::Sin, 0, e.value()});
        return;
      case K::Symbol: {
        auto slot = table.find(e.name());
        if (!slot) throw EvalError::unbound(e.name());
        tape_.push_back({Op::Slot, Func::Sin, *slot, 0.0});
        return;
      }
      case K::Sum:
      case K::Product:
        for (const auto& c : e.children()) emit(c, table);
        if (e.children().empty()) {
          tape_.push_back({Op::Const, Func::Sin, 0, e.kind() == K::Sum ? 0.0 : 1.0});
          return;
        }
        tape_.push_back({e.kind() == K::Sum ? Op::Add : Op::Mul, Func::Sin, e.children().size(), 0.0});
        return;
      case K::Power:
        emit(e.child(0), table);
        emit(e.child(1), table);
        tape_.push_back({Op::Pow});
        return;
      case K::Quotient:
        emit(e.child(0), table);
        emit(e.child(1), table);
        tape_.push_back({Op::Div});
        return;
      case K::Negate:
        emit(e.child(0), table);
        tape_.push_back({Op::Neg});
        return;
      case K::Call:
        emit(e.child(0), table);
        tape_.push_back({Op::Call, e.func()});
        return;
    }
  }

  std::vector<Instr> tape_;
  std::size_t max_depth_ = 0;
  bool constant_ = false;
};

}  // namespace clairaut
