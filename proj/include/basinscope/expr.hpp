#pragma once

// Arithmetic expression trees over state variables and parameters: parsing,
// printing, evaluation, and symbolic differentiation with constant folding.

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "format.hpp"

namespace basinscope {

enum class NodeKind { Constant, StateVar, Param, Neg, Add, Sub, Mul, Div, Pow, Func };
enum class Func { Sin, Cos, Exp, Ln, Tanh, Sqrt };

inline const char* func_name(Func f) {
  switch (f) {
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Exp: return "exp";
    case Func::Ln: return "ln";
    case Func::Tanh: return "tanh";
    case Func::Sqrt: return "sqrt";
  }
  return "?";
}

inline bool lookup_func(std::string_view name, Func& out) {
  static constexpr std::pair<std::string_view, Func> table[] = {
      {"sin", Func::Sin}, {"cos", Func::Cos},   {"exp", Func::Exp},
      {"ln", Func::Ln},   {"tanh", Func::Tanh}, {"sqrt", Func::Sqrt}};
  for (const auto& [n, f] : table) {
    if (n == name) {
      out = f;
      return true;
    }
  }
  return false;
}

struct ExprNode;

/// Immutable, cheaply copyable handle to an expression tree.
///
/// The factory functions build nodes verbatim. Folding constructors used by
/// differentiation live in `fold::`.
class Expr {
 public:
  Expr() = default;

  static Expr constant(double v);
  static Expr state_var(std::string name, std::size_t index);
  static Expr param(std::string name, std::size_t index);
  static Expr neg(Expr a);
  static Expr add(Expr a, Expr b) { return binary(NodeKind::Add, std::move(a), std::move(b)); }
  static Expr sub(Expr a, Expr b) { return binary(NodeKind::Sub, std::move(a), std::move(b)); }
  static Expr mul(Expr a, Expr b) { return binary(NodeKind::Mul, std::move(a), std::move(b)); }
  static Expr div(Expr a, Expr b) { return binary(NodeKind::Div, std::move(a), std::move(b)); }
  static Expr pow(Expr base, double exponent);
  static Expr func(Func f, Expr arg);

  bool valid() const { return static_cast<bool>(node_); }
  const ExprNode& node() const { return *node_; }
  const ExprNode* operator->() const { return node_.get(); }
  NodeKind kind() const;
  bool is_constant() const;
  bool is_constant(double v) const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  explicit Expr(std::shared_ptr<const ExprNode> n) : node_(std::move(n)) {}
  static Expr binary(NodeKind k, Expr a, Expr b);

  std::shared_ptr<const ExprNode> node_;
};

struct ExprNode {
  NodeKind kind = NodeKind::Constant;
  double value = 0.0;     // Constant value, or Pow exponent
  std::string name;       // StateVar / Param
  std::size_t index = 0;  // position in the declared state or param list
  Func func = Func::Sin;
  Expr lhs;  // unary operand, Pow base, or left operand
  Expr rhs;
};

inline NodeKind Expr::kind() const { return node_->kind; }
inline bool Expr::is_constant() const { return valid() && node_->kind == NodeKind::Constant; }
inline bool Expr::is_constant(double v) const { return is_constant() && node_->value == v; }

inline Expr Expr::constant(double v) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Constant;
  n->value = v;
  return Expr(std::move(n));
}
inline Expr Expr::state_var(std::string name, std::size_t index) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::StateVar;
  n->name = std::move(name);
  n->index = index;
  return Expr(std::move(n));
}
inline Expr Expr::param(std::string name, std::size_t index) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Param;
  n->name = std::move(name);
  n->index = index;
  return Expr(std::move(n));
}
inline Expr Expr::neg(Expr a) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Neg;
  n->lhs = std::move(a);
  return Expr(std::move(n));
}
inline Expr Expr::binary(NodeKind k, Expr a, Expr b) {
  auto n = std::make_shared<ExprNode>();
  n->kind = k;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return Expr(std::move(n));
}
inline Expr Expr::pow(Expr base, double exponent) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Pow;
  n->lhs = std::move(base);
  n->value = exponent;
  return Expr(std::move(n));
}
inline Expr Expr::func(Func f, Expr arg) {
  auto n = std::make_shared<ExprNode>();
  n->kind = NodeKind::Func;
  n->func = f;
  n->lhs = std::move(arg);
  return Expr(std::move(n));
}

inline bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (!a.valid() || !b.valid()) return false;
  const ExprNode& x = *a.node_;
  const ExprNode& y = *b.node_;
  if (x.kind != y.kind) return false;
  switch (x.kind) {
    case NodeKind::Constant: return x.value == y.value;
    case NodeKind::StateVar:
    case NodeKind::Param: return x.name == y.name;
    case NodeKind::Neg: return x.lhs == y.lhs;
    case NodeKind::Pow: return x.value == y.value && x.lhs == y.lhs;
    case NodeKind::Func: return x.func == y.func && x.lhs == y.lhs;
    default: return x.lhs == y.lhs && x.rhs == y.rhs;
  }
}

// ---------------------------------------------------------------------------
// Evaluation

namespace detail {

inline bool is_integral_exponent(double p) {
  return std::floor(p) == p && std::fabs(p) <= 1024.0;
}

inline double int_pow(double base, double exponent) {
  long long k = static_cast<long long>(exponent);
  bool invert = k < 0;
  unsigned long long e = invert ? static_cast<unsigned long long>(-k)
                                : static_cast<unsigned long long>(k);
  double result = 1.0;
  double b = base;
  while (e) {
    if (e & 1ULL) result *= b;
    b *= b;
    e >>= 1ULL;
  }
  if (invert) {
    if (result == 0.0) throw DomainError("division by zero in negative power");
    result = 1.0 / result;
  }
  return result;
}

inline double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string("non-finite result in ") + what);
  return v;
}

inline double apply_func(Func f, double a) {
  switch (f) {
    case Func::Sin: return std::sin(a);
    case Func::Cos: return std::cos(a);
    case Func::Exp: return checked(std::exp(a), "exp");
    case Func::Ln:
      if (!(a > 0.0)) throw DomainError("ln of non-positive argument");
      return std::log(a);
    case Func::Tanh: return std::tanh(a);
    case Func::Sqrt:
      if (a < 0.0) throw DomainError("sqrt of negative argument");
      return std::sqrt(a);
  }
  return a;
}

inline double apply_pow(double base, double exponent) {
  if (is_integral_exponent(exponent)) return checked(int_pow(base, exponent), "power");
  if (base < 0.0) throw DomainError("non-integer power of negative base");
  if (base == 0.0 && exponent < 0.0) throw DomainError("division by zero in negative power");
  return checked(std::pow(base, exponent), "power");
}

template <typename Lookup>
double eval_with(const Expr& e, const Lookup& lookup) {
  const ExprNode& n = e.node();
  switch (n.kind) {
    case NodeKind::Constant: return n.value;
    case NodeKind::StateVar:
    case NodeKind::Param: return lookup(n);
    case NodeKind::Neg: return -eval_with(n.lhs, lookup);
    case NodeKind::Add: return checked(eval_with(n.lhs, lookup) + eval_with(n.rhs, lookup), "addition");
    case NodeKind::Sub: return checked(eval_with(n.lhs, lookup) - eval_with(n.rhs, lookup), "subtraction");
    case NodeKind::Mul: return checked(eval_with(n.lhs, lookup) * eval_with(n.rhs, lookup), "multiplication");
    case NodeKind::Div: {
      double num = eval_with(n.lhs, lookup);
      double den = eval_with(n.rhs, lookup);
      if (den == 0.0) throw DomainError("division by zero");
      return checked(num / den, "division");
    }
    case NodeKind::Pow: return apply_pow(eval_with(n.lhs, lookup), n.value);
    case NodeKind::Func: return apply_func(n.func, eval_with(n.lhs, lookup));
  }
  return 0.0;
}

}  // namespace detail

/// Evaluates with state and parameter values given positionally, in the
/// order the names were declared at parse time.
inline double eval(const Expr& e, std::span<const double> state, std::span<const double> params) {
  return detail::eval_with(e, [&](const ExprNode& n) {
    return n.kind == NodeKind::StateVar ? state[n.index] : params[n.index];
  });
}

inline double eval(const Expr& e, const std::map<std::string, double>& state,
                   const std::map<std::string, double>& params) {
  return detail::eval_with(e, [&](const ExprNode& n) {
    const auto& table = n.kind == NodeKind::StateVar ? state : params;
    auto it = table.find(n.name);
    if (it == table.end()) throw UnknownIdentifier(n.name, "evaluation bindings");
    return it->second;
  });
}

// ---------------------------------------------------------------------------
// Folding constructors

namespace fold {

inline bool foldable(double v) { return std::isfinite(v); }

inline Expr neg(const Expr& a) {
  if (a.is_constant()) return Expr::constant(-a->value);
  if (a.kind() == NodeKind::Neg) return a->lhs;
  return Expr::neg(a);
}

inline Expr add(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant() && foldable(a->value + b->value))
    return Expr::constant(a->value + b->value);
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  return Expr::add(a, b);
}

inline Expr sub(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant() && foldable(a->value - b->value))
    return Expr::constant(a->value - b->value);
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return neg(b);
  return Expr::sub(a, b);
}

inline Expr mul(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant() && foldable(a->value * b->value))
    return Expr::constant(a->value * b->value);
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return neg(b);
  if (b.is_constant(-1.0)) return neg(a);
  return Expr::mul(a, b);
}

inline Expr div(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant() && b->value != 0.0 && foldable(a->value / b->value))
    return Expr::constant(a->value / b->value);
  if (a.is_constant(0.0) && !b.is_constant()) return Expr::constant(0.0);
  if (b.is_constant(1.0)) return a;
  return Expr::div(a, b);
}

inline Expr pow(const Expr& base, double exponent) {
  if (exponent == 0.0) return Expr::constant(1.0);
  if (exponent == 1.0) return base;
  if (base.is_constant()) {
    try {
      return Expr::constant(detail::apply_pow(base->value, exponent));
    } catch (const DomainError&) {
    }
  }
  return Expr::pow(base, exponent);
}

inline Expr func(Func f, const Expr& arg) {
  if (arg.is_constant()) {
    try {
      double v = detail::apply_func(f, arg->value);
      if (std::isfinite(v)) return Expr::constant(v);
    } catch (const DomainError&) {
    }
  }
  return Expr::func(f, arg);
}

}  // namespace fold

// ---------------------------------------------------------------------------
// Differentiation

/// Symbolic derivative with respect to the identifier `var`. Any identifier
/// other than `var` is treated as constant. Normally `var` names a state
/// variable; naming a parameter yields the parameter sensitivity, which the
/// fold locator uses for its augmented system.
inline Expr differentiate(const Expr& e, std::string_view var) {
  const ExprNode& n = e.node();
  switch (n.kind) {
    case NodeKind::Constant: return Expr::constant(0.0);
    case NodeKind::StateVar:
    case NodeKind::Param: return Expr::constant(n.name == var ? 1.0 : 0.0);
    case NodeKind::Neg: return fold::neg(differentiate(n.lhs, var));
    case NodeKind::Add: return fold::add(differentiate(n.lhs, var), differentiate(n.rhs, var));
    case NodeKind::Sub: return fold::sub(differentiate(n.lhs, var), differentiate(n.rhs, var));
    case NodeKind::Mul: {
      Expr du = differentiate(n.lhs, var);
      Expr dv = differentiate(n.rhs, var);
      return fold::add(fold::mul(du, n.rhs), fold::mul(n.lhs, dv));
    }
    case NodeKind::Div: {
      Expr du = differentiate(n.lhs, var);
      Expr dv = differentiate(n.rhs, var);
      if (dv.is_constant(0.0)) return fold::div(du, n.rhs);
      return fold::div(fold::sub(fold::mul(du, n.rhs), fold::mul(n.lhs, dv)),
                       fold::pow(n.rhs, 2.0));
    }
    case NodeKind::Pow: {
      Expr du = differentiate(n.lhs, var);
      Expr outer = fold::mul(Expr::constant(n.value), fold::pow(n.lhs, n.value - 1.0));
      return fold::mul(outer, du);
    }
    case NodeKind::Func: {
      Expr du = differentiate(n.lhs, var);
      if (du.is_constant(0.0)) return du;
      const Expr& u = n.lhs;
      switch (n.func) {
        case Func::Sin: return fold::mul(fold::func(Func::Cos, u), du);
        case Func::Cos: return fold::mul(fold::neg(fold::func(Func::Sin, u)), du);
        case Func::Exp: return fold::mul(e, du);
        case Func::Ln: return fold::div(du, u);
        case Func::Tanh:
          return fold::mul(fold::sub(Expr::constant(1.0), fold::pow(e, 2.0)), du);
        case Func::Sqrt: return fold::div(du, fold::mul(Expr::constant(2.0), e));
      }
    }
  }
  return Expr::constant(0.0);
}

// ---------------------------------------------------------------------------
// Printing

namespace detail {

// Binding strength used to decide where parentheses are needed.
inline int precedence(const Expr& e) {
  switch (e.kind()) {
    case NodeKind::Add:
    case NodeKind::Sub: return 1;
    case NodeKind::Mul:
    case NodeKind::Div: return 2;
    case NodeKind::Neg: return 3;
    case NodeKind::Pow: return 4;
    case NodeKind::Constant: return e->value < 0.0 || std::signbit(e->value) ? 3 : 5;
    default: return 5;
  }
}

inline void print_into(const Expr& e, std::string& out);

inline void print_child(const Expr& e, int min_prec, std::string& out) {
  if (precedence(e) < min_prec) {
    out += '(';
    print_into(e, out);
    out += ')';
  } else {
    print_into(e, out);
  }
}

inline void print_into(const Expr& e, std::string& out) {
  const ExprNode& n = e.node();
  switch (n.kind) {
    case NodeKind::Constant: out += format_shortest(n.value); return;
    case NodeKind::StateVar:
    case NodeKind::Param: out += n.name; return;
    case NodeKind::Neg:
      out += '-';
      print_child(n.lhs, 4, out);
      return;
    case NodeKind::Add:
    case NodeKind::Sub:
      print_child(n.lhs, 1, out);
      out += n.kind == NodeKind::Add ? " + " : " - ";
      print_child(n.rhs, 2, out);
      return;
    case NodeKind::Mul:
    case NodeKind::Div:
      print_child(n.lhs, 2, out);
      out += n.kind == NodeKind::Mul ? '*' : '/';
      print_child(n.rhs, 3, out);
      return;
    case NodeKind::Pow:
      print_child(n.lhs, 5, out);
      out += '^';
      if (n.value < 0.0) {
        out += '(';
        out += format_shortest(n.value);
        out += ')';
      } else {
        out += format_shortest(n.value);
      }
      return;
    case NodeKind::Func:
      out += func_name(n.func);
      out += '(';
      print_into(n.lhs, out);
      out += ')';
      return;
  }
}

}  // namespace detail

/// Renders `e` in the input grammar; parsing the result reproduces the tree.
inline std::string print(const Expr& e) {
  std::string out;
  detail::print_into(e, out);
  return out;
}

/// Names of all identifiers referenced by `e`.
inline std::set<std::string> identifiers(const Expr& e) {
  std::set<std::string> out;
  auto walk = [&](auto&& self, const Expr& x) -> void {
    const ExprNode& n = x.node();
    if (n.kind == NodeKind::StateVar || n.kind == NodeKind::Param) out.insert(n.name);
    if (n.lhs.valid()) self(self, n.lhs);
    if (n.rhs.valid()) self(self, n.rhs);
  };
  walk(walk, e);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

namespace detail {

enum class TokKind { Number, Ident, Op, LParen, RParen, End };

struct Token {
  TokKind kind;
  std::string text;
  std::size_t pos;
  double number = 0.0;
};

inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> toks;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
      if (i < text.size() && text[i] == '.') {
        ++i;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
      }
      std::string_view mant = text.substr(start, i - start);
      if (mant == ".") throw SyntaxError(start, ".", "malformed number");
      if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < text.size() && (text[j] == '+' || text[j] == '-')) ++j;
        if (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
          while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
          i = j;
        } else {
          throw SyntaxError(start, std::string(text.substr(start, j - start)),
                            "malformed exponent");
        }
      }
      std::string lit(text.substr(start, i - start));
      toks.push_back({TokKind::Number, lit, start, std::strtod(lit.c_str(), nullptr)});
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_'))
        ++i;
      toks.push_back({TokKind::Ident, std::string(text.substr(start, i - start)), start});
      continue;
    }
    switch (c) {
      case '+':
      case '-':
      case '*':
      case '/':
      case '^': toks.push_back({TokKind::Op, std::string(1, c), start}); break;
      case '(': toks.push_back({TokKind::LParen, "(", start}); break;
      case ')': toks.push_back({TokKind::RParen, ")", start}); break;
      default: throw SyntaxError(start, std::string(1, c), "unexpected character");
    }
    ++i;
  }
  toks.push_back({TokKind::End, "<end>", text.size()});
  return toks;
}

class Parser {
 public:
  Parser(std::string_view text, std::span<const std::string> state,
         std::span<const std::string> params)
      : toks_(tokenize(text)), state_(state), params_(params) {}

  Expr run() {
    Expr e = expression();
    if (peek().kind != TokKind::End) fail("unexpected token");
    return e;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  Token take() { return toks_[pos_++]; }
  bool at_op(char op) const {
    return peek().kind == TokKind::Op && peek().text[0] == op;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw SyntaxError(peek().pos, peek().text, msg);
  }

  Expr expression() {
    Expr e = term();
    while (at_op('+') || at_op('-')) {
      bool plus = take().text[0] == '+';
      Expr r = term();
      e = plus ? Expr::add(e, r) : Expr::sub(e, r);
    }
    return e;
  }

  Expr term() {
    Expr e = unary();
    while (at_op('*') || at_op('/')) {
      bool times = take().text[0] == '*';
      Expr r = unary();
      e = times ? Expr::mul(e, r) : Expr::div(e, r);
    }
    return e;
  }

  Expr unary() {
    if (at_op('-')) {
      take();
      return Expr::neg(unary());
    }
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (at_op('^')) {
      Token caret = take();
      std::size_t exp_pos = peek().pos;
      std::string exp_tok = peek().text;
      Expr exponent = unary();
      double value = 0.0;
      if (!constant_value(exponent, value))
        throw SyntaxError(exp_pos, exp_tok, "exponent must be a constant expression");
      return Expr::pow(base, value);
    }
    return base;
  }

  static bool constant_value(const Expr& e, double& out) {
    if (!identifiers(e).empty()) return false;
    try {
      out = eval(e, std::span<const double>{}, std::span<const double>{});
    } catch (const DomainError&) {
      return false;
    }
    return true;
  }

  Expr primary() {
    const Token& t = peek();
    switch (t.kind) {
      case TokKind::Number: {
        double v = take().number;
        return Expr::constant(v);
      }
      case TokKind::Ident: {
        Token id = take();
        if (peek().kind == TokKind::LParen) {
          Func f;
          if (!lookup_func(id.text, f)) throw UnknownIdentifier(id.text, "function call");
          take();
          Expr arg = expression();
          if (peek().kind != TokKind::RParen) fail("expected ')'");
          take();
          return Expr::func(f, arg);
        }
        for (std::size_t i = 0; i < state_.size(); ++i)
          if (state_[i] == id.text) return Expr::state_var(id.text, i);
        for (std::size_t i = 0; i < params_.size(); ++i)
          if (params_[i] == id.text) return Expr::param(id.text, i);
        throw UnknownIdentifier(id.text);
      }
      case TokKind::LParen: {
        take();
        Expr e = expression();
        if (peek().kind != TokKind::RParen) fail("expected ')'");
        take();
        return e;
      }
      default: fail("expected a number, identifier, or '('");
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::span<const std::string> state_;
  std::span<const std::string> params_;
};

}  // namespace detail

/// Parses `text` with standard precedence (`^` binds tightest and is
/// right-associative, then unary minus, then `* /`, then `+ -`).
/// Exponents must be constant expressions.
inline Expr parse(std::string_view text, std::span<const std::string> state_names,
                  std::span<const std::string> param_names) {
  std::set<std::string> seen;
  for (auto names : {state_names, param_names}) {
    for (const auto& n : names) {
      if (!is_identifier(n)) throw SchemaError("invalid identifier '" + n + "'");
      if (!seen.insert(n).second) throw SchemaError("duplicate identifier '" + n + "'");
    }
  }
  return detail::Parser(text, state_names, param_names).run();
}

inline Expr parse(std::string_view text, const std::vector<std::string>& state_names,
                  const std::vector<std::string>& param_names) {
  return parse(text, std::span<const std::string>(state_names),
               std::span<const std::string>(param_names));
}

}  // namespace basinscope
