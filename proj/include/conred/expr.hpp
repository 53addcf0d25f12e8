#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

// Scalar coordinate functions as immutable expression trees.
//
// Grammar (shared with the scene file format):
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := '-' factor | base ('^' INT)?
//   base   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'
// with functions sin, cos, exp, log, sqrt and identifiers
// [A-Za-z][A-Za-z0-9_]*.  '^' takes a bare nonnegative integer literal, so
// differentiation stays closed over the node set.
//
// Negative constants are normalised to Neg(Const) at construction; the
// grammar has no signed number literal, so this is what keeps
// parse(str(e)) structurally equal to e.

namespace conred {

enum class ExprKind : std::uint8_t {
  Constant,
  Variable,
  Neg,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Fun,
};

enum class FunId : std::uint8_t { Sin, Cos, Exp, Log, Sqrt };

inline const char* fun_name(FunId f) {
  switch (f) {
    case FunId::Sin: return "sin";
    case FunId::Cos: return "cos";
    case FunId::Exp: return "exp";
    case FunId::Log: return "log";
    case FunId::Sqrt: return "sqrt";
  }
  return "?";
}

/// Thrown when evaluation hits an unbound variable or a domain error
/// (division by zero, log/sqrt outside the domain, non-finite result).
struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown by the parser; carries the byte offset of the failure and the
/// token set that would have been accepted there.
struct ParseError : std::runtime_error {
  std::size_t offset;
  std::vector<std::string> expected;

  ParseError(std::string msg, std::size_t off, std::vector<std::string> exp)
      : std::runtime_error(std::move(msg)), offset(off), expected(std::move(exp)) {}
};

using EvalEnv = std::unordered_map<std::string, double>;

namespace detail {

struct ExprNode;
using NodePtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  ExprKind kind;
  double value = 0.0;     // Constant
  std::string name;       // Variable
  int exponent = 0;       // Pow
  FunId fun = FunId::Sin; // Fun
  NodePtr a;              // left / only child
  NodePtr b;              // right child
};

}  // namespace detail

class ScalarExpr {
 public:
  /// Default-constructs the zero constant.
  ScalarExpr() : node_(zero_node()) {}

  static ScalarExpr constant(double v) {
    if (!std::isfinite(v)) throw std::invalid_argument("ScalarExpr: non-finite constant");
    if (v == 0.0) return ScalarExpr(zero_node());  // folds -0.0 into +0.0
    if (v < 0.0) return neg_of(constant(-v));
    auto n = std::make_shared<detail::ExprNode>();
    n->kind = ExprKind::Constant;
    n->value = v;
    return ScalarExpr(std::move(n));
  }

  static ScalarExpr variable(std::string name) {
    if (!valid_identifier(name)) throw std::invalid_argument("ScalarExpr: bad identifier '" + name + "'");
    auto n = std::make_shared<detail::ExprNode>();
    n->kind = ExprKind::Variable;
    n->name = std::move(name);
    return ScalarExpr(std::move(n));
  }

  /// Integer power; the exponent must be >= 0 (negative powers are written
  /// with division so every expression survives serialisation).
  static ScalarExpr pow(const ScalarExpr& base, int exponent) {
    if (exponent < 0) throw std::invalid_argument("ScalarExpr::pow: negative exponent");
    auto n = std::make_shared<detail::ExprNode>();
    n->kind = ExprKind::Pow;
    n->exponent = exponent;
    n->a = base.node_;
    return ScalarExpr(std::move(n));
  }

  static ScalarExpr apply(FunId f, const ScalarExpr& arg) {
    auto n = std::make_shared<detail::ExprNode>();
    n->kind = ExprKind::Fun;
    n->fun = f;
    n->a = arg.node_;
    return ScalarExpr(std::move(n));
  }

  friend ScalarExpr operator+(const ScalarExpr& l, const ScalarExpr& r) { return binary(ExprKind::Add, l, r); }
  friend ScalarExpr operator-(const ScalarExpr& l, const ScalarExpr& r) { return binary(ExprKind::Sub, l, r); }
  friend ScalarExpr operator*(const ScalarExpr& l, const ScalarExpr& r) { return binary(ExprKind::Mul, l, r); }
  friend ScalarExpr operator/(const ScalarExpr& l, const ScalarExpr& r) { return binary(ExprKind::Div, l, r); }
  friend ScalarExpr operator-(const ScalarExpr& e) { return neg_of(e); }

  ExprKind kind() const { return node_->kind; }
  double constant_value() const { return node_->value; }
  const std::string& variable_name() const { return node_->name; }
  int exponent() const { return node_->exponent; }
  FunId fun_id() const { return node_->fun; }
  ScalarExpr lhs() const { return ScalarExpr(node_->a); }
  ScalarExpr rhs() const { return ScalarExpr(node_->b); }
  ScalarExpr child() const { return ScalarExpr(node_->a); }

  bool is_zero_literal() const { return node_->kind == ExprKind::Constant && node_->value == 0.0; }
  bool is_one_literal() const { return node_->kind == ExprKind::Constant && node_->value == 1.0; }

  /// The numeric value of a Const or Neg(Const) node, if this is one.
  std::optional<double> literal() const {
    if (node_->kind == ExprKind::Constant) return node_->value;
    if (node_->kind == ExprKind::Neg && node_->a->kind == ExprKind::Constant) return -node_->a->value;
    return std::nullopt;
  }

  double evaluate(const EvalEnv& env) const {
    const double v = eval_node(*node_, env);
    if (!std::isfinite(v)) throw EvalError("expression evaluated to a non-finite value");
    return v;
  }

  /// Partial derivative with respect to `var`; results are simplified and
  /// memoized per (node, variable) pair.  Thread-safe.
  ScalarExpr differentiate(const std::string& var) const;

  /// Constant folding and the identity eliminations x+0, x*1, x*0, 0/x,
  /// x^1, x^0 (plus their mirror images and negation folding).  No
  /// canonical forms beyond that.
  ScalarExpr simplified() const;

  ScalarExpr substitute(const std::unordered_map<std::string, ScalarExpr>& repl) const;

  std::string str() const {
    std::string out;
    print_node(*node_, out);
    return out;
  }

  bool same_structure(const ScalarExpr& other) const { return nodes_equal(*node_, *other.node_); }

  void variables_into(std::set<std::string>& out) const { collect_vars(*node_, out); }
  std::set<std::string> variables() const {
    std::set<std::string> out;
    variables_into(out);
    return out;
  }

  /// True when no Variable node outside `allowed` occurs.
  bool uses_only(const std::set<std::string>& allowed) const {
    for (const auto& v : variables())
      if (!allowed.count(v)) return false;
    return true;
  }

  const detail::ExprNode* raw() const { return node_.get(); }

 private:
  explicit ScalarExpr(detail::NodePtr n) : node_(std::move(n)) {}

  static ScalarExpr binary(ExprKind k, const ScalarExpr& l, const ScalarExpr& r) {
    auto n = std::make_shared<detail::ExprNode>();
    n->kind = k;
    n->a = l.node_;
    n->b = r.node_;
    return ScalarExpr(std::move(n));
  }

  static ScalarExpr neg_of(const ScalarExpr& e) {
    auto n = std::make_shared<detail::ExprNode>();
    n->kind = ExprKind::Neg;
    n->a = e.node_;
    return ScalarExpr(std::move(n));
  }

  static const detail::NodePtr& zero_node() {
    static const detail::NodePtr z = [] {
      auto n = std::make_shared<detail::ExprNode>();
      n->kind = ExprKind::Constant;
      n->value = 0.0;
      return detail::NodePtr(n);
    }();
    return z;
  }

  static bool valid_identifier(const std::string& s) {
    if (s.empty()) return false;
    auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); };
    auto alnum = [&](char c) { return alpha(c) || (c >= '0' && c <= '9') || c == '_'; };
    if (!alpha(s[0])) return false;
    for (std::size_t i = 1; i < s.size(); ++i)
      if (!alnum(s[i])) return false;
    return true;
  }

  static double eval_node(const detail::ExprNode& n, const EvalEnv& env) {
    switch (n.kind) {
      case ExprKind::Constant:
        return n.value;
      case ExprKind::Variable: {
        auto it = env.find(n.name);
        if (it == env.end()) throw EvalError("unbound variable '" + n.name + "'");
        return it->second;
      }
      case ExprKind::Neg:
        return -eval_node(*n.a, env);
      case ExprKind::Add:
        return eval_node(*n.a, env) + eval_node(*n.b, env);
      case ExprKind::Sub:
        return eval_node(*n.a, env) - eval_node(*n.b, env);
      case ExprKind::Mul:
        return eval_node(*n.a, env) * eval_node(*n.b, env);
      case ExprKind::Div: {
        const double num = eval_node(*n.a, env);
        const double den = eval_node(*n.b, env);
        if (den == 0.0) throw EvalError("division by zero");
        return num / den;
      }
      case ExprKind::Pow:
        return std::pow(eval_node(*n.a, env), n.exponent);
      case ExprKind::Fun: {
        const double x = eval_node(*n.a, env);
        switch (n.fun) {
          case FunId::Sin: return std::sin(x);
          case FunId::Cos: return std::cos(x);
          case FunId::Exp: return std::exp(x);
          case FunId::Log:
            if (x <= 0.0) throw EvalError("log of non-positive value");
            return std::log(x);
          case FunId::Sqrt:
            if (x < 0.0) throw EvalError("sqrt of negative value");
            return std::sqrt(x);
        }
        throw EvalError("unknown function");
      }
    }
    throw EvalError("malformed expression node");
  }

  static bool nodes_equal(const detail::ExprNode& x, const detail::ExprNode& y) {
    if (&x == &y) return true;
    if (x.kind != y.kind) return false;
    switch (x.kind) {
      case ExprKind::Constant: return x.value == y.value;
      case ExprKind::Variable: return x.name == y.name;
      case ExprKind::Pow: return x.exponent == y.exponent && nodes_equal(*x.a, *y.a);
      case ExprKind::Fun: return x.fun == y.fun && nodes_equal(*x.a, *y.a);
      case ExprKind::Neg: return nodes_equal(*x.a, *y.a);
      default: return nodes_equal(*x.a, *y.a) && nodes_equal(*x.b, *y.b);
    }
  }

  static void collect_vars(const detail::ExprNode& n, std::set<std::string>& out) {
    switch (n.kind) {
      case ExprKind::Variable: out.insert(n.name); return;
      case ExprKind::Constant: return;
      default:
        if (n.a) collect_vars(*n.a, out);
        if (n.b) collect_vars(*n.b, out);
    }
  }

  // Operator binding strength used for minimal parenthesisation.
  static int prec(const detail::ExprNode& n) {
    switch (n.kind) {
      case ExprKind::Add:
      case ExprKind::Sub: return 10;
      case ExprKind::Mul:
      case ExprKind::Div: return 20;
      case ExprKind::Neg: return 25;
      case ExprKind::Pow: return 30;
      default: return 40;
    }
  }

  static void print_double(double v, std::string& out) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
  }

  static void print_wrapped(const detail::ExprNode& n, bool parens, std::string& out) {
    if (parens) out.push_back('(');
    print_node(n, out);
    if (parens) out.push_back(')');
  }

  static void print_node(const detail::ExprNode& n, std::string& out) {
    switch (n.kind) {
      case ExprKind::Constant:
        print_double(n.value, out);
        return;
      case ExprKind::Variable:
        out += n.name;
        return;
      case ExprKind::Neg:
        out.push_back('-');
        print_wrapped(*n.a, prec(*n.a) < 30, out);
        return;
      case ExprKind::Add:
        print_node(*n.a, out);
        out.push_back('+');
        print_wrapped(*n.b, prec(*n.b) <= 10, out);
        return;
      case ExprKind::Sub:
        print_node(*n.a, out);
        out.push_back('-');
        print_wrapped(*n.b, prec(*n.b) <= 25, out);
        return;
      case ExprKind::Mul:
        print_wrapped(*n.a, prec(*n.a) < 20, out);
        out.push_back('*');
        print_wrapped(*n.b, prec(*n.b) <= 20 || n.b->kind == ExprKind::Neg, out);
        return;
      case ExprKind::Div:
        print_wrapped(*n.a, prec(*n.a) < 20, out);
        out.push_back('/');
        print_wrapped(*n.b, prec(*n.b) <= 20 || n.b->kind == ExprKind::Neg, out);
        return;
      case ExprKind::Pow: {
        print_wrapped(*n.a, prec(*n.a) <= 30, out);
        out.push_back('^');
        char buf[16];
        auto res = std::to_chars(buf, buf + sizeof(buf), n.exponent);
        out.append(buf, res.ptr);
        return;
      }
      case ExprKind::Fun:
        out += fun_name(n.fun);
        out.push_back('(');
        print_node(*n.a, out);
        out.push_back(')');
        return;
    }
  }

  detail::NodePtr node_;
};

namespace detail {

// Derivative memo; keys hold owning pointers so node addresses can never be
// recycled under a live cache entry.
class DerivativeCache {
 public:
  static DerivativeCache& instance() {
    static DerivativeCache c;
    return c;
  }

  std::optional<ScalarExpr> find(const ExprNode* node, const std::string& var) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = map_.find(key(node, var));
    if (it == map_.end()) return std::nullopt;
    return it->second.derivative;
  }

  void store(const ScalarExpr& self, const std::string& var, ScalarExpr deriv) {
    std::lock_guard<std::mutex> lock(mu_);
    map_.emplace(key(self.raw(), var), Entry{self, std::move(deriv)});
  }

 private:
  struct Entry {
    ScalarExpr keep_alive;
    ScalarExpr derivative;
  };

  static std::string key(const ExprNode* node, const std::string& var) {
    char buf[24];
    auto res = std::to_chars(buf, buf + sizeof(buf), reinterpret_cast<std::uintptr_t>(node), 16);
    return std::string(buf, res.ptr) + "|" + var;
  }

  std::mutex mu_;
  std::unordered_map<std::string, Entry> map_;
};

}  // namespace detail

inline ScalarExpr ScalarExpr::simplified() const {
  const detail::ExprNode& n = *node_;
  switch (n.kind) {
    case ExprKind::Constant:
    case ExprKind::Variable:
      return *this;
    case ExprKind::Neg: {
      ScalarExpr c = child().simplified();
      if (auto v = c.literal()) return constant(-*v);
      if (c.kind() == ExprKind::Neg) return c.child();
      return -c;
    }
    case ExprKind::Add: {
      ScalarExpr l = lhs().simplified(), r = rhs().simplified();
      auto lv = l.literal(), rv = r.literal();
      if (lv && rv) return constant(*lv + *rv);
      if (l.is_zero_literal()) return r;
      if (r.is_zero_literal()) return l;
      return l + r;
    }
    case ExprKind::Sub: {
      ScalarExpr l = lhs().simplified(), r = rhs().simplified();
      auto lv = l.literal(), rv = r.literal();
      if (lv && rv) return constant(*lv - *rv);
      if (r.is_zero_literal()) return l;
      if (l.is_zero_literal()) return (-r).simplified();
      return l - r;
    }
    case ExprKind::Mul: {
      ScalarExpr l = lhs().simplified(), r = rhs().simplified();
      auto lv = l.literal(), rv = r.literal();
      if (lv && rv) return constant(*lv * *rv);
      if (l.is_zero_literal() || r.is_zero_literal()) return constant(0.0);
      if (l.is_one_literal()) return r;
      if (r.is_one_literal()) return l;
      return l * r;
    }
    case ExprKind::Div: {
      ScalarExpr l = lhs().simplified(), r = rhs().simplified();
      auto lv = l.literal(), rv = r.literal();
      if (l.is_zero_literal()) return constant(0.0);
      if (lv && rv && *rv != 0.0) {
        const double q = *lv / *rv;
        if (std::isfinite(q)) return constant(q);
      }
      if (r.is_one_literal()) return l;
      return l / r;
    }
    case ExprKind::Pow: {
      ScalarExpr b = child().simplified();
      if (n.exponent == 0) return constant(1.0);
      if (n.exponent == 1) return b;
      if (auto v = b.literal()) {
        const double p = std::pow(*v, n.exponent);
        if (std::isfinite(p)) return constant(p);
      }
      return pow(b, n.exponent);
    }
    case ExprKind::Fun: {
      ScalarExpr a = child().simplified();
      if (auto v = a.literal()) {
        double folded = 0.0;
        bool ok = true;
        switch (n.fun) {
          case FunId::Sin: folded = std::sin(*v); break;
          case FunId::Cos: folded = std::cos(*v); break;
          case FunId::Exp: folded = std::exp(*v); break;
          case FunId::Log: ok = *v > 0.0; folded = ok ? std::log(*v) : 0.0; break;
          case FunId::Sqrt: ok = *v >= 0.0; folded = ok ? std::sqrt(*v) : 0.0; break;
        }
        if (ok && std::isfinite(folded)) return constant(folded);
      }
      return apply(n.fun, a);
    }
  }
  return *this;
}

inline ScalarExpr ScalarExpr::differentiate(const std::string& var) const {
  auto& cache = detail::DerivativeCache::instance();
  if (auto hit = cache.find(node_.get(), var)) return *hit;

  const detail::ExprNode& n = *node_;
  ScalarExpr d;
  switch (n.kind) {
    case ExprKind::Constant:
      d = constant(0.0);
      break;
    case ExprKind::Variable:
      d = constant(n.name == var ? 1.0 : 0.0);
      break;
    case ExprKind::Neg:
      d = -child().differentiate(var);
      break;
    case ExprKind::Add:
      d = lhs().differentiate(var) + rhs().differentiate(var);
      break;
    case ExprKind::Sub:
      d = lhs().differentiate(var) - rhs().differentiate(var);
      break;
    case ExprKind::Mul:
      d = lhs().differentiate(var) * rhs() + lhs() * rhs().differentiate(var);
      break;
    case ExprKind::Div:
      d = (lhs().differentiate(var) * rhs() - lhs() * rhs().differentiate(var)) / pow(rhs(), 2);
      break;
    case ExprKind::Pow: {
      if (n.exponent == 0) {
        d = constant(0.0);
      } else {
        ScalarExpr base = child();
        d = constant(n.exponent) * pow(base, n.exponent - 1) * base.differentiate(var);
      }
      break;
    }
    case ExprKind::Fun: {
      ScalarExpr u = child();
      ScalarExpr du = u.differentiate(var);
      switch (n.fun) {
        case FunId::Sin: d = apply(FunId::Cos, u) * du; break;
        case FunId::Cos: d = -(apply(FunId::Sin, u) * du); break;
        case FunId::Exp: d = apply(FunId::Exp, u) * du; break;
        case FunId::Log: d = du / u; break;
        case FunId::Sqrt: d = du / (constant(2.0) * apply(FunId::Sqrt, u)); break;
      }
      break;
    }
  }
  d = d.simplified();
  cache.store(*this, var, d);
  return d;
}

inline ScalarExpr ScalarExpr::substitute(const std::unordered_map<std::string, ScalarExpr>& repl) const {
  const detail::ExprNode& n = *node_;
  switch (n.kind) {
    case ExprKind::Constant:
      return *this;
    case ExprKind::Variable: {
      auto it = repl.find(n.name);
      return it == repl.end() ? *this : it->second;
    }
    case ExprKind::Neg:
      return -child().substitute(repl);
    case ExprKind::Add:
      return lhs().substitute(repl) + rhs().substitute(repl);
    case ExprKind::Sub:
      return lhs().substitute(repl) - rhs().substitute(repl);
    case ExprKind::Mul:
      return lhs().substitute(repl) * rhs().substitute(repl);
    case ExprKind::Div:
      return lhs().substitute(repl) / rhs().substitute(repl);
    case ExprKind::Pow:
      return pow(child().substitute(repl), n.exponent);
    case ExprKind::Fun:
      return apply(n.fun, child().substitute(repl));
  }
  return *this;
}

// ---------------------------------------------------------------------------
// Recursive-descent parser
// ---------------------------------------------------------------------------

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  ScalarExpr run() {
    ScalarExpr e = expr();
    skip_ws();
    if (pos_ != src_.size()) fail("trailing input", {"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"});
    return e;
  }

 private:
  ScalarExpr expr() {
    ScalarExpr e = term();
    for (;;) {
      skip_ws();
      if (consume('+')) {
        e = e + term();
      } else if (consume('-')) {
        e = e - term();
      } else {
        return e;
      }
    }
  }

  ScalarExpr term() {
    ScalarExpr e = factor();
    for (;;) {
      skip_ws();
      if (consume('*')) {
        e = e * factor();
      } else if (consume('/')) {
        e = e / factor();
      } else {
        return e;
      }
    }
  }

  ScalarExpr factor() {
    skip_ws();
    if (consume('-')) return -factor();
    ScalarExpr b = base();
    skip_ws();
    if (consume('^')) {
      skip_ws();
      return ScalarExpr::pow(b, integer());
    }
    return b;
  }

  ScalarExpr base() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input", base_expectations());
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      ScalarExpr e = expr();
      expect(')');
      return e;
    }
    if (is_digit(c)) return number();
    if (is_alpha(c)) {
      const std::size_t start = pos_;
      std::string id = identifier();
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == '(') {
        auto f = lookup_fun(id);
        if (!f) {
          throw ParseError("unknown function '" + id + "' at offset " + std::to_string(start), start,
                           {"sin", "cos", "exp", "log", "sqrt"});
        }
        ++pos_;
        ScalarExpr arg = expr();
        expect(')');
        return ScalarExpr::apply(*f, arg);
      }
      return ScalarExpr::variable(std::move(id));
    }
    fail("unexpected character", base_expectations());
    return ScalarExpr();  // unreachable
  }

  ScalarExpr number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t mark = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && is_digit(src_[pos_])) {
        while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
      } else {
        pos_ = mark;  // 'e' belongs to a following identifier, not this number
      }
    }
    double v = 0.0;
    auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != src_.data() + pos_)
      throw ParseError("malformed number at offset " + std::to_string(start), start, {"NUMBER"});
    return ScalarExpr::constant(v);
  }

  int integer() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
    int v = 0;
    auto res = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (pos_ == start || res.ec != std::errc())
      throw ParseError("expected integer exponent at offset " + std::to_string(start), start, {"INT"});
    return v;
  }

  std::string identifier() {
    const std::size_t start = pos_;
    ++pos_;
    while (pos_ < src_.size() && (is_alpha(src_[pos_]) || is_digit(src_[pos_]) || src_[pos_] == '_')) ++pos_;
    return std::string(src_.substr(start, pos_ - start));
  }

  static std::optional<FunId> lookup_fun(const std::string& id) {
    if (id == "sin") return FunId::Sin;
    if (id == "cos") return FunId::Cos;
    if (id == "exp") return FunId::Exp;
    if (id == "log") return FunId::Log;
    if (id == "sqrt") return FunId::Sqrt;
    return std::nullopt;
  }

  static std::vector<std::string> base_expectations() { return {"NUMBER", "IDENT", "'('", "'-'"}; }

  static bool is_digit(char c) { return c >= '0' && c <= '9'; }
  static bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

  void skip_ws() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) ++pos_;
  }

  bool consume(char c) {
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    skip_ws();
    if (!consume(c)) fail("missing token", {std::string("'") + c + "'"});
  }

  [[noreturn]] void fail(const std::string& what, std::vector<std::string> expected) {
    throw ParseError("syntax error at offset " + std::to_string(pos_) + ": " + what, pos_, std::move(expected));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline ScalarExpr parse_expression(std::string_view src) { return detail::Parser(src).run(); }

}  // namespace conred
