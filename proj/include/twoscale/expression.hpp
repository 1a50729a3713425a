#pragma once

// Arithmetic expression trees for coefficient fields.
//
// Grammar:
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' unary)?          (right associative)
//   primary := number | 'pi' | variable | func '(' args ')' | '(' expr ')'
//   func    := sin | cos | exp | abs | min | max
//
// Variables are supplied by the caller (by default y1, y2, t).

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <initializer_list>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace twoscale {

class ExpressionError : public std::runtime_error {
 public:
  ExpressionError(const std::string& msg, std::size_t offset)
      : std::runtime_error(msg + " at offset " + std::to_string(offset)), offset_(offset) {}
  explicit ExpressionError(const std::string& msg) : std::runtime_error(msg), offset_(npos) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  /// Character offset of a syntax error (npos for evaluation errors).
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class Expression {
 public:
  enum class Op : unsigned char { constant, pi, variable, neg, add, sub, mul, div, pow, sin, cos, exp, abs, min, max };

  struct Node {
    Op op = Op::constant;
    double value = 0.0;
    int var = -1;
    int lhs = -1;
    int rhs = -1;
  };

  Expression() : variables_{"y1", "y2", "t"}, nodes_{Node{}}, source_("0") {}

  static Expression parse(std::string_view text,
                          std::vector<std::string> variables = {"y1", "y2", "t"}) {
    Expression e;
    e.variables_ = std::move(variables);
    e.nodes_.clear();
    Parser p{text, e.variables_};
    p.out = &e.nodes_;
    p.skip();
    e.root_ = p.expr();
    p.skip();
    if (p.pos != text.size()) p.fail("unexpected character '" + std::string(1, text[p.pos]) + "'");
    e.source_ = std::string(text);
    return e;
  }

  static Expression constant(double v, std::vector<std::string> variables = {"y1", "y2", "t"}) {
    Expression e;
    e.variables_ = std::move(variables);
    e.nodes_ = {Node{Op::constant, v, -1, -1, -1}};
    e.root_ = 0;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    e.source_ = buf;
    return e;
  }

  const std::vector<std::string>& variables() const { return variables_; }
  const std::string& source() const { return source_; }
  const std::vector<Node>& nodes() const { return nodes_; }

  double evaluate(std::span<const double> vars) const { return eval(root_, vars); }
  double operator()(std::initializer_list<double> vars) const {
    return eval(root_, std::span<const double>(vars.begin(), vars.size()));
  }

  bool depends_on(int var) const {
    for (const auto& n : nodes_)
      if (n.op == Op::variable && n.var == var) return true;
    return false;
  }
  bool depends_on(std::string_view name) const {
    for (std::size_t i = 0; i < variables_.size(); ++i)
      if (variables_[i] == name) return depends_on(static_cast<int>(i));
    return false;
  }
  bool is_constant() const {
    for (const auto& n : nodes_)
      if (n.op == Op::variable) return false;
    return true;
  }

  /// Fully parenthesized text that parses back to an identical tree.
  std::string print() const { return print(root_); }

  /// Structural equality of trees (ignores source text).
  bool same_tree(const Expression& o) const { return same(root_, o, o.root_); }

 private:
  struct Parser {
    std::string_view text;
    const std::vector<std::string>& vars;
    std::size_t pos = 0;
    std::vector<Node>* out = nullptr;

    [[noreturn]] void fail(const std::string& msg) const { throw ExpressionError(msg, pos); }

    void skip() {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    bool accept(char c) {
      skip();
      if (pos < text.size() && text[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    void expect(char c) {
      if (!accept(c)) fail(std::string("expected '") + c + "'");
    }
    int push(Node n) {
      out->push_back(n);
      return static_cast<int>(out->size()) - 1;
    }

    int expr() {
      int lhs = term();
      for (;;) {
        if (accept('+'))
          lhs = push({Op::add, 0.0, -1, lhs, term()});
        else if (accept('-'))
          lhs = push({Op::sub, 0.0, -1, lhs, term()});
        else
          return lhs;
      }
    }
    int term() {
      int lhs = unary();
      for (;;) {
        if (accept('*'))
          lhs = push({Op::mul, 0.0, -1, lhs, unary()});
        else if (accept('/'))
          lhs = push({Op::div, 0.0, -1, lhs, unary()});
        else
          return lhs;
      }
    }
    int unary() {
      if (accept('-')) return push({Op::neg, 0.0, -1, unary(), -1});
      if (accept('+')) return unary();
      return power();
    }
    int power() {
      int base = primary();
      if (accept('^')) return push({Op::pow, 0.0, -1, base, unary()});
      return base;
    }
    int primary() {
      skip();
      if (pos >= text.size()) fail("unexpected end of expression");
      const char c = text[pos];
      if (c == '(') {
        ++pos;
        int e = expr();
        expect(')');
        return e;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
      fail(std::string("unexpected character '") + c + "'");
    }
    int number() {
      const std::string buf(text.substr(pos));
      char* end = nullptr;
      const double v = std::strtod(buf.c_str(), &end);
      if (end == buf.c_str()) fail("malformed number");
      pos += static_cast<std::size_t>(end - buf.c_str());
      return push({Op::constant, v, -1, -1, -1});
    }
    int identifier() {
      const std::size_t start = pos;
      while (pos < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
        ++pos;
      const std::string_view name = text.substr(start, pos - start);
      for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i] == name) return push({Op::variable, 0.0, static_cast<int>(i), -1, -1});
      if (name == "pi") return push({Op::pi, 0.0, -1, -1, -1});
      struct Fn {
        std::string_view name;
        Op op;
        int arity;
      };
      static constexpr Fn fns[] = {{"sin", Op::sin, 1}, {"cos", Op::cos, 1}, {"exp", Op::exp, 1},
                                   {"abs", Op::abs, 1}, {"min", Op::min, 2}, {"max", Op::max, 2}};
      for (const auto& f : fns) {
        if (f.name != name) continue;
        expect('(');
        const int a = expr();
        int b = -1;
        if (f.arity == 2) {
          expect(',');
          b = expr();
        }
        expect(')');
        return push({f.op, 0.0, -1, a, b});
      }
      pos = start;
      fail("unknown identifier '" + std::string(name) + "'");
    }
  };

  double eval(int i, std::span<const double> v) const {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    switch (n.op) {
      case Op::constant: return n.value;
      case Op::pi: return std::numbers::pi;
      case Op::variable:
        if (static_cast<std::size_t>(n.var) >= v.size())
          throw ExpressionError("missing value for variable '" + variables_[static_cast<std::size_t>(n.var)] + "'");
        return v[static_cast<std::size_t>(n.var)];
      case Op::neg: return -eval(n.lhs, v);
      case Op::add: return eval(n.lhs, v) + eval(n.rhs, v);
      case Op::sub: return eval(n.lhs, v) - eval(n.rhs, v);
      case Op::mul: return eval(n.lhs, v) * eval(n.rhs, v);
      case Op::div: {
        const double d = eval(n.rhs, v);
        if (d == 0.0) throw ExpressionError("division by zero");
        return eval(n.lhs, v) / d;
      }
      case Op::pow: return std::pow(eval(n.lhs, v), eval(n.rhs, v));
      case Op::sin: return std::sin(eval(n.lhs, v));
      case Op::cos: return std::cos(eval(n.lhs, v));
      case Op::exp: return std::exp(eval(n.lhs, v));
      case Op::abs: return std::abs(eval(n.lhs, v));
      case Op::min: return std::min(eval(n.lhs, v), eval(n.rhs, v));
      case Op::max: return std::max(eval(n.lhs, v), eval(n.rhs, v));
    }
    return 0.0;
  }

  std::string print(int i) const {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    auto bin = [&](const char* op) { return "(" + print(n.lhs) + " " + op + " " + print(n.rhs) + ")"; };
    auto call = [&](const char* f) {
      std::string s = std::string(f) + "(" + print(n.lhs);
      if (n.rhs >= 0) s += ", " + print(n.rhs);
      return s + ")";
    };
    switch (n.op) {
      case Op::constant: {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", n.value);
        std::string s = buf;
        // Negative literals come only from constant(); keep them unary.
        return s.front() == '-' ? "(" + s + ")" : s;
      }
      case Op::pi: return "pi";
      case Op::variable: return variables_[static_cast<std::size_t>(n.var)];
      case Op::neg: return "(-" + print(n.lhs) + ")";
      case Op::add: return bin("+");
      case Op::sub: return bin("-");
      case Op::mul: return bin("*");
      case Op::div: return bin("/");
      case Op::pow: return bin("^");
      case Op::sin: return call("sin");
      case Op::cos: return call("cos");
      case Op::exp: return call("exp");
      case Op::abs: return call("abs");
      case Op::min: return call("min");
      case Op::max: return call("max");
    }
    return {};
  }

  bool same(int i, const Expression& o, int j) const {
    if ((i < 0) != (j < 0)) return false;
    if (i < 0) return true;
    const Node& a = nodes_[static_cast<std::size_t>(i)];
    const Node& b = o.nodes_[static_cast<std::size_t>(j)];
    if (a.op != b.op) return false;
    if (a.op == Op::constant) return a.value == b.value;
    if (a.op == Op::variable) return variables_[static_cast<std::size_t>(a.var)] == o.variables_[static_cast<std::size_t>(b.var)];
    return same(a.lhs, o, b.lhs) && same(a.rhs, o, b.rhs);
  }

  std::vector<std::string> variables_;
  std::vector<Node> nodes_;
  int root_ = 0;
  std::string source_;
};

inline Expression parse_expression(std::string_view text) { return Expression::parse(text); }

}  // namespace twoscale
