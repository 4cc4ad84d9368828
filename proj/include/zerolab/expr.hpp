#pragma once

// Complex expression language in one variable `z` with an integer parameter `j`.
//
//   expr     := term (('+'|'-') term)*
//   term     := unary (('*'|'/') unary)*
//   unary    := '-' unary | factor
//   factor   := atom ('^' exponent)?
//   exponent := '-'? integer | 'j' | '(' expr ')'
//   atom     := number | number 'i' | 'z' | 'j' | 'i' | 'exp' '(' expr ')' | '(' expr ')'
//
// Exponents must evaluate to integers and may not depend on z. Evaluation
// is available on plain complex numbers or on Jet1 (value + d/dz).

#include <charconv>
#include <cctype>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "zerolab/common.hpp"

namespace zerolab {

/// First-order jet: a value and its complex derivative d/dz.
struct Jet1 {
  cplx value{};
  cplx deriv{};

  constexpr Jet1() = default;
  constexpr Jet1(cplx v, cplx d = {}) : value(v), deriv(d) {}
  static Jet1 variable(cplx z) { return {z, 1.0}; }

  Jet1& operator+=(const Jet1& o) { value += o.value; deriv += o.deriv; return *this; }
  Jet1& operator-=(const Jet1& o) { value -= o.value; deriv -= o.deriv; return *this; }
  Jet1& operator*=(const Jet1& o) {
    deriv = deriv * o.value + value * o.deriv;
    value *= o.value;
    return *this;
  }
  Jet1& operator*=(cplx s) { value *= s; deriv *= s; return *this; }
};

inline Jet1 operator+(Jet1 a, const Jet1& b) { return a += b; }
inline Jet1 operator-(Jet1 a, const Jet1& b) { return a -= b; }
inline Jet1 operator-(const Jet1& a) { return {-a.value, -a.deriv}; }
inline Jet1 operator*(Jet1 a, const Jet1& b) { return a *= b; }
inline Jet1 operator*(Jet1 a, cplx s) { return a *= s; }
inline Jet1 operator*(cplx s, Jet1 a) { return a *= s; }
inline Jet1 operator/(const Jet1& a, const Jet1& b) {
  const cplx q = a.value / b.value;
  return {q, (a.deriv - q * b.deriv) / b.value};
}
inline Jet1 exp(const Jet1& a) {
  const cplx e = std::exp(a.value);
  return {e, e * a.deriv};
}

/// Integer power by repeated squaring. Negative exponents divide.
inline cplx ipow(cplx base, long long n) {
  if (n < 0) return cplx(1.0) / ipow(base, -n);
  cplx result = 1.0;
  while (n > 0) {
    if (n & 1) result *= base;
    base *= base;
    n >>= 1;
  }
  return result;
}

inline Jet1 ipow(const Jet1& base, long long n) {
  if (n == 0) return {1.0, 0.0};
  const cplx lower = ipow(base.value, n - 1);
  return {lower * base.value, static_cast<double>(n) * lower * base.deriv};
}

class NotPolynomial : public Error {
 public:
  explicit NotPolynomial(const std::string& why) : Error("not a polynomial: " + why, Kind::Usage) {}
};

namespace detail {

enum class Op : std::uint8_t { Real, Imag, Var, Param, Add, Sub, Mul, Div, Neg, Pow, Exp, Const };

struct Node {
  Op op;
  double lit = 0.0;
  int a = -1;
  int b = -1;
  double lit_im = 0.0;  // Const only
};

struct Program {
  std::vector<Node> nodes;
  int root = -1;
  std::string source;
  bool has_z = false;
  bool has_j = false;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  Program run() {
    Program p;
    prog_ = &p;
    p.source = std::string(s_);
    p.root = parse_expr(0);
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    for (const Node& n : p.nodes) {
      p.has_z |= n.op == Op::Var;
      p.has_j |= n.op == Op::Param;
    }
    return p;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
  Program* prog_ = nullptr;

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  int add(Node n) {
    prog_->nodes.push_back(n);
    return static_cast<int>(prog_->nodes.size()) - 1;
  }

  static int infix_power(char c) {
    switch (c) {
      case '+': case '-': return 10;
      case '*': case '/': return 20;
      default: return -1;
    }
  }

  int parse_expr(int min_bp) {
    int lhs = parse_unary();
    for (;;) {
      const char c = peek();
      const int bp = infix_power(c);
      if (bp < 0 || bp <= min_bp) break;
      ++pos_;
      const int rhs = parse_expr(bp);
      Op op = c == '+' ? Op::Add : c == '-' ? Op::Sub : c == '*' ? Op::Mul : Op::Div;
      lhs = add({op, 0.0, lhs, rhs});
    }
    return lhs;
  }

  int parse_unary() {
    if (peek() == '-') {
      ++pos_;
      return add({Op::Neg, 0.0, parse_unary(), -1});
    }
    return parse_factor();
  }

  int parse_factor() {
    const int base = parse_atom();
    if (peek() != '^') return base;
    ++pos_;
    const std::size_t at = pos_;
    const int ex = parse_exponent();
    if (depends_on_z(ex)) throw ParseError("exponent may not depend on z", at);
    const Node& en = prog_->nodes[ex];
    if (en.op == Op::Real && en.lit != std::floor(en.lit))
      throw ParseError("non-integer exponent", at);
    if (en.op == Op::Imag) throw ParseError("non-integer exponent", at);
    return add({Op::Pow, 0.0, base, ex});
  }

  int parse_exponent() {
    const char c = peek();
    if (c == '-') {
      ++pos_;
      return add({Op::Neg, 0.0, parse_exponent(), -1});
    }
    if (c == '(') {
      ++pos_;
      const int e = parse_expr(0);
      expect(')');
      return e;
    }
    if (c == 'j' && !ident_continues(pos_ + 1)) {
      ++pos_;
      return add({Op::Param});
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const std::size_t at = pos_;
      const int n = parse_number();
      if (prog_->nodes[n].op != Op::Real) throw ParseError("non-integer exponent", at);
      return n;
    }
    fail("expected integer exponent");
  }

  bool ident_continues(std::size_t p) const {
    return p < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[p])) || s_[p] == '_');
  }

  int parse_number() {
    const char* first = s_.data() + pos_;
    const char* last = s_.data() + s_.size();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc()) fail("malformed number");
    pos_ += static_cast<std::size_t>(ptr - first);
    if (pos_ < s_.size() && s_[pos_] == 'i' && !ident_continues(pos_ + 1)) {
      ++pos_;
      return add({Op::Imag, v});
    }
    return add({Op::Real, v});
  }

  int parse_atom() {
    const char c = peek();
    if (c == '\0') fail("unexpected end of input");
    if (c == '(') {
      ++pos_;
      const int e = parse_expr(0);
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (ident_continues(pos_)) ++pos_;
      const std::string_view id = s_.substr(start, pos_ - start);
      if (id == "z") return add({Op::Var});
      if (id == "j") return add({Op::Param});
      if (id == "i") return add({Op::Imag, 1.0});
      if (id == "exp") {
        expect('(');
        const int e = parse_expr(0);
        expect(')');
        return add({Op::Exp, 0.0, e, -1});
      }
      throw ParseError("unknown identifier '" + std::string(id) + "'", start);
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  bool depends_on_z(int idx) const {
    const Node& n = prog_->nodes[idx];
    if (n.op == Op::Var) return true;
    return (n.a >= 0 && depends_on_z(n.a)) || (n.b >= 0 && depends_on_z(n.b));
  }
};

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Immutable parsed expression. Cheap to copy (shared AST).
class ExprProgram {
 public:
  ExprProgram() : ExprProgram(parse_impl("0")) {}

  static ExprProgram parse(std::string_view text) { return parse_impl(text); }

  const std::string& source() const { return p_->source; }
  bool depends_on_z() const { return p_->has_z; }
  bool depends_on_j() const { return p_->has_j; }

  /// Value at z with the parameter bound to j.
  cplx eval(cplx z, long long j = 0) const { return eval_node<cplx>(p_->root, z, j); }

  /// Value and d/dz at z with the parameter bound to j.
  Jet1 eval_jet(cplx z, long long j = 0) const { return eval_node<Jet1>(p_->root, z, j); }

  /// Fully parenthesized canonical text; parses back to an identical tree.
  std::string print() const { return print_node(p_->root); }

  /// Copy with the parameter fixed to j and every z-free subtree folded to
  /// a constant. Evaluation agrees with eval(z, j) up to rounding.
  ExprProgram bind(long long j) const {
    detail::Program out;
    out.source = p_->source;
    out.has_z = p_->has_z;
    out.root = bind_node(p_->root, j, out);
    return ExprProgram(std::move(out));
  }

  bool structurally_equal(const ExprProgram& o) const {
    return equal_nodes(*p_, p_->root, *o.p_, o.p_->root);
  }

  /// Monomial coefficients c_0..c_D in z for fixed j. Throws NotPolynomial
  /// when z appears inside exp or in a denominator or a negative power.
  std::vector<cplx> polynomial(long long j = 0) const {
    auto c = poly_node(p_->root, j);
    while (c.size() > 1 && c.back() == cplx(0.0)) c.pop_back();
    return c;
  }

  bool is_polynomial() const {
    try {
      (void)polynomial(1);
      return true;
    } catch (const NotPolynomial&) {
      return false;
    } catch (const PoleError&) {
      return false;
    }
  }

 private:
  using Node = detail::Node;
  using Op = detail::Op;
  std::shared_ptr<const detail::Program> p_;

  explicit ExprProgram(detail::Program prog)
      : p_(std::make_shared<const detail::Program>(std::move(prog))) {}

  static ExprProgram parse_impl(std::string_view text) {
    return ExprProgram(detail::Parser(text).run());
  }

  bool node_has_z(int idx) const {
    const Node& n = p_->nodes[idx];
    if (n.op == Op::Var) return true;
    return (n.a >= 0 && node_has_z(n.a)) || (n.b >= 0 && node_has_z(n.b));
  }

  int bind_node(int idx, long long j, detail::Program& out) const {
    const Node& n = p_->nodes[idx];
    Node m = n;
    if (!node_has_z(idx)) {
      try {
        const cplx c = eval_node<cplx>(idx, 0.0, j);
        m = {Op::Const, c.real(), -1, -1, c.imag()};
      } catch (const Error&) {
        // Left unfolded so evaluation raises the same error.
        if (n.op == Op::Param) m = {Op::Real, static_cast<double>(j)};
      }
    }
    if (m.op != Op::Const) {
      if (n.a >= 0) m.a = bind_node(n.a, j, out);
      if (n.b >= 0) m.b = bind_node(n.b, j, out);
    }
    out.nodes.push_back(m);
    return static_cast<int>(out.nodes.size()) - 1;
  }

  long long integer_exponent(int idx, long long j) const {
    const cplx e = eval_node<cplx>(idx, 0.0, j);
    if (e.imag() != 0.0 || e.real() != std::round(e.real()))
      throw Error("exponent evaluated to a non-integer");
    return static_cast<long long>(e.real());
  }

  template <class T>
  static T lift(cplx c) {
    return T(c);
  }

  template <class T>
  T eval_node(int idx, cplx z, long long j) const {
    const Node& n = p_->nodes[idx];
    switch (n.op) {
      case Op::Real: return lift<T>(cplx(n.lit, 0.0));
      case Op::Imag: return lift<T>(cplx(0.0, n.lit));
      case Op::Const: return lift<T>(cplx(n.lit, n.lit_im));
      case Op::Var:
        if constexpr (std::is_same_v<T, Jet1>) return Jet1::variable(z);
        else return z;
      case Op::Param: return lift<T>(cplx(static_cast<double>(j), 0.0));
      case Op::Add: return eval_node<T>(n.a, z, j) + eval_node<T>(n.b, z, j);
      case Op::Sub: return eval_node<T>(n.a, z, j) - eval_node<T>(n.b, z, j);
      case Op::Mul: return eval_node<T>(n.a, z, j) * eval_node<T>(n.b, z, j);
      case Op::Div: {
        const T den = eval_node<T>(n.b, z, j);
        if (value_of(den) == cplx(0.0)) throw PoleError(z);
        return eval_node<T>(n.a, z, j) / den;
      }
      case Op::Neg: return -eval_node<T>(n.a, z, j);
      case Op::Pow: {
        const long long k = integer_exponent(n.b, j);
        const T base = eval_node<T>(n.a, z, j);
        if (k < 0 && value_of(base) == cplx(0.0)) throw PoleError(z);
        if constexpr (std::is_same_v<T, Jet1>) {
          if (k < 0) return Jet1(1.0) / ipow(base, -k);
        }
        return ipow(base, k);
      }
      case Op::Exp: {
        using std::exp;
        return exp(eval_node<T>(n.a, z, j));
      }
    }
    return T{};
  }

  static cplx value_of(const cplx& c) { return c; }
  static cplx value_of(const Jet1& c) { return c.value; }

  std::string print_node(int idx) const {
    const Node& n = p_->nodes[idx];
    switch (n.op) {
      case Op::Real: return detail::format_double(n.lit);
      case Op::Imag: return detail::format_double(n.lit) + "i";
      case Op::Const: return "(" + detail::format_double(n.lit) + " + " + detail::format_double(n.lit_im) + "i)";
      case Op::Var: return "z";
      case Op::Param: return "j";
      case Op::Add: return "(" + print_node(n.a) + " + " + print_node(n.b) + ")";
      case Op::Sub: return "(" + print_node(n.a) + " - " + print_node(n.b) + ")";
      case Op::Mul: return "(" + print_node(n.a) + " * " + print_node(n.b) + ")";
      case Op::Div: return "(" + print_node(n.a) + " / " + print_node(n.b) + ")";
      case Op::Neg: return "(-" + print_node(n.a) + ")";
      case Op::Pow: return "(" + print_node(n.a) + "^(" + print_node(n.b) + "))";
      case Op::Exp: return "exp(" + print_node(n.a) + ")";
    }
    return {};
  }

  static bool equal_nodes(const detail::Program& pa, int a, const detail::Program& pb, int b) {
    if ((a < 0) != (b < 0)) return false;
    if (a < 0) return true;
    const Node& x = pa.nodes[a];
    const Node& y = pb.nodes[b];
    if (x.op != y.op || x.lit != y.lit || x.lit_im != y.lit_im) return false;
    return equal_nodes(pa, x.a, pb, y.a) && equal_nodes(pa, x.b, pb, y.b);
  }

  static std::vector<cplx> poly_mul(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    std::vector<cplx> r(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t k = 0; k < b.size(); ++k) r[i + k] += a[i] * b[k];
    return r;
  }

  static std::vector<cplx> poly_add(std::vector<cplx> a, const std::vector<cplx>& b, double sign) {
    if (a.size() < b.size()) a.resize(b.size(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) a[i] += sign * b[i];
    return a;
  }

  static bool is_const(const std::vector<cplx>& p) {
    for (std::size_t i = 1; i < p.size(); ++i)
      if (p[i] != cplx(0.0)) return false;
    return true;
  }

  std::vector<cplx> poly_node(int idx, long long j) const {
    const Node& n = p_->nodes[idx];
    switch (n.op) {
      case Op::Real: return {cplx(n.lit, 0.0)};
      case Op::Imag: return {cplx(0.0, n.lit)};
      case Op::Const: return {cplx(n.lit, n.lit_im)};
      case Op::Var: return {0.0, 1.0};
      case Op::Param: return {cplx(static_cast<double>(j), 0.0)};
      case Op::Add: return poly_add(poly_node(n.a, j), poly_node(n.b, j), 1.0);
      case Op::Sub: return poly_add(poly_node(n.a, j), poly_node(n.b, j), -1.0);
      case Op::Mul: return poly_mul(poly_node(n.a, j), poly_node(n.b, j));
      case Op::Neg: return poly_add({0.0}, poly_node(n.a, j), -1.0);
      case Op::Div: {
        const auto den = poly_node(n.b, j);
        if (!is_const(den)) throw NotPolynomial("division by a non-constant");
        if (den[0] == cplx(0.0)) throw PoleError(0.0);
        auto num = poly_node(n.a, j);
        for (auto& c : num) c /= den[0];
        return num;
      }
      case Op::Pow: {
        const long long k = integer_exponent(n.b, j);
        const auto base = poly_node(n.a, j);
        if (k < 0) {
          if (!is_const(base)) throw NotPolynomial("negative power of a non-constant");
          return {ipow(base[0], k)};
        }
        std::vector<cplx> r{1.0};
        for (long long i = 0; i < k; ++i) r = poly_mul(r, base);
        return r;
      }
      case Op::Exp: {
        const auto arg = poly_node(n.a, j);
        if (!is_const(arg)) throw NotPolynomial("exp of a non-constant");
        return {std::exp(arg[0])};
      }
    }
    return {0.0};
  }
};

/// Free-function spellings used across the library.
inline ExprProgram parse(std::string_view text) { return ExprProgram::parse(text); }
inline Jet1 eval_jet(const ExprProgram& p, cplx z, long long j = 0) { return p.eval_jet(z, j); }

}  // namespace zerolab
