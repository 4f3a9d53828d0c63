#include "issf/expression.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "issf/errors.hpp"

namespace issf {

struct Expression::Node {
  enum class Op { num, var, add, sub, mul, div, pow, neg, sin, cos };
  Op op;
  double value = 0.0;
  int var = 0;
  std::shared_ptr<const Node> a, b;
};

namespace {

using Op = Expression::Node::Op;
using NodePtr = std::shared_ptr<const Expression::Node>;

NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

NodePtr num(double v) {
  auto n = std::make_shared<Expression::Node>();
  n->op = Op::num;
  n->value = v;
  return n;
}

NodePtr var(int i) {
  auto n = std::make_shared<Expression::Node>();
  n->op = Op::var;
  n->var = i;
  return n;
}

bool is_num(const NodePtr& n, double v) { return n->op == Op::num && n->value == v; }

// Constructors that fold the trivial cases so derivatives stay small.
NodePtr add(NodePtr a, NodePtr b) {
  if (is_num(a, 0.0)) return b;
  if (is_num(b, 0.0)) return a;
  if (a->op == Op::num && b->op == Op::num) return num(a->value + b->value);
  return make(Op::add, std::move(a), std::move(b));
}

NodePtr sub(NodePtr a, NodePtr b) {
  if (is_num(b, 0.0)) return a;
  if (is_num(a, 0.0)) return make(Op::neg, std::move(b));
  if (a->op == Op::num && b->op == Op::num) return num(a->value - b->value);
  return make(Op::sub, std::move(a), std::move(b));
}

NodePtr mul(NodePtr a, NodePtr b) {
  if (is_num(a, 0.0) || is_num(b, 0.0)) return num(0.0);
  if (is_num(a, 1.0)) return b;
  if (is_num(b, 1.0)) return a;
  if (a->op == Op::num && b->op == Op::num) return num(a->value * b->value);
  return make(Op::mul, std::move(a), std::move(b));
}

NodePtr div(NodePtr a, NodePtr b) {
  if (is_num(a, 0.0)) return num(0.0);
  if (is_num(b, 1.0)) return a;
  return make(Op::div, std::move(a), std::move(b));
}

bool depends_on_state(const NodePtr& n) {
  if (!n) return false;
  if (n->op == Op::var) return true;
  return depends_on_state(n->a) || depends_on_state(n->b);
}

double evaluate(const Expression::Node& n, const Vec& x) {
  switch (n.op) {
    case Op::num:
      return n.value;
    case Op::var:
      return x(n.var);
    case Op::add:
      return evaluate(*n.a, x) + evaluate(*n.b, x);
    case Op::sub:
      return evaluate(*n.a, x) - evaluate(*n.b, x);
    case Op::mul:
      return evaluate(*n.a, x) * evaluate(*n.b, x);
    case Op::div:
      return evaluate(*n.a, x) / evaluate(*n.b, x);
    case Op::pow: {
      const double base = evaluate(*n.a, x);
      if (n.b->op == Op::num && n.b->value == 2.0) return base * base;
      return std::pow(base, evaluate(*n.b, x));
    }
    case Op::neg:
      return -evaluate(*n.a, x);
    case Op::sin:
      return std::sin(evaluate(*n.a, x));
    case Op::cos:
      return std::cos(evaluate(*n.a, x));
  }
  return 0.0;
}

NodePtr differentiate(const NodePtr& n, int v) {
  switch (n->op) {
    case Op::num:
      return num(0.0);
    case Op::var:
      return num(n->var == v ? 1.0 : 0.0);
    case Op::add:
      return add(differentiate(n->a, v), differentiate(n->b, v));
    case Op::sub:
      return sub(differentiate(n->a, v), differentiate(n->b, v));
    case Op::mul:
      return add(mul(differentiate(n->a, v), n->b), mul(n->a, differentiate(n->b, v)));
    case Op::div:
      return div(sub(mul(differentiate(n->a, v), n->b), mul(n->a, differentiate(n->b, v))),
                 mul(n->b, n->b));
    case Op::pow: {
      if (depends_on_state(n->b)) {
        throw std::invalid_argument("derivative of a state-dependent exponent is not supported");
      }
      // d(u^c) = c * u^(c-1) * u'; the exponent is a constant subtree.
      const NodePtr lowered =
          n->b->op == Op::num ? num(n->b->value - 1.0) : sub(n->b, num(1.0));
      NodePtr power = is_num(lowered, 1.0) ? n->a : make(Op::pow, n->a, lowered);
      if (is_num(lowered, 0.0)) power = num(1.0);
      return mul(mul(n->b, power), differentiate(n->a, v));
    }
    case Op::neg: {
      auto d = differentiate(n->a, v);
      if (is_num(d, 0.0)) return d;
      return make(Op::neg, std::move(d));
    }
    case Op::sin:
      return mul(make(Op::cos, n->a), differentiate(n->a, v));
    case Op::cos:
      return mul(make(Op::neg, make(Op::sin, n->a)), differentiate(n->a, v));
  }
  return num(0.0);
}

std::string render(const Expression::Node& n) {
  switch (n.op) {
    case Op::num:
      return fmt::format("{}", n.value);
    case Op::var:
      return fmt::format("x{}", n.var + 1);
    case Op::add:
      return fmt::format("({} + {})", render(*n.a), render(*n.b));
    case Op::sub:
      return fmt::format("({} - {})", render(*n.a), render(*n.b));
    case Op::mul:
      return fmt::format("({} * {})", render(*n.a), render(*n.b));
    case Op::div:
      return fmt::format("({} / {})", render(*n.a), render(*n.b));
    case Op::pow:
      return fmt::format("({} ^ {})", render(*n.a), render(*n.b));
    case Op::neg:
      return fmt::format("(-{})", render(*n.a));
    case Op::sin:
      return fmt::format("sin({})", render(*n.a));
    case Op::cos:
      return fmt::format("cos({})", render(*n.a));
  }
  return "?";
}

// Grammar:
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := '-' unary | power
//   power  := atom ('^' unary)?
//   atom   := number | 'x' digits | ('sin' | 'cos') '(' expr ')' | '(' expr ')'
class Parser {
 public:
  Parser(const std::string& text, int num_vars) : s_(text), n_(num_vars) {}

  NodePtr parse() {
    auto e = expr();
    skip();
    if (pos_ != s_.size()) fail(fmt::format("unexpected '{}'", s_[pos_]));
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw SpecError("", fmt::format("expression \"{}\" at offset {}: {}", s_, pos_, what));
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(fmt::format("expected '{}'", c));
  }

  NodePtr expr() {
    auto lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = make(Op::add, lhs, term());
      } else if (accept('-')) {
        lhs = make(Op::sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    auto lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = make(Op::mul, lhs, unary());
      } else if (accept('/')) {
        lhs = make(Op::div, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Op::neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    auto base = atom();
    if (accept('^')) return make(Op::pow, base, unary());
    return base;
  }

  NodePtr atom() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    const char c = s_[pos_];
    if (accept('(')) {
      auto e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return word();
    fail(fmt::format("unexpected '{}'", c));
  }

  NodePtr number() {
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - begin);
    return num(v);
  }

  NodePtr word() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    const std::string w = s_.substr(start, pos_ - start);
    if (w == "sin" || w == "cos") {
      expect('(');
      auto arg = expr();
      expect(')');
      return make(w == "sin" ? Op::sin : Op::cos, arg);
    }
    if (w.size() >= 2 && w[0] == 'x' &&
        w.find_first_not_of("0123456789", 1) == std::string::npos) {
      const int idx = std::stoi(w.substr(1));
      if (idx < 1 || idx > n_) {
        pos_ = start;
        fail(fmt::format("variable {} outside x1..x{}", w, n_));
      }
      return var(idx - 1);
    }
    pos_ = start;
    fail(fmt::format("unknown identifier '{}'", w));
  }

  const std::string& s_;
  int n_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression(std::shared_ptr<const Node> root, int num_vars, std::string source)
    : root_(std::move(root)), num_vars_(num_vars), source_(std::move(source)) {}

Expression Expression::parse(const std::string& text, int num_vars) {
  Parser p(text, num_vars);
  return Expression(p.parse(), num_vars, text);
}

Expression Expression::constant(double c) {
  return Expression(num(c), 0, fmt::format("{}", c));
}

double Expression::operator()(const Vec& x) const {
  if (x.size() < num_vars_) {
    throw std::invalid_argument(
        fmt::format("expression needs {} variables, got {}", num_vars_, x.size()));
  }
  return evaluate(*root_, x);
}

Expression Expression::derivative(int v) const {
  auto d = differentiate(root_, v);
  return Expression(d, num_vars_, render(*d));
}

std::string Expression::to_string() const { return render(*root_); }

}  // namespace issf
