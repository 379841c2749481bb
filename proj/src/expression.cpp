#include "preddev/expression.hpp"
#include "preddev/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

namespace preddev {

struct Expression::Node {
  enum class Kind { Number, Variable, Negate, Add, Sub, Mul, Div, Pow } kind;
  double number = 0.0;
  int variable = -1;
  int exponent = 0;
  std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

NodePtr make(Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

class Parser {
 public:
  Parser(const std::string& s, const std::vector<std::string>& vars) : s_(s), vars_(vars) {}

  NodePtr parse() {
    NodePtr n = sum();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("expression '" + s_ + "': " + msg + " at position " + std::to_string(pos_));
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  NodePtr sum() {
    NodePtr n = product();
    for (;;) {
      if (eat('+')) {
        n = make(Kind::Add, n, product());
      } else if (eat('-')) {
        n = make(Kind::Sub, n, product());
      } else {
        return n;
      }
    }
  }
  NodePtr product() {
    NodePtr n = unary();
    for (;;) {
      if (eat('*')) {
        n = make(Kind::Mul, n, unary());
      } else if (eat('/')) {
        n = make(Kind::Div, n, unary());
      } else {
        return n;
      }
    }
  }
  NodePtr unary() {
    if (eat('-')) return make(Kind::Negate, unary());
    if (eat('+')) return unary();
    return power();
  }
  NodePtr power() {
    NodePtr base = atom();
    if (!eat('^')) return base;
    skip();
    bool negative = eat('-');
    skip();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (start == pos_) fail("exponent must be an integer literal");
    auto n = std::make_shared<Expression::Node>();
    n->kind = Kind::Pow;
    n->a = base;
    n->exponent = std::atoi(s_.substr(start, pos_ - start).c_str()) * (negative ? -1 : 1);
    return n;
  }
  NodePtr atom() {
    skip();
    if (eat('(')) {
      NodePtr n = sum();
      if (!eat(')')) fail("missing ')'");
      return n;
    }
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      pos_ += static_cast<std::size_t>(end - begin);
      auto n = std::make_shared<Expression::Node>();
      n->kind = Kind::Number;
      n->number = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      for (std::size_t i = 0; i < vars_.size(); ++i) {
        if (vars_[i] == name) {
          auto n = std::make_shared<Expression::Node>();
          n->kind = Kind::Variable;
          n->variable = static_cast<int>(i);
          return n;
        }
      }
      fail("unknown name '" + name + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  const std::string& s_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
};

struct Dual {
  double v;
  Vector d;
};

Dual eval_dual(const Expression::Node& n, const std::vector<double>& x, Eigen::Index dim) {
  switch (n.kind) {
    case Kind::Number: return {n.number, Vector::Zero(dim)};
    case Kind::Variable: {
      Dual r{x[static_cast<std::size_t>(n.variable)], Vector::Zero(dim)};
      if (n.variable < dim) r.d[n.variable] = 1.0;
      return r;
    }
    case Kind::Negate: {
      Dual a = eval_dual(*n.a, x, dim);
      return {-a.v, -a.d};
    }
    case Kind::Pow: {
      Dual a = eval_dual(*n.a, x, dim);
      const double v = std::pow(a.v, n.exponent);
      return {v, (n.exponent * std::pow(a.v, n.exponent - 1)) * a.d};
    }
    default: break;
  }
  Dual a = eval_dual(*n.a, x, dim);
  Dual b = eval_dual(*n.b, x, dim);
  switch (n.kind) {
    case Kind::Add: return {a.v + b.v, a.d + b.d};
    case Kind::Sub: return {a.v - b.v, a.d - b.d};
    case Kind::Mul: return {a.v * b.v, b.v * a.d + a.v * b.d};
    case Kind::Div: return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
    default: return {0.0, Vector::Zero(dim)};
  }
}

double eval_plain(const Expression::Node& n, const std::vector<double>& x) {
  switch (n.kind) {
    case Kind::Number: return n.number;
    case Kind::Variable: return x[static_cast<std::size_t>(n.variable)];
    case Kind::Negate: return -eval_plain(*n.a, x);
    case Kind::Pow: return std::pow(eval_plain(*n.a, x), n.exponent);
    case Kind::Add: return eval_plain(*n.a, x) + eval_plain(*n.b, x);
    case Kind::Sub: return eval_plain(*n.a, x) - eval_plain(*n.b, x);
    case Kind::Mul: return eval_plain(*n.a, x) * eval_plain(*n.b, x);
    case Kind::Div: return eval_plain(*n.a, x) / eval_plain(*n.b, x);
  }
  return 0.0;
}

}  // namespace

Expression Expression::parse(const std::string& text, const std::vector<std::string>& variables) {
  Expression e;
  e.text_ = text;
  e.root_ = Parser(text, variables).parse();
  return e;
}

double Expression::evaluate(const std::vector<double>& values) const { return eval_plain(*root_, values); }

double Expression::evaluate(const std::vector<double>& values, Vector& gradient) const {
  Dual r = eval_dual(*root_, values, gradient.size());
  gradient = r.d;
  return r.v;
}

ModelSystem inline_model(const InlineModelSpec& spec) {
  if (spec.states.empty()) throw ConfigError("inline model '" + spec.name + "' has no states");
  ModelSystem m;
  m.name = spec.name;
  m.state_names = spec.states;
  m.param_names = spec.parameters;
  m.factor_names = spec.factors;
  const auto n = static_cast<Eigen::Index>(spec.states.size());
  const auto p = static_cast<Eigen::Index>(spec.parameters.size());
  const auto q = static_cast<Eigen::Index>(spec.factors.size());

  std::vector<std::string> rhs_vars = spec.states;
  rhs_vars.insert(rhs_vars.end(), spec.parameters.begin(), spec.parameters.end());
  rhs_vars.insert(rhs_vars.end(), spec.factors.begin(), spec.factors.end());
  rhs_vars.push_back("t");
  std::vector<std::string> init_vars = spec.parameters;
  init_vars.insert(init_vars.end(), spec.factors.begin(), spec.factors.end());

  std::vector<Expression> rhs, init;
  for (const auto& s : spec.states) {
    auto r = spec.rhs.find(s);
    if (r == spec.rhs.end()) throw ConfigError("inline model '" + spec.name + "' has no rhs for state " + s);
    rhs.push_back(Expression::parse(r->second, rhs_vars));
    auto i = spec.initial.find(s);
    if (i == spec.initial.end()) throw ConfigError("inline model '" + spec.name + "' has no initial value for " + s);
    init.push_back(Expression::parse(i->second, init_vars));
  }
  if (spec.rhs.size() != spec.states.size()) throw ConfigError("inline model rhs names an unknown state");

  auto pack = [n, p, q](const Vector& x, double t, const Vector& th, const Vector& nu) {
    std::vector<double> v(static_cast<std::size_t>(n + p + q + 1));
    for (Eigen::Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = x[i];
    for (Eigen::Index i = 0; i < p; ++i) v[static_cast<std::size_t>(n + i)] = th[i];
    for (Eigen::Index i = 0; i < q; ++i) v[static_cast<std::size_t>(n + p + i)] = nu[i];
    v.back() = t;
    return v;
  };
  m.rhs = [rhs, pack, n](const Vector& x, double t, const Vector& th, const Vector& nu, Vector& dx) {
    const auto v = pack(x, t, th, nu);
    dx.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) dx[i] = rhs[static_cast<std::size_t>(i)].evaluate(v);
  };
  m.jacobians = [rhs, pack, n, p](const Vector& x, double t, const Vector& th, const Vector& nu, Matrix& fx,
                                  Matrix& fth) {
    const auto v = pack(x, t, th, nu);
    Vector g(n + p);
    for (Eigen::Index i = 0; i < n; ++i) {
      rhs[static_cast<std::size_t>(i)].evaluate(v, g);
      fx.row(i) = g.head(n).transpose();
      fth.row(i) = g.tail(p).transpose();
    }
  };
  auto pack_init = [p, q](const Vector& th, const Vector& nu) {
    std::vector<double> v(static_cast<std::size_t>(p + q));
    for (Eigen::Index i = 0; i < p; ++i) v[static_cast<std::size_t>(i)] = th[i];
    for (Eigen::Index i = 0; i < q; ++i) v[static_cast<std::size_t>(p + i)] = nu[i];
    return v;
  };
  m.initial_state = [init, pack_init, n](const Vector& th, const Vector& nu) {
    const auto v = pack_init(th, nu);
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = init[static_cast<std::size_t>(i)].evaluate(v);
    return x;
  };
  m.initial_sensitivity = [init, pack_init, n, p](const Vector& th, const Vector& nu) {
    const auto v = pack_init(th, nu);
    Matrix s(n, p);
    Vector g(p);
    for (Eigen::Index i = 0; i < n; ++i) {
      init[static_cast<std::size_t>(i)].evaluate(v, g);
      s.row(i) = g.transpose();
    }
    return s;
  };
  for (Eigen::Index i = 0; i < n; ++i) m.observables.push_back({spec.states[static_cast<std::size_t>(i)], Vector::Unit(n, i)});
  for (const auto& [name, weights] : spec.observables) {
    Vector w = Vector::Zero(n);
    for (const auto& [state, c] : weights) {
      const auto it = std::find(spec.states.begin(), spec.states.end(), state);
      if (it == spec.states.end()) throw ConfigError("observable " + name + " uses unknown state " + state);
      w[it - spec.states.begin()] = c;
    }
    m.observables.push_back({name, w});
  }
  return m;
}

}  // namespace preddev
