#pragma once

#include "preddev/models.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace preddev {

/// Arithmetic expression over named variables: numbers, identifiers,
/// + - * /, integer powers with ^, and parentheses.
class Expression {
 public:
  struct Node;

  static Expression parse(const std::string& text, const std::vector<std::string>& variables);

  double evaluate(const std::vector<double>& values) const;
  /// Value and gradient with respect to the first `gradient.size()` variables.
  double evaluate(const std::vector<double>& values, Vector& gradient) const;

  const std::string& text() const { return text_; }

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

/// A user model given as right-hand-side expressions. Variables visible to
/// the rhs: states, parameters, factors, and t. Initial values may use
/// parameters and factors.
struct InlineModelSpec {
  std::string name;
  std::vector<std::string> states;
  std::vector<std::string> parameters;
  std::vector<std::string> factors;
  std::map<std::string, std::string> rhs;      // per state
  std::map<std::string, std::string> initial;  // per state
  std::map<std::string, std::map<std::string, double>> observables;  // name -> state weights
};

/// Builds a ModelSystem whose jacobians come from forward-mode
/// differentiation of the expressions. Every state also becomes an observable.
ModelSystem inline_model(const InlineModelSpec& spec);

}  // namespace preddev
