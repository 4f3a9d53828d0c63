#pragma once

#include <memory>
#include <string>
#include <vector>

#include "issf/types.hpp"

namespace issf {

/// Arithmetic expression over variables x1..xn: + - * / ^, unary minus,
/// sin, cos, parentheses and decimal literals.
///
/// Parsing errors throw SpecError with the character offset in the message.
class Expression {
 public:
  struct Node;

  static Expression parse(const std::string& text, int num_vars);
  static Expression constant(double c);

  double operator()(const Vec& x) const;
  /// Symbolic partial derivative with respect to x_{var+1}. Throws
  /// std::invalid_argument for a power whose exponent depends on the state.
  Expression derivative(int var) const;

  std::string to_string() const;
  const std::string& source() const { return source_; }
  int num_vars() const { return num_vars_; }

 private:
  Expression(std::shared_ptr<const Node> root, int num_vars, std::string source);

  std::shared_ptr<const Node> root_;
  int num_vars_ = 0;
  std::string source_;
};

}  // namespace issf
