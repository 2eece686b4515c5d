#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ftle {

/// Polynomial test function of degree <= 3 in the exponents, stored as a sum of
/// monomials coeff * x_{i1} * ... * x_{ik}.
class Polynomial {
 public:
  struct Term {
    double coeff = 1.0;
    std::vector<int> vars;
  };

  Polynomial() = default;
  explicit Polynomial(std::string label) : label_(std::move(label)) {}

  /// Throws OutOfRange for degree > 3 or negative indices.
  Polynomial& add(double coeff, std::vector<int> vars);

  static Polynomial coordinate(int i);
  static Polynomial coordinate_power(int i, int power);
  /// sum_i x_i^power over n coordinates.
  static Polynomial power_sum(int n, int power);

  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  /// d^2 phi / dx_i^2 for every i.
  Eigen::VectorXd hessian_diagonal(const Eigen::VectorXd& x) const;

  int degree() const;
  const std::string& label() const { return label_; }
  const std::vector<Term>& terms() const { return terms_; }

 private:
  std::string label_;
  std::vector<Term> terms_;
};

}  // namespace ftle
