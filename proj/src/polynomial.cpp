#include "ftle/polynomial.hpp"

#include <algorithm>

#include "ftle/error.hpp"

namespace ftle {

Polynomial& Polynomial::add(double coeff, std::vector<int> vars) {
  if (vars.size() > 3) throw Error(ErrorCode::OutOfRange, "test functions are limited to degree 3");
  for (int v : vars) {
    if (v < 0) throw Error(ErrorCode::OutOfRange, "negative coordinate index");
  }
  terms_.push_back({coeff, std::move(vars)});
  return *this;
}

Polynomial Polynomial::coordinate(int i) {
  Polynomial p("x" + std::to_string(i + 1));
  p.add(1.0, {i});
  return p;
}

Polynomial Polynomial::coordinate_power(int i, int power) {
  Polynomial p("x" + std::to_string(i + 1) + "^" + std::to_string(power));
  p.add(1.0, std::vector<int>(static_cast<std::size_t>(power), i));
  return p;
}

Polynomial Polynomial::power_sum(int n, int power) {
  Polynomial p("sum x^" + std::to_string(power));
  for (int i = 0; i < n; ++i) p.add(1.0, std::vector<int>(static_cast<std::size_t>(power), i));
  return p;
}

int Polynomial::degree() const {
  std::size_t d = 0;
  for (const auto& t : terms_) d = std::max(d, t.vars.size());
  return static_cast<int>(d);
}

double Polynomial::value(const Eigen::VectorXd& x) const {
  double sum = 0.0;
  for (const auto& t : terms_) {
    double m = t.coeff;
    for (int v : t.vars) m *= x[v];
    sum += m;
  }
  return sum;
}

Eigen::VectorXd Polynomial::gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  for (const auto& t : terms_) {
    // Product rule: drop one factor at a time.
    for (std::size_t drop = 0; drop < t.vars.size(); ++drop) {
      double m = t.coeff;
      for (std::size_t k = 0; k < t.vars.size(); ++k) {
        if (k != drop) m *= x[t.vars[k]];
      }
      g[t.vars[drop]] += m;
    }
  }
  return g;
}

Eigen::VectorXd Polynomial::hessian_diagonal(const Eigen::VectorXd& x) const {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(x.size());
  for (const auto& t : terms_) {
    const std::size_t d = t.vars.size();
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = 0; q < d; ++q) {
        if (p == q || t.vars[p] != t.vars[q]) continue;
        double m = t.coeff;
        for (std::size_t k = 0; k < d; ++k) {
          if (k != p && k != q) m *= x[t.vars[k]];
        }
        h[t.vars[p]] += m;
      }
    }
  }
  return h;
}

}  // namespace ftle
