#include "ftle/log_svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ftle/error.hpp"

namespace ftle {

namespace {

constexpr int kMaxSweeps = 80;
constexpr double kOrthTol = 1e-15;

}  // namespace

LogSvd log_scaled_svd(const Eigen::MatrixXd& a, const Eigen::VectorXd& log_scale) {
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  Eigen::MatrixXd dir = a;
  Eigen::VectorXd s = log_scale;
  for (int j = 0; j < n; ++j) {
    const double len = dir.col(j).norm();
    if (!(len > 0.0) || !std::isfinite(len)) {
      throw Error(ErrorCode::StepTooLarge, "factored product lost rank");
    }
    dir.col(j) /= len;
    s[j] += std::log(len);
  }
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);

  int sweep = 0;
  for (; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (int i = 0; i < n - 1; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double rho = dir.col(i).dot(dir.col(j));
        if (std::abs(rho) <= kOrthTol) continue;
        rotated = true;
        // p is the longer column; r = |y_q| / |y_p| <= 1.
        const bool swap = s[j] > s[i];
        const int p = swap ? j : i;
        const int q = swap ? i : j;
        const double r = std::exp(s[q] - s[p]);
        const double zeta_r = (r * r - 1.0) / (2.0 * rho);
        const double sgn = zeta_r >= 0.0 ? 1.0 : -1.0;
        const double t_hat = sgn / (std::abs(zeta_r) + std::sqrt(r * r + zeta_r * zeta_r));
        const double c = 1.0 / std::sqrt(1.0 + t_hat * t_hat * r * r);
        const double sn = c * t_hat * r;

        Eigen::VectorXd new_p = dir.col(p) - (t_hat * r * r) * dir.col(q);
        Eigen::VectorXd new_q = t_hat * dir.col(p) + dir.col(q);
        const double len_p = c * new_p.norm();
        const double len_q = c * new_q.norm();
        dir.col(p) = new_p / new_p.norm();
        dir.col(q) = new_q / new_q.norm();
        s[p] += std::log(len_p);
        s[q] += std::log(len_q);

        for (int k = 0; k < n; ++k) {
          const double vp = v(k, p);
          const double vq = v(k, q);
          v(k, p) = c * vp - sn * vq;
          v(k, q) = sn * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return s[x] > s[y]; });
  LogSvd out;
  out.u.resize(m, n);
  out.v.resize(n, n);
  out.log_sv.resize(n);
  for (int k = 0; k < n; ++k) {
    out.u.col(k) = dir.col(order[k]);
    out.v.col(k) = v.col(order[k]);
    out.log_sv[k] = s[order[k]];
  }
  out.sweeps = sweep;
  return out;
}

}  // namespace ftle
