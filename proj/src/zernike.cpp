#include "satqkd/zernike.hpp"

#include <numbers>

#include "satqkd/errors.hpp"

namespace satqkd {

double kolmogorov_order_variance(int n) {
  if (n < 1) throw DomainError("Kolmogorov variance needs radial order >= 1");
  const double pi = std::numbers::pi;
  const double k = std::tgamma(14.0 / 3.0) * std::pow(24.0 / 5.0 * std::tgamma(6.0 / 5.0), 5.0 / 6.0) *
                   std::pow(std::tgamma(11.0 / 6.0), 2) / (2.0 * pi * pi);
  const double log_ratio =
      std::lgamma(n - 5.0 / 6.0) - 2.0 * std::lgamma(17.0 / 6.0) - std::lgamma(n + 23.0 / 6.0);
  return k * (n + 1) * std::exp(log_ratio);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre(int n) {
  if (n < 1) throw DomainError("Gauss-Legendre needs at least one node");
  Eigen::VectorXd x(n), w(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    double p0 = 1.0, p1 = z;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (z * p1 - p0) / (z * z - 1.0);
    x(i) = -z;
    x(n - 1 - i) = z;
    w(i) = w(n - 1 - i) = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

}  // namespace satqkd
