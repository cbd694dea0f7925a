#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>
#include <utility>
#include <vector>

namespace satqkd {

struct NollMode {
  int noll = 1;  // Noll index j (1 = piston)
  int n = 0;     // radial order
  int m = 0;     // signed azimuthal order: > 0 cosine, < 0 sine
};

/// Noll index -> (n, m). Even j carry cos(mθ), odd j carry sin(mθ).
inline NollMode noll_mode(int j) {
  int n = 0;
  int j1 = j - 1;
  while (j1 > n) {
    ++n;
    j1 -= n;
  }
  const int mag = (n % 2) + 2 * ((j1 + ((n + 1) % 2)) / 2);
  return {j, n, (j % 2 == 0) ? mag : -mag};
}

/// Number of modes from tip/tilt up to and including radial order n_r.
constexpr int mode_count(int radial_order) { return radial_order * (radial_order + 3) / 2; }

/// R_n^m(r) for every 0 <= m <= n <= max_order, stored at [n][m] (zero when
/// n - m is odd). Uses the three-term recurrence
/// R_n^m = r (R_{n-1}^{|m-1|} + R_{n-1}^{m+1}) - R_{n-2}^m, stable to high order.
template <typename Scalar>
std::vector<std::vector<Scalar>> radial_table(int max_order, Scalar r) {
  std::vector<std::vector<Scalar>> R(max_order + 1);
  for (int n = 0; n <= max_order; ++n) R[n].assign(n + 2, Scalar(0));
  auto at = [&](int n, int m) -> Scalar {
    if (n < 0 || m > n) return Scalar(0);
    return R[n][m];
  };
  R[0][0] = Scalar(1);
  for (int n = 1; n <= max_order; ++n)
    for (int m = n % 2; m <= n; m += 2)
      R[n][m] = r * (at(n - 1, std::abs(m - 1)) + at(n - 1, m + 1)) - at(n - 2, m);
  return R;
}

template <typename Scalar>
Scalar radial_polynomial(int n, int m, Scalar r) {
  m = std::abs(m);
  if ((n - m) % 2 != 0 || m > n) return Scalar(0);
  return radial_table<Scalar>(n, r)[n][m];
}

/// Normalisation sqrt(n+1), times sqrt(2) for m != 0: (1/π)∫ Z_j² = 1 on the unit disk.
template <typename Scalar>
Scalar zernike_norm(int n, int m) {
  using std::sqrt;
  return sqrt(Scalar(n + 1)) * (m == 0 ? Scalar(1) : sqrt(Scalar(2)));
}

/// Noll-normalised Zernike polynomial Z_j(r, θ).
template <typename Scalar>
Scalar zernike(int j, Scalar r, Scalar theta) {
  using std::cos;
  using std::sin;
  const NollMode md = noll_mode(j);
  const Scalar radial = zernike_norm<Scalar>(md.n, md.m) * radial_polynomial(md.n, md.m, r);
  if (md.m > 0) return radial * cos(Scalar(md.m) * theta);
  if (md.m < 0) return radial * sin(Scalar(-md.m) * theta);
  return radial;
}

/// Diagonal of the Kolmogorov Zernike covariance for radial order n >= 1,
/// in rad² at D/r0 = 1 (identical for every mode of the order).
double kolmogorov_order_variance(int n);

/// Gauss-Legendre nodes and weights on [-1, 1].
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre(int n);

}  // namespace satqkd
