#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "satqkd/adaptive_optics.hpp"
#include "satqkd/errors.hpp"

using namespace satqkd;

namespace {

// Shared bases; building the 256-sample gram is the slow part.
const ZernikeBasis& basis128() {
  static const ZernikeBasis b(40, 128);
  return b;
}

IntegratedTurbulence turbulence(double r0, double greenwood = 0.0) {
  IntegratedTurbulence t;
  t.r0_m = r0;
  t.theta0_rad = 25.8e-6;
  t.greenwood_hz = greenwood;
  t.elevation_rad = std::numbers::pi / 2;
  t.wavelength_m = 1.55e-6;
  return t;
}

long double factorial(int n) {
  long double f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// Explicit sum for R_n^m in long double.
double radial_sum(int n, int m, double r) {
  m = std::abs(m);
  long double sum = 0;
  for (int s = 0; s <= (n - m) / 2; ++s) {
    const long double c = ((s % 2) ? -1.0L : 1.0L) * factorial(n - s) /
                          (factorial(s) * factorial((n + m) / 2 - s) * factorial((n - m) / 2 - s));
    sum += c * std::pow(static_cast<long double>(r), n - 2 * s);
  }
  return static_cast<double>(sum);
}

Eigen::VectorXd residual_with_total(const ZernikeBasis& b, int first_order, double total) {
  Eigen::VectorXd v = kolmogorov_mode_variances(b, 1.0);
  for (int i = 0; i < b.size(); ++i)
    if (b.modes()[i].n < first_order) v[i] = 0.0;
  return v * (total / v.sum());
}

}  // namespace

TEST_CASE("Noll indexing") {
  auto nm = [](int j) { auto m = noll_mode(j); return std::pair{m.n, m.m}; };
  CHECK(nm(1) == std::pair{0, 0});
  CHECK(nm(2) == std::pair{1, 1});
  CHECK(nm(3) == std::pair{1, -1});
  CHECK(nm(4) == std::pair{2, 0});
  CHECK(nm(5) == std::pair{2, -2});
  CHECK(nm(6) == std::pair{2, 2});
  CHECK(nm(7) == std::pair{3, -1});
  CHECK(nm(8) == std::pair{3, 1});
  CHECK(nm(11) == std::pair{4, 0});
  CHECK(nm(22) == std::pair{6, 0});
}

TEST_CASE("mode counts") {
  CHECK(mode_count(1) == 2);
  CHECK(mode_count(5) == 20);
  CHECK(mode_count(20) == 230);
  CHECK(mode_count(40) == 860);
  CHECK(basis128().size() == 860);
  for (int nr = 1; nr <= 40; ++nr) {
    int count = 0;
    for (const auto& m : basis128().modes()) count += m.n <= nr;
    CHECK(count == mode_count(nr));
  }
}

TEST_CASE("radial recurrence matches the explicit sum") {
  for (int n : {0, 1, 2, 5, 10, 20, 25}) {
    for (int m = n % 2; m <= n; m += 2) {
      for (double r : {0.0, 0.13, 0.5, 0.77, 0.99, 1.0}) {
        CHECK(radial_polynomial(n, m, r) == doctest::Approx(radial_sum(n, m, r)).epsilon(1e-9).scale(1.0));
      }
    }
  }
  // At high order the recurrence stays bounded where the explicit sum cancels badly.
  for (double r = 0.0; r <= 1.0; r += 0.01) CHECK(std::abs(radial_polynomial(40, 0, r)) <= 1.0 + 1e-9);
  CHECK(radial_polynomial(40, 40, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("gridded basis is orthonormal") {
  const ZernikeBasis b(40, 256);
  const Eigen::MatrixXd g = b.gram();
  const double dev = (g - Eigen::MatrixXd::Identity(b.size(), b.size())).cwiseAbs().maxCoeff();
  CHECK(dev < 1e-3);
  CHECK_THROWS_AS(ZernikeBasis(40, 64), ResolutionError);
}

TEST_CASE("Kolmogorov mode variances against the structure-function oracle") {
  const ZernikeBasis& b = basis128();
  const Eigen::VectorXd v = kolmogorov_mode_variances(b, 1.0);
  const double piston_removed = oracle::piston_removed_variance();
  const double tilt = oracle::tilt_variance();
  CHECK(piston_removed == doctest::Approx(1.0299).epsilon(2e-3));
  CHECK(piston_removed - 2.0 * tilt == doctest::Approx(0.134).epsilon(1e-2));

  CHECK(v.sum() == doctest::Approx(piston_removed).epsilon(0.02));
  CHECK(v[0] == doctest::Approx(tilt).epsilon(0.01));
  CHECK(v.sum() - v[0] - v[1] == doctest::Approx(piston_removed - 2.0 * tilt).epsilon(0.02));

  SUBCASE("equal within an order, decreasing across orders") {
    for (int i = 1; i < b.size(); ++i) {
      if (b.modes()[i].n == b.modes()[i - 1].n) CHECK(v[i] == v[i - 1]);
      else CHECK(v[i] < v[i - 1]);
    }
  }
  SUBCASE("homogeneity") {
    const Eigen::VectorXd w = kolmogorov_mode_variances(b, 0.5);
    CHECK((w - v * std::pow(2.0, -5.0 / 3.0)).cwiseAbs().maxCoeff() < 1e-15);
  }
  CHECK_THROWS_AS(kolmogorov_mode_variances(b, 0.0), DomainError);
}

TEST_CASE("residual budget") {
  const ZernikeBasis& b = basis128();
  const double d = 1.5;
  const Eigen::VectorXd kolmo = kolmogorov_mode_variances(b, 1.0);
  SUBCASE("perfect correction") {
    AoConfig c;
    c.corrected_radial_orders = 40;
    c.aliasing_coefficient = 0.0;
    const auto r = residual_budget(b, c, turbulence(d, 0.0), d);
    CHECK(r.total() == 0.0);
  }
  SUBCASE("no correction leaves the full piston-removed variance") {
    AoConfig c;
    c.corrected_radial_orders = 0;
    const auto r = residual_budget(b, c, turbulence(d, 50.0), d);
    CHECK(r.fitting_var == doctest::Approx(kolmo.sum()).epsilon(1e-12));
    CHECK(r.temporal_var == 0.0);
  }
  SUBCASE("tip/tilt correction at D/r0 = 1") {
    AoConfig c;
    c.corrected_radial_orders = 1;
    c.aliasing_coefficient = 0.0;
    const auto r = residual_budget(b, c, turbulence(d, 0.0), d);
    CHECK(r.total() == doctest::Approx(0.134).epsilon(0.02));
  }
  SUBCASE("terms") {
    AoConfig c;
    c.corrected_radial_orders = 10;
    const double fg = 40.0;
    const auto r = residual_budget(b, c, turbulence(0.1, fg), d);
    CHECK(r.aliasing_var == doctest::Approx(0.3 * r.fitting_var));
    CHECK(r.temporal_var ==
          doctest::Approx(std::pow(2.0 * oracle::pi * fg * 2.0 / 5000.0, 5.0 / 3.0)));
    CHECK(r.total() == doctest::Approx(r.fitting_var + r.aliasing_var + r.temporal_var));
    CHECK((r.residual.array() >= 0.0).all());
  }
  SUBCASE("invalid config") {
    AoConfig c;
    c.corrected_radial_orders = 41;
    CHECK_THROWS(residual_budget(b, c, turbulence(0.1), d));
    c.corrected_radial_orders = 5;
    c.frame_delay = 0;
    CHECK_THROWS(residual_budget(b, c, turbulence(0.1), d));
  }
}

TEST_CASE("residual phase draws") {
  const ZernikeBasis& b = basis128();
  std::mt19937_64 rng(7);
  CHECK(draw_residual_phase(budget_from_residuals(Eigen::VectorXd::Zero(b.size())), rng).isZero());

  const auto budget = budget_from_residuals(residual_with_total(b, 1, 2.0));
  std::mt19937_64 r1(11), r2(11);
  CHECK(draw_residual_phase(budget, r1) == draw_residual_phase(budget, r2));

  const int n = 100000;
  double s0 = 0.0, s5 = 0.0;
  std::mt19937_64 rng2(3);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd c = draw_residual_phase(budget, rng2);
    s0 += c[0] * c[0];
    s5 += c[5] * c[5];
  }
  CHECK(s0 / n == doctest::Approx(budget.residual[0]).epsilon(0.03));
  CHECK(s5 / n == doctest::Approx(budget.residual[5]).epsilon(0.03));
}

TEST_CASE("flat-wavefront coupling") {
  const auto [w_opt, eta_opt] = oracle::flat_coupling_optimum();
  CHECK(optimal_fiber_mode_ratio() == doctest::Approx(w_opt).epsilon(1e-6));
  CHECK(flat_coupling(optimal_fiber_mode_ratio()) == doctest::Approx(eta_opt).epsilon(1e-9));
  CHECK(eta_opt == doctest::Approx(0.8145).epsilon(1e-3));
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(basis128().size());
  for (double w : {0.5, 0.71, w_opt, 1.2}) {
    CHECK(flat_coupling(w) == doctest::Approx(oracle::flat_coupling(w)).epsilon(1e-9));
    CHECK(coupling_efficiency(zero, basis128(), w) == doctest::Approx(oracle::flat_coupling(w)).epsilon(1e-9));
  }
}

TEST_CASE("coupling of aberrated wavefronts") {
  const ZernikeBasis& b = basis128();
  const double w = optimal_fiber_mode_ratio();
  std::mt19937_64 rng(5);
  const auto budget = budget_from_residuals(residual_with_total(b, 1, 1.0));
  const Eigen::VectorXd c = draw_residual_phase(budget, rng);
  const double eta = coupling_efficiency(c, b, w);
  CHECK(eta >= 0.0);
  CHECK(eta <= 1.0);
  CHECK(coupling_efficiency(c, b, w, 3.7) == doctest::Approx(eta).epsilon(1e-12));
  CHECK(coupling_efficiency(Eigen::VectorXd::Zero(b.size()), b, w, 25.0) ==
        doctest::Approx(flat_coupling(w)).epsilon(1e-12));

  const auto strong = budget_from_residuals(residual_with_total(b, 1, 100.0));
  const auto dist = sample_coupling(b, strong, 200, 9);
  CHECK(dist.mean < 0.01);
}

TEST_CASE("P_AO") {
  const ZernikeBasis& b = basis128();
  const double d = 1.5;
  SUBCASE("zero-turbulence limit") {
    AoConfig c;
    const auto dist = estimate_p_ao(b, c, turbulence(1e6), d, 1000, 1);
    CHECK(dist.mean == doctest::Approx(0.8145).epsilon(1e-3));
    CHECK(dist.stddev < 1e-6);
  }
  SUBCASE("Marechal consistency") {
    for (double s2 : {0.1, 0.25, 0.5}) {
      const auto budget = budget_from_residuals(residual_with_total(b, 2, s2));
      const auto dist = sample_coupling(b, budget, 2000, 21);
      const double expected = flat_coupling(optimal_fiber_mode_ratio()) * std::exp(-s2);
      CHECK(std::abs(dist.mean / expected - 1.0) < (s2 == 0.25 ? 0.10 : 0.15));
    }
  }
  SUBCASE("mean coupling grows with correction order and falls with D/r0") {
    double prev = 0.0;
    for (int nr : {1, 5, 10, 15, 20}) {
      AoConfig c;
      c.corrected_radial_orders = nr;
      const auto dist = estimate_p_ao(b, c, turbulence(0.08, 30.0), d, 1000, 4);
      CHECK(dist.mean + 2.0 * dist.standard_error() >= prev);
      prev = dist.mean;
    }
    AoConfig c;
    c.corrected_radial_orders = 10;
    const double weak = estimate_p_ao(b, c, turbulence(0.12, 30.0), d, 1000, 4).mean;
    const double strong = estimate_p_ao(b, c, turbulence(0.06, 30.0), d, 1000, 4).mean;
    CHECK(weak > strong);
  }
  SUBCASE("reproducible and independent of the thread count") {
    AoConfig c;
    c.corrected_radial_orders = 10;
    CouplingOptions one, four;
    four.threads = 4;
    const auto a = estimate_p_ao(b, c, turbulence(0.08, 30.0), d, 1000, 77, one);
    const auto a2 = estimate_p_ao(b, c, turbulence(0.08, 30.0), d, 1000, 77, one);
    const auto a4 = estimate_p_ao(b, c, turbulence(0.08, 30.0), d, 1000, 77, four);
    CHECK(a.samples == a2.samples);
    CHECK(a.samples == a4.samples);
  }
  SUBCASE("single and double precision agree") {
    AoConfig c;
    c.corrected_radial_orders = 10;
    CouplingOptions sp, dp;
    dp.precision = Precision::Double;
    const auto s = estimate_p_ao(b, c, turbulence(0.08, 30.0), d, 1000, 5, sp);
    const auto t = estimate_p_ao(b, c, turbulence(0.08, 30.0), d, 1000, 5, dp);
    double worst = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) worst = std::max(worst, std::abs(s.samples[i] - t.samples[i]));
    CHECK(worst < 1e-4);
  }
  SUBCASE("too few draws") {
    AoConfig c;
    CHECK_THROWS_AS(estimate_p_ao(b, c, turbulence(0.1), d, 999, 1), DomainError);
  }
}

TEST_CASE("coupling histogram") {
  const auto dist = make_coupling_distribution({0.1, 0.2, 0.2, 0.5, 0.8}, 0.81);
  const auto h = dist.histogram(50);
  double integral = 0.0;
  for (double p : h) integral += p / 50.0;
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-12));
  std::ostringstream out;
  dist.export_histogram(out, 4);
  CHECK(out.str().rfind("bin_center,probability_density\n", 0) == 0);
}
