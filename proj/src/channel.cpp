#include "satqkd/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "satqkd/errors.hpp"
#include "satqkd/zernike.hpp"

namespace satqkd {

namespace {

// e^{-z} I_nu(z) without overflow for large z.
double scaled_bessel_i(int nu, double z) {
  if (z < 500.0) return std::exp(-z) * std::cyl_bessel_i(static_cast<double>(nu), z);
  const double mu = 4.0 * nu * nu;
  return (1.0 - (mu - 1.0) / (8.0 * z) + (mu - 1.0) * (mu - 9.0) / (128.0 * z * z)) /
         std::sqrt(2.0 * std::numbers::pi * z);
}

void check_normalized(const TransmittanceDistribution& d, const char* what) {
  if (std::abs(d.total_mass() - 1.0) > 1e-6)
    throw NormalizationError(std::string(what) + " is not normalised");
}

}  // namespace

void BeamGeometry::validate() const {
  if (!(divergence_rad > 0.0)) throw InvariantError("divergence", "must be positive");
  if (!(range_m > 0.0)) throw InvariantError("range", "must be positive");
  if (!(aperture_diameter_m > 0.0)) throw InvariantError("aperture_diameter", "must be positive");
  if (!(pointing_jitter_rad >= 0.0))
    throw InvariantError("pointing_jitter", "must be nonnegative");
}

double BeamWanderModel::operator()(double displacement_m) const {
  return eta0 * std::exp(-std::pow(displacement_m / scale_m, shape));
}

BeamWanderModel beam_wander_model(double beam_radius_m, double aperture_radius_m) {
  if (!(beam_radius_m > 0.0) || !(aperture_radius_m > 0.0))
    throw DomainError("beam and aperture radii must be positive");
  const double ratio2 = std::pow(aperture_radius_m / beam_radius_m, 2);
  const double z = 4.0 * ratio2;
  const double i0 = scaled_bessel_i(0, z);
  const double i1 = scaled_bessel_i(1, z);
  BeamWanderModel m;
  m.eta0 = -std::expm1(-2.0 * ratio2);
  const double log_term = std::log(2.0 * m.eta0 / (1.0 - i0));
  m.shape = 2.0 * z * i1 / (1.0 - i0) / log_term;
  m.scale_m = aperture_radius_m * std::pow(log_term, -1.0 / m.shape);
  return m;
}

TransmittanceDistribution::TransmittanceDistribution(int points, double tau_min)
    : tau_min_(tau_min) {
  if (points < 3) throw DomainError("transmittance grid needs at least 3 points");
  if (!(tau_min > 0.0 && tau_min < 1.0)) throw DomainError("tau_min must lie in (0, 1)");
  log_step_ = -std::log(tau_min) / (points - 2);
  tau_.resize(points);
  mass_.assign(points, 0.0);
  tau_[0] = 0.0;
  for (int i = 1; i < points - 1; ++i) tau_[i] = std::exp(std::log(tau_min) + (i - 1) * log_step_);
  tau_[points - 1] = 1.0;
}

TransmittanceDistribution TransmittanceDistribution::from_quantile(
    const std::function<double(double)>& quantile, int points, double tau_min) {
  constexpr int kPanels = 4096;
  static const auto gl = gauss_legendre(4);
  TransmittanceDistribution d(points, tau_min);
  for (int p = 0; p < kPanels; ++p) {
    for (int g = 0; g < 4; ++g) {
      const double u = (p + 0.5 * (gl.first(g) + 1.0)) / kPanels;
      d.add_mass(quantile(u), 0.5 * gl.second(g) / kPanels);
    }
  }
  return d;
}

TransmittanceDistribution TransmittanceDistribution::from_samples(
    const std::vector<double>& samples, int points, double tau_min) {
  if (samples.empty()) throw DomainError("no samples");
  TransmittanceDistribution d(points, tau_min);
  const double w = 1.0 / static_cast<double>(samples.size());
  for (double s : samples) d.add_mass(s, w);
  return d;
}

TransmittanceDistribution TransmittanceDistribution::point_mass(double tau, int points,
                                                                double tau_min) {
  TransmittanceDistribution d(points, tau_min);
  d.add_mass(tau, 1.0);
  return d;
}

void TransmittanceDistribution::add_mass(double t, double m) {
  if (!(t <= 1.0 + 1e-12)) throw DomainError("transmission above 1");
  const int n = points();
  if (!(t > 0.0)) {
    mass_[0] += m;
    return;
  }
  if (t >= 1.0) {
    mass_[n - 1] += m;
    return;
  }
  if (t < tau_min_) {
    const double w = t / tau_min_;
    mass_[0] += m * (1.0 - w);
    mass_[1] += m * w;
    return;
  }
  int i = 1 + static_cast<int>(std::floor((std::log(t) - std::log(tau_min_)) / log_step_));
  i = std::clamp(i, 1, n - 2);
  while (i > 1 && tau_[i] > t) --i;
  while (i < n - 2 && tau_[i + 1] <= t) ++i;
  const double w = std::clamp((t - tau_[i]) / (tau_[i + 1] - tau_[i]), 0.0, 1.0);
  mass_[i] += m * (1.0 - w);
  mass_[i + 1] += m * w;
}

bool TransmittanceDistribution::same_grid(const TransmittanceDistribution& o) const {
  return points() == o.points() && tau_min_ == o.tau_min_;
}

double TransmittanceDistribution::total_mass() const {
  double s = 0.0;
  for (double m : mass_) s += m;
  return s;
}

double TransmittanceDistribution::mean() const {
  double s = 0.0;
  for (std::size_t i = 0; i < tau_.size(); ++i) s += tau_[i] * mass_[i];
  return s;
}

std::vector<double> TransmittanceDistribution::density() const {
  const int n = points();
  std::vector<double> d(n);
  for (int i = 0; i < n; ++i) {
    const double lo = i > 0 ? tau_[i - 1] : tau_[0];
    const double hi = i + 1 < n ? tau_[i + 1] : tau_[n - 1];
    d[i] = mass_[i] / (0.5 * (hi - lo));
  }
  return d;
}

double TransmittanceDistribution::cdf(double t) const {
  if (t < 0.0) return 0.0;
  if (t >= 1.0) return total_mass();
  double below = 0.0;
  double prev_value = 0.0;
  for (int i = 0; i < points(); ++i) {
    const double left =
        i > 0 && i + 1 < points() ? (tau_[i] - tau_[i - 1]) / (tau_[i + 1] - tau_[i - 1]) : (i > 0 ? 1.0 : 0.0);
    const double at_node = below + mass_[i] * left;
    if (tau_[i] >= t) {
      if (i == 0) return at_node;
      const double f = (t - tau_[i - 1]) / (tau_[i] - tau_[i - 1]);
      return prev_value + f * (at_node - prev_value);
    }
    below += mass_[i];
    prev_value = at_node;
  }
  return below;
}

TransmittanceDistribution TransmittanceDistribution::scaled(double factor) const {
  if (!(factor > 0.0 && factor <= 1.0)) throw DomainError("scaling factor must lie in (0, 1]");
  TransmittanceDistribution out(points(), tau_min_);
  if (factor == 1.0) {
    out.mass_ = mass_;
    return out;
  }
  for (int i = 0; i < points(); ++i)
    if (mass_[i] != 0.0) out.add_mass(tau_[i] * factor, mass_[i]);
  return out;
}

void TransmittanceDistribution::export_csv(std::ostream& out) const {
  const std::vector<double> d = density();
  std::ostringstream s;
  s.precision(17);
  s << "tau,density\n";
  for (int i = 0; i < points(); ++i) s << tau_[i] << ',' << d[i] << '\n';
  out << s.str();
}

double weibull_scale(double sigma_m, double weibull_shape) {
  if (!(weibull_shape > 0.0)) throw DomainError("Weibull shape must be positive");
  // Matches the Rayleigh second moment 2σ² for any shape.
  return sigma_m * std::sqrt(2.0 / std::tgamma(1.0 + 2.0 / weibull_shape));
}

TransmittanceDistribution beam_wander_distribution(const BeamGeometry& geom, int n_grid,
                                                   double weibull_shape) {
  geom.validate();
  const BeamWanderModel model = beam_wander_model(geom.waist_m(), 0.5 * geom.aperture_diameter_m);
  if (geom.pointing_jitter_rad == 0.0)
    return TransmittanceDistribution::point_mass(model.eta0, n_grid);
  const double scale = weibull_scale(geom.pointing_jitter_rad * geom.range_m, weibull_shape);
  return TransmittanceDistribution::from_quantile(
      [&](double u) {
        const double r = scale * std::pow(-std::log1p(-u), 1.0 / weibull_shape);
        return model(r);
      },
      n_grid);
}

double atmospheric_transmittance(double elevation_rad, double zenith_transmittance) {
  if (!(elevation_rad > 0.0)) throw DomainError("elevation must be positive");
  if (!(zenith_transmittance > 0.0 && zenith_transmittance <= 1.0))
    throw DomainError("zenith transmittance must lie in (0, 1]");
  return std::pow(zenith_transmittance, 1.0 / std::sin(elevation_rad));
}

TransmittanceDistribution pdte(const TransmittanceDistribution& p_bw,
                               const TransmittanceDistribution& p_ao,
                               double deterministic_factor) {
  if (!p_bw.same_grid(p_ao)) throw DomainError("P_BW and P_AO must share a grid");
  check_normalized(p_bw, "P_BW");
  check_normalized(p_ao, "P_AO");
  if (!(deterministic_factor > 0.0 && deterministic_factor <= 1.0))
    throw DomainError("deterministic factor must lie in (0, 1]");

  const int n = p_bw.points();
  const auto& a = p_bw.mass();
  const auto& b = p_ao.mass();
  auto support = [n](const std::vector<double>& m) {
    int lo = 1, hi = n - 1;
    while (lo <= hi && m[lo] == 0.0) ++lo;
    while (hi >= lo && m[hi] == 0.0) --hi;
    return std::pair{lo, hi};
  };
  const auto [alo, ahi] = support(a);
  const auto [blo, bhi] = support(b);

  // Log-uniform nodes: τ_i τ_j is exactly node i + j - n + 1 when that is >= 1.
  TransmittanceDistribution product(n, p_bw.tau_min());
  std::vector<double> out(n, 0.0);
  double at_zero = a[0] + b[0] - a[0] * b[0];
  for (int i = alo; i <= ahi; ++i) {
    if (a[i] == 0.0) continue;
    for (int j = blo; j <= bhi; ++j) {
      if (b[j] == 0.0) continue;
      const int k = i + j - n + 1;
      const double m = a[i] * b[j];
      if (k >= 1) {
        out[k] += m;
      } else {
        product.add_mass(p_bw.tau()[i] * p_ao.tau()[j], m);
      }
    }
  }
  for (int k = 1; k < n; ++k)
    if (out[k] != 0.0) product.add_mass(product.tau()[k], out[k]);
  if (at_zero != 0.0) product.add_mass(0.0, at_zero);
  return product.scaled(deterministic_factor);
}

TransmittanceDistribution pdte(const TransmittanceDistribution& p_bw,
                               const CouplingDistribution& p_ao, double deterministic_factor,
                               int n_grid) {
  if (n_grid != p_bw.points()) throw DomainError("P_BW grid size differs from n_grid");
  return pdte(p_bw, TransmittanceDistribution::from_samples(p_ao.samples, n_grid, p_bw.tau_min()),
              deterministic_factor);
}

}  // namespace satqkd
