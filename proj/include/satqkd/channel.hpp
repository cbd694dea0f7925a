#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "satqkd/adaptive_optics.hpp"

namespace satqkd {

struct BeamGeometry {
  double divergence_rad = 10e-6;
  double range_m = 500e3;
  double aperture_diameter_m = 1.5;
  double pointing_jitter_rad = 1e-6;  // per-axis standard deviation

  void validate() const;
  /// Beam radius on the ground, w = θ_d R.
  double waist_m() const { return divergence_rad * range_m; }
};

/// Aperture transmission of a Gaussian beam displaced by r:
/// τ(r) = eta0 exp(-(r / scale)^shape).
struct BeamWanderModel {
  double eta0 = 0.0;
  double shape = 2.0;
  double scale_m = 1.0;

  double operator()(double displacement_m) const;
};

BeamWanderModel beam_wander_model(double beam_radius_m, double aperture_radius_m);

/// Probability masses on a fixed grid: node 0 is τ = 0, nodes 1..N-1 are
/// log-spaced from tau_min to 1. Mass placed between two nodes is split so
/// that the mean is preserved exactly.
class TransmittanceDistribution {
 public:
  static constexpr int kDefaultPoints = 4096;
  static constexpr double kDefaultTauMin = 1e-15;

  explicit TransmittanceDistribution(int points = kDefaultPoints,
                                     double tau_min = kDefaultTauMin);

  /// Push-forward of a quantile function by composite Gauss-Legendre in u ∈ (0,1).
  static TransmittanceDistribution from_quantile(const std::function<double(double)>& quantile,
                                                 int points = kDefaultPoints,
                                                 double tau_min = kDefaultTauMin);
  static TransmittanceDistribution from_samples(const std::vector<double>& samples,
                                                int points = kDefaultPoints,
                                                double tau_min = kDefaultTauMin);
  static TransmittanceDistribution point_mass(double tau, int points = kDefaultPoints,
                                              double tau_min = kDefaultTauMin);

  int points() const { return static_cast<int>(tau_.size()); }
  double tau_min() const { return tau_min_; }
  const std::vector<double>& tau() const { return tau_; }
  const std::vector<double>& mass() const { return mass_; }

  void add_mass(double tau, double mass);
  bool same_grid(const TransmittanceDistribution& other) const;

  double total_mass() const;
  double mean() const;
  /// Mass divided by the dual cell width around each node.
  std::vector<double> density() const;
  /// Piecewise-linear CDF consistent with the hat-function reading of the masses.
  double cdf(double t) const;

  /// Distribution of f·τ.
  TransmittanceDistribution scaled(double factor) const;

  /// `tau,density` rows.
  void export_csv(std::ostream& out) const;

 private:
  double log_step_;
  double tau_min_;
  std::vector<double> tau_;
  std::vector<double> mass_;
};

/// P_BW: Weibull-distributed beam displacement (scale √2 θ_p R for shape 2,
/// i.e. isotropic Gaussian jitter) pushed through the aperture transmission model.
TransmittanceDistribution beam_wander_distribution(const BeamGeometry& geom,
                                                   int n_grid = TransmittanceDistribution::kDefaultPoints,
                                                   double weibull_shape = 2.0);

/// Weibull scale of the displacement for a per-axis jitter std sigma.
double weibull_scale(double sigma_m, double weibull_shape);

/// Absorption along the slant path: T0^(1/sin elevation).
double atmospheric_transmittance(double elevation_rad, double zenith_transmittance);

/// Mellin convolution of P_BW and P_AO (law of the product of independent
/// variables) followed by a deterministic scaling of the support.
TransmittanceDistribution pdte(const TransmittanceDistribution& p_bw,
                               const CouplingDistribution& p_ao, double deterministic_factor,
                               int n_grid = TransmittanceDistribution::kDefaultPoints);

TransmittanceDistribution pdte(const TransmittanceDistribution& p_bw,
                               const TransmittanceDistribution& p_ao,
                               double deterministic_factor);

}  // namespace satqkd
