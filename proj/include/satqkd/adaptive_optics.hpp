#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "satqkd/turbulence.hpp"
#include "satqkd/zernike.hpp"

namespace satqkd {

/// Polar product quadrature on the (possibly obscured) unit pupil: Gauss-Legendre
/// in r² times a uniform azimuth rule. With at least 41 radial and 82 azimuthal
/// nodes it integrates products of Zernike modes up to order 40 exactly.
struct PupilGrid {
  Eigen::VectorXd radius;  // radial nodes r_k
  Eigen::VectorXd weight;  // area weight of each node on ring k
  Eigen::VectorXd theta;   // azimuth nodes
  int samples_per_diameter = 0;
  double obscuration = 0.0;

  Eigen::Index rings() const { return radius.size(); }
  Eigen::Index spokes() const { return theta.size(); }
  double area() const;
};

class ZernikeBasis {
 public:
  static constexpr int kMinSamplesPerDiameter = 128;

  /// Modes from tip/tilt (Noll 2) to radial order `max_radial_order`; piston excluded.
  explicit ZernikeBasis(int max_radial_order = 40, int samples_per_diameter = 256,
                        double obscuration = 0.0);

  int max_radial_order() const { return max_order_; }
  int size() const { return static_cast<int>(modes_.size()); }
  const std::vector<NollMode>& modes() const { return modes_; }
  const PupilGrid& grid() const { return grid_; }

  /// Normalised radial factor of every mode at every ring (rings × modes).
  const Eigen::MatrixXd& radial() const { return radial_; }
  /// Azimuth factors, one row per trigonometric column (1, cos θ, sin θ, cos 2θ, ...).
  const Eigen::MatrixXd& azimuthal() const { return azimuthal_; }
  /// Row of azimuthal() that mode i multiplies.
  int azimuthal_row(int mode_index) const { return azimuthal_row_[mode_index]; }

  /// Phase map (rings × spokes) for a coefficient vector in radians.
  Eigen::MatrixXd phase(const Eigen::VectorXd& coeffs) const;

  /// Mode values at `count` quadrature nodes starting at node `first`
  /// (node = ring * spokes + spoke), one row per node.
  Eigen::MatrixXd evaluate(Eigen::Index first, Eigen::Index count) const;

  /// (1/π) Σ w Z_i Z_j over the quadrature grid.
  Eigen::MatrixXd gram() const;

 private:
  int max_order_;
  std::vector<NollMode> modes_;
  PupilGrid grid_;
  Eigen::MatrixXd radial_;
  Eigen::MatrixXd azimuthal_;
  std::vector<int> azimuthal_row_;
};

struct AoConfig {
  int corrected_radial_orders = 20;
  double loop_frequency_hz = 5000.0;
  int frame_delay = 2;
  double aliasing_coefficient = 0.3;

  void validate(const ZernikeBasis& basis) const;
  double effective_delay_s() const { return frame_delay / loop_frequency_hz; }
};

struct ResidualBudget {
  Eigen::VectorXd kolmogorov;  // uncorrected variance per mode, rad²
  Eigen::VectorXd residual;    // post-correction variance per mode, rad²
  double fitting_var = 0.0;
  double aliasing_var = 0.0;
  double temporal_var = 0.0;

  double total() const { return residual.sum(); }
};

/// Per-mode Kolmogorov variances, scaling as (D/r0)^(5/3).
Eigen::VectorXd kolmogorov_mode_variances(const ZernikeBasis& basis, double d_over_r0);

/// Fitting error on modes above the corrected order; aliasing and servo-lag
/// error spread over the corrected modes in proportion to their Kolmogorov variance.
ResidualBudget residual_budget(const ZernikeBasis& basis, const AoConfig& config,
                               const IntegratedTurbulence& turb, double aperture_diameter_m);

/// Budget with `residual` set directly (no correction bookkeeping).
ResidualBudget budget_from_residuals(Eigen::VectorXd residual);

Eigen::VectorXd draw_residual_phase(const ResidualBudget& budget, std::mt19937_64& rng);

/// Seed for draw `index` of a run seeded with `seed`.
std::uint64_t draw_seed(std::uint64_t seed, std::uint64_t index);

/// 1/e² intensity radius of the fibre mode, relative to the pupil radius,
/// that maximises flat-wavefront coupling into an unobscured pupil (≈ 0.892).
double optimal_fiber_mode_ratio();

/// Closed-form coupling of a flat wavefront.
double flat_coupling(double fiber_mode_ratio, double obscuration = 0.0);

/// |∫P e^{iφ} M|² / (∫|P|² ∫|M|²) with M a Gaussian mode of 1/e² intensity
/// radius fiber_mode_ratio (pupil radius = 1).
double coupling_efficiency(const Eigen::VectorXd& coeffs, const ZernikeBasis& basis,
                           double fiber_mode_ratio, double piston_rad = 0.0);

enum class Precision { Double, Single };

struct CouplingOptions {
  double fiber_mode_ratio = optimal_fiber_mode_ratio();
  int threads = 1;
  Precision precision = Precision::Single;
};

struct CouplingDistribution {
  std::vector<double> samples;
  double mean = 0.0;
  double stddev = 0.0;
  double max_coupling = 0.0;  // flat-wavefront coupling for the fibre and pupil

  std::size_t size() const { return samples.size(); }
  double standard_error() const;
  /// Probability density on `bins` equal bins over [0, 1].
  std::vector<double> histogram(int bins = 100) const;
  /// `bin_center,probability_density` rows.
  void export_histogram(std::ostream& out, int bins = 100) const;
};

CouplingDistribution make_coupling_distribution(std::vector<double> samples,
                                                double max_coupling);

/// Monte-Carlo P_AO for a residual budget; draw i uses draw_seed(seed, i), so
/// results do not depend on the thread count.
CouplingDistribution sample_coupling(const ZernikeBasis& basis, const ResidualBudget& budget,
                                     int n_draws, std::uint64_t seed,
                                     const CouplingOptions& options = {});

/// P_AO for a turbulence state and AO system. Requires n_draws >= 1000.
CouplingDistribution estimate_p_ao(const ZernikeBasis& basis, const AoConfig& config,
                                   const IntegratedTurbulence& turb, double aperture_diameter_m,
                                   int n_draws, std::uint64_t seed,
                                   const CouplingOptions& options = {});

}  // namespace satqkd
