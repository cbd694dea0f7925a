#include "satqkd/adaptive_optics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "satqkd/errors.hpp"
#include "satqkd/parallel.hpp"

namespace satqkd {

namespace {

constexpr double kPi = std::numbers::pi;

PupilGrid make_grid(int samples_per_diameter, int max_order, double obscuration) {
  PupilGrid g;
  g.samples_per_diameter = samples_per_diameter;
  g.obscuration = obscuration;
  const int rings = samples_per_diameter / 2;
  const int spokes = std::max(samples_per_diameter, 2 * max_order + 2);
  const auto [x, w] = gauss_legendre(rings);
  const double u0 = obscuration * obscuration;
  const double du = 1.0 - u0;
  g.radius.resize(rings);
  g.weight.resize(rings);
  for (int k = 0; k < rings; ++k) {
    g.radius(k) = std::sqrt(u0 + du * 0.5 * (x(k) + 1.0));
    // dA = r dr dθ = ½ du dθ
    g.weight(k) = 0.5 * (0.5 * du * w(k)) * (2.0 * kPi / spokes);
  }
  g.theta = Eigen::VectorXd::LinSpaced(spokes, 0.0, 2.0 * kPi * (spokes - 1) / spokes);
  return g;
}

// Batched coupling evaluation. The phase on the polar grid is assembled as
// (radial coefficients per azimuthal row) x (azimuthal table), one GEMM per batch.
template <typename Scalar>
class CouplingKernel {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  CouplingKernel(const ZernikeBasis& basis, double fiber_mode_ratio)
      : basis_(basis),
        radial_(basis.radial().cast<Scalar>()),
        azimuthal_(basis.azimuthal().cast<Scalar>()) {
    if (!(fiber_mode_ratio > 0.0)) throw DomainError("fiber_mode_ratio must be positive");
    const PupilGrid& g = basis.grid();
    field_weight_.resize(g.rings());
    for (Eigen::Index k = 0; k < g.rings(); ++k) {
      const double r = g.radius(k) / fiber_mode_ratio;
      field_weight_(k) = g.weight(k) * std::exp(-r * r);
    }
    norm_ = g.area() * kPi * fiber_mode_ratio * fiber_mode_ratio / 2.0;
  }

  // coeffs: modes x draws. Writes one efficiency per column.
  void evaluate(const Eigen::MatrixXd& coeffs, double piston, double* out) const {
    const Eigen::Index rings = radial_.rows();
    const Eigen::Index draws = coeffs.cols();
    Matrix radial_part = Matrix::Zero(rings * draws, azimuthal_.rows());
    for (Eigen::Index b = 0; b < draws; ++b) {
      for (int i = 0; i < basis_.size(); ++i) {
        const double a = coeffs(i, b);
        if (a == 0.0) continue;
        radial_part.block(b * rings, basis_.azimuthal_row(i), rings, 1).noalias() +=
            static_cast<Scalar>(a) * radial_.col(i);
      }
    }
    Matrix phase(rings * draws, azimuthal_.cols());
    phase.noalias() = radial_part * azimuthal_;
    if (piston != 0.0) phase.array() += static_cast<Scalar>(piston);
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> re = phase.array().cos().rowwise().sum();
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> im = phase.array().sin().rowwise().sum();
    for (Eigen::Index b = 0; b < draws; ++b) {
      double sr = 0.0, si = 0.0;
      for (Eigen::Index k = 0; k < rings; ++k) {
        sr += field_weight_(k) * static_cast<double>(re(b * rings + k));
        si += field_weight_(k) * static_cast<double>(im(b * rings + k));
      }
      out[b] = std::clamp((sr * sr + si * si) / norm_, 0.0, 1.0);
    }
  }

 private:
  const ZernikeBasis& basis_;
  Matrix radial_;
  Matrix azimuthal_;
  Eigen::VectorXd field_weight_;
  double norm_ = 1.0;
};

template <typename Scalar>
std::vector<double> run_draws(const ZernikeBasis& basis, const ResidualBudget& budget,
                              int n_draws, std::uint64_t seed, const CouplingOptions& options) {
  constexpr int kBatch = 32;
  const CouplingKernel<Scalar> kernel(basis, options.fiber_mode_ratio);
  std::vector<double> samples(static_cast<std::size_t>(n_draws));
  const std::size_t batches = (static_cast<std::size_t>(n_draws) + kBatch - 1) / kBatch;
  parallel_for(batches, options.threads, [&](std::size_t batch) {
    const int first = static_cast<int>(batch) * kBatch;
    const int count = std::min(kBatch, n_draws - first);
    Eigen::MatrixXd coeffs(basis.size(), count);
    for (int c = 0; c < count; ++c) {
      std::mt19937_64 rng(draw_seed(seed, static_cast<std::uint64_t>(first + c)));
      coeffs.col(c) = draw_residual_phase(budget, rng);
    }
    kernel.evaluate(coeffs, 0.0, samples.data() + first);
  });
  return samples;
}

}  // namespace

double PupilGrid::area() const { return kPi * (1.0 - obscuration * obscuration); }

ZernikeBasis::ZernikeBasis(int max_radial_order, int samples_per_diameter, double obscuration)
    : max_order_(max_radial_order) {
  if (max_radial_order < 1) throw DomainError("max_radial_order must be >= 1");
  if (samples_per_diameter < kMinSamplesPerDiameter)
    throw ResolutionError("pupil grid needs at least " + std::to_string(kMinSamplesPerDiameter) +
                          " samples per diameter");
  if (2 * (samples_per_diameter / 2) < 2 * max_radial_order + 2)
    throw ResolutionError("pupil grid too coarse for the requested radial order");
  if (!(obscuration >= 0.0 && obscuration < 1.0))
    throw DomainError("obscuration ratio must lie in [0, 1)");

  const int count = mode_count(max_radial_order);
  modes_.reserve(count);
  for (int j = 2; j < count + 2; ++j) modes_.push_back(noll_mode(j));

  grid_ = make_grid(samples_per_diameter, max_radial_order, obscuration);

  radial_.resize(grid_.rings(), count);
  for (Eigen::Index k = 0; k < grid_.rings(); ++k) {
    const auto table = radial_table<double>(max_radial_order, grid_.radius(k));
    for (int i = 0; i < count; ++i) {
      const NollMode& md = modes_[i];
      radial_(k, i) = zernike_norm<double>(md.n, md.m) * table[md.n][std::abs(md.m)];
    }
  }

  azimuthal_.resize(2 * max_radial_order + 1, grid_.spokes());
  for (Eigen::Index l = 0; l < grid_.spokes(); ++l) {
    const double t = grid_.theta(l);
    azimuthal_(0, l) = 1.0;
    for (int m = 1; m <= max_radial_order; ++m) {
      azimuthal_(2 * m - 1, l) = std::cos(m * t);
      azimuthal_(2 * m, l) = std::sin(m * t);
    }
  }
  azimuthal_row_.reserve(count);
  for (const auto& md : modes_)
    azimuthal_row_.push_back(md.m == 0 ? 0 : (md.m > 0 ? 2 * md.m - 1 : -2 * md.m));
}

Eigen::MatrixXd ZernikeBasis::phase(const Eigen::VectorXd& coeffs) const {
  if (coeffs.size() != size()) throw DomainError("coefficient vector does not match the basis");
  Eigen::MatrixXd radial_part = Eigen::MatrixXd::Zero(grid_.rings(), azimuthal_.rows());
  for (int i = 0; i < size(); ++i) radial_part.col(azimuthal_row_[i]) += coeffs(i) * radial_.col(i);
  return radial_part * azimuthal_;
}

Eigen::MatrixXd ZernikeBasis::evaluate(Eigen::Index first, Eigen::Index count) const {
  const Eigen::Index spokes = grid_.spokes();
  Eigen::MatrixXd z(count, size());
  for (Eigen::Index row = 0; row < count; ++row) {
    const Eigen::Index node = first + row;
    const Eigen::Index k = node / spokes, l = node % spokes;
    for (int i = 0; i < size(); ++i) z(row, i) = radial_(k, i) * azimuthal_(azimuthal_row_[i], l);
  }
  return z;
}

Eigen::MatrixXd ZernikeBasis::gram() const {
  const Eigen::Index nodes = grid_.rings() * grid_.spokes();
  const Eigen::Index chunk = grid_.spokes() * 8;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(size(), size());
  for (Eigen::Index first = 0; first < nodes; first += chunk) {
    const Eigen::Index count = std::min(chunk, nodes - first);
    const Eigen::MatrixXd z = evaluate(first, count);
    Eigen::VectorXd w(count);
    for (Eigen::Index row = 0; row < count; ++row) w(row) = grid_.weight((first + row) / grid_.spokes());
    g.noalias() += z.transpose() * w.asDiagonal() * z;
  }
  return g / kPi;
}

void AoConfig::validate(const ZernikeBasis& basis) const {
  if (corrected_radial_orders < 0) throw InvariantError("n_r", "must be nonnegative");
  if (corrected_radial_orders > basis.max_radial_order())
    throw InvariantError("n_r", "exceeds the basis radial order");
  if (!(loop_frequency_hz > 0.0)) throw InvariantError("loop_frequency_hz", "must be positive");
  if (frame_delay < 1) throw InvariantError("frame_delay", "must be >= 1");
  if (!(aliasing_coefficient >= 0.0))
    throw InvariantError("aliasing_coefficient", "must be nonnegative");
}

Eigen::VectorXd kolmogorov_mode_variances(const ZernikeBasis& basis, double d_over_r0) {
  if (!(d_over_r0 > 0.0) || !std::isfinite(d_over_r0))
    throw DomainError("D/r0 must be positive and finite");
  const double scale = std::pow(d_over_r0, 5.0 / 3.0);
  std::vector<double> per_order(basis.max_radial_order() + 1, 0.0);
  for (int n = 1; n <= basis.max_radial_order(); ++n) per_order[n] = kolmogorov_order_variance(n);
  Eigen::VectorXd v(basis.size());
  for (int i = 0; i < basis.size(); ++i) v(i) = scale * per_order[basis.modes()[i].n];
  return v;
}

ResidualBudget residual_budget(const ZernikeBasis& basis, const AoConfig& config,
                               const IntegratedTurbulence& turb, double aperture_diameter_m) {
  config.validate(basis);
  if (!(aperture_diameter_m > 0.0)) throw DomainError("aperture diameter must be positive");
  if (!(turb.r0_m > 0.0)) throw DomainError("r0 must be positive");
  if (!(turb.greenwood_hz >= 0.0)) throw DomainError("Greenwood frequency must be nonnegative");

  ResidualBudget b;
  b.kolmogorov = kolmogorov_mode_variances(basis, aperture_diameter_m / turb.r0_m);
  b.residual = b.kolmogorov;
  const int nr = config.corrected_radial_orders;
  double corrected_total = 0.0;
  for (int i = 0; i < basis.size(); ++i) {
    if (basis.modes()[i].n > nr)
      b.fitting_var += b.kolmogorov(i);
    else
      corrected_total += b.kolmogorov(i);
  }
  b.aliasing_var = config.aliasing_coefficient * b.fitting_var;
  if (nr > 0) {
    const double lag = 2.0 * kPi * turb.greenwood_hz * config.effective_delay_s();
    b.temporal_var = std::pow(lag, 5.0 / 3.0);
  } else {
    b.aliasing_var = 0.0;
  }
  const double spread = b.aliasing_var + b.temporal_var;
  for (int i = 0; i < basis.size(); ++i)
    if (basis.modes()[i].n <= nr) b.residual(i) = spread * b.kolmogorov(i) / corrected_total;
  return b;
}

ResidualBudget budget_from_residuals(Eigen::VectorXd residual) {
  if ((residual.array() < 0.0).any()) throw DomainError("residual variances must be nonnegative");
  ResidualBudget b;
  b.kolmogorov = residual;
  b.residual = std::move(residual);
  b.fitting_var = b.residual.sum();
  return b;
}

Eigen::VectorXd draw_residual_phase(const ResidualBudget& budget, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd a(budget.residual.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double z = normal(rng);
    a(i) = budget.residual(i) > 0.0 ? std::sqrt(budget.residual(i)) * z : 0.0;
  }
  return a;
}

std::uint64_t draw_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finaliser over (seed, index)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double optimal_fiber_mode_ratio() {
  // Stationary point of 2(1-e^{-x})²/x in x = 1/ratio²: e^x = 1 + 2x.
  double x = 1.25;
  for (int i = 0; i < 50; ++i) {
    const double f = std::exp(x) - 1.0 - 2.0 * x;
    const double df = std::exp(x) - 2.0;
    x -= f / df;
  }
  return 1.0 / std::sqrt(x);
}

double flat_coupling(double fiber_mode_ratio, double obscuration) {
  if (!(fiber_mode_ratio > 0.0)) throw DomainError("fiber_mode_ratio must be positive");
  const double w2 = fiber_mode_ratio * fiber_mode_ratio;
  const double overlap = std::exp(-obscuration * obscuration / w2) - std::exp(-1.0 / w2);
  return 2.0 * w2 * overlap * overlap / (1.0 - obscuration * obscuration);
}

double coupling_efficiency(const Eigen::VectorXd& coeffs, const ZernikeBasis& basis,
                           double fiber_mode_ratio, double piston_rad) {
  if (coeffs.size() != basis.size())
    throw DomainError("coefficient vector does not match the basis");
  const CouplingKernel<double> kernel(basis, fiber_mode_ratio);
  double eta = 0.0;
  kernel.evaluate(coeffs, piston_rad, &eta);
  return eta;
}

double CouplingDistribution::standard_error() const {
  return samples.empty() ? 0.0 : stddev / std::sqrt(static_cast<double>(samples.size()));
}

std::vector<double> CouplingDistribution::histogram(int bins) const {
  if (bins < 1) throw DomainError("histogram needs at least one bin");
  std::vector<double> density(bins, 0.0);
  if (samples.empty()) return density;
  for (double s : samples) {
    const int b = std::min(bins - 1, static_cast<int>(std::clamp(s, 0.0, 1.0) * bins));
    density[b] += 1.0;
  }
  const double scale = static_cast<double>(bins) / static_cast<double>(samples.size());
  for (double& d : density) d *= scale;
  return density;
}

void CouplingDistribution::export_histogram(std::ostream& out, int bins) const {
  const std::vector<double> density = histogram(bins);
  std::ostringstream s;
  s.precision(17);
  s << "bin_center,probability_density\n";
  for (int b = 0; b < bins; ++b) s << (b + 0.5) / bins << ',' << density[b] << '\n';
  out << s.str();
}

CouplingDistribution make_coupling_distribution(std::vector<double> samples,
                                                double max_coupling) {
  CouplingDistribution d;
  d.samples = std::move(samples);
  d.max_coupling = max_coupling;
  if (d.samples.empty()) return d;
  double sum = 0.0;
  for (double s : d.samples) sum += s;
  d.mean = sum / static_cast<double>(d.samples.size());
  double ss = 0.0;
  for (double s : d.samples) ss += (s - d.mean) * (s - d.mean);
  d.stddev = d.samples.size() > 1 ? std::sqrt(ss / static_cast<double>(d.samples.size() - 1)) : 0.0;
  return d;
}

CouplingDistribution sample_coupling(const ZernikeBasis& basis, const ResidualBudget& budget,
                                     int n_draws, std::uint64_t seed,
                                     const CouplingOptions& options) {
  if (n_draws < 1) throw DomainError("n_draws must be positive");
  if (budget.residual.size() != basis.size())
    throw DomainError("residual budget does not match the basis");
  std::vector<double> samples =
      options.precision == Precision::Single
          ? run_draws<float>(basis, budget, n_draws, seed, options)
          : run_draws<double>(basis, budget, n_draws, seed, options);
  return make_coupling_distribution(std::move(samples),
                                    flat_coupling(options.fiber_mode_ratio, basis.grid().obscuration));
}

CouplingDistribution estimate_p_ao(const ZernikeBasis& basis, const AoConfig& config,
                                   const IntegratedTurbulence& turb, double aperture_diameter_m,
                                   int n_draws, std::uint64_t seed,
                                   const CouplingOptions& options) {
  if (n_draws < 1000) throw DomainError("estimate_p_ao needs at least 1000 draws");
  return sample_coupling(basis, residual_budget(basis, config, turb, aperture_diameter_m), n_draws,
                         seed, options);
}

}  // namespace satqkd
