#include "satqkd/turbulence.hpp"

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "satqkd/errors.hpp"

namespace satqkd {

namespace {

constexpr double k53 = 5.0 / 3.0;

double wavenumber(double wavelength_m) { return 2.0 * std::numbers::pi / wavelength_m; }

double secant_zenith(double elevation_rad) {
  if (!(elevation_rad > 0.0)) throw DomainError("elevation must be positive");
  if (elevation_rad > std::numbers::pi / 2 + 1e-12)
    throw DomainError("elevation must not exceed pi/2");
  return 1.0 / std::sin(std::min(elevation_rad, std::numbers::pi / 2));
}

// Composite Simpson over every layer interval with n sub-intervals each.
template <typename Weight>
double simpson_layers(const TurbulenceProfile& p, Weight weight, int n) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < p.layers.size(); ++i) {
    const auto& lo = p.layers[i];
    const auto& hi = p.layers[i + 1];
    const double span = hi.altitude_m - lo.altitude_m;
    const double step = span / n;
    auto f = [&](int k) {
      const double s = static_cast<double>(k) / n;
      const double h = lo.altitude_m + s * span;
      const double cn2 = lo.cn2 + s * (hi.cn2 - lo.cn2);
      const double v = lo.wind_ms + s * (hi.wind_ms - lo.wind_ms);
      return cn2 * weight(h, v);
    };
    double sum = f(0) + f(n);
    for (int k = 1; k < n; ++k) sum += (k % 2 ? 4.0 : 2.0) * f(k);
    total += sum * step / 3.0;
  }
  return total;
}

template <typename Weight>
double integrate(const TurbulenceProfile& p, Weight weight) {
  constexpr double kRelTol = 1e-7;
  double prev = simpson_layers(p, weight, 2);
  for (int n = 4; n <= 4096; n *= 2) {
    const double next = simpson_layers(p, weight, n);
    if (std::abs(next - prev) <= kRelTol * std::abs(next)) return next;
    prev = next;
  }
  return prev;
}

}  // namespace

void TurbulenceProfile::validate() const {
  if (layers.size() < 2) throw InvariantError("layers", "at least 2 layers required");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (!(l.cn2 >= 0.0) || !std::isfinite(l.cn2))
      throw InvariantError("cn2", "must be finite and nonnegative");
    if (!(l.altitude_m >= 0.0)) throw InvariantError("altitude_m", "must be nonnegative");
    if (!(l.wind_ms >= 0.0) || !std::isfinite(l.wind_ms))
      throw InvariantError("wind_ms", "must be finite and nonnegative");
    if (i > 0 && !(l.altitude_m > layers[i - 1].altitude_m))
      throw InvariantError("altitude_m", "altitudes must be strictly increasing");
  }
  if (!(reference_wavelength_m > 0.0))
    throw InvariantError("reference_wavelength", "must be positive");
}

ProfileMoments profile_moments(const TurbulenceProfile& profile) {
  profile.validate();
  ProfileMoments m;
  m.cn2 = integrate(profile, [](double, double) { return 1.0; });
  m.cn2_h53 = integrate(profile, [](double h, double) { return std::pow(h, k53); });
  m.cn2_v53 = integrate(profile, [](double, double v) { return std::pow(v, k53); });
  return m;
}

double fried_parameter(const TurbulenceProfile& profile, double elevation_rad,
                       double wavelength_m) {
  const double sec = secant_zenith(elevation_rad);
  const double k = wavenumber(wavelength_m);
  const double j0 = profile_moments(profile).cn2;
  if (!(j0 > 0.0)) return std::numeric_limits<double>::infinity();
  return std::pow(0.423 * k * k * sec * j0, -0.6);
}

double isoplanatic_angle(const TurbulenceProfile& profile, double elevation_rad,
                         double wavelength_m) {
  const double sec = secant_zenith(elevation_rad);
  const double k = wavenumber(wavelength_m);
  const double j53 = profile_moments(profile).cn2_h53;
  if (!(j53 > 0.0)) return std::numeric_limits<double>::infinity();
  return std::pow(2.914 * k * k * std::pow(sec, 8.0 / 3.0) * j53, -0.6);
}

double greenwood_frequency(const TurbulenceProfile& profile, double elevation_rad,
                           double wavelength_m) {
  const double sec = secant_zenith(elevation_rad);
  if (!(wavelength_m > 0.0)) throw DomainError("wavelength must be positive");
  const double jv = profile_moments(profile).cn2_v53;
  return 2.31 * std::pow(wavelength_m, -1.2) * std::pow(sec * jv, 0.6);
}

IntegratedTurbulence integrated_turbulence(const TurbulenceProfile& profile,
                                           double elevation_rad, double wavelength_m) {
  return {fried_parameter(profile, elevation_rad, wavelength_m),
          isoplanatic_angle(profile, elevation_rad, wavelength_m),
          greenwood_frequency(profile, elevation_rad, wavelength_m), elevation_rad,
          wavelength_m};
}

ProfileMoments zenith_targets(double r0_m, double theta0_rad, double wavelength_m) {
  if (!(r0_m > 0.0) || !(theta0_rad > 0.0) || !(wavelength_m > 0.0))
    throw DomainError("calibration targets must be positive");
  const double k2 = std::pow(wavenumber(wavelength_m), 2);
  ProfileMoments m;
  m.cn2 = std::pow(r0_m, -k53) / (0.423 * k2);
  m.cn2_h53 = std::pow(theta0_rad, -k53) / (2.914 * k2);
  return m;
}

double bufton_wind(double altitude_m, double ground_speed_ms, double jet_speed_ms,
                   double jet_altitude_m, double jet_thickness_m) {
  const double x = (altitude_m - jet_altitude_m) / jet_thickness_m;
  return ground_speed_ms + jet_speed_ms * std::exp(-x * x);
}

TurbulenceProfile hufnagel_valley_template(double ground_cn2, double rms_wind_ms) {
  TurbulenceProfile p;
  auto add = [&](double h) {
    const double cn2 = 0.00594 * std::pow(rms_wind_ms / 27.0, 2) * std::pow(1e-5 * h, 10) *
                           std::exp(-h / 1000.0) +
                       2.7e-16 * std::exp(-h / 1500.0) + ground_cn2 * std::exp(-h / 100.0);
    p.layers.push_back({h, cn2, bufton_wind(h)});
  };
  for (double h = 0.0; h < 500.0; h += 10.0) add(h);
  for (double h = 500.0; h < 5000.0; h += 50.0) add(h);
  for (double h = 5000.0; h <= 30000.0; h += 250.0) add(h);
  return p;
}

CalibrationFactors calibration_factors(const TurbulenceProfile& tmpl, double target_r0_m,
                                       double target_theta0_rad, double split_altitude_m) {
  tmpl.validate();
  TurbulenceProfile low = tmpl, high = tmpl;
  for (std::size_t i = 0; i < tmpl.layers.size(); ++i) {
    if (tmpl.layers[i].altitude_m < split_altitude_m)
      high.layers[i].cn2 = 0.0;
    else
      low.layers[i].cn2 = 0.0;
  }
  // Interpolation is linear in the samples, so the moments are linear in the factors.
  const ProfileMoments ml = profile_moments(low);
  const ProfileMoments mh = profile_moments(high);
  const ProfileMoments target =
      zenith_targets(target_r0_m, target_theta0_rad, tmpl.reference_wavelength_m);

  Eigen::Matrix2d a;
  a << ml.cn2, mh.cn2, ml.cn2_h53, mh.cn2_h53;
  const Eigen::Vector2d rhs(target.cn2, target.cn2_h53);
  Eigen::FullPivLU<Eigen::Matrix2d> lu(a);
  if (!lu.isInvertible())
    throw NoSolutionError("low and high layer groups do not span the calibration targets");
  const Eigen::Vector2d f = lu.solve(rhs);
  if (!(f(0) >= 0.0) || !(f(1) >= 0.0))
    throw NoSolutionError("calibration targets need a negative layer scaling");
  return {f(0), f(1)};
}

TurbulenceProfile calibrate_profile(const TurbulenceProfile& tmpl, double target_r0_m,
                                    double target_theta0_rad, double split_altitude_m) {
  const CalibrationFactors f =
      calibration_factors(tmpl, target_r0_m, target_theta0_rad, split_altitude_m);
  TurbulenceProfile out = tmpl;
  for (auto& l : out.layers) l.cn2 *= l.altitude_m < split_altitude_m ? f.low : f.high;
  return out;
}

TurbulenceProfile default_daytime_profile() {
  return calibrate_profile(hufnagel_valley_template(), 0.106, 25.8e-6);
}

TurbulenceProfile read_profile(std::istream& in, double reference_wavelength_m) {
  TurbulenceProfile p;
  p.reference_wavelength_m = reference_wavelength_m;
  std::string line;
  std::size_t row = 1;
  if (!std::getline(in, line)) throw ParseError(row, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "altitude_m,cn2,wind_ms")
    throw ParseError(row, "expected header 'altitude_m,cn2,wind_ms'");
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double v[3];
    std::string_view rest(line);
    for (int f = 0; f < 3; ++f) {
      const std::size_t cut = rest.find(',');
      if ((f < 2) == (cut == std::string_view::npos))
        throw ParseError(row, "expected 3 comma-separated fields");
      const std::string_view tok = rest.substr(0, cut);
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v[f]);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty())
        throw ParseError(row, "field " + std::to_string(f + 1) + " is not a number");
      if (cut != std::string_view::npos) rest.remove_prefix(cut + 1);
    }
    p.layers.push_back({v[0], v[1], v[2]});
  }
  p.validate();
  return p;
}

void write_profile(std::ostream& out, const TurbulenceProfile& profile) {
  std::ostringstream s;
  s.precision(17);
  s << "altitude_m,cn2,wind_ms\n";
  for (const auto& l : profile.layers) s << l.altitude_m << ',' << l.cn2 << ',' << l.wind_ms << '\n';
  out << s.str();
}

}  // namespace satqkd
