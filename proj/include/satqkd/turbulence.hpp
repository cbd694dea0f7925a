#pragma once

#include <iosfwd>
#include <vector>

namespace satqkd {

struct TurbulenceLayer {
  double altitude_m = 0.0;
  double cn2 = 0.0;      // m^(-2/3)
  double wind_ms = 0.0;
};

/// Cn2 and wind sampled at strictly increasing altitudes above the station;
/// values between samples are linearly interpolated.
struct TurbulenceProfile {
  std::vector<TurbulenceLayer> layers;
  double reference_wavelength_m = 1.55e-6;

  void validate() const;
};

struct IntegratedTurbulence {
  double r0_m = 0.0;
  double theta0_rad = 0.0;
  double greenwood_hz = 0.0;
  double elevation_rad = 0.0;
  double wavelength_m = 0.0;
};

/// Vertical moments of the profile: ∫Cn² dh, ∫Cn² h^(5/3) dh, ∫Cn² v^(5/3) dh.
struct ProfileMoments {
  double cn2 = 0.0;
  double cn2_h53 = 0.0;
  double cn2_v53 = 0.0;
};

ProfileMoments profile_moments(const TurbulenceProfile& profile);

double fried_parameter(const TurbulenceProfile& profile, double elevation_rad,
                       double wavelength_m);
/// Returns +infinity when all turbulence sits at zero altitude.
double isoplanatic_angle(const TurbulenceProfile& profile, double elevation_rad,
                         double wavelength_m);
double greenwood_frequency(const TurbulenceProfile& profile, double elevation_rad,
                           double wavelength_m);

IntegratedTurbulence integrated_turbulence(const TurbulenceProfile& profile,
                                           double elevation_rad, double wavelength_m);

/// Moment values that a profile must reach to produce (r0, theta0) at zenith.
ProfileMoments zenith_targets(double r0_m, double theta0_rad, double wavelength_m);

double bufton_wind(double altitude_m, double ground_speed_ms = 5.0, double jet_speed_ms = 30.0,
                   double jet_altitude_m = 9400.0, double jet_thickness_m = 4800.0);

/// Hufnagel-Valley Cn2 with a Bufton wind profile, sampled 0-30 km.
TurbulenceProfile hufnagel_valley_template(double ground_cn2 = 1.7e-14,
                                           double rms_wind_ms = 21.0);

struct CalibrationFactors {
  double low = 1.0;
  double high = 1.0;
};

/// Two scale factors, one for layers below `split_altitude_m` and one for the
/// rest, that bring the template to (target_r0, target_theta0) at zenith.
/// Throws NoSolutionError when either factor would be negative.
CalibrationFactors calibration_factors(const TurbulenceProfile& tmpl, double target_r0_m,
                                       double target_theta0_rad,
                                       double split_altitude_m = 1000.0);

TurbulenceProfile calibrate_profile(const TurbulenceProfile& tmpl, double target_r0_m,
                                    double target_theta0_rad, double split_altitude_m = 1000.0);

/// Daytime profile: Hufnagel-Valley template calibrated to r0 = 10.6 cm and
/// theta0 = 25.8 µrad at zenith, 1.55 µm.
TurbulenceProfile default_daytime_profile();

/// Rows `altitude_m,cn2,wind_ms` after a header line.
TurbulenceProfile read_profile(std::istream& in, double reference_wavelength_m = 1.55e-6);
void write_profile(std::ostream& out, const TurbulenceProfile& profile);

}  // namespace satqkd
