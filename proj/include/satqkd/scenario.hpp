#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "satqkd/adaptive_optics.hpp"
#include "satqkd/channel.hpp"
#include "satqkd/orbit.hpp"
#include "satqkd/qkd_rates.hpp"

namespace satqkd {

/// Pass geometry: either an explicit circular orbit, or one placed so that
/// its ground track crosses a reference point at a reference time.
struct OrbitSection {
  double altitude_m = 500e3;
  double inclination_deg = 97.4;
  std::optional<double> ascending_node_deg;
  std::optional<double> arg_latitude_deg;
  double pass_latitude_deg = 0.0;
  double pass_longitude_deg = 0.0;
  double pass_time_s = 0.0;
  bool ascending = true;
  double t_start_s = 0.0;
  double t_end_s = 600.0;
  double time_step_s = 1.0;
  bool earth_rotation = true;

  OrbitSpec spec() const;
};

struct TurbulenceSection {
  std::string profile_path;  // empty: built-in Hufnagel-Valley template
  bool calibrate = true;
  double target_r0_m = 0.106;
  double target_theta0_urad = 25.8;
  double split_altitude_m = 1000.0;
  double wavelength_nm = 1550.0;
};

struct AoSection {
  std::vector<int> radial_orders{1, 5, 10, 15, 20};
  int max_radial_order = 40;
  double loop_frequency_hz = 5000.0;
  int frame_delay_frames = 2;
  double aliasing_coefficient = 0.3;
  int samples_per_diameter = 128;
  double fiber_mode_ratio = optimal_fiber_mode_ratio();
  double obscuration_ratio = 0.0;
};

struct BeamSection {
  double divergence_urad = 10.0;
  double pointing_jitter_urad = 1.0;
  double aperture_diameter_m = 1.5;
  double weibull_shape = 2.0;
};

struct ChannelSection {
  double zenith_transmittance = 0.9;
  double optics_transmittance = 0.3;
  int grid_points = TransmittanceDistribution::kDefaultPoints;
};

struct MonteCarloSection {
  int draws = 10000;
  std::uint64_t seed = 1;
  double elevation_bucket_deg = 5.0;  // 0: one P_AO per trajectory point
  bool single_precision = true;
};

struct Scenario {
  std::string name = "paris-nice";
  std::optional<OrbitSection> orbit;
  std::string trajectory_path;  // used instead of the orbit when set
  GroundStation station_a;
  GroundStation station_b;
  double min_elevation_deg = 20.0;
  TurbulenceSection turbulence;
  AoSection adaptive_optics;
  BeamSection beam;
  ChannelSection channel;
  QkdParams qkd;
  MonteCarloSection monte_carlo;
  std::string output_dir = "out";
  /// Directory that relative paths are resolved against.
  std::filesystem::path base_dir = ".";

  std::filesystem::path resolve(const std::string& path) const;
};

/// Built-in scenarios: "paris-nice" and "nice-matera".
Scenario default_scenario(const std::string& name = "paris-nice");
std::vector<std::string> builtin_scenarios();

/// Strict parse: unknown keys and type mismatches raise ValidationError.
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);
Scenario load_scenario(const std::filesystem::path& path);

/// Semantic checks (ranges, referenced files). Throws ValidationError.
void validate_scenario(const Scenario& s);

/// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const Scenario& s);

}  // namespace satqkd
