#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace satqkd {

inline constexpr double kEarthRadius = 6371.0e3;        // m, spherical Earth
inline constexpr double kEarthMu = 3.986004418e14;      // m^3/s^2
inline constexpr double kEarthRotationRate = 7.2921159e-5;  // rad/s

struct GroundStation {
  std::string name;
  double latitude_deg = 0.0;
  double longitude_deg = 0.0;
  double altitude_m = 0.0;

  void validate() const;
};

/// Circular orbit. The ascending node longitude and argument of latitude are
/// taken at t = 0, where the inertial frame coincides with the Earth-fixed one.
struct OrbitSpec {
  double altitude_m = 500.0e3;
  double inclination_deg = 97.4;
  double ascending_node_deg = 0.0;
  double arg_latitude_deg = 0.0;
  double t_start_s = 0.0;
  double t_end_s = 600.0;
  double time_step_s = 1.0;
  bool earth_rotation = true;

  void validate() const;
  double mean_motion() const;  // rad/s
};

/// `t_s` is measured from the pass start; elevations are in radians.
struct TrajectoryPoint {
  double t_s = 0.0;
  double range_a_m = 0.0;
  double elevation_a_rad = 0.0;
  double range_b_m = 0.0;
  double elevation_b_rad = 0.0;

  void validate() const;
  friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

struct LookAngles {
  double range_m;
  double elevation_rad;
};

/// Range and elevation of the satellite seen from `station` at absolute time `t_s`.
LookAngles look_angles(const OrbitSpec& orbit, const GroundStation& station, double t_s);

/// Orbit whose sub-satellite point passes over (lat, lon) at absolute time
/// `t_ref_s`, on its ascending or descending half.
OrbitSpec orbit_through(double altitude_m, double inclination_deg, double latitude_deg,
                        double longitude_deg, double t_ref_s, bool ascending);

/// Samples the orbit window for two stations. Throws NoVisibilityError if the
/// satellite is never above the horizon of both stations at once.
std::vector<TrajectoryPoint> propagate_pass(const OrbitSpec& orbit, const GroundStation& a,
                                            const GroundStation& b);

/// Keeps points where both elevations are >= min_elevation_rad. Throws
/// NoVisibilityError if nothing survives.
std::vector<TrajectoryPoint> mask_by_elevation(std::span<const TrajectoryPoint> points,
                                               double min_elevation_rad);

/// Duration represented by each sample: half the gap to each neighbour, with
/// the end samples mirrored. A lone sample gets `fallback_dt_s`.
std::vector<double> sample_durations(std::span<const TrajectoryPoint> points,
                                     double fallback_dt_s = 1.0);

/// Visibility time T_v: the sum of sample_durations().
double visibility_time(std::span<const TrajectoryPoint> points, double fallback_dt_s = 1.0);

/// Header: t_s,range_a_m,elev_a_rad,range_b_m,elev_b_rad
std::vector<TrajectoryPoint> import_trajectory(std::istream& in);
void export_trajectory(std::ostream& out, std::span<const TrajectoryPoint> points);

double great_circle_distance(const GroundStation& a, const GroundStation& b);

}  // namespace satqkd
