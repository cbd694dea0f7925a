#include "satqkd/orbit.hpp"

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string_view>

#include "satqkd/errors.hpp"

namespace satqkd {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Eigen::Vector3d station_position(const GroundStation& s, double earth_angle) {
  const double lat = s.latitude_deg * kDeg;
  const double lon = s.longitude_deg * kDeg + earth_angle;
  return (kEarthRadius + s.altitude_m) *
         Eigen::Vector3d(std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon),
                         std::sin(lat));
}

Eigen::Vector3d satellite_position(const OrbitSpec& o, double t) {
  const double u = o.arg_latitude_deg * kDeg + o.mean_motion() * t;
  const double raan = o.ascending_node_deg * kDeg;
  const double inc = o.inclination_deg * kDeg;
  const double cu = std::cos(u), su = std::sin(u);
  const double co = std::cos(raan), so = std::sin(raan);
  return (kEarthRadius + o.altitude_m) *
         Eigen::Vector3d(co * cu - so * su * std::cos(inc), so * cu + co * su * std::cos(inc),
                         su * std::sin(inc));
}

}  // namespace

void GroundStation::validate() const {
  if (!(latitude_deg >= -90.0 && latitude_deg <= 90.0))
    throw InvariantError("latitude", "must lie in [-90, 90] degrees");
  if (!(longitude_deg >= -180.0 && longitude_deg <= 180.0))
    throw InvariantError("longitude", "must lie in [-180, 180] degrees");
  if (!std::isfinite(altitude_m)) throw InvariantError("altitude", "must be finite");
}

void OrbitSpec::validate() const {
  if (!(altitude_m > 0.0)) throw InvariantError("altitude", "must be positive");
  if (!(time_step_s > 0.0)) throw InvariantError("time_step", "must be positive");
  if (!(t_end_s >= t_start_s)) throw InvariantError("t_end", "must not precede t_start");
  if (!std::isfinite(inclination_deg) || !std::isfinite(ascending_node_deg) ||
      !std::isfinite(arg_latitude_deg))
    throw InvariantError("orbit angles", "must be finite");
}

double OrbitSpec::mean_motion() const {
  const double a = kEarthRadius + altitude_m;
  return std::sqrt(kEarthMu / (a * a * a));
}

void TrajectoryPoint::validate() const {
  auto check_range = [](double r, const char* field) {
    if (!(r > 0.0) || !std::isfinite(r)) throw InvariantError(field, "range must be positive");
  };
  auto check_elev = [](double e, const char* field) {
    if (!(e > -std::numbers::pi / 2 && e <= std::numbers::pi / 2))
      throw InvariantError(field, "elevation must lie in (-pi/2, pi/2]");
  };
  if (!std::isfinite(t_s)) throw InvariantError("t_s", "must be finite");
  check_range(range_a_m, "range_a_m");
  check_range(range_b_m, "range_b_m");
  check_elev(elevation_a_rad, "elev_a_rad");
  check_elev(elevation_b_rad, "elev_b_rad");
}

LookAngles look_angles(const OrbitSpec& orbit, const GroundStation& station, double t_s) {
  const double earth_angle = orbit.earth_rotation ? kEarthRotationRate * t_s : 0.0;
  const Eigen::Vector3d gs = station_position(station, earth_angle);
  const Eigen::Vector3d los = satellite_position(orbit, t_s) - gs;
  const double range = los.norm();
  const double sin_el = std::clamp(los.dot(gs.normalized()) / range, -1.0, 1.0);
  return {range, std::asin(sin_el)};
}

OrbitSpec orbit_through(double altitude_m, double inclination_deg, double latitude_deg,
                        double longitude_deg, double t_ref_s, bool ascending) {
  const double inc = inclination_deg * kDeg;
  const double s = std::sin(latitude_deg * kDeg) / std::sin(inc);
  if (std::abs(s) > 1.0)
    throw DomainError("latitude not reachable by an orbit of this inclination");
  double u = std::asin(s);
  if (!ascending) u = std::numbers::pi - u;

  OrbitSpec o;
  o.altitude_m = altitude_m;
  o.inclination_deg = inclination_deg;
  const double inertial_offset = std::atan2(std::cos(inc) * std::sin(u), std::cos(u));
  const double raan = longitude_deg * kDeg + kEarthRotationRate * t_ref_s - inertial_offset;
  o.ascending_node_deg = std::remainder(raan, 2 * std::numbers::pi) / kDeg;
  o.arg_latitude_deg = (u - o.mean_motion() * t_ref_s) / kDeg;
  return o;
}

std::vector<TrajectoryPoint> propagate_pass(const OrbitSpec& orbit, const GroundStation& a,
                                            const GroundStation& b) {
  orbit.validate();
  a.validate();
  b.validate();

  const auto steps =
      static_cast<long>(std::floor((orbit.t_end_s - orbit.t_start_s) / orbit.time_step_s + 1e-9));
  std::vector<TrajectoryPoint> points;
  points.reserve(static_cast<std::size_t>(steps) + 1);
  bool jointly_visible = false;
  for (long k = 0; k <= steps; ++k) {
    const double rel = static_cast<double>(k) * orbit.time_step_s;
    const double t = orbit.t_start_s + rel;
    const LookAngles la = look_angles(orbit, a, t);
    const LookAngles lb = look_angles(orbit, b, t);
    points.push_back({rel, la.range_m, la.elevation_rad, lb.range_m, lb.elevation_rad});
    jointly_visible = jointly_visible || (la.elevation_rad > 0.0 && lb.elevation_rad > 0.0);
  }
  if (!jointly_visible)
    throw NoVisibilityError("satellite never above the horizon of both '" + a.name + "' and '" +
                            b.name + "' in the orbit window");
  return points;
}

std::vector<TrajectoryPoint> mask_by_elevation(std::span<const TrajectoryPoint> points,
                                               double min_elevation_rad) {
  std::vector<TrajectoryPoint> kept;
  for (const auto& p : points)
    if (p.elevation_a_rad >= min_elevation_rad && p.elevation_b_rad >= min_elevation_rad)
      kept.push_back(p);
  if (kept.empty()) throw NoVisibilityError("no trajectory point passes the elevation mask");
  return kept;
}

std::vector<double> sample_durations(std::span<const TrajectoryPoint> points,
                                     double fallback_dt_s) {
  const std::size_t n = points.size();
  std::vector<double> dt(n, fallback_dt_s);
  if (n < 2) return dt;
  for (std::size_t i = 0; i < n; ++i) {
    const double left = i > 0 ? points[i].t_s - points[i - 1].t_s : points[1].t_s - points[0].t_s;
    const double right =
        i + 1 < n ? points[i + 1].t_s - points[i].t_s : points[n - 1].t_s - points[n - 2].t_s;
    dt[i] = 0.5 * (left + right);
  }
  return dt;
}

double visibility_time(std::span<const TrajectoryPoint> points, double fallback_dt_s) {
  double total = 0.0;
  for (double d : sample_durations(points, fallback_dt_s)) total += d;
  return total;
}

std::vector<TrajectoryPoint> import_trajectory(std::istream& in) {
  static constexpr const char* kHeader = "t_s,range_a_m,elev_a_rad,range_b_m,elev_b_rad";
  std::string line;
  std::size_t row = 1;
  if (!std::getline(in, line)) throw ParseError(row, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw ParseError(row, std::string("expected header '") + kHeader + "'");

  std::vector<TrajectoryPoint> points;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (std::size_t cut; (cut = rest.find(',')) != std::string_view::npos;) {
      fields.push_back(rest.substr(0, cut));
      rest.remove_prefix(cut + 1);
    }
    fields.push_back(rest);
    if (fields.size() != 5) throw ParseError(row, "expected 5 comma-separated fields");
    double v[5];
    for (std::size_t f = 0; f < 5; ++f) {
      std::string_view tok = fields[f];
      while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
      while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v[f]);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty())
        throw ParseError(row, "field " + std::to_string(f + 1) + " is not a number");
    }
    TrajectoryPoint p{v[0], v[1], v[2], v[3], v[4]};
    p.validate();
    if (!points.empty() && !(p.t_s > points.back().t_s))
      throw ParseError(row, "t_s must be strictly increasing");
    points.push_back(p);
  }
  return points;
}

void export_trajectory(std::ostream& out, std::span<const TrajectoryPoint> points) {
  out << "t_s,range_a_m,elev_a_rad,range_b_m,elev_b_rad\n";
  std::ostringstream row;
  row.precision(17);
  for (const auto& p : points) {
    row.str({});
    row << p.t_s << ',' << p.range_a_m << ',' << p.elevation_a_rad << ',' << p.range_b_m << ','
        << p.elevation_b_rad << '\n';
    out << row.str();
  }
}

double great_circle_distance(const GroundStation& a, const GroundStation& b) {
  const Eigen::Vector3d pa = station_position(a, 0.0).normalized();
  const Eigen::Vector3d pb = station_position(b, 0.0).normalized();
  return kEarthRadius * std::atan2(pa.cross(pb).norm(), pa.dot(pb));
}

}  // namespace satqkd
