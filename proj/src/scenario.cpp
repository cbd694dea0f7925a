#include "satqkd/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "satqkd/errors.hpp"

namespace satqkd {

namespace {

using nlohmann::json;

// Reads typed keys from one JSON object and rejects anything it did not read.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_ + ": expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError(path_ + "." + key + ": wrong type");
    }
  }

  template <typename T>
  void read(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T v{};
    read(key, v);
    out = v;
  }

  void mark(const char* key) { seen_.insert(key); }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  Reader child(const char* key) {
    seen_.insert(key);
    return Reader(j_.at(key), path_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ValidationError(path_ + "." + key + ": unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_station(Reader r, GroundStation& s) {
  r.read("name", s.name);
  r.read("latitude_deg", s.latitude_deg);
  r.read("longitude_deg", s.longitude_deg);
  r.read("altitude_m", s.altitude_m);
  r.finish();
}

json station_json(const GroundStation& s) {
  return {{"name", s.name},
          {"latitude_deg", s.latitude_deg},
          {"longitude_deg", s.longitude_deg},
          {"altitude_m", s.altitude_m}};
}

GroundStation city(const char* name, double lat, double lon, double alt) {
  return GroundStation{name, lat, lon, alt};
}

}  // namespace

OrbitSpec OrbitSection::spec() const {
  OrbitSpec o;
  if (ascending_node_deg && arg_latitude_deg) {
    o.altitude_m = altitude_m;
    o.inclination_deg = inclination_deg;
    o.ascending_node_deg = *ascending_node_deg;
    o.arg_latitude_deg = *arg_latitude_deg;
  } else {
    o = orbit_through(altitude_m, inclination_deg, pass_latitude_deg, pass_longitude_deg,
                      pass_time_s, ascending);
  }
  o.t_start_s = t_start_s;
  o.t_end_s = t_end_s;
  o.time_step_s = time_step_s;
  o.earth_rotation = earth_rotation;
  return o;
}

std::filesystem::path Scenario::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<std::string> builtin_scenarios() { return {"paris-nice", "nice-matera"}; }

Scenario default_scenario(const std::string& name) {
  const GroundStation paris = city("Paris", 48.8566, 2.3522, 35.0);
  const GroundStation nice = city("Nice", 43.7102, 7.2620, 10.0);
  const GroundStation matera = city("Matera", 40.6664, 16.6043, 401.0);

  Scenario s;
  s.name = name;
  OrbitSection o;
  o.pass_time_s = 300.0;
  o.t_start_s = 0.0;
  o.t_end_s = 600.0;
  if (name == "paris-nice") {
    s.station_a = paris;
    s.station_b = nice;
  } else if (name == "nice-matera") {
    s.station_a = nice;
    s.station_b = matera;
  } else {
    throw ValidationError("unknown built-in scenario '" + name + "'");
  }
  // Ground track through the midpoint of the two stations.
  o.pass_latitude_deg = 0.5 * (s.station_a.latitude_deg + s.station_b.latitude_deg);
  o.pass_longitude_deg = 0.5 * (s.station_a.longitude_deg + s.station_b.longitude_deg);
  s.orbit = o;
  return s;
}

Scenario scenario_from_json(const json& j) {
  Scenario s;
  s.orbit.reset();
  Reader r(j, "scenario");
  r.read("name", s.name);
  if (r.has("orbit")) {
    OrbitSection o;
    Reader ro = r.child("orbit");
    ro.read("altitude_m", o.altitude_m);
    ro.read("inclination_deg", o.inclination_deg);
    ro.read("ascending_node_deg", o.ascending_node_deg);
    ro.read("arg_latitude_deg", o.arg_latitude_deg);
    ro.read("pass_latitude_deg", o.pass_latitude_deg);
    ro.read("pass_longitude_deg", o.pass_longitude_deg);
    ro.read("pass_time_s", o.pass_time_s);
    ro.read("ascending", o.ascending);
    ro.read("t_start_s", o.t_start_s);
    ro.read("t_end_s", o.t_end_s);
    ro.read("time_step_s", o.time_step_s);
    ro.read("earth_rotation", o.earth_rotation);
    ro.finish();
    s.orbit = o;
  } else {
    r.mark("orbit");
  }
  r.read("trajectory_path", s.trajectory_path);
  if (!r.has("station_a") || !r.has("station_b"))
    throw ValidationError("scenario: station_a and station_b are required");
  read_station(r.child("station_a"), s.station_a);
  read_station(r.child("station_b"), s.station_b);
  r.read("min_elevation_deg", s.min_elevation_deg);

  if (r.has("turbulence")) {
    Reader t = r.child("turbulence");
    t.read("profile_path", s.turbulence.profile_path);
    t.read("calibrate", s.turbulence.calibrate);
    t.read("target_r0_m", s.turbulence.target_r0_m);
    t.read("target_theta0_urad", s.turbulence.target_theta0_urad);
    t.read("split_altitude_m", s.turbulence.split_altitude_m);
    t.read("wavelength_nm", s.turbulence.wavelength_nm);
    t.finish();
  }
  if (r.has("adaptive_optics")) {
    Reader a = r.child("adaptive_optics");
    auto& ao = s.adaptive_optics;
    a.read("radial_orders", ao.radial_orders);
    a.read("max_radial_order", ao.max_radial_order);
    a.read("loop_frequency_hz", ao.loop_frequency_hz);
    a.read("frame_delay_frames", ao.frame_delay_frames);
    a.read("aliasing_coefficient", ao.aliasing_coefficient);
    a.read("samples_per_diameter", ao.samples_per_diameter);
    a.read("fiber_mode_ratio", ao.fiber_mode_ratio);
    a.read("obscuration_ratio", ao.obscuration_ratio);
    a.finish();
  }
  if (r.has("beam")) {
    Reader b = r.child("beam");
    b.read("divergence_urad", s.beam.divergence_urad);
    b.read("pointing_jitter_urad", s.beam.pointing_jitter_urad);
    b.read("aperture_diameter_m", s.beam.aperture_diameter_m);
    b.read("weibull_shape", s.beam.weibull_shape);
    b.finish();
  }
  if (r.has("channel")) {
    Reader c = r.child("channel");
    c.read("zenith_transmittance", s.channel.zenith_transmittance);
    c.read("optics_transmittance", s.channel.optics_transmittance);
    c.read("grid_points", s.channel.grid_points);
    c.finish();
  }
  if (r.has("qkd")) {
    Reader q = r.child("qkd");
    auto& p = s.qkd;
    double delta_t_ps = p.coincidence_window_s / 1e-12;
    q.read("pair_rate_hz", p.pair_rate_hz);
    q.read("delta_t_ps", delta_t_ps);
    q.read("dark_rate_a_cps", p.dark_rate_a_hz);
    q.read("dark_rate_b_cps", p.dark_rate_b_hz);
    q.read("detector_efficiency_a", p.detector_efficiency_a);
    q.read("detector_efficiency_b", p.detector_efficiency_b);
    q.read("f_ec", p.f_ec);
    q.read("e_d", p.e_d);
    q.read("e_0", p.e_0);
    q.read("eps_sec", p.eps_sec);
    q.read("eps_corr", p.eps_corr);
    q.finish();
    p.coincidence_window_s = delta_t_ps * 1e-12;
  }
  if (r.has("monte_carlo")) {
    Reader m = r.child("monte_carlo");
    std::string precision = s.monte_carlo.single_precision ? "single" : "double";
    m.read("draws", s.monte_carlo.draws);
    m.read("seed", s.monte_carlo.seed);
    m.read("elevation_bucket_deg", s.monte_carlo.elevation_bucket_deg);
    m.read("precision", precision);
    m.finish();
    if (precision != "single" && precision != "double")
      throw ValidationError("scenario.monte_carlo.precision: expected 'single' or 'double'");
    s.monte_carlo.single_precision = precision == "single";
  }
  r.read("output_dir", s.output_dir);
  r.finish();
  return s;
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  if (s.orbit) {
    const OrbitSection& o = *s.orbit;
    json jo = {{"altitude_m", o.altitude_m},
               {"inclination_deg", o.inclination_deg},
               {"t_start_s", o.t_start_s},
               {"t_end_s", o.t_end_s},
               {"time_step_s", o.time_step_s},
               {"earth_rotation", o.earth_rotation}};
    if (o.ascending_node_deg && o.arg_latitude_deg) {
      jo["ascending_node_deg"] = *o.ascending_node_deg;
      jo["arg_latitude_deg"] = *o.arg_latitude_deg;
    } else {
      jo["pass_latitude_deg"] = o.pass_latitude_deg;
      jo["pass_longitude_deg"] = o.pass_longitude_deg;
      jo["pass_time_s"] = o.pass_time_s;
      jo["ascending"] = o.ascending;
    }
    j["orbit"] = jo;
  } else {
    j["orbit"] = nullptr;
  }
  j["trajectory_path"] = s.trajectory_path;
  j["station_a"] = station_json(s.station_a);
  j["station_b"] = station_json(s.station_b);
  j["min_elevation_deg"] = s.min_elevation_deg;
  j["turbulence"] = {{"profile_path", s.turbulence.profile_path},
                     {"calibrate", s.turbulence.calibrate},
                     {"target_r0_m", s.turbulence.target_r0_m},
                     {"target_theta0_urad", s.turbulence.target_theta0_urad},
                     {"split_altitude_m", s.turbulence.split_altitude_m},
                     {"wavelength_nm", s.turbulence.wavelength_nm}};
  const auto& ao = s.adaptive_optics;
  j["adaptive_optics"] = {{"radial_orders", ao.radial_orders},
                          {"max_radial_order", ao.max_radial_order},
                          {"loop_frequency_hz", ao.loop_frequency_hz},
                          {"frame_delay_frames", ao.frame_delay_frames},
                          {"aliasing_coefficient", ao.aliasing_coefficient},
                          {"samples_per_diameter", ao.samples_per_diameter},
                          {"fiber_mode_ratio", ao.fiber_mode_ratio},
                          {"obscuration_ratio", ao.obscuration_ratio}};
  j["beam"] = {{"divergence_urad", s.beam.divergence_urad},
               {"pointing_jitter_urad", s.beam.pointing_jitter_urad},
               {"aperture_diameter_m", s.beam.aperture_diameter_m},
               {"weibull_shape", s.beam.weibull_shape}};
  j["channel"] = {{"zenith_transmittance", s.channel.zenith_transmittance},
                  {"optics_transmittance", s.channel.optics_transmittance},
                  {"grid_points", s.channel.grid_points}};
  const auto& q = s.qkd;
  j["qkd"] = {{"pair_rate_hz", q.pair_rate_hz},
              {"delta_t_ps", std::round(q.coincidence_window_s * 1e18) / 1e6},
              {"dark_rate_a_cps", q.dark_rate_a_hz},
              {"dark_rate_b_cps", q.dark_rate_b_hz},
              {"detector_efficiency_a", q.detector_efficiency_a},
              {"detector_efficiency_b", q.detector_efficiency_b},
              {"f_ec", q.f_ec},
              {"e_d", q.e_d},
              {"e_0", q.e_0},
              {"eps_sec", q.eps_sec},
              {"eps_corr", q.eps_corr}};
  j["monte_carlo"] = {{"draws", s.monte_carlo.draws},
                      {"seed", s.monte_carlo.seed},
                      {"elevation_bucket_deg", s.monte_carlo.elevation_bucket_deg},
                      {"precision", s.monte_carlo.single_precision ? "single" : "double"}};
  j["output_dir"] = s.output_dir;
  return j;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  Scenario s = scenario_from_json(j);
  s.base_dir = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  return s;
}

void validate_scenario(const Scenario& s) {
  auto fail = [](const std::string& what) { throw ValidationError(what); };
  auto guard = [&](auto&& check, const std::string& where) {
    try {
      check();
    } catch (const Error& e) {
      fail(where + ": " + e.what());
    }
  };
  if (!s.orbit && s.trajectory_path.empty()) fail("either orbit or trajectory_path is required");
  if (s.orbit && !s.trajectory_path.empty())
    fail("orbit and trajectory_path are mutually exclusive");
  if (s.orbit) {
    const auto& o = *s.orbit;
    if (o.ascending_node_deg.has_value() != o.arg_latitude_deg.has_value())
      fail("orbit: ascending_node_deg and arg_latitude_deg must be given together");
    guard([&] { s.orbit->spec().validate(); }, "orbit");
  } else if (!std::filesystem::exists(s.resolve(s.trajectory_path))) {
    fail("trajectory file not found: " + s.resolve(s.trajectory_path).string());
  }
  guard([&] { s.station_a.validate(); }, "station_a");
  guard([&] { s.station_b.validate(); }, "station_b");
  if (!(s.min_elevation_deg >= 0.0 && s.min_elevation_deg < 90.0))
    fail("min_elevation_deg must lie in [0, 90)");

  const auto& t = s.turbulence;
  if (!t.profile_path.empty() && !std::filesystem::exists(s.resolve(t.profile_path)))
    fail("turbulence profile not found: " + s.resolve(t.profile_path).string());
  if (!(t.wavelength_nm > 0.0)) fail("turbulence.wavelength_nm must be positive");
  if (t.calibrate && (!(t.target_r0_m > 0.0) || !(t.target_theta0_urad > 0.0)))
    fail("turbulence calibration targets must be positive");

  const auto& ao = s.adaptive_optics;
  if (ao.radial_orders.empty()) fail("adaptive_optics.radial_orders must not be empty");
  for (int nr : ao.radial_orders)
    if (nr < 0) fail("adaptive_optics.radial_orders: " + std::to_string(nr) + " is negative");
  if (ao.max_radial_order < 1) fail("adaptive_optics.max_radial_order must be >= 1");
  if (!(ao.loop_frequency_hz > 0.0)) fail("adaptive_optics.loop_frequency_hz must be positive");
  if (ao.frame_delay_frames < 1) fail("adaptive_optics.frame_delay_frames must be >= 1");
  if (!(ao.aliasing_coefficient >= 0.0)) fail("adaptive_optics.aliasing_coefficient must be >= 0");
  if (ao.samples_per_diameter < ZernikeBasis::kMinSamplesPerDiameter)
    fail("adaptive_optics.samples_per_diameter must be >= 128");
  if (!(ao.fiber_mode_ratio > 0.0)) fail("adaptive_optics.fiber_mode_ratio must be positive");
  if (!(ao.obscuration_ratio >= 0.0 && ao.obscuration_ratio < 1.0))
    fail("adaptive_optics.obscuration_ratio must lie in [0, 1)");

  if (!(s.beam.divergence_urad > 0.0)) fail("beam.divergence_urad must be positive");
  if (!(s.beam.pointing_jitter_urad >= 0.0)) fail("beam.pointing_jitter_urad must be >= 0");
  if (!(s.beam.aperture_diameter_m > 0.0)) fail("beam.aperture_diameter_m must be positive");
  if (!(s.beam.weibull_shape > 0.0)) fail("beam.weibull_shape must be positive");

  const auto& c = s.channel;
  if (!(c.zenith_transmittance > 0.0 && c.zenith_transmittance <= 1.0))
    fail("channel.zenith_transmittance must lie in (0, 1]");
  if (!(c.optics_transmittance > 0.0 && c.optics_transmittance <= 1.0))
    fail("channel.optics_transmittance must lie in (0, 1]");
  if (c.grid_points < 16) fail("channel.grid_points must be >= 16");

  guard([&] { s.qkd.validate(); }, "qkd");

  if (s.monte_carlo.draws < 1000) fail("monte_carlo.draws must be >= 1000");
  if (!(s.monte_carlo.elevation_bucket_deg >= 0.0))
    fail("monte_carlo.elevation_bucket_deg must be >= 0");
  if (s.output_dir.empty()) fail("output_dir must not be empty");
}

std::string config_hash(const Scenario& s) {
  const std::string text = scenario_to_json(s).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace satqkd
