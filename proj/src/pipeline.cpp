#include "satqkd/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "satqkd/errors.hpp"
#include "satqkd/parallel.hpp"
#include "satqkd/turbulence.hpp"

namespace satqkd {

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;

std::string order_tag(int nr) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", nr);
  return buf;
}

std::string with_stage(const std::string& stage, const std::exception& e) {
  return stage + ": " + e.what();
}

std::vector<TrajectoryPoint> load_trajectory(const Scenario& s) {
  if (s.orbit) return propagate_pass(s.orbit->spec(), s.station_a, s.station_b);
  const auto path = s.resolve(s.trajectory_path);
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open trajectory " + path.string());
  return import_trajectory(in);
}

TurbulenceProfile load_profile(const Scenario& s) {
  const auto& t = s.turbulence;
  TurbulenceProfile profile;
  if (t.profile_path.empty()) {
    profile = hufnagel_valley_template();
  } else {
    const auto path = s.resolve(t.profile_path);
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open turbulence profile " + path.string());
    profile = read_profile(in);
  }
  if (t.calibrate)
    profile = calibrate_profile(profile, t.target_r0_m, t.target_theta0_urad * 1e-6,
                                t.split_altitude_m);
  return profile;
}

// Elevation at which P_AO is evaluated for a sample elevation.
double representative_elevation(double elevation_rad, double bucket_deg) {
  if (bucket_deg <= 0.0) return elevation_rad;
  const double deg = elevation_rad / kDeg;
  const double center = (std::floor(deg / bucket_deg) + 0.5) * bucket_deg;
  return std::min(center, 90.0) * kDeg;
}

std::string write_csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

bool SweepResult::has_data() const {
  if (masked.empty()) return false;
  return std::any_of(orders.begin(), orders.end(), [](const OrderResult& o) { return o.ok; });
}

SweepResult run_scenario(const Scenario& scenario, const RunOptions& options) {
  return sweep_radial_orders(scenario, scenario.adaptive_optics.radial_orders, options);
}

SweepResult sweep_radial_orders(const Scenario& scenario, std::vector<int> orders,
                                const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  SweepResult result;

  std::vector<int> unique;
  for (int nr : orders) {
    if (std::find(unique.begin(), unique.end(), nr) != unique.end()) {
      result.warnings.push_back("radial order " + std::to_string(nr) +
                                " requested more than once; duplicate dropped");
      continue;
    }
    unique.push_back(nr);
  }
  if (unique.empty()) result.warnings.push_back("no radial orders requested");

  validate_scenario(scenario);
  Scenario echo = scenario;
  echo.adaptive_optics.radial_orders = unique;
  result.config = scenario_to_json(echo);
  result.config_hash = config_hash(echo);
  result.seed = scenario.monte_carlo.seed;

  result.trajectory = load_trajectory(scenario);
  result.masked = mask_by_elevation(result.trajectory, scenario.min_elevation_deg * kDeg);
  const auto& masked = result.masked;
  const double fallback_dt = scenario.orbit ? scenario.orbit->time_step_s : 1.0;
  const auto durations = sample_durations(masked, fallback_dt);

  TurbulenceProfile profile;
  try {
    profile = load_profile(scenario);
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    throw Error(with_stage("turbulence profile", e));
  }

  const auto& ao = scenario.adaptive_optics;
  const auto& mc = scenario.monte_carlo;
  const int n_grid = scenario.channel.grid_points;
  const double wavelength = scenario.turbulence.wavelength_nm * 1e-9;
  const double aperture = scenario.beam.aperture_diameter_m;
  const int threads = std::max(options.threads, 1);

  // P_AO slots: one per distinct representative elevation over both stations.
  std::map<double, int> slot_of;
  for (const auto& p : masked) {
    slot_of.emplace(representative_elevation(p.elevation_a_rad, mc.elevation_bucket_deg), 0);
    slot_of.emplace(representative_elevation(p.elevation_b_rad, mc.elevation_bucket_deg), 0);
  }
  std::vector<double> slot_elevation;
  for (auto& [el, slot] : slot_of) {
    slot = static_cast<int>(slot_elevation.size());
    slot_elevation.push_back(el);
  }
  auto slot_for = [&](double el) {
    return slot_of.at(representative_elevation(el, mc.elevation_bucket_deg));
  };

  std::vector<IntegratedTurbulence> slot_turb(slot_elevation.size());
  for (std::size_t k = 0; k < slot_elevation.size(); ++k) {
    try {
      slot_turb[k] = integrated_turbulence(profile, slot_elevation[k], wavelength);
    } catch (const Error& e) {
      throw Error(with_stage("integrated turbulence at elevation " +
                                 write_csv_number(slot_elevation[k] / kDeg) + " deg",
                             e));
    }
  }

  // Beam wandering, per point and station, shared by all orders.
  const std::size_t n_points = masked.size();
  std::vector<TransmittanceDistribution> p_bw(2 * n_points);
  std::vector<double> factor(2 * n_points);
  parallel_for(2 * n_points, threads, [&](std::size_t idx) {
    const auto& p = masked[idx / 2];
    const bool b = idx % 2 == 1;
    BeamGeometry geom;
    geom.divergence_rad = scenario.beam.divergence_urad * 1e-6;
    geom.range_m = b ? p.range_b_m : p.range_a_m;
    geom.aperture_diameter_m = aperture;
    geom.pointing_jitter_rad = scenario.beam.pointing_jitter_urad * 1e-6;
    const double el = b ? p.elevation_b_rad : p.elevation_a_rad;
    try {
      p_bw[idx] = beam_wander_distribution(geom, n_grid, scenario.beam.weibull_shape);
      factor[idx] = atmospheric_transmittance(el, scenario.channel.zenith_transmittance) *
                    scenario.channel.optics_transmittance;
    } catch (const Error& e) {
      throw Error(with_stage("beam wandering at t=" + write_csv_number(p.t_s) + " s, station " +
                                 (b ? "B" : "A"),
                             e));
    }
  });

  ZernikeBasis basis(ao.max_radial_order, ao.samples_per_diameter, ao.obscuration_ratio);
  CouplingOptions coupling;
  coupling.fiber_mode_ratio = ao.fiber_mode_ratio;
  coupling.threads = 1;
  coupling.precision = mc.single_precision ? Precision::Single : Precision::Double;

  // P_AO for every (order, slot), in parallel over tasks.
  const std::size_t n_slots = slot_elevation.size();
  const std::size_t n_tasks = unique.size() * n_slots;
  std::vector<TransmittanceDistribution> p_ao(n_tasks);
  std::vector<double> rel_error(n_tasks, 0.0);
  std::vector<std::string> task_error(n_tasks);
  if (n_tasks < static_cast<std::size_t>(threads)) coupling.threads = threads;
  parallel_for(n_tasks, coupling.threads > 1 ? 1 : threads, [&](std::size_t task) {
    const int nr = unique[task / n_slots];
    const std::size_t slot = task % n_slots;
    AoConfig cfg;
    cfg.corrected_radial_orders = nr;
    cfg.loop_frequency_hz = ao.loop_frequency_hz;
    cfg.frame_delay = ao.frame_delay_frames;
    cfg.aliasing_coefficient = ao.aliasing_coefficient;
    const std::uint64_t seed = draw_seed(draw_seed(mc.seed, static_cast<std::uint64_t>(nr) + 1), slot);
    try {
      const auto dist = estimate_p_ao(basis, cfg, slot_turb[slot], aperture, mc.draws, seed, coupling);
      rel_error[task] = dist.mean > 0.0 ? dist.standard_error() / dist.mean : 0.0;
      p_ao[task] = TransmittanceDistribution::from_samples(dist.samples, n_grid);
    } catch (const std::exception& e) {
      task_error[task] = with_stage("P_AO at elevation " +
                                        write_csv_number(slot_elevation[slot] / kDeg) + " deg",
                                    e);
    }
  });
  result.p_ao_evaluations = static_cast<int>(n_tasks);
  for (double r : rel_error) result.mc_tolerance = std::max(result.mc_tolerance, 3.0 * r);

  for (std::size_t o = 0; o < unique.size(); ++o) {
    OrderResult order;
    order.radial_order = unique[o];
    try {
      for (std::size_t k = 0; k < n_slots; ++k)
        if (!task_error[o * n_slots + k].empty()) throw Error(task_error[o * n_slots + k]);

      std::vector<PassPoint> pass(n_points);
      parallel_for(n_points, threads, [&](std::size_t i) {
        const auto& p = masked[i];
        auto channel = [&](int station) {
          const double el = station ? p.elevation_b_rad : p.elevation_a_rad;
          try {
            return pdte(p_bw[2 * i + station], p_ao[o * n_slots + slot_for(el)],
                        factor[2 * i + station]);
          } catch (const Error& e) {
            throw Error(with_stage("PDTE at t=" + write_csv_number(p.t_s) + " s, station " +
                                       (station ? "B" : "A"),
                                   e));
          }
        };
        pass[i] = PassPoint{p, durations[i], channel(0), channel(1)};
      });
      order.budget = pass_budget(pass, scenario.qkd);
      order.ok = true;
    } catch (const std::exception& e) {
      order.error = e.what();
      result.warnings.push_back("radial order " + std::to_string(unique[o]) +
                                " failed: " + e.what());
    }
    result.orders.push_back(std::move(order));
  }

  result.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

std::vector<std::filesystem::path> emit_outputs(const SweepResult& result,
                                                const std::filesystem::path& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw Error("cannot create output directory " + directory.string() + ": " + ec.message());

  std::vector<fs::path> written;
  auto open = [&](const std::string& name) {
    const fs::path path = directory / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    written.push_back(path);
    return out;
  };
  auto close = [](std::ofstream& out, const fs::path& path) {
    out.close();
    if (!out) throw Error("error while writing " + path.string());
  };

  nlohmann::json orders = nlohmann::json::array();
  if (result.has_data()) {
    {
      auto out = open("trajectory.csv");
      export_trajectory(out, result.trajectory);
      close(out, written.back());
    }
    for (const auto& o : result.orders) {
      if (!o.ok) continue;
      auto out = open("series_nr" + order_tag(o.radial_order) + ".csv");
      write_results(out, o.budget);
      close(out, written.back());
    }
    auto out = open("key_rates.csv");
    out << "n_r,C_T,T_v,e_avg,K_A,K_FS,finite_size_flagged\n";
    for (const auto& o : result.orders) {
      if (!o.ok) continue;
      const auto& b = o.budget;
      out << o.radial_order << ',' << write_csv_number(b.total_coincidences) << ','
          << write_csv_number(b.visibility_time_s) << ',' << write_csv_number(b.mean_qber) << ','
          << write_csv_number(b.asymptotic_key_rate_bps) << ','
          << write_csv_number(b.finite_size.rate_bps) << ',' << (b.finite_size.flagged ? 1 : 0)
          << '\n';
    }
    close(out, written.back());
  }

  for (const auto& o : result.orders) {
    nlohmann::json entry = {{"n_r", o.radial_order}, {"ok", o.ok}};
    if (o.ok) {
      entry["series"] = "series_nr" + order_tag(o.radial_order) + ".csv";
      entry["K_A_bps"] = o.budget.asymptotic_key_rate_bps;
      entry["K_FS_bps"] = o.budget.finite_size.rate_bps;
    } else {
      entry["error"] = o.error;
    }
    orders.push_back(entry);
  }

  nlohmann::json files = nlohmann::json::array();
  for (const auto& p : written) files.push_back(p.filename().string());

  nlohmann::json manifest = {
      {"tool", "satqkd"},
      {"versions",
       {{"satqkd", kVersion},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                      "." + std::to_string(EIGEN_MINOR_VERSION)},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
        {"compiler", __VERSION__}}},
      {"seed", result.seed},
      {"config_hash", result.config_hash},
      {"runtime_s", result.runtime_s},
      {"has_data", result.has_data()},
      {"trajectory_points", result.trajectory.size()},
      {"masked_points", result.masked.size()},
      {"p_ao_evaluations", result.p_ao_evaluations},
      {"monte_carlo_tolerance_rel", result.mc_tolerance},
      {"warnings", result.warnings},
      {"orders", orders},
      {"files", files},
      {"config", result.config}};
  auto out = open("manifest.json");
  out << manifest.dump(2) << '\n';
  close(out, written.back());
  return written;
}

}  // namespace satqkd
