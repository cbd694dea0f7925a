#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "satqkd/qkd_rates.hpp"
#include "satqkd/scenario.hpp"

namespace satqkd {

inline constexpr const char* kVersion = "0.1.0";

struct RunOptions {
  int threads = 1;
};

struct OrderResult {
  int radial_order = 0;
  bool ok = false;
  std::string error;  // set when !ok
  QkdLinkBudget budget;
};

struct SweepResult {
  std::vector<TrajectoryPoint> trajectory;  // whole propagated or imported window
  std::vector<TrajectoryPoint> masked;      // points above the elevation mask
  std::vector<OrderResult> orders;          // one per distinct requested order
  std::vector<std::string> warnings;
  nlohmann::json config;  // resolved scenario echo
  std::uint64_t seed = 0;
  std::string config_hash;
  double runtime_s = 0.0;
  int p_ao_evaluations = 0;
  /// Largest relative standard error of a P_AO mean, times three.
  double mc_tolerance = 0.0;

  bool has_data() const;
};

/// Sweeps the scenario's own radial_orders list.
SweepResult run_scenario(const Scenario& scenario, const RunOptions& options = {});

/// Orbit, turbulence, beam wander and P_AO caches are shared by all orders.
/// Duplicate orders are dropped with a warning; a failing order is reported
/// in its OrderResult while the others still run.
SweepResult sweep_radial_orders(const Scenario& scenario, std::vector<int> orders,
                                const RunOptions& options = {});

/// Writes trajectory.csv, series_nrNN.csv per successful order, key_rates.csv
/// and manifest.json. Without data only the manifest is written. Returns the
/// paths written.
std::vector<std::filesystem::path> emit_outputs(const SweepResult& result,
                                                const std::filesystem::path& directory);

}  // namespace satqkd
