#include <algorithm>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "satqkd/errors.hpp"
#include "satqkd/pipeline.hpp"
#include "satqkd/scenario.hpp"

namespace {

enum ExitCode : int { kOk = 0, kValidation = 2, kRuntime = 3, kNoData = 4 };

struct RunArgs {
  std::string scenario_file;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int threads = 1;
  std::vector<int> orders;
};

int execute(const RunArgs& args, bool sweep) {
  satqkd::Scenario scenario = satqkd::load_scenario(args.scenario_file);
  if (args.seed) scenario.monte_carlo.seed = *args.seed;
  satqkd::validate_scenario(scenario);
  const std::vector<int> orders = sweep ? args.orders : scenario.adaptive_optics.radial_orders;
  const std::string out_dir = args.out_dir.empty() ? scenario.output_dir : args.out_dir;

  satqkd::SweepResult result;
  try {
    result = satqkd::sweep_radial_orders(scenario, orders, {args.threads});
  } catch (const satqkd::NoVisibilityError& e) {
    std::cerr << "no visibility: " << e.what() << '\n';
    return kNoData;
  }
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  const auto files = satqkd::emit_outputs(result, out_dir);

  for (const auto& o : result.orders) {
    if (!o.ok) {
      std::cout << "n_r=" << o.radial_order << "  failed\n";
      continue;
    }
    const auto& b = o.budget;
    std::cout << "n_r=" << o.radial_order << "  C_T=" << b.total_coincidences
              << "  T_v=" << b.visibility_time_s << " s  e_avg=" << b.mean_qber
              << "  K_A=" << b.asymptotic_key_rate_bps << " bit/s  K_FS=" << b.finite_size.rate_bps
              << " bit/s\n";
  }
  std::cout << files.size() << " files written to " << out_dir << " in " << result.runtime_s
            << " s\n";
  if (!result.has_data()) return kNoData;
  const bool all_ok = std::all_of(result.orders.begin(), result.orders.end(),
                                  [](const satqkd::OrderResult& o) { return o.ok; });
  return all_ok ? kOk : kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Daytime satellite-to-ground entanglement QKD link simulator"};
  app.require_subcommand(1);

  RunArgs args;
  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("scenario", args.scenario_file, "Scenario JSON file")->required();
    cmd->add_option("--seed", args.seed, "Override the Monte-Carlo seed");
    cmd->add_option("--out-dir", args.out_dir, "Output directory (default: scenario output_dir)");
    cmd->add_option("--threads", args.threads, "Worker threads")->check(CLI::PositiveNumber);
  };

  auto* run = app.add_subcommand("run", "Run the scenario's radial-order list");
  add_run_flags(run);

  auto* sweep = app.add_subcommand("sweep", "Run an explicit list of AO radial orders");
  add_run_flags(sweep);
  sweep->add_option("--orders", args.orders, "Comma-separated radial orders")
      ->delimiter(',')
      ->required();

  std::string validate_file;
  auto* validate = app.add_subcommand("validate", "Check a scenario file and exit");
  validate->add_option("scenario", validate_file, "Scenario JSON file")->required();

  std::string defaults_name = "paris-nice";
  auto* defaults = app.add_subcommand("export-defaults", "Print a built-in scenario as JSON");
  defaults->add_option("--scenario", defaults_name, "paris-nice or nice-matera")
      ->check(CLI::IsMember(satqkd::builtin_scenarios()));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (validate->parsed()) {
      satqkd::validate_scenario(satqkd::load_scenario(validate_file));
      std::cout << validate_file << ": ok\n";
      return kOk;
    }
    if (defaults->parsed()) {
      std::cout << satqkd::scenario_to_json(satqkd::default_scenario(defaults_name)).dump(2) << '\n';
      return kOk;
    }
    return execute(args, sweep->parsed());
  } catch (const satqkd::ValidationError& e) {
    std::cerr << "invalid scenario: " << e.what() << '\n';
    return kValidation;
  } catch (const satqkd::NoVisibilityError& e) {
    std::cerr << "no visibility: " << e.what() << '\n';
    return kNoData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}
