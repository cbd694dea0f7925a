// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: satqkd_acceptance <path-to-satqkd-cli> [work-dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "satqkd/adaptive_optics.hpp"
#include "satqkd/channel.hpp"
#include "satqkd/pipeline.hpp"
#include "satqkd/qkd_rates.hpp"
#include "satqkd/turbulence.hpp"

using namespace satqkd;
namespace fs = std::filesystem;

namespace {

constexpr double deg = oracle::pi / 180.0;

class Criterion {
 public:
  explicit Criterion(std::string title) : title_(std::move(title)) {}

  void check(bool ok, const std::string& what) {
    ok_ = ok_ && ok;
    notes_.push_back(what + (ok ? "" : " [x]"));
  }

  bool report(int number) const { return report(number, ok_); }

  bool report(int number, bool verdict) const {
    std::printf("criterion %d %s: %s\n", number, verdict ? "PASS" : "FAIL", title_.c_str());
    for (const auto& n : notes_) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    return verdict;
  }

 private:
  std::string title_;
  bool ok_ = true;
  std::vector<std::string> notes_;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

bool within(double value, double target, double rel) {
  return std::abs(value / target - 1.0) <= rel;
}

int hardware_threads() {
  return std::max(1u, std::thread::hardware_concurrency());
}

struct Sweep {
  SweepResult result;
  double seconds = 0.0;
};

Sweep run_default(const std::string& name) {
  const Scenario s = default_scenario(name);
  const auto t0 = std::chrono::steady_clock::now();
  Sweep out;
  out.result = sweep_radial_orders(s, {1, 5, 10, 15, 20}, {hardware_threads()});
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

const QkdLinkBudget* budget_for(const SweepResult& r, int nr) {
  for (const auto& o : r.orders)
    if (o.radial_order == nr && o.ok) return &o.budget;
  return nullptr;
}

bool fig2(const Sweep& pn) {
  Criterion c("pass QBER: n_r=1 QBER >= 0.40, n_r=20 minimum QBER <= 0.15, runtime <= 10 min");
  const auto* b1 = budget_for(pn.result, 1);
  const auto* b20 = budget_for(pn.result, 20);
  c.check(b1 && b20, "Paris-Nice sweep produced n_r = 1 and 20");
  if (b1 && b20) {
    c.check(b1->mean_qber >= 0.40, fmt("n_r=1 pass-average QBER %.4f (>= 0.40)", b1->mean_qber));
    double qmin = 1.0;
    for (const auto& p : b20->points)
      if (!std::isnan(p.qber)) qmin = std::min(qmin, p.qber);
    c.check(qmin <= 0.15, fmt("n_r=20 pass-minimum QBER %.4f (<= 0.15)", qmin));
  }
  c.check(pn.seconds <= 600.0, fmt("runtime %.1f s for 5 orders at %.0f draws per bucket on %.0f thread(s)",
                                   pn.seconds, static_cast<double>(default_scenario().monte_carlo.draws),
                                   static_cast<double>(hardware_threads())));
  return c.report(1);
}

bool fig3(const Sweep& pn, const Sweep& nm) {
  Criterion c("key rates: no key for n_r in {1,5}; positive nondecreasing keys for {10,15,20}; K_FS(20) in 10..1000 bit/s");
  bool any = false;
  for (const auto* sw : {&pn, &nm}) {
    const std::string name = sw->result.config["name"].get<std::string>();
    bool ok = true;
    std::ostringstream line;
    line << name << ":";
    double prev_a = 0.0, prev_fs = 0.0;
    for (int nr : {1, 5, 10, 15, 20}) {
      const auto* b = budget_for(sw->result, nr);
      if (!b) {
        ok = false;
        line << " n_r=" << nr << " missing";
        continue;
      }
      const double ka = b->asymptotic_key_rate_bps, kfs = b->finite_size.rate_bps;
      line << " n_r=" << nr << " K_A=" << fmt("%.3g", ka) << " K_FS=" << fmt("%.3g", kfs);
      if (nr <= 5) {
        ok = ok && ka == 0.0 && kfs == 0.0;
      } else {
        ok = ok && ka > 0.0 && kfs > 0.0 && ka >= prev_a && kfs >= prev_fs;
        prev_a = ka;
        prev_fs = kfs;
      }
      if (nr == 20) ok = ok && kfs >= 10.0 && kfs <= 1000.0;
    }
    any = any || ok;
    c.check(ok, line.str());
  }
  // One scenario meeting every condition is enough.
  return c.report(2, any);
}

bool turbulence_laws() {
  Criterion c("turbulence scaling laws to 1e-9 and integrals against a trapezoid oracle to 0.1%");
  const auto p = default_daytime_profile();
  const double lambda = 1.55e-6;
  const double r0z = fried_parameter(p, 90 * deg, lambda);
  const double t0z = isoplanatic_angle(p, 90 * deg, lambda);
  double worst_el = 0.0, worst_wl = 0.0;
  for (double el : {20.0, 30.0, 45.0, 60.0, 75.0}) {
    const double s = std::sin(el * deg);
    worst_el = std::max(worst_el, std::abs(fried_parameter(p, el * deg, lambda) / r0z / std::pow(s, 0.6) - 1.0));
    worst_el = std::max(worst_el, std::abs(isoplanatic_angle(p, el * deg, lambda) / t0z / std::pow(s, 1.6) - 1.0));
    for (double wl : {0.8e-6, 1.064e-6}) {
      const double k = std::pow(wl / lambda, 1.2);
      worst_wl = std::max(worst_wl, std::abs(fried_parameter(p, el * deg, wl) / fried_parameter(p, el * deg, lambda) / k - 1.0));
    }
  }
  c.check(worst_el <= 1e-9, fmt("elevation scaling worst relative error %.2e", worst_el));
  c.check(worst_wl <= 1e-9, fmt("wavelength scaling worst relative error %.2e", worst_wl));
  c.check(within(r0z, 0.106, 1e-3) && within(t0z, 25.8e-6, 1e-3),
          fmt("calibrated zenith r0 %.5f m, theta0 %.3f urad", r0z, t0z * 1e6));

  std::vector<oracle::Layer> layers;
  for (const auto& l : p.layers) layers.push_back({l.altitude_m, l.cn2, l.wind_ms});
  const auto m = oracle::trapezoid_moments(layers);
  double worst = 0.0;
  for (double el : {20.0, 45.0, 90.0}) {
    worst = std::max(worst, std::abs(fried_parameter(p, el * deg, lambda) / oracle::fried(m[0], el * deg, lambda) - 1.0));
    worst = std::max(worst, std::abs(isoplanatic_angle(p, el * deg, lambda) / oracle::isoplanatic(m[1], el * deg, lambda) - 1.0));
    worst = std::max(worst, std::abs(greenwood_frequency(p, el * deg, lambda) / oracle::greenwood(m[2], el * deg, lambda) - 1.0));
  }
  c.check(worst <= 1e-3, fmt("r0, theta0, f_G against trapezoid oracle: worst relative error %.2e", worst));
  return c.report(3);
}

bool ao_oracles() {
  Criterion c("AO oracles: residual variances within 2%; flat coupling max 0.81 at ratio 0.71 within 1%; Marechal within 15%");
  const ZernikeBasis basis(40, 128);
  const Eigen::VectorXd v = kolmogorov_mode_variances(basis, 1.0);
  const double pr = oracle::piston_removed_variance();
  const double tt = pr - 2.0 * oracle::tilt_variance();
  const double pr_lib = v.sum(), tt_lib = v.sum() - v[0] - v[1];
  c.check(within(pr_lib, pr, 0.02), fmt("piston-removed: model %.4f, oracle %.4f rad^2 (ref 1.0299)", pr_lib, pr));
  c.check(within(tt_lib, tt, 0.02), fmt("tip/tilt-removed: model %.4f, oracle %.4f rad^2 (ref 0.134)", tt_lib, tt));

  const auto [w_oracle, eta_oracle] = oracle::flat_coupling_optimum();
  const double w_lib = optimal_fiber_mode_ratio();
  const double eta_lib = coupling_efficiency(Eigen::VectorXd::Zero(basis.size()), basis, w_lib);
  c.check(within(eta_lib, 0.81, 0.01), fmt("maximum flat coupling %.4f (oracle %.4f), target 0.81", eta_lib, eta_oracle));
  c.check(within(w_lib, 0.71, 0.01),
          fmt("optimal 1/e^2 mode radius / pupil radius %.4f (oracle %.4f), target 0.71", w_lib, w_oracle));
  c.check(within(w_lib, w_oracle, 1e-6), "model optimum agrees with the 1-D quadrature oracle");

  for (double s2 : {0.1, 0.25, 0.5}) {
    Eigen::VectorXd r = v;
    for (int i = 0; i < basis.size(); ++i)
      if (basis.modes()[i].n < 2) r[i] = 0.0;
    r *= s2 / r.sum();
    const auto dist = sample_coupling(basis, budget_from_residuals(r), 4000, 17);
    const double expected = eta_lib * std::exp(-s2);
    c.check(within(dist.mean, expected, 0.15),
            fmt("sigma^2 = %.2f: mean coupling %.4f vs Marechal %.4f", s2, dist.mean, expected));
  }
  return c.report(4);
}

bool mellin() {
  Criterion c("transmittance product law: KS < 0.01 against product sampling at 1e5; mean-product law within 0.1%; uniform x uniform within 1e-2");
  BeamGeometry g;
  g.range_m = 900e3;
  const auto bw = beam_wander_distribution(g);

  const ZernikeBasis basis(40, 128);
  IntegratedTurbulence turb;
  turb.r0_m = 0.08;
  turb.theta0_rad = 20e-6;
  turb.greenwood_hz = 35.0;
  turb.elevation_rad = 40 * deg;
  turb.wavelength_m = 1.55e-6;
  AoConfig cfg;
  cfg.corrected_radial_orders = 10;
  const auto ao = estimate_p_ao(basis, cfg, turb, g.aperture_diameter_m, 10000, 3);
  const double factor = 0.3 * atmospheric_transmittance(40 * deg, 0.9);
  const auto p = pdte(bw, ao, factor);

  c.check(within(p.mean(), bw.mean() * ao.mean * factor, 1e-3),
          fmt("mean %.6e vs product of means %.6e", p.mean(), bw.mean() * ao.mean * factor));

  const auto model = beam_wander_model(g.waist_m(), 0.5 * g.aperture_diameter_m);
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> jitter(0.0, g.pointing_jitter_rad * g.range_m);
  std::uniform_int_distribution<std::size_t> pick(0, ao.samples.size() - 1);
  std::vector<double> product(100000);
  for (auto& x : product) x = model(std::hypot(jitter(rng), jitter(rng))) * ao.samples[pick(rng)] * factor;
  const double ks = oracle::ks_distance(product, [&](double t) { return p.cdf(t); });
  c.check(ks < 0.01, fmt("KS distance %.4f", ks));

  TransmittanceDistribution u;
  const auto& t = u.tau();
  const int n = u.points();
  u.add_mass(0.0, 0.5 * t[1]);
  for (int i = 1; i < n; ++i) u.add_mass(t[i], 0.5 * ((i + 1 < n ? t[i + 1] : t[i]) - t[i - 1]));
  const auto uu = pdte(u, u, 1.0);
  const auto d = uu.density();
  double worst = 0.0;
  for (int i = 1; i < n - 1; ++i) {
    if (t[i] < 1e-12 || t[i] > 0.999) continue;
    worst = std::max(worst, std::abs(d[i] + std::log(t[i])) / std::max(1.0, -std::log(t[i])));
  }
  c.check(worst < 1e-2, fmt("uniform x uniform against -ln(tau): worst error %.2e", worst));
  return c.report(5);
}

bool qkd_suite() {
  Criterion c("rate equations: unit examples; finite-size limit at C_T = 1e12 within 1e-3; penalty 100.66 bits within 1e-2");
  const QkdParams p;
  QkdParams clean = p;
  clean.dark_rate_a_hz = clean.dark_rate_b_hz = 0.0;
  clean.detector_efficiency_a = clean.detector_efficiency_b = 1.0;

  c.check(binary_entropy(0.5) == 1.0 && binary_entropy(0.0) == 0.0 && binary_entropy(1.0) == 0.0,
          "h2(0.5) = 1, h2(0) = h2(1) = 0");
  c.check(std::abs(binary_entropy(0.11) - 0.4999) < 1e-4, fmt("h2(0.11) = %.5f", binary_entropy(0.11)));

  const LinkInstant dark = coincidence_probabilities(p, 0.0, 0.0);
  c.check(within(dark.y0a, 2.09998e-5, 1e-5), fmt("y0 = %.6e", dark.y0a));
  c.check(within(dark.p0, 0.994316, 1e-6), fmt("p0 = %.6f", dark.p0));
  const LinkInstant lossless = coincidence_probabilities(clean, 1.0, 1.0);
  c.check(lossless.Y1 == 1.0 && lossless.Y0 == 0.0, "lossless noiseless: Y1 = 1, Y0 = 0");

  c.check(coincidence_rate(LinkInstant{}, p) == 0.0, "Y0 = Y1 = 0 gives R_c = 0");
  const double rc_clean = coincidence_rate(lossless, clean);
  c.check(within(rc_clean, (1.0 - lossless.p0) / clean.coincidence_window_s, 1e-12) &&
              within(rc_clean, clean.pair_rate_hz, 5e-3),
          fmt("noiseless lossless R_c = %.6e /s", rc_clean));
  const double floor = coincidence_rate(dark, p);
  c.check(within(floor, dark.y0a * dark.y0b / p.coincidence_window_s, 1e-12) && within(floor, 0.88, 6e-3),
          fmt("background-only R_c = %.4f /s", floor));

  c.check(within(qber(dark, p), 0.5, 1e-12), "tau = 0 gives e = 0.5");
  c.check(within(qber(lossless, clean), clean.e_d, 1e-12), "signal only gives e = e_d");
  {
    QkdParams r = p;
    r.e_d = 0.0;
    LinkInstant li;
    li.p0 = 0.0;
    li.eta_a = li.eta_b = 0.5;
    li.y1a = li.y1b = 1.0;
    li.Y1 = 0.5;
    c.check(within(error_mass(li, r) / coincidence_mass(li), 0.25, 1e-12), "equal signal and accidental masses give e = 0.25");
  }

  c.check(within(asymptotic_key_rate(1000.0, 0.0, p), 500.0, 1e-12), "e = 0 gives K_A = R_c / 2");
  c.check(asymptotic_key_rate(1000.0, 0.5, p) == 0.0, "e = 0.5 gives K_A = 0");
  c.check(within(asymptotic_key_rate(1.0, 0.05, p), 0.1907, 1e-3),
          fmt("f_ec = 1.16, e = 0.05: K_A / R_c = %.5f", asymptotic_key_rate(1.0, 0.05, p)));

  const auto zero = finite_size_key_rate(0.0, 0.05, 100.0, p);
  c.check(zero.rate_bps == 0.0 && zero.flagged, "C_T = 0 gives K_FS = 0, flagged");
  const double limit = 1.0 - (1.0 + p.f_ec) * oracle::binary_entropy(0.05);
  const auto big = finite_size_key_rate(1e12, 0.05, 1.0, p);
  c.check(std::abs(big.rate_bps / 1e12 - limit) < 1e-3,
          fmt("C_T = 1e12: K_FS T_v / C_T = %.6f, limit %.6f", big.rate_bps / 1e12, limit));
  c.check(std::abs(finite_size_penalty(p) - 100.66) < 1e-2, fmt("penalty %.4f bits", finite_size_penalty(p)));

  const std::vector<PassPoint> one{PassPoint{TrajectoryPoint{0, 1e6, 0.6, 1e6, 0.6}, 1.0,
                                             TransmittanceDistribution::point_mass(2e-3),
                                             TransmittanceDistribution::point_mass(1e-3)}};
  const auto b = pass_budget(one, p);
  const LinkInstant li = coincidence_probabilities(p, 2e-3, 1e-3);
  c.check(within(b.points[0].coincidence_rate_cps, coincidence_rate(li, p), 1e-12) &&
              within(b.points[0].qber, qber(li, p), 1e-12),
          "single point with point-mass PDTEs matches the scalar pipeline");
  const std::vector<PassPoint> none{PassPoint{TrajectoryPoint{0, 1e6, 0.6, 1e6, 0.6}, 1.0,
                                              TransmittanceDistribution::point_mass(0.0),
                                              TransmittanceDistribution::point_mass(0.0)}};
  const auto bz = pass_budget(none, p);
  c.check(within(bz.mean_qber, 0.5, 1e-12) && bz.asymptotic_key_rate_bps == 0.0 && bz.finite_size.rate_bps == 0.0,
          "all-zero transmission gives e = 0.5 and no key");
  return c.report(6);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

bool determinism(const std::string& cli, const fs::path& work) {
  Criterion c("determinism: two sweeps with the same scenario and seed give byte-identical data files");
  fs::remove_all(work);
  fs::create_directories(work);
  Scenario s = default_scenario("paris-nice");
  s.monte_carlo.draws = 2000;
  s.monte_carlo.elevation_bucket_deg = 10.0;
  s.output_dir = "unused";
  {
    std::ofstream out(work / "scenario.json");
    out << scenario_to_json(s).dump(2);
  }
  auto run = [&](const std::string& dir, int threads) {
    const std::string cmd = "\"" + cli + "\" sweep \"" + (work / "scenario.json").string() +
                            "\" --orders 1,5,10,15,20 --seed 7 --threads " + std::to_string(threads) +
                            " --out-dir \"" + (work / dir).string() + "\" > \"" +
                            (work / (dir + ".log")).string() + "\" 2>&1";
    return std::system(cmd.c_str());
  };
  const int rc1 = run("first", 1);
  const int rc2 = run("second", 2);
  c.check(rc1 == 0 && rc2 == 0, fmt("CLI exit statuses %.0f and %.0f", static_cast<double>(rc1), static_cast<double>(rc2)));

  int compared = 0, identical = 0;
  if (fs::exists(work / "first")) {
    for (const auto& entry : fs::directory_iterator(work / "first")) {
      const auto name = entry.path().filename();
      if (name == "manifest.json") continue;
      ++compared;
      identical += fs::exists(work / "second" / name) &&
                   slurp(entry.path()) == slurp(work / "second" / name);
    }
  }
  c.check(compared == 7 && identical == compared,
          fmt("%.0f of %.0f data files identical (5 series, key-rate summary, trajectory)", static_cast<double>(identical), static_cast<double>(compared)));
  return c.report(7);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <satqkd-cli> [work-dir]\n", argv[0]);
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path work = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "satqkd_acceptance";

  std::printf("acceptance run, %d thread(s)\n", hardware_threads());
  std::fflush(stdout);
  bool ok = true;
  const Sweep pn = run_default("paris-nice");
  ok &= fig2(pn);
  const Sweep nm = run_default("nice-matera");
  ok &= fig3(pn, nm);
  ok &= turbulence_laws();
  ok &= ao_oracles();
  ok &= mellin();
  ok &= qkd_suite();
  ok &= determinism(cli, work);
  std::printf("acceptance %s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}
