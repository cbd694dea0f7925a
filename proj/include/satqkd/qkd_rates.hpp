#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "satqkd/channel.hpp"
#include "satqkd/orbit.hpp"

namespace satqkd {

struct QkdParams {
  double pair_rate_hz = 11.4e6;
  double coincidence_window_s = 500e-12;
  double dark_rate_a_hz = 4.2e4;
  double dark_rate_b_hz = 4.2e4;
  double detector_efficiency_a = 0.85;
  double detector_efficiency_b = 0.85;
  double f_ec = 1.16;
  double e_d = 0.01;  // intrinsic pair error (source visibility)
  double e_0 = 0.5;   // error of a background-induced click
  double eps_sec = 1e-10;
  double eps_corr = 1e-10;

  void validate() const;
};

/// Detection probabilities within one coincidence window.
struct LinkInstant {
  double eta_a = 0.0, eta_b = 0.0;  // τ × detector efficiency
  double y0a = 0.0, y0b = 0.0;      // background click probability
  double y1a = 0.0, y1b = 0.0;      // 1 - y0
  double Y0 = 0.0;                  // coincidence given no pair
  double Y1 = 0.0;                  // coincidence given a pair
  double p0 = 0.0;                  // no pair emitted
};

double binary_entropy(double x);

LinkInstant coincidence_probabilities(const QkdParams& params, double tau_a, double tau_b);

/// p0 Y0 + (1 - p0) Y1
double coincidence_mass(const LinkInstant& instant);
/// p0 Y0 e0 + (1 - p0)[e0 Y1 - (e0 - ed) ηa ηb y1a y1b]
double error_mass(const LinkInstant& instant, const QkdParams& params);

double coincidence_rate(const LinkInstant& instant, const QkdParams& params);
/// Throws UndefinedQberError when the coincidence mass is zero.
double qber(const LinkInstant& instant, const QkdParams& params);

/// 1 - f_ec h2(e) - h2(e)
double key_fraction(double e, const QkdParams& params);
double asymptotic_key_rate(double coincidence_rate_cps, double e, const QkdParams& params);

/// log2(2 / (eps_corr eps_sec²)), bits.
double finite_size_penalty(const QkdParams& params);
/// sqrt((C+1) log2(1/eps_sec) / (4 C²))
double finite_size_deviation(double coincidences, const QkdParams& params);

struct FiniteSizeKey {
  double rate_bps = 0.0;
  double bracket_bits = 0.0;  // unclamped bracket, for diagnostics
  bool flagged = false;       // C_T = 0 or the inflated error reached 0.5
};

FiniteSizeKey finite_size_key_rate(double coincidences, double e, double visibility_time_s,
                                   const QkdParams& params);

struct PassPoint {
  TrajectoryPoint point;
  double duration_s = 1.0;
  TransmittanceDistribution pdte_a;
  TransmittanceDistribution pdte_b;
};

struct PointBudget {
  double t_s = 0.0;
  double duration_s = 0.0;
  double coincidence_rate_cps = 0.0;
  double qber = 0.0;  // NaN when no coincidence is possible
  double key_rate_bps = 0.0;
  double coincidence_mass = 0.0;
  double error_mass = 0.0;
};

struct QkdLinkBudget {
  std::vector<PointBudget> points;
  double total_coincidences = 0.0;  // C_T
  double visibility_time_s = 0.0;   // T_v
  double mean_qber = 0.0;           // coincidence-weighted
  double mean_coincidence_rate_cps = 0.0;
  double asymptotic_key_rate_bps = 0.0;  // K_A
  FiniteSizeKey finite_size;             // K_FS
};

/// Expected coincidence and error masses over independent channel transmissions.
PointBudget expected_point(const QkdParams& params, const TransmittanceDistribution& pdte_a,
                           const TransmittanceDistribution& pdte_b);

QkdLinkBudget pass_budget(std::span<const PassPoint> points, const QkdParams& params);

/// Per-point rows `t_s,Rc_cps,qber,Ka_bps`, a blank line, then the pass summary
/// `C_T,T_v,e_avg,K_A,K_FS`.
void write_results(std::ostream& out, const QkdLinkBudget& budget);

}  // namespace satqkd
