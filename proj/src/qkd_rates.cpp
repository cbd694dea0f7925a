#include "satqkd/qkd_rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "satqkd/errors.hpp"

namespace satqkd {

namespace {

void check_unit(double v, const char* field) {
  if (!(v >= 0.0 && v <= 1.0)) throw InvariantError(field, "must lie in [0, 1]");
}

void check_epsilon(double v, const char* field) {
  if (!(v > 0.0 && v < 1.0)) throw InvariantError(field, "must lie in (0, 1)");
}

}  // namespace

void QkdParams::validate() const {
  if (!(pair_rate_hz >= 0.0)) throw InvariantError("pair_rate_hz", "must be nonnegative");
  if (!(coincidence_window_s > 0.0))
    throw InvariantError("coincidence_window", "must be positive");
  if (!(dark_rate_a_hz >= 0.0)) throw InvariantError("dark_rate_a_hz", "must be nonnegative");
  if (!(dark_rate_b_hz >= 0.0)) throw InvariantError("dark_rate_b_hz", "must be nonnegative");
  check_unit(detector_efficiency_a, "detector_efficiency_a");
  check_unit(detector_efficiency_b, "detector_efficiency_b");
  if (!(f_ec >= 1.0)) throw InvariantError("f_ec", "must be >= 1");
  check_unit(e_d, "e_d");
  check_unit(e_0, "e_0");
  check_epsilon(eps_sec, "eps_sec");
  check_epsilon(eps_corr, "eps_corr");
}

double binary_entropy(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("binary entropy argument outside [0, 1]");
  if (x == 0.0 || x == 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

LinkInstant coincidence_probabilities(const QkdParams& params, double tau_a, double tau_b) {
  if (!(tau_a >= 0.0 && tau_a <= 1.0) || !(tau_b >= 0.0 && tau_b <= 1.0))
    throw DomainError("channel transmission outside [0, 1]");
  LinkInstant li;
  const double dt = params.coincidence_window_s;
  li.eta_a = tau_a * params.detector_efficiency_a;
  li.eta_b = tau_b * params.detector_efficiency_b;
  li.y0a = -std::expm1(-params.dark_rate_a_hz * dt);
  li.y0b = -std::expm1(-params.dark_rate_b_hz * dt);
  li.y1a = 1.0 - li.y0a;
  li.y1b = 1.0 - li.y0b;
  li.Y0 = li.y0a * li.y0b;
  li.Y1 = (li.y0a + li.eta_a * li.y1a) * (li.y0b + li.eta_b * li.y1b);
  li.p0 = std::exp(-params.pair_rate_hz * dt);
  return li;
}

double coincidence_mass(const LinkInstant& li) { return li.p0 * li.Y0 + (1.0 - li.p0) * li.Y1; }

double error_mass(const LinkInstant& li, const QkdParams& params) {
  const double signal = li.eta_a * li.eta_b * li.y1a * li.y1b;
  return li.p0 * li.Y0 * params.e_0 +
         (1.0 - li.p0) * (params.e_0 * li.Y1 - (params.e_0 - params.e_d) * signal);
}

double coincidence_rate(const LinkInstant& li, const QkdParams& params) {
  return coincidence_mass(li) / params.coincidence_window_s;
}

double qber(const LinkInstant& li, const QkdParams& params) {
  const double c = coincidence_mass(li);
  if (!(c > 0.0)) throw UndefinedQberError("no coincidences possible: QBER undefined");
  return std::clamp(error_mass(li, params) / c, 0.0, 1.0);
}

double key_fraction(double e, const QkdParams& params) {
  const double h = binary_entropy(e);
  return 1.0 - params.f_ec * h - h;
}

double asymptotic_key_rate(double coincidence_rate_cps, double e, const QkdParams& params) {
  if (!(coincidence_rate_cps >= 0.0)) throw DomainError("coincidence rate must be nonnegative");
  return std::max(0.0, 0.5 * coincidence_rate_cps * key_fraction(e, params));
}

double finite_size_penalty(const QkdParams& params) {
  return std::log2(2.0 / (params.eps_corr * params.eps_sec * params.eps_sec));
}

double finite_size_deviation(double coincidences, const QkdParams& params) {
  if (!(coincidences > 0.0)) return std::numeric_limits<double>::infinity();
  return std::sqrt((coincidences + 1.0) * std::log2(1.0 / params.eps_sec) /
                   (4.0 * coincidences * coincidences));
}

FiniteSizeKey finite_size_key_rate(double coincidences, double e, double visibility_time_s,
                                   const QkdParams& params) {
  if (!(coincidences >= 0.0)) throw DomainError("coincidence count must be nonnegative");
  if (!(visibility_time_s > 0.0)) throw DomainError("visibility time must be positive");
  if (!(e >= 0.0 && e <= 1.0)) throw DomainError("QBER outside [0, 1]");
  FiniteSizeKey k;
  if (coincidences == 0.0) {
    k.flagged = true;
    k.bracket_bits = -finite_size_penalty(params);
    return k;
  }
  double inflated = e + finite_size_deviation(coincidences, params);
  if (inflated >= 0.5) {
    inflated = 0.5;
    k.flagged = true;
  }
  k.bracket_bits = coincidences - coincidences * binary_entropy(inflated) -
                   coincidences * params.f_ec * binary_entropy(e) - finite_size_penalty(params);
  if (!k.flagged) k.rate_bps = std::max(0.0, k.bracket_bits / visibility_time_s);
  return k;
}

PointBudget expected_point(const QkdParams& params, const TransmittanceDistribution& pdte_a,
                           const TransmittanceDistribution& pdte_b) {
  // Both masses are bilinear in (τa, τb); with independent channels their
  // expectation factorises into per-channel grid integrals.
  const double mean_a = pdte_a.mean() / pdte_a.total_mass();
  const double mean_b = pdte_b.mean() / pdte_b.total_mass();
  const LinkInstant li = coincidence_probabilities(params, mean_a, mean_b);
  PointBudget p;
  p.coincidence_mass = coincidence_mass(li);
  p.error_mass = error_mass(li, params);
  p.coincidence_rate_cps = p.coincidence_mass / params.coincidence_window_s;
  p.qber = p.coincidence_mass > 0.0 ? std::clamp(p.error_mass / p.coincidence_mass, 0.0, 1.0)
                                    : std::numeric_limits<double>::quiet_NaN();
  p.key_rate_bps =
      p.coincidence_mass > 0.0 ? asymptotic_key_rate(p.coincidence_rate_cps, p.qber, params) : 0.0;
  return p;
}

QkdLinkBudget pass_budget(std::span<const PassPoint> points, const QkdParams& params) {
  params.validate();
  if (points.empty()) throw NoVisibilityError("pass has no points");
  QkdLinkBudget b;
  double coincidence_weight = 0.0, error_weight = 0.0;
  for (const auto& pp : points) {
    if (!(pp.duration_s > 0.0)) throw DomainError("point duration must be positive");
    PointBudget p = expected_point(params, pp.pdte_a, pp.pdte_b);
    p.t_s = pp.point.t_s;
    p.duration_s = pp.duration_s;
    b.total_coincidences += p.coincidence_rate_cps * pp.duration_s;
    b.visibility_time_s += pp.duration_s;
    coincidence_weight += p.coincidence_mass * pp.duration_s;
    error_weight += p.error_mass * pp.duration_s;
    b.points.push_back(p);
  }
  if (!(coincidence_weight > 0.0))
    throw UndefinedQberError("no coincidences possible anywhere in the pass");
  b.mean_qber = std::clamp(error_weight / coincidence_weight, 0.0, 1.0);
  b.mean_coincidence_rate_cps = b.total_coincidences / b.visibility_time_s;
  b.asymptotic_key_rate_bps = asymptotic_key_rate(b.mean_coincidence_rate_cps, b.mean_qber, params);
  b.finite_size =
      finite_size_key_rate(b.total_coincidences, b.mean_qber, b.visibility_time_s, params);
  return b;
}

void write_results(std::ostream& out, const QkdLinkBudget& budget) {
  std::ostringstream s;
  s.precision(10);
  s << "t_s,Rc_cps,qber,Ka_bps\n";
  for (const auto& p : budget.points)
    s << p.t_s << ',' << p.coincidence_rate_cps << ',' << p.qber << ',' << p.key_rate_bps << '\n';
  s << "\nC_T,T_v,e_avg,K_A,K_FS\n";
  s << budget.total_coincidences << ',' << budget.visibility_time_s << ',' << budget.mean_qber << ','
    << budget.asymptotic_key_rate_bps << ',' << budget.finite_size.rate_bps << '\n';
  out << s.str();
}

}  // namespace satqkd
