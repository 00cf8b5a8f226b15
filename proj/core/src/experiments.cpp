#include "mflang/experiments.hpp"

#include <omp.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <exception>
#include <json.hpp>
#include <numeric>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

#include "mflang/error.hpp"
#include "mflang/io.hpp"
#include "mflang/rng.hpp"
#include "mflang/wasserstein.hpp"

namespace mflang {

// ---------------------------------------------------------------------------
// Fitting

namespace {

LogLinearFit ols(const std::vector<double>& x, const std::vector<double>& y) {
  LogLinearFit f;
  f.points = x.size();
  if (x.size() < 2) return f;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

}  // namespace

LogLinearFit fit_log_linear(std::span<const double> times, std::span<const double> values, double t_lo,
                            double t_hi) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < times.size() && i < values.size(); ++i) {
    if (times[i] < t_lo || times[i] > t_hi) continue;
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) continue;
    x.push_back(times[i]);
    y.push_back(std::log(values[i]));
  }
  return ols(x, y);
}

LogLinearFit fit_log_log(std::span<const double> xs, std::span<const double> ys) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0) || !std::isfinite(ys[i])) continue;
    x.push_back(std::log(xs[i]));
    y.push_back(std::log(ys[i]));
  }
  return ols(x, y);
}

// ---------------------------------------------------------------------------
// Kinetic constants

double kinetic_eta0(double lip_a, double mono_a, double lambda_b) {
  const double B = 2.0 + lip_a * lip_a / lambda_b + lambda_b + 4.0 * mono_a;
  const double disc = B * B - 16.0 * mono_a * lambda_b;
  // (B − √disc)/4 without cancellation.
  const double root = 4.0 * mono_a * lambda_b / (B + std::sqrt(std::max(disc, 0.0)));
  const double sb = std::sqrt(lambda_b);
  return std::min({root, 2.0 * mono_a, lambda_b * sb / (1.0 + 2.0 * sb)});
}

KineticConstants kinetic_constants_at(const KineticFields& fields, double eta, std::optional<double> epsilon) {
  fields.validate();
  const double A1 = fields.lip_a, lA = fields.mono_a, lB = fields.lambda_b;
  if (!(A1 > 0.0 && lA > 0.0 && lB > 0.0)) throw InputError("kinetic constants: need [A]_1, lambda_A, lambda_B > 0");
  if (!(eta >= 0.0)) throw InputError("kinetic constants: eta must be >= 0");
  KineticConstants k;
  k.eta = eta;
  k.epsilon = epsilon.value_or(lB);
  if (!(k.epsilon > 0.0)) throw InputError("kinetic constants: epsilon must be > 0");
  const double B = 2.0 + A1 * A1 / lB + lB + 4.0 * lA;
  k.root = 4.0 * lA * lB / (B + std::sqrt(std::max(B * B - 16.0 * lA * lB, 0.0)));
  k.eta0 = kinetic_eta0(A1, lA, lB);

  k.window_lo = eta < 2.0 * lA ? (2.0 + A1 * A1 / k.epsilon) / (2.0 * lA - eta) : std::numeric_limits<double>::infinity();
  k.window_hi = eta > 0.0 ? (2.0 * lB - 2.0 * eta - k.epsilon) / eta : std::numeric_limits<double>::infinity();
  const double lo = std::max(k.window_lo, 1.0 / std::sqrt(lB));
  if (std::isinf(k.window_hi)) {
    k.b = 2.0 * lo;
  } else {
    k.b = 0.5 * (lo + k.window_hi);
  }
  k.form = QuadraticForm{lB * k.b, k.b};
  k.slack_p = 2.0 * lB - 2.0 * eta - k.epsilon - eta * k.b;
  k.slack_v = (2.0 * lA - eta) * k.b - 2.0 - A1 * A1 / k.epsilon;
  k.first_form_p = A1 - (2.0 * lB - 2.0 * eta - eta * k.b);
  k.first_form_v = A1 - ((2.0 * lA - eta) * k.b - 2.0);

  std::ostringstream why;
  if (!(eta < 2.0 * lA)) {
    why << "eta = " << eta << " >= 2*lambda_A = " << 2.0 * lA;
  } else if (!(eta < k.eta0)) {
    why << "eta = gamma + [D]_1 = " << eta << " >= eta0 = " << k.eta0;
  } else if (!(lo < k.window_hi)) {
    why << "b-window (" << lo << ", " << k.window_hi << ") is empty";
  } else if (!k.form.positive_definite()) {
    why << "Q not positive definite: lambda_B*b^2 = " << lB * k.b * k.b << " <= 1";
  } else if (!(k.slack_p > 0.0 && k.slack_v > 0.0)) {
    why << "linear conditions not strict: slacks " << k.slack_p << ", " << k.slack_v;
  }
  k.violated = why.str();
  k.feasible = k.violated.empty();
  k.rate_C = k.feasible ? std::min(k.slack_p, k.slack_v) / (2.0 * k.form.max_eigenvalue()) : 0.0;
  return k;
}

KineticConstants select_kinetic_constants(const KineticFields& fields, double gamma, std::optional<double> epsilon) {
  if (!(gamma >= 0.0)) throw InputError("kinetic constants: gamma must be >= 0");
  return kinetic_constants_at(fields, gamma + fields.lip_d, epsilon);
}

// ---------------------------------------------------------------------------
// Report helpers

bool ExperimentReport::passed() const noexcept {
  return std::all_of(flags.begin(), flags.end(), [](const PassFlag& f) { return f.pass; });
}

const PassFlag* ExperimentReport::flag(const std::string& name) const noexcept {
  for (const auto& f : flags)
    if (f.name == name) return &f;
  return nullptr;
}

namespace {

template <class F>
void parallel_for(std::size_t count, int threads, F&& body) {
  std::vector<std::exception_ptr> errors(count);
  const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for num_threads(nt) schedule(static)
  for (long long i = 0; i < static_cast<long long>(count); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void add_flag(ExperimentReport& r, std::string name, bool pass, double value, double threshold, std::string detail) {
  r.flags.push_back({std::move(name), pass, value, threshold, std::move(detail)});
}

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(6);
  s << x;
  return s.str();
}

EmpiricalMeasure draw(const LawConfig& law, std::size_t n, std::uint64_t seed, std::uint32_t replica,
                      std::uint32_t role, std::uint32_t index = 0) {
  RngStream rng(seed, stream_id(replica, role, index));
  return sample_gaussian_cloud(n, law.mean.size(), law.mean, law.sd, rng);
}

// Reorders b so that (a_i, b_i) is an optimal W₂ pairing.
EmpiricalMeasure couple_optimally(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  const std::size_t n = a.size(), d = a.dim();
  std::vector<double> out(n * d);
  if (d == 1) {
    std::vector<std::size_t> ia(n), ib(n);
    std::iota(ia.begin(), ia.end(), 0);
    std::iota(ib.begin(), ib.end(), 0);
    std::stable_sort(ia.begin(), ia.end(), [&](auto i, auto j) { return a.coords()[i] < a.coords()[j]; });
    std::stable_sort(ib.begin(), ib.end(), [&](auto i, auto j) { return b.coords()[i] < b.coords()[j]; });
    for (std::size_t k = 0; k < n; ++k) out[ia[k]] = b.coords()[ib[k]];
  } else {
    const auto plan = w2_empirical_assignment(a, b);
    for (std::size_t i = 0; i < n; ++i) {
      const auto y = b.point(plan.assignment[i]);
      std::copy(y.begin(), y.end(), out.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
  }
  return EmpiricalMeasure(d, std::move(out));
}

// Points and measures on which declared constants are sampled.
AssumptionReport sample_assumptions(const EnergySpec& spec, std::size_t d, std::uint64_t seed) {
  std::vector<double> pts;
  if (d == 1) {
    for (int i = 0; i <= 40; ++i) pts.push_back(-4.0 + 0.2 * i);
  } else {
    RngStream rng(seed, stream_id(0, stream_role::kAuxiliary, 100));
    pts.resize(64 * d);
    for (double& x : pts) x = 2.0 * rng.next_normal();
  }
  const EmpiricalMeasure points(d, pts);
  std::vector<EmpiricalMeasure> measures;
  const double shifts[] = {-1.0, 0.0, 2.0};
  for (std::uint32_t j = 0; j < 3; ++j) {
    RngStream rng(seed, stream_id(0, stream_role::kAuxiliary, 101 + j));
    std::vector<double> mean(d, shifts[j]);
    measures.push_back(sample_gaussian_cloud(64, d, mean, 1.0 + 0.5 * j, rng));
  }
  return check_assumptions(spec, points, measures);
}

void record_assumptions(ExperimentReport& r, const AssumptionReport& a) {
  r.metrics["sampled_monotonicity_min"] = a.monotonicity_min;
  r.metrics["sampled_jacobian_min_eig"] = a.jacobian_min_eig;
  r.metrics["sampled_d2m_max"] = a.d2m_max;
  r.metrics["sampled_dm_lip_max"] = a.dm_lip_max;
  r.metrics["sampled_grad_at_zero_max"] = a.grad_at_zero_max;
  std::string detail = a.ok() ? "declared constants hold on samples" : "";
  for (const auto& v : a.violations) detail += (detail.empty() ? "" : "; ") + v;
  add_flag(r, "assumption_margins", a.ok(), std::min(a.monotonicity_margin, a.d2m_margin), 0.0, detail);
}

double sup_of(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs)
    if (std::isfinite(x)) m = std::max(m, x);
  return m;
}

void moment_flag(ExperimentReport& r, const std::vector<std::pair<std::string, CouplingTrace>>& traces, double alpha,
                 double beta) {
  double worst = std::numeric_limits<double>::infinity();
  bool ok = true;
  for (const auto& [label, tr] : traces) {
    const auto m = second_moment_bound_check(tr, alpha, beta);
    ok = ok && m.ok;
    for (double x : m.margin_a) worst = std::min(worst, x);
    for (double x : m.margin_b) worst = std::min(worst, x);
  }
  add_flag(r, "second_moment_bound", ok, worst, 0.0,
           "Gronwall moment bound with alpha=" + fmt(alpha) + ", beta=" + fmt(beta) + " within 3 standard errors");
}

double moment_factor(double m0, double alpha, double beta, double horizon) {
  if (beta < 0.0) return m0 - alpha / beta;
  if (beta == 0.0) return m0 + alpha * horizon;
  const double e = std::exp(beta * horizon);
  return m0 * e + alpha / beta * (e - 1.0);
}

std::string nlabel(std::size_t n) { return "n" + std::to_string(n); }

}  // namespace

// ---------------------------------------------------------------------------
// Over-damped contraction

ExperimentReport run_overdamped_contraction(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const EnergySpec spec = build_energy(cfg.energy);
  const auto& dc = spec.constants();
  const std::size_t d = cfg.dim(), n = cfg.n;
  if (cfg.couple_initial == "optimal" && d > 1 && n > kAssignmentCap)
    throw InputError("couple_initial: optimal pairing needs n <= " + std::to_string(kAssignmentCap));
  const RunOptions opt = cfg.run_options();

  ExperimentReport r;
  r.kind = cfg.kind;
  r.config_json = serialize_config(cfg);
  record_assumptions(r, sample_assumptions(spec, d, cfg.seed));

  const double kappa = dc.lambda - dc.d2m_bound;
  std::vector<CouplingTrace> runs(cfg.replicas);
  const bool same_init = cfg.init_a.position == cfg.init_b.position;
  parallel_for(cfg.replicas, cfg.threads, [&](std::size_t rep) {
    const auto id = static_cast<std::uint32_t>(rep);
    const auto a = draw(cfg.init_a.position, n, cfg.seed, id, stream_role::kInitialA);
    auto b = same_init ? a : draw(cfg.init_b.position, n, cfg.seed, id, stream_role::kInitialB);
    if (!same_init && cfg.couple_initial == "optimal") b = couple_optimally(a, b);
    runs[rep] = simulate_coupled_overdamped({0.0, a}, {0.0, b}, spec, opt, id);
  });

  // Pathwise envelope W₂²(t) <= e^{−2κt} W₂²(0), per replica.
  bool envelope_ok = true, envelope_checked = false;
  double envelope_worst = 0.0;
  for (const auto& tr : runs) {
    const double w0 = tr.w2_sq.empty() ? kNotAvailable : tr.w2_sq.front();
    if (!std::isfinite(w0)) continue;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      if (!std::isfinite(tr.w2_sq[i])) continue;
      envelope_checked = true;
      const double env = std::exp(-2.0 * kappa * tr.times[i]) * w0;
      if (env > 0.0) envelope_worst = std::max(envelope_worst, tr.w2_sq[i] / env);
      if (tr.w2_sq[i] > env * (1.0 + cfg.tol.envelope)) envelope_ok = false;
    }
  }

  const CouplingTrace avg = average_traces(runs);
  r.traces.emplace_back("coupled", avg);
  const bool degenerate = avg.size() == 0 || !(avg.mean_sq_dist.front() > 0.0);
  add_flag(r, "nondegenerate_trace", !degenerate, avg.size() ? avg.mean_sq_dist.front() : 0.0, 0.0,
           degenerate ? "initial states coincide: the coupled distance is identically zero" : "E|X-Y|^2 > 0 at t=0");

  const auto fit = fit_log_linear(avg.times, avg.mean_sq_dist, cfg.fit_lo * cfg.horizon, cfg.fit_hi * cfg.horizon);
  r.fitted_rate = -fit.slope;
  r.theoretical_rate_bound = 2.0 * kappa;
  r.metrics["fit_r_squared"] = fit.r_squared;
  r.metrics["fit_points"] = static_cast<double>(fit.points);
  const double threshold = r.theoretical_rate_bound * (1.0 - cfg.tol.rate);
  add_flag(r, "decay_rate", std::isfinite(r.fitted_rate) && r.fitted_rate >= threshold, r.fitted_rate, threshold,
           "fitted decay rate of E|X-Y|^2 vs 2(lambda - |D2mH|)(1 - tol)");
  add_flag(r, "w2_envelope", envelope_ok && envelope_checked, envelope_worst, 1.0 + cfg.tol.envelope,
           envelope_checked ? "max over replicas and times of W2^2(t) / (exp(-2 kappa t) W2^2(0))"
                            : "no W2 samples recorded (w2_every = 0)");

  const double G0 = dc.grad_at_zero;
  const double alpha = 2.0 * static_cast<double>(d) + 2.0 * G0;
  const double beta = -2.0 * (dc.lambda - G0);
  r.metrics["alpha"] = alpha;
  r.metrics["beta"] = beta;
  moment_flag(r, r.traces, alpha, beta);
  r.notes.push_back(cfg.couple_initial == "optimal"
                        ? "initial clouds paired by an optimal W2 assignment, so E|X_0-Y_0|^2 = W2^2 at t=0"
                        : "initial clouds paired by index");
  return r;
}

// ---------------------------------------------------------------------------
// Over-damped propagation of chaos

ExperimentReport run_overdamped_poc(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const EnergySpec spec = build_energy(cfg.energy);
  const auto& dc = spec.constants();
  const std::size_t d = cfg.dim();
  const RunOptions opt = cfg.run_options();
  const GaussianLaw law = to_law(cfg.init_a.position);

  ExperimentReport r;
  r.kind = cfg.kind;
  r.config_json = serialize_config(cfg);
  record_assumptions(r, sample_assumptions(spec, d, cfg.seed));

  const std::size_t nn = cfg.n_list.size(), R = cfg.replicas;
  std::vector<CouplingTrace> runs(nn * R);
  parallel_for(nn * R, cfg.threads, [&](std::size_t job) {
    const std::size_t k = job / R, rep = job % R;
    runs[job] = simulate_poc_overdamped(cfg.n_list[k], spec, law, opt, static_cast<std::uint32_t>(rep),
                                        cfg.closed_form);
  });

  const bool closed = cfg.closed_form && spec.linear_quadratic().has_value();
  r.notes.push_back(closed ? "nonlinear law: exact Gaussian mean/variance recursion (linear-quadratic energy)"
                           : "nonlinear law: reference particle system with n_ref = max(8192, 8n) independent "
                             "streams; bias O(delta_d(n_ref))");

  const double G0 = dc.grad_at_zero;
  const double alpha = 2.0 * static_cast<double>(d) + 2.0 * G0;
  const double beta = -2.0 * (dc.lambda - G0);
  const double beta1 = 3.0 * dc.d2m_bound - 2.0 * dc.lambda;
  const double m0 = law.second_moment();
  const double M = moment_factor(m0, alpha, beta, cfg.horizon);
  r.metrics["alpha"] = alpha;
  r.metrics["beta"] = beta;
  r.metrics["beta1"] = beta1;
  r.metrics["m0"] = m0;
  r.metrics["moment_factor"] = M;

  std::vector<double> ns, gaps, deltas, w2max;
  for (std::size_t k = 0; k < nn; ++k) {
    const CouplingTrace avg = average_traces(std::span<const CouplingTrace>(runs).subspan(k * R, R));
    const std::size_t n = cfg.n_list[k];
    PocRow row;
    row.n = n;
    row.sup_gap = sup_of(avg.mean_sq_dist);
    row.delta_d = delta_d(n, d);
    row.ratio = row.sup_gap / row.delta_d;
    r.poc_table.push_back(row);
    ns.push_back(static_cast<double>(n));
    gaps.push_back(row.sup_gap);
    deltas.push_back(row.delta_d);
    w2max.push_back(sup_of(avg.w2_sq));
    r.traces.emplace_back(nlabel(n), avg);
  }

  const bool uniform = beta < 0.0 && beta1 < 0.0;
  std::string branch;
  if (uniform) {
    branch = "uniform (beta < 0, beta1 < 0)";
  } else if (beta < 0.0) {
    branch = "finite-horizon alpha_1 (beta < 0, beta1 >= 0)";
  } else if (beta == 0.0) {
    branch = "finite-horizon alpha_2 (beta = 0)";
  } else {
    branch = "finite-horizon alpha_3 (beta > 0)";
  }
  r.notes.push_back("bound branch: " + branch);
  if (spec.declares_contraction())
    add_flag(r, "uniform_branch", uniform, beta1, 0.0, "beta1 = 3|D2mH| - 2 lambda recomputed from declared constants");

  if (spec.interaction_free()) {
    r.notes.push_back("no interaction: gaps sit at the nonlinear-law error floor, slope test skipped");
  } else {
    const auto fit = fit_log_log(ns, gaps);
    const auto ref = fit_log_log(ns, deltas);
    r.fitted_scaling_slope = fit.slope;
    r.metrics["expected_slope"] = ref.slope;
    add_flag(r, "scaling_slope", std::isfinite(fit.slope) && std::abs(fit.slope - ref.slope) <= cfg.tol.slope,
             fit.slope, ref.slope,
             "log-log slope of sup_t gap vs n within +-" + fmt(cfg.tol.slope) + " of the delta_d(n) slope");
  }

  // C(d) fitted from E W2^2(copies, law) <= C(d) M delta_d(n); then the
  // printed gap bound with alpha_i = |D2mH| C(d) M delta_d(n).
  double Cd = 0.0;
  for (std::size_t k = 0; k < nn; ++k)
    if (std::isfinite(w2max[k]) && M > 0.0) Cd = std::max(Cd, w2max[k] / (M * deltas[k]));
  r.metrics["fitted_C_d"] = Cd;
  bool bound_ok = true;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < nn; ++k) {
    const auto& tr = r.traces[k].second;
    const double ai = dc.d2m_bound * Cd * M * deltas[k];
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const double t = tr.times[i];
      double bound;
      if (uniform) {
        bound = -ai / beta1;
      } else if (beta1 != 0.0) {
        bound = ai / beta1 * (std::exp(beta1 * t) - 1.0);
      } else {
        bound = ai * t;
      }
      const double margin = bound + 3.0 * tr.mean_sq_dist_se[i] - tr.mean_sq_dist[i];
      worst = std::min(worst, margin);
      if (margin < 0.0) bound_ok = false;
    }
  }
  add_flag(r, "explicit_bound", bound_ok, worst, 0.0,
           "gap <= printed bound (" + branch + ") with fitted C(d) = " + fmt(Cd) + ", within 3 standard errors");
  moment_flag(r, r.traces, alpha, beta);
  return r;
}

// ---------------------------------------------------------------------------
// Kinetic

namespace {

double kinetic_gamma(const ExperimentConfig& cfg) {
  const auto& c = cfg.energy.constants;
  return cfg.kinetic.gamma.value_or(c.dm_lip + c.d2m_bound);
}

KineticConstants require_feasible(const ExperimentConfig& cfg, const KineticFields& fields, ExperimentReport& r) {
  const double gamma = kinetic_gamma(cfg);
  const auto k = select_kinetic_constants(fields, gamma, cfg.kinetic.epsilon);
  if (!k.feasible) throw InputError("kinetic constants infeasible: " + k.violated);
  r.metrics["gamma"] = gamma;
  r.metrics["eta"] = k.eta;
  r.metrics["eta0"] = k.eta0;
  r.metrics["b"] = k.b;
  r.metrics["epsilon"] = k.epsilon;
  r.metrics["rate_C"] = k.rate_C;
  r.metrics["window_lo"] = k.window_lo;
  r.metrics["window_hi"] = k.window_hi;
  return k;
}

void kinetic_field_flag(ExperimentReport& r, const KineticFields& fields, std::size_t d, std::uint64_t seed) {
  std::vector<double> pts;
  if (d == 1) {
    for (int i = 0; i <= 40; ++i) pts.push_back(-4.0 + 0.2 * i);
  } else {
    RngStream rng(seed, stream_id(0, stream_role::kAuxiliary, 200));
    pts.resize(64 * d);
    for (double& x : pts) x = 2.0 * rng.next_normal();
  }
  const auto rep = check_kinetic_fields(fields, EmpiricalMeasure(d, pts));
  std::string detail = rep.ok() ? "declared [A]_1, lambda_A, [D]_1 hold on samples" : "";
  for (const auto& v : rep.violations) detail += (detail.empty() ? "" : "; ") + v;
  add_flag(r, "kinetic_field_margins", rep.ok(), std::min({rep.mono_a_margin, rep.lip_a_margin, rep.lip_d_margin}),
           0.0, detail);
}

KineticState draw_kinetic(const InitConfig& init, std::size_t n, std::uint64_t seed, std::uint32_t replica,
                          std::uint32_t role) {
  return {0.0, draw(init.position, n, seed, replica, role, 0), draw(init.velocity, n, seed, replica, role, 1)};
}

// E[Q](t) for the deterministic linear difference system dp = v dt,
// dv = −(slope·v + λ_B p)dt, started from second-moment matrix m0.
std::vector<double> linear_oracle(const std::vector<double>& times, const Eigen::Matrix2d& m0, double slope,
                                  double lambda_b, const QuadraticForm& q) {
  Eigen::Matrix2d J;
  J << 0.0, 1.0, -lambda_b, -slope;
  Eigen::Matrix2d Q;
  Q << q.a, 1.0, 1.0, q.b;
  std::vector<double> out;
  for (double t : times) {
    const Eigen::Matrix2d E = (J * t).exp();
    out.push_back((Q * E * m0 * E.transpose()).trace());
  }
  return out;
}

}  // namespace

ExperimentReport run_kinetic_contraction(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const EnergySpec spec = build_energy(cfg.energy);
  const KineticFields fields = build_kinetic_fields(cfg.kinetic);
  const std::size_t d = cfg.dim(), n = cfg.n;
  const RunOptions opt = cfg.run_options();

  ExperimentReport r;
  r.kind = cfg.kind;
  r.config_json = serialize_config(cfg);
  const auto k = require_feasible(cfg, fields, r);
  kinetic_field_flag(r, fields, d, cfg.seed);

  const bool same_init = cfg.init_a == cfg.init_b;
  std::vector<CouplingTrace> runs(cfg.replicas);
  parallel_for(cfg.replicas, cfg.threads, [&](std::size_t rep) {
    const auto id = static_cast<std::uint32_t>(rep);
    const auto a = draw_kinetic(cfg.init_a, n, cfg.seed, id, stream_role::kInitialA);
    const auto b = same_init ? a : draw_kinetic(cfg.init_b, n, cfg.seed, id, stream_role::kInitialB);
    runs[rep] = simulate_coupled_kinetic(a, b, fields, spec, opt, k.form, id);
  });
  const CouplingTrace avg = average_traces(runs);
  r.traces.emplace_back("coupled", avg);
  const double lo = cfg.fit_lo * cfg.horizon, hi = cfg.fit_hi * cfg.horizon;
  const auto fit = fit_log_linear(avg.times, avg.q_form, lo, hi);
  r.fitted_rate = -fit.slope;
  r.theoretical_rate_bound = 2.0 * k.rate_C;
  r.metrics["fit_r_squared"] = fit.r_squared;
  add_flag(r, "q_decay", std::isfinite(fit.slope) && fit.slope < 0.0, fit.slope, 0.0,
           "log-linear slope of E[Q(p,v)] is negative");
  add_flag(r, "r_squared", std::isfinite(fit.r_squared) && fit.r_squared > cfg.tol.r_squared, fit.r_squared,
           cfg.tol.r_squared, "R^2 of the log-linear fit");
  const double threshold = r.theoretical_rate_bound * (1.0 - cfg.tol.rate);
  add_flag(r, "rate_envelope", std::isfinite(r.fitted_rate) && r.fitted_rate >= threshold, r.fitted_rate, threshold,
           "fitted decay rate of E[Q] vs 2C from the selected constants (one valid instantiation of C)");

  if (cfg.kinetic.control) {
    if (!fields.friction.is_linear()) {
      r.notes.push_back("linear control skipped: friction field is not linear");
    } else {
      KineticFields lin = fields;
      lin.perturbation = VectorField::zero();
      const EnergySpec free(TwoBody{ScalarField::zero(), ScalarField::zero()});
      std::vector<CouplingTrace> cruns(cfg.replicas);
      std::vector<Eigen::Matrix2d> m0s(cfg.replicas);
      parallel_for(cfg.replicas, cfg.threads, [&](std::size_t rep) {
        const auto id = static_cast<std::uint32_t>(rep);
        const auto a = draw_kinetic(cfg.init_a, n, cfg.seed, id, stream_role::kInitialA);
        const auto b = same_init ? a : draw_kinetic(cfg.init_b, n, cfg.seed, id, stream_role::kInitialB);
        Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
        for (std::size_t j = 0; j < n * d; ++j) {
          const double dp = a.positions.coords()[j] - b.positions.coords()[j];
          const double dv = a.velocities.coords()[j] - b.velocities.coords()[j];
          m(0, 0) += dp * dp;
          m(0, 1) += dp * dv;
          m(1, 1) += dv * dv;
        }
        m(1, 0) = m(0, 1);
        m0s[rep] = m / static_cast<double>(n);
        cruns[rep] = simulate_coupled_kinetic(a, b, lin, free, opt, k.form, id);
      });
      Eigen::Matrix2d m0 = Eigen::Matrix2d::Zero();
      for (const auto& m : m0s) m0 += m;
      m0 /= static_cast<double>(cfg.replicas);
      const CouplingTrace cavg = average_traces(cruns);
      const auto oracle = linear_oracle(cavg.times, m0, fields.friction.slope(), fields.lambda_b, k.form);
      const auto cfit = fit_log_linear(cavg.times, cavg.q_form, lo, hi);
      const auto ofit = fit_log_linear(cavg.times, oracle, lo, hi);
      const double rel = std::abs(cfit.slope - ofit.slope) / std::abs(ofit.slope);
      r.metrics["control_fitted_rate"] = -cfit.slope;
      r.metrics["control_oracle_rate"] = -ofit.slope;
      double maxdev = 0.0;
      for (std::size_t i = 0; i < oracle.size(); ++i)
        if (oracle[i] > 0.0) maxdev = std::max(maxdev, std::abs(cavg.q_form[i] - oracle[i]) / oracle[i]);
      r.metrics["control_max_rel_deviation"] = maxdev;
      CouplingTrace otr = cavg;
      otr.q_form = oracle;
      r.traces.emplace_back("control", cavg);
      r.traces.emplace_back("control_oracle", otr);
      add_flag(r, "linear_control", std::isfinite(rel) && rel <= cfg.tol.control, rel, cfg.tol.control,
               "relative gap between fitted and matrix-exponential oracle decay rates (H=0, D=0)");
    }
  }
  r.notes.push_back("initial clouds paired by index; Q = Q_{lambda_B b, b} with b = " + fmt(k.b));
  return r;
}

ExperimentReport run_kinetic_poc(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const EnergySpec spec = build_energy(cfg.energy);
  const KineticFields fields = build_kinetic_fields(cfg.kinetic);
  const std::size_t d = cfg.dim();
  const RunOptions opt = cfg.run_options();

  ExperimentReport r;
  r.kind = cfg.kind;
  r.config_json = serialize_config(cfg);
  require_feasible(cfg, fields, r);
  kinetic_field_flag(r, fields, d, cfg.seed);
  r.notes.push_back("nonlinear law: reference particle system with n_ref = max(8192, 8n) independent streams");

  const std::size_t nn = cfg.n_list.size(), R = cfg.replicas;
  std::vector<CouplingTrace> runs(nn * R);
  parallel_for(nn * R, cfg.threads, [&](std::size_t job) {
    const std::size_t k = job / R, rep = job % R;
    runs[job] = simulate_poc_kinetic(cfg.n_list[k], fields, spec, to_law(cfg.init_a.position),
                                     to_law(cfg.init_a.velocity), opt, static_cast<std::uint32_t>(rep));
  });

  std::vector<double> ns, gaps, deltas;
  bool plateau_ok = true;
  double plateau_worst = 0.0;
  for (std::size_t k = 0; k < nn; ++k) {
    const CouplingTrace avg = average_traces(std::span<const CouplingTrace>(runs).subspan(k * R, R));
    const std::size_t n = cfg.n_list[k];
    PocRow row{n, sup_of(avg.mean_sq_dist), delta_d(n, d), 0.0};
    row.ratio = row.sup_gap / row.delta_d;
    r.poc_table.push_back(row);
    ns.push_back(static_cast<double>(n));
    gaps.push_back(row.sup_gap);
    deltas.push_back(row.delta_d);
    {
      std::vector<double> late;
      for (std::size_t i = 0; i < avg.size() && i < avg.law_moment.size(); ++i)
        if (avg.times[i] >= 0.5 * cfg.horizon) late.push_back(avg.law_moment[i]);
      if (late.empty()) {
        plateau_ok = false;
      } else {
        const double mx = *std::max_element(late.begin(), late.end());
        std::nth_element(late.begin(), late.begin() + static_cast<std::ptrdiff_t>(late.size() / 2), late.end());
        const double med = late[late.size() / 2];
        const double dev = std::abs(mx - med) / med;
        plateau_worst = std::max(plateau_worst, dev);
        if (!(dev <= cfg.tol.plateau)) plateau_ok = false;
      }
    }
    r.traces.emplace_back(nlabel(n), avg);
  }
  if (spec.interaction_free()) {
    r.notes.push_back("no interaction: gaps sit at the nonlinear-law error floor, slope test skipped");
  } else {
    const auto fit = fit_log_log(ns, gaps);
    const auto ref = fit_log_log(ns, deltas);
    r.fitted_scaling_slope = fit.slope;
    r.metrics["expected_slope"] = ref.slope;
    add_flag(r, "scaling_slope", std::isfinite(fit.slope) && std::abs(fit.slope - ref.slope) <= cfg.tol.slope,
             fit.slope, ref.slope,
             "log-log slope of sup_t gap vs n within +-" + fmt(cfg.tol.slope) + " of the delta_d(n) slope");
  }
  add_flag(r, "moment_plateau", plateau_ok, plateau_worst, cfg.tol.plateau,
           "max over t in [T/2, T] of the law moment int(|p|^2+|v|^2) f_t relative to its median");
  return r;
}

// ---------------------------------------------------------------------------
// Fixed point

ExperimentReport run_fixed_point(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const EnergySpec spec = build_energy(cfg.energy);
  const auto& dc = spec.constants();
  ExperimentReport r;
  r.kind = cfg.kind;
  r.config_json = serialize_config(cfg);

  const double m = cfg.mu0.mean[0], s = cfg.mu0.sd;
  const auto gauss = [](double mean, double sd) {
    return [=](double x) { return std::exp(-0.5 * (x - mean) * (x - mean) / (sd * sd)) / sd; };
  };
  const GridMeasure1D mu0 = GridMeasure1D::sample(cfg.grid.lo, cfg.grid.hi, cfg.grid.m, gauss(m, s));
  PicardHistory h = picard_iterate(spec, mu0, cfg.picard_tol, cfg.max_iter);
  const GridMeasure1D& fixed = h.iterates.back();
  add_flag(r, "converged", h.converged, h.step_distances.empty() ? kNotAvailable : h.step_distances.back(),
           cfg.picard_tol, "Picard step W1 below tol after " + std::to_string(h.step_distances.size()) + " maps");
  r.metrics["iterations"] = static_cast<double>(h.step_distances.size());
  r.metrics["fixed_point_mean"] = fixed.mean();
  r.metrics["fixed_point_variance"] = fixed.variance();

  if (const auto lq = spec.linear_quadratic()) {
    const double var = 1.0 / (2.0 * (lq->a_v + lq->a_w));
    const double mean = lq->a_v != 0.0 ? -lq->b_v / (2.0 * lq->a_v) : 0.0;
    r.metrics["oracle_variance"] = var;
    r.metrics["oracle_mean"] = mean;
    const double err = std::abs(fixed.variance() - var);
    add_flag(r, "fixed_point_variance", err <= cfg.tol.fixed_point, err, cfg.tol.fixed_point,
             "|variance - 1/(2(a_V + a_W))| for the complete-the-square Gaussian");
  }
  const double residual = stationarity_residual(spec, fixed);
  add_flag(r, "stationarity_residual", residual < cfg.tol.residual, residual, cfg.tol.residual,
           "sup |(ln rho)' + D_mH(mu, x)| over interior nodes");

  const AssumptionReport a = sample_assumptions(spec, 1, cfg.seed);
  r.metrics["sampled_jacobian_min_eig"] = a.jacobian_min_eig;
  r.metrics["sampled_d2m_max"] = a.d2m_max;
  if (dc.lambda > 0.0) {
    const double envelope = dc.d2m_bound / dc.lambda;
    r.metrics["ratio_envelope"] = envelope;
    double max_ratio = 0.0;
    for (double x : h.ratio_estimates) max_ratio = std::max(max_ratio, x);
    r.metrics["max_picard_ratio"] = max_ratio;
    add_flag(r, "picard_ratio", max_ratio <= envelope + cfg.tol.picard_ratio_slack, max_ratio,
             envelope + cfg.tol.picard_ratio_slack, "max Picard step ratio vs |D2mH|/lambda + slack");

    if (cfg.ratio_pairs > 0) {
      RngStream rng(cfg.seed, stream_id(0, stream_role::kAuxiliary, 300));
      auto mixture = [&]() {
        const double m1 = -3.0 + 6.0 * rng.next_uniform(), m2 = -3.0 + 6.0 * rng.next_uniform();
        const double s1 = 0.3 + 1.2 * rng.next_uniform(), s2 = 0.3 + 1.2 * rng.next_uniform();
        const double w = rng.next_uniform();
        const auto g1 = gauss(m1, s1), g2 = gauss(m2, s2);
        return grid_normalize(GridMeasure1D::sample(cfg.grid.lo, cfg.grid.hi, cfg.grid.m,
                                                    [&](double x) { return w * g1(x) + (1.0 - w) * g2(x); }));
      };
      std::vector<std::pair<GridMeasure1D, GridMeasure1D>> pairs;
      for (std::size_t i = 0; i < cfg.ratio_pairs; ++i) {
        auto mu = mixture();
        auto nu = mixture();
        pairs.emplace_back(std::move(mu), std::move(nu));
      }
      std::vector<double> ratios(pairs.size());
      parallel_for(pairs.size(), cfg.threads,
                   [&](std::size_t i) { ratios[i] = contraction_ratio(spec, pairs[i].first, pairs[i].second); });
      const double worst = *std::max_element(ratios.begin(), ratios.end());
      r.metrics["max_contraction_ratio"] = worst;
      add_flag(r, "contraction_ratio", worst <= envelope + cfg.tol.ratio_slack, worst, envelope + cfg.tol.ratio_slack,
               "max over " + std::to_string(pairs.size()) +
                   " random mixture pairs of W1(Phi mu, Phi nu)/W1(mu, nu) vs |D2mH|/lambda + slack");
    }
  }
  r.picard = std::move(h);
  return r;
}

ExperimentReport run_kinetic_constants(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const KineticFields fields = build_kinetic_fields(cfg.kinetic);
  ExperimentReport r;
  r.kind = cfg.kind;
  r.config_json = serialize_config(cfg);
  const double gamma = kinetic_gamma(cfg);
  const double eta = cfg.kinetic.eta.value_or(gamma + fields.lip_d);
  const auto k = kinetic_constants_at(fields, eta, cfg.kinetic.epsilon);
  r.metrics["gamma"] = gamma;
  r.metrics["eta"] = k.eta;
  r.metrics["eta0"] = k.eta0;
  r.metrics["root"] = k.root;
  r.metrics["epsilon"] = k.epsilon;
  r.metrics["window_lo"] = k.window_lo;
  r.metrics["window_hi"] = k.window_hi;
  r.metrics["b"] = k.b;
  r.metrics["slack_p"] = k.slack_p;
  r.metrics["slack_v"] = k.slack_v;
  r.metrics["first_form_p"] = k.first_form_p;
  r.metrics["first_form_v"] = k.first_form_v;
  r.metrics["rate_C"] = k.rate_C;
  r.metrics["q_a"] = k.form.a;
  r.metrics["q_b"] = k.form.b;
  r.theoretical_rate_bound = 2.0 * k.rate_C;
  add_flag(r, "feasible", k.feasible, k.eta, k.eta0, k.feasible ? "eta < eta0 and the b-window is nonempty" : k.violated);
  add_flag(r, "window_nonempty", k.window_lo < k.window_hi, k.window_hi - k.window_lo, 0.0,
           "b-window (" + fmt(k.window_lo) + ", " + fmt(k.window_hi) + ")");
  return r;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case ExperimentKind::kContraction:
      return run_overdamped_contraction(cfg);
    case ExperimentKind::kPoc:
      return run_overdamped_poc(cfg);
    case ExperimentKind::kKineticContraction:
      return run_kinetic_contraction(cfg);
    case ExperimentKind::kKineticPoc:
      return run_kinetic_poc(cfg);
    case ExperimentKind::kFixedPoint:
      return run_fixed_point(cfg);
    case ExperimentKind::kKineticConstants:
      return run_kinetic_constants(cfg);
  }
  throw InputError("unknown experiment kind");
}

// ---------------------------------------------------------------------------
// Serialization

std::string trace_csv(const CouplingTrace& tr) {
  const bool q = !tr.q_form.empty();
  std::string out = q ? "t,mean_sq_dist,second_moment_a,second_moment_b,q_form\n"
                      : "t,mean_sq_dist,second_moment_a,second_moment_b\n";
  for (std::size_t i = 0; i < tr.size(); ++i) {
    out += format_double(tr.times[i]) + ',' + format_double(tr.mean_sq_dist[i]) + ',' +
           format_double(tr.second_moment_a[i]) + ',' + format_double(tr.second_moment_b[i]);
    if (q) out += ',' + format_double(tr.q_form[i]);
    out += '\n';
  }
  return out;
}

CouplingTrace read_trace_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  CouplingTrace tr;
  const std::size_t ct = t.column("t"), cm = t.column("mean_sq_dist"), ca = t.column("second_moment_a"),
                    cb = t.column("second_moment_b");
  const bool q = std::find(t.header.begin(), t.header.end(), "q_form") != t.header.end();
  for (const auto& row : t.rows) {
    tr.times.push_back(row.at(ct));
    tr.mean_sq_dist.push_back(row.at(cm));
    tr.second_moment_a.push_back(row.at(ca));
    tr.second_moment_b.push_back(row.at(cb));
    if (q) tr.q_form.push_back(row.at(t.column("q_form")));
  }
  return tr;
}

namespace {

std::string detail_csv(const CouplingTrace& tr) {
  std::string out = "t,mean_sq_dist_se,second_moment_a_se,second_moment_b_se,w2_sq,law_moment\n";
  auto at = [](const std::vector<double>& v, std::size_t i) { return i < v.size() ? v[i] : kNotAvailable; };
  for (std::size_t i = 0; i < tr.size(); ++i) {
    out += format_double(tr.times[i]) + ',' + format_double(at(tr.mean_sq_dist_se, i)) + ',' +
           format_double(at(tr.second_moment_a_se, i)) + ',' + format_double(at(tr.second_moment_b_se, i)) + ',' +
           format_double(at(tr.w2_sq, i)) + ',' + format_double(at(tr.law_moment, i)) + '\n';
  }
  return out;
}

nlohmann::json number(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

}  // namespace

void emit_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  using nlohmann::json;
  std::vector<std::string> files;
  if (report.traces.empty() && report.poc_table.empty() && !report.picard) {
    write_file_atomic(dir / "trace.csv", trace_csv(CouplingTrace{}));
    files.push_back("trace.csv");
  }
  for (const auto& [label, tr] : report.traces) {
    const std::string name = "trace_" + label + ".csv";
    write_file_atomic(dir / name, trace_csv(tr));
    write_file_atomic(dir / ("trace_" + label + "_detail.csv"), detail_csv(tr));
    files.push_back(name);
  }
  if (!report.poc_table.empty()) {
    std::string poc = "n,sup_gap,delta_d,ratio\n";
    for (const auto& row : report.poc_table)
      poc += std::to_string(row.n) + ',' + format_double(row.sup_gap) + ',' + format_double(row.delta_d) + ',' +
             format_double(row.ratio) + '\n';
    write_file_atomic(dir / "poc.csv", poc);
    files.push_back("poc.csv");
  }
  if (report.picard) {
    write_picard_csv(*report.picard, dir / "picard.csv");
    files.push_back("picard.csv");
  }

  json tests = json::object();
  for (const auto& f : report.flags)
    tests[f.name] = {{"pass", f.pass}, {"value", number(f.value)}, {"threshold", number(f.threshold)},
                     {"detail", f.detail}};
  json metrics = json::object();
  for (const auto& [k, v] : report.metrics) metrics[k] = number(v);
  json summary = {
      {"experiment", to_string(report.kind)},
      {"pass", report.passed()},
      {"fitted_rate", number(report.fitted_rate)},
      {"bound", number(report.theoretical_rate_bound)},
      {"fitted_scaling_slope", number(report.fitted_scaling_slope)},
      {"tests", tests},
      {"metrics", metrics},
      {"notes", report.notes},
      {"files", files},
      {"config", report.config_json.empty() ? json(nullptr) : json::parse(report.config_json)},
  };
  write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace mflang
