#include "mflang/dynamics.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "mflang/error.hpp"
#include "mflang/rng.hpp"
#include "mflang/wasserstein.hpp"

namespace mflang {

double QuadraticForm::operator()(std::span<const double> p, std::span<const double> v) const noexcept {
  double pp = 0.0, pv = 0.0, vv = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    pp += p[k] * p[k];
    pv += p[k] * v[k];
    vv += v[k] * v[k];
  }
  return a * pp + 2.0 * pv + b * vv;
}

double QuadraticForm::min_eigenvalue() const noexcept {
  const double half = 0.5 * (a + b);
  return half - std::sqrt(0.25 * (a - b) * (a - b) + 1.0);
}

double QuadraticForm::max_eigenvalue() const noexcept {
  const double half = 0.5 * (a + b);
  return half + std::sqrt(0.25 * (a - b) * (a - b) + 1.0);
}

double GaussianLaw::second_moment() const noexcept {
  double s = 0.0;
  for (double m : mean) s += m * m;
  return s + static_cast<double>(mean.size()) * sd * sd;
}

namespace {

void guard(std::span<const double> xs, std::size_t step, const char* what) {
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (!std::isfinite(xs[k]) || std::abs(xs[k]) > kDivergenceLimit)
      throw DivergenceError(step, std::string(what) + " coordinate " + std::to_string(k) + " = " +
                                      std::to_string(xs[k]) + " (reduce dt)");
  }
}

// One counter-based stream per particle; fill() draws d normals per particle.
class NoiseBank {
 public:
  NoiseBank(std::uint64_t seed, std::uint32_t replica, std::uint32_t role, std::size_t n, std::size_t d)
      : d_(d), buffer_(n * d) {
    streams_.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      streams_.emplace_back(seed, stream_id(replica, role, static_cast<std::uint32_t>(i)));
  }

  std::span<const double> fill() {
    for (std::size_t i = 0; i < streams_.size(); ++i)
      streams_[i].fill_normal(std::span<double>(buffer_.data() + i * d_, d_));
    return buffer_;
  }

 private:
  std::size_t d_;
  std::vector<RngStream> streams_;
  std::vector<double> buffer_;
};

double mean_sq(std::span<const double> xs, std::size_t n) {
  double s = 0.0;
  for (double x : xs) s += x * x;
  return s / static_cast<double>(n);
}

double mean_sq_gap(std::span<const double> a, std::span<const double> b, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s / static_cast<double>(n);
}

EmpiricalMeasure head(std::span<const double> xs, std::size_t d, std::size_t count) {
  return EmpiricalMeasure(d, std::vector<double>(xs.begin(), xs.begin() + count * d));
}

double w2_between(std::span<const double> a, std::span<const double> b, std::size_t d, std::size_t n,
                  std::size_t subsample) {
  if (d == 1) return w2_squared(head(a, 1, n), head(b, 1, n));
  const std::size_t m = std::min(n, subsample);
  return w2_squared(head(a, d, m), head(b, d, m));
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void push_row(CouplingTrace& tr, double t, double msd, double ma, double mb) {
  tr.times.push_back(t);
  tr.mean_sq_dist.push_back(msd);
  tr.mean_sq_dist_se.push_back(0.0);
  tr.second_moment_a.push_back(ma);
  tr.second_moment_a_se.push_back(0.0);
  tr.second_moment_b.push_back(mb);
  tr.second_moment_b_se.push_back(0.0);
}

std::vector<double> initial_cloud(const GaussianLaw& law, std::size_t n, std::uint64_t seed, std::uint32_t replica,
                                  std::uint32_t role) {
  RngStream rng(seed, stream_id(replica, role, 0));
  const auto cloud = sample_gaussian_cloud(n, law.dim(), law.mean, law.sd, rng);
  return {cloud.coords().begin(), cloud.coords().end()};
}

}  // namespace

std::size_t RunOptions::steps() const {
  if (!(dt > 0.0) || !(horizon > 0.0)) throw InputError("run options: dt and horizon must be > 0");
  return static_cast<std::size_t>(std::llround(horizon / dt));
}

std::size_t RunOptions::record_stride() const {
  const auto s = static_cast<long long>(std::llround(record_every / dt));
  return static_cast<std::size_t>(std::max(1LL, s));
}

void overdamped_update(const EnergySpec& spec, std::size_t dim, std::span<const double> x, double dt,
                       std::span<const double> noise, std::span<double> out, std::size_t step_index) {
  const EnergyAt at(spec, MeasureView{dim, x, {}});
  const double scale = std::sqrt(2.0 * dt);
  const std::size_t n = x.size() / dim;
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = x.subspan(i * dim, dim);
    auto oi = out.subspan(i * dim, dim);
    std::copy(xi.begin(), xi.end(), oi.begin());
    at.add_intrinsic_derivative(xi, -dt, oi);
    for (std::size_t k = 0; k < dim; ++k) oi[k] += scale * noise[i * dim + k];
  }
  guard(out, step_index, "particle");
}

void kinetic_update(const KineticFields& fields, const EnergySpec& spec, std::size_t dim, std::span<const double> p,
                    std::span<const double> v, double dt, std::span<const double> noise, std::span<double> p_out,
                    std::span<double> v_out, std::size_t step_index) {
  const EnergyAt at(spec, MeasureView{dim, p, {}});
  const double scale = std::sqrt(2.0 * dt);
  const std::size_t n = p.size() / dim;
  for (std::size_t i = 0; i < n; ++i) {
    const auto pi = p.subspan(i * dim, dim);
    const auto vi = v.subspan(i * dim, dim);
    auto po = p_out.subspan(i * dim, dim);
    auto vo = v_out.subspan(i * dim, dim);
    for (std::size_t k = 0; k < dim; ++k) {
      po[k] = pi[k] + vi[k] * dt;
      vo[k] = vi[k] - dt * fields.lambda_b * pi[k] + scale * noise[i * dim + k];
    }
    fields.friction.add(vi, -dt, vo);
    if (!fields.perturbation.is_zero()) fields.perturbation.add(pi, -dt, vo);
    at.add_intrinsic_derivative(pi, -dt, vo);
  }
  guard(p_out, step_index, "position");
  guard(v_out, step_index, "velocity");
}

OverdampedState step_overdamped(const OverdampedState& state, const EnergySpec& spec, double dt,
                                std::span<const double> noise, std::size_t step_index) {
  if (!(dt > 0.0)) throw InputError("step_overdamped: dt must be > 0");
  const auto x = state.cloud.coords();
  if (noise.size() != x.size()) throw InputError("step_overdamped: noise must hold n*d entries");
  std::vector<double> out(x.size());
  overdamped_update(spec, state.cloud.dim(), x, dt, noise, out, step_index);
  return {state.t + dt, EmpiricalMeasure(state.cloud.dim(), std::move(out))};
}

KineticState step_kinetic(const KineticState& state, const KineticFields& fields, const EnergySpec& spec, double dt,
                          std::span<const double> noise, std::size_t step_index) {
  if (!(dt > 0.0)) throw InputError("step_kinetic: dt must be > 0");
  const auto p = state.positions.coords();
  const auto v = state.velocities.coords();
  if (p.size() != v.size() || state.positions.dim() != state.velocities.dim())
    throw InputError("step_kinetic: positions and velocities must have the same shape");
  if (noise.size() != p.size()) throw InputError("step_kinetic: noise must hold n*d entries");
  const std::size_t d = state.positions.dim();
  std::vector<double> po(p.size()), vo(v.size());
  kinetic_update(fields, spec, d, p, v, dt, noise, po, vo, step_index);
  return {state.t + dt, EmpiricalMeasure(d, std::move(po)), EmpiricalMeasure(d, std::move(vo))};
}

CouplingTrace simulate_coupled_overdamped(const OverdampedState& init_a, const OverdampedState& init_b,
                                          const EnergySpec& spec, const RunOptions& opt, std::uint32_t replica) {
  const std::size_t n = init_a.cloud.size(), d = init_a.cloud.dim();
  if (init_b.cloud.size() != n || init_b.cloud.dim() != d)
    throw InputError("simulate_coupled_overdamped: initial states must have the same shape");
  const std::size_t steps = opt.steps(), stride = opt.record_stride();
  std::vector<double> a(init_a.cloud.coords().begin(), init_a.cloud.coords().end());
  std::vector<double> b(init_b.cloud.coords().begin(), init_b.cloud.coords().end());
  std::vector<double> a2(a.size()), b2(b.size());
  NoiseBank noise(opt.seed, replica, stream_role::kParticles, n, d);

  CouplingTrace tr;
  std::size_t records = 0;
  auto record = [&](std::size_t step) {
    push_row(tr, init_a.t + static_cast<double>(step) * opt.dt, mean_sq_gap(a, b, n), mean_sq(a, n), mean_sq(b, n));
    const bool w2 = opt.w2_every > 0 && records % opt.w2_every == 0;
    tr.w2_sq.push_back(w2 ? w2_between(a, b, d, n, opt.w2_subsample) : kNaN);
    ++records;
  };
  record(0);
  for (std::size_t s = 1; s <= steps; ++s) {
    const auto xi = noise.fill();
    overdamped_update(spec, d, a, opt.dt, xi, a2, s);
    overdamped_update(spec, d, b, opt.dt, xi, b2, s);
    a.swap(a2);
    b.swap(b2);
    if (s % stride == 0 || s == steps) record(s);
  }
  return tr;
}

std::size_t reference_size(std::size_t n) { return std::max<std::size_t>(8192, 8 * n); }

CouplingTrace simulate_poc_overdamped(std::size_t n, const EnergySpec& spec, const GaussianLaw& init,
                                      const RunOptions& opt, std::uint32_t replica, bool closed_form) {
  if (n < 2) throw InputError("simulate_poc_overdamped: n must be >= 2");
  const std::size_t d = init.dim();
  if (d == 0) throw InputError("simulate_poc_overdamped: initial law needs a mean vector");
  const std::size_t steps = opt.steps(), stride = opt.record_stride();
  const auto lq = closed_form ? spec.linear_quadratic() : std::nullopt;

  std::vector<double> x = initial_cloud(init, n, opt.seed, replica, stream_role::kInitialA);
  std::vector<double> copies = x;
  std::vector<double> x2(x.size()), c2(x.size());
  NoiseBank noise(opt.seed, replica, stream_role::kParticles, n, d);

  // Nonlinear law: reference particles, or the Gaussian mean/variance recursion.
  const std::size_t n_ref = reference_size(n);
  std::vector<double> ref, ref2;
  std::optional<NoiseBank> ref_noise;
  std::vector<double> law_mean = init.mean;
  double law_var = init.sd * init.sd;
  std::vector<double> std_quantiles;  // standard-normal points used to quantize the Gaussian law
  if (lq) {
    if (d == 1) {
      const boost::math::normal_distribution<double> z;
      for (std::size_t i = 0; i < n; ++i)
        std_quantiles.push_back(boost::math::quantile(z, (static_cast<double>(i) + 0.5) / static_cast<double>(n)));
    } else {
      RngStream rng(opt.seed, stream_id(replica, stream_role::kAuxiliary, 0));
      std_quantiles.resize(n * d);
      rng.fill_normal(std_quantiles);
    }
  } else {
    ref = initial_cloud(init, n_ref, opt.seed, replica, stream_role::kInitialReference);
    ref2.resize(ref.size());
    ref_noise.emplace(opt.seed, replica, stream_role::kReference, n_ref, d);
  }

  auto law_points = [&]() {
    std::vector<double> pts(n * d);
    if (lq) {
      const double sd = std::sqrt(law_var);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k)
          pts[i * d + k] = law_mean[k] + sd * std_quantiles[d == 1 ? i : i * d + k];
    } else if (d == 1) {
      const auto q = quantile_points(EmpiricalMeasure::line(ref), n);
      std::copy(q.coords().begin(), q.coords().end(), pts.begin());
    } else {
      std::copy(ref.begin(), ref.begin() + static_cast<std::ptrdiff_t>(n * d), pts.begin());
    }
    return pts;
  };

  CouplingTrace tr;
  std::size_t records = 0;
  auto record = [&](std::size_t step) {
    push_row(tr, static_cast<double>(step) * opt.dt, mean_sq_gap(x, copies, n), mean_sq(x, n), mean_sq(copies, n));
    if (lq) {
      double m2 = static_cast<double>(d) * law_var;
      for (double m : law_mean) m2 += m * m;
      tr.law_moment.push_back(m2);
    } else {
      tr.law_moment.push_back(mean_sq(ref, n_ref));
    }
    const bool w2 = opt.w2_every > 0 && records % opt.w2_every == 0;
    tr.w2_sq.push_back(w2 ? w2_between(copies, law_points(), d, n, opt.w2_subsample) : kNaN);
    ++records;
  };
  record(0);

  std::vector<double> drift(d);
  const double scale = std::sqrt(2.0 * opt.dt);
  for (std::size_t s = 1; s <= steps; ++s) {
    const auto xi = noise.fill();
    overdamped_update(spec, d, x, opt.dt, xi, x2, s);
    // Copies: drift frozen at the pre-step nonlinear law.
    {
      std::optional<EnergyAt> at;
      if (lq) {
        at.emplace(spec, MeasureView{d, law_mean, {}});
      } else {
        at.emplace(spec, MeasureView{d, ref, {}});
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto ci = std::span<const double>(copies).subspan(i * d, d);
        auto oi = std::span<double>(c2).subspan(i * d, d);
        std::copy(ci.begin(), ci.end(), oi.begin());
        at->add_intrinsic_derivative(ci, -opt.dt, oi);
        for (std::size_t k = 0; k < d; ++k) oi[k] += scale * xi[i * d + k];
      }
      guard(c2, s, "independent copy");
      if (lq) {
        at->intrinsic_derivative(law_mean, drift);
        const double contraction = 1.0 - opt.dt * 2.0 * (lq->a_v + lq->a_w);
        for (std::size_t k = 0; k < d; ++k) law_mean[k] -= opt.dt * drift[k];
        law_var = contraction * contraction * law_var + 2.0 * opt.dt;
      }
    }
    if (!lq) {
      overdamped_update(spec, d, ref, opt.dt, ref_noise->fill(), ref2, s);
      ref.swap(ref2);
    }
    x.swap(x2);
    copies.swap(c2);
    if (s % stride == 0 || s == steps) record(s);
  }
  return tr;
}

CouplingTrace simulate_coupled_kinetic(const KineticState& init_a, const KineticState& init_b,
                                       const KineticFields& fields, const EnergySpec& spec, const RunOptions& opt,
                                       const QuadraticForm& q, std::uint32_t replica) {
  fields.validate();
  const std::size_t n = init_a.positions.size(), d = init_a.positions.dim();
  for (const auto* m : {&init_a.velocities, &init_b.positions, &init_b.velocities}) {
    if (m->size() != n || m->dim() != d)
      throw InputError("simulate_coupled_kinetic: initial states must have the same shape");
  }
  const std::size_t steps = opt.steps(), stride = opt.record_stride();
  auto copy = [](const EmpiricalMeasure& m) { return std::vector<double>(m.coords().begin(), m.coords().end()); };
  std::vector<double> pa = copy(init_a.positions), va = copy(init_a.velocities);
  std::vector<double> pb = copy(init_b.positions), vb = copy(init_b.velocities);
  std::vector<double> pa2(pa.size()), va2(pa.size()), pb2(pa.size()), vb2(pa.size());
  NoiseBank noise(opt.seed, replica, stream_role::kParticles, n, d);

  CouplingTrace tr;
  std::vector<double> dp(d), dv(d);
  auto record = [&](std::size_t step) {
    double qsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) {
        dp[k] = pa[i * d + k] - pb[i * d + k];
        dv[k] = va[i * d + k] - vb[i * d + k];
      }
      qsum += q(dp, dv);
    }
    push_row(tr, init_a.t + static_cast<double>(step) * opt.dt, mean_sq_gap(pa, pb, n) + mean_sq_gap(va, vb, n),
             mean_sq(pa, n) + mean_sq(va, n), mean_sq(pb, n) + mean_sq(vb, n));
    tr.q_form.push_back(qsum / static_cast<double>(n));
    tr.w2_sq.push_back(kNaN);
  };
  record(0);
  for (std::size_t s = 1; s <= steps; ++s) {
    const auto xi = noise.fill();
    kinetic_update(fields, spec, d, pa, va, opt.dt, xi, pa2, va2, s);
    kinetic_update(fields, spec, d, pb, vb, opt.dt, xi, pb2, vb2, s);
    pa.swap(pa2);
    va.swap(va2);
    pb.swap(pb2);
    vb.swap(vb2);
    if (s % stride == 0 || s == steps) record(s);
  }
  return tr;
}

CouplingTrace simulate_poc_kinetic(std::size_t n, const KineticFields& fields, const EnergySpec& spec,
                                   const GaussianLaw& init_p, const GaussianLaw& init_v, const RunOptions& opt,
                                   std::uint32_t replica) {
  fields.validate();
  if (n < 2) throw InputError("simulate_poc_kinetic: n must be >= 2");
  const std::size_t d = init_p.dim();
  if (d == 0 || init_v.dim() != d) throw InputError("simulate_poc_kinetic: initial laws must share a dimension");
  const std::size_t steps = opt.steps(), stride = opt.record_stride();
  const std::size_t n_ref = reference_size(n);

  std::vector<double> p = initial_cloud(init_p, n, opt.seed, replica, stream_role::kInitialA);
  std::vector<double> v = initial_cloud(init_v, n, opt.seed, replica, stream_role::kInitialB);
  std::vector<double> cp = p, cv = v;
  std::vector<double> rp = initial_cloud(init_p, n_ref, opt.seed, replica, stream_role::kInitialReference);
  RngStream vel_rng(opt.seed, stream_id(replica, stream_role::kInitialReference, 1));
  const auto rv_cloud = sample_gaussian_cloud(n_ref, d, init_v.mean, init_v.sd, vel_rng);
  std::vector<double> rv(rv_cloud.coords().begin(), rv_cloud.coords().end());
  std::vector<double> p2(p.size()), v2(p.size()), cp2(p.size()), cv2(p.size()), rp2(rp.size()), rv2(rp.size());
  NoiseBank noise(opt.seed, replica, stream_role::kParticles, n, d);
  NoiseBank ref_noise(opt.seed, replica, stream_role::kReference, n_ref, d);

  CouplingTrace tr;
  auto record = [&](std::size_t step) {
    push_row(tr, static_cast<double>(step) * opt.dt, mean_sq_gap(p, cp, n) + mean_sq_gap(v, cv, n),
             mean_sq(p, n) + mean_sq(v, n), mean_sq(cp, n) + mean_sq(cv, n));
    tr.law_moment.push_back(mean_sq(rp, n_ref) + mean_sq(rv, n_ref));
    tr.w2_sq.push_back(kNaN);
  };
  record(0);

  const double scale = std::sqrt(2.0 * opt.dt);
  for (std::size_t s = 1; s <= steps; ++s) {
    const auto xi = noise.fill();
    kinetic_update(fields, spec, d, p, v, opt.dt, xi, p2, v2, s);
    {
      const EnergyAt at(spec, MeasureView{d, rp, {}});
      for (std::size_t i = 0; i < n; ++i) {
        const auto pi = std::span<const double>(cp).subspan(i * d, d);
        const auto vi = std::span<const double>(cv).subspan(i * d, d);
        auto po = std::span<double>(cp2).subspan(i * d, d);
        auto vo = std::span<double>(cv2).subspan(i * d, d);
        for (std::size_t k = 0; k < d; ++k) {
          po[k] = pi[k] + vi[k] * opt.dt;
          vo[k] = vi[k] - opt.dt * fields.lambda_b * pi[k] + scale * xi[i * d + k];
        }
        fields.friction.add(vi, -opt.dt, vo);
        if (!fields.perturbation.is_zero()) fields.perturbation.add(pi, -opt.dt, vo);
        at.add_intrinsic_derivative(pi, -opt.dt, vo);
      }
      guard(cp2, s, "independent copy position");
      guard(cv2, s, "independent copy velocity");
    }
    kinetic_update(fields, spec, d, rp, rv, opt.dt, ref_noise.fill(), rp2, rv2, s);
    p.swap(p2);
    v.swap(v2);
    cp.swap(cp2);
    cv.swap(cv2);
    rp.swap(rp2);
    rv.swap(rv2);
    if (s % stride == 0 || s == steps) record(s);
  }
  return tr;
}

CouplingTrace average_traces(std::span<const CouplingTrace> traces) {
  CouplingTrace out;
  if (traces.empty()) return out;
  const std::size_t len = traces.front().size();
  for (const auto& t : traces) {
    if (t.size() != len) throw InputError("average_traces: traces differ in length");
  }
  const double r = static_cast<double>(traces.size());
  auto column = [&](auto member, std::vector<double>& mean, std::vector<double>* se) {
    if ((traces.front().*member).empty()) return;
    mean.assign(len, 0.0);
    if (se) se->assign(len, 0.0);
    for (std::size_t i = 0; i < len; ++i) {
      double s = 0.0;
      for (const auto& t : traces) s += (t.*member)[i];
      const double m = s / r;
      mean[i] = m;
      if (se && traces.size() > 1) {
        double ss = 0.0;
        for (const auto& t : traces) ss += ((t.*member)[i] - m) * ((t.*member)[i] - m);
        (*se)[i] = std::sqrt(ss / (r - 1.0) / r);
      }
    }
  };
  out.times = traces.front().times;
  column(&CouplingTrace::mean_sq_dist, out.mean_sq_dist, &out.mean_sq_dist_se);
  column(&CouplingTrace::second_moment_a, out.second_moment_a, &out.second_moment_a_se);
  column(&CouplingTrace::second_moment_b, out.second_moment_b, &out.second_moment_b_se);
  column(&CouplingTrace::q_form, out.q_form, nullptr);
  column(&CouplingTrace::law_moment, out.law_moment, nullptr);
  column(&CouplingTrace::w2_sq, out.w2_sq, nullptr);
  return out;
}

MomentBoundReport second_moment_bound_check(const CouplingTrace& trace, double alpha, double beta) {
  MomentBoundReport r;
  if (trace.size() == 0) return r;
  if (trace.second_moment_a.size() != trace.size())
    throw InputError("second_moment_bound_check: trace has no second moments");
  const double t0 = trace.times.front();
  auto bound_at = [&](double m0, double t) {
    const double s = t - t0;
    if (beta == 0.0) return m0 + alpha * s;
    const double e = std::exp(beta * s);
    return m0 * e + alpha / beta * (e - 1.0);
  };
  const double m0a = trace.second_moment_a.front();
  const double m0b = trace.second_moment_b.empty() ? m0a : trace.second_moment_b.front();
  r.stationary_bound =
      beta < 0.0 ? std::max(m0a, m0b) - alpha / beta : std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const double t = trace.times[i];
    r.times.push_back(t);
    r.bound.push_back(bound_at(m0a, t));
    auto margin = [&](const std::vector<double>& m, const std::vector<double>& se, double m0) {
      if (m.empty()) return std::numeric_limits<double>::infinity();
      return bound_at(m0, t) + 3.0 * (se.empty() ? 0.0 : se[i]) - m[i];
    };
    r.margin_a.push_back(margin(trace.second_moment_a, trace.second_moment_a_se, m0a));
    r.margin_b.push_back(margin(trace.second_moment_b, trace.second_moment_b_se, m0b));
    if (r.margin_a.back() < 0.0 || r.margin_b.back() < 0.0) r.ok = false;
  }
  return r;
}

}  // namespace mflang
