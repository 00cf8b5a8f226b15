#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mflang/config.hpp"
#include "mflang/dynamics.hpp"
#include "mflang/energy.hpp"
#include "mflang/gibbs.hpp"

namespace mflang {

inline constexpr double kNotAvailable = std::numeric_limits<double>::quiet_NaN();

/// Ordinary least squares of log y on x.
struct LogLinearFit {
  double slope = kNotAvailable;
  double intercept = kNotAvailable;
  double r_squared = kNotAvailable;
  std::size_t points = 0;
};

/// Fit of log(values) against times restricted to [t_lo, t_hi]; non-positive
/// or non-finite values are skipped. Fewer than two points leave NaNs.
LogLinearFit fit_log_linear(std::span<const double> times, std::span<const double> values, double t_lo, double t_hi);
/// Slope of log y against log x.
LogLinearFit fit_log_log(std::span<const double> xs, std::span<const double> ys);

/// Kinetic constant selection for Q_{λ_B b, b}.
struct KineticConstants {
  double eta = 0.0;       // γ + [D]_1
  double eta0 = 0.0;      // min(root, 2λ_A, λ_B√λ_B / (1 + 2√λ_B))
  double root = 0.0;      // smaller root of 2η² − η(2 + [A]_1²/λ_B + λ_B + 4λ_A) + 2λ_Aλ_B
  double epsilon = 0.0;
  double window_lo = 0.0;  // (2 + [A]_1²/ε) / (2λ_A − η)
  double window_hi = 0.0;  // (2λ_B − 2η − ε) / η, +inf at η = 0
  double b = 0.0;
  double slack_p = 0.0;   // 2λ_B − 2η − ε − ηb
  double slack_v = 0.0;   // (2λ_A − η)b − 2 − [A]_1²/ε
  double first_form_p = 0.0;  // [A]_1 − (2λ_B − 2η − ηb), < 0 when satisfied
  double first_form_v = 0.0;  // [A]_1 − ((2λ_A − η)b − 2), < 0 when satisfied
  double rate_C = 0.0;        // E[Q_t] <= e^{−2Ct} E[Q_0]
  QuadraticForm form;
  bool feasible = false;
  std::string violated;  // empty when feasible
};

/// Smaller root of the feasibility polynomial, capped as above.
double kinetic_eta0(double lip_a, double mono_a, double lambda_b);
KineticConstants kinetic_constants_at(const KineticFields& fields, double eta, std::optional<double> epsilon = {});
KineticConstants select_kinetic_constants(const KineticFields& fields, double gamma,
                                          std::optional<double> epsilon = {});

struct PassFlag {
  std::string name;
  bool pass = false;
  double value = kNotAvailable;
  double threshold = kNotAvailable;
  std::string detail;
};

struct PocRow {
  std::size_t n = 0;
  double sup_gap = 0.0;
  double delta_d = 0.0;
  double ratio = 0.0;
};

struct ExperimentReport {
  ExperimentKind kind = ExperimentKind::kContraction;
  std::string config_json;
  std::vector<std::pair<std::string, CouplingTrace>> traces;  // label, trace
  double fitted_rate = kNotAvailable;
  double theoretical_rate_bound = kNotAvailable;
  std::vector<PocRow> poc_table;
  double fitted_scaling_slope = kNotAvailable;
  std::optional<PicardHistory> picard;
  std::vector<PassFlag> flags;
  std::map<std::string, double> metrics;
  std::vector<std::string> notes;

  bool passed() const noexcept;
  const PassFlag* flag(const std::string& name) const noexcept;
};

ExperimentReport run_overdamped_contraction(const ExperimentConfig& cfg);
ExperimentReport run_overdamped_poc(const ExperimentConfig& cfg);
ExperimentReport run_kinetic_contraction(const ExperimentConfig& cfg);
ExperimentReport run_kinetic_poc(const ExperimentConfig& cfg);
ExperimentReport run_fixed_point(const ExperimentConfig& cfg);
ExperimentReport run_kinetic_constants(const ExperimentConfig& cfg);
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// t,mean_sq_dist,second_moment_a,second_moment_b[,q_form]
std::string trace_csv(const CouplingTrace& trace);
CouplingTrace read_trace_csv(const std::filesystem::path& path);

/// Writes into directory `dir`: one trace CSV per trace (trace_<label>.csv,
/// or a header-only trace.csv when there are none) with a companion
/// trace_<label>_detail.csv of standard errors and W₂², poc.csv
/// (n,sup_gap,delta_d,ratio) for PoC runs, picard.csv for fixed-point runs,
/// and summary.json. Each file is written to a temporary name and renamed.
void emit_report(const ExperimentReport& report, const std::filesystem::path& dir);

}  // namespace mflang
