#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mflang/dynamics.hpp"
#include "mflang/energy.hpp"
#include "mflang/error.hpp"

namespace mflang {

enum class ExperimentKind { kContraction, kPoc, kKineticContraction, kKineticPoc, kFixedPoint, kKineticConstants };

std::string to_string(ExperimentKind kind);
/// Throws ConfigError(kUnknownKind) for anything but the six subcommand names.
ExperimentKind parse_kind(const std::string& name);

/// Config problems carry the JSON path of the offending field.
class ConfigError : public InputError {
 public:
  enum class Category { kMalformed, kUnknownKind, kMissingField, kUnknownField, kInvalidValue };

  ConfigError(Category category, std::string field, const std::string& what);

  Category category() const noexcept { return category_; }
  const std::string& field() const noexcept { return field_; }

 private:
  Category category_;
  std::string field_;
};

/// Catalog entry: zero, quadratic(a,b,c), quartic(a,b,c,d,e), cosine(eps,freq),
/// gaussian-well(depth,width).
struct PotentialConfig {
  std::string name = "zero";
  std::vector<double> params;

  friend bool operator==(const PotentialConfig&, const PotentialConfig&) = default;
};

struct KBodyConfig {
  int order = 2;
  double coef = 1.0;
  PotentialConfig pair;

  friend bool operator==(const KBodyConfig&, const KBodyConfig&) = default;
};

struct EnergyConfig {
  std::string family = "two-body";  // two-body | polynomial | internal
  PotentialConfig confinement;
  PotentialConfig interaction;              // two-body
  std::vector<KBodyConfig> interactions;    // polynomial
  std::vector<double> psi{0.0, 1.0};        // internal: ψ(t) = Σ psi[j] t^j
  PotentialConfig field;                    // internal
  DeclaredConstants constants;

  friend bool operator==(const EnergyConfig&, const EnergyConfig&) = default;
};

/// f(v)_k = slope·v_k + amplitude·sin(frequency·v_k)
struct VectorFieldConfig {
  double slope = 0.0;
  double amplitude = 0.0;
  double frequency = 0.0;

  friend bool operator==(const VectorFieldConfig&, const VectorFieldConfig&) = default;
};

struct KineticConfig {
  VectorFieldConfig friction{1.0, 0.0, 0.0};
  double lambda_b = 1.0;
  VectorFieldConfig perturbation;
  double lip_a = 1.0;
  double mono_a = 1.0;
  double lip_d = 0.0;
  std::optional<double> epsilon;  // default λ_B
  std::optional<double> gamma;    // default [D_mH]_1 + ‖D²_mH‖ from the energy
  std::optional<double> eta;      // kinetic-constants: evaluate the window at this η
  bool control = true;            // kinetic-contraction: run the linear control case

  friend bool operator==(const KineticConfig&, const KineticConfig&) = default;
};

struct LawConfig {
  std::vector<double> mean{0.0};
  double sd = 1.0;

  friend bool operator==(const LawConfig&, const LawConfig&) = default;
};

struct InitConfig {
  LawConfig position;
  LawConfig velocity;

  friend bool operator==(const InitConfig&, const InitConfig&) = default;
};

struct GridConfig {
  double lo = -10.0;
  double hi = 10.0;
  std::size_t m = 2001;

  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

struct Tolerances {
  double rate = 0.15;
  double slope = 0.15;
  double plateau = 0.1;
  double ratio_slack = 0.02;
  double picard_ratio_slack = 0.05;
  double fixed_point = 1e-3;
  double residual = 1e-3;
  double r_squared = 0.9;
  double control = 0.1;
  double envelope = 1e-9;

  friend bool operator==(const Tolerances&, const Tolerances&) = default;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kContraction;
  EnergyConfig energy;
  KineticConfig kinetic;

  std::size_t n = 256;
  std::vector<std::size_t> n_list;
  double dt = 1e-3;
  double horizon = 1.0;  // "T"
  double record_every = 0.01;
  std::size_t replicas = 1;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = OpenMP default

  InitConfig init_a;
  InitConfig init_b;
  std::string couple_initial = "optimal";  // optimal | index
  bool closed_form = true;                 // PoC: exact law for linear-quadratic energies
  double fit_lo = 0.2;                     // rate-fit window as fractions of T
  double fit_hi = 0.9;
  std::size_t w2_every = 1;
  std::size_t w2_subsample = 256;

  GridConfig grid;
  LawConfig mu0;
  double picard_tol = 1e-10;
  std::size_t max_iter = 200;
  std::size_t ratio_pairs = 0;

  Tolerances tol;
  std::string out_dir = "out";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

  std::size_t dim() const noexcept { return init_a.position.mean.size(); }
  RunOptions run_options() const;
};

ExperimentConfig parse_config_text(const std::string& json_text);
ExperimentConfig parse_config(const std::filesystem::path& path);
/// Full JSON with every default written out; parse_config_text inverts it.
std::string serialize_config(const ExperimentConfig& cfg);
/// Checks every value invariant; throws ConfigError naming the field.
void validate_config(const ExperimentConfig& cfg);

ScalarField build_potential(const PotentialConfig& p, const std::string& field = "potential");
EnergySpec build_energy(const EnergyConfig& e);
KineticFields build_kinetic_fields(const KineticConfig& k);
GaussianLaw to_law(const LawConfig& l);

}  // namespace mflang
