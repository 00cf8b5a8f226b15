#include "mflang/config.hpp"

#include <json.hpp>
#include <set>

#include "mflang/io.hpp"

namespace mflang {

using nlohmann::json;
using Category = ConfigError::Category;

ConfigError::ConfigError(Category category, std::string field, const std::string& what)
    : InputError(field.empty() ? what : field + ": " + what), category_(category), field_(std::move(field)) {}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kContraction:
      return "contraction";
    case ExperimentKind::kPoc:
      return "poc";
    case ExperimentKind::kKineticContraction:
      return "kinetic-contraction";
    case ExperimentKind::kKineticPoc:
      return "kinetic-poc";
    case ExperimentKind::kFixedPoint:
      return "fixed-point";
    case ExperimentKind::kKineticConstants:
      return "kinetic-constants";
  }
  return "?";
}

ExperimentKind parse_kind(const std::string& name) {
  for (auto k : {ExperimentKind::kContraction, ExperimentKind::kPoc, ExperimentKind::kKineticContraction,
                 ExperimentKind::kKineticPoc, ExperimentKind::kFixedPoint, ExperimentKind::kKineticConstants}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError(Category::kUnknownKind, "experiment", "unknown experiment kind '" + name + "'");
}

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw ConfigError(Category::kInvalidValue, field, what);
}

void read(const json& j, const std::string& path, double& out) {
  if (!j.is_number()) bad(path, "expected a number");
  out = j.get<double>();
}
void read(const json& j, const std::string& path, bool& out) {
  if (!j.is_boolean()) bad(path, "expected true or false");
  out = j.get<bool>();
}
void read(const json& j, const std::string& path, std::string& out) {
  if (!j.is_string()) bad(path, "expected a string");
  out = j.get<std::string>();
}
void read(const json& j, const std::string& path, std::uint64_t& out) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0))
    bad(path, "expected a nonnegative integer");
  out = j.get<std::uint64_t>();
}
static_assert(std::is_same_v<std::size_t, std::uint64_t>, "size_t fields are read as uint64");
void read(const json& j, const std::string& path, int& out) {
  if (!j.is_number_integer()) bad(path, "expected an integer");
  out = j.get<int>();
}
template <class T>
void read(const json& j, const std::string& path, std::vector<T>& out) {
  if (!j.is_array()) bad(path, "expected an array");
  out.clear();
  for (std::size_t i = 0; i < j.size(); ++i) {
    T v{};
    read(j[i], path + "[" + std::to_string(i) + "]", v);
    out.push_back(v);
  }
}
template <class T>
void read(const json& j, const std::string& path, std::optional<T>& out) {
  if (j.is_null()) {
    out.reset();
    return;
  }
  T v{};
  read(j, path, v);
  out = v;
}

// Object reader that rejects keys nobody asked for.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <class T>
  void opt(const char* key, T& out) {
    seen_.insert(key);
    if (j_.contains(key)) read(j_.at(key), join(path_, key), out);
  }

  template <class T>
  void req(const char* key, T& out) {
    if (!j_.contains(key)) throw ConfigError(Category::kMissingField, join(path_, key), "required field is missing");
    opt(key, out);
  }

  template <class F>
  void sub(const char* key, F&& f) {
    seen_.insert(key);
    if (j_.contains(key)) {
      Obj o(j_.at(key), join(path_, key));
      f(o);
      o.finish();
    }
  }

  const json* raw(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  const std::string& path() const { return path_; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(Category::kUnknownField, join(path_, it.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void parse_potential(Obj& o, PotentialConfig& p) {
  o.req("name", p.name);
  o.opt("params", p.params);
}

void parse_vector_field(Obj& o, VectorFieldConfig& v) {
  o.opt("slope", v.slope);
  o.opt("amplitude", v.amplitude);
  o.opt("frequency", v.frequency);
}

void parse_law(Obj& o, LawConfig& l) {
  o.opt("mean", l.mean);
  o.opt("sd", l.sd);
}

void parse_init(Obj& o, InitConfig& init) {
  o.sub("position", [&](Obj& s) { parse_law(s, init.position); });
  o.sub("velocity", [&](Obj& s) { parse_law(s, init.velocity); });
}

void parse_energy(Obj& o, EnergyConfig& e) {
  o.req("family", e.family);
  o.sub("confinement", [&](Obj& s) { parse_potential(s, e.confinement); });
  o.sub("interaction", [&](Obj& s) { parse_potential(s, e.interaction); });
  if (const json* list = o.raw("interactions")) {
    const std::string path = join(o.path(), "interactions");
    if (!list->is_array()) bad(path, "expected an array");
    e.interactions.clear();
    for (std::size_t i = 0; i < list->size(); ++i) {
      Obj s((*list)[i], path + "[" + std::to_string(i) + "]");
      KBodyConfig k;
      s.req("order", k.order);
      s.opt("coef", k.coef);
      s.sub("pair", [&](Obj& p) { parse_potential(p, k.pair); });
      s.finish();
      e.interactions.push_back(std::move(k));
    }
  }
  o.opt("psi", e.psi);
  o.sub("field", [&](Obj& s) { parse_potential(s, e.field); });
  o.sub("constants", [&](Obj& s) {
    s.opt("lambda", e.constants.lambda);
    s.opt("d2m_bound", e.constants.d2m_bound);
    s.opt("dm_lip", e.constants.dm_lip);
    s.opt("grad_at_zero", e.constants.grad_at_zero);
  });
}

json potential_json(const PotentialConfig& p) { return {{"name", p.name}, {"params", p.params}}; }
json vector_field_json(const VectorFieldConfig& v) {
  return {{"slope", v.slope}, {"amplitude", v.amplitude}, {"frequency", v.frequency}};
}
json law_json(const LawConfig& l) { return {{"mean", l.mean}, {"sd", l.sd}}; }
json init_json(const InitConfig& i) { return {{"position", law_json(i.position)}, {"velocity", law_json(i.velocity)}}; }
template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

void check_law(const LawConfig& l, const std::string& path, std::size_t dim) {
  if (l.mean.empty()) bad(path + ".mean", "needs at least one coordinate");
  if (l.mean.size() != dim) bad(path + ".mean", "dimension must match init_a.position.mean");
  if (!(l.sd >= 0.0)) bad(path + ".sd", "must be >= 0");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(Category::kMalformed, "", std::string("malformed JSON: ") + e.what());
  }
  ExperimentConfig c;
  Obj o(root, "");
  std::string kind;
  o.req("experiment", kind);
  c.kind = parse_kind(kind);

  if (c.kind == ExperimentKind::kKineticConstants) {
    o.sub("energy", [&](Obj& s) { parse_energy(s, c.energy); });
  } else {
    if (!o.has("energy")) throw ConfigError(Category::kMissingField, "energy", "required field is missing");
    o.sub("energy", [&](Obj& s) { parse_energy(s, c.energy); });
  }
  const bool kinetic = c.kind == ExperimentKind::kKineticContraction || c.kind == ExperimentKind::kKineticPoc ||
                       c.kind == ExperimentKind::kKineticConstants;
  if (kinetic && !o.has("kinetic")) throw ConfigError(Category::kMissingField, "kinetic", "required field is missing");
  o.sub("kinetic", [&](Obj& s) {
    s.sub("friction", [&](Obj& f) { parse_vector_field(f, c.kinetic.friction); });
    s.opt("lambda_b", c.kinetic.lambda_b);
    s.sub("perturbation", [&](Obj& f) { parse_vector_field(f, c.kinetic.perturbation); });
    s.opt("lip_a", c.kinetic.lip_a);
    s.opt("mono_a", c.kinetic.mono_a);
    s.opt("lip_d", c.kinetic.lip_d);
    s.opt("epsilon", c.kinetic.epsilon);
    s.opt("gamma", c.kinetic.gamma);
    s.opt("eta", c.kinetic.eta);
    s.opt("control", c.kinetic.control);
  });

  const bool poc = c.kind == ExperimentKind::kPoc || c.kind == ExperimentKind::kKineticPoc;
  const bool coupled = c.kind == ExperimentKind::kContraction || c.kind == ExperimentKind::kKineticContraction;
  if (poc) {
    o.req("n_list", c.n_list);
  } else {
    o.opt("n_list", c.n_list);
  }
  if (coupled) {
    o.req("n", c.n);
  } else {
    o.opt("n", c.n);
  }
  o.opt("dt", c.dt);
  o.opt("T", c.horizon);
  o.opt("record_every", c.record_every);
  o.opt("replicas", c.replicas);
  o.opt("seed", c.seed);
  o.opt("threads", c.threads);
  o.sub("init_a", [&](Obj& s) { parse_init(s, c.init_a); });
  o.sub("init_b", [&](Obj& s) { parse_init(s, c.init_b); });
  o.opt("couple_initial", c.couple_initial);
  o.opt("closed_form", c.closed_form);
  if (const json* w = o.raw("fit_window")) {
    std::vector<double> win;
    read(*w, "fit_window", win);
    if (win.size() != 2) bad("fit_window", "expected [lo, hi]");
    c.fit_lo = win[0];
    c.fit_hi = win[1];
  }
  o.opt("w2_every", c.w2_every);
  o.opt("w2_subsample", c.w2_subsample);
  o.sub("grid", [&](Obj& s) {
    s.opt("lo", c.grid.lo);
    s.opt("hi", c.grid.hi);
    s.opt("m", c.grid.m);
  });
  o.sub("mu0", [&](Obj& s) { parse_law(s, c.mu0); });
  o.opt("picard_tol", c.picard_tol);
  o.opt("max_iter", c.max_iter);
  o.opt("ratio_pairs", c.ratio_pairs);
  o.sub("tolerances", [&](Obj& s) {
    s.opt("rate", c.tol.rate);
    s.opt("slope", c.tol.slope);
    s.opt("plateau", c.tol.plateau);
    s.opt("ratio_slack", c.tol.ratio_slack);
    s.opt("picard_ratio_slack", c.tol.picard_ratio_slack);
    s.opt("fixed_point", c.tol.fixed_point);
    s.opt("residual", c.tol.residual);
    s.opt("r_squared", c.tol.r_squared);
    s.opt("control", c.tol.control);
    s.opt("envelope", c.tol.envelope);
  });
  o.opt("out_dir", c.out_dir);
  o.finish();
  validate_config(c);
  return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(Category::kMalformed, "", e.what());
  }
  return parse_config_text(text);
}

std::string serialize_config(const ExperimentConfig& c) {
  json interactions = json::array();
  for (const auto& k : c.energy.interactions)
    interactions.push_back({{"order", k.order}, {"coef", k.coef}, {"pair", potential_json(k.pair)}});
  const auto& dc = c.energy.constants;
  json j = {
      {"experiment", to_string(c.kind)},
      {"energy",
       {{"family", c.energy.family},
        {"confinement", potential_json(c.energy.confinement)},
        {"interaction", potential_json(c.energy.interaction)},
        {"interactions", interactions},
        {"psi", c.energy.psi},
        {"field", potential_json(c.energy.field)},
        {"constants",
         {{"lambda", dc.lambda}, {"d2m_bound", dc.d2m_bound}, {"dm_lip", dc.dm_lip}, {"grad_at_zero", dc.grad_at_zero}}}}},
      {"kinetic",
       {{"friction", vector_field_json(c.kinetic.friction)},
        {"lambda_b", c.kinetic.lambda_b},
        {"perturbation", vector_field_json(c.kinetic.perturbation)},
        {"lip_a", c.kinetic.lip_a},
        {"mono_a", c.kinetic.mono_a},
        {"lip_d", c.kinetic.lip_d},
        {"epsilon", optional_json(c.kinetic.epsilon)},
        {"gamma", optional_json(c.kinetic.gamma)},
        {"eta", optional_json(c.kinetic.eta)},
        {"control", c.kinetic.control}}},
      {"n", c.n},
      {"n_list", c.n_list},
      {"dt", c.dt},
      {"T", c.horizon},
      {"record_every", c.record_every},
      {"replicas", c.replicas},
      {"seed", c.seed},
      {"threads", c.threads},
      {"init_a", init_json(c.init_a)},
      {"init_b", init_json(c.init_b)},
      {"couple_initial", c.couple_initial},
      {"closed_form", c.closed_form},
      {"fit_window", {c.fit_lo, c.fit_hi}},
      {"w2_every", c.w2_every},
      {"w2_subsample", c.w2_subsample},
      {"grid", {{"lo", c.grid.lo}, {"hi", c.grid.hi}, {"m", c.grid.m}}},
      {"mu0", law_json(c.mu0)},
      {"picard_tol", c.picard_tol},
      {"max_iter", c.max_iter},
      {"ratio_pairs", c.ratio_pairs},
      {"tolerances",
       {{"rate", c.tol.rate},
        {"slope", c.tol.slope},
        {"plateau", c.tol.plateau},
        {"ratio_slack", c.tol.ratio_slack},
        {"picard_ratio_slack", c.tol.picard_ratio_slack},
        {"fixed_point", c.tol.fixed_point},
        {"residual", c.tol.residual},
        {"r_squared", c.tol.r_squared},
        {"control", c.tol.control},
        {"envelope", c.tol.envelope}}},
      {"out_dir", c.out_dir},
  };
  return j.dump(2) + "\n";
}

void validate_config(const ExperimentConfig& c) {
  if (!(c.dt > 0.0)) bad("dt", "must be > 0");
  if (!(c.horizon > 0.0)) bad("T", "must be > 0");
  if (!(c.record_every > 0.0)) bad("record_every", "must be > 0");
  if (c.replicas < 1) bad("replicas", "must be >= 1");
  if (c.threads < 0) bad("threads", "must be >= 0");
  if (c.n < 2) bad("n", "must be >= 2");
  for (std::size_t i = 0; i < c.n_list.size(); ++i) {
    if (c.n_list[i] < 2) bad("n_list[" + std::to_string(i) + "]", "must be >= 2");
    if (i > 0 && c.n_list[i] <= c.n_list[i - 1]) bad("n_list", "must be strictly increasing");
  }
  if ((c.kind == ExperimentKind::kPoc || c.kind == ExperimentKind::kKineticPoc) && c.n_list.empty())
    bad("n_list", "must not be empty");
  if (!(c.fit_lo >= 0.0 && c.fit_lo < c.fit_hi && c.fit_hi <= 1.0))
    bad("fit_window", "need 0 <= lo < hi <= 1 (fractions of T)");
  if (c.couple_initial != "optimal" && c.couple_initial != "index")
    bad("couple_initial", "must be 'optimal' or 'index'");
  if (c.w2_subsample < 2) bad("w2_subsample", "must be >= 2");

  const std::size_t d = c.dim();
  if (d == 0) bad("init_a.position.mean", "needs at least one coordinate");
  check_law(c.init_a.position, "init_a.position", d);
  check_law(c.init_a.velocity, "init_a.velocity", d);
  check_law(c.init_b.position, "init_b.position", d);
  check_law(c.init_b.velocity, "init_b.velocity", d);

  if (!(c.grid.lo < c.grid.hi)) bad("grid", "need lo < hi");
  if (c.grid.m < 3) bad("grid.m", "must be >= 3");
  if (c.mu0.mean.size() != 1) bad("mu0.mean", "fixed-point grids are one-dimensional");
  if (!(c.mu0.sd > 0.0)) bad("mu0.sd", "must be > 0");
  if (!(c.picard_tol > 0.0)) bad("picard_tol", "must be > 0");
  if (c.max_iter < 1) bad("max_iter", "must be >= 1");

  const auto& t = c.tol;
  for (auto [name, v] : {std::pair{"rate", t.rate}, {"slope", t.slope}, {"plateau", t.plateau},
                         {"ratio_slack", t.ratio_slack}, {"picard_ratio_slack", t.picard_ratio_slack},
                         {"fixed_point", t.fixed_point}, {"residual", t.residual}, {"r_squared", t.r_squared},
                         {"control", t.control}, {"envelope", t.envelope}}) {
    if (!(v >= 0.0)) bad(std::string("tolerances.") + name, "must be >= 0");
  }

  const auto& dc = c.energy.constants;
  for (auto [name, v] : {std::pair{"lambda", dc.lambda}, {"d2m_bound", dc.d2m_bound}, {"dm_lip", dc.dm_lip},
                         {"grad_at_zero", dc.grad_at_zero}}) {
    if (!(v >= 0.0)) bad(std::string("energy.constants.") + name, "must be >= 0");
  }
  try {
    (void)build_energy(c.energy);
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    bad("energy", e.what());
  }
  if (c.kind == ExperimentKind::kContraction && !(dc.lambda > dc.d2m_bound))
    bad("energy.constants.lambda", "contraction needs lambda > d2m_bound");

  const auto& k = c.kinetic;
  if (!(k.lambda_b > 0.0)) bad("kinetic.lambda_b", "must be > 0");
  if (!(k.lip_a > 0.0)) bad("kinetic.lip_a", "must be > 0");
  if (!(k.mono_a > 0.0)) bad("kinetic.mono_a", "must be > 0");
  if (!(k.lip_d >= 0.0)) bad("kinetic.lip_d", "must be >= 0");
  if (k.epsilon && !(*k.epsilon > 0.0)) bad("kinetic.epsilon", "must be > 0");
  if (k.gamma && !(*k.gamma >= 0.0)) bad("kinetic.gamma", "must be >= 0");
  if (k.eta && !(*k.eta >= 0.0)) bad("kinetic.eta", "must be >= 0");
}

RunOptions ExperimentConfig::run_options() const {
  RunOptions o;
  o.dt = dt;
  o.horizon = horizon;
  o.record_every = record_every;
  o.seed = seed;
  o.w2_every = w2_every;
  o.w2_subsample = w2_subsample;
  return o;
}

ScalarField build_potential(const PotentialConfig& p, const std::string& field) {
  auto need = [&](std::size_t count) {
    if (p.params.size() != count)
      bad(field + ".params", "'" + p.name + "' takes " + std::to_string(count) + " parameters, got " +
                                 std::to_string(p.params.size()));
  };
  const auto& a = p.params;
  if (p.name == "zero") {
    need(0);
    return ScalarField::zero();
  }
  if (p.name == "quadratic") {
    need(3);
    return ScalarField::quadratic(a[0], a[1], a[2]);
  }
  if (p.name == "quartic") {
    need(5);
    return ScalarField::quartic(a[0], a[1], a[2], a[3], a[4]);
  }
  if (p.name == "cosine") {
    need(2);
    return ScalarField::cosine(a[0], a[1]);
  }
  if (p.name == "gaussian-well") {
    need(2);
    if (!(a[1] > 0.0)) bad(field + ".params[1]", "width must be > 0");
    return ScalarField::gaussian_well(a[0], a[1]);
  }
  bad(field + ".name", "unknown potential '" + p.name + "' (zero, quadratic, quartic, cosine, gaussian-well)");
}

EnergySpec build_energy(const EnergyConfig& e) {
  if (e.family == "two-body") {
    return EnergySpec(TwoBody{build_potential(e.confinement, "energy.confinement"),
                              build_potential(e.interaction, "energy.interaction")},
                      e.constants);
  }
  if (e.family == "polynomial") {
    Polynomial poly{build_potential(e.confinement, "energy.confinement"), {}};
    for (std::size_t i = 0; i < e.interactions.size(); ++i) {
      const auto& k = e.interactions[i];
      const std::string path = "energy.interactions[" + std::to_string(i) + "]";
      if (k.order < 2) bad(path + ".order", "must be >= 2");
      poly.interactions.push_back(KBodyPotential::pairwise_sum(k.order, k.coef, build_potential(k.pair, path + ".pair")));
    }
    return EnergySpec(std::move(poly), e.constants);
  }
  if (e.family == "internal") {
    if (e.psi.empty()) bad("energy.psi", "needs at least one coefficient");
    return EnergySpec(Internal{ScalarFunction::polynomial(e.psi), build_potential(e.field, "energy.field")},
                      e.constants);
  }
  bad("energy.family", "unknown family '" + e.family + "' (two-body, polynomial, internal)");
}

KineticFields build_kinetic_fields(const KineticConfig& k) {
  KineticFields f;
  f.friction = VectorField::linear_sine(k.friction.slope, k.friction.amplitude, k.friction.frequency);
  f.lambda_b = k.lambda_b;
  f.perturbation = VectorField::linear_sine(k.perturbation.slope, k.perturbation.amplitude, k.perturbation.frequency);
  f.lip_a = k.lip_a;
  f.mono_a = k.mono_a;
  f.lip_d = k.lip_d;
  return f;
}

GaussianLaw to_law(const LawConfig& l) { return {l.mean, l.sd}; }

}  // namespace mflang
