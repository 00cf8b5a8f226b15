#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "mflang/config.hpp"
#include "mflang/experiments.hpp"

using namespace mflang;
namespace fs = std::filesystem;

namespace {

ConfigError::Category category_of(const std::string& text) {
  try {
    validate_config(parse_config_text(text));
  } catch (const ConfigError& e) {
    return e.category();
  }
  ADD_FAILURE() << "no ConfigError for " << text;
  return ConfigError::Category::kInvalidValue;
}

std::string field_of(const std::string& text) {
  try {
    validate_config(parse_config_text(text));
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<none>";
}

constexpr const char* kMinimal = R"({"experiment":"contraction","energy":{"family":"two-body","constants":{"lambda":1}},"n":64})";

}  // namespace

TEST(Config, MinimalGetsDefaults) {
  const auto c = parse_config_text(kMinimal);
  EXPECT_EQ(c.kind, ExperimentKind::kContraction);
  EXPECT_EQ(c.n, 64u);
  EXPECT_DOUBLE_EQ(c.dt, 1e-3);
  EXPECT_DOUBLE_EQ(c.horizon, 1.0);
  EXPECT_EQ(c.replicas, 1u);
  EXPECT_EQ(c.seed, 0u);
  EXPECT_EQ(c.couple_initial, "optimal");
  EXPECT_DOUBLE_EQ(c.tol.rate, 0.15);
  EXPECT_EQ(c.energy.confinement.name, "zero");
  EXPECT_NO_THROW(validate_config(c));
}

TEST(Config, NegativeStepNamesField) {
  const std::string text = R"({"experiment":"contraction","energy":{"family":"two-body"},"n":64,"dt":-1})";
  EXPECT_EQ(category_of(text), ConfigError::Category::kInvalidValue);
  EXPECT_EQ(field_of(text), "dt");
}

TEST(Config, DistinctCategories) {
  EXPECT_EQ(category_of("{\"experiment\": "), ConfigError::Category::kMalformed);
  EXPECT_EQ(category_of(R"({"experiment":"bogus"})"), ConfigError::Category::kUnknownKind);
  EXPECT_EQ(category_of(R"({"experiment":"contraction","energy":{"family":"two-body"}})"),
            ConfigError::Category::kMissingField);
  EXPECT_EQ(field_of(R"({"experiment":"contraction","energy":{"family":"two-body"}})"), "n");
  EXPECT_EQ(category_of(R"({"experiment":"contraction","energy":{"family":"two-body"},"n":64,"bogus":1})"),
            ConfigError::Category::kUnknownField);
  EXPECT_EQ(field_of(R"({"experiment":"contraction","energy":{"family":"two-body"},"n":64,"bogus":1})"), "bogus");
  EXPECT_EQ(category_of(R"({"experiment":"poc","energy":{"family":"two-body"}})"),
            ConfigError::Category::kMissingField);
}

TEST(Config, ParseKind) {
  for (const char* k : {"contraction", "poc", "kinetic-contraction", "kinetic-poc", "fixed-point", "kinetic-constants"})
    EXPECT_EQ(to_string(parse_kind(k)), k);
  EXPECT_THROW(parse_kind("bogus"), ConfigError);
}

TEST(Config, SerializeRoundTrip) {
  auto c = parse_config_text(kMinimal);
  c.energy.confinement = {"quartic", {0.25, 0.0, 0.5, 0.0, 0.0}};
  c.energy.interaction = {"cosine", {0.1, 2.0}};
  c.energy.constants = {1.5, 0.1, 0.2, 0.05};
  c.kinetic.epsilon = 0.7;
  c.seed = 123456789012345ull;
  c.fit_lo = 0.1;
  c.tol.slope = 0.3;
  const auto back = parse_config_text(serialize_config(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), serialize_config(c));
}

TEST(Config, ShippedConfigsParseAndValidate) {
  int count = 0;
  for (const auto& e : fs::directory_iterator(MFLANG_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    ++count;
    EXPECT_NO_THROW(validate_config(parse_config(e.path()))) << e.path();
  }
  EXPECT_GE(count, 7);
}

TEST(Config, BuildersRejectUnknownPotential) {
  EXPECT_THROW(build_potential({"nope", {}}), InputError);
  EXPECT_THROW(build_potential({"quadratic", {1.0}}), InputError);
}
