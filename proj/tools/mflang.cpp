// mflang: run one experiment from a JSON config and write its reports.
//
//   mflang <kind> --config <path> [--seed N] [--out DIR] [--threads K]
//
// Exit status: 0 all checks pass, 2 some check failed, 1 error.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

#include "mflang/config.hpp"
#include "mflang/experiments.hpp"

namespace {

const char* const kKinds[] = {"contraction", "poc", "kinetic-contraction", "kinetic-poc", "fixed-point",
                              "kinetic-constants"};

std::string num(double x) {
  if (std::isnan(x)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

void print_report(const mflang::ExperimentReport& r) {
  using mflang::ExperimentKind;
  const auto metric = [&](const char* key) {
    auto it = r.metrics.find(key);
    return it == r.metrics.end() ? mflang::kNotAvailable : it->second;
  };
  switch (r.kind) {
    case ExperimentKind::kKineticConstants:
      std::cout << "eta0 = " << num(metric("eta0")) << "  eta = " << num(metric("eta")) << "  b window = ("
                << num(metric("window_lo")) << ", " << num(metric("window_hi")) << ")  b = " << num(metric("b"))
                << "  C = " << num(metric("rate_C")) << '\n';
      break;
    case ExperimentKind::kContraction:
    case ExperimentKind::kKineticContraction:
      std::cout << "fitted rate = " << num(r.fitted_rate) << "  bound = " << num(r.theoretical_rate_bound) << '\n';
      break;
    case ExperimentKind::kPoc:
    case ExperimentKind::kKineticPoc:
      for (const auto& row : r.poc_table)
        std::cout << "n = " << row.n << "  sup gap = " << num(row.sup_gap) << "  delta_d = " << num(row.delta_d)
                  << '\n';
      std::cout << "scaling slope = " << num(r.fitted_scaling_slope) << '\n';
      break;
    case ExperimentKind::kFixedPoint:
      std::cout << "iterations = " << num(metric("iterations")) << "  variance = "
                << num(metric("fixed_point_variance")) << '\n';
      break;
  }
  for (const auto& f : r.flags)
    std::cout << (f.pass ? "PASS " : "FAIL ") << f.name << ": " << num(f.value) << " (threshold "
              << num(f.threshold) << ") " << f.detail << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean-field Langevin experiments"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  for (const char* kind : kKinds) {
    auto* sub = app.add_subcommand(kind, std::string("run the ") + kind + " experiment");
    sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "output directory (default: $MFLANG_OUT_DIR, then config out_dir)");
    sub->add_option("--threads", threads, "worker threads (0 = OpenMP default)")->check(CLI::NonNegativeNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    mflang::ExperimentConfig cfg = mflang::parse_config(config_path);
    if (cfg.kind != mflang::parse_kind(name))
      throw mflang::InputError("config experiment '" + mflang::to_string(cfg.kind) + "' does not match subcommand '" +
                               name + "'");
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (!out_dir.empty()) {
      cfg.out_dir = out_dir;
    } else if (const char* env = std::getenv("MFLANG_OUT_DIR"); env && *env) {
      cfg.out_dir = env;
    }
    mflang::validate_config(cfg);

    const auto report = mflang::run_experiment(cfg);
    mflang::emit_report(report, cfg.out_dir);
    print_report(report);
    std::cout << (report.passed() ? "PASS " : "FAIL ") << name << " (reports in " << cfg.out_dir << ")\n";
    return report.passed() ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "mflang: error: " << e.what() << '\n';
    return 1;
  }
}
