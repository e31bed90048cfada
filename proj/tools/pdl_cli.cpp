// pdl: verification suites, training runs and bound reports.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pdl/harness.hpp"

namespace {

int report(const std::exception& e, int code) {
  std::cerr << "pdl: " << e.what() << '\n';
  return code;
}

template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const pdl::NumericalFailure& e) {
    return report(e, pdl::kExitNumerical);
  } catch (const pdl::ConfigError& e) {
    return report(e, pdl::kExitConfig);
  } catch (const pdl::FormatError& e) {
    return report(e, pdl::kExitConfig);
  } catch (const pdl::InvalidInput& e) {
    return report(e, pdl::kExitConfig);
  } catch (const std::exception& e) {
    return report(e, pdl::kExitNumerical);
  }
}

std::filesystem::path out_dir(const std::string& flag, const pdl::RunConfig& c) {
  return flag.empty() ? std::filesystem::path(c.outputs) : std::filesystem::path(flag);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fenchel-Young learning diagnostics"};
  app.require_subcommand(1);

  std::string suite, summary_path = "verify_summary.json";
  pdl::SuiteOptions opt;
  auto* verify = app.add_subcommand("verify", "run the numerical verification suites");
  verify->add_option("--suite", suite, "run only this suite");
  verify->add_flag("--inject-fault", opt.inject_fault, "perturb the conjugate (negative control)");
  verify->add_option("--seed", opt.seed, "base seed");
  verify->add_option("--summary", summary_path, "JSON summary path");

  std::string train_cfg, train_out;
  auto* train = app.add_subcommand("train", "train a network and log structure-matrix bounds");
  train->add_option("--config", train_cfg, "run configuration (JSON)")->required();
  train->add_option("--out", train_out, "output directory (default: the config's outputs field)");

  std::string bounds_cfg, bounds_out;
  auto* bounds = app.add_subcommand("bounds", "risk bounds and Monte Carlo generalization check");
  bounds->add_option("--config", bounds_cfg, "run configuration (JSON)")->required();
  bounds->add_option("--out", bounds_out, "output directory (default: the config's outputs field)");

  std::string show_cfg;
  auto* show = app.add_subcommand("show-config", "print a configuration in canonical form");
  show->add_option("--config", show_cfg, "run configuration (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pdl::kExitConfig;
  }

  if (*verify) {
    return guarded([&] {
      const auto v = pdl::cmd_verify(suite, opt, std::cout);
      std::ofstream(summary_path) << v.summary.dump(2) << '\n';
      std::cout << (v.pass ? "all suites passed" : "verification FAILED") << '\n';
      return v.pass ? pdl::kExitOk : pdl::kExitVerifyFailed;
    });
  }
  if (*train) {
    return guarded([&] {
      const auto c = pdl::load_config(train_cfg);
      const auto dir = out_dir(train_out, c);
      const auto s = pdl::cmd_train(c, dir);
      std::cout << "wrote " << (dir / "metrics.csv").string() << " and " << (dir / "summary.json").string() << '\n';
      std::cout << "final empirical risk " << s["finalEmpiricalRisk"].dump() << ", bounds ["
                << s["riskBounds"]["lower"].dump() << ", " << s["riskBounds"]["upper"].dump() << "]\n";
      return pdl::kExitOk;
    });
  }
  if (*bounds) {
    return guarded([&] {
      const auto c = pdl::load_config(bounds_cfg);
      const auto dir = out_dir(bounds_out, c);
      const auto r = pdl::cmd_bounds(c, dir);
      std::cout << "risk " << r["trueRisk"].dump() << " in [" << r["riskBounds"]["lower"].dump() << ", "
                << r["riskBounds"]["upper"].dump() << "], gamma " << r["gamma"].dump() << ", zeta "
                << r["zeta"].dump() << '\n';
      std::cout << "generalization bound " << (r["holds"].get<bool>() ? "holds" : "VIOLATED") << " on "
                << r["trials"].dump() << " trials; wrote " << (dir / "bounds.json").string() << '\n';
      return pdl::kExitOk;
    });
  }
  return guarded([&] {
    std::cout << pdl::to_json(pdl::load_config(show_cfg)).dump(2) << '\n';
    return pdl::kExitOk;
  });
}
