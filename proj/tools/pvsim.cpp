#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pvctl/config.hpp"
#include "pvctl/error.hpp"
#include "pvctl/simulation.hpp"

namespace {

int exit_code(const pvctl::Error& e) {
  switch (e.category()) {
    case pvctl::Error::Category::Config:
      return 2;
    case pvctl::Error::Category::Data:
      return 3;
    case pvctl::Error::Category::Convergence:
      return 4;
    case pvctl::Error::Category::Internal:
      return 1;
  }
  return 1;
}

void print_summary(const pvctl::RunConfig& cfg, const pvctl::SimulationResult& r) {
  const auto& m = r.metrics;
  std::cout << fmt::format("controller        {}\n", pvctl::to_string(cfg.controller))
            << fmt::format("output            {}\n", cfg.output_dir.string())
            << fmt::format("mileage mean/max  {:.3f} / {:.3f} kW\n", m.mileage_mean_kw, m.mileage_max_kw)
            << fmt::format("regulation        {:.3f} kWh\n", m.regulation_kwh)
            << fmt::format("commitment met    {:.3f} %\n", m.commitment_satisfied_pct);
  if (m.regd_satisfied_pct) std::cout << fmt::format("regd met          {:.3f} %\n", *m.regd_satisfied_pct);
  std::cout << fmt::format("rmse / mae        {:.3f} / {:.3f} kW\n", m.rmse_kw, m.mae_kw)
            << fmt::format("messages          {} ({} help requests, {} via central)\n", r.messages,
                           r.help_requests, r.adaptive_messages);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curtailment control simulator for multi-inverter PV plants"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> controller;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Simulate one controller and write run artifacts");
  run->add_option("--config", config_path, "Run configuration (JSON)")->required();
  run->add_option("--controller", controller, "hierarchical | grouping | uncontrolled");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--seed", seed, "Scenario seed");

  std::string dir_a, dir_b;
  auto* compare = app.add_subcommand("compare", "Compare the metrics of two runs");
  compare->add_option("--a", dir_a, "First run directory")->required();
  compare->add_option("--b", dir_b, "Second run directory")->required();

  std::string corr_config, corr_out;
  auto* corr = app.add_subcommand("corr", "Write the hourly correlation matrices of a run's plant");
  corr->add_option("--config", corr_config, "Run configuration (JSON)")->required();
  corr->add_option("--out", corr_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      auto cfg = pvctl::load_run_config(config_path);
      if (controller) cfg.controller = pvctl::parse_controller(*controller);
      if (out_dir) cfg.output_dir = *out_dir;
      if (seed) cfg.seed = *seed;
      const auto result = pvctl::run_simulation(cfg);
      print_summary(cfg, result);
    } else if (compare->parsed()) {
      pvctl::write_comparison(pvctl::compare_runs(dir_a, dir_b), std::cout);
    } else if (corr->parsed()) {
      pvctl::export_correlation(pvctl::load_run_config(corr_config), corr_out);
    }
  } catch (const pvctl::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n' << e.trace();
    return exit_code(e);
  } catch (const pvctl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
