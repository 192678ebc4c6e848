#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "ordflow/csv.hpp"
#include "ordflow/error.hpp"
#include "ordflow/parallel.hpp"
#include "ordflow/scenario.hpp"
#include "ordflow/velocity.hpp"

namespace {

int run(const std::string& config, const std::string& out_dir) {
  std::optional<std::filesystem::path> override_dir;
  if (!out_dir.empty()) override_dir = out_dir;
  const auto outcome = ordflow::run_scenario(config, override_dir);
  if (!outcome.manifest) {
    std::cerr << "ordflow: " << outcome.message << "\n";
    return outcome.exit_code;
  }
  for (const auto& c : outcome.manifest->checks)
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " measured=" << ordflow::format_number(c.measured)
              << " threshold=" << ordflow::format_number(c.threshold) << "  " << c.detail << "\n";
  if (!outcome.manifest->error.empty()) std::cerr << "ordflow: " << outcome.manifest->error << "\n";
  std::cout << "status " << outcome.manifest->status << ", outputs in " << outcome.output_dir.string() << "\n";
  return outcome.exit_code;
}

int check(const std::string& manifest) {
  const auto r = ordflow::check_manifest(manifest);
  for (const auto& p : r.problems) std::cout << "MISMATCH " << p << "\n";
  if (!r.ok) return ordflow::exit_check_failed;
  std::cout << "ok: config and " << r.manifest.files.size() << " files match; recorded status "
            << r.manifest.status << " (exit " << r.manifest.exit_code << ")\n";
  return ordflow::exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monotone transport flows, nonlinear lattice solver and Burgers selection experiments"};
  app.set_version_flag("--version", ordflow::library_version());
  app.require_subcommand(1);
  std::size_t workers = 0;
  app.add_option("-j,--workers", workers, "worker threads (default: ORDFLOW_WORKERS or all cores)");

  std::string config, out_dir;
  auto* run_cmd = app.add_subcommand("run", "run a scenario config and write CSV files plus manifest.json");
  run_cmd->add_option("config", config, "scenario JSON file")->required();
  run_cmd->add_option("-o,--out", out_dir, "output directory (overrides the config)");

  std::string filter;
  auto* cat_cmd = app.add_subcommand("catalog", "list catalog fields and nonlinearities");
  cat_cmd->add_option("filter", filter, "id, kind or tag");

  std::string manifest;
  auto* check_cmd = app.add_subcommand("check", "verify the digests recorded in a manifest");
  check_cmd->add_option("manifest", manifest, "manifest.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ordflow::exit_config;
  }
  if (workers) ordflow::set_worker_count(workers);

  try {
    if (*run_cmd) return run(config, out_dir);
    if (*cat_cmd) {
      std::cout << ordflow::format_catalog(filter.empty() ? ordflow::catalog() : ordflow::catalog(filter));
      return ordflow::exit_ok;
    }
    if (*check_cmd) return check(manifest);
  } catch (const ordflow::GuardError& e) {
    std::cerr << "ordflow: guard tripped: " << e.what() << "\n";
    return ordflow::exit_guard;
  } catch (const std::exception& e) {
    std::cerr << "ordflow: " << e.what() << "\n";
    return ordflow::exit_config;
  }
  return ordflow::exit_ok;
}
