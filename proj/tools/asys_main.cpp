// Command-line front end: `run` executes one experiment from a config file,
// `compare` lines up previously written reports, `bound-check` sweeps the
// estimation-error bound diagnostic.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "asys/config.hpp"
#include "asys/harness.hpp"

namespace {

int cmd_run(const std::string& config_path, long long seed_override, const std::string& out_override,
            bool no_asys) {
  asys::ConfigMap raw = asys::load_config_file(config_path);
  if (seed_override >= 0) raw["run.seed"] = std::to_string(seed_override);
  if (!out_override.empty()) raw["run.out"] = out_override;
  if (no_asys) raw["asys.enabled"] = "false";

  const asys::ExperimentConfig config = asys::parse_experiment_config(raw);
  const asys::RunReport report = asys::run_experiment(config);

  const std::string out_dir = config.out_dir.empty() ? "asys_out" : config.out_dir;
  asys::write_run_outputs(out_dir, report);

  std::cout << "chunks=" << report.traces.size();
  if (report.overall_auc)
    std::cout << " overall_auc=" << *report.overall_auc;
  else
    std::cout << " overall_auc=undefined";
  if (report.rejected_rows > 0) std::cout << " rejected_rows=" << report.rejected_rows;
  std::cout << " wall_ms=" << report.wall_ms << " out=" << out_dir << '\n';
  return 0;
}

int cmd_compare(const std::vector<std::string>& report_paths, const std::string& out_dir) {
  std::vector<asys::ReportSummary> summaries;
  std::map<std::string, int> stem_uses;
  for (const std::string& path : report_paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("compare: cannot open " + path);
    nlohmann::json j;
    in >> j;
    // Reports are usually all called report.json, so suffix repeated stems to
    // keep summary names (and the delta_<name>.tsv files) distinct.
    std::string name = std::filesystem::path(path).stem().string();
    const int uses = stem_uses[name]++;
    if (uses > 0) name += "_" + std::to_string(uses + 1);
    summaries.push_back(asys::summarize_json(j, name));
  }

  const nlohmann::json result = asys::compare_runs(summaries);
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(std::filesystem::path(out_dir) / "compare.json");
    if (!out) throw std::runtime_error("compare: cannot write compare.json");
    out << result.dump(2) << '\n';
  }
  for (const auto& entry : result["window_deltas"]) {
    std::vector<std::pair<double, double>> rows;
    for (const auto& d : entry["deltas"])
      rows.emplace_back(d["window"].get<double>(), d["delta"].get<double>());
    asys::write_tsv((std::filesystem::path(out_dir) / ("delta_" + entry["name"].get<std::string>() + ".tsv")).string(),
                    "window\tdelta", rows);
  }

  for (const auto& run : result["runs"]) {
    std::cout << run["name"].get<std::string>() << ": overall_auc=";
    if (run["overall_auc"].is_null())
      std::cout << "undefined";
    else
      std::cout << run["overall_auc"].get<double>();
    std::cout << " mean_boundary_dip=";
    if (run["mean_boundary_dip"].is_null())
      std::cout << "n/a";
    else
      std::cout << run["mean_boundary_dip"].get<double>();
    std::cout << '\n';
  }
  std::cout << "wrote " << out_dir << "/compare.json\n";
  return 0;
}

int cmd_bound_check(const std::string& config_path) {
  const asys::ConfigMap raw = asys::load_config_file(config_path);
  const std::size_t dim = static_cast<std::size_t>(asys::get_int(raw, "bound.dim", 8));
  const std::size_t configs = static_cast<std::size_t>(asys::get_int(raw, "bound.configs", 100));
  const std::size_t draws = static_cast<std::size_t>(asys::get_int(raw, "bound.draws", 100000));
  const std::uint64_t seed = asys::get_uint64(raw, "bound.seed", 1);

  const std::vector<asys::BoundCheck> checks = asys::run_bound_sweep(dim, configs, draws, seed);
  std::size_t held = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const asys::BoundCheck& c = checks[i];
    held += c.holds ? 1 : 0;
    std::printf("config %3zu: L=%.4f lhs=%.6f rhs=%.6f margin=%.6f holds=%s\n", i, c.lipschitz,
                c.lhs, c.rhs, c.margin_mean, c.holds ? "yes" : "no");
  }
  std::printf("bound held in %zu/%zu configurations\n", held, checks.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drift-aware incremental ensemble experiments"};
  app.require_subcommand(1);

  std::string run_config, run_out;
  long long run_seed = -1;
  bool no_asys = false;
  CLI::App* run = app.add_subcommand("run", "Execute one experiment from a config file");
  run->add_option("--config", run_config, "Flat key=value config file")->required();
  run->add_option("--seed", run_seed, "Override run.seed");
  run->add_option("--out", run_out, "Override run.out output directory");
  run->add_flag("--no-asys", no_asys, "Force the baseline (asys.enabled=false)");

  std::vector<std::string> compare_paths;
  std::string compare_out;
  CLI::App* compare = app.add_subcommand("compare", "Compare two or more report.json files");
  compare->add_option("reports", compare_paths, "report.json paths")->required()->expected(2, -1);
  compare->add_option("--out", compare_out, "Output directory")->required();

  std::string bound_config;
  CLI::App* bound = app.add_subcommand("bound-check", "Estimation-error bound diagnostic");
  bound->add_option("--config", bound_config, "Config file with bound.* keys")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_config, run_seed, run_out, no_asys);
    if (compare->parsed()) return cmd_compare(compare_paths, compare_out);
    if (bound->parsed()) return cmd_bound_check(bound_config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
