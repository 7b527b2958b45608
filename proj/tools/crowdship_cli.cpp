#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crowdship/harness.hpp"
#include "crowdship/log.hpp"

using crowdship::ExperimentConfig;

namespace {

ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) return ExperimentConfig{};
  return ExperimentConfig::load(path);
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used])))
      ++used;
    if (used != tok.size())
      throw std::invalid_argument("bad value in --values: '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("--values is empty");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crowd-shipping simulator and training harness"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_dir, policy, axis, values_csv,
      trace_path;
  int seed_day = 0;

  auto* train = app.add_subcommand("train", "train the configured policy pair");
  train->add_option("--config", config_path, "TOML experiment config");
  train->add_option("--out", out_dir, "output directory")->required();

  auto* evaluate =
      app.add_subcommand("evaluate", "evaluate policies on held-out days");
  evaluate->add_option("--config", config_path, "TOML experiment config");
  evaluate->add_option("--checkpoints", checkpoint_dir,
                       "directory with value.net / pricing.net");
  evaluate->add_option("--out", out_dir, "output directory")->required();

  auto* simulate =
      app.add_subcommand("simulate", "run one traced day under a policy");
  simulate->add_option("--config", config_path, "TOML experiment config");
  simulate->add_option("--policy", policy, "policy id")->required();
  simulate->add_option("--seed", seed_day, "day index for the arrival stream")
      ->required();
  simulate->add_option("--checkpoints", checkpoint_dir,
                       "checkpoint directory (fresh nets if omitted)");
  simulate->add_option("--trace", trace_path, "per-epoch trace CSV path");

  auto* sweep = app.add_subcommand("sweep", "evaluate along one config axis");
  sweep->add_option("--config", config_path, "TOML experiment config");
  sweep
      ->add_option("--axis", axis,
                   "detour_fee | base_fee | kappa | order_shipper_ratio | D")
      ->required();
  sweep->add_option("--values", values_csv, "comma-separated axis values")
      ->required();
  sweep->add_option("--checkpoints", checkpoint_dir, "checkpoint directory");
  sweep->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = load_config(config_path);
    if (train->parsed()) {
      crowdship::run_training(cfg, out_dir);
    } else if (evaluate->parsed()) {
      crowdship::run_evaluation(cfg, checkpoint_dir, out_dir);
    } else if (simulate->parsed()) {
      auto st = crowdship::run_simulate(cfg, policy, seed_day, checkpoint_dir,
                                        trace_path);
      std::cout << "policy=" << st.policy << " day=" << st.day
                << " realized_cost=" << st.realized_cost
                << " entered=" << st.entered << " delivered=" << st.delivered
                << " lost=" << st.lost
                << " rejected_at_entry=" << st.rejected_at_entry << "\n";
    } else if (sweep->parsed()) {
      crowdship::run_sweep(cfg, axis, parse_values(values_csv), checkpoint_dir,
                           out_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
