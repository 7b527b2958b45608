#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "crowdship/economics.hpp"
#include "crowdship/toml_lite.hpp"
#include "crowdship/types.hpp"

namespace crowdship {

// Everything an experiment needs; every field has a sensible default so an
// empty TOML file is a valid config.
struct ExperimentConfig {
  // [run]
  std::uint64_t master_seed = 20240901;
  std::string policy = "neuradp+ddqn";

  // [time]
  TimeParams time;

  // [geo]
  int num_locations = 988;
  double radius_km = 6.0;
  double speed_kmh = 30.0;
  std::string locations_csv;       // empty -> generate synthetically
  std::uint64_t location_seed = 0; // 0 -> derived from master_seed

  // [fees]
  FeeSchedule fees;

  // [arrivals]
  double orders_per_day = 215.0;
  double order_shipper_ratio = 0.45;  // orders per shipper
  double arrival_sigma = 1.0;
  std::vector<double> order_hourly_shape = {4, 5, 7, 9, 11, 14, 17,
                                            20, 24, 28, 30, 26, 20};
  std::vector<double> shipper_hourly_shape = {14, 15, 16, 17, 18, 18, 18,
                                              18, 18, 18, 18, 17, 16};

  // [matching]
  int kappa = 1;

  // [nets]
  int embed_dim = 10;
  int hidden = 300;
  int hidden_layers = 3;
  double learning_rate = 1e-3;
  double tau = 0.001;
  double count_scale = 50.0;

  // [replay]
  int replay_capacity = 50000;
  double per_alpha = 0.6;
  double per_beta = 0.4;
  int batch_size = 32;
  int min_replay = 1000;

  // [training]
  int episodes = 800;
  double epsilon_start = 1.0;
  double epsilon_min = 0.05;
  double epsilon_decay = 0.995;
  double noise_std = 0.5;
  double noise_decay = 0.995;
  int checkpoint_every = 0;  // 0 = final only

  // [evaluation]
  int eval_days = 50;
  int eval_repeats = 5;
  int eval_day_base = 100000;
  std::vector<std::string> eval_policies = {"neuradp+ddqn", "neuradp+fixed",
                                            "greedy+ddqn", "greedy+fixed"};
  double fixed_multiplier = 1.0;

  std::uint64_t effective_location_seed() const;

  // Throws on hard violations; logs warnings for suspicious-but-legal setups.
  void validate() const;

  toml_lite::Table to_table() const;
  static ExperimentConfig from_table(const toml_lite::Table& table);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;

  bool operator==(const ExperimentConfig&) const = default;
};

// Valid sweep axes: detour_fee, base_fee, kappa, order_shipper_ratio, D.
ExperimentConfig apply_axis(const ExperimentConfig& base,
                            const std::string& axis, double value);

}  // namespace crowdship
