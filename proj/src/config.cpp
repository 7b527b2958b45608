#include "crowdship/config.hpp"

#include <cmath>
#include <set>

#include "crowdship/log.hpp"
#include "crowdship/policies.hpp"
#include "crowdship/rng.hpp"

namespace crowdship {

std::uint64_t ExperimentConfig::effective_location_seed() const {
  return location_seed ? location_seed : derive_seed(master_seed, "locations");
}

void ExperimentConfig::validate() const {
  time.validate();
  fees.validate();
  parse_policy_id(policy);
  for (const auto& p : eval_policies) parse_policy_id(p);

  if (num_locations < 2)
    throw std::invalid_argument("need at least 2 locations (store + 1)");
  if (radius_km <= 0.0) throw std::invalid_argument("radius_km must be positive");
  if (speed_kmh <= 0.0) throw std::invalid_argument("speed_kmh must be positive");

  if (orders_per_day <= 0.0)
    throw std::invalid_argument("orders_per_day must be positive");
  if (order_shipper_ratio <= 0.0)
    throw std::invalid_argument("order_shipper_ratio must be positive");
  if (arrival_sigma < 0.0)
    throw std::invalid_argument("arrival sigma must be >= 0");
  if (order_hourly_shape.empty() || shipper_hourly_shape.empty())
    throw std::invalid_argument("hourly shapes must be non-empty");

  if (kappa < 1) throw std::invalid_argument("kappa must be >= 1");
  if (kappa > 4)
    throw std::invalid_argument(
        "kappa > 4 is not supported (route search is factorial in batch size)");

  if (embed_dim < 1 || hidden < 1 || hidden_layers < 1)
    throw std::invalid_argument("network dimensions must be positive");
  if (learning_rate <= 0.0)
    throw std::invalid_argument("learning_rate must be positive");
  if (tau < 0.0 || tau > 1.0)
    throw std::invalid_argument("tau must lie in [0,1]");
  if (count_scale <= 0.0)
    throw std::invalid_argument("count_scale must be positive");

  if (replay_capacity < 1)
    throw std::invalid_argument("replay capacity must be positive");
  if (per_alpha < 0.0 || per_beta < 0.0)
    throw std::invalid_argument("replay exponents must be >= 0");
  if (batch_size < 1 || batch_size > replay_capacity)
    throw std::invalid_argument("batch_size must be in [1, capacity]");
  if (min_replay < batch_size)
    throw std::invalid_argument("min_size must be >= batch_size");

  if (episodes < 0) throw std::invalid_argument("episodes must be >= 0");
  if (epsilon_start < 0.0 || epsilon_start > 1.0 || epsilon_min < 0.0 ||
      epsilon_min > 1.0)
    throw std::invalid_argument("epsilon bounds must lie in [0,1]");
  if (epsilon_decay <= 0.0 || epsilon_decay > 1.0 || noise_decay <= 0.0 ||
      noise_decay > 1.0)
    throw std::invalid_argument("decay factors must lie in (0,1]");
  if (noise_std < 0.0) throw std::invalid_argument("noise_std must be >= 0");
  if (checkpoint_every < 0)
    throw std::invalid_argument("checkpoint_every must be >= 0");

  if (eval_days < 1 || eval_repeats < 1)
    throw std::invalid_argument("evaluation needs >= 1 day and >= 1 repeat");
  bool known = false;
  for (double m : fees.multipliers)
    if (std::abs(m - fixed_multiplier) < 1e-12) known = true;
  if (!known)
    throw std::invalid_argument("fixed_multiplier must be in the multiplier set");

  if (time.order_cutoff_minutes < time.max_delay_minutes)
    log_warn("order cutoff (" + std::to_string(time.order_cutoff_minutes) +
             " min) is shorter than the delivery promise (" +
             std::to_string(time.max_delay_minutes) +
             " min): late orders cannot finish inside the horizon");
}

toml_lite::Table ExperimentConfig::to_table() const {
  using toml_lite::Value;
  toml_lite::Table t;
  auto farr = [](const std::vector<double>& v) {
    toml_lite::Array a;
    for (double d : v) a.push_back(Value(d));
    return Value(std::move(a));
  };
  auto sarr = [](const std::vector<std::string>& v) {
    toml_lite::Array a;
    for (const auto& s : v) a.push_back(Value(s));
    return Value(std::move(a));
  };

  t["run.master_seed"] = Value(static_cast<std::int64_t>(master_seed));
  t["run.policy"] = Value(policy);

  t["time.horizon_minutes"] = Value(time.horizon_minutes);
  t["time.delta_minutes"] = Value(time.delta_minutes);
  t["time.max_delay_minutes"] = Value(time.max_delay_minutes);
  t["time.order_cutoff_minutes"] = Value(time.order_cutoff_minutes);

  t["geo.num_locations"] = Value(num_locations);
  t["geo.radius_km"] = Value(radius_km);
  t["geo.speed_kmh"] = Value(speed_kmh);
  t["geo.locations_csv"] = Value(locations_csv);
  t["geo.location_seed"] = Value(static_cast<std::int64_t>(location_seed));

  t["fees.base_fee"] = Value(fees.base_fee);
  t["fees.detour_fee"] = Value(fees.detour_fee);
  t["fees.lost_cost"] = Value(fees.lost_cost);
  t["fees.multipliers"] = farr(fees.multipliers);
  t["fees.accept_slope"] = Value(fees.accept_slope);
  t["fees.accept_offset"] = Value(fees.accept_offset);

  t["arrivals.orders_per_day"] = Value(orders_per_day);
  t["arrivals.order_shipper_ratio"] = Value(order_shipper_ratio);
  t["arrivals.sigma"] = Value(arrival_sigma);
  t["arrivals.order_hourly_shape"] = farr(order_hourly_shape);
  t["arrivals.shipper_hourly_shape"] = farr(shipper_hourly_shape);

  t["matching.kappa"] = Value(kappa);

  t["nets.embed_dim"] = Value(embed_dim);
  t["nets.hidden"] = Value(hidden);
  t["nets.hidden_layers"] = Value(hidden_layers);
  t["nets.learning_rate"] = Value(learning_rate);
  t["nets.tau"] = Value(tau);
  t["nets.count_scale"] = Value(count_scale);

  t["replay.capacity"] = Value(replay_capacity);
  t["replay.alpha"] = Value(per_alpha);
  t["replay.beta"] = Value(per_beta);
  t["replay.batch_size"] = Value(batch_size);
  t["replay.min_size"] = Value(min_replay);

  t["training.episodes"] = Value(episodes);
  t["training.epsilon_start"] = Value(epsilon_start);
  t["training.epsilon_min"] = Value(epsilon_min);
  t["training.epsilon_decay"] = Value(epsilon_decay);
  t["training.noise_std"] = Value(noise_std);
  t["training.noise_decay"] = Value(noise_decay);
  t["training.checkpoint_every"] = Value(checkpoint_every);

  t["evaluation.days"] = Value(eval_days);
  t["evaluation.repeats"] = Value(eval_repeats);
  t["evaluation.day_base"] = Value(eval_day_base);
  t["evaluation.policies"] = sarr(eval_policies);
  t["evaluation.fixed_multiplier"] = Value(fixed_multiplier);
  return t;
}

ExperimentConfig ExperimentConfig::from_table(const toml_lite::Table& table) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  auto take = [&](const char* key) -> const toml_lite::Value* {
    auto it = table.find(key);
    if (it == table.end()) return nullptr;
    seen.insert(key);
    return &it->second;
  };
  auto geti = [&](const char* key, auto& out) {
    if (const auto* v = take(key)) out = static_cast<std::decay_t<decltype(out)>>(v->as_int());
  };
  auto getf = [&](const char* key, double& out) {
    if (const auto* v = take(key)) out = v->as_float();
  };
  auto gets = [&](const char* key, std::string& out) {
    if (const auto* v = take(key)) out = v->as_string();
  };
  auto getfa = [&](const char* key, std::vector<double>& out) {
    if (const auto* v = take(key)) out = v->as_float_array();
  };

  geti("run.master_seed", cfg.master_seed);
  gets("run.policy", cfg.policy);

  getf("time.horizon_minutes", cfg.time.horizon_minutes);
  getf("time.delta_minutes", cfg.time.delta_minutes);
  getf("time.max_delay_minutes", cfg.time.max_delay_minutes);
  getf("time.order_cutoff_minutes", cfg.time.order_cutoff_minutes);

  geti("geo.num_locations", cfg.num_locations);
  getf("geo.radius_km", cfg.radius_km);
  getf("geo.speed_kmh", cfg.speed_kmh);
  gets("geo.locations_csv", cfg.locations_csv);
  geti("geo.location_seed", cfg.location_seed);

  getf("fees.base_fee", cfg.fees.base_fee);
  getf("fees.detour_fee", cfg.fees.detour_fee);
  getf("fees.lost_cost", cfg.fees.lost_cost);
  getfa("fees.multipliers", cfg.fees.multipliers);
  getf("fees.accept_slope", cfg.fees.accept_slope);
  getf("fees.accept_offset", cfg.fees.accept_offset);

  getf("arrivals.orders_per_day", cfg.orders_per_day);
  getf("arrivals.order_shipper_ratio", cfg.order_shipper_ratio);
  getf("arrivals.sigma", cfg.arrival_sigma);
  getfa("arrivals.order_hourly_shape", cfg.order_hourly_shape);
  getfa("arrivals.shipper_hourly_shape", cfg.shipper_hourly_shape);

  geti("matching.kappa", cfg.kappa);

  geti("nets.embed_dim", cfg.embed_dim);
  geti("nets.hidden", cfg.hidden);
  geti("nets.hidden_layers", cfg.hidden_layers);
  getf("nets.learning_rate", cfg.learning_rate);
  getf("nets.tau", cfg.tau);
  getf("nets.count_scale", cfg.count_scale);

  geti("replay.capacity", cfg.replay_capacity);
  getf("replay.alpha", cfg.per_alpha);
  getf("replay.beta", cfg.per_beta);
  geti("replay.batch_size", cfg.batch_size);
  geti("replay.min_size", cfg.min_replay);

  geti("training.episodes", cfg.episodes);
  getf("training.epsilon_start", cfg.epsilon_start);
  getf("training.epsilon_min", cfg.epsilon_min);
  getf("training.epsilon_decay", cfg.epsilon_decay);
  getf("training.noise_std", cfg.noise_std);
  getf("training.noise_decay", cfg.noise_decay);
  geti("training.checkpoint_every", cfg.checkpoint_every);

  geti("evaluation.days", cfg.eval_days);
  geti("evaluation.repeats", cfg.eval_repeats);
  geti("evaluation.day_base", cfg.eval_day_base);
  if (const auto* v = take("evaluation.policies"))
    cfg.eval_policies = v->as_string_array();
  getf("evaluation.fixed_multiplier", cfg.fixed_multiplier);

  for (const auto& [key, value] : table)
    if (!seen.count(key))
      throw std::invalid_argument("unknown config key: " + key);
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  auto cfg = from_table(toml_lite::parse_file(path));
  cfg.validate();
  return cfg;
}

void ExperimentConfig::save(const std::string& path) const {
  toml_lite::write_file(path, to_table());
}

ExperimentConfig apply_axis(const ExperimentConfig& base,
                            const std::string& axis, double value) {
  ExperimentConfig cfg = base;
  if (axis == "detour_fee") {
    cfg.fees.detour_fee = value;
  } else if (axis == "base_fee") {
    cfg.fees.base_fee = value;
  } else if (axis == "kappa") {
    double r = std::round(value);
    if (std::abs(value - r) > 1e-9)
      throw std::invalid_argument("kappa sweep values must be integers");
    cfg.kappa = static_cast<int>(r);
  } else if (axis == "order_shipper_ratio") {
    cfg.order_shipper_ratio = value;
  } else if (axis == "D") {
    cfg.time.max_delay_minutes = value;
  } else {
    throw std::invalid_argument(
        "unknown sweep axis '" + axis +
        "'; valid: detour_fee, base_fee, kappa, order_shipper_ratio, D");
  }
  cfg.validate();
  return cfg;
}

}  // namespace crowdship
