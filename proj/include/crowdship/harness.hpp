#pragma once
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "crowdship/config.hpp"
#include "crowdship/environment.hpp"
#include "crowdship/policies.hpp"
#include "crowdship/stats.hpp"

namespace crowdship {

// Immutable per-experiment context derived from the config once.
struct RunContext {
  ExperimentConfig cfg;
  LocationSet locations;
  TravelTimeTable table;
  ArrivalProfile profile;
  FeatureConfig features;
};

RunContext build_context(const ExperimentConfig& cfg);

// Networks a policy pair needs; absent when the policy is not learned.
struct NetBundle {
  std::optional<TargetPair> value;
  std::optional<TargetPair> pricing;
};

NetBundle init_nets(const RunContext& ctx, const PolicySpec& spec);
// Loads value.net / pricing.net from dir; throws (naming the offending
// field) on any dimension/config mismatch.
NetBundle load_nets(const RunContext& ctx, const PolicySpec& spec,
                    const std::string& checkpoint_dir);
void save_nets(const NetBundle& nets, const RunContext& ctx,
               const PolicySpec& spec, const std::string& dir,
               const std::string& suffix = "");

// Value-learning experience: post-decision order features and the frozen
// next-epoch target (that order's share of the next clean assignment).
struct MatchingExperience {
  int dest = 0;
  double feats[2] = {0, 0};
  double target = 0.0;
};

// Pricing experience: state/action, attributed realized cost, next state.
struct PricingExperience {
  int dest = 0;
  double base[3] = {0, 0, 0};  // epochs, clock, candidate count (normalized)
  int action = 0;
  double reward = 0.0;
  bool terminal = false;
  int next_dest = 0;
  double next_base[3] = {0, 0, 0};
};

// Per-order share of the assignment objective: chosen pair cost split equally
// among its orders; delay column cost for delayed orders.
std::map<int, double> coverage_shares(const MatchingInstance& instance,
                                      const MatchingSolution& solution);

// Bellman-style backup: terminal -> reward; else reward + the target
// network's Q at the next state for the action the online network prefers
// (double estimator: decoupled selection and evaluation).
double pricing_target(const PricingExperience& exp, const Mlp& online_net,
                      const Mlp& target_net, const FeatureConfig& fc);

// Owns replay buffers, optimizers and exploration schedules for one training
// run. Buffers only accept experiences generated by the configured policy
// pair (off-policy mixing throws).
class Trainer {
 public:
  Trainer(const RunContext& ctx, const PolicySpec& spec, NetBundle* nets);

  void begin_episode(int episode);
  double epsilon() const { return epsilon_; }
  double noise_std() const { return noise_std_; }
  RandomStream* explore_rng() { return explore_rng_.get(); }
  RandomStream* noise_rng() { return noise_rng_.get(); }

  // Epoch-t bookkeeping: finish experiences opened at t-1 (value targets from
  // the fresh clean solve, pricing rewards from the fates), then open new
  // ones for the epoch-t decision.
  void complete_pendings(const SystemState& state, const MatchDecision* md,
                         const std::vector<OrderFate>& prev_fates);
  void record_pendings(const SystemState& state, const PricingDecision* pd,
                       const MatchDecision& md);
  void end_episode(const std::vector<OrderFate>& final_fates);

  // One prioritized minibatch + Adam step + soft target update per network,
  // once its buffer holds at least the configured minimum.
  void update();

  void store_value_experience(const std::string& source_policy,
                              const MatchingExperience& exp);
  void store_pricing_experience(const std::string& source_policy,
                                const PricingExperience& exp);

  std::size_t value_buffer_size() const;
  std::size_t pricing_buffer_size() const;
  double last_value_loss() const { return last_value_loss_; }
  double last_pricing_loss() const { return last_pricing_loss_; }

 private:
  const RunContext* ctx_;
  PolicySpec spec_;
  std::string policy_tag_;
  NetBundle* nets_;
  std::unique_ptr<ReplayBuffer<MatchingExperience>> value_buffer_;
  std::unique_ptr<ReplayBuffer<PricingExperience>> pricing_buffer_;
  AdamOptimizer value_opt_, pricing_opt_;
  std::unique_ptr<RandomStream> explore_rng_, noise_rng_, replay_rng_;
  double epsilon_ = 0.0, noise_std_ = 0.0;
  double last_value_loss_ = 0.0, last_pricing_loss_ = 0.0;

  struct PendingValue {
    int order_id;
    MatchingExperience exp;  // target filled at completion
  };
  struct PendingPricing {
    int order_id;
    PricingExperience exp;
  };
  std::vector<PendingValue> pending_value_;
  std::vector<PendingPricing> pending_pricing_;

  void update_value_net();
  void update_pricing_net();
};

struct EpisodeOptions {
  int day = 0;
  int repeat = 0;
  Trainer* trainer = nullptr;  // null -> pure evaluation
  std::ostream* trace = nullptr;  // per-epoch CSV trace
};

EpisodeStats run_episode(const RunContext& ctx, const PolicySpec& spec,
                         const NetBundle* nets, const EpisodeOptions& opt);

struct TrainLogRow {
  int episode = 0;
  double realized_cost = 0.0, planned_cost = 0.0;
  double epsilon = 0.0, noise_std = 0.0;
  double value_loss = 0.0, pricing_loss = 0.0;
  long value_buffer = 0, pricing_buffer = 0;
  double wall_ms = 0.0;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  std::string out_dir;
};

// Full training loop; writes initial + final checkpoints, per-episode log and
// the echoed config into out_dir. On a non-finite loss the last good
// checkpoint is saved before the error propagates.
TrainResult run_training(const ExperimentConfig& cfg,
                         const std::string& out_dir);

struct EvalResult {
  std::vector<EpisodeStats> episodes;   // ordered (policy, day, repeat)
  std::vector<Summary> summaries;       // one per evaluated policy
  nlohmann::ordered_json to_json() const;
};

// Evaluates every policy in cfg.eval_policies over days x repeats with shared
// arrival streams. checkpoint_dir may be empty when none of the policies is
// learned. out_dir may be empty (no file emission).
EvalResult run_evaluation(const ExperimentConfig& cfg,
                          const std::string& checkpoint_dir,
                          const std::string& out_dir);

struct SweepResult {
  std::vector<double> values;
  std::vector<EvalResult> per_value;
  nlohmann::ordered_json table;  // paper-style relative-savings table
};

SweepResult run_sweep(const ExperimentConfig& cfg, const std::string& axis,
                      const std::vector<double>& values,
                      const std::string& checkpoint_dir,
                      const std::string& out_dir);

EpisodeStats run_simulate(const ExperimentConfig& cfg,
                          const std::string& policy, int day,
                          const std::string& checkpoint_dir,
                          const std::string& trace_path);

}  // namespace crowdship
