#pragma once
#include <Eigen/Dense>
#include <string>
#include <vector>

#include "crowdship/environment.hpp"
#include "crowdship/matching.hpp"
#include "crowdship/nets.hpp"

namespace crowdship {

// Normalization constants shared by both nets so train and eval agree.
struct FeatureConfig {
  int max_epochs = 0;             // remaining-epoch budget of a fresh order
  double horizon_minutes = 0.0;
  double count_scale = 50.0;      // outstanding-order count divisor
  int num_multipliers = 0;

  int value_features() const { return 2; }            // epochs, clock
  int pricing_features() const { return 3 + num_multipliers; }
};

FeatureConfig make_feature_config(const TimeParams& time, const FeeSchedule& fees);

// Value-net input for an order observed with `remaining` epochs at `minute`.
void value_features(int remaining_epochs, double minute,
                    const FeatureConfig& fc, double* out);

// Pricing-net input: order state, candidate count, one-hot action.
void pricing_features(int remaining_epochs, double minute, int num_outstanding,
                      int action_index, const FeatureConfig& fc, double* out);

struct PricingDecision {
  std::vector<int> action_index;      // per order, into fees.multipliers
  std::vector<double> multipliers;    // resolved values
  std::vector<char> explored;         // 1 where the epsilon branch fired
};

class PricingPolicy {
 public:
  static PricingPolicy fixed(double multiplier);
  static PricingPolicy ddqn(const TargetPair* nets, const FeatureConfig& fc);

  bool learned() const { return kind_ == Kind::Ddqn; }
  double fixed_multiplier() const { return fixed_multiplier_; }

  // Greedy action = argmin online-net Q over multipliers (ties: smallest
  // index). With probability epsilon per order, sample instead from
  // softmax(-Q) (temperature 1). rng may be null when epsilon == 0.
  // `minute` is the decision clock (epoch start).
  PricingDecision decide(const std::vector<Order>& orders, double minute,
                         const FeeSchedule& fees, double epsilon,
                         RandomStream* rng) const;

 private:
  enum class Kind { Fixed, Ddqn } kind_ = Kind::Fixed;
  double fixed_multiplier_ = 1.0;
  const TargetPair* nets_ = nullptr;
  FeatureConfig fc_{};
};

struct MatchDecision {
  std::vector<FeasiblePair> pairs;     // feasible set this epoch
  MatchingInstance clean;              // unperturbed instance (neuradp only)
  MatchingSolution clean_solution;     // optimum of `clean` (neuradp only)
  MatchingSolution executed;           // what actually goes out
  EpochDecisions decisions;            // offers + delayed, from `executed`
  double planned_cost = 0.0;           // epoch_cost of the executed decision
};

class MatchingPolicy {
 public:
  static MatchingPolicy greedy();
  static MatchingPolicy neuradp(const TargetPair* value_nets,
                                const FeatureConfig& fc);

  bool learned() const { return kind_ == Kind::NeurAdp; }

  // multipliers align with state.orders. noise_std > 0 re-solves a perturbed
  // copy for the executed decision (training exploration); the clean solution
  // is always reported for learning targets.
  MatchDecision decide(const SystemState& state,
                       const std::vector<double>& multipliers,
                       const TravelTimeTable& table, const TimeParams& time,
                       const FeeSchedule& fees, int kappa, double noise_std,
                       RandomStream* noise_rng) const;

 private:
  enum class Kind { Greedy, NeurAdp } kind_ = Kind::Greedy;
  const TargetPair* value_nets_ = nullptr;
  FeatureConfig fc_{};

  MatchDecision decide_greedy(const SystemState& state,
                              const std::vector<double>& multipliers,
                              const TravelTimeTable& table,
                              const TimeParams& time, const FeeSchedule& fees,
                              int kappa) const;
};

// Policy ids: "neuradp+ddqn", "neuradp+fixed", "greedy+ddqn", "greedy+fixed".
struct PolicySpec {
  enum class Matching { Greedy, NeurAdp } matching = Matching::Greedy;
  enum class Pricing { Fixed, Ddqn } pricing = Pricing::Fixed;

  bool needs_value_net() const { return matching == Matching::NeurAdp; }
  bool needs_pricing_net() const { return pricing == Pricing::Ddqn; }
};

PolicySpec parse_policy_id(const std::string& id);
std::string policy_id(const PolicySpec& spec);

}  // namespace crowdship
