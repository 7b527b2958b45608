#pragma once
#include <string>
#include <vector>

#include "crowdship/economics.hpp"
#include "crowdship/rng.hpp"

namespace crowdship {

// Assignment problem for one epoch. Column set: one binary per feasible
// (batch, shipper) pair plus one delay column per outstanding order. Every
// order is covered exactly once; every shipper serves at most one batch.
struct MatchingInstance {
  struct PairVar {
    int pair_index = -1;         // position in the FeasiblePair list
    std::vector<int> order_ids;  // sorted ascending
    int shipper_id = -1;
    double cost = 0.0;  // value-augmented expected match cost
  };
  std::vector<PairVar> pairs;
  std::vector<int> order_ids;      // all outstanding orders, sorted
  std::vector<double> delay_costs; // aligned; value-augmented delay cost
  std::vector<int> shipper_ids;    // distinct shippers with >= 1 pair

  void validate() const;  // throws on inconsistent column structure
};

struct MatchingSolution {
  std::vector<int> chosen_pairs;    // indices into instance.pairs, ascending
  std::vector<int> delayed_orders;  // order ids, ascending
  double objective = 0.0;
};

// Delay cost plus the value estimate of keeping the order (zero in its final
// epoch: expiry is terminal, there is nothing to carry forward).
double augmented_delay_cost(const Order& order, double v_hat,
                            const FeeSchedule& fees);

// psi * MatchCost + (1 - psi) * (batch delay cost + sum of the batch orders'
// value estimates): rejection leaves every order in the batch unmatched.
double augmented_match_cost(const PricedBatch& priced, double detour_mins,
                            const std::vector<const Order*>& batch_orders,
                            const std::vector<double>& v_hats,
                            const FeeSchedule& fees);

// Exact branch-and-bound over per-shipper choices. Deterministic: among
// optimal solutions, the lexicographically smallest chosen-pair index vector
// wins. Throws if the instance is inconsistent.
MatchingSolution solve_matching(const MatchingInstance& instance);

// Training-time exploration: independent Gaussian perturbation of every pair
// and delay coefficient. The clean instance is left untouched.
MatchingInstance perturb_costs(const MatchingInstance& instance, double stddev,
                               RandomStream& rng);

// Debug dump (JSON) of an instance and optionally its solution.
void dump_instance_json(const MatchingInstance& instance,
                        const MatchingSolution* solution,
                        const std::string& path);

}  // namespace crowdship
