#pragma once
#include <vector>

#include "crowdship/routing.hpp"
#include "crowdship/types.hpp"

namespace crowdship {

struct FeeSchedule {
  double base_fee = 4.0;     // per order
  double detour_fee = 0.1;   // per detour minute
  double lost_cost = 8.0;    // penalty when an order expires unserved
  std::vector<double> multipliers = {0.8, 0.9, 1.0, 1.1, 1.2};
  double accept_slope = 5.0;   // acceptance-curve steepness
  double accept_offset = 5.5;  // acceptance-curve midpoint shift

  void validate() const;
  bool operator==(const FeeSchedule&) const = default;
};

// A batch with the per-order price multipliers applied this epoch.
struct PricedBatch {
  Batch batch;
  std::vector<double> multipliers;  // aligned with batch.order_ids
  double adj_base_fee = 0.0;        // sum of multiplier * base_fee
};

PricedBatch make_priced_batch(const Batch& batch,
                              const std::vector<double>& multipliers,
                              const FeeSchedule& fees);

// Penalty if the order stays unserved this epoch: lost_cost when it is in its
// final epoch, else 0.
double delay_cost(const Order& order, const FeeSchedule& fees);
double batch_delay_cost(const std::vector<const Order*>& batch_orders,
                        const FeeSchedule& fees);

// Payment if the offer is accepted: adjusted base fees plus detour
// compensation.
double match_cost(const PricedBatch& priced, double detour_mins,
                  const FeeSchedule& fees);

// Probability the shipper takes the offer; decreasing in the effective
// discount (flat base fee sum vs adjusted), sigmoid-shaped.
double acceptance_probability(const PricedBatch& priced,
                              const FeeSchedule& fees);

// psi * MatchCost + (1 - psi) * DelayCost of the batch.
double expected_match_cost(const PricedBatch& priced, double detour_mins,
                           const std::vector<const Order*>& batch_orders,
                           const FeeSchedule& fees);

struct SelectedMatch {
  std::vector<int> order_ids;
  double expected_cost = 0.0;
};

// Objective value of one epoch's decision: sum of expected match costs plus
// delay costs of the unmatched orders. Throws if any order id appears twice.
double epoch_cost(const std::vector<SelectedMatch>& matches,
                  const std::vector<const Order*>& delayed,
                  const FeeSchedule& fees);

}  // namespace crowdship
