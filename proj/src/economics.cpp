#include "crowdship/economics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace crowdship {

void FeeSchedule::validate() const {
  if (base_fee <= 0.0) throw std::invalid_argument("base_fee must be positive");
  if (detour_fee < 0.0) throw std::invalid_argument("detour_fee must be >= 0");
  if (lost_cost < 0.0) throw std::invalid_argument("lost_cost must be >= 0");
  if (multipliers.empty()) throw std::invalid_argument("multiplier set is empty");
  for (double m : multipliers)
    if (m <= 0.0) throw std::invalid_argument("multipliers must be positive");
  if (!std::is_sorted(multipliers.begin(), multipliers.end()))
    throw std::invalid_argument("multipliers must be sorted ascending");
  if (accept_slope <= 0.0) throw std::invalid_argument("accept_slope must be positive");
}

PricedBatch make_priced_batch(const Batch& batch,
                              const std::vector<double>& multipliers,
                              const FeeSchedule& fees) {
  if (batch.order_ids.size() != multipliers.size())
    throw std::invalid_argument("one multiplier per batch order required");
  PricedBatch pb;
  pb.batch = batch;
  pb.multipliers = multipliers;
  for (double m : multipliers) {
    bool known = false;
    for (double allowed : fees.multipliers)
      if (std::abs(m - allowed) < 1e-12) known = true;
    if (!known) throw std::invalid_argument("multiplier outside the configured set");
    pb.adj_base_fee += m * fees.base_fee;
  }
  return pb;
}

double delay_cost(const Order& order, const FeeSchedule& fees) {
  return order.remaining_epochs == 0 ? fees.lost_cost : 0.0;
}

double batch_delay_cost(const std::vector<const Order*>& batch_orders,
                        const FeeSchedule& fees) {
  double c = 0.0;
  for (const Order* o : batch_orders) c += delay_cost(*o, fees);
  return c;
}

double match_cost(const PricedBatch& priced, double detour_mins,
                  const FeeSchedule& fees) {
  if (detour_mins < -1e-9) throw std::invalid_argument("negative detour");
  return priced.adj_base_fee + detour_mins * fees.detour_fee;
}

double acceptance_probability(const PricedBatch& priced,
                              const FeeSchedule& fees) {
  double flat = fees.base_fee * static_cast<double>(priced.batch.order_ids.size());
  if (priced.adj_base_fee <= 0.0)
    throw std::invalid_argument("adjusted base fee must be positive");
  double ratio = flat / priced.adj_base_fee;
  return 1.0 / (1.0 + std::exp(fees.accept_slope * ratio - fees.accept_offset));
}

double expected_match_cost(const PricedBatch& priced, double detour_mins,
                           const std::vector<const Order*>& batch_orders,
                           const FeeSchedule& fees) {
  double psi = acceptance_probability(priced, fees);
  return psi * match_cost(priced, detour_mins, fees) +
         (1.0 - psi) * batch_delay_cost(batch_orders, fees);
}

double epoch_cost(const std::vector<SelectedMatch>& matches,
                  const std::vector<const Order*>& delayed,
                  const FeeSchedule& fees) {
  std::set<int> seen;
  double total = 0.0;
  for (const auto& m : matches) {
    for (int id : m.order_ids)
      if (!seen.insert(id).second)
        throw std::invalid_argument("order covered twice in one epoch");
    total += m.expected_cost;
  }
  for (const Order* o : delayed) {
    if (!seen.insert(o->id).second)
      throw std::invalid_argument("order covered twice in one epoch");
    total += delay_cost(*o, fees);
  }
  return total;
}

}  // namespace crowdship
