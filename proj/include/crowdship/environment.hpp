#pragma once
#include <cstdint>
#include <vector>

#include "crowdship/economics.hpp"
#include "crowdship/rng.hpp"
#include "crowdship/types.hpp"

namespace crowdship {

// Per-epoch arrival means; counts are round(max(0, Normal(mu, sigma))).
struct ArrivalProfile {
  std::vector<double> order_mu;    // length num_epochs; zeroed past cutoff
  std::vector<double> shipper_mu;  // length num_epochs
  double sigma = 1.0;

  void validate(const TimeParams& time) const;
};

// Hourly shapes linearly interpolated to epochs and normalized so orders sum
// to orders_per_day (before the cutoff) and shippers to
// orders_per_day / order_shipper_ratio over the full horizon.
ArrivalProfile build_profile(const TimeParams& time, double orders_per_day,
                             double order_shipper_ratio, double sigma,
                             const std::vector<double>& order_hourly_shape,
                             const std::vector<double>& shipper_hourly_shape);

int count_from_normal(double mu, double sigma, double z);

// One (batch, shipper) offer the policy decided to put out this epoch.
struct OfferedBatch {
  PricedBatch priced;
  int shipper_id = -1;
  double detour = 0.0;       // minutes
  double accept_prob = 0.0;  // psi evaluated at offer time
};

struct EpochDecisions {
  std::vector<OfferedBatch> offers;
  std::vector<int> delayed;  // order ids left unmatched
};

// Exogenous information revealed between t and t+1.
struct ExogenousDraw {
  std::vector<char> accepted;  // aligned with the offers
  std::vector<Order> new_orders;
  std::vector<CrowdShipper> new_shippers;
  int rejected_at_entry = 0;  // arrivals infeasible even by direct trip
};

struct OrderFate {
  enum class Kind { Delivered, Lost, Retained };
  int order_id = -1;
  Kind kind = Kind::Retained;
  double realized_cost = 0.0;  // this order's share of this epoch's cost
};

struct StepResult {
  SystemState next;
  double realized_cost = 0.0;
  std::vector<OrderFate> fates;
};

// Simulates one day. Arrival randomness depends only on (master_seed, day),
// never on decisions, so different policies face identical demand; acceptance
// draws live on a separate (master_seed, day, repeat) stream.
class Environment {
 public:
  Environment(const TravelTimeTable* table, const TimeParams& time,
              const FeeSchedule& fees, const ArrivalProfile& profile,
              std::uint64_t master_seed, int day, int repeat = 0);

  // Restarts the day: re-seeds both streams, resets all counters, and samples
  // the epoch-0 arrivals.
  SystemState initial_state();

  // Acceptance draws for the given offers (one uniform per present shipper,
  // consumed policy-independently), then arrivals for epoch+1. Must be called
  // once per epoch, in order.
  ExogenousDraw draw_exogenous(const SystemState& state,
                               const std::vector<OfferedBatch>& offers);

  // Applies decisions and the draw. Every outstanding order must be covered
  // exactly once by offers+delayed (throws otherwise). At the end of the
  // horizon all still-outstanding orders are charged as lost.
  StepResult step(const SystemState& state, const EpochDecisions& decisions,
                  const ExogenousDraw& draw);

  long orders_entered() const { return orders_entered_; }
  long rejected_at_entry() const { return rejected_at_entry_; }
  double total_realized_cost() const { return total_realized_cost_; }
  const TimeParams& time() const { return time_; }
  const FeeSchedule& fees() const { return fees_; }
  const TravelTimeTable& table() const { return *table_; }

 private:
  const TravelTimeTable* table_;
  TimeParams time_;
  FeeSchedule fees_;
  const ArrivalProfile* profile_;
  std::uint64_t arrival_seed_ = 0, accept_seed_ = 0;
  RandomStream arrival_rng_;
  RandomStream accept_rng_;
  int next_order_id_ = 0;
  int next_shipper_id_ = 0;
  long orders_entered_ = 0;
  long rejected_at_entry_ = 0;
  double total_realized_cost_ = 0.0;

  void sample_arrivals(int epoch, std::vector<Order>& orders,
                       std::vector<CrowdShipper>& shippers, int& rejected);
};

}  // namespace crowdship
