#pragma once
#include <optional>
#include <vector>

#include "crowdship/types.hpp"

namespace crowdship {

// Unordered set of order ids, kept sorted ascending.
struct Batch {
  std::vector<int> order_ids;
};

// All nonempty subsets of the outstanding orders up to size min(kappa, 4).
// Deterministic order: by size, then lexicographic over order-id tuples.
std::vector<Batch> enumerate_batches(const std::vector<Order>& orders, int kappa);

// A concrete delivery tour: store -> destinations in sequence -> shipper home.
struct Route {
  std::vector<LocationId> stops;    // first is store 0, last is the home
  std::vector<int> order_sequence;  // order ids in visit order
  double total_minutes = 0.0;
};

// True when each destination along the sequence is reached by its order's
// deadline, with the tour departing the store at dispatch_minute.
bool route_feasible(const std::vector<const Order*>& visit_sequence,
                    LocationId home, double dispatch_minute,
                    const TravelTimeTable& table);

// Exhaustive search over visit permutations (batch sizes are tiny). Returns
// the minimum-total-time feasible route, or nullopt if none exists. Ties go to
// the lexicographically smallest order-id sequence.
std::optional<Route> best_route(const std::vector<const Order*>& batch_orders,
                                const CrowdShipper& shipper,
                                double dispatch_minute,
                                const TravelTimeTable& table);

// Extra time relative to the shipper's direct trip home.
double detour_minutes(const Route& route, const CrowdShipper& shipper,
                      const TravelTimeTable& table);

struct FeasiblePair {
  Batch batch;
  int shipper_id = -1;
  Route route;
  double detour = 0.0;  // minutes
};

// Cross product of feasible (batch, shipper) combinations for one epoch.
// Pairs appear grouped by shipper (state order), batches in enumerate order.
std::vector<FeasiblePair> build_feasible_pairs(
    const std::vector<Order>& orders, const std::vector<CrowdShipper>& shippers,
    double dispatch_minute, int kappa, const TravelTimeTable& table);

}  // namespace crowdship
