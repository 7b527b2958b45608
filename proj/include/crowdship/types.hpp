#pragma once
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "crowdship/geo.hpp"

namespace crowdship {

// Discretization of the operating day plus the service-level promise.
struct TimeParams {
  double horizon_minutes = 780.0;  // store hours
  double delta_minutes = 5.0;      // epoch length
  double max_delay_minutes = 90.0; // delivery promise D
  double order_cutoff_minutes = 120.0;  // no new orders in the last stretch

  int num_epochs() const {
    return static_cast<int>(std::llround(horizon_minutes / delta_minutes));
  }
  // First epoch with no order arrivals.
  int cutoff_epoch() const {
    return static_cast<int>(
        std::llround((horizon_minutes - order_cutoff_minutes) / delta_minutes));
  }
  double epoch_minute(int t) const { return t * delta_minutes; }
  void validate() const;
  bool operator==(const TimeParams&) const = default;
};

struct Order {
  int id = -1;
  LocationId destination = -1;
  double entry_minute = 0.0;
  double deadline_minute = 0.0;   // entry + D
  int remaining_epochs = 0;       // decremented each epoch it stays unmatched
  double current_multiplier = 1.0;  // price set for the current epoch
};

// In-store customers willing to deliver; present for exactly one epoch.
struct CrowdShipper {
  int id = -1;
  LocationId home = -1;
  int arrival_epoch = 0;
};

// Remaining-epoch budget at entry: floor((D - direct)/delta). Orders whose
// destination cannot be reached directly within D are infeasible (nullopt).
std::optional<Order> init_order(int id, LocationId destination,
                                double entry_minute, const TimeParams& time,
                                const TravelTimeTable& table);

struct SystemState {
  int epoch = 0;
  std::vector<CrowdShipper> shippers;  // C_t, all arrived this epoch
  std::vector<Order> orders;           // O_t, outstanding
};

}  // namespace crowdship
