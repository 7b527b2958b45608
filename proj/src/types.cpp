#include "crowdship/types.hpp"

#include <cmath>
#include <string>

namespace crowdship {

void TimeParams::validate() const {
  if (horizon_minutes <= 0.0 || delta_minutes <= 0.0)
    throw std::invalid_argument("horizon and delta must be positive");
  double ratio = horizon_minutes / delta_minutes;
  if (std::abs(ratio - std::round(ratio)) > 1e-9)
    throw std::invalid_argument("delta must divide the horizon exactly");
  if (max_delay_minutes <= 0.0)
    throw std::invalid_argument("max delay must be positive");
  if (order_cutoff_minutes < 0.0 || order_cutoff_minutes > horizon_minutes)
    throw std::invalid_argument("order cutoff must lie inside the horizon");
  double c = order_cutoff_minutes / delta_minutes;
  if (std::abs(c - std::round(c)) > 1e-9)
    throw std::invalid_argument("delta must divide the order cutoff exactly");
}

std::optional<Order> init_order(int id, LocationId destination,
                                double entry_minute, const TimeParams& time,
                                const TravelTimeTable& table) {
  if (destination <= 0 || destination >= table.n)
    throw std::out_of_range("order destination out of range: " +
                            std::to_string(destination));
  double direct = table(0, destination);
  if (direct > time.max_delay_minutes) return std::nullopt;
  Order o;
  o.id = id;
  o.destination = destination;
  o.entry_minute = entry_minute;
  o.deadline_minute = entry_minute + time.max_delay_minutes;
  o.remaining_epochs = static_cast<int>(
      std::floor((time.max_delay_minutes - direct) / time.delta_minutes));
  return o;
}

}  // namespace crowdship
