#pragma once
#include <string>
#include <vector>

#include "json.hpp"

namespace crowdship {

struct EpisodeStats {
  int day = 0;
  int repeat = 0;
  std::string policy;

  double realized_cost = 0.0;   // what the day actually cost
  double planned_cost = 0.0;    // sum of per-epoch decision objectives
  long entered = 0;
  long delivered = 0;
  long lost = 0;
  long rejected_at_entry = 0;
  long offers = 0;
  long accepted_offers = 0;
  long delay_decisions = 0;       // order-epochs spent delayed
  double payment_total = 0.0;     // fees + detour compensation paid out
  double lost_penalty_total = 0.0;
  double detour_minutes_total = 0.0;  // accepted offers only
  long accepted_batch_orders = 0;     // orders delivered via accepted offers

  std::vector<double> epoch_cost;           // realized, per epoch
  std::vector<long> multiplier_counts;      // priced orders per action index
  std::vector<std::vector<long>> action_by_hour;  // [hour][action]

  double mean_detour() const {
    return accepted_offers ? detour_minutes_total / accepted_offers : 0.0;
  }
  double mean_batch_size() const {
    return accepted_offers
               ? static_cast<double>(accepted_batch_orders) / accepted_offers
               : 0.0;
  }
  // Every arrival is eventually delivered, lost, or was rejected on entry.
  bool conserves() const {
    return entered == delivered + lost + rejected_at_entry;
  }
};

struct Summary {
  std::string policy;
  int episodes = 0;
  double mean_cost = 0.0, std_cost = 0.0;
  double mean_detour = 0.0;
  double mean_batch_size = 0.0;
  double mean_delivered = 0.0, mean_lost = 0.0, mean_entered = 0.0;
  double service_rate = 0.0;  // delivered / entered, pooled
  double mean_accept_rate = 0.0;  // accepted / offers, pooled

  nlohmann::ordered_json to_json() const;
};

Summary summarize(const std::vector<EpisodeStats>& episodes);

// One row per episode; writes a header iff the file is new/empty.
void append_episode_csv(const std::string& path, const EpisodeStats& s);

// Plot-ready exports: per-epoch cost curves, detour histogram, batch sizes,
// hourly pricing-action counts.
void write_epoch_cost_csv(const std::string& path,
                          const std::vector<EpisodeStats>& episodes);
void write_action_heatmap_csv(const std::string& path,
                              const std::vector<EpisodeStats>& episodes);

}  // namespace crowdship
