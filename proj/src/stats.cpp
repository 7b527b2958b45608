#include "crowdship/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace crowdship {

nlohmann::ordered_json Summary::to_json() const {
  return {{"policy", policy},
          {"episodes", episodes},
          {"mean_cost", mean_cost},
          {"std_cost", std_cost},
          {"mean_detour_minutes", mean_detour},
          {"mean_batch_size", mean_batch_size},
          {"mean_entered", mean_entered},
          {"mean_delivered", mean_delivered},
          {"mean_lost", mean_lost},
          {"service_rate", service_rate},
          {"offer_accept_rate", mean_accept_rate}};
}

Summary summarize(const std::vector<EpisodeStats>& episodes) {
  if (episodes.empty()) throw std::invalid_argument("no episodes to summarize");
  Summary s;
  s.policy = episodes.front().policy;
  s.episodes = static_cast<int>(episodes.size());
  double sum = 0.0, sum2 = 0.0;
  double detour = 0.0;
  long det_offers = 0, batch_orders = 0;
  long entered = 0, delivered = 0, lost = 0, offers = 0, accepted = 0;
  for (const auto& e : episodes) {
    sum += e.realized_cost;
    sum2 += e.realized_cost * e.realized_cost;
    detour += e.detour_minutes_total;
    det_offers += e.accepted_offers;
    batch_orders += e.accepted_batch_orders;
    entered += e.entered;
    delivered += e.delivered;
    lost += e.lost;
    offers += e.offers;
    accepted += e.accepted_offers;
  }
  const double n = static_cast<double>(episodes.size());
  s.mean_cost = sum / n;
  double var = sum2 / n - s.mean_cost * s.mean_cost;
  s.std_cost = var > 0.0 ? std::sqrt(var) : 0.0;
  s.mean_detour = det_offers ? detour / det_offers : 0.0;
  s.mean_batch_size =
      det_offers ? static_cast<double>(batch_orders) / det_offers : 0.0;
  s.mean_entered = entered / n;
  s.mean_delivered = delivered / n;
  s.mean_lost = lost / n;
  s.service_rate = entered ? static_cast<double>(delivered) / entered : 0.0;
  s.mean_accept_rate = offers ? static_cast<double>(accepted) / offers : 0.0;
  return s;
}

void append_episode_csv(const std::string& path, const EpisodeStats& s) {
  bool fresh = false;
  {
    std::ifstream probe(path);
    fresh = !probe.good() || probe.peek() == std::ifstream::traits_type::eof();
  }
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot write episode csv: " + path);
  if (fresh)
    out << "policy,day,repeat,realized_cost,planned_cost,entered,delivered,"
           "lost,rejected_at_entry,offers,accepted_offers,delay_decisions,"
           "payment_total,lost_penalty_total,mean_detour,mean_batch_size\n";
  out.precision(10);
  out << s.policy << ',' << s.day << ',' << s.repeat << ',' << s.realized_cost
      << ',' << s.planned_cost << ',' << s.entered << ',' << s.delivered << ','
      << s.lost << ',' << s.rejected_at_entry << ',' << s.offers << ','
      << s.accepted_offers << ',' << s.delay_decisions << ','
      << s.payment_total << ',' << s.lost_penalty_total << ','
      << s.mean_detour() << ',' << s.mean_batch_size() << '\n';
}

void write_epoch_cost_csv(const std::string& path,
                          const std::vector<EpisodeStats>& episodes) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write epoch cost csv: " + path);
  out << "policy,day,repeat,epoch,realized_cost\n";
  out.precision(10);
  for (const auto& e : episodes)
    for (std::size_t t = 0; t < e.epoch_cost.size(); ++t)
      out << e.policy << ',' << e.day << ',' << e.repeat << ',' << t << ','
          << e.epoch_cost[t] << '\n';
}

void write_action_heatmap_csv(const std::string& path,
                              const std::vector<EpisodeStats>& episodes) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write action heatmap csv: " + path);
  out << "policy,hour,action,count\n";
  // Pool counts across episodes per policy.
  std::vector<std::pair<std::string, std::vector<std::vector<long>>>> pools;
  for (const auto& e : episodes) {
    auto it = std::find_if(pools.begin(), pools.end(),
                           [&](const auto& p) { return p.first == e.policy; });
    if (it == pools.end()) {
      pools.push_back({e.policy, e.action_by_hour});
      continue;
    }
    for (std::size_t h = 0; h < e.action_by_hour.size(); ++h)
      for (std::size_t a = 0; a < e.action_by_hour[h].size(); ++a)
        it->second[h][a] += e.action_by_hour[h][a];
  }
  for (const auto& [policy, grid] : pools)
    for (std::size_t h = 0; h < grid.size(); ++h)
      for (std::size_t a = 0; a < grid[h].size(); ++a)
        out << policy << ',' << h << ',' << a << ',' << grid[h][a] << '\n';
}

}  // namespace crowdship
