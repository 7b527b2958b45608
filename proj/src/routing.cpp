#include "crowdship/routing.hpp"

#include <algorithm>
#include <numeric>

#include "crowdship/log.hpp"

namespace crowdship {

static constexpr int kBatchCap = 4;  // route search is factorial in batch size

std::vector<Batch> enumerate_batches(const std::vector<Order>& orders, int kappa) {
  if (kappa < 1) throw std::invalid_argument("kappa must be >= 1");
  int limit = std::min({kappa, kBatchCap, static_cast<int>(orders.size())});
  std::vector<int> ids;
  ids.reserve(orders.size());
  for (const auto& o : orders) ids.push_back(o.id);
  std::sort(ids.begin(), ids.end());

  std::vector<Batch> out;
  std::vector<int> pick;
  // Plain nested combination walk, emitted by size then lexicographic ids.
  auto rec = [&](auto&& self, int start, int want) -> void {
    if (want == 0) {
      out.push_back(Batch{pick});
      return;
    }
    for (int i = start; i <= static_cast<int>(ids.size()) - want; ++i) {
      pick.push_back(ids[i]);
      self(self, i + 1, want - 1);
      pick.pop_back();
    }
  };
  for (int size = 1; size <= limit; ++size) rec(rec, 0, size);
  return out;
}

bool route_feasible(const std::vector<const Order*>& visit_sequence,
                    LocationId home, double dispatch_minute,
                    const TravelTimeTable& table) {
  double clock = dispatch_minute;
  LocationId at = 0;
  for (const Order* o : visit_sequence) {
    clock += table(at, o->destination);
    if (clock > o->deadline_minute + 1e-9) return false;
    at = o->destination;
  }
  (void)home;  // the leg home has no deadline
  return true;
}

std::optional<Route> best_route(const std::vector<const Order*>& batch_orders,
                                const CrowdShipper& shipper,
                                double dispatch_minute,
                                const TravelTimeTable& table) {
  if (batch_orders.empty()) throw std::invalid_argument("empty batch");
  if (batch_orders.size() > kBatchCap)
    throw std::invalid_argument("batch exceeds the hard size cap");

  std::vector<int> idx(batch_orders.size());
  std::iota(idx.begin(), idx.end(), 0);
  // Visit permutations in lexicographic order-id order so the first strict
  // minimum is also the tie-break winner.
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return batch_orders[a]->id < batch_orders[b]->id;
  });

  std::optional<Route> best;
  std::vector<const Order*> seq(batch_orders.size());
  do {
    for (std::size_t i = 0; i < idx.size(); ++i) seq[i] = batch_orders[idx[i]];
    if (!route_feasible(seq, shipper.home, dispatch_minute, table)) continue;
    double total = 0.0;
    LocationId at = 0;
    for (const Order* o : seq) {
      total += table(at, o->destination);
      at = o->destination;
    }
    total += table(at, shipper.home);
    if (!best || total < best->total_minutes - 1e-12) {
      Route r;
      r.stops.push_back(0);
      for (const Order* o : seq) r.stops.push_back(o->destination);
      r.stops.push_back(shipper.home);
      for (const Order* o : seq) r.order_sequence.push_back(o->id);
      r.total_minutes = total;
      best = std::move(r);
    }
  } while (std::next_permutation(idx.begin(), idx.end(), [&](int a, int b) {
    return batch_orders[a]->id < batch_orders[b]->id;
  }));
  return best;
}

double detour_minutes(const Route& route, const CrowdShipper& shipper,
                      const TravelTimeTable& table) {
  return route.total_minutes - table(0, shipper.home);
}

std::vector<FeasiblePair> build_feasible_pairs(
    const std::vector<Order>& orders, const std::vector<CrowdShipper>& shippers,
    double dispatch_minute, int kappa, const TravelTimeTable& table) {
  std::vector<FeasiblePair> out;
  if (orders.empty() || shippers.empty()) return out;

  auto batches = enumerate_batches(orders, kappa);
  std::vector<const Order*> by_id_lookup;  // sparse map id -> order
  int max_id = 0;
  for (const auto& o : orders) max_id = std::max(max_id, o.id);
  by_id_lookup.assign(max_id + 1, nullptr);
  for (const auto& o : orders) by_id_lookup[o.id] = &o;

  std::vector<const Order*> batch_orders;
  for (const auto& s : shippers) {
    for (const auto& b : batches) {
      batch_orders.clear();
      for (int id : b.order_ids) batch_orders.push_back(by_id_lookup[id]);
      auto route = best_route(batch_orders, s, dispatch_minute, table);
      if (!route) continue;
      FeasiblePair fp;
      fp.batch = b;
      fp.shipper_id = s.id;
      fp.detour = detour_minutes(*route, s, table);
      fp.route = std::move(*route);
      out.push_back(std::move(fp));
    }
  }
  return out;
}

}  // namespace crowdship
