#include "crowdship/matching.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "json.hpp"

namespace crowdship {

void MatchingInstance::validate() const {
  if (!std::is_sorted(order_ids.begin(), order_ids.end()) ||
      std::adjacent_find(order_ids.begin(), order_ids.end()) != order_ids.end())
    throw std::invalid_argument("instance order ids must be sorted and unique");
  if (order_ids.size() != delay_costs.size())
    throw std::invalid_argument("one delay cost per order required");
  std::set<int> shippers(shipper_ids.begin(), shipper_ids.end());
  if (shippers.size() != shipper_ids.size())
    throw std::invalid_argument("duplicate shipper ids");
  for (const auto& p : pairs) {
    if (p.order_ids.empty())
      throw std::invalid_argument("pair with empty batch");
    if (!shippers.count(p.shipper_id))
      throw std::invalid_argument("pair references unknown shipper");
    for (int id : p.order_ids)
      if (!std::binary_search(order_ids.begin(), order_ids.end(), id))
        throw std::invalid_argument("pair references unknown order");
    if (!std::isfinite(p.cost))
      throw std::invalid_argument("non-finite pair cost");
  }
  for (double c : delay_costs)
    if (!std::isfinite(c)) throw std::invalid_argument("non-finite delay cost");
}

double augmented_delay_cost(const Order& order, double v_hat,
                            const FeeSchedule& fees) {
  // Expiring orders carry no future: the penalty is the whole story.
  if (order.remaining_epochs == 0) return fees.lost_cost;
  return v_hat;
}

double augmented_match_cost(const PricedBatch& priced, double detour_mins,
                            const std::vector<const Order*>& batch_orders,
                            const std::vector<double>& v_hats,
                            const FeeSchedule& fees) {
  if (batch_orders.size() != v_hats.size())
    throw std::invalid_argument("one value estimate per batch order required");
  double psi = acceptance_probability(priced, fees);
  double if_rejected = 0.0;
  for (std::size_t i = 0; i < batch_orders.size(); ++i) {
    if (batch_orders[i]->remaining_epochs == 0)
      if_rejected += fees.lost_cost;  // rejection at the last epoch = loss
    else
      if_rejected += v_hats[i];
  }
  return psi * match_cost(priced, detour_mins, fees) + (1.0 - psi) * if_rejected;
}

namespace {

// Branch-and-bound over shippers: each level commits one shipper to a pair or
// to "no batch". Costs are tracked as deltas against the everyone-delayed
// baseline, so only improving pairs matter.
struct Solver {
  const MatchingInstance& inst;
  std::map<int, int> order_pos;              // id -> index
  std::vector<std::vector<int>> by_shipper;  // pair indices per shipper level
  std::vector<double> delta;                 // pairwise cost - covered delays
  std::vector<double> level_bound;  // best achievable delta from level onward
  std::vector<double> share_suffix;  // cheapest per-order share by (level, order)
  std::vector<double> scratch;
  int max_batch = 1;

  std::vector<int> current, best_choice;
  std::vector<char> used;  // per order index
  double best_obj = std::numeric_limits<double>::infinity();
  bool grouped = true;  // pair indices ascending across levels?
  static constexpr double kTie = 1e-9;

  explicit Solver(const MatchingInstance& instance) : inst(instance) {
    inst.validate();
    for (std::size_t i = 0; i < inst.order_ids.size(); ++i)
      order_pos[inst.order_ids[i]] = static_cast<int>(i);

    std::map<int, int> shipper_pos;
    for (int sid : inst.shipper_ids) {
      shipper_pos[sid] = static_cast<int>(by_shipper.size());
      by_shipper.emplace_back();
    }
    delta.resize(inst.pairs.size());
    for (std::size_t pi = 0; pi < inst.pairs.size(); ++pi) {
      const auto& p = inst.pairs[pi];
      double covered = 0.0;
      for (int id : p.order_ids) covered += inst.delay_costs[order_pos[id]];
      delta[pi] = p.cost - covered;
      by_shipper[shipper_pos[p.shipper_id]].push_back(static_cast<int>(pi));
    }
    for (auto& v : by_shipper) std::sort(v.begin(), v.end());

    // When each level's pair indices sit above every earlier level's (true for
    // instances built shipper-by-shipper), the DFS emits choices in sorted
    // order and prefix comparisons against the incumbent become meaningful.
    int prev_max = -1;
    for (const auto& v : by_shipper) {
      if (v.empty()) continue;
      if (v.front() <= prev_max) {
        grouped = false;
        break;
      }
      prev_max = v.back();
    }

    // Admissible bound: each remaining shipper can at best contribute its
    // cheapest delta ignoring conflicts, never worse than choosing nothing.
    level_bound.assign(by_shipper.size() + 1, 0.0);
    for (int lvl = static_cast<int>(by_shipper.size()) - 1; lvl >= 0; --lvl) {
      double best_delta = 0.0;
      for (int pi : by_shipper[lvl]) best_delta = std::min(best_delta, delta[pi]);
      level_bound[lvl] = level_bound[lvl + 1] + best_delta;
    }

    // Per-order bound ingredients: the cheapest per-order share of any pair
    // delta at levels >= lvl (a pair's delta split evenly across its orders
    // under-estimates each share, so summing shares stays admissible). When
    // many shippers chase the same order the per-level bound double-counts it;
    // summing the most negative shares over *distinct* orders does not.
    max_batch = 1;
    for (const auto& p : inst.pairs)
      max_batch = std::max(max_batch, static_cast<int>(p.order_ids.size()));
    const int L = static_cast<int>(by_shipper.size());
    const int O = static_cast<int>(inst.order_ids.size());
    share_suffix.assign(static_cast<std::size_t>(L + 1) * O, 0.0);
    for (int lvl = L - 1; lvl >= 0; --lvl) {
      double* cur = &share_suffix[static_cast<std::size_t>(lvl) * O];
      const double* nxt = &share_suffix[static_cast<std::size_t>(lvl + 1) * O];
      std::copy(nxt, nxt + O, cur);
      for (int pi : by_shipper[lvl]) {
        const auto& p = inst.pairs[pi];
        double share = delta[pi] / static_cast<double>(p.order_ids.size());
        if (share >= 0.0) continue;
        for (int id : p.order_ids) {
          int o = order_pos[id];
          cur[o] = std::min(cur[o], share);
        }
      }
    }
    used.assign(inst.order_ids.size(), 0);
  }

  // Sum of the most negative per-order shares still claimable from this level
  // on: at most one batch per remaining level, at most max_batch orders each.
  double order_bound(int level) {
    const int O = static_cast<int>(inst.order_ids.size());
    const double* shares = &share_suffix[static_cast<std::size_t>(level) * O];
    scratch.clear();
    for (int o = 0; o < O; ++o)
      if (!used[o] && shares[o] < 0.0) scratch.push_back(shares[o]);
    std::size_t cap = static_cast<std::size_t>(
        (static_cast<int>(by_shipper.size()) - level) * max_batch);
    if (scratch.size() > cap) {
      std::nth_element(scratch.begin(), scratch.begin() + cap, scratch.end());
      scratch.resize(cap);
    }
    double sum = 0.0;
    for (double s : scratch) sum += s;
    return sum;
  }

  void consider(double obj) {
    std::vector<int> sorted = current;
    std::sort(sorted.begin(), sorted.end());
    if (obj < best_obj - kTie ||
        (obj < best_obj + kTie &&
         std::lexicographical_compare(sorted.begin(), sorted.end(),
                                      best_choice.begin(), best_choice.end()))) {
      best_obj = std::min(best_obj, obj);
      best_choice = std::move(sorted);
    }
  }

  // Whether some completion of the current prefix could still beat best_choice
  // lexicographically. Completions only append larger indices (grouped case),
  // so once the prefix exceeds the incumbent at a position, no tie can win.
  bool tie_can_improve() const {
    if (!grouped) return true;
    std::size_t n = std::min(current.size(), best_choice.size());
    for (std::size_t k = 0; k < n; ++k)
      if (current[k] != best_choice[k]) return current[k] < best_choice[k];
    return current.size() < best_choice.size();
  }

  void dfs(int level, double obj_delta) {
    // Equal-cost subtrees are kept only while a lexicographic win is still
    // possible; otherwise insist on a strict improvement. This keeps plateaus
    // of interchangeable pairs (e.g. a zero detour fee) from being enumerated.
    const double slack = tie_can_improve() ? kTie : -kTie;
    if (obj_delta + level_bound[level] > best_obj + slack) return;
    if (obj_delta + order_bound(level) > best_obj + slack) return;
    if (level == static_cast<int>(by_shipper.size())) {
      consider(obj_delta);
      return;
    }
    for (int pi : by_shipper[level]) {
      const auto& p = inst.pairs[pi];
      bool clash = false;
      for (int id : p.order_ids)
        if (used[order_pos[id]]) {
          clash = true;
          break;
        }
      if (clash) continue;
      for (int id : p.order_ids) used[order_pos[id]] = 1;
      current.push_back(pi);
      dfs(level + 1, obj_delta + delta[pi]);
      current.pop_back();
      for (int id : p.order_ids) used[order_pos[id]] = 0;
    }
    dfs(level + 1, obj_delta);  // shipper goes home without a batch
  }

  MatchingSolution run() {
    // Greedy incumbent: cheapest deltas first; tightens pruning early.
    std::vector<int> order(inst.pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (delta[a] != delta[b]) return delta[a] < delta[b];
      return a < b;
    });
    std::set<int> taken_shippers;
    double greedy_delta = 0.0;
    std::vector<int> greedy_choice;
    for (int pi : order) {
      if (delta[pi] >= 0.0) break;
      const auto& p = inst.pairs[pi];
      if (taken_shippers.count(p.shipper_id)) continue;
      bool clash = false;
      for (int id : p.order_ids)
        if (used[order_pos[id]]) clash = true;
      if (clash) continue;
      for (int id : p.order_ids) used[order_pos[id]] = 1;
      taken_shippers.insert(p.shipper_id);
      greedy_delta += delta[pi];
      greedy_choice.push_back(pi);
    }
    std::fill(used.begin(), used.end(), 0);
    std::sort(greedy_choice.begin(), greedy_choice.end());
    best_obj = greedy_delta;
    best_choice = greedy_choice;

    current.clear();
    dfs(0, 0.0);

    MatchingSolution sol;
    sol.chosen_pairs = best_choice;
    std::sort(sol.chosen_pairs.begin(), sol.chosen_pairs.end());
    std::vector<char> covered(inst.order_ids.size(), 0);
    double obj = 0.0;
    for (int pi : sol.chosen_pairs) {
      obj += inst.pairs[pi].cost;
      for (int id : inst.pairs[pi].order_ids) covered[order_pos[id]] = 1;
    }
    for (std::size_t i = 0; i < inst.order_ids.size(); ++i)
      if (!covered[i]) {
        sol.delayed_orders.push_back(inst.order_ids[i]);
        obj += inst.delay_costs[i];
      }
    sol.objective = obj;
    return sol;
  }
};

}  // namespace

MatchingSolution solve_matching(const MatchingInstance& instance) {
  Solver solver(instance);
  return solver.run();
}

MatchingInstance perturb_costs(const MatchingInstance& instance, double stddev,
                               RandomStream& rng) {
  if (stddev < 0.0) throw std::invalid_argument("noise stddev must be >= 0");
  MatchingInstance noisy = instance;
  for (auto& p : noisy.pairs) p.cost += stddev * rng.normal();
  for (auto& c : noisy.delay_costs) c += stddev * rng.normal();
  return noisy;
}

void dump_instance_json(const MatchingInstance& instance,
                        const MatchingSolution* solution,
                        const std::string& path) {
  nlohmann::ordered_json j;
  j["order_ids"] = instance.order_ids;
  j["delay_costs"] = instance.delay_costs;
  j["shipper_ids"] = instance.shipper_ids;
  auto& pairs = j["pairs"] = nlohmann::ordered_json::array();
  for (const auto& p : instance.pairs) {
    pairs.push_back({{"pair_index", p.pair_index},
                     {"orders", p.order_ids},
                     {"shipper", p.shipper_id},
                     {"cost", p.cost}});
  }
  if (solution) {
    j["solution"] = {{"chosen_pairs", solution->chosen_pairs},
                     {"delayed_orders", solution->delayed_orders},
                     {"objective", solution->objective}};
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write instance dump: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace crowdship
