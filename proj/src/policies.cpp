#include "crowdship/policies.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace crowdship {

FeatureConfig make_feature_config(const TimeParams& time,
                                  const FeeSchedule& fees) {
  FeatureConfig fc;
  fc.max_epochs = static_cast<int>(
      std::floor(time.max_delay_minutes / time.delta_minutes));
  fc.horizon_minutes = time.horizon_minutes;
  fc.num_multipliers = static_cast<int>(fees.multipliers.size());
  return fc;
}

void value_features(int remaining_epochs, double minute,
                    const FeatureConfig& fc, double* out) {
  out[0] = fc.max_epochs > 0
               ? static_cast<double>(remaining_epochs) / fc.max_epochs
               : 0.0;
  out[1] = minute / fc.horizon_minutes;
}

void pricing_features(int remaining_epochs, double minute, int num_outstanding,
                      int action_index, const FeatureConfig& fc, double* out) {
  value_features(remaining_epochs, minute, fc, out);
  out[2] = std::min(static_cast<double>(num_outstanding), fc.count_scale) /
           fc.count_scale;
  for (int a = 0; a < fc.num_multipliers; ++a)
    out[3 + a] = a == action_index ? 1.0 : 0.0;
}

PricingPolicy PricingPolicy::fixed(double multiplier) {
  PricingPolicy p;
  p.kind_ = Kind::Fixed;
  p.fixed_multiplier_ = multiplier;
  return p;
}

PricingPolicy PricingPolicy::ddqn(const TargetPair* nets,
                                  const FeatureConfig& fc) {
  if (!nets) throw std::invalid_argument("ddqn pricing needs networks");
  PricingPolicy p;
  p.kind_ = Kind::Ddqn;
  p.nets_ = nets;
  p.fc_ = fc;
  return p;
}

static int multiplier_index(const FeeSchedule& fees, double m) {
  for (std::size_t i = 0; i < fees.multipliers.size(); ++i)
    if (std::abs(fees.multipliers[i] - m) < 1e-12) return static_cast<int>(i);
  throw std::invalid_argument("multiplier not in the configured set");
}

PricingDecision PricingPolicy::decide(const std::vector<Order>& orders,
                                      double minute, const FeeSchedule& fees,
                                      double epsilon,
                                      RandomStream* rng) const {
  const int n = static_cast<int>(orders.size());
  PricingDecision d;
  d.action_index.resize(n);
  d.multipliers.resize(n);
  d.explored.assign(n, 0);
  if (n == 0) return d;

  if (kind_ == Kind::Fixed) {
    int idx = multiplier_index(fees, fixed_multiplier_);
    for (int i = 0; i < n; ++i) {
      d.action_index[i] = idx;
      d.multipliers[i] = fixed_multiplier_;
    }
    return d;
  }

  const int A = fc_.num_multipliers;
  if (A != static_cast<int>(fees.multipliers.size()))
    throw std::invalid_argument("feature config disagrees with the fee schedule");
  if (epsilon > 0.0 && !rng)
    throw std::invalid_argument("exploration needs a random stream");

  // One batched forward over all (order, action) pairs.
  std::vector<int> locs(static_cast<std::size_t>(n) * A);
  Eigen::MatrixXd feats(fc_.pricing_features(), static_cast<std::size_t>(n) * A);
  std::vector<double> buf(fc_.pricing_features());
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < A; ++a) {
      int col = i * A + a;
      locs[col] = orders[i].destination;
      pricing_features(orders[i].remaining_epochs, minute, n, a, fc_,
                       buf.data());
      for (int f = 0; f < fc_.pricing_features(); ++f) feats(f, col) = buf[f];
    }
  }
  Eigen::VectorXd q = nets_->online.forward(locs, feats);

  for (int i = 0; i < n; ++i) {
    bool explore = epsilon > 0.0 && rng->bernoulli(epsilon);
    int choice;
    if (explore) {
      // Boltzmann over negated costs; temperature 1.
      double qmin = q(i * A);
      for (int a = 1; a < A; ++a) qmin = std::min(qmin, q(i * A + a));
      std::vector<double> w(A);
      for (int a = 0; a < A; ++a) w[a] = std::exp(-(q(i * A + a) - qmin));
      choice = rng->categorical(w);
      d.explored[i] = 1;
    } else {
      choice = 0;
      for (int a = 1; a < A; ++a)
        if (q(i * A + a) < q(i * A + choice)) choice = a;
    }
    d.action_index[i] = choice;
    d.multipliers[i] = fees.multipliers[choice];
  }
  return d;
}

MatchingPolicy MatchingPolicy::greedy() { return MatchingPolicy{}; }

MatchingPolicy MatchingPolicy::neuradp(const TargetPair* value_nets,
                                       const FeatureConfig& fc) {
  if (!value_nets) throw std::invalid_argument("neuradp needs value networks");
  MatchingPolicy p;
  p.kind_ = Kind::NeurAdp;
  p.value_nets_ = value_nets;
  p.fc_ = fc;
  return p;
}

namespace {

std::map<int, int> position_by_id(const std::vector<Order>& orders) {
  std::map<int, int> pos;
  for (std::size_t i = 0; i < orders.size(); ++i)
    pos[orders[i].id] = static_cast<int>(i);
  return pos;
}

OfferedBatch make_offer(const FeasiblePair& fp,
                        const std::vector<Order>& orders,
                        const std::map<int, int>& pos,
                        const std::vector<double>& multipliers,
                        const FeeSchedule& fees) {
  std::vector<double> ms;
  ms.reserve(fp.batch.order_ids.size());
  for (int id : fp.batch.order_ids) ms.push_back(multipliers[pos.at(id)]);
  OfferedBatch off;
  off.priced = make_priced_batch(fp.batch, ms, fees);
  off.shipper_id = fp.shipper_id;
  off.detour = fp.detour;
  off.accept_prob = acceptance_probability(off.priced, fees);
  return off;
}

}  // namespace

MatchDecision MatchingPolicy::decide_greedy(
    const SystemState& state, const std::vector<double>& multipliers,
    const TravelTimeTable& table, const TimeParams& time,
    const FeeSchedule& fees, int kappa) const {
  MatchDecision md;
  double minute = time.epoch_minute(state.epoch);
  md.pairs = build_feasible_pairs(state.orders, state.shippers, minute, kappa,
                                  table);
  auto pos = position_by_id(state.orders);
  std::vector<char> assigned(state.orders.size(), 0);
  std::set<int> shippers_taken;

  // Orders choose by urgency: fewest remaining epochs first (ties: id), each
  // taking the minimum-detour pair whose shipper and co-orders are still
  // free (detour ties: smallest shipper id; within a shipper the pair list
  // is already in enumeration order, so the first candidate stands).
  std::vector<int> urgency(state.orders.size());
  for (std::size_t i = 0; i < urgency.size(); ++i)
    urgency[i] = static_cast<int>(i);
  std::sort(urgency.begin(), urgency.end(), [&](int a, int b) {
    const Order& oa = state.orders[a];
    const Order& ob = state.orders[b];
    if (oa.remaining_epochs != ob.remaining_epochs)
      return oa.remaining_epochs < ob.remaining_epochs;
    return oa.id < ob.id;
  });
  std::vector<int> chosen;
  for (int oi : urgency) {
    if (assigned[oi]) continue;
    const int want = state.orders[oi].id;
    int best = -1;
    for (std::size_t i = 0; i < md.pairs.size(); ++i) {
      const auto& fp = md.pairs[i];
      if (shippers_taken.count(fp.shipper_id)) continue;
      bool has_order = false, free = true;
      for (int id : fp.batch.order_ids) {
        if (id == want) has_order = true;
        if (assigned[pos.at(id)]) free = false;
      }
      if (!has_order || !free) continue;
      if (best < 0 || fp.detour < md.pairs[best].detour - 1e-12 ||
          (fp.detour < md.pairs[best].detour + 1e-12 &&
           fp.shipper_id < md.pairs[best].shipper_id))
        best = static_cast<int>(i);
    }
    if (best < 0) continue;
    for (int id : md.pairs[best].batch.order_ids) assigned[pos.at(id)] = 1;
    shippers_taken.insert(md.pairs[best].shipper_id);
    chosen.push_back(best);
  }
  std::sort(chosen.begin(), chosen.end());
  for (int i : chosen) {
    md.executed.chosen_pairs.push_back(i);
    md.decisions.offers.push_back(
        make_offer(md.pairs[i], state.orders, pos, multipliers, fees));
  }
  for (const auto& o : state.orders)
    if (!assigned[pos.at(o.id)]) {
      md.executed.delayed_orders.push_back(o.id);
      md.decisions.delayed.push_back(o.id);
    }

  std::vector<SelectedMatch> sel;
  std::vector<const Order*> delayed_ptrs;
  for (std::size_t i = 0; i < md.decisions.offers.size(); ++i) {
    const auto& off = md.decisions.offers[i];
    std::vector<const Order*> batch_orders;
    for (int id : off.priced.batch.order_ids)
      batch_orders.push_back(&state.orders[pos.at(id)]);
    sel.push_back({off.priced.batch.order_ids,
                   expected_match_cost(off.priced, off.detour, batch_orders,
                                       fees)});
  }
  for (int id : md.decisions.delayed)
    delayed_ptrs.push_back(&state.orders[pos.at(id)]);
  md.planned_cost = epoch_cost(sel, delayed_ptrs, fees);
  md.executed.objective = md.planned_cost;
  return md;
}

MatchDecision MatchingPolicy::decide(const SystemState& state,
                                     const std::vector<double>& multipliers,
                                     const TravelTimeTable& table,
                                     const TimeParams& time,
                                     const FeeSchedule& fees, int kappa,
                                     double noise_std,
                                     RandomStream* noise_rng) const {
  if (multipliers.size() != state.orders.size())
    throw std::invalid_argument("one multiplier per outstanding order required");
  if (kind_ == Kind::Greedy)
    return decide_greedy(state, multipliers, table, time, fees, kappa);

  MatchDecision md;
  double minute = time.epoch_minute(state.epoch);
  md.pairs = build_feasible_pairs(state.orders, state.shippers, minute, kappa,
                                  table);
  auto pos = position_by_id(state.orders);

  // Value estimates for the would-be-retained state (one epoch later, one
  // epoch shorter); expiring orders are terminal and carry none.
  std::vector<double> v_hat(state.orders.size(), 0.0);
  {
    std::vector<int> locs;
    std::vector<int> which;
    for (std::size_t i = 0; i < state.orders.size(); ++i) {
      if (state.orders[i].remaining_epochs >= 1) {
        locs.push_back(state.orders[i].destination);
        which.push_back(static_cast<int>(i));
      }
    }
    if (!locs.empty()) {
      Eigen::MatrixXd feats(fc_.value_features(), locs.size());
      double buf[2];
      for (std::size_t k = 0; k < which.size(); ++k) {
        const auto& o = state.orders[which[k]];
        value_features(o.remaining_epochs - 1, minute + time.delta_minutes,
                       fc_, buf);
        feats(0, k) = buf[0];
        feats(1, k) = buf[1];
      }
      Eigen::VectorXd v = value_nets_->target.forward(locs, feats);
      for (std::size_t k = 0; k < which.size(); ++k) v_hat[which[k]] = v(k);
    }
  }

  // Assemble the augmented assignment problem.
  md.clean.order_ids.reserve(state.orders.size());
  for (const auto& o : state.orders) md.clean.order_ids.push_back(o.id);
  std::sort(md.clean.order_ids.begin(), md.clean.order_ids.end());
  md.clean.delay_costs.resize(md.clean.order_ids.size());
  for (std::size_t i = 0; i < md.clean.order_ids.size(); ++i) {
    const auto& o = state.orders[pos.at(md.clean.order_ids[i])];
    md.clean.delay_costs[i] =
        augmented_delay_cost(o, v_hat[pos.at(o.id)], fees);
  }
  for (const auto& s : state.shippers) md.clean.shipper_ids.push_back(s.id);
  for (std::size_t i = 0; i < md.pairs.size(); ++i) {
    const auto& fp = md.pairs[i];
    std::vector<const Order*> batch_orders;
    std::vector<double> batch_vals;
    std::vector<double> ms;
    for (int id : fp.batch.order_ids) {
      batch_orders.push_back(&state.orders[pos.at(id)]);
      batch_vals.push_back(v_hat[pos.at(id)]);
      ms.push_back(multipliers[pos.at(id)]);
    }
    PricedBatch pb = make_priced_batch(fp.batch, ms, fees);
    MatchingInstance::PairVar pv;
    pv.pair_index = static_cast<int>(i);
    pv.order_ids = fp.batch.order_ids;
    pv.shipper_id = fp.shipper_id;
    pv.cost = augmented_match_cost(pb, fp.detour, batch_orders, batch_vals, fees);
    md.clean.pairs.push_back(std::move(pv));
  }

  md.clean_solution = solve_matching(md.clean);
  if (noise_std > 0.0) {
    if (!noise_rng)
      throw std::invalid_argument("cost noise needs a random stream");
    md.executed = solve_matching(perturb_costs(md.clean, noise_std, *noise_rng));
  } else {
    md.executed = md.clean_solution;
  }

  md.decisions.delayed = md.executed.delayed_orders;
  std::vector<SelectedMatch> sel;
  for (int pi : md.executed.chosen_pairs) {
    const auto& fp = md.pairs[md.clean.pairs[pi].pair_index];
    md.decisions.offers.push_back(
        make_offer(fp, state.orders, pos, multipliers, fees));
    std::vector<const Order*> batch_orders;
    for (int id : fp.batch.order_ids)
      batch_orders.push_back(&state.orders[pos.at(id)]);
    sel.push_back({fp.batch.order_ids,
                   expected_match_cost(md.decisions.offers.back().priced,
                                       fp.detour, batch_orders, fees)});
  }
  std::vector<const Order*> delayed_ptrs;
  for (int id : md.decisions.delayed)
    delayed_ptrs.push_back(&state.orders[pos.at(id)]);
  md.planned_cost = epoch_cost(sel, delayed_ptrs, fees);
  return md;
}

PolicySpec parse_policy_id(const std::string& id) {
  auto plus = id.find('+');
  if (plus != std::string::npos) {
    std::string m = id.substr(0, plus), p = id.substr(plus + 1);
    PolicySpec spec;
    bool ok_m = true, ok_p = true;
    if (m == "neuradp") spec.matching = PolicySpec::Matching::NeurAdp;
    else if (m == "greedy") spec.matching = PolicySpec::Matching::Greedy;
    else ok_m = false;
    if (p == "ddqn") spec.pricing = PolicySpec::Pricing::Ddqn;
    else if (p == "fixed") spec.pricing = PolicySpec::Pricing::Fixed;
    else ok_p = false;
    if (ok_m && ok_p) return spec;
  }
  throw std::invalid_argument(
      "unknown policy '" + id +
      "'; valid: neuradp+ddqn, neuradp+fixed, greedy+ddqn, greedy+fixed");
}

std::string policy_id(const PolicySpec& spec) {
  std::string m = spec.matching == PolicySpec::Matching::NeurAdp ? "neuradp"
                                                                 : "greedy";
  std::string p = spec.pricing == PolicySpec::Pricing::Ddqn ? "ddqn" : "fixed";
  return m + "+" + p;
}

}  // namespace crowdship
