#include "crowdship/environment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "crowdship/log.hpp"

namespace crowdship {

void ArrivalProfile::validate(const TimeParams& time) const {
  const std::size_t T = static_cast<std::size_t>(time.num_epochs());
  if (order_mu.size() != T || shipper_mu.size() != T)
    throw std::invalid_argument("arrival profile length must equal the epoch count");
  for (double m : order_mu)
    if (m < 0.0 || !std::isfinite(m))
      throw std::invalid_argument("order arrival means must be finite and >= 0");
  for (double m : shipper_mu)
    if (m < 0.0 || !std::isfinite(m))
      throw std::invalid_argument("shipper arrival means must be finite and >= 0");
  if (sigma < 0.0) throw std::invalid_argument("arrival sigma must be >= 0");
}

int count_from_normal(double mu, double sigma, double z) {
  double v = mu + sigma * z;
  return v <= 0.0 ? 0 : static_cast<int>(std::lround(v));
}

ArrivalProfile build_profile(const TimeParams& time, double orders_per_day,
                             double order_shipper_ratio, double sigma,
                             const std::vector<double>& order_hourly_shape,
                             const std::vector<double>& shipper_hourly_shape) {
  if (orders_per_day <= 0.0) throw std::invalid_argument("orders_per_day must be positive");
  if (order_shipper_ratio <= 0.0)
    throw std::invalid_argument("order_shipper_ratio must be positive");
  if (order_hourly_shape.empty() || shipper_hourly_shape.empty())
    throw std::invalid_argument("hourly shapes must be non-empty");

  const int T = time.num_epochs();
  const int cutoff = time.cutoff_epoch();

  // Piecewise-linear interpolation of an hourly shape onto epoch midpoints.
  auto interp = [&](const std::vector<double>& shape, int t) {
    double hours = time.horizon_minutes / 60.0;
    double h = (time.epoch_minute(t) + 0.5 * time.delta_minutes) / 60.0;
    double pos = h / hours * static_cast<double>(shape.size() - 1);
    if (shape.size() == 1) return shape[0];
    int i = std::min(static_cast<int>(pos), static_cast<int>(shape.size()) - 2);
    double frac = pos - i;
    return shape[i] * (1.0 - frac) + shape[i + 1] * frac;
  };

  ArrivalProfile p;
  p.sigma = sigma;
  p.order_mu.resize(T);
  p.shipper_mu.resize(T);
  double osum = 0.0, ssum = 0.0;
  for (int t = 0; t < T; ++t) {
    p.order_mu[t] = t < cutoff ? interp(order_hourly_shape, t) : 0.0;
    p.shipper_mu[t] = interp(shipper_hourly_shape, t);
    osum += p.order_mu[t];
    ssum += p.shipper_mu[t];
  }
  if (osum <= 0.0 || ssum <= 0.0)
    throw std::invalid_argument("arrival shapes must have positive mass");
  const double shippers_per_day = orders_per_day / order_shipper_ratio;
  for (int t = 0; t < T; ++t) {
    p.order_mu[t] *= orders_per_day / osum;
    p.shipper_mu[t] *= shippers_per_day / ssum;
  }
  p.validate(time);
  return p;
}

Environment::Environment(const TravelTimeTable* table, const TimeParams& time,
                         const FeeSchedule& fees, const ArrivalProfile& profile,
                         std::uint64_t master_seed, int day, int repeat)
    : table_(table),
      time_(time),
      fees_(fees),
      profile_(&profile),
      arrival_seed_(derive_seed(master_seed, "arrivals",
                                static_cast<std::uint64_t>(day))),
      accept_seed_(derive_seed(master_seed, "acceptance",
                               static_cast<std::uint64_t>(day),
                               static_cast<std::uint64_t>(repeat))),
      arrival_rng_(arrival_seed_),
      accept_rng_(accept_seed_) {
  if (!table_) throw std::invalid_argument("environment needs a travel table");
  time_.validate();
  fees_.validate();
  profile.validate(time_);
  if (time_.order_cutoff_minutes < time_.max_delay_minutes)
    log_warn("order cutoff is shorter than the delivery promise; "
             "day-end losses are forced, not organic");
}

void Environment::sample_arrivals(int epoch, std::vector<Order>& orders,
                                  std::vector<CrowdShipper>& shippers,
                                  int& rejected) {
  const int T = time_.num_epochs();
  if (epoch < 0 || epoch >= T) throw std::out_of_range("arrival epoch out of range");

  // Fixed draw order per epoch: order count, shipper count, order spatial
  // weights, shipper spatial weights, then destinations/homes. The count draw
  // is consumed even past the cutoff so the stream layout never shifts.
  double zo = arrival_rng_.normal();
  int n_orders = count_from_normal(profile_->order_mu[epoch], profile_->sigma, zo);
  if (profile_->order_mu[epoch] <= 0.0) n_orders = 0;
  double zs = arrival_rng_.normal();
  int n_shippers =
      count_from_normal(profile_->shipper_mu[epoch], profile_->sigma, zs);

  // Spatial attractiveness: fresh Poisson(1) + 0.01 weight per non-store
  // location, separately for orders and shippers.
  const int n_locs = table_->n;
  std::vector<double> w(static_cast<std::size_t>(n_locs) - 1);
  for (auto& x : w) x = static_cast<double>(arrival_rng_.poisson(1.0)) + 0.01;
  std::vector<double> ws(w.size());
  for (auto& x : ws) x = static_cast<double>(arrival_rng_.poisson(1.0)) + 0.01;

  double minute = time_.epoch_minute(epoch);
  for (int k = 0; k < n_orders; ++k) {
    LocationId dest = 1 + arrival_rng_.categorical(w);
    ++orders_entered_;
    auto o = init_order(next_order_id_++, dest, minute, time_, *table_);
    if (o) {
      orders.push_back(*o);
    } else {
      ++rejected;
      ++rejected_at_entry_;
    }
  }
  for (int k = 0; k < n_shippers; ++k) {
    LocationId home = 1 + arrival_rng_.categorical(ws);
    shippers.push_back(CrowdShipper{next_shipper_id_++, home, epoch});
  }
}

SystemState Environment::initial_state() {
  // Restart the day from scratch: fresh streams, fresh counters.
  arrival_rng_ = RandomStream(arrival_seed_);
  accept_rng_ = RandomStream(accept_seed_);
  next_order_id_ = 0;
  next_shipper_id_ = 0;
  orders_entered_ = 0;
  rejected_at_entry_ = 0;
  total_realized_cost_ = 0.0;
  SystemState s;
  s.epoch = 0;
  int rejected = 0;
  sample_arrivals(0, s.orders, s.shippers, rejected);
  return s;
}

ExogenousDraw Environment::draw_exogenous(
    const SystemState& state, const std::vector<OfferedBatch>& offers) {
  ExogenousDraw draw;
  // One uniform per shipper present this epoch, in state order, so the
  // acceptance stream advances identically under every policy.
  std::map<int, double> u_by_shipper;
  for (const auto& s : state.shippers)
    u_by_shipper[s.id] = accept_rng_.uniform();
  draw.accepted.resize(offers.size());
  for (std::size_t i = 0; i < offers.size(); ++i) {
    auto it = u_by_shipper.find(offers[i].shipper_id);
    if (it == u_by_shipper.end())
      throw std::invalid_argument("offer references a shipper not present this epoch");
    draw.accepted[i] = it->second < offers[i].accept_prob ? 1 : 0;
  }
  if (state.epoch + 1 < time_.num_epochs())
    sample_arrivals(state.epoch + 1, draw.new_orders, draw.new_shippers,
                    draw.rejected_at_entry);
  return draw;
}

StepResult Environment::step(const SystemState& state,
                             const EpochDecisions& decisions,
                             const ExogenousDraw& draw) {
  if (draw.accepted.size() != decisions.offers.size())
    throw std::invalid_argument("acceptance draw does not match the offers");

  // Every outstanding order must be covered exactly once.
  std::set<int> outstanding;
  for (const auto& o : state.orders) outstanding.insert(o.id);
  std::set<int> covered;
  auto cover = [&](int id) {
    if (!outstanding.count(id))
      throw std::invalid_argument("decision covers unknown order " + std::to_string(id));
    if (!covered.insert(id).second)
      throw std::invalid_argument("order covered twice: " + std::to_string(id));
  };
  std::set<int> used_shippers;
  for (const auto& off : decisions.offers) {
    for (int id : off.priced.batch.order_ids) cover(id);
    if (!used_shippers.insert(off.shipper_id).second)
      throw std::invalid_argument("shipper assigned twice: " +
                                  std::to_string(off.shipper_id));
  }
  for (int id : decisions.delayed) cover(id);
  if (covered.size() != outstanding.size())
    throw std::invalid_argument("some orders left uncovered by the decision");

  std::map<int, const Order*> by_id;
  for (const auto& o : state.orders) by_id[o.id] = &o;

  StepResult result;
  result.next.epoch = state.epoch + 1;
  const bool day_over = result.next.epoch >= time_.num_epochs();

  auto retain_or_lose = [&](const Order& o) {
    if (o.remaining_epochs == 0 || day_over) {
      result.fates.push_back({o.id, OrderFate::Kind::Lost, fees_.lost_cost});
      result.realized_cost += fees_.lost_cost;
    } else {
      Order kept = o;
      kept.remaining_epochs -= 1;
      result.next.orders.push_back(kept);
      result.fates.push_back({o.id, OrderFate::Kind::Retained, 0.0});
    }
  };

  for (std::size_t i = 0; i < decisions.offers.size(); ++i) {
    const auto& off = decisions.offers[i];
    const auto& ids = off.priced.batch.order_ids;
    if (draw.accepted[i]) {
      double share_detour = off.detour * fees_.detour_fee /
                            static_cast<double>(ids.size());
      for (std::size_t k = 0; k < ids.size(); ++k) {
        double paid = off.priced.multipliers[k] * fees_.base_fee + share_detour;
        result.fates.push_back({ids[k], OrderFate::Kind::Delivered, paid});
        result.realized_cost += paid;
      }
    } else {
      for (int id : ids) retain_or_lose(*by_id[id]);
    }
  }
  for (int id : decisions.delayed) retain_or_lose(*by_id[id]);

  std::sort(result.fates.begin(), result.fates.end(),
            [](const OrderFate& a, const OrderFate& b) {
              return a.order_id < b.order_id;
            });
  std::sort(result.next.orders.begin(), result.next.orders.end(),
            [](const Order& a, const Order& b) { return a.id < b.id; });

  for (const auto& o : draw.new_orders) result.next.orders.push_back(o);
  result.next.shippers = draw.new_shippers;
  total_realized_cost_ += result.realized_cost;
  return result;
}

}  // namespace crowdship
