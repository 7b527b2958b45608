#include "crowdship/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "crowdship/log.hpp"

namespace fs = std::filesystem;

namespace crowdship {

RunContext build_context(const ExperimentConfig& cfg) {
  cfg.validate();
  RunContext ctx;
  ctx.cfg = cfg;
  if (!cfg.locations_csv.empty()) {
    ctx.locations = load_locations_csv(cfg.locations_csv);
    if (ctx.locations.size() != cfg.num_locations)
      log_warn("locations file has " + std::to_string(ctx.locations.size()) +
               " entries; config said " + std::to_string(cfg.num_locations));
  } else {
    ctx.locations = generate_locations(cfg.num_locations, cfg.radius_km,
                                       cfg.effective_location_seed());
  }
  ctx.table = build_travel_table(ctx.locations, cfg.speed_kmh);
  ctx.profile = build_profile(cfg.time, cfg.orders_per_day,
                              cfg.order_shipper_ratio, cfg.arrival_sigma,
                              cfg.order_hourly_shape, cfg.shipper_hourly_shape);
  ctx.features = make_feature_config(cfg.time, cfg.fees);
  ctx.features.count_scale = cfg.count_scale;
  return ctx;
}

namespace {

MlpShape value_shape(const RunContext& ctx) {
  MlpShape s;
  s.num_locations = ctx.locations.size();
  s.embed_dim = ctx.cfg.embed_dim;
  s.num_features = ctx.features.value_features();
  s.hidden = ctx.cfg.hidden;
  s.hidden_layers = ctx.cfg.hidden_layers;
  return s;
}

MlpShape pricing_shape(const RunContext& ctx) {
  MlpShape s = value_shape(ctx);
  s.num_features = ctx.features.pricing_features();
  return s;
}

void check_shape(const std::string& file, const char* net,
                 const MlpShape& got, const MlpShape& want) {
  auto bad = [&](const char* field, long g, long w) {
    throw std::runtime_error("checkpoint " + file + " (" + net + " net) field " +
                             field + " = " + std::to_string(g) +
                             " but the config expects " + std::to_string(w));
  };
  if (got.num_locations != want.num_locations)
    bad("num_locations", got.num_locations, want.num_locations);
  if (got.embed_dim != want.embed_dim)
    bad("embed_dim", got.embed_dim, want.embed_dim);
  if (got.num_features != want.num_features)
    bad("num_features", got.num_features, want.num_features);
  if (got.hidden != want.hidden) bad("hidden", got.hidden, want.hidden);
  if (got.hidden_layers != want.hidden_layers)
    bad("hidden_layers", got.hidden_layers, want.hidden_layers);
}

}  // namespace

NetBundle init_nets(const RunContext& ctx, const PolicySpec& spec) {
  NetBundle nets;
  if (spec.needs_value_net())
    nets.value = TargetPair::make(
        value_shape(ctx), derive_seed(ctx.cfg.master_seed, "init-value"),
        ctx.cfg.tau);
  if (spec.needs_pricing_net())
    nets.pricing = TargetPair::make(
        pricing_shape(ctx), derive_seed(ctx.cfg.master_seed, "init-pricing"),
        ctx.cfg.tau);
  return nets;
}

NetBundle load_nets(const RunContext& ctx, const PolicySpec& spec,
                    const std::string& checkpoint_dir) {
  if (checkpoint_dir.empty())
    throw std::runtime_error("policy '" + policy_id(spec) +
                             "' needs --checkpoints");
  NetBundle nets;
  if (spec.needs_value_net()) {
    std::string path = checkpoint_dir + "/value.net";
    nets.value = load_checkpoint(path);
    check_shape(path, "value", nets.value->online.shape(), value_shape(ctx));
  }
  if (spec.needs_pricing_net()) {
    std::string path = checkpoint_dir + "/pricing.net";
    nets.pricing = load_checkpoint(path);
    check_shape(path, "pricing", nets.pricing->online.shape(),
                pricing_shape(ctx));
  }
  return nets;
}

void save_nets(const NetBundle& nets, const RunContext& ctx,
               const PolicySpec& spec, const std::string& dir,
               const std::string& suffix) {
  fs::create_directories(dir);
  nlohmann::ordered_json meta = {{"policy", policy_id(spec)},
                                 {"master_seed", ctx.cfg.master_seed}};
  if (nets.value) {
    meta["role"] = "value";
    save_checkpoint(dir + "/value" + suffix + ".net", *nets.value, meta);
  }
  if (nets.pricing) {
    meta["role"] = "pricing";
    save_checkpoint(dir + "/pricing" + suffix + ".net", *nets.pricing, meta);
  }
}

std::map<int, double> coverage_shares(const MatchingInstance& instance,
                                      const MatchingSolution& solution) {
  std::map<int, double> shares;
  for (int pi : solution.chosen_pairs) {
    const auto& p = instance.pairs.at(pi);
    double each = p.cost / static_cast<double>(p.order_ids.size());
    for (int id : p.order_ids) shares[id] = each;
  }
  for (std::size_t i = 0; i < instance.order_ids.size(); ++i)
    if (!shares.count(instance.order_ids[i]))
      if (std::find(solution.delayed_orders.begin(),
                    solution.delayed_orders.end(),
                    instance.order_ids[i]) != solution.delayed_orders.end())
        shares[instance.order_ids[i]] = instance.delay_costs[i];
  return shares;
}

double pricing_target(const PricingExperience& exp, const Mlp& online_net,
                      const Mlp& target_net, const FeatureConfig& fc) {
  if (exp.terminal) return exp.reward;
  const int A = fc.num_multipliers;
  std::vector<int> locs(A, exp.next_dest);
  Eigen::MatrixXd feats(fc.pricing_features(), A);
  for (int a = 0; a < A; ++a) {
    for (int f = 0; f < 3; ++f) feats(f, a) = exp.next_base[f];
    for (int o = 0; o < A; ++o) feats(3 + o, a) = o == a ? 1.0 : 0.0;
  }
  // Double estimator: the online net picks the next action, the target net
  // prices it.
  Eigen::VectorXd q_online = online_net.forward(locs, feats);
  int pick = 0;
  for (int a = 1; a < A; ++a)
    if (q_online(a) < q_online(pick)) pick = a;
  Eigen::VectorXd q_target = target_net.forward(locs, feats);
  return exp.reward + q_target(pick);
}

Trainer::Trainer(const RunContext& ctx, const PolicySpec& spec,
                 NetBundle* nets)
    : ctx_(&ctx), spec_(spec), policy_tag_(policy_id(spec)), nets_(nets) {
  if (!nets_) throw std::invalid_argument("trainer needs networks");
  const auto& cfg = ctx.cfg;
  if (spec.needs_value_net()) {
    if (!nets_->value) throw std::invalid_argument("missing value networks");
    value_buffer_ = std::make_unique<ReplayBuffer<MatchingExperience>>(
        cfg.replay_capacity, cfg.per_alpha);
    value_opt_.lr = cfg.learning_rate;
  }
  if (spec.needs_pricing_net()) {
    if (!nets_->pricing) throw std::invalid_argument("missing pricing networks");
    pricing_buffer_ = std::make_unique<ReplayBuffer<PricingExperience>>(
        cfg.replay_capacity, cfg.per_alpha);
    pricing_opt_.lr = cfg.learning_rate;
  }
}

void Trainer::begin_episode(int episode) {
  const auto& cfg = ctx_->cfg;
  epsilon_ = std::max(cfg.epsilon_min,
                      cfg.epsilon_start *
                          std::pow(cfg.epsilon_decay, static_cast<double>(episode)));
  noise_std_ = cfg.noise_std * std::pow(cfg.noise_decay, static_cast<double>(episode));
  auto seed = [&](const char* name) {
    return derive_seed(cfg.master_seed, name, static_cast<std::uint64_t>(episode));
  };
  explore_rng_ = std::make_unique<RandomStream>(seed("explore"));
  noise_rng_ = std::make_unique<RandomStream>(seed("ilp-noise"));
  replay_rng_ = std::make_unique<RandomStream>(seed("replay"));
  pending_value_.clear();
  pending_pricing_.clear();
}

void Trainer::store_value_experience(const std::string& source_policy,
                                     const MatchingExperience& exp) {
  if (!value_buffer_)
    throw std::runtime_error("this policy pair trains no value network");
  if (source_policy != policy_tag_)
    throw std::runtime_error("experience from policy '" + source_policy +
                             "' cannot enter a '" + policy_tag_ + "' buffer");
  value_buffer_->push(exp);
}

void Trainer::store_pricing_experience(const std::string& source_policy,
                                       const PricingExperience& exp) {
  if (!pricing_buffer_)
    throw std::runtime_error("this policy pair trains no pricing network");
  if (source_policy != policy_tag_)
    throw std::runtime_error("experience from policy '" + source_policy +
                             "' cannot enter a '" + policy_tag_ + "' buffer");
  pricing_buffer_->push(exp);
}

std::size_t Trainer::value_buffer_size() const {
  return value_buffer_ ? value_buffer_->size() : 0;
}
std::size_t Trainer::pricing_buffer_size() const {
  return pricing_buffer_ ? pricing_buffer_->size() : 0;
}

void Trainer::complete_pendings(const SystemState& state,
                                const MatchDecision* md,
                                const std::vector<OrderFate>& prev_fates) {
  if (prev_fates.empty() &&
      (pending_value_.empty() && pending_pricing_.empty()))
    return;
  std::map<int, const OrderFate*> fate;
  for (const auto& f : prev_fates) fate[f.order_id] = &f;

  if (value_buffer_ && !pending_value_.empty()) {
    std::map<int, double> shares;
    if (md) shares = coverage_shares(md->clean, md->clean_solution);
    for (auto& pv : pending_value_) {
      const OrderFate* f = fate.at(pv.order_id);
      if (f->kind == OrderFate::Kind::Retained) {
        if (!md)
          throw std::runtime_error("retained order without a follow-up solve");
        pv.exp.target = shares.at(pv.order_id);
      } else {
        // Order exited before the next epoch: the realized cost is the story.
        pv.exp.target = f->realized_cost;
      }
      store_value_experience(policy_tag_, pv.exp);
    }
    pending_value_.clear();
  }

  if (pricing_buffer_ && !pending_pricing_.empty()) {
    std::map<int, const Order*> alive;
    for (const auto& o : state.orders) alive[o.id] = &o;
    double minute = ctx_->cfg.time.epoch_minute(state.epoch);
    int count = static_cast<int>(state.orders.size());
    for (auto& pp : pending_pricing_) {
      const OrderFate* f = fate.at(pp.order_id);
      pp.exp.reward = f->kind == OrderFate::Kind::Retained ? 0.0
                                                           : f->realized_cost;
      pp.exp.terminal = f->kind != OrderFate::Kind::Retained;
      if (!pp.exp.terminal) {
        const Order* o = alive.at(pp.order_id);
        pp.exp.next_dest = o->destination;
        value_features(o->remaining_epochs, minute, ctx_->features,
                       pp.exp.next_base);
        pp.exp.next_base[2] =
            std::min(static_cast<double>(count), ctx_->features.count_scale) /
            ctx_->features.count_scale;
      }
      store_pricing_experience(policy_tag_, pp.exp);
    }
    pending_pricing_.clear();
  }
}

void Trainer::record_pendings(const SystemState& state,
                              const PricingDecision* pd,
                              const MatchDecision& md) {
  (void)md;
  const auto& time = ctx_->cfg.time;
  double minute = time.epoch_minute(state.epoch);
  if (value_buffer_) {
    for (const auto& o : state.orders) {
      if (o.remaining_epochs < 1) continue;
      PendingValue pv;
      pv.order_id = o.id;
      pv.exp.dest = o.destination;
      value_features(o.remaining_epochs - 1, minute + time.delta_minutes,
                     ctx_->features, pv.exp.feats);
      pending_value_.push_back(pv);
    }
  }
  if (pricing_buffer_) {
    if (!pd) throw std::invalid_argument("pricing pendings need the decision");
    int count = static_cast<int>(state.orders.size());
    for (std::size_t i = 0; i < state.orders.size(); ++i) {
      const auto& o = state.orders[i];
      PendingPricing pp;
      pp.order_id = o.id;
      pp.exp.dest = o.destination;
      value_features(o.remaining_epochs, minute, ctx_->features, pp.exp.base);
      pp.exp.base[2] =
          std::min(static_cast<double>(count), ctx_->features.count_scale) /
          ctx_->features.count_scale;
      pp.exp.action = pd->action_index[i];
      pending_pricing_.push_back(pp);
    }
  }
}

void Trainer::end_episode(const std::vector<OrderFate>& final_fates) {
  std::map<int, const OrderFate*> fate;
  for (const auto& f : final_fates) fate[f.order_id] = &f;
  for (auto& pv : pending_value_) {
    const OrderFate* f = fate.at(pv.order_id);
    if (f->kind == OrderFate::Kind::Retained)
      throw std::runtime_error("order retained past the horizon");
    pv.exp.target = f->realized_cost;
    store_value_experience(policy_tag_, pv.exp);
  }
  pending_value_.clear();
  for (auto& pp : pending_pricing_) {
    const OrderFate* f = fate.at(pp.order_id);
    if (f->kind == OrderFate::Kind::Retained)
      throw std::runtime_error("order retained past the horizon");
    pp.exp.reward = f->realized_cost;
    pp.exp.terminal = true;
    store_pricing_experience(policy_tag_, pp.exp);
  }
  pending_pricing_.clear();
}

void Trainer::update_value_net() {
  const auto& cfg = ctx_->cfg;
  auto drawn = value_buffer_->sample(cfg.batch_size, cfg.per_beta, *replay_rng_);
  const int B = static_cast<int>(drawn.indices.size());
  std::vector<int> locs(B);
  Eigen::MatrixXd feats(2, B);
  Eigen::VectorXd targets(B);
  for (int i = 0; i < B; ++i) {
    const auto& e = (*value_buffer_)[drawn.indices[i]];
    locs[i] = e.dest;
    feats(0, i) = e.feats[0];
    feats(1, i) = e.feats[1];
    targets(i) = e.target;
  }
  Mlp::Tape tape;
  Eigen::VectorXd pred = nets_->value->online.forward(locs, feats, tape);
  Eigen::VectorXd td = pred - targets;
  Eigen::VectorXd w =
      Eigen::Map<const Eigen::VectorXd>(drawn.weights.data(), B);
  last_value_loss_ = (w.array() * td.array().square()).mean();
  Eigen::VectorXd upstream = 2.0 * (w.array() * td.array()) / B;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(nets_->value->online.params().size());
  nets_->value->online.backward(tape, upstream, grad);
  value_opt_.step(nets_->value->online.params(), grad);
  for (int i = 0; i < B; ++i)
    value_buffer_->set_priority(drawn.indices[i], std::abs(td(i)) + 1e-3);
  nets_->value->soft_update();
}

void Trainer::update_pricing_net() {
  const auto& cfg = ctx_->cfg;
  const auto& fc = ctx_->features;
  auto drawn =
      pricing_buffer_->sample(cfg.batch_size, cfg.per_beta, *replay_rng_);
  const int B = static_cast<int>(drawn.indices.size());
  const int A = fc.num_multipliers;
  const int F = fc.pricing_features();

  // Bootstrap values for the non-terminal samples in one batched forward.
  std::vector<int> nt;
  for (int i = 0; i < B; ++i)
    if (!(*pricing_buffer_)[drawn.indices[i]].terminal) nt.push_back(i);
  Eigen::VectorXd bootstrap = Eigen::VectorXd::Zero(B);
  if (!nt.empty()) {
    std::vector<int> locs(nt.size() * A);
    Eigen::MatrixXd feats(F, nt.size() * A);
    for (std::size_t k = 0; k < nt.size(); ++k) {
      const auto& e = (*pricing_buffer_)[drawn.indices[nt[k]]];
      for (int a = 0; a < A; ++a) {
        int col = static_cast<int>(k) * A + a;
        locs[col] = e.next_dest;
        for (int f = 0; f < 3; ++f) feats(f, col) = e.next_base[f];
        for (int o = 0; o < A; ++o) feats(3 + o, col) = o == a ? 1.0 : 0.0;
      }
    }
    // Double estimator: online net selects the action, target net prices it.
    Eigen::VectorXd q_online = nets_->pricing->online.forward(locs, feats);
    Eigen::VectorXd q_target = nets_->pricing->target.forward(locs, feats);
    for (std::size_t k = 0; k < nt.size(); ++k) {
      int pick = 0;
      for (int a = 1; a < A; ++a)
        if (q_online(k * A + a) < q_online(k * A + pick)) pick = a;
      bootstrap(nt[k]) = q_target(k * A + pick);
    }
  }

  std::vector<int> locs(B);
  Eigen::MatrixXd feats(F, B);
  Eigen::VectorXd targets(B);
  for (int i = 0; i < B; ++i) {
    const auto& e = (*pricing_buffer_)[drawn.indices[i]];
    locs[i] = e.dest;
    for (int f = 0; f < 3; ++f) feats(f, i) = e.base[f];
    for (int a = 0; a < A; ++a) feats(3 + a, i) = a == e.action ? 1.0 : 0.0;
    targets(i) = e.reward + bootstrap(i);
  }
  Mlp::Tape tape;
  Eigen::VectorXd pred = nets_->pricing->online.forward(locs, feats, tape);
  Eigen::VectorXd td = pred - targets;
  Eigen::VectorXd w =
      Eigen::Map<const Eigen::VectorXd>(drawn.weights.data(), B);
  last_pricing_loss_ = (w.array() * td.array().square()).mean();
  Eigen::VectorXd upstream = 2.0 * (w.array() * td.array()) / B;
  Eigen::VectorXd grad =
      Eigen::VectorXd::Zero(nets_->pricing->online.params().size());
  nets_->pricing->online.backward(tape, upstream, grad);
  pricing_opt_.step(nets_->pricing->online.params(), grad);
  for (int i = 0; i < B; ++i)
    pricing_buffer_->set_priority(drawn.indices[i], std::abs(td(i)) + 1e-3);
  nets_->pricing->soft_update();
}

void Trainer::update() {
  const auto min_size = static_cast<std::size_t>(ctx_->cfg.min_replay);
  if (value_buffer_ && value_buffer_->size() >= min_size) update_value_net();
  if (pricing_buffer_ && pricing_buffer_->size() >= min_size)
    update_pricing_net();
}

EpisodeStats run_episode(const RunContext& ctx, const PolicySpec& spec,
                         const NetBundle* nets, const EpisodeOptions& opt) {
  const auto& cfg = ctx.cfg;
  if (spec.needs_value_net() && (!nets || !nets->value))
    throw std::invalid_argument("neuradp matching needs value networks");
  if (spec.needs_pricing_net() && (!nets || !nets->pricing))
    throw std::invalid_argument("ddqn pricing needs pricing networks");

  PricingPolicy pricing =
      spec.pricing == PolicySpec::Pricing::Ddqn
          ? PricingPolicy::ddqn(&*nets->pricing, ctx.features)
          : PricingPolicy::fixed(cfg.fixed_multiplier);
  MatchingPolicy matching =
      spec.matching == PolicySpec::Matching::NeurAdp
          ? MatchingPolicy::neuradp(&*nets->value, ctx.features)
          : MatchingPolicy::greedy();

  Environment env(&ctx.table, cfg.time, cfg.fees, ctx.profile, cfg.master_seed,
                  opt.day, opt.repeat);
  const int T = cfg.time.num_epochs();
  const int A = ctx.features.num_multipliers;
  const int hours = static_cast<int>(std::ceil(cfg.time.horizon_minutes / 60.0));

  EpisodeStats st;
  st.day = opt.day;
  st.repeat = opt.repeat;
  st.policy = policy_id(spec);
  st.epoch_cost.assign(T, 0.0);
  st.multiplier_counts.assign(A, 0);
  st.action_by_hour.assign(hours, std::vector<long>(A, 0));

  Trainer* tr = opt.trainer;
  SystemState state = env.initial_state();
  std::vector<OrderFate> prev_fates;

  if (opt.trace)
    *opt.trace << "epoch,minute,orders,shippers,offers,accepted,delivered,"
                  "lost,delayed,realized_cost,cumulative_cost\n";

  for (int t = 0; t < T; ++t) {
    const double minute = cfg.time.epoch_minute(t);
    PricingDecision pd = pricing.decide(
        state.orders, minute, cfg.fees, tr ? tr->epsilon() : 0.0,
        tr ? tr->explore_rng() : nullptr);

    // Multipliers stamped on the state copy used for this epoch's stats.
    for (std::size_t i = 0; i < state.orders.size(); ++i)
      state.orders[i].current_multiplier = pd.multipliers[i];

    MatchDecision md = matching.decide(
        state, pd.multipliers, ctx.table, cfg.time, cfg.fees, cfg.kappa,
        tr ? tr->noise_std() : 0.0, tr ? tr->noise_rng() : nullptr);

    if (tr) {
      tr->complete_pendings(state,
                            spec.needs_value_net() ? &md : nullptr, prev_fates);
      tr->update();
      tr->record_pendings(state, spec.needs_pricing_net() ? &pd : nullptr, md);
    }

    ExogenousDraw draw = env.draw_exogenous(state, md.decisions.offers);
    StepResult sr = env.step(state, md.decisions, draw);

    st.planned_cost += md.planned_cost;
    st.epoch_cost[t] = sr.realized_cost;
    st.realized_cost += sr.realized_cost;
    st.offers += static_cast<long>(md.decisions.offers.size());
    st.delay_decisions += static_cast<long>(md.decisions.delayed.size());
    const int hour = std::min(hours - 1, static_cast<int>(minute / 60.0));
    for (std::size_t i = 0; i < state.orders.size(); ++i) {
      st.multiplier_counts[pd.action_index[i]] += 1;
      st.action_by_hour[hour][pd.action_index[i]] += 1;
    }
    long delivered_now = 0, lost_now = 0;
    for (const auto& f : sr.fates) {
      if (f.kind == OrderFate::Kind::Delivered) {
        ++delivered_now;
        st.payment_total += f.realized_cost;
      } else if (f.kind == OrderFate::Kind::Lost) {
        ++lost_now;
        st.lost_penalty_total += f.realized_cost;
      }
    }
    st.delivered += delivered_now;
    st.lost += lost_now;
    long accepted_now = 0;
    for (std::size_t i = 0; i < md.decisions.offers.size(); ++i) {
      if (!draw.accepted[i]) continue;
      ++accepted_now;
      st.detour_minutes_total += md.decisions.offers[i].detour;
      st.accepted_batch_orders += static_cast<long>(
          md.decisions.offers[i].priced.batch.order_ids.size());
    }
    st.accepted_offers += accepted_now;

    if (opt.trace) {
      *opt.trace << t << ',' << minute << ',' << state.orders.size() << ','
                 << state.shippers.size() << ','
                 << md.decisions.offers.size() << ',' << accepted_now << ','
                 << delivered_now << ',' << lost_now << ','
                 << md.decisions.delayed.size() << ',' << sr.realized_cost
                 << ',' << st.realized_cost << '\n';
    }

    prev_fates = std::move(sr.fates);
    state = std::move(sr.next);
  }

  if (tr) tr->end_episode(prev_fates);

  st.entered = env.orders_entered();
  st.rejected_at_entry = env.rejected_at_entry();

  // Double-entry check: the stats ledger must agree with the environment's
  // own accumulator, and every entered order must be accounted for.
  if (std::abs(st.realized_cost - env.total_realized_cost()) > 1e-6)
    throw std::runtime_error("cost reconciliation failed: stats " +
                             std::to_string(st.realized_cost) + " vs env " +
                             std::to_string(env.total_realized_cost()));
  if (!st.conserves())
    throw std::runtime_error("order conservation violated");
  if (std::abs(st.realized_cost -
               (st.payment_total + st.lost_penalty_total)) > 1e-6)
    throw std::runtime_error("payment ledger does not add up");
  return st;
}

namespace {

std::string fmt_value(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

TrainResult run_training(const ExperimentConfig& cfg,
                         const std::string& out_dir) {
  RunContext ctx = build_context(cfg);
  PolicySpec spec = parse_policy_id(cfg.policy);
  if (!spec.needs_value_net() && !spec.needs_pricing_net())
    log_warn("policy '" + cfg.policy + "' has nothing to train");

  fs::create_directories(out_dir);
  cfg.save(out_dir + "/config.toml");

  NetBundle nets = init_nets(ctx, spec);
  save_nets(nets, ctx, spec, out_dir, "_init");

  Trainer trainer(ctx, spec, &nets);
  TrainResult result;
  result.out_dir = out_dir;

  std::ofstream log_csv(out_dir + "/training_log.csv");
  log_csv << "episode,realized_cost,planned_cost,epsilon,noise_std,value_loss,"
             "pricing_loss,value_buffer,pricing_buffer,wall_ms\n";
  log_csv << std::setprecision(10);

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    auto t0 = std::chrono::steady_clock::now();
    trainer.begin_episode(ep);
    EpisodeOptions opt;
    opt.day = ep;
    opt.trainer = &trainer;
    EpisodeStats st;
    try {
      st = run_episode(ctx, spec, &nets, opt);
    } catch (const std::exception& e) {
      // Optimizer steps refuse non-finite gradients before touching the
      // parameters, so what we hold here is the last good state.
      log_error(std::string("training aborted: ") + e.what());
      save_nets(nets, ctx, spec, out_dir);
      throw;
    }
    auto t1 = std::chrono::steady_clock::now();
    TrainLogRow row;
    row.episode = ep;
    row.realized_cost = st.realized_cost;
    row.planned_cost = st.planned_cost;
    row.epsilon = trainer.epsilon();
    row.noise_std = trainer.noise_std();
    row.value_loss = trainer.last_value_loss();
    row.pricing_loss = trainer.last_pricing_loss();
    row.value_buffer = static_cast<long>(trainer.value_buffer_size());
    row.pricing_buffer = static_cast<long>(trainer.pricing_buffer_size());
    row.wall_ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    result.log.push_back(row);
    log_csv << row.episode << ',' << row.realized_cost << ','
            << row.planned_cost << ',' << row.epsilon << ',' << row.noise_std
            << ',' << row.value_loss << ',' << row.pricing_loss << ','
            << row.value_buffer << ',' << row.pricing_buffer << ','
            << row.wall_ms << '\n';
    log_csv.flush();
    if ((ep + 1) % 25 == 0 || ep + 1 == cfg.episodes)
      log_info("episode " + std::to_string(ep + 1) + "/" +
               std::to_string(cfg.episodes) + " cost " +
               fmt_value(st.realized_cost) + " eps " + fmt_value(row.epsilon));
    if (cfg.checkpoint_every > 0 && (ep + 1) % cfg.checkpoint_every == 0)
      save_nets(nets, ctx, spec, out_dir);
  }

  save_nets(nets, ctx, spec, out_dir);

  nlohmann::ordered_json summary;
  summary["policy"] = cfg.policy;
  summary["episodes"] = cfg.episodes;
  double tail = 0.0;
  int tail_n = std::min<int>(25, static_cast<int>(result.log.size()));
  for (int i = 0; i < tail_n; ++i)
    tail += result.log[result.log.size() - 1 - i].realized_cost;
  summary["tail_mean_cost"] = tail_n ? tail / tail_n : 0.0;
  std::ofstream(out_dir + "/summary.json") << summary.dump(2) << '\n';
  return result;
}

nlohmann::ordered_json EvalResult::to_json() const {
  nlohmann::ordered_json j;
  j["episodes"] = static_cast<int>(episodes.size());
  auto& pol = j["policies"] = nlohmann::ordered_json::array();
  for (const auto& s : summaries) pol.push_back(s.to_json());
  return j;
}

EvalResult run_evaluation(const ExperimentConfig& cfg,
                          const std::string& checkpoint_dir,
                          const std::string& out_dir) {
  RunContext ctx = build_context(cfg);
  EvalResult result;
  for (const auto& id : cfg.eval_policies) {
    PolicySpec spec = parse_policy_id(id);
    NetBundle nets;
    if (spec.needs_value_net() || spec.needs_pricing_net())
      nets = load_nets(ctx, spec, checkpoint_dir);
    std::vector<EpisodeStats> runs;
    for (int d = 0; d < cfg.eval_days; ++d) {
      for (int r = 0; r < cfg.eval_repeats; ++r) {
        EpisodeOptions opt;
        opt.day = cfg.eval_day_base + d;
        opt.repeat = r;
        runs.push_back(run_episode(ctx, spec, &nets, opt));
      }
    }
    result.summaries.push_back(summarize(runs));
    for (auto& r : runs) result.episodes.push_back(std::move(r));
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    fs::remove(out_dir + "/episodes.csv");
    for (const auto& e : result.episodes)
      append_episode_csv(out_dir + "/episodes.csv", e);
    write_epoch_cost_csv(out_dir + "/epoch_cost.csv", result.episodes);
    write_action_heatmap_csv(out_dir + "/actions.csv", result.episodes);
    std::ofstream(out_dir + "/summary.json") << result.to_json().dump(2) << '\n';
    cfg.save(out_dir + "/config.toml");
  }
  return result;
}

SweepResult run_sweep(const ExperimentConfig& cfg, const std::string& axis,
                      const std::vector<double>& values,
                      const std::string& checkpoint_dir,
                      const std::string& out_dir) {
  if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
  SweepResult result;
  result.values = values;
  for (double v : values) {
    ExperimentConfig cv = apply_axis(cfg, axis, v);
    std::string sub;
    if (!out_dir.empty()) {
      std::ostringstream os;
      os << out_dir << "/" << axis << "=" << v;
      sub = os.str();
    }
    result.per_value.push_back(run_evaluation(cv, checkpoint_dir, sub));
  }

  // Paper-style table: one row per value, policy means plus the relative gap
  // of each baseline over neuradp+ddqn when the latter is present.
  auto& rows = result.table = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < values.size(); ++i) {
    nlohmann::ordered_json row;
    row[axis] = values[i];
    double nd = NAN;
    for (const auto& s : result.per_value[i].summaries)
      if (s.policy == "neuradp+ddqn") nd = s.mean_cost;
    for (const auto& s : result.per_value[i].summaries) {
      row[s.policy] = s.mean_cost;
      if (!std::isnan(nd) && s.policy != "neuradp+ddqn" && nd != 0.0)
        row["pct_over_nd_" + s.policy] = (s.mean_cost - nd) / nd * 100.0;
    }
    rows.push_back(row);
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream(out_dir + "/sweep_" + axis + ".json")
        << result.table.dump(2) << '\n';
    std::ofstream csv(out_dir + "/sweep_" + axis + ".csv");
    if (!rows.empty()) {
      bool first = true;
      for (auto it = rows[0].begin(); it != rows[0].end(); ++it) {
        if (!first) csv << ',';
        csv << it.key();
        first = false;
      }
      csv << '\n';
      csv << std::setprecision(10);
      for (const auto& row : rows) {
        first = true;
        for (auto it = row.begin(); it != row.end(); ++it) {
          if (!first) csv << ',';
          if (it.value().is_number())
            csv << it.value().get<double>();
          else
            csv << it.value().dump();
          first = false;
        }
        csv << '\n';
      }
    }
  }
  return result;
}

EpisodeStats run_simulate(const ExperimentConfig& cfg,
                          const std::string& policy, int day,
                          const std::string& checkpoint_dir,
                          const std::string& trace_path) {
  ExperimentConfig c = cfg;
  c.policy = policy;
  RunContext ctx = build_context(c);
  PolicySpec spec = parse_policy_id(policy);
  NetBundle nets;
  if (spec.needs_value_net() || spec.needs_pricing_net()) {
    if (checkpoint_dir.empty()) {
      log_warn("no checkpoints given; simulating with freshly initialized nets");
      nets = init_nets(ctx, spec);
    } else {
      nets = load_nets(ctx, spec, checkpoint_dir);
    }
  }
  EpisodeOptions opt;
  opt.day = day;
  std::ofstream trace;
  if (!trace_path.empty()) {
    auto parent = fs::path(trace_path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    trace.open(trace_path);
    if (!trace) throw std::runtime_error("cannot write trace: " + trace_path);
    trace << std::setprecision(10);
    opt.trace = &trace;
  }
  return run_episode(ctx, spec, &nets, opt);
}

}  // namespace crowdship
