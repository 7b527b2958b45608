#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "crowdship/harness.hpp"

using namespace crowdship;
namespace fs = std::filesystem;

namespace {

// Small, fast experiment setup shared by the harness tests.
ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.num_locations = 30;
  cfg.orders_per_day = 20.0;
  cfg.hidden = 24;
  cfg.hidden_layers = 2;
  cfg.embed_dim = 4;
  cfg.min_replay = 50;
  cfg.batch_size = 8;
  cfg.replay_capacity = 2000;
  cfg.episodes = 1;
  cfg.eval_days = 2;
  cfg.eval_repeats = 1;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("coverage shares split pair costs and pass delay costs through") {
  MatchingInstance inst;
  inst.order_ids = {1, 2, 3};
  inst.delay_costs = {4.5, 1.25, 8.0};
  MatchingInstance::PairVar pv;
  pv.pair_index = 0;
  pv.order_ids = {1, 2};
  pv.shipper_id = 7;
  pv.cost = 3.4;
  inst.pairs = {pv};
  inst.shipper_ids = {7};

  MatchingSolution sol;
  sol.chosen_pairs = {0};
  sol.delayed_orders = {3};
  sol.objective = 3.4 + 8.0;

  auto shares = coverage_shares(inst, sol);
  REQUIRE(shares.size() == 3);
  CHECK(shares.at(1) == doctest::Approx(1.7));
  CHECK(shares.at(2) == doctest::Approx(1.7));
  CHECK(shares.at(3) == doctest::Approx(8.0));
}

TEST_CASE("pricing targets bootstrap through the target network") {
  TimeParams time;
  FeeSchedule fees;
  FeatureConfig fc = make_feature_config(time, fees);
  MlpShape shape;
  shape.num_locations = 12;
  shape.embed_dim = 3;
  shape.num_features = fc.pricing_features();
  shape.hidden = 10;
  shape.hidden_layers = 2;
  TargetPair nets = TargetPair::make(shape, 31, 0.001);

  PricingExperience term;
  term.reward = 8.0;
  term.terminal = true;
  CHECK(pricing_target(term, nets.online, nets.target, fc) ==
        doctest::Approx(8.0));

  PricingExperience exp;
  exp.reward = 4.2;
  exp.terminal = false;
  exp.next_dest = 5;
  exp.next_base[0] = 0.4;
  exp.next_base[1] = 0.6;
  exp.next_base[2] = 0.3;
  // Double estimator: the online net picks the action, the target net
  // supplies its value.
  int pick = -1;
  double best_online = 1e18;
  for (int a = 0; a < fc.num_multipliers; ++a) {
    std::vector<double> feats{0.4, 0.6, 0.3};
    for (int o = 0; o < fc.num_multipliers; ++o)
      feats.push_back(o == a ? 1.0 : 0.0);
    double q = nets.online.forward_one(5, feats);
    if (q < best_online) {
      best_online = q;
      pick = a;
    }
  }
  std::vector<double> pick_feats{0.4, 0.6, 0.3};
  for (int o = 0; o < fc.num_multipliers; ++o)
    pick_feats.push_back(o == pick ? 1.0 : 0.0);
  double expect = 4.2 + nets.target.forward_one(5, pick_feats);
  CHECK(pricing_target(exp, nets.online, nets.target, fc) ==
        doctest::Approx(expect).epsilon(1e-12));

  // With online == target (fresh TargetPair) the double estimator reduces to
  // the plain minimum over the target net's action values.
  double qmin = 1e18;
  for (int a = 0; a < fc.num_multipliers; ++a) {
    std::vector<double> feats{0.4, 0.6, 0.3};
    for (int o = 0; o < fc.num_multipliers; ++o)
      feats.push_back(o == a ? 1.0 : 0.0);
    qmin = std::min(qmin, nets.target.forward_one(5, feats));
  }
  CHECK(expect == doctest::Approx(4.2 + qmin).epsilon(1e-12));
}

TEST_CASE("context construction wires the shapes together") {
  ExperimentConfig cfg = tiny_config();
  RunContext ctx = build_context(cfg);
  CHECK(ctx.locations.size() == 30);
  CHECK(ctx.table.n == 30);
  CHECK(static_cast<int>(ctx.profile.order_mu.size()) ==
        cfg.time.num_epochs());
  CHECK(ctx.features.num_multipliers == 5);

  NetBundle nets = init_nets(ctx, parse_policy_id("neuradp+ddqn"));
  REQUIRE(nets.value);
  REQUIRE(nets.pricing);
  CHECK(nets.value->online.shape().num_locations == 30);
  CHECK(nets.value->online.shape().num_features == 2);
  CHECK(nets.pricing->online.shape().num_features == 8);

  NetBundle none = init_nets(ctx, parse_policy_id("greedy+fixed"));
  CHECK(!none.value);
  CHECK(!none.pricing);
}

TEST_CASE("episodes conserve orders under every policy") {
  ExperimentConfig cfg = tiny_config();
  RunContext ctx = build_context(cfg);
  for (const char* id : {"greedy+fixed", "greedy+ddqn", "neuradp+fixed",
                         "neuradp+ddqn"}) {
    PolicySpec spec = parse_policy_id(id);
    NetBundle nets = init_nets(ctx, spec);
    EpisodeOptions opt;
    opt.day = 11;
    EpisodeStats st = run_episode(ctx, spec, &nets, opt);
    CHECK(st.conserves());
    CHECK(st.entered > 0);
    CHECK(st.realized_cost ==
          doctest::Approx(st.payment_total + st.lost_penalty_total));
    CHECK(st.policy == id);
    // identical demand across policies: entered is policy-independent
    CHECK(st.entered == run_episode(ctx, parse_policy_id("greedy+fixed"),
                                    nullptr, opt)
                            .entered);
  }
}

TEST_CASE("trainer refuses experiences from another policy") {
  ExperimentConfig cfg = tiny_config();
  cfg.policy = "neuradp+ddqn";
  RunContext ctx = build_context(cfg);
  PolicySpec spec = parse_policy_id(cfg.policy);
  NetBundle nets = init_nets(ctx, spec);
  Trainer tr(ctx, spec, &nets);
  tr.begin_episode(0);
  MatchingExperience me;
  CHECK_NOTHROW(tr.store_value_experience("neuradp+ddqn", me));
  CHECK_THROWS(tr.store_value_experience("greedy+fixed", me));
  PricingExperience pe;
  CHECK_NOTHROW(tr.store_pricing_experience("neuradp+ddqn", pe));
  CHECK_THROWS(tr.store_pricing_experience("neuradp+fixed", pe));
  CHECK(tr.value_buffer_size() == 1);
  CHECK(tr.pricing_buffer_size() == 1);

  // A pair that trains nothing owns no buffers at all.
  ExperimentConfig gcfg = tiny_config();
  gcfg.policy = "greedy+fixed";
  RunContext gctx = build_context(gcfg);
  PolicySpec gspec = parse_policy_id("greedy+fixed");
  NetBundle gnets = init_nets(gctx, gspec);
  Trainer gt(gctx, gspec, &gnets);
  CHECK_THROWS(gt.store_value_experience("greedy+fixed", me));
}

TEST_CASE("zero-episode training leaves the checkpoints at initialization") {
  TempDir dir("crowdship_test_train0");
  ExperimentConfig cfg = tiny_config();
  cfg.episodes = 0;
  cfg.policy = "neuradp+ddqn";
  run_training(cfg, dir.str());
  CHECK(slurp(dir.str() + "/value.net") == slurp(dir.str() + "/value_init.net"));
  CHECK(slurp(dir.str() + "/pricing.net") ==
        slurp(dir.str() + "/pricing_init.net"));
}

TEST_CASE("one-episode training runs updates and logs") {
  TempDir dir("crowdship_test_train1");
  ExperimentConfig cfg = tiny_config();
  cfg.episodes = 2;
  cfg.policy = "neuradp+ddqn";
  TrainResult res = run_training(cfg, dir.str());
  REQUIRE(res.log.size() == 2);
  CHECK(res.log[0].episode == 0);
  CHECK(res.log[0].realized_cost > 0.0);
  CHECK(res.log[1].epsilon < res.log[0].epsilon);
  // Buffers fill well past the minimum within an episode at this scale.
  CHECK(res.log[1].value_buffer > cfg.min_replay);
  CHECK(res.log[1].value_loss > 0.0);
  CHECK(slurp(dir.str() + "/value.net") != slurp(dir.str() + "/value_init.net"));

  std::string log_text = slurp(dir.str() + "/training_log.csv");
  CHECK(log_text.find("episode,realized_cost") == 0);
  int lines = 0;
  for (char c : log_text) lines += c == '\n';
  CHECK(lines == 3);  // header + 2 rows

  // Re-running the same config reproduces everything except wall time.
  TempDir dir2("crowdship_test_train1b");
  run_training(cfg, dir2.str());
  auto strip_wall = [](std::string text) {
    std::stringstream in(text), out;
    std::string line;
    while (std::getline(in, line))
      out << line.substr(0, line.rfind(',')) << '\n';
    return out.str();
  };
  CHECK(strip_wall(slurp(dir.str() + "/training_log.csv")) ==
        strip_wall(slurp(dir2.str() + "/training_log.csv")));
  CHECK(slurp(dir.str() + "/value.net") == slurp(dir2.str() + "/value.net"));
  CHECK(slurp(dir.str() + "/pricing.net") ==
        slurp(dir2.str() + "/pricing.net"));
}

TEST_CASE("checkpoint loading validates shapes against the config") {
  TempDir dir("crowdship_test_shapes");
  ExperimentConfig cfg = tiny_config();
  cfg.episodes = 0;
  cfg.policy = "neuradp+fixed";
  run_training(cfg, dir.str());

  RunContext ctx = build_context(cfg);
  PolicySpec spec = parse_policy_id("neuradp+fixed");
  CHECK_NOTHROW(load_nets(ctx, spec, dir.str()));

  ExperimentConfig other = cfg;
  other.hidden = 12;
  RunContext octx = build_context(other);
  std::string msg;
  try {
    load_nets(octx, spec, dir.str());
  } catch (const std::exception& e) {
    msg = e.what();
  }
  CHECK(msg.find("hidden") != std::string::npos);
  CHECK_THROWS(load_nets(ctx, spec, ""));
  CHECK_THROWS(load_nets(ctx, spec, dir.str() + "/nope"));
}

TEST_CASE("evaluation writes stable artifacts") {
  TempDir dir("crowdship_test_eval");
  ExperimentConfig cfg = tiny_config();
  cfg.eval_policies = {"greedy+fixed", "greedy+ddqn"};
  // greedy+ddqn needs a pricing checkpoint
  TempDir ckpt("crowdship_test_eval_ckpt");
  ExperimentConfig tcfg = cfg;
  tcfg.policy = "greedy+ddqn";
  tcfg.episodes = 0;
  run_training(tcfg, ckpt.str());

  EvalResult r1 = run_evaluation(cfg, ckpt.str(), dir.str() + "/a");
  REQUIRE(r1.episodes.size() == 4);  // 2 policies x 2 days x 1 repeat
  REQUIRE(r1.summaries.size() == 2);
  CHECK(r1.summaries[0].policy == "greedy+fixed");
  CHECK(r1.summaries[0].episodes == 2);
  for (const auto& e : r1.episodes) CHECK(e.conserves());
  // Common random numbers: both policies saw the same demand.
  CHECK(r1.episodes[0].entered == r1.episodes[2].entered);

  run_evaluation(cfg, ckpt.str(), dir.str() + "/b");
  CHECK(slurp(dir.str() + "/a/summary.json") ==
        slurp(dir.str() + "/b/summary.json"));
  CHECK(slurp(dir.str() + "/a/episodes.csv") ==
        slurp(dir.str() + "/b/episodes.csv"));

  // Evaluation must not touch the checkpoints.
  std::string before = slurp(ckpt.str() + "/pricing.net");
  run_evaluation(cfg, ckpt.str(), "");
  CHECK(slurp(ckpt.str() + "/pricing.net") == before);
}

TEST_CASE("sweeps apply the axis and tabulate per-policy means") {
  TempDir dir("crowdship_test_sweep");
  ExperimentConfig cfg = tiny_config();
  cfg.eval_policies = {"greedy+fixed"};
  cfg.eval_days = 2;
  SweepResult res =
      run_sweep(cfg, "base_fee", {2.0, 4.0}, "", dir.str());
  REQUIRE(res.per_value.size() == 2);
  REQUIRE(res.table.size() == 2);
  CHECK(res.table[0]["base_fee"] == 2.0);
  double c2 = res.table[0]["greedy+fixed"].get<double>();
  double c4 = res.table[1]["greedy+fixed"].get<double>();
  CHECK(c2 < c4);  // identical decisions, higher payouts
  CHECK(fs::exists(dir.path / "sweep_base_fee.csv"));
  CHECK(fs::exists(dir.path / "base_fee=2" / "summary.json"));
  CHECK_THROWS(run_sweep(cfg, "base_fee", {}, "", dir.str()));
}

TEST_CASE("simulate writes a full per-epoch trace") {
  TempDir dir("crowdship_test_sim");
  ExperimentConfig cfg = tiny_config();
  std::string trace = dir.str() + "/trace.csv";
  EpisodeStats st = run_simulate(cfg, "greedy+fixed", 4, "", trace);
  CHECK(st.conserves());
  std::string text = slurp(trace);
  int lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == cfg.time.num_epochs() + 1);
  CHECK(text.find("epoch,minute") == 0);
}

TEST_CASE("summaries aggregate episode piles") {
  EpisodeStats a, b;
  a.policy = b.policy = "greedy+fixed";
  a.realized_cost = 10.0;
  b.realized_cost = 14.0;
  a.entered = b.entered = 10;
  a.delivered = 8;
  b.delivered = 6;
  a.lost = 2;
  b.lost = 4;
  a.offers = 10;
  b.offers = 10;
  a.accepted_offers = 8;
  b.accepted_offers = 6;
  a.detour_minutes_total = 16.0;
  b.detour_minutes_total = 12.0;
  a.accepted_batch_orders = 8;
  b.accepted_batch_orders = 9;

  Summary s = summarize({a, b});
  CHECK(s.episodes == 2);
  CHECK(s.mean_cost == doctest::Approx(12.0));
  CHECK(s.std_cost == doctest::Approx(2.0));  // population stddev
  CHECK(s.mean_detour == doctest::Approx(28.0 / 14.0));
  CHECK(s.mean_batch_size == doctest::Approx(17.0 / 14.0));
  CHECK(s.service_rate == doctest::Approx(14.0 / 20.0));
  CHECK(s.mean_accept_rate == doctest::Approx(14.0 / 20.0));

  auto j = s.to_json();
  CHECK(j["policy"] == "greedy+fixed");
  CHECK(j["mean_cost"].get<double>() == doctest::Approx(12.0));
  CHECK_THROWS(summarize({}));
}

TEST_CASE("episode csv appends with a single header") {
  TempDir dir("crowdship_test_csv");
  std::string path = dir.str() + "/eps.csv";
  EpisodeStats a;
  a.policy = "greedy+fixed";
  a.day = 1;
  a.realized_cost = 5.5;
  append_episode_csv(path, a);
  a.day = 2;
  append_episode_csv(path, a);
  std::string text = slurp(path);
  CHECK(text.find("policy") != std::string::npos);
  CHECK(text.rfind("policy") == text.find("policy"));  // header appears once
  int lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == 3);
}
