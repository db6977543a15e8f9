#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "marco/search.hpp"
#include "marco/training.hpp"
#include "oracles.hpp"

using namespace marco;
using ad::Matrix;
using ad::Tape;
using ad::Var;

namespace {

TrainConfig small_improvement(Problem problem) {
  TrainConfig cfg = TrainConfig::desk(problem);
  cfg.encoder = {8, 1, 2, 16, 10.0, AttentionVariant::Modulated};
  cfg.batch_size = 4;
  cfg.episodes_per_epoch = 3;
  cfg.epochs = 1;
  cfg.n_min = 8;
  cfg.n_max = 10;
  cfg.episode_length = 6;
  return cfg;
}

TrainConfig small_constructive() {
  TrainConfig cfg = TrainConfig::desk(Problem::Tsp);
  cfg.encoder = {8, 1, 2, 16, 10.0, AttentionVariant::Modulated};
  cfg.batch_size = 2;
  cfg.episodes_per_epoch = 2;
  cfg.epochs = 1;
  cfg.phase2_epochs = 1;
  cfg.n_min = 5;
  cfg.n_max = 6;
  cfg.constructions = 2;
  return cfg;
}

}  // namespace

TEST(Rewards, ImprovementExamples) {
  EXPECT_DOUBLE_EQ(improvement_reward(10, 8, false, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(improvement_reward(7, 8, true, 1.0), -1.0);
  EXPECT_DOUBLE_EQ(improvement_reward(8, 8, true, 0.01), -0.01);
  EXPECT_DOUBLE_EQ(improvement_reward(7, 8, false, 1.0), 0.0);
}

TEST(Rewards, ConstructiveExamples) {
  EXPECT_DOUBLE_EQ(constructive_reward(5.0, -5.0, 0.0, 0.1), 0.0);
  EXPECT_NEAR(constructive_reward(5.0, -5.0, 1.0, 0.1), -0.1, 1e-15);
  const std::vector<double> lengths{3.0, 3.0, 3.0};
  std::vector<double> rewards;
  for (double l : lengths) rewards.push_back(-l);
  const double b = pomo_baseline(rewards);
  const std::vector<double> sims{0.2, 0.5, 1.0};
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(constructive_reward(lengths[i], b, sims[i], 0.1), -0.1 * sims[i], 1e-15);
}

TEST(Rewards, PomoBaseline) {
  EXPECT_DOUBLE_EQ(pomo_baseline(std::vector<double>{-5, -7}), -6.0);
  EXPECT_DOUBLE_EQ(pomo_baseline(std::vector<double>{-3.5}), -3.5);
  EXPECT_DOUBLE_EQ(pomo_baseline(std::vector<double>{2, 2, 2, 2}), 2.0);
  Rng rng(1);
  std::vector<double> r;
  for (int i = 0; i < 37; ++i) r.push_back(rng.uniform(-10, 0));
  const double b = pomo_baseline(r);
  double adv = 0.0;
  for (double x : r) adv += x - b;
  EXPECT_LT(std::abs(adv / r.size()), 1e-6);
}

TEST(Returns, Examples) {
  EXPECT_EQ(discounted_returns(std::vector<double>{1, 1}, 0.95), (std::vector<double>{1.95, 1.0}));
  EXPECT_EQ(discounted_returns(std::vector<double>{1, 2, 3}, 1.0), (std::vector<double>{6, 5, 3}));
  EXPECT_THROW(discounted_returns(std::vector<double>{1}, 0.0), std::invalid_argument);
}

TEST(Returns, MatchNaiveDoubleLoop) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> r(1 + rng.below(40));
    for (auto& x : r) x = rng.uniform(-2, 2);
    const double gamma = rng.uniform(0.5, 1.0);
    const auto got = discounted_returns(r, gamma);
    const auto want = oracle::naive_returns(r, gamma);
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-10);
  }
}

TEST(Update, ZeroAdvantageLeavesParametersUnchanged) {
  Policy p = Policy::improvement(Problem::MaxCut, {8, 1, 2, 16, 10.0, AttentionVariant::Modulated},
                                 FeatureLayout::None, 3);
  const Policy before = p;
  AdamW opt(p.params(), 0.9, 0.999, 1e-8, 0.01);
  const auto g = gen_erdos_renyi(6, 0.5, 1);
  Tape t;
  Var lp = ad::log_softmax_masked(p.improvement_logits(t, Matrix::Zero(6, 3), p.edge_features(g)),
                                  std::vector<std::uint8_t>(6, 1));
  p.params().zero_grad();
  t.backward(ad::pick(lp, 0, 2), 0.0);
  const auto res = reinforce_update(p.params(), opt, 0.0, 1e-3, 1.0);
  EXPECT_FALSE(res.applied);
  for (const auto& prm : p.params().all()) EXPECT_EQ(prm.value, before.params().get(prm.name).value);
}

TEST(Update, ClipScalesGlobalNormToOne) {
  ParameterSet ps;
  auto& a = ps.add("a", 2, 2);
  auto& b = ps.add("b", 1, 3);
  a.grad = Matrix::Constant(2, 2, 3.0);
  b.grad = Matrix::Constant(1, 3, -4.0);
  const double before = clip_grad_norm(ps, 1.0);
  EXPECT_NEAR(before, std::sqrt(4 * 9.0 + 3 * 16.0), 1e-12);
  EXPECT_NEAR(global_grad_norm(ps), 1.0, 1e-6);
  a.grad *= 0.1;
  b.grad *= 0.1;
  clip_grad_norm(ps, 1.0);
  EXPECT_NEAR(global_grad_norm(ps), 0.1, 1e-12);
}

TEST(Update, NonFiniteLossSkipsStep) {
  ParameterSet ps;
  auto& a = ps.add("a", 1, 1);
  a.grad = Matrix::Constant(1, 1, 1.0);
  AdamW opt(ps, 0.9, 0.999, 1e-8, 0.0);
  const auto res = reinforce_update(ps, opt, std::nan(""), 0.1, 1.0);
  EXPECT_FALSE(res.applied);
  EXPECT_EQ(a.value(0, 0), 0.0);
  EXPECT_EQ(a.grad(0, 0), 0.0);
}

TEST(Update, TwoArmedBanditConverges) {
  ParameterSet ps;
  auto& logits = ps.add("logits", 1, 2);
  AdamW opt(ps, 0.9, 0.999, 1e-8, 0.0);
  Rng rng(4);
  const std::vector<std::uint8_t> all{1, 1};
  double baseline = 0.0;
  for (int step = 0; step < 500; ++step) {
    Tape t;
    Var lp = ad::log_softmax_masked(t.param(logits), all);
    const std::vector<double> probs{std::exp(lp.value()(0, 0)), std::exp(lp.value()(0, 1))};
    const int a = static_cast<int>(rng.categorical(probs));
    const double reward = a == 1 ? 1.0 : 0.0;
    const double advantage = reward - baseline;
    baseline = 0.9 * baseline + 0.1 * reward;
    ps.zero_grad();
    t.backward(ad::pick(lp, 0, a), -advantage);
    reinforce_update(ps, opt, -advantage * lp.value()(0, a), 0.05, 1.0);
  }
  const double p1 = 1.0 / (1.0 + std::exp(logits.value(0, 0) - logits.value(0, 1)));
  EXPECT_GT(p1, 0.99);
}

TEST(AdamW, DecoupledWeightDecayAndFrozenParams) {
  ParameterSet ps;
  auto& a = ps.add("a", 1, 1);
  auto& f = ps.add("f", 1, 1);
  a.value(0, 0) = 1.0;
  f.value(0, 0) = 1.0;
  f.trainable = false;
  AdamW opt(ps, 0.9, 0.999, 1e-8, 0.1);
  a.grad = Matrix::Constant(1, 1, 0.5);
  f.grad = Matrix::Constant(1, 1, 0.5);
  opt.step(0.01);
  // First Adam step moves by lr * sign(g); decay subtracts lr * wd * value.
  EXPECT_NEAR(a.value(0, 0), 1.0 - 0.01 * 0.1 - 0.01, 1e-7);
  EXPECT_EQ(f.value(0, 0), 1.0);
}

TEST(TrainConfig, ValidationListsEveryProblem) {
  TrainConfig cfg = TrainConfig::desk(Problem::MaxCut);
  cfg.lr = -1;
  cfg.batch_size = 0;
  cfg.gamma = 2.0;
  EXPECT_GE(cfg.problems().size(), 3u);
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  EXPECT_TRUE(TrainConfig::paper(Problem::Tsp).problems().empty());
}

TEST(TrainConfig, PaperDefaults) {
  const auto mc = TrainConfig::paper(Problem::MaxCut);
  EXPECT_DOUBLE_EQ(mc.lr, 1e-4);
  EXPECT_EQ(mc.batch_size, 128);
  EXPECT_DOUBLE_EQ(mc.penalty, 1.0);
  EXPECT_DOUBLE_EQ(TrainConfig::paper(Problem::MaxIndependentSet).penalty, 0.01);
  const auto tsp = TrainConfig::paper(Problem::Tsp);
  EXPECT_DOUBLE_EQ(tsp.penalty, 0.1);
  EXPECT_EQ(tsp.k, 3);
  EXPECT_EQ(tsp.retrieval_frequency, 10);
}

TEST(TrainImprovement, MetricsSchemaAndOneRowPerEpisode) {
  const TrainConfig cfg = small_improvement(Problem::MaxCut);
  std::ostringstream csv;
  write_metrics_header(csv);
  TrainHooks hooks;
  hooks.on_episode = [&](const EpisodeMetrics& m) { write_metrics_row(csv, m); };
  train_improvement(cfg, hooks);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "episode,mean_reward,revisit_rate,loss");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 3);
    EXPECT_EQ(line.substr(0, line.find(',')), std::to_string(rows));
  }
  EXPECT_EQ(rows, 3);
}

TEST(TrainImprovement, FixedSeedReproducible) {
  const TrainConfig cfg = small_improvement(Problem::MaxIndependentSet);
  std::vector<double> a, b;
  TrainHooks ha, hb;
  ha.on_episode = [&](const EpisodeMetrics& m) { a.push_back(m.loss); };
  hb.on_episode = [&](const EpisodeMetrics& m) { b.push_back(m.loss); };
  const auto ca = train_improvement(cfg, ha);
  const auto cb = train_improvement(cfg, hb);
  EXPECT_EQ(a, b);
  for (const auto& prm : ca.policy.params().all()) EXPECT_EQ(prm.value, cb.policy.params().get(prm.name).value);
}

TEST(TrainImprovement, ResumeContinuesEpisodeNumbering) {
  TrainConfig cfg = small_improvement(Problem::MaxCut);
  const auto first = train_improvement(cfg);
  EXPECT_EQ(first.episode, 3u);
  cfg.epochs = 2;
  std::vector<std::uint64_t> seen;
  TrainHooks hooks;
  hooks.on_episode = [&](const EpisodeMetrics& m) { seen.push_back(m.episode); };
  const auto resumed = train_improvement(cfg, hooks, &first);
  EXPECT_EQ(seen, (std::vector<std::uint64_t>{4, 5, 6}));
  EXPECT_EQ(resumed.optimizer.step, 6u);
}

TEST(TrainImprovement, ExtremePenaltyStaysFinite) {
  TrainConfig cfg = small_improvement(Problem::MaxCut);
  cfg.penalty = 100.0;
  const auto ck = train_improvement(cfg);
  for (const auto& prm : ck.policy.params().all()) EXPECT_TRUE(prm.value.allFinite());
}

TEST(TrainImprovement, RewardTrendImprovesAtDeskScale) {
  TrainConfig cfg = TrainConfig::desk(Problem::MaxCut);
  cfg.epochs = 2;
  std::vector<double> rewards;
  TrainHooks hooks;
  hooks.on_episode = [&](const EpisodeMetrics& m) { rewards.push_back(m.mean_reward); };
  train_improvement(cfg, hooks);
  ASSERT_EQ(rewards.size(), 100u);
  auto window = [&](std::size_t start) {
    double s = 0.0;
    for (std::size_t i = start; i < start + 20; ++i) s += rewards[i];
    return s / 20;
  };
  EXPECT_GE(window(80), window(0));
}

TEST(TrainConstructive, PhaseTwoNeedsStartAndLeavesBackboneFrozen) {
  const TrainConfig cfg = small_constructive();
  EXPECT_THROW(train_constructive(cfg, 2), std::invalid_argument);
  const auto phase1 = train_constructive(cfg, 1);
  EXPECT_EQ(phase1.phase, 1);
  const auto phase2 = train_constructive(cfg, 2, {}, &phase1);
  EXPECT_EQ(phase2.phase, 2);
  bool memory_moved = false;
  for (const auto& prm : phase2.policy.params().all()) {
    const auto& before = phase1.policy.params().get(prm.name).value;
    if (prm.name.rfind("mem.", 0) == 0) {
      memory_moved = memory_moved || prm.value != before;
    } else {
      EXPECT_EQ(std::memcmp(prm.value.data(), before.data(), sizeof(double) * before.size()), 0) << prm.name;
    }
  }
  EXPECT_TRUE(memory_moved);
}

TEST(TrainConstructive, FixedSeedReproducible) {
  const TrainConfig cfg = small_constructive();
  const auto a = train_constructive(cfg, 1);
  const auto b = train_constructive(cfg, 1);
  for (const auto& prm : a.policy.params().all()) EXPECT_EQ(prm.value, b.policy.params().get(prm.name).value);
}
