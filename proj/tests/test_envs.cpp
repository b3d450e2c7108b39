#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "optmarl/envs/matrix_game.hpp"
#include "optmarl/envs/predprey.hpp"

using namespace optmarl;
using namespace optmarl::envs;
using Cell = PredatorPrey::Cell;
using A = PredatorPrey::Action;

namespace {

PredPreyConfig small_config(int w, int h, int preds, int prey) {
  PredPreyConfig c;
  c.grid_w = w;
  c.grid_h = h;
  c.n_predators = preds;
  c.n_prey = prey;
  return c;
}

// Channel-wise left-right mirror of an observation, with the last-action
// one-hot's left and right swapped.
Vector mirror_obs(const Vector& o, int side) {
  Vector out = o;
  const int plane = side * side;
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) out[ch * plane + r * side + c] = o[ch * plane + r * side + (side - 1 - c)];
  const int base = 3 * plane;
  std::swap(out[base + A::kLeft], out[base + A::kRight]);
  return out;
}

}  // namespace

TEST(MatrixGame, PayoffTableExhaustive) {
  const double expected[3][3] = {{8, -12, -12}, {-12, 0, 0}, {-12, 0, 0}};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      MatrixGame g;
      g.reset(0);
      StepOutcome out = g.step({a, b});
      EXPECT_EQ(out.reward, expected[a][b]) << a << "," << b;
      EXPECT_TRUE(out.done);
      EXPECT_TRUE(g.terminated());
    }
}

TEST(MatrixGame, NamedCells) {
  EXPECT_EQ(MatrixGame::payoff(0, 0), 8.0);
  EXPECT_EQ(MatrixGame::payoff(0, 1), -12.0);
  EXPECT_EQ(MatrixGame::payoff(1, 0), -12.0);
  EXPECT_EQ(MatrixGame::payoff(1, 2), 0.0);
}

TEST(MatrixGame, ConstantObservationsAndErrors) {
  MatrixGame g;
  const EnvState& s = g.reset(5);
  EXPECT_EQ(s.state, Vector::Ones(1));
  ASSERT_EQ(s.obs.size(), 2u);
  EXPECT_EQ(s.obs[1], Vector::Ones(1));
  EXPECT_THROW(g.step({0}), ConfigError);
  EXPECT_THROW(g.step({0, 0, 0}), ConfigError);
  g.step({0, 0});
  EXPECT_TRUE(g.succeeded());
  EXPECT_THROW(g.step({0, 0}), UsageError);
}

TEST(PredPrey, ResetIsDeterministicPerSeed) {
  PredatorPrey a, b;
  a.reset(42);
  b.reset(42);
  EXPECT_EQ(a.predators(), b.predators());
  EXPECT_EQ(a.living_prey(), b.living_prey());
  EXPECT_EQ(a.current().state, b.current().state);
}

TEST(PredPrey, ZeroPreyIsImmediatelyDone) {
  PredatorPrey env(small_config(5, 5, 2, 0));
  EXPECT_TRUE(env.reset(1).done);
}

TEST(PredPrey, PlacementIsCollisionFree) {
  PredatorPrey env(small_config(5, 5, 4, 2));
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    env.reset(seed);
    std::set<std::pair<int, int>> cells;
    for (const Cell& c : env.predators()) cells.insert({c.x, c.y});
    for (const Cell& c : env.living_prey()) cells.insert({c.x, c.y});
    ASSERT_EQ(cells.size(), 6u);
  }
}

TEST(PredPrey, TooManyEntitiesIsConfigError) {
  EXPECT_THROW(PredatorPrey(small_config(2, 2, 4, 1)), ConfigError);
}

TEST(PredPrey, LoneCaptureIsPunishedAndPreyStays) {
  PredatorPrey env(small_config(7, 7, 2, 1));
  env.set_layout({{3, 3}, {0, 0}}, {{3, 4}});
  StepOutcome out = env.step({A::kCapture, A::kStay});
  EXPECT_EQ(out.reward, -2.0);
  EXPECT_EQ(env.alive_prey(), 1);
  EXPECT_EQ(env.last_escapes(), 1);
  EXPECT_FALSE(out.done);
}

TEST(PredPrey, JointCaptureRemovesPrey) {
  PredatorPrey env(small_config(7, 7, 2, 1));
  env.set_layout({{3, 3}, {3, 5}}, {{3, 4}});
  StepOutcome out = env.step({A::kCapture, A::kCapture});
  EXPECT_EQ(out.reward, 10.0);
  EXPECT_EQ(env.alive_prey(), 0);
  EXPECT_TRUE(out.done);
  EXPECT_TRUE(env.terminated());
}

TEST(PredPrey, AllStayGivesZeroReward) {
  PredatorPrey env;
  env.reset(3);
  StepOutcome out = env.step(JointAction(4, A::kStay));
  EXPECT_EQ(out.reward, 0.0);
}

TEST(PredPrey, CapturedPreyDoesNotAlsoEscape) {
  // Three predators around one prey, all capturing: one capture event only.
  PredatorPrey env(small_config(7, 7, 3, 1));
  env.set_layout({{3, 3}, {3, 5}, {2, 4}}, {{3, 4}});
  StepOutcome out = env.step({A::kCapture, A::kCapture, A::kCapture});
  EXPECT_EQ(out.reward, 10.0);
  EXPECT_EQ(env.last_escapes(), 0);
}

TEST(PredPrey, RewardSumsOverEvents) {
  // Predators 0,1 capture prey 0 together; predator 2 alone attempts prey 1.
  PredatorPrey env(small_config(9, 9, 3, 2));
  env.set_layout({{1, 1}, {1, 3}, {6, 6}}, {{1, 2}, {6, 7}});
  StepOutcome out = env.step({A::kCapture, A::kCapture, A::kCapture});
  EXPECT_EQ(out.reward, 10.0 - 2.0);
  EXPECT_EQ(env.last_captures(), 1);
  EXPECT_EQ(env.last_escapes(), 1);
}

TEST(PredPrey, WallsBlockMovement) {
  PredatorPrey env(small_config(5, 5, 1, 1));
  env.set_layout({{0, 0}}, {{4, 4}});
  env.step({A::kUp});
  EXPECT_EQ(env.predators()[0], (Cell{0, 0}));
  env.step({A::kLeft});
  EXPECT_EQ(env.predators()[0], (Cell{0, 0}));
  env.step({A::kRight});
  EXPECT_EQ(env.predators()[0], (Cell{1, 0}));
}

TEST(PredPrey, PredatorsDoNotOverlap) {
  PredatorPrey env(small_config(5, 5, 2, 1));
  env.set_layout({{1, 1}, {2, 1}}, {{4, 4}});
  env.step({A::kRight, A::kStay});
  EXPECT_EQ(env.predators()[0], (Cell{1, 1}));
}

TEST(PredPrey, InvalidActionIsUsageError) {
  PredatorPrey env;
  env.reset(0);
  EXPECT_THROW(env.step({0, 1, 2, 6}), UsageError);
  EXPECT_THROW(env.step({0, 1, -1, 2}), UsageError);
}

TEST(PredPrey, BoxedPreyStaysPut) {
  PredatorPrey env(small_config(3, 3, 2, 1));
  env.set_layout({{1, 0}, {0, 1}}, {{0, 0}});
  env.step({A::kStay, A::kStay});
  EXPECT_EQ(env.living_prey()[0], (Cell{0, 0}));
}

TEST(PredPrey, LoneAgentSeesOnlyItself) {
  PredatorPrey env(small_config(9, 9, 2, 1));
  env.set_layout({{4, 4}, {0, 0}}, {{8, 8}});
  const Vector o = env.observe(0);
  const int side = env.window(), plane = side * side;
  const int centre = (side / 2) * side + side / 2;
  for (int i = 0; i < plane; ++i) {
    EXPECT_EQ(o[i], i == centre ? 1.0 : 0.0);
    EXPECT_EQ(o[plane + i], 0.0);
    EXPECT_EQ(o[2 * plane + i], 0.0);
  }
}

TEST(PredPrey, WallChannelMarksOutsideCells) {
  PredatorPrey env(small_config(7, 7, 1, 1));
  env.set_layout({{0, 0}}, {{6, 6}});
  const Vector o = env.observe(0);
  const int k = env.config().obs_window, side = env.window(), plane = side * side;
  for (int dy = -k; dy <= k; ++dy)
    for (int dx = -k; dx <= k; ++dx) {
      const bool outside = dx < 0 || dy < 0;
      EXPECT_EQ(o[2 * plane + (dy + k) * side + (dx + k)], outside ? 1.0 : 0.0);
    }
}

TEST(PredPrey, MirroredLayoutsGiveMirroredObservations) {
  std::mt19937_64 rng(8);
  const PredPreyConfig cfg = small_config(7, 7, 3, 2);
  for (int trial = 0; trial < 50; ++trial) {
    PredatorPrey env(cfg), mirrored(cfg);
    env.reset(rng());
    std::vector<Cell> preds = env.predators(), prey = env.living_prey();
    std::vector<int> last;
    for (std::size_t i = 0; i < preds.size(); ++i) last.push_back(static_cast<int>(rng() % 6));
    env.set_layout(preds, prey, last);
    for (auto& c : preds) c.x = cfg.grid_w - 1 - c.x;
    for (auto& c : prey) c.x = cfg.grid_w - 1 - c.x;
    for (int& a : last)
      if (a == A::kLeft) a = A::kRight;
      else if (a == A::kRight) a = A::kLeft;
    mirrored.set_layout(preds, prey, last);
    for (int i = 0; i < cfg.n_predators; ++i) EXPECT_EQ(mirrored.observe(i), mirror_obs(env.observe(i), env.window()));
  }
}

TEST(PredPrey, RandomPlayInvariants) {
  std::mt19937_64 rng(13);
  PredatorPrey env;
  for (int ep = 0; ep < 100; ++ep) {
    env.reset(rng());
    int prey = env.alive_prey();
    int length = 0;
    while (!env.current().done) {
      JointAction a(4);
      for (int& x : a) x = static_cast<int>(rng() % 6);
      StepOutcome out = env.step(a);
      ++length;
      const double expected = 10.0 * env.last_captures() - 2.0 * env.last_escapes();
      ASSERT_EQ(out.reward, expected);
      ASSERT_LE(env.alive_prey(), prey);
      prey = env.alive_prey();
      std::set<std::pair<int, int>> cells;
      for (const Cell& c : env.predators()) cells.insert({c.x, c.y});
      ASSERT_EQ(cells.size(), 4u);
      ASSERT_EQ(static_cast<int>(out.next.obs.size()), 4);
      ASSERT_EQ(out.next.obs[0].size(), env.obs_dim());
    }
    ASSERT_LE(length, env.horizon());
    ASSERT_EQ(env.terminated(), env.alive_prey() == 0);
  }
}

TEST(PredPrey, ConfigRoundTripAndUnknownKey) {
  PredPreyConfig c = small_config(6, 5, 3, 2);
  c.punishment = -1.5;
  const PredPreyConfig back = PredPreyConfig::from_pairs(c.to_pairs());
  EXPECT_EQ(back.to_pairs(), c.to_pairs());
  EXPECT_THROW(PredPreyConfig::from_pairs({{"grid", "3"}}), ConfigError);
}
