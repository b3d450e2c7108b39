#pragma once

// Gridworld where predators must capture prey in pairs. A capture attempted
// by a single adjacent predator fails, the prey escapes and the team is
// punished; two or more adjacent capturing predators remove the prey.
//
// Per step: predators move (in index order, blocked by walls and occupied
// cells), captures resolve, then surviving prey move to a random free
// neighbouring cell.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include "optmarl/envs/env.hpp"
#include "optmarl/errors.hpp"
#include "optmarl/kvfile.hpp"

namespace optmarl::envs {

struct PredPreyConfig {
  int grid_w = 7;
  int grid_h = 7;
  int n_predators = 4;
  int n_prey = 2;
  double capture_reward = 10.0;
  double punishment = -2.0;
  int horizon = 60;
  int obs_window = 2;

  void validate() const {
    if (grid_w <= 0 || grid_h <= 0) throw ConfigError("grid_w/grid_h must be positive");
    if (n_predators <= 0) throw ConfigError("n_predators must be positive");
    if (n_prey < 0) throw ConfigError("n_prey must be non-negative");
    if (horizon <= 0) throw ConfigError("horizon must be positive");
    if (obs_window < 0) throw ConfigError("obs_window must be non-negative");
    if (n_predators + n_prey > grid_w * grid_h)
      throw ConfigError("more entities (" + std::to_string(n_predators + n_prey) + ") than grid cells (" +
                        std::to_string(grid_w * grid_h) + ")");
  }

  kv::Pairs to_pairs() const {
    return {{"grid_w", std::to_string(grid_w)},
            {"grid_h", std::to_string(grid_h)},
            {"n_predators", std::to_string(n_predators)},
            {"n_prey", std::to_string(n_prey)},
            {"capture_reward", kv::format_double(capture_reward)},
            {"punishment", kv::format_double(punishment)},
            {"horizon", std::to_string(horizon)},
            {"obs_window", std::to_string(obs_window)}};
  }

  static PredPreyConfig from_pairs(const kv::Pairs& pairs) {
    PredPreyConfig c;
    for (const auto& [k, v] : pairs) {
      if (k == "grid_w") c.grid_w = static_cast<int>(kv::to_int(k, v));
      else if (k == "grid_h") c.grid_h = static_cast<int>(kv::to_int(k, v));
      else if (k == "n_predators") c.n_predators = static_cast<int>(kv::to_int(k, v));
      else if (k == "n_prey") c.n_prey = static_cast<int>(kv::to_int(k, v));
      else if (k == "capture_reward") c.capture_reward = kv::to_double(k, v);
      else if (k == "punishment") c.punishment = kv::to_double(k, v);
      else if (k == "horizon") c.horizon = static_cast<int>(kv::to_int(k, v));
      else if (k == "obs_window") c.obs_window = static_cast<int>(kv::to_int(k, v));
      else throw ConfigError("unknown predator-prey key: " + k);
    }
    c.validate();
    return c;
  }

  static PredPreyConfig load(const std::string& path) { return from_pairs(kv::read_file(path)); }
};

class PredatorPrey final : public Environment {
 public:
  enum Action : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4, kCapture = 5 };
  static constexpr int kNumActions = 6;
  static constexpr int kChannels = 3;  // predator, prey, wall

  struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
  };

  explicit PredatorPrey(PredPreyConfig cfg = {}) : cfg_(cfg) {
    cfg_.validate();
    reset(0);
  }

  const PredPreyConfig& config() const { return cfg_; }

  std::string name() const override { return "predprey"; }
  int n_agents() const override { return cfg_.n_predators; }
  int n_actions() const override { return kNumActions; }
  int window() const { return 2 * cfg_.obs_window + 1; }
  int obs_dim() const override { return kChannels * window() * window() + kNumActions; }
  int state_dim() const override { return 2 * cfg_.grid_w * cfg_.grid_h; }
  int horizon() const override { return cfg_.horizon; }

  /// Places predators and prey uniformly at random on distinct cells.
  const EnvState& reset(std::uint64_t seed) override {
    rng_.seed(seed);
    std::vector<int> cells(static_cast<std::size_t>(cfg_.grid_w * cfg_.grid_h));
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
    // Partial Fisher-Yates with an explicit draw keeps placement independent
    // of the standard library's shuffle implementation.
    const int needed = cfg_.n_predators + cfg_.n_prey;
    for (int i = 0; i < needed; ++i) {
      std::uniform_int_distribution<int> pick(i, static_cast<int>(cells.size()) - 1);
      std::swap(cells[static_cast<std::size_t>(i)], cells[static_cast<std::size_t>(pick(rng_))]);
    }
    predators_.clear();
    prey_.clear();
    for (int i = 0; i < needed; ++i) {
      const int c = cells[static_cast<std::size_t>(i)];
      const Cell cell{c % cfg_.grid_w, c / cfg_.grid_w};
      if (i < cfg_.n_predators) predators_.push_back(cell);
      else prey_.push_back(cell);
    }
    prey_alive_.assign(prey_.size(), 1);
    last_actions_.assign(static_cast<std::size_t>(cfg_.n_predators), -1);
    steps_ = 0;
    refresh();
    return state_;
  }

  /// Replaces the entity layout; used to construct specific situations.
  void set_layout(std::vector<Cell> predators, std::vector<Cell> prey, std::vector<int> last_actions = {}) {
    if (static_cast<int>(predators.size()) != cfg_.n_predators)
      throw ConfigError("set_layout: expected " + std::to_string(cfg_.n_predators) + " predators");
    std::vector<Cell> all = predators;
    all.insert(all.end(), prey.begin(), prey.end());
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (!inside(all[i].x, all[i].y)) throw ConfigError("set_layout: cell outside grid");
      for (std::size_t j = 0; j < i; ++j)
        if (all[i] == all[j]) throw ConfigError("set_layout: overlapping entities");
    }
    predators_ = std::move(predators);
    prey_ = std::move(prey);
    prey_alive_.assign(prey_.size(), 1);
    if (last_actions.empty()) last_actions.assign(predators_.size(), -1);
    if (last_actions.size() != predators_.size()) throw ConfigError("set_layout: last_actions size mismatch");
    last_actions_ = std::move(last_actions);
    steps_ = 0;
    refresh();
  }

  StepOutcome step(const JointAction& actions) override {
    if (state_.done) throw UsageError("predator-prey: step after episode end");
    if (static_cast<int>(actions.size()) != cfg_.n_predators)
      throw ConfigError("predator-prey expects " + std::to_string(cfg_.n_predators) + " actions, got " +
                        std::to_string(actions.size()));
    for (int a : actions)
      if (a < 0 || a >= kNumActions) throw UsageError("predator-prey: invalid action index " + std::to_string(a));

    for (std::size_t i = 0; i < predators_.size(); ++i) {
      const Cell to = moved(predators_[i], actions[i]);
      if (to == predators_[i] || !inside(to.x, to.y) || occupied(to)) continue;
      predators_[i] = to;
    }

    double reward = 0.0;
    last_captures_ = 0;
    last_escapes_ = 0;
    for (std::size_t p = 0; p < prey_.size(); ++p) {
      if (!prey_alive_[p]) continue;
      int capturing = 0;
      for (std::size_t i = 0; i < predators_.size(); ++i)
        if (actions[i] == kCapture && manhattan(predators_[i], prey_[p]) == 1) ++capturing;
      if (capturing >= 2) {
        prey_alive_[p] = 0;
        reward += cfg_.capture_reward;
        ++last_captures_;
      } else if (capturing == 1) {
        reward += cfg_.punishment;
        ++last_escapes_;
      }
    }

    for (std::size_t p = 0; p < prey_.size(); ++p) {
      if (!prey_alive_[p]) continue;
      std::array<Cell, 4> options{};
      int count = 0;
      for (int a = kUp; a <= kRight; ++a) {
        const Cell to = moved(prey_[p], a);
        if (inside(to.x, to.y) && !occupied(to)) options[static_cast<std::size_t>(count++)] = to;
      }
      if (count > 0) {
        std::uniform_int_distribution<int> pick(0, count - 1);
        prey_[p] = options[static_cast<std::size_t>(pick(rng_))];
      }
    }

    for (std::size_t i = 0; i < actions.size(); ++i) last_actions_[i] = actions[i];
    ++steps_;
    refresh();
    return {reward, state_, state_.done};
  }

  const EnvState& current() const override { return state_; }
  bool terminated() const override { return alive_prey() == 0; }
  bool succeeded() const override { return alive_prey() == 0; }

  int alive_prey() const { return static_cast<int>(std::count(prey_alive_.begin(), prey_alive_.end(), 1)); }
  const std::vector<Cell>& predators() const { return predators_; }
  std::vector<Cell> living_prey() const {
    std::vector<Cell> out;
    for (std::size_t p = 0; p < prey_.size(); ++p)
      if (prey_alive_[p]) out.push_back(prey_[p]);
    return out;
  }
  int last_captures() const { return last_captures_; }
  int last_escapes() const { return last_escapes_; }

  /// Local view of one predator: predator, prey and wall channels over the
  /// (2k+1)×(2k+1) window centred on it (row-major, dy outer), followed by a
  /// one-hot of its previous action (all zero at episode start).
  Vector observe(int agent) const {
    if (agent < 0 || agent >= cfg_.n_predators) throw UsageError("observe: agent index out of range");
    const int k = cfg_.obs_window;
    const int side = window();
    const int plane = side * side;
    Vector out = Vector::Zero(obs_dim());
    const Cell me = predators_[static_cast<std::size_t>(agent)];
    for (int dy = -k; dy <= k; ++dy) {
      for (int dx = -k; dx <= k; ++dx) {
        const int x = me.x + dx;
        const int y = me.y + dy;
        const int idx = (dy + k) * side + (dx + k);
        if (!inside(x, y)) {
          out[2 * plane + idx] = 1.0;
          continue;
        }
        for (const Cell& c : predators_)
          if (c.x == x && c.y == y) out[idx] = 1.0;
        for (std::size_t p = 0; p < prey_.size(); ++p)
          if (prey_alive_[p] && prey_[p].x == x && prey_[p].y == y) out[plane + idx] = 1.0;
      }
    }
    const int last = last_actions_[static_cast<std::size_t>(agent)];
    if (last >= 0) out[kChannels * plane + last] = 1.0;
    return out;
  }

 private:
  static int manhattan(const Cell& a, const Cell& b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

  static Cell moved(Cell c, int action) {
    switch (action) {
      case kUp: --c.y; break;
      case kDown: ++c.y; break;
      case kLeft: --c.x; break;
      case kRight: ++c.x; break;
      default: break;
    }
    return c;
  }

  bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < cfg_.grid_w && y < cfg_.grid_h; }

  bool occupied(const Cell& c) const {
    for (const Cell& p : predators_)
      if (p == c) return true;
    for (std::size_t i = 0; i < prey_.size(); ++i)
      if (prey_alive_[i] && prey_[i] == c) return true;
    return false;
  }

  void refresh() {
    state_.state = Vector::Zero(state_dim());
    const int cells = cfg_.grid_w * cfg_.grid_h;
    for (const Cell& c : predators_) state_.state[c.y * cfg_.grid_w + c.x] = 1.0;
    for (std::size_t p = 0; p < prey_.size(); ++p)
      if (prey_alive_[p]) state_.state[cells + prey_[p].y * cfg_.grid_w + prey_[p].x] = 1.0;
    state_.obs.clear();
    for (int i = 0; i < cfg_.n_predators; ++i) state_.obs.push_back(observe(i));
    state_.step = steps_;
    state_.done = alive_prey() == 0 || steps_ >= cfg_.horizon;
  }

  PredPreyConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<Cell> predators_;
  std::vector<Cell> prey_;
  std::vector<std::uint8_t> prey_alive_;
  std::vector<int> last_actions_;
  int steps_ = 0;
  int last_captures_ = 0;
  int last_escapes_ = 0;
  EnvState state_;
};

}  // namespace optmarl::envs
