#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "optmarl/errors.hpp"
#include "optmarl/training/episode.hpp"

namespace optmarl::training {

/// Fixed-capacity ring of whole episodes; the oldest episode is evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
    slots_.reserve(std::min<std::size_t>(capacity, 1024));
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return slots_.size(); }
  std::uint64_t inserted() const { return inserted_; }

  void insert(EpisodeRecord ep) {
    if (slots_.size() < capacity_) {
      slots_.push_back(std::move(ep));
    } else {
      slots_[static_cast<std::size_t>(inserted_ % capacity_)] = std::move(ep);
    }
    ++inserted_;
  }

  /// Episode by age rank: 0 is the oldest stored episode.
  const EpisodeRecord& oldest(std::size_t rank) const {
    if (rank >= slots_.size()) throw UsageError("replay: rank out of range");
    const std::size_t start = slots_.size() < capacity_ ? 0 : static_cast<std::size_t>(inserted_ % capacity_);
    return slots_[(start + rank) % slots_.size()];
  }

  /// Uniform draw of k slot indices with replacement.
  template <typename Rng>
  std::vector<std::size_t> sample_indices(std::size_t k, Rng& rng) const {
    if (slots_.size() < k || slots_.empty()) throw UsageError("replay: not enough episodes to sample");
    std::uniform_int_distribution<std::size_t> pick(0, slots_.size() - 1);
    std::vector<std::size_t> out(k);
    for (auto& i : out) i = pick(rng);
    return out;
  }

  template <typename Rng>
  std::vector<const EpisodeRecord*> sample(std::size_t k, Rng& rng) const {
    std::vector<const EpisodeRecord*> out;
    for (std::size_t i : sample_indices(k, rng)) out.push_back(&slots_[i]);
    return out;
  }

  const EpisodeRecord& slot(std::size_t i) const { return slots_.at(i); }

 private:
  std::size_t capacity_;
  std::uint64_t inserted_ = 0;
  std::vector<EpisodeRecord> slots_;
};

}  // namespace optmarl::training
