#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "pnp/rng.hpp"
#include "pnp/vec.hpp"

namespace pnp {

enum class PartitionStrategy { contiguous, strided, shuffled };

inline PartitionStrategy partition_strategy_from_string(const std::string& s) {
  if (s == "contiguous") return PartitionStrategy::contiguous;
  if (s == "strided") return PartitionStrategy::strided;
  if (s == "shuffled") return PartitionStrategy::shuffled;
  throw InputError("unknown partition strategy: " + s);
}

/**
 * Disjoint cover of the row index set [n] by K non-empty blocks.
 *
 * Nominal block size is n/K; when K does not divide n the last block absorbs
 * the remainder. Immutable after construction.
 */
class Partition {
 public:
  Partition(int n, std::vector<std::vector<int>> blocks) : n_(n), blocks_(std::move(blocks)) {
    std::vector<char> seen(n, 0);
    int covered = 0;
    for (const auto& block : blocks_) {
      if (block.empty()) throw InputError("Partition: empty block");
      for (int i : block) {
        if (i < 0 || i >= n) throw InputError("Partition: index out of range");
        if (seen[i]) throw InputError("Partition: duplicate index " + std::to_string(i));
        seen[i] = 1;
        ++covered;
      }
    }
    if (covered != n) throw InputError("Partition: blocks do not cover [n]");
  }

  int n() const { return n_; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  int nominal_block_size() const { return n_ / num_blocks(); }
  const std::vector<int>& block(int k) const { return blocks_[k]; }
  const std::vector<std::vector<int>>& blocks() const { return blocks_; }

 private:
  int n_;
  std::vector<std::vector<int>> blocks_;
};

inline Partition partition_rows(int n, int K, SamplerRng& rng, PartitionStrategy strategy) {
  if (K < 1 || K > n)
    throw InputError("partition_rows: need 1 <= K <= n (K=" + std::to_string(K) +
                     ", n=" + std::to_string(n) + ")");
  std::vector<std::vector<int>> blocks(K);
  switch (strategy) {
    case PartitionStrategy::contiguous: {
      const int base = n / K;
      int next = 0;
      for (int k = 0; k < K; ++k) {
        const int size = (k == K - 1) ? n - next : base;
        for (int i = 0; i < size; ++i) blocks[k].push_back(next++);
      }
      break;
    }
    case PartitionStrategy::strided: {
      for (int i = 0; i < n; ++i) blocks[i % K].push_back(i);
      break;
    }
    case PartitionStrategy::shuffled: {
      std::vector<int> perm(n);
      for (int i = 0; i < n; ++i) perm[i] = i;
      for (int i = n - 1; i > 0; --i)
        std::swap(perm[i], perm[rng.uniform_index(static_cast<std::uint64_t>(i) + 1)]);
      const int base = n / K;
      int next = 0;
      for (int k = 0; k < K; ++k) {
        const int size = (k == K - 1) ? n - next : base;
        for (int i = 0; i < size; ++i) blocks[k].push_back(perm[next++]);
        std::sort(blocks[k].begin(), blocks[k].end());
      }
      break;
    }
  }
  return Partition(n, std::move(blocks));
}

/// Uniform block index stream, with replacement or by reshuffled epochs.
enum class SamplingMode { with_replacement, epoch_shuffle };

class BlockSampler {
 public:
  BlockSampler(int K, SamplingMode mode, SamplerRng& rng) : K_(K), mode_(mode), rng_(&rng) {
    if (K < 1) throw InputError("BlockSampler: K must be positive");
  }

  int next() {
    if (mode_ == SamplingMode::with_replacement)
      return static_cast<int>(rng_->uniform_index(K_));
    if (pos_ == static_cast<int>(epoch_.size())) reshuffle();
    return epoch_[pos_++];
  }

 private:
  void reshuffle() {
    epoch_.resize(K_);
    for (int i = 0; i < K_; ++i) epoch_[i] = i;
    for (int i = K_ - 1; i > 0; --i)
      std::swap(epoch_[i], epoch_[rng_->uniform_index(static_cast<std::uint64_t>(i) + 1)]);
    pos_ = 0;
  }

  int K_;
  SamplingMode mode_;
  SamplerRng* rng_;
  std::vector<int> epoch_;
  int pos_ = 0;
};

}  // namespace pnp
