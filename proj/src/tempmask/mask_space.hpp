#pragma once

#include <array>
#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tempmask/temporal_mask.hpp"

namespace tempmask {

using BigCount = boost::multiprecision::cpp_int;

/// Run-length constraints of the temporal-mask space E(l, k0, k1): binary
/// strings of length l whose maximal 0-runs have length >= k0 and whose
/// maximal 1-runs have length >= k1.
struct MaskSpaceParams {
  std::int64_t length = 0;
  std::int64_t k0 = 1;
  std::int64_t k1 = 1;

  std::int64_t k() const noexcept { return k0 + k1; }
  std::int64_t min_run(int symbol) const noexcept { return symbol == 0 ? k0 : k1; }

  /// Throws a parameter error for l, k0 or k1 < 1, and when both k0 and k1
  /// exceed l (the space is empty). If only one exceeds l the space holds
  /// exactly one constant string.
  void validate() const;

  friend bool operator==(const MaskSpaceParams&, const MaskSpaceParams&) = default;
};

/// |E(l, k0, k1)|. Rolling dynamic program in O(l * max(k0, k1)) big-integer
/// additions and O(max(k0, k1)) memory, so it stays exact for l >= 10^5.
BigCount count_masks(const MaskSpaceParams& params);

/// Completion counts for every state of the masking binary tree.
///
/// A sampler state after emitting `position` symbols is (last symbol s, current
/// run length r). Once the run has reached its minimum the state is "free" and
/// the number of completions only depends on s and the remaining length, so the
/// table keeps free[s][n] for n in [0, l]; a run that is still short by d
/// frames is forced to continue and has free[s][n - d] completions. This is the
/// (position, symbol, clamped run length) program with saturated states merged.
///
/// Immutable after construction; safe to share across threads.
class PathCountTable {
 public:
  explicit PathCountTable(const MaskSpaceParams& params);

  const MaskSpaceParams& params() const noexcept { return params_; }

  /// Number of members of E (completions of the root).
  const BigCount& total() const noexcept { return total_; }

  /// Completions of the prefix state at `position` (1..l symbols emitted) whose
  /// last symbol is `last_symbol` with a current run of `run_length` frames.
  const BigCount& completions(std::int64_t position, int last_symbol,
                              std::int64_t run_length) const;

  /// Completions of the root's child starting with `symbol`.
  const BigCount& root_child(int symbol) const;

  /// Completions of a free state with `remaining` frames left.
  const BigCount& free_completions(int symbol, std::int64_t remaining) const;

 private:
  MaskSpaceParams params_;
  std::array<std::vector<BigCount>, 2> free_;
  BigCount total_;
};

PathCountTable build_count_table(const MaskSpaceParams& params);

/// Uniform draw from E: a uniform rank in [0, |E|) is unranked along the tree,
/// which is equivalent to picking each child with probability proportional to
/// its completion count. Deterministic in `seed`.
BitColumn sample_mask(const PathCountTable& table, std::uint64_t seed);

/// `q` masks of shape l x p; column c of mask i is an independent uniform draw
/// seeded with derive_seed(seed, i * p + c).
std::vector<TemporalMask> sample_multiclass(const PathCountTable& table,
                                            const std::vector<std::string>& class_names,
                                            std::size_t q, std::uint64_t seed);

/// True iff every maximal run satisfies its minimum. Length must equal l.
bool is_member(std::span<const std::uint8_t> column, const MaskSpaceParams& params);

}  // namespace tempmask
