#include "tempmask/mask_space.hpp"

#include <algorithm>
#include <random>

#include "tempmask/error.hpp"
#include "tempmask/seeding.hpp"

namespace tempmask {

namespace {

const BigCount& zero_count() {
  static const BigCount zero = 0;
  return zero;
}

// Uniform integer in [0, bound) by rejection on the minimal number of bits.
BigCount uniform_below(const BigCount& bound, std::mt19937_64& rng) {
  if (bound <= 1) return 0;
  const std::size_t bits = boost::multiprecision::msb(BigCount(bound - 1)) + 1;
  const std::size_t words = (bits + 63) / 64;
  while (true) {
    BigCount value = 0;
    for (std::size_t w = 0; w < words; ++w) {
      value <<= 64;
      value |= rng();
    }
    value >>= (words * 64 - bits);
    if (value < bound) return value;
  }
}

}  // namespace

void MaskSpaceParams::validate() const {
  require(length >= 1, ErrorKind::parameter, "sequence length l must be >= 1");
  require(k0 >= 1, ErrorKind::parameter, "minimum 0-run length k0 must be >= 1");
  require(k1 >= 1, ErrorKind::parameter, "minimum 1-run length k1 must be >= 1");
  require(k0 <= length || k1 <= length, ErrorKind::parameter,
          "mask space is empty: both k0=" + std::to_string(k0) + " and k1=" +
              std::to_string(k1) + " exceed l=" + std::to_string(length));
}

BigCount count_masks(const MaskSpaceParams& params) {
  params.validate();
  const std::int64_t l = params.length;
  // Ring buffers over n of free[s][n]; n - k_s is the furthest look-back.
  const std::size_t window = static_cast<std::size_t>(std::max(params.k0, params.k1)) + 1;
  std::array<std::vector<BigCount>, 2> ring{std::vector<BigCount>(window),
                                           std::vector<BigCount>(window)};
  std::array<BigCount, 2> start{0, 0};
  for (std::int64_t n = 0; n <= l; ++n) {
    const std::size_t slot = static_cast<std::size_t>(n) % window;
    std::array<BigCount, 2> next;
    for (int s = 0; s < 2; ++s) {
      if (n == 0) {
        next[s] = 1;
        continue;
      }
      next[s] = ring[s][static_cast<std::size_t>(n - 1) % window];
      const std::int64_t other_run = params.min_run(1 - s);
      if (n >= other_run)
        next[s] += ring[1 - s][static_cast<std::size_t>(n - other_run) % window];
    }
    for (int s = 0; s < 2; ++s) {
      ring[s][slot] = std::move(next[s]);
      if (n == l - params.min_run(s)) start[s] = ring[s][slot];
    }
  }
  return start[0] + start[1];
}

PathCountTable::PathCountTable(const MaskSpaceParams& params) : params_(params) {
  params_.validate();
  const auto l = static_cast<std::size_t>(params_.length);
  for (auto& column : free_) column.resize(l + 1);
  for (std::size_t n = 0; n <= l; ++n) {
    for (int s = 0; s < 2; ++s) {
      if (n == 0) {
        free_[s][0] = 1;
        continue;
      }
      free_[s][n] = free_[s][n - 1];
      const auto other_run = static_cast<std::size_t>(params_.min_run(1 - s));
      if (n >= other_run) free_[s][n] += free_[1 - s][n - other_run];
    }
  }
  total_ = root_child(0) + root_child(1);
}

const BigCount& PathCountTable::free_completions(int symbol, std::int64_t remaining) const {
  require(symbol == 0 || symbol == 1, ErrorKind::parameter, "symbol must be 0 or 1");
  if (remaining < 0 || remaining > params_.length) return zero_count();
  return free_[symbol][static_cast<std::size_t>(remaining)];
}

const BigCount& PathCountTable::root_child(int symbol) const {
  require(symbol == 0 || symbol == 1, ErrorKind::parameter, "symbol must be 0 or 1");
  return free_completions(symbol, params_.length - params_.min_run(symbol));
}

const BigCount& PathCountTable::completions(std::int64_t position, int last_symbol,
                                            std::int64_t run_length) const {
  require(position >= 1 && position <= params_.length, ErrorKind::parameter,
          "state position out of range");
  require(run_length >= 1 && run_length <= position, ErrorKind::parameter,
          "state run length out of range");
  require(last_symbol == 0 || last_symbol == 1, ErrorKind::parameter,
          "symbol must be 0 or 1");
  const std::int64_t deficit = std::max<std::int64_t>(0, params_.min_run(last_symbol) - run_length);
  return free_completions(last_symbol, params_.length - position - deficit);
}

PathCountTable build_count_table(const MaskSpaceParams& params) { return PathCountTable(params); }

BitColumn sample_mask(const PathCountTable& table, std::uint64_t seed) {
  const auto& params = table.params();
  require(table.total() >= 1, ErrorKind::sampling, "cannot sample from an empty mask space");
  std::mt19937_64 rng(seed);
  BigCount rank = uniform_below(table.total(), rng);

  BitColumn out;
  out.reserve(static_cast<std::size_t>(params.length));
  auto emit_run = [&](int symbol) {
    out.insert(out.end(), static_cast<std::size_t>(params.min_run(symbol)),
               static_cast<std::uint8_t>(symbol));
  };

  int symbol = 0;
  if (rank < table.root_child(0)) {
    symbol = 0;
  } else {
    rank -= table.root_child(0);
    symbol = 1;
  }
  emit_run(symbol);

  while (static_cast<std::int64_t>(out.size()) < params.length) {
    const std::int64_t remaining = params.length - static_cast<std::int64_t>(out.size());
    const BigCount& stay = table.free_completions(symbol, remaining - 1);
    if (rank < stay) {
      out.push_back(static_cast<std::uint8_t>(symbol));
    } else {
      rank -= stay;
      symbol = 1 - symbol;
      emit_run(symbol);
    }
  }
  if (static_cast<std::int64_t>(out.size()) != params.length)
    fail(ErrorKind::internal, "sampler overran the sequence length");
  return out;
}

std::vector<TemporalMask> sample_multiclass(const PathCountTable& table,
                                            const std::vector<std::string>& class_names,
                                            std::size_t q, std::uint64_t seed) {
  require(q >= 1, ErrorKind::parameter, "sample count q must be >= 1");
  const std::size_t p = class_names.size();
  require(p >= 1, ErrorKind::parameter, "at least one class is required");
  std::vector<TemporalMask> masks;
  masks.reserve(q);
  for (std::size_t i = 0; i < q; ++i) {
    std::vector<BitColumn> columns;
    columns.reserve(p);
    for (std::size_t c = 0; c < p; ++c)
      columns.push_back(sample_mask(table, derive_seed(seed, i * p + c)));
    masks.push_back(TemporalMask::from_columns(columns, class_names));
  }
  return masks;
}

bool is_member(std::span<const std::uint8_t> column, const MaskSpaceParams& params) {
  require(static_cast<std::int64_t>(column.size()) == params.length, ErrorKind::parameter,
          "mask length " + std::to_string(column.size()) + " does not match l=" +
              std::to_string(params.length));
  std::size_t i = 0;
  while (i < column.size()) {
    const auto symbol = column[i];
    require(symbol <= 1, ErrorKind::parameter, "mask entries must be 0 or 1");
    std::size_t j = i;
    while (j < column.size() && column[j] == symbol) ++j;
    if (static_cast<std::int64_t>(j - i) < params.min_run(symbol)) return false;
    i = j;
  }
  return true;
}

}  // namespace tempmask
