#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "tempmask/trajectory_metrics.hpp"

namespace tempmask {

/// Contents of an evaluator result file:
///   {"ate_rmse": <m>, "tracking_rate": <[0,1]>,
///    "tracked_frames": <int, optional>, "total_frames": <int, optional>}
struct ResultFile {
  double ate_rmse = 0.0;
  double tracking_rate = 0.0;
  std::optional<std::uint64_t> tracked_frames;
  std::optional<std::uint64_t> total_frames;
};

/// Protocol error on missing or ill-typed keys, out-of-range values, or frame
/// counts inconsistent with tracking_rate.
ResultFile parse_result_file(std::string_view text);
std::string format_result_file(const ResultFile& result);

}  // namespace tempmask
