#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tempmask {

struct Pose {
  double timestamp = 0.0;  // seconds
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

/// Poses with strictly increasing timestamps and unit quaternions.
struct Trajectory {
  std::vector<Pose> poses;

  std::size_t size() const noexcept { return poses.size(); }
  bool empty() const noexcept { return poses.empty(); }
};

/// Unified SLAM metric result. `usm` is tracking_rate * exp(-lambda * ate_rmse)
/// for a single run; for medians over repetitions it is the median of the
/// per-run values instead.
struct EvalResult {
  double ate_rmse = 0.0;       // meters
  double tracking_rate = 0.0;  // fraction in [0, 1]
  double usm = 0.0;

  friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

struct UsmParams {
  double lambda = 10.0;  // 1/m

  void validate() const;
};

enum class Alignment { none, rigid, rigid_with_scale };

Alignment parse_alignment(std::string_view name);
const char* to_string(Alignment alignment) noexcept;

inline constexpr double kDefaultMaxTimeDiff = 0.02;

/// TR * exp(-lambda * ATE). Out-of-range inputs are rejected, never clamped.
double usm(double ate_rmse, double tracking_rate, const UsmParams& params);

EvalResult make_eval_result(double ate_rmse, double tracking_rate, const UsmParams& params);

/// lambda = 0.1 / average dataset ATE RMSE.
UsmParams default_lambda(double avg_dataset_ate);

double tracking_rate(std::uint64_t tracked_frames, std::uint64_t total_frames);

/// TUM format: "timestamp tx ty tz qx qy qz qw" per line, '#' comments and
/// blank lines skipped.
Trajectory parse_trajectory(std::string_view text);
Trajectory read_trajectory(const std::filesystem::path& path);
std::string serialize_trajectory(const Trajectory& trajectory);

/// Greedy one-to-one nearest-timestamp matching with |dt| <= max_time_diff,
/// returned as (reference index, estimate index) sorted by reference time.
std::vector<std::pair<std::size_t, std::size_t>> associate(const Trajectory& reference,
                                                           const Trajectory& estimate,
                                                           double max_time_diff);

/// Similarity (scale = 1 unless requested) minimizing sum ||ref - (s R est + t)||^2.
struct RigidAlignment {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double scale = 1.0;

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return scale * (rotation * p) + translation;
  }
};

/// Closed-form alignment of `source` onto `target` from the SVD of their
/// cross-covariance. Columns are points.
RigidAlignment align_points(const Eigen::Matrix3Xd& source, const Eigen::Matrix3Xd& target,
                            bool with_scale);

double ate_rmse(const Trajectory& reference, const Trajectory& estimate, Alignment align,
                double max_time_diff = kDefaultMaxTimeDiff);

}  // namespace tempmask
