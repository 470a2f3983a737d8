#include "tempmask/trajectory_metrics.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <tuple>

#include "tempmask/error.hpp"
#include "tempmask/io.hpp"

namespace tempmask {

namespace {

constexpr double kQuaternionTolerance = 1e-6;
// Files written with few decimals are renormalized up to this deviation.
constexpr double kQuaternionRenormalizeLimit = 1e-2;

bool parse_number(std::string_view token, double& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc{} && ptr == token.data() + token.size() && std::isfinite(out);
}

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r' ||
                               line[i] == ','))
      ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r' &&
           line[j] != ',')
      ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

}  // namespace

void UsmParams::validate() const {
  require(std::isfinite(lambda) && lambda > 0.0, ErrorKind::parameter,
          "USM lambda must be positive");
}

Alignment parse_alignment(std::string_view name) {
  if (name == "none") return Alignment::none;
  if (name == "rigid") return Alignment::rigid;
  if (name == "rigid_with_scale") return Alignment::rigid_with_scale;
  fail(ErrorKind::parameter, "unknown alignment '" + std::string(name) +
                                 "' (expected none, rigid or rigid_with_scale)");
}

const char* to_string(Alignment alignment) noexcept {
  switch (alignment) {
    case Alignment::none: return "none";
    case Alignment::rigid: return "rigid";
    case Alignment::rigid_with_scale: return "rigid_with_scale";
  }
  return "unknown";
}

double usm(double ate_rmse, double tracking_rate, const UsmParams& params) {
  params.validate();
  require(std::isfinite(ate_rmse) && ate_rmse >= 0.0, ErrorKind::parameter,
          "ATE RMSE must be finite and non-negative");
  require(tracking_rate >= 0.0 && tracking_rate <= 1.0, ErrorKind::parameter,
          "tracking rate must lie in [0, 1]");
  return tracking_rate * std::exp(-params.lambda * ate_rmse);
}

EvalResult make_eval_result(double ate_rmse, double tracking_rate, const UsmParams& params) {
  return EvalResult{ate_rmse, tracking_rate, usm(ate_rmse, tracking_rate, params)};
}

UsmParams default_lambda(double avg_dataset_ate) {
  require(std::isfinite(avg_dataset_ate) && avg_dataset_ate > 0.0, ErrorKind::parameter,
          "average dataset ATE must be positive");
  return UsmParams{0.1 / avg_dataset_ate};
}

double tracking_rate(std::uint64_t tracked_frames, std::uint64_t total_frames) {
  require(total_frames > 0, ErrorKind::parameter, "total frame count must be positive");
  require(tracked_frames <= total_frames, ErrorKind::parameter,
          "tracked frames exceed total frames");
  return static_cast<double>(tracked_frames) / static_cast<double>(total_frames);
}

Trajectory parse_trajectory(std::string_view text) {
  Trajectory trajectory;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;

    const auto tokens = tokenize(line);
    if (tokens.empty() || tokens.front().front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    const auto where = "line " + std::to_string(line_no);
    require(tokens.size() == 8, ErrorKind::parse,
            where + ": expected 8 fields (timestamp tx ty tz qx qy qz qw), got " +
                std::to_string(tokens.size()));
    std::array<double, 8> v{};
    for (std::size_t i = 0; i < 8; ++i)
      require(parse_number(tokens[i], v[i]), ErrorKind::parse,
              where + ": field " + std::to_string(i + 1) + " is not a number");

    Pose pose;
    pose.timestamp = v[0];
    pose.position = Eigen::Vector3d(v[1], v[2], v[3]);
    pose.orientation = Eigen::Quaterniond(v[7], v[4], v[5], v[6]);
    const double norm = pose.orientation.norm();
    require(std::abs(norm - 1.0) <= kQuaternionRenormalizeLimit, ErrorKind::validation,
            where + ": quaternion is not unit length");
    if (std::abs(norm - 1.0) > kQuaternionTolerance) pose.orientation.normalize();
    if (!trajectory.poses.empty())
      require(pose.timestamp > trajectory.poses.back().timestamp, ErrorKind::validation,
              where + ": timestamps must be strictly increasing");
    trajectory.poses.push_back(pose);
    if (end == text.size()) break;
  }
  return trajectory;
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  try {
    return parse_trajectory(read_text_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string serialize_trajectory(const Trajectory& trajectory) {
  std::string out;
  for (const auto& pose : trajectory.poses) {
    const auto& q = pose.orientation;
    const std::array<double, 8> v{pose.timestamp, pose.position.x(), pose.position.y(),
                                  pose.position.z(), q.x(), q.y(), q.z(), q.w()};
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ' ';
      out += format_double(v[i]);
    }
    out += '\n';
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> associate(const Trajectory& reference,
                                                           const Trajectory& estimate,
                                                           double max_time_diff) {
  require(!reference.empty() && !estimate.empty(), ErrorKind::association,
          "cannot associate an empty trajectory");
  require(max_time_diff >= 0.0, ErrorKind::parameter, "max_time_diff must be non-negative");

  std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
  const auto& est = estimate.poses;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double t = reference.poses[i].timestamp;
    auto first = std::lower_bound(est.begin(), est.end(), t - max_time_diff,
                                  [](const Pose& p, double v) { return p.timestamp < v; });
    for (auto it = first; it != est.end() && it->timestamp <= t + max_time_diff; ++it)
      candidates.emplace_back(std::abs(it->timestamp - t), i,
                              static_cast<std::size_t>(it - est.begin()));
  }
  std::sort(candidates.begin(), candidates.end());

  std::vector<bool> ref_used(reference.size(), false), est_used(estimate.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [dt, i, j] : candidates) {
    if (ref_used[i] || est_used[j]) continue;
    ref_used[i] = est_used[j] = true;
    pairs.emplace_back(i, j);
  }
  require(!pairs.empty(), ErrorKind::association,
          "no timestamp pairs within max_time_diff=" + format_double(max_time_diff));
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

RigidAlignment align_points(const Eigen::Matrix3Xd& source, const Eigen::Matrix3Xd& target,
                            bool with_scale) {
  require(source.cols() == target.cols() && source.cols() >= 1, ErrorKind::parameter,
          "alignment needs equally sized, non-empty point sets");
  const double n = static_cast<double>(source.cols());
  const Eigen::Vector3d mean_src = source.rowwise().mean();
  const Eigen::Vector3d mean_tgt = target.rowwise().mean();
  const Eigen::Matrix3Xd src = source.colwise() - mean_src;
  const Eigen::Matrix3Xd tgt = target.colwise() - mean_tgt;

  const Eigen::Matrix3d cross = tgt * src.transpose() / n;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d signs = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) signs(2) = -1.0;

  RigidAlignment out;
  out.rotation = svd.matrixU() * signs.asDiagonal() * svd.matrixV().transpose();
  if (with_scale) {
    const double src_var = src.squaredNorm() / n;
    require(src_var > 0.0, ErrorKind::validation,
            "degenerate geometry: all estimated positions coincide, scale is undefined");
    out.scale = svd.singularValues().dot(signs) / src_var;
  }
  out.translation = mean_tgt - out.scale * out.rotation * mean_src;
  return out;
}

double ate_rmse(const Trajectory& reference, const Trajectory& estimate, Alignment align,
                double max_time_diff) {
  const auto pairs = associate(reference, estimate, max_time_diff);
  if (align != Alignment::none)
    require(pairs.size() >= 2, ErrorKind::validation,
            "alignment needs at least 2 associated poses, got " + std::to_string(pairs.size()));

  Eigen::Matrix3Xd ref(3, static_cast<Eigen::Index>(pairs.size()));
  Eigen::Matrix3Xd est(3, static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    ref.col(static_cast<Eigen::Index>(k)) = reference.poses[pairs[k].first].position;
    est.col(static_cast<Eigen::Index>(k)) = estimate.poses[pairs[k].second].position;
  }

  RigidAlignment transform;
  if (align != Alignment::none)
    transform = align_points(est, ref, align == Alignment::rigid_with_scale);

  double sum_sq = 0.0;
  for (Eigen::Index k = 0; k < ref.cols(); ++k)
    sum_sq += (ref.col(k) - transform.apply(est.col(k))).squaredNorm();
  return std::sqrt(sum_sq / static_cast<double>(ref.cols()));
}

}  // namespace tempmask
