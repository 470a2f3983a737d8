#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tempmask/temporal_mask.hpp"
#include "tempmask/trajectory_metrics.hpp"

namespace tempmask::sim {

struct FrameScript {
  std::uint32_t static_count = 0;
  std::vector<std::uint32_t> dynamic_counts;  // per class
  std::vector<Eigen::Vector3d> motion_bias;   // per class, meters/frame
};

struct ScenePhase {
  std::string label;
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
};

/// Feature-count abstraction of a dynamic scene. Unmasked moving features pull
/// the pose estimate along their motion; masking too much loses tracking.
struct SceneScript {
  std::string sequence_id;
  std::vector<std::string> class_names;
  std::uint32_t m_min = 1;  // minimum usable features to track a frame
  double noise_sigma = 0.0;  // per-axis drift noise, meters
  std::vector<FrameScript> frames;
  std::vector<Eigen::Vector3d> ground_truth;
  std::vector<ScenePhase> phases;  // informational labels
  std::string profile;             // generator profile, empty for hand-written scenes

  std::size_t length() const noexcept { return frames.size(); }
  void validate() const;
};

struct SimOutcome {
  Trajectory estimated;  // tracked frames only
  std::vector<bool> tracked;
  std::vector<Eigen::Vector3d> drift;  // cumulative drift per frame
  EvalResult eval;
  std::size_t tracked_frames = 0;
};

/// Frame timestamps used for simulated trajectories.
inline constexpr double kFramePeriod = 1.0 / 30.0;

/// Deterministic in (scene, mask, seed). Per frame: usable features
/// u = n_s + sum of unmasked dynamic counts; u < m_min leaves the frame
/// untracked and the drift unchanged, otherwise the drift grows by the
/// count-weighted mean bias of the unmasked classes plus N(0, noise_sigma)
/// per axis. ATE is the RMS drift norm over tracked frames (0 when none are).
SimOutcome simulate(const SceneScript& scene, const TemporalMask& mask, std::uint64_t seed,
                    const UsmParams& usm_params);

/// Greedy per-frame oracle: mask every class with nonzero motion when doing so
/// keeps u >= m_min. Refuses scenes whose biases are not co-directional.
TemporalMask optimal_mask(const SceneScript& scene);

enum class SceneProfile { consensus_inversion, excessive_masking, mixed, still };

SceneProfile parse_profile(std::string_view name);
const char* to_string(SceneProfile profile) noexcept;

/// Minimum sequence length accepted by generate_scene for `profile`.
std::size_t min_length(SceneProfile profile) noexcept;

/// Synthesizes a labelled scene. Class 0 is the only class that ever moves;
/// further classes are present but still. Phases (fractions of l):
///   still:               still
///   consensus_inversion: still [0,1/3) | moving [1/3,2/3) | still
///   excessive_masking:   still [0,1/3) | low_static [1/3,2/3) | still
///   mixed:               still [0,1/5) | moving [1/5,17/60) | still [17/60,3/5) |
///                        low_static [3/5,4/5) | still [4/5,1)
/// Moving frames have more class-0 features than static ones but enough static
/// features to track with everything masked; low_static frames need the
/// class-0 features to stay tracked, other classes are sparse there. Biases
/// share one direction.
SceneScript generate_scene(SceneProfile profile, std::size_t length, std::size_t classes,
                           std::uint64_t seed);

nlohmann::json scene_to_json(const SceneScript& scene);
SceneScript scene_from_json(const nlohmann::json& json);
SceneScript read_scene(const std::filesystem::path& path);
void write_scene(const std::filesystem::path& path, const SceneScript& scene);

/// Reads a scene JSON and a mask CSV, simulates, writes the evaluator result
/// file. Throws on any failure.
EvalResult simulate_files(const std::filesystem::path& scene_file,
                          const std::filesystem::path& mask_file,
                          const std::filesystem::path& out_file, std::uint64_t seed,
                          const UsmParams& usm_params);

/// simulate_files with the process exit-status contract: 0 on success,
/// 1 with a message on `err` otherwise.
int simulate_cli(const std::filesystem::path& scene_file, const std::filesystem::path& mask_file,
                 const std::filesystem::path& out_file, std::uint64_t seed,
                 const UsmParams& usm_params, std::ostream& err);

}  // namespace tempmask::sim
