#include "tempmask/sim_slam.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include "tempmask/error.hpp"
#include "tempmask/io.hpp"
#include "tempmask/result_file.hpp"
#include "tempmask/seeding.hpp"

namespace tempmask::sim {

namespace {

// Generator constants shared by every profile.
constexpr std::uint32_t kMinFeatures = 20;

// Platform-independent draws (std distributions are implementation-defined).
class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next() { return derive_seed(seed_, counter_++); }
  std::uint32_t between(std::uint32_t lo, std::uint32_t hi) {
    return lo + static_cast<std::uint32_t>(next() % (hi - lo + 1));
  }
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::vector<std::size_t> boundaries(std::size_t length,
                                    std::initializer_list<std::pair<std::size_t, std::size_t>> fractions) {
  std::vector<std::size_t> out{0};
  for (auto [num, den] : fractions) out.push_back(length * num / den);
  out.push_back(length);
  return out;
}

Eigen::Vector3d read_vec3(const nlohmann::json& j, const std::string& what) {
  require(j.is_array() && j.size() == 3, ErrorKind::parse, what + " must be a 3-element array");
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) {
    require(j[i].is_number(), ErrorKind::parse, what + " entries must be numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

nlohmann::json write_vec3(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

template <typename T>
T get_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  require(it != j.end(), ErrorKind::parse, std::string("scene is missing '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::parse, std::string("scene field '") + key + "' has the wrong type");
  }
}

}  // namespace

void SceneScript::validate() const {
  require(!frames.empty(), ErrorKind::validation, "scene has no frames");
  require(!class_names.empty(), ErrorKind::validation, "scene has no classes");
  require(m_min >= 1, ErrorKind::validation, "m_min must be >= 1");
  require(std::isfinite(noise_sigma) && noise_sigma >= 0.0, ErrorKind::validation,
          "noise_sigma must be non-negative");
  require(ground_truth.size() == frames.size(), ErrorKind::validation,
          "ground_truth length must equal the frame count");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    require(frames[t].dynamic_counts.size() == class_names.size() &&
                frames[t].motion_bias.size() == class_names.size(),
            ErrorKind::validation,
            "frame " + std::to_string(t) + " must list one count and one bias per class");
    for (const auto& b : frames[t].motion_bias)
      require(b.allFinite(), ErrorKind::validation, "motion biases must be finite");
  }
  TemporalMask(frames.size(), class_names);  // validates class names
}

SimOutcome simulate(const SceneScript& scene, const TemporalMask& mask, std::uint64_t seed,
                    const UsmParams& usm_params) {
  scene.validate();
  usm_params.validate();
  require(mask.frames() == scene.length(), ErrorKind::parameter,
          "mask has " + std::to_string(mask.frames()) + " rows, scene has " +
              std::to_string(scene.length()) + " frames");
  require(mask.class_names() == scene.class_names, ErrorKind::parameter,
          "mask classes do not match scene classes");

  SimOutcome out;
  out.tracked.assign(scene.length(), false);
  out.drift.assign(scene.length(), Eigen::Vector3d::Zero());
  Eigen::Vector3d drift = Eigen::Vector3d::Zero();
  double sum_sq = 0.0;

  for (std::size_t t = 0; t < scene.length(); ++t) {
    const auto& frame = scene.frames[t];
    double unmasked_dynamic = 0.0;
    Eigen::Vector3d pull = Eigen::Vector3d::Zero();
    for (std::size_t c = 0; c < scene.class_names.size(); ++c) {
      if (mask.at(t, c)) continue;
      unmasked_dynamic += frame.dynamic_counts[c];
      pull += static_cast<double>(frame.dynamic_counts[c]) * frame.motion_bias[c];
    }
    const double usable = static_cast<double>(frame.static_count) + unmasked_dynamic;
    if (usable >= static_cast<double>(scene.m_min)) {
      Eigen::Vector3d increment = pull / usable;
      if (scene.noise_sigma > 0.0) {
        std::mt19937_64 rng(derive_seed(seed, t));
        std::normal_distribution<double> noise(0.0, scene.noise_sigma);
        for (int axis = 0; axis < 3; ++axis) increment[axis] += noise(rng);
      }
      drift += increment;
      out.tracked[t] = true;
      ++out.tracked_frames;
      sum_sq += drift.squaredNorm();
      Pose pose;
      pose.timestamp = static_cast<double>(t) * kFramePeriod;
      pose.position = scene.ground_truth[t] + drift;
      out.estimated.poses.push_back(pose);
    }
    out.drift[t] = drift;
  }

  const double ate =
      out.tracked_frames ? std::sqrt(sum_sq / static_cast<double>(out.tracked_frames)) : 0.0;
  out.eval = make_eval_result(ate, tracking_rate(out.tracked_frames, scene.length()), usm_params);
  return out;
}

TemporalMask optimal_mask(const SceneScript& scene) {
  scene.validate();
  std::optional<Eigen::Vector3d> direction;
  for (std::size_t t = 0; t < scene.length(); ++t) {
    for (const auto& b : scene.frames[t].motion_bias) {
      const double norm = b.norm();
      if (norm == 0.0) continue;
      if (!direction) {
        direction = b / norm;
        continue;
      }
      require(direction->cross(b).norm() <= 1e-9 * norm && direction->dot(b) > 0.0,
              ErrorKind::validation,
              "optimal_mask needs co-directional motion biases; frame " + std::to_string(t) +
                  " violates this");
    }
  }

  TemporalMask mask(scene.length(), scene.class_names);
  for (std::size_t t = 0; t < scene.length(); ++t) {
    const auto& frame = scene.frames[t];
    std::uint64_t usable = frame.static_count;
    std::vector<std::size_t> moving;
    for (std::size_t c = 0; c < scene.class_names.size(); ++c) {
      if (frame.dynamic_counts[c] > 0 && frame.motion_bias[c].norm() > 0.0)
        moving.push_back(c);
      else
        usable += frame.dynamic_counts[c];
    }
    if (!moving.empty() && usable >= scene.m_min)
      for (auto c : moving) mask.set(t, c, 1);
  }
  return mask;
}

SceneProfile parse_profile(std::string_view name) {
  if (name == "consensus_inversion") return SceneProfile::consensus_inversion;
  if (name == "excessive_masking") return SceneProfile::excessive_masking;
  if (name == "mixed") return SceneProfile::mixed;
  if (name == "static") return SceneProfile::still;
  fail(ErrorKind::parameter,
       "unknown scene profile '" + std::string(name) +
           "' (expected consensus_inversion, excessive_masking, mixed or static)");
}

const char* to_string(SceneProfile profile) noexcept {
  switch (profile) {
    case SceneProfile::consensus_inversion: return "consensus_inversion";
    case SceneProfile::excessive_masking: return "excessive_masking";
    case SceneProfile::mixed: return "mixed";
    case SceneProfile::still: return "static";
  }
  return "unknown";
}

std::size_t min_length(SceneProfile profile) noexcept {
  switch (profile) {
    case SceneProfile::still: return 1;
    case SceneProfile::consensus_inversion:
    case SceneProfile::excessive_masking: return 3;
    case SceneProfile::mixed: return 12;
  }
  return 1;
}

SceneScript generate_scene(SceneProfile profile, std::size_t length, std::size_t classes,
                           std::uint64_t seed) {
  require(classes >= 1, ErrorKind::parameter, "a scene needs at least one class");
  require(length >= min_length(profile), ErrorKind::parameter,
          std::string("profile '") + to_string(profile) + "' needs at least " +
              std::to_string(min_length(profile)) + " frames");

  SceneRng rng(seed);
  SceneScript scene;
  scene.profile = to_string(profile);
  scene.sequence_id = scene.profile + "-" + std::to_string(seed);
  scene.m_min = kMinFeatures;
  scene.noise_sigma = 0.0;
  scene.class_names.push_back("object");
  for (std::size_t c = 1; c < classes; ++c) scene.class_names.push_back("class" + std::to_string(c));

  const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const Eigen::Vector3d direction =
      Eigen::Vector3d(std::cos(heading), std::sin(heading), 0.2).normalized();
  const double speed = rng.uniform(0.01, 0.02);

  std::vector<std::string> labels;
  std::vector<std::size_t> cuts;
  switch (profile) {
    case SceneProfile::still:
      labels = {"still"};
      cuts = {0, length};
      break;
    case SceneProfile::consensus_inversion:
      labels = {"still", "moving", "still"};
      cuts = boundaries(length, {{1, 3}, {2, 3}});
      break;
    case SceneProfile::excessive_masking:
      labels = {"still", "low_static", "still"};
      cuts = boundaries(length, {{1, 3}, {2, 3}});
      break;
    case SceneProfile::mixed:
      labels = {"still", "moving", "still", "low_static", "still"};
      cuts = boundaries(length, {{1, 5}, {17, 60}, {3, 5}, {4, 5}});
      break;
  }

  scene.frames.resize(length);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    scene.phases.push_back({labels[k], cuts[k], cuts[k + 1]});
    for (std::size_t t = cuts[k]; t < cuts[k + 1]; ++t) {
      FrameScript& frame = scene.frames[t];
      frame.dynamic_counts.resize(classes);
      frame.motion_bias.assign(classes, Eigen::Vector3d::Zero());
      if (labels[k] == "still") {
        frame.static_count = rng.between(90, 130);
        for (auto& n : frame.dynamic_counts) n = rng.between(20, 40);
      } else if (labels[k] == "moving") {
        // Consensus inversion: the moving object outnumbers the background,
        // which alone still exceeds m_min.
        frame.static_count = rng.between(40, 60);
        frame.dynamic_counts[0] = rng.between(130, 170);
        for (std::size_t c = 1; c < classes; ++c) frame.dynamic_counts[c] = rng.between(10, 30);
        frame.motion_bias[0] = speed * direction;
      } else {
        // Too few static features: masking every class loses tracking.
        frame.static_count = rng.between(5, 12);
        frame.dynamic_counts[0] = rng.between(25, 40);
        for (std::size_t c = 1; c < classes; ++c) frame.dynamic_counts[c] = rng.between(0, 5);
      }
    }
  }

  scene.ground_truth.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    const double x = static_cast<double>(t);
    scene.ground_truth.emplace_back(0.02 * x, 0.5 * std::sin(0.05 * x), 0.1 * std::cos(0.03 * x));
  }
  scene.validate();
  return scene;
}

nlohmann::json scene_to_json(const SceneScript& scene) {
  nlohmann::json j;
  j["sequence_id"] = scene.sequence_id;
  j["class_names"] = scene.class_names;
  j["m_min"] = scene.m_min;
  j["noise_sigma"] = scene.noise_sigma;
  if (!scene.profile.empty()) j["profile"] = scene.profile;
  auto& frames = j["frames"] = nlohmann::json::array();
  for (const auto& f : scene.frames) {
    nlohmann::json bias = nlohmann::json::array();
    for (const auto& b : f.motion_bias) bias.push_back(write_vec3(b));
    frames.push_back({{"static_count", f.static_count},
                      {"dynamic_counts", f.dynamic_counts},
                      {"motion_bias", bias}});
  }
  auto& gt = j["ground_truth"] = nlohmann::json::array();
  for (const auto& g : scene.ground_truth) gt.push_back(write_vec3(g));
  auto& phases = j["phases"] = nlohmann::json::array();
  for (const auto& p : scene.phases)
    phases.push_back({{"label", p.label}, {"begin", p.begin}, {"end", p.end}});
  return j;
}

SceneScript scene_from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorKind::parse, "scene must be a JSON object");
  SceneScript scene;
  scene.sequence_id = get_field<std::string>(j, "sequence_id");
  scene.class_names = get_field<std::vector<std::string>>(j, "class_names");
  scene.m_min = get_field<std::uint32_t>(j, "m_min");
  scene.noise_sigma = get_field<double>(j, "noise_sigma");
  if (j.contains("profile")) scene.profile = get_field<std::string>(j, "profile");

  const auto frames = get_field<nlohmann::json>(j, "frames");
  require(frames.is_array(), ErrorKind::parse, "scene 'frames' must be an array");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& f = frames[t];
    require(f.is_object(), ErrorKind::parse, "frame " + std::to_string(t) + " must be an object");
    FrameScript frame;
    frame.static_count = get_field<std::uint32_t>(f, "static_count");
    frame.dynamic_counts = get_field<std::vector<std::uint32_t>>(f, "dynamic_counts");
    const auto bias = get_field<nlohmann::json>(f, "motion_bias");
    require(bias.is_array(), ErrorKind::parse, "motion_bias must be an array");
    for (const auto& b : bias)
      frame.motion_bias.push_back(read_vec3(b, "frame " + std::to_string(t) + " motion_bias"));
    scene.frames.push_back(std::move(frame));
  }
  const auto gt = get_field<nlohmann::json>(j, "ground_truth");
  require(gt.is_array(), ErrorKind::parse, "scene 'ground_truth' must be an array");
  for (const auto& g : gt) scene.ground_truth.push_back(read_vec3(g, "ground_truth entry"));
  if (j.contains("phases")) {
    for (const auto& p : j.at("phases"))
      scene.phases.push_back({get_field<std::string>(p, "label"),
                              get_field<std::size_t>(p, "begin"),
                              get_field<std::size_t>(p, "end")});
  }
  scene.validate();
  return scene;
}

SceneScript read_scene(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, path.string() + ": invalid JSON: " + e.what());
  }
  return scene_from_json(j);
}

void write_scene(const std::filesystem::path& path, const SceneScript& scene) {
  write_file_atomic(path, scene_to_json(scene).dump(1) + "\n");
}

EvalResult simulate_files(const std::filesystem::path& scene_file,
                          const std::filesystem::path& mask_file,
                          const std::filesystem::path& out_file, std::uint64_t seed,
                          const UsmParams& usm_params) {
  const SceneScript scene = read_scene(scene_file);
  const TemporalMask mask = read_mask_csv(mask_file);
  const SimOutcome outcome = simulate(scene, mask, seed, usm_params);
  ResultFile result;
  result.ate_rmse = outcome.eval.ate_rmse;
  result.tracking_rate = outcome.eval.tracking_rate;
  result.tracked_frames = outcome.tracked_frames;
  result.total_frames = scene.length();
  write_file_atomic(out_file, format_result_file(result));
  return outcome.eval;
}

int simulate_cli(const std::filesystem::path& scene_file, const std::filesystem::path& mask_file,
                 const std::filesystem::path& out_file, std::uint64_t seed,
                 const UsmParams& usm_params, std::ostream& err) {
  try {
    simulate_files(scene_file, mask_file, out_file, seed, usm_params);
    return 0;
  } catch (const std::exception& e) {
    err << "simulate: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace tempmask::sim
