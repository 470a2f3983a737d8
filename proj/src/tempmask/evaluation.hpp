#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tempmask/error.hpp"
#include "tempmask/temporal_mask.hpp"
#include "tempmask/trajectory_metrics.hpp"

namespace tempmask {

namespace sim {
struct SceneScript;
}

enum class EvaluatorKind { in_process_simulator, subprocess };

EvaluatorKind parse_evaluator_kind(std::string_view name);
const char* to_string(EvaluatorKind kind) noexcept;

/// Environment variable carrying the per-repetition seed to subprocesses.
inline constexpr const char* kSeedEnvVar = "TEMPMASK_SEED";

/// How to score one (sequence, mask) pair.
///
/// `subprocess` runs `command_template` through /bin/sh after substituting
/// {mask} (canonical mask CSV path), {sequence} (the sequence id) and {out}
/// (result JSON path to be written by the command), each shell-quoted. The
/// template must contain each placeholder exactly once.
///
/// `in_process_simulator` runs the synthetic SLAM on `scene_file`.
struct EvaluatorSpec {
  EvaluatorKind kind = EvaluatorKind::in_process_simulator;
  std::string command_template;
  std::filesystem::path scene_file;
  std::uint32_t repetitions = 10;
  UsmParams usm_params;
  std::uint64_t base_seed = 0;
  double timeout_seconds = 600.0;  // per repetition

  void validate() const;
};

struct EvaluationRecord {
  std::string sequence_id;
  std::string mask_digest;
  std::string spec_digest;
  std::vector<EvalResult> per_rep;
  /// Componentwise medians of ATE and TR; `usm` is the median of the
  /// per-repetition USM values and is the only field used for ranking.
  EvalResult median;

  friend bool operator==(const EvaluationRecord&, const EvaluationRecord&) = default;
};

nlohmann::json to_json(const EvaluationRecord& record);
EvaluationRecord record_from_json(const nlohmann::json& json);

/// Middle order statistic for odd counts, mean of the two middle values for
/// even counts.
double median(std::vector<double> values);
EvalResult median_result(std::span<const EvalResult> per_rep);

/// Runs evaluations for one spec. Thread-safe; the in-process scene is loaded
/// once at construction.
class Evaluator {
 public:
  explicit Evaluator(EvaluatorSpec spec);
  ~Evaluator();
  Evaluator(const Evaluator&) = delete;
  Evaluator& operator=(const Evaluator&) = delete;

  const EvaluatorSpec& spec() const noexcept { return spec_; }

  /// Hex SHA-256 over every field that can change a result (the scene file is
  /// folded in by content, the timeout is not).
  const std::string& spec_digest() const noexcept { return spec_digest_; }

  /// One repetition.
  EvalResult run_once(const std::string& sequence_id, const TemporalMask& mask,
                      std::uint64_t rep_seed) const;

  /// `repetitions` runs with seeds base_seed + rep, summarized by medians.
  EvaluationRecord evaluate(const std::string& sequence_id, const TemporalMask& mask) const;

  /// Number of external processes started so far.
  std::uint64_t launches() const noexcept { return launches_.load(); }

 private:
  EvaluatorSpec spec_;
  std::string spec_digest_;
  std::unique_ptr<sim::SceneScript> scene_;
  mutable std::atomic<std::uint64_t> launches_{0};
};

EvaluationRecord evaluate_mask(const EvaluatorSpec& spec, const std::string& sequence_id,
                               const TemporalMask& mask);

/// One repetition through the external command. Mask and result files live in
/// a fresh temporary directory per call.
EvalResult run_subprocess(const EvaluatorSpec& spec, const std::string& sequence_id,
                          const TemporalMask& mask, std::uint64_t rep_seed);

struct EvaluationStats {
  std::atomic<std::uint64_t> evaluated{0};    // records computed by running the evaluator
  std::atomic<std::uint64_t> cache_hits{0};
  std::atomic<std::uint64_t> cache_repairs{0};  // corrupt entries replaced
};

/// Cache file name (without extension) for a record.
std::string cache_key(const std::string& sequence_id, const std::string& mask_digest,
                      const std::string& spec_digest);

/// Returns the stored record on a hit; otherwise evaluates and persists with
/// write-temp-then-rename. Unreadable or mismatching entries produce a warning
/// on stderr and are re-evaluated. An empty `cache_dir` disables caching.
EvaluationRecord cached_evaluate(const std::filesystem::path& cache_dir, const Evaluator& evaluator,
                                 const std::string& sequence_id, const TemporalMask& mask,
                                 EvaluationStats* stats = nullptr);

struct BatchEntry {
  std::optional<EvaluationRecord> record;
  std::optional<ErrorKind> error_kind;
  std::string error;
};

/// Evaluates `masks` with at most `parallelism` evaluations in flight. Output
/// order follows input order. Individual failures are recorded per entry; the
/// call throws only when every entry failed.
std::vector<BatchEntry> evaluate_batch(const std::filesystem::path& cache_dir,
                                       const Evaluator& evaluator, const std::string& sequence_id,
                                       const std::vector<TemporalMask>& masks,
                                       std::size_t parallelism, EvaluationStats* stats = nullptr);

}  // namespace tempmask
