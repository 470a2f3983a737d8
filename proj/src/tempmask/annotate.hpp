#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tempmask/aggregation.hpp"
#include "tempmask/evaluation.hpp"
#include "tempmask/temporal_mask.hpp"

namespace tempmask {

inline constexpr const char* kToolName = "tempmask";
inline constexpr const char* kToolVersion = "0.1.0";

struct SamplingConfig {
  std::size_t q = 200;
  std::int64_t k0 = 25;
  std::int64_t k1 = 25;
  std::uint64_t seed = 0;
};

struct AggregationConfig {
  double sigma_a = 0.01;
  double sigma_r = 0.05;
  std::size_t threshold_count = 101;
};

struct OutputConfig {
  std::filesystem::path mask_csv = "final_mask.csv";
  std::filesystem::path report_json = "report.json";
};

/// One annotation experiment. Relative paths resolve against the working
/// directory.
struct AnnotationConfig {
  std::string sequence_id;
  /// 0 means "take it from the scene" (in-process simulator only).
  std::int64_t sequence_length = 0;
  std::vector<std::string> class_names{"object"};
  SamplingConfig sampling;
  double lambda = 10.0;  // USM lambda, 1/m
  AggregationConfig aggregation;
  EvaluatorSpec evaluator;  // evaluator.usm_params is taken from `lambda`
  std::size_t parallelism = 1;
  std::filesystem::path cache_dir = "tempmask-cache";
  OutputConfig output;

  void validate() const;
  AggregationParams aggregation_params() const;
  EvaluatorSpec evaluator_spec() const;
};

AnnotationConfig config_from_json(const nlohmann::json& json);
/// Every field, defaults included.
nlohmann::json to_json(const AnnotationConfig& config);
AnnotationConfig read_config(const std::filesystem::path& path);

/// Digest of the fields that determine the result; parallelism, cache and
/// output locations and the timeout are excluded.
std::string experiment_digest(const AnnotationConfig& config);

struct AnnotationReport {
  std::string sequence_id;
  TemporalMask final_mask;
  EvalResult final_score;
  EvalResult baseline_all_zeros;
  EvalResult baseline_all_ones;
  std::vector<std::optional<double>> sample_scores;  // empty = failed evaluation
  std::vector<CandidateRecord> candidates;
  std::vector<bool> degenerate;
  std::vector<bool> final_columns_in_space;
  double equivalence_band = 0.0;
  std::string config_digest;
  std::uint64_t sampling_seed = 0;
  std::uint64_t evaluator_base_seed = 0;

  // Run-dependent fields, grouped under "timings" in the JSON report.
  double seconds_sampling = 0.0;
  double seconds_benchmark = 0.0;
  double seconds_aggregation = 0.0;
  double seconds_total = 0.0;
  std::uint64_t evaluations_run = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t evaluator_launches = 0;
};

nlohmann::json to_json(const AnnotationReport& report);

/// sample -> benchmark -> aggregate/select, then writes the final mask CSV and
/// the report JSON. Stage failures are rethrown tagged with the stage name;
/// the evaluation cache is left in place for a resumed run.
AnnotationReport annotate(const AnnotationConfig& config);

}  // namespace tempmask
