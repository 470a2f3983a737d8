#include "tempmask/annotate.hpp"

#include <chrono>

#include "tempmask/digest.hpp"
#include "tempmask/io.hpp"
#include "tempmask/mask_space.hpp"
#include "tempmask/sim_slam.hpp"

namespace tempmask {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename T>
void read_optional(const nlohmann::json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::config, std::string("config field '") + key + "' has the wrong type");
  }
}

void read_path(const nlohmann::json& j, const char* key, std::filesystem::path& out) {
  std::string text = out.string();
  read_optional(j, key, text);
  out = text;
}

const nlohmann::json& section(const nlohmann::json& j, const char* key) {
  static const nlohmann::json empty = nlohmann::json::object();
  auto it = j.find(key);
  if (it == j.end()) return empty;
  require(it->is_object(), ErrorKind::config,
          std::string("config section '") + key + "' must be an object");
  return *it;
}

nlohmann::json eval_json(const EvalResult& r) {
  return {{"ate_rmse", r.ate_rmse}, {"tracking_rate", r.tracking_rate}, {"usm", r.usm}};
}

// Rethrows any failure of `body` tagged with the stage name.
template <typename F>
auto stage(const char* name, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("annotate stage '") + name + "': " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorKind::internal, std::string("annotate stage '") + name + "': " + e.what());
  }
}

}  // namespace

void AnnotationConfig::validate() const {
  require(!sequence_id.empty(), ErrorKind::config, "sequence_id must be set");
  try {
    TemporalMask(1, class_names);
  } catch (const Error& e) {
    fail(ErrorKind::config, std::string("class_names: ") + e.what());
  }
  require(sampling.q >= 2, ErrorKind::config,
          "sampling.q must be >= 2: aggregation compares pairs of samples");
  require(sampling.k0 >= 1 && sampling.k1 >= 1, ErrorKind::config,
          "sampling.k0 and sampling.k1 must be >= 1");
  require(sequence_length >= 0, ErrorKind::config, "sequence_length must be non-negative");
  if (sequence_length > 0)
    require(sequence_length >= sampling.k0 + sampling.k1, ErrorKind::config,
            "sequence of " + std::to_string(sequence_length) +
                " frames is shorter than k0 + k1 = " +
                std::to_string(sampling.k0 + sampling.k1) + "; use smaller block sizes");
  require(std::isfinite(lambda) && lambda > 0.0, ErrorKind::config, "usm.lambda must be positive");
  require(aggregation.threshold_count >= 2, ErrorKind::config,
          "aggregation.threshold_count must be >= 2");
  try {
    aggregation_params().validate();
  } catch (const Error& e) {
    fail(ErrorKind::config, std::string("aggregation: ") + e.what());
  }
  evaluator_spec().validate();
  require(parallelism >= 1, ErrorKind::config, "parallelism must be >= 1");
  require(!output.mask_csv.empty() && !output.report_json.empty(), ErrorKind::config,
          "output paths must be set");
}

AggregationParams AnnotationConfig::aggregation_params() const {
  AggregationParams params;
  params.sigma_a = aggregation.sigma_a;
  params.sigma_r = aggregation.sigma_r;
  params.thresholds = evenly_spaced_thresholds(std::max<std::size_t>(aggregation.threshold_count, 2));
  return params;
}

EvaluatorSpec AnnotationConfig::evaluator_spec() const {
  EvaluatorSpec spec = evaluator;
  spec.usm_params.lambda = lambda;
  return spec;
}

AnnotationConfig config_from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorKind::config, "config must be a JSON object");
  AnnotationConfig c;
  read_optional(j, "sequence_id", c.sequence_id);
  read_optional(j, "sequence_length", c.sequence_length);
  read_optional(j, "class_names", c.class_names);

  const auto& sampling = section(j, "sampling");
  read_optional(sampling, "q", c.sampling.q);
  read_optional(sampling, "k0", c.sampling.k0);
  read_optional(sampling, "k1", c.sampling.k1);
  read_optional(sampling, "seed", c.sampling.seed);

  read_optional(section(j, "usm"), "lambda", c.lambda);

  const auto& aggregation = section(j, "aggregation");
  read_optional(aggregation, "sigma_a", c.aggregation.sigma_a);
  read_optional(aggregation, "sigma_r", c.aggregation.sigma_r);
  read_optional(aggregation, "threshold_count", c.aggregation.threshold_count);

  const auto& evaluator = section(j, "evaluator");
  std::string kind = to_string(c.evaluator.kind);
  read_optional(evaluator, "kind", kind);
  c.evaluator.kind = parse_evaluator_kind(kind);
  read_optional(evaluator, "command_template", c.evaluator.command_template);
  read_path(evaluator, "scene_file", c.evaluator.scene_file);
  read_optional(evaluator, "repetitions", c.evaluator.repetitions);
  read_optional(evaluator, "base_seed", c.evaluator.base_seed);
  read_optional(evaluator, "timeout_seconds", c.evaluator.timeout_seconds);
  c.evaluator.usm_params.lambda = c.lambda;

  read_optional(j, "parallelism", c.parallelism);
  read_path(j, "cache_dir", c.cache_dir);
  const auto& output = section(j, "output");
  read_path(output, "mask_csv", c.output.mask_csv);
  read_path(output, "report_json", c.output.report_json);
  return c;
}

nlohmann::json to_json(const AnnotationConfig& c) {
  return {
      {"sequence_id", c.sequence_id},
      {"sequence_length", c.sequence_length},
      {"class_names", c.class_names},
      {"sampling", {{"q", c.sampling.q}, {"k0", c.sampling.k0}, {"k1", c.sampling.k1},
                    {"seed", c.sampling.seed}}},
      {"usm", {{"lambda", c.lambda}}},
      {"aggregation", {{"sigma_a", c.aggregation.sigma_a}, {"sigma_r", c.aggregation.sigma_r},
                       {"threshold_count", c.aggregation.threshold_count}}},
      {"evaluator", {{"kind", to_string(c.evaluator.kind)},
                     {"command_template", c.evaluator.command_template},
                     {"scene_file", c.evaluator.scene_file.string()},
                     {"repetitions", c.evaluator.repetitions},
                     {"base_seed", c.evaluator.base_seed},
                     {"timeout_seconds", c.evaluator.timeout_seconds}}},
      {"parallelism", c.parallelism},
      {"cache_dir", c.cache_dir.string()},
      {"output", {{"mask_csv", c.output.mask_csv.string()},
                  {"report_json", c.output.report_json.string()}}},
  };
}

AnnotationConfig read_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, path.string() + ": invalid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string experiment_digest(const AnnotationConfig& config) {
  nlohmann::json j = to_json(config);
  j.erase("parallelism");
  j.erase("cache_dir");
  j.erase("output");
  j["evaluator"].erase("timeout_seconds");
  return sha256_hex(j.dump());
}

nlohmann::json to_json(const AnnotationReport& r) {
  const auto& names = r.final_mask.class_names();
  nlohmann::json columns = nlohmann::json::object();
  nlohmann::json in_space = nlohmann::json::object();
  nlohmann::json degenerate = nlohmann::json::object();
  for (std::size_t c = 0; c < names.size(); ++c) {
    columns[names[c]] = format_bits(r.final_mask.column(c));
    if (c < r.final_columns_in_space.size()) in_space[names[c]] = r.final_columns_in_space[c];
    if (c < r.degenerate.size()) degenerate[names[c]] = r.degenerate[c];
  }

  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : r.sample_scores) samples.push_back(s ? nlohmann::json(*s) : nlohmann::json());

  nlohmann::json candidates = nlohmann::json::array();
  for (const auto& c : r.candidates) {
    nlohmann::json row{{"class", c.class_index ? nlohmann::json(names[*c.class_index])
                                               : nlohmann::json()},
                       {"origin", to_string(c.origin)},
                       {"threshold", c.threshold ? nlohmann::json(*c.threshold) : nlohmann::json()},
                       {"masked_entries", c.masked_entries},
                       {"selected", c.selected}};
    if (c.result)
      row["score"] = eval_json(*c.result);
    else
      row["score"] = nullptr;
    candidates.push_back(std::move(row));
  }

  return {
      {"tool", {{"name", kToolName}, {"version", kToolVersion}}},
      {"sequence_id", r.sequence_id},
      {"sequence_length", r.final_mask.frames()},
      {"class_names", names},
      {"config_digest", r.config_digest},
      {"seeds", {{"sampling", r.sampling_seed}, {"evaluator_base", r.evaluator_base_seed}}},
      {"final_mask", {{"columns", columns},
                      {"masked_entries", r.final_mask.masked_count()},
                      {"columns_in_mask_space", in_space}}},
      {"final_score", eval_json(r.final_score)},
      {"baselines", {{"all_zeros", eval_json(r.baseline_all_zeros)},
                     {"all_ones", eval_json(r.baseline_all_ones)}}},
      {"equivalence_band", r.equivalence_band},
      {"degenerate_fields", degenerate},
      {"sample_scores", samples},
      {"candidates", candidates},
      {"timings", {{"sampling_seconds", r.seconds_sampling},
                   {"benchmark_seconds", r.seconds_benchmark},
                   {"aggregation_seconds", r.seconds_aggregation},
                   {"total_seconds", r.seconds_total},
                   {"evaluations_run", r.evaluations_run},
                   {"cache_hits", r.cache_hits},
                   {"evaluator_launches", r.evaluator_launches}}},
  };
}

AnnotationReport annotate(const AnnotationConfig& input) {
  const auto started = Clock::now();
  AnnotationConfig config = input;
  stage("config", [&] {
    if (config.evaluator.kind == EvaluatorKind::in_process_simulator &&
        !config.evaluator.scene_file.empty()) {
      const auto scene = sim::read_scene(config.evaluator.scene_file);
      const auto frames = static_cast<std::int64_t>(scene.length());
      if (config.sequence_length == 0) config.sequence_length = frames;
      require(config.sequence_length == frames, ErrorKind::config,
              "sequence_length " + std::to_string(config.sequence_length) +
                  " does not match the scene (" + std::to_string(frames) + " frames)");
      require(config.class_names == scene.class_names, ErrorKind::config,
              "class_names " + nlohmann::json(config.class_names).dump() +
                  " do not match the scene classes " + nlohmann::json(scene.class_names).dump());
    }
    require(config.sequence_length > 0, ErrorKind::config, "sequence_length must be set");
    config.validate();
    return 0;
  });

  const auto params = config.aggregation_params();
  const MaskSpaceParams space{config.sequence_length, config.sampling.k0, config.sampling.k1};

  AnnotationReport report;
  report.sequence_id = config.sequence_id;
  report.config_digest = experiment_digest(config);
  report.sampling_seed = config.sampling.seed;
  report.evaluator_base_seed = config.evaluator.base_seed;

  // 1) uniform samples from the constrained mask space
  auto t0 = Clock::now();
  const auto samples_masks = stage("sampling", [&] {
    const PathCountTable table(space);
    return sample_multiclass(table, config.class_names, config.sampling.q, config.sampling.seed);
  });
  report.seconds_sampling = seconds_since(t0);

  // 2) benchmark every sample
  t0 = Clock::now();
  std::optional<Evaluator> evaluator_holder;
  stage("evaluator", [&] {
    evaluator_holder.emplace(config.evaluator_spec());
    return 0;
  });
  const Evaluator& evaluator = *evaluator_holder;
  EvaluationStats stats;
  std::vector<ScoredSample> scored;
  stage("benchmark", [&] {
    const auto entries = evaluate_batch(config.cache_dir, evaluator, config.sequence_id,
                                        samples_masks, config.parallelism, &stats);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].record) {
        report.sample_scores.emplace_back(entries[i].record->median.usm);
        scored.push_back({samples_masks[i], entries[i].record->median.usm});
      } else {
        report.sample_scores.emplace_back(std::nullopt);
      }
    }
    require(scored.size() >= 2, ErrorKind::evaluation,
            "fewer than 2 samples could be evaluated");
    return 0;
  });
  report.seconds_benchmark = seconds_since(t0);

  // 3) aggregate, binarize, evaluate candidates, select
  t0 = Clock::now();
  const CandidateEvaluator candidate_evaluator = [&](const std::vector<TemporalMask>& masks) {
    const auto entries = evaluate_batch(config.cache_dir, evaluator, config.sequence_id, masks,
                                        config.parallelism, &stats);
    std::vector<std::optional<EvalResult>> results;
    for (const auto& e : entries)
      results.push_back(e.record ? std::optional(e.record->median) : std::nullopt);
    return results;
  };
  const FinalizeResult final = stage("aggregation", [&] {
    return config.class_names.size() == 1
               ? finalize_singleclass(scored, params, candidate_evaluator)
               : finalize_multiclass(scored, params, candidate_evaluator);
  });

  stage("baselines", [&] {
    const auto& names = config.class_names;
    const auto l = static_cast<std::size_t>(config.sequence_length);
    report.baseline_all_zeros =
        cached_evaluate(config.cache_dir, evaluator, config.sequence_id,
                        TemporalMask::filled(l, names, 0), &stats)
            .median;
    report.baseline_all_ones =
        cached_evaluate(config.cache_dir, evaluator, config.sequence_id,
                        TemporalMask::filled(l, names, 1), &stats)
            .median;
    return 0;
  });
  report.seconds_aggregation = seconds_since(t0);

  report.final_mask = final.mask;
  report.final_score = final.score;
  report.candidates = final.candidates;
  report.degenerate = final.degenerate;
  for (std::size_t c = 0; c < final.mask.classes(); ++c)
    report.final_columns_in_space.push_back(is_member(final.mask.column(c), space));
  double best = final.score.usm;
  for (const auto& c : final.candidates)
    if (c.result) best = std::max(best, c.result->usm);
  report.equivalence_band = params.equivalence_band(best);

  report.evaluations_run = stats.evaluated.load();
  report.cache_hits = stats.cache_hits.load();
  report.evaluator_launches = evaluator.launches();
  report.seconds_total = seconds_since(started);

  stage("output", [&] {
    for (const auto& path : {config.output.mask_csv, config.output.report_json})
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_mask_csv(config.output.mask_csv, report.final_mask);
    write_file_atomic(config.output.report_json, to_json(report).dump(2) + "\n");
    return 0;
  });
  return report;
}

}  // namespace tempmask
