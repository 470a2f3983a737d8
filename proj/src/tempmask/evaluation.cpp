#include "tempmask/evaluation.hpp"

#include <algorithm>
#include <iostream>
#include <mutex>
#include <thread>

#include "tempmask/digest.hpp"
#include "tempmask/io.hpp"
#include "tempmask/sim_slam.hpp"

namespace tempmask {

namespace {

void warn(const std::string& message) {
  static std::mutex mutex;
  std::lock_guard lock(mutex);
  std::cerr << "warning: " << message << '\n';
}

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
  std::size_t count = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1))
    ++count;
  return count;
}

nlohmann::json to_json(const EvalResult& r) {
  return {{"ate_rmse", r.ate_rmse}, {"tracking_rate", r.tracking_rate}, {"usm", r.usm}};
}

EvalResult eval_from_json(const nlohmann::json& j) {
  return EvalResult{j.at("ate_rmse").get<double>(), j.at("tracking_rate").get<double>(),
                    j.at("usm").get<double>()};
}

}  // namespace

EvaluatorKind parse_evaluator_kind(std::string_view name) {
  if (name == "in_process_simulator") return EvaluatorKind::in_process_simulator;
  if (name == "subprocess") return EvaluatorKind::subprocess;
  fail(ErrorKind::config, "unknown evaluator kind '" + std::string(name) +
                              "' (expected in_process_simulator or subprocess)");
}

const char* to_string(EvaluatorKind kind) noexcept {
  switch (kind) {
    case EvaluatorKind::in_process_simulator: return "in_process_simulator";
    case EvaluatorKind::subprocess: return "subprocess";
  }
  return "unknown";
}

void EvaluatorSpec::validate() const {
  require(repetitions >= 1, ErrorKind::config, "evaluator repetitions must be >= 1");
  require(timeout_seconds > 0.0, ErrorKind::config, "evaluator timeout must be positive");
  usm_params.validate();
  if (kind == EvaluatorKind::subprocess) {
    for (const char* placeholder : {"{mask}", "{sequence}", "{out}"})
      require(count_occurrences(command_template, placeholder) == 1, ErrorKind::config,
              std::string("command template must contain ") + placeholder + " exactly once");
  } else {
    require(!scene_file.empty(), ErrorKind::config,
            "the in-process simulator needs a scene_file");
  }
}

nlohmann::json to_json(const EvaluationRecord& record) {
  nlohmann::json per_rep = nlohmann::json::array();
  for (const auto& r : record.per_rep) per_rep.push_back(to_json(r));
  return {{"sequence_id", record.sequence_id},
          {"mask_digest", record.mask_digest},
          {"spec_digest", record.spec_digest},
          {"per_rep", per_rep},
          {"median", to_json(record.median)}};
}

EvaluationRecord record_from_json(const nlohmann::json& j) {
  try {
    EvaluationRecord record;
    record.sequence_id = j.at("sequence_id").get<std::string>();
    record.mask_digest = j.at("mask_digest").get<std::string>();
    record.spec_digest = j.at("spec_digest").get<std::string>();
    for (const auto& r : j.at("per_rep")) record.per_rep.push_back(eval_from_json(r));
    record.median = eval_from_json(j.at("median"));
    return record;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("malformed evaluation record: ") + e.what());
  }
}

double median(std::vector<double> values) {
  require(!values.empty(), ErrorKind::parameter, "median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

EvalResult median_result(std::span<const EvalResult> per_rep) {
  std::vector<double> ate, tr, score;
  for (const auto& r : per_rep) {
    ate.push_back(r.ate_rmse);
    tr.push_back(r.tracking_rate);
    score.push_back(r.usm);
  }
  return EvalResult{median(ate), median(tr), median(score)};
}

Evaluator::Evaluator(EvaluatorSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  nlohmann::json fingerprint{{"kind", to_string(spec_.kind)},
                             {"repetitions", spec_.repetitions},
                             {"lambda", spec_.usm_params.lambda},
                             {"base_seed", spec_.base_seed}};
  if (spec_.kind == EvaluatorKind::in_process_simulator) {
    const std::string text = read_text_file(spec_.scene_file);
    fingerprint["scene_sha256"] = sha256_hex(text);
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::parse, spec_.scene_file.string() + ": invalid JSON: " + e.what());
    }
    scene_ = std::make_unique<sim::SceneScript>(sim::scene_from_json(parsed));
  } else {
    fingerprint["command_template"] = spec_.command_template;
  }
  spec_digest_ = sha256_hex(fingerprint.dump());
}

Evaluator::~Evaluator() = default;

EvalResult Evaluator::run_once(const std::string& sequence_id, const TemporalMask& mask,
                               std::uint64_t rep_seed) const {
  if (spec_.kind == EvaluatorKind::in_process_simulator)
    return sim::simulate(*scene_, mask, rep_seed, spec_.usm_params).eval;
  ++launches_;
  return run_subprocess(spec_, sequence_id, mask, rep_seed);
}

EvaluationRecord Evaluator::evaluate(const std::string& sequence_id,
                                     const TemporalMask& mask) const {
  EvaluationRecord record;
  record.sequence_id = sequence_id;
  record.mask_digest = mask_digest(mask);
  record.spec_digest = spec_digest_;
  for (std::uint32_t rep = 0; rep < spec_.repetitions; ++rep)
    record.per_rep.push_back(run_once(sequence_id, mask, spec_.base_seed + rep));
  record.median = median_result(record.per_rep);
  return record;
}

EvaluationRecord evaluate_mask(const EvaluatorSpec& spec, const std::string& sequence_id,
                               const TemporalMask& mask) {
  return Evaluator(spec).evaluate(sequence_id, mask);
}

std::string cache_key(const std::string& sequence_id, const std::string& mask_digest,
                      const std::string& spec_digest) {
  return sha256_hex(nlohmann::json{sequence_id, mask_digest, spec_digest}.dump());
}

EvaluationRecord cached_evaluate(const std::filesystem::path& cache_dir, const Evaluator& evaluator,
                                 const std::string& sequence_id, const TemporalMask& mask,
                                 EvaluationStats* stats) {
  if (cache_dir.empty()) {
    auto record = evaluator.evaluate(sequence_id, mask);
    if (stats) ++stats->evaluated;
    return record;
  }

  const std::string digest = mask_digest(mask);
  const auto path =
      cache_dir / (cache_key(sequence_id, digest, evaluator.spec_digest()) + ".json");

  std::error_code ec;
  if (std::filesystem::exists(path, ec)) {
    try {
      auto record = record_from_json(nlohmann::json::parse(read_text_file(path)));
      require(record.sequence_id == sequence_id && record.mask_digest == digest &&
                  record.spec_digest == evaluator.spec_digest() &&
                  record.per_rep.size() == evaluator.spec().repetitions,
              ErrorKind::parse, "record does not match its key");
      if (stats) ++stats->cache_hits;
      return record;
    } catch (const std::exception& e) {
      warn("ignoring corrupt cache entry " + path.string() + ": " + e.what());
      if (stats) ++stats->cache_repairs;
    }
  }

  auto record = evaluator.evaluate(sequence_id, mask);
  if (stats) ++stats->evaluated;
  std::filesystem::create_directories(cache_dir, ec);
  require(!ec, ErrorKind::io, "cannot create cache directory " + cache_dir.string());
  write_file_atomic(path, to_json(record).dump(2) + "\n");
  return record;
}

std::vector<BatchEntry> evaluate_batch(const std::filesystem::path& cache_dir,
                                       const Evaluator& evaluator, const std::string& sequence_id,
                                       const std::vector<TemporalMask>& masks,
                                       std::size_t parallelism, EvaluationStats* stats) {
  require(parallelism >= 1, ErrorKind::parameter, "parallelism must be >= 1");
  std::vector<BatchEntry> entries(masks.size());
  if (masks.empty()) return entries;

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < masks.size(); i = next++) {
      try {
        entries[i].record = cached_evaluate(cache_dir, evaluator, sequence_id, masks[i], stats);
      } catch (const Error& e) {
        entries[i].error_kind = e.kind();
        entries[i].error = e.what();
      } catch (const std::exception& e) {
        entries[i].error_kind = ErrorKind::internal;
        entries[i].error = e.what();
      }
    }
  };

  const std::size_t workers = std::min(parallelism, masks.size());
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  const bool any_ok =
      std::any_of(entries.begin(), entries.end(), [](const BatchEntry& e) { return e.record; });
  if (!any_ok)
    throw Error(entries.front().error_kind.value_or(ErrorKind::evaluation),
                "every evaluation in the batch failed; first error: " + entries.front().error);
  return entries;
}

}  // namespace tempmask
