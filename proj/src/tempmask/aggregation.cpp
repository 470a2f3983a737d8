#include "tempmask/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tempmask/error.hpp"

namespace tempmask {

namespace {

struct PendingCandidate {
  TemporalMask mask;
  CandidateOrigin origin;
  std::optional<double> threshold;
};

void push_unique(std::vector<PendingCandidate>& list, PendingCandidate candidate) {
  for (const auto& existing : list)
    if (existing.mask == candidate.mask) return;
  list.push_back(std::move(candidate));
}

TemporalMask with_column(std::size_t frames, const std::vector<std::string>& names,
                         std::size_t active, std::uint8_t value) {
  TemporalMask mask(frames, names);
  for (std::size_t t = 0; t < frames; ++t) mask.set(t, active, value);
  return mask;
}

// Builds, evaluates and selects among the candidates for one active column.
// Entries outside `active` stay 0 in every candidate. When `active` is empty
// the whole matrix is active (single-class case).
std::size_t solve_column(const ScoreField& normalized, std::optional<std::size_t> active,
                         const AggregationParams& params, const CandidateEvaluator& evaluator,
                         std::vector<CandidateRecord>& records, TemporalMask& best,
                         EvalResult& best_result) {
  const auto& names = normalized.class_names;
  const std::size_t frames = normalized.frames;
  auto constant = [&](std::uint8_t value) {
    return active ? with_column(frames, names, *active, value)
                  : TemporalMask::filled(frames, names, value);
  };

  std::vector<PendingCandidate> pending;
  if (!normalized.degenerate) {
    for (double threshold : params.thresholds) {
      TemporalMask mask = binarize(normalized, threshold);
      if (active) {
        for (std::size_t c = 0; c < mask.classes(); ++c)
          if (c != *active)
            for (std::size_t t = 0; t < frames; ++t) mask.set(t, c, 0);
      }
      push_unique(pending, {std::move(mask), CandidateOrigin::threshold, threshold});
    }
  }
  push_unique(pending, {constant(1), CandidateOrigin::all_ones, std::nullopt});
  push_unique(pending, {constant(0), CandidateOrigin::all_zeros, std::nullopt});

  std::vector<TemporalMask> masks;
  masks.reserve(pending.size());
  for (const auto& p : pending) masks.push_back(p.mask);
  const auto results = evaluator(masks);
  require(results.size() == masks.size(), ErrorKind::internal,
          "evaluator returned the wrong number of results");

  std::vector<Candidate> scored;
  std::vector<std::size_t> record_index;
  for (std::size_t i = 0; i < pending.size(); ++i) {
    CandidateRecord record;
    record.class_index = active;
    record.origin = pending[i].origin;
    record.threshold = pending[i].threshold;
    record.result = results[i];
    record.masked_entries = pending[i].mask.masked_count();
    records.push_back(record);
    if (results[i]) {
      scored.push_back({pending[i].mask, results[i]->usm});
      record_index.push_back(records.size() - 1);
    }
  }
  require(!scored.empty(), ErrorKind::evaluation, "every candidate evaluation failed");
  const std::size_t pick = select_best_index(scored, params);
  records[record_index[pick]].selected = true;
  best = scored[pick].mask;
  best_result = *records[record_index[pick]].result;
  return record_index[pick];
}

void check_samples(std::span<const ScoredSample> samples) {
  require(samples.size() >= 2, ErrorKind::parameter,
          "aggregation needs at least 2 scored samples");
  for (const auto& s : samples) {
    require(s.mask.same_shape(samples.front().mask), ErrorKind::parameter,
            "all sampled masks must share one shape and class list");
    require(std::isfinite(s.score) && s.score >= 0.0 && s.score <= 1.0, ErrorKind::parameter,
            "sample scores must lie in [0, 1]");
  }
}

}  // namespace

std::vector<double> evenly_spaced_thresholds(std::size_t count) {
  require(count >= 2, ErrorKind::parameter, "threshold count must be >= 2");
  std::vector<double> out(count);
  const double denom = static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<double>(i) / denom;
  return out;
}

void AggregationParams::validate() const {
  require(std::isfinite(sigma_a) && sigma_a >= 0.0, ErrorKind::parameter,
          "sigma_a must be non-negative");
  require(std::isfinite(sigma_r) && sigma_r >= 0.0, ErrorKind::parameter,
          "sigma_r must be non-negative");
  require(!thresholds.empty(), ErrorKind::parameter, "at least one threshold is required");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    require(thresholds[i] >= 0.0 && thresholds[i] <= 1.0, ErrorKind::parameter,
            "thresholds must lie in [0, 1]");
    if (i) require(thresholds[i] > thresholds[i - 1], ErrorKind::parameter,
                   "thresholds must be strictly increasing");
  }
}

double AggregationParams::equivalence_band(double best_score) const {
  return std::max(sigma_a, sigma_r * std::abs(best_score));
}

ScoreField aggregate(std::span<const ScoredSample> samples, const AggregationParams& params) {
  params.validate();
  check_samples(samples);
  const auto& first = samples.front().mask;
  ScoreField field;
  field.frames = first.frames();
  field.class_names = first.class_names();
  field.values.assign(field.frames * field.classes(), 0.0);

  for (const auto& x : samples) {
    for (const auto& y : samples) {
      if (&x == &y) continue;
      const double diff = y.score - x.score;
      if (!(std::abs(diff) > std::max(params.sigma_r * std::abs(x.score), params.sigma_a)))
        continue;
      for (std::size_t t = 0; t < field.frames; ++t)
        for (std::size_t c = 0; c < field.classes(); ++c) {
          const int delta = static_cast<int>(y.mask.at(t, c)) - static_cast<int>(x.mask.at(t, c));
          if (delta != 0) field.at(t, c) += diff * delta;
        }
    }
  }
  return field;
}

ScoreField normalize(const ScoreField& field) {
  require(!field.normalized, ErrorKind::parameter, "field is already normalized");
  require(!field.values.empty(), ErrorKind::parameter, "cannot normalize an empty field");
  ScoreField out = field;
  const auto [lo, hi] = std::minmax_element(field.values.begin(), field.values.end());
  const double min = *lo;
  const double range = *hi - *lo;
  out.normalized = true;
  if (!(range > 0.0)) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    out.degenerate = true;
    return out;
  }
  for (auto& v : out.values) v = std::clamp((v - min) / range, 0.0, 1.0);
  return out;
}

TemporalMask binarize(const ScoreField& field, double threshold) {
  require(field.normalized, ErrorKind::parameter, "binarize needs a normalized field");
  require(threshold >= 0.0 && threshold <= 1.0, ErrorKind::parameter,
          "threshold must lie in [0, 1]");
  TemporalMask mask(field.frames, field.class_names);
  for (std::size_t t = 0; t < field.frames; ++t)
    for (std::size_t c = 0; c < field.classes(); ++c)
      mask.set(t, c, field.at(t, c) >= threshold ? 1 : 0);
  return mask;
}

std::size_t select_best_index(std::span<const Candidate> candidates,
                              const AggregationParams& params) {
  require(!candidates.empty(), ErrorKind::parameter, "no candidates to select from");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) best = std::max(best, c.score);
  const double band = params.equivalence_band(best);

  std::size_t pick = candidates.size();
  std::size_t pick_masked = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!(std::abs(candidates[i].score - best) <= band)) continue;
    const std::size_t masked = candidates[i].mask.masked_count();
    if (pick == candidates.size() || masked > pick_masked) {
      pick = i;
      pick_masked = masked;
    }
  }
  return pick;
}

TemporalMask select_best(std::span<const Candidate> candidates, const AggregationParams& params) {
  return candidates[select_best_index(candidates, params)].mask;
}

const char* to_string(CandidateOrigin origin) noexcept {
  switch (origin) {
    case CandidateOrigin::threshold: return "threshold";
    case CandidateOrigin::all_ones: return "all_ones";
    case CandidateOrigin::all_zeros: return "all_zeros";
    case CandidateOrigin::concatenation: return "concatenation";
  }
  return "unknown";
}

FinalizeResult finalize_singleclass(std::span<const ScoredSample> samples,
                                    const AggregationParams& params,
                                    const CandidateEvaluator& evaluator) {
  check_samples(samples);
  require(samples.front().mask.classes() == 1, ErrorKind::parameter,
          "finalize_singleclass needs p = 1");
  const ScoreField field = normalize(aggregate(samples, params));

  FinalizeResult out;
  out.degenerate = {field.degenerate};
  solve_column(field, std::nullopt, params, evaluator, out.candidates, out.mask, out.score);
  return out;
}

FinalizeResult finalize_multiclass(std::span<const ScoredSample> samples,
                                   const AggregationParams& params,
                                   const CandidateEvaluator& evaluator) {
  check_samples(samples);
  const std::size_t p = samples.front().mask.classes();
  require(p >= 2, ErrorKind::parameter, "finalize_multiclass needs p >= 2");
  const ScoreField joint = aggregate(samples, params);
  const auto& names = joint.class_names;

  FinalizeResult out;
  std::vector<BitColumn> columns;
  for (std::size_t i = 0; i < p; ++i) {
    ScoreField zeroed = joint;
    for (std::size_t t = 0; t < zeroed.frames; ++t)
      for (std::size_t c = 0; c < p; ++c)
        if (c != i) zeroed.at(t, c) = 0.0;
    const ScoreField field = normalize(zeroed);
    out.degenerate.push_back(field.degenerate);

    TemporalMask best;
    EvalResult best_result;
    solve_column(field, i, params, evaluator, out.candidates, best, best_result);
    columns.push_back(best.column(i));
  }

  // Final comparison of the concatenation against the two constant matrices.
  const std::vector<PendingCandidate> finals{
      {TemporalMask::from_columns(columns, names), CandidateOrigin::concatenation, std::nullopt},
      {TemporalMask::filled(joint.frames, names, 1), CandidateOrigin::all_ones, std::nullopt},
      {TemporalMask::filled(joint.frames, names, 0), CandidateOrigin::all_zeros, std::nullopt}};
  std::vector<TemporalMask> masks;
  for (const auto& f : finals) masks.push_back(f.mask);
  const auto results = evaluator(masks);
  require(results.size() == masks.size(), ErrorKind::internal,
          "evaluator returned the wrong number of results");

  std::vector<Candidate> scored;
  std::vector<std::size_t> record_index;
  for (std::size_t i = 0; i < finals.size(); ++i) {
    CandidateRecord record;
    record.origin = finals[i].origin;
    record.result = results[i];
    record.masked_entries = finals[i].mask.masked_count();
    out.candidates.push_back(record);
    if (results[i]) {
      scored.push_back({finals[i].mask, results[i]->usm});
      record_index.push_back(out.candidates.size() - 1);
    }
  }
  require(!scored.empty(), ErrorKind::evaluation, "every final candidate evaluation failed");
  const std::size_t pick = select_best_index(scored, params);
  out.candidates[record_index[pick]].selected = true;
  out.mask = scored[pick].mask;
  out.score = *out.candidates[record_index[pick]].result;
  return out;
}

}  // namespace tempmask
