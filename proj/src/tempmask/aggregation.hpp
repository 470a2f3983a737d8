#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tempmask/temporal_mask.hpp"
#include "tempmask/trajectory_metrics.hpp"

namespace tempmask {

struct ScoredSample {
  TemporalMask mask;
  double score = 0.0;  // median USM, in [0, 1]
};

/// {0, 1/(count-1), ..., 1}; count >= 2.
std::vector<double> evenly_spaced_thresholds(std::size_t count);

struct AggregationParams {
  double sigma_a = 0.01;  // absolute score noise
  double sigma_r = 0.05;  // relative score noise
  std::vector<double> thresholds = evenly_spaced_thresholds(101);

  void validate() const;

  /// Half-width of the score band within which masks count as equivalent.
  double equivalence_band(double best_score) const;
};

/// Real-valued l x p aggregate, row-major.
struct ScoreField {
  std::size_t frames = 0;
  std::vector<std::string> class_names;
  std::vector<double> values;
  bool normalized = false;
  bool degenerate = false;  // set by normalize() when all entries were equal

  std::size_t classes() const noexcept { return class_names.size(); }
  double at(std::size_t frame, std::size_t cls) const { return values[frame * classes() + cls]; }
  double& at(std::size_t frame, std::size_t cls) { return values[frame * classes() + cls]; }
};

/// Sum over ordered pairs (x, y), x != y, of gate * (s_y - s_x) * (y - x) where
/// gate = 1 iff |s_y - s_x| > max(sigma_r * |s_x|, sigma_a). Un-normalized.
ScoreField aggregate(std::span<const ScoredSample> samples, const AggregationParams& params);

/// Joint min-max normalization over all entries. A constant field maps to all
/// zeros with `degenerate` set.
ScoreField normalize(const ScoreField& field);

/// 1 where the normalized value is >= threshold.
TemporalMask binarize(const ScoreField& field, double threshold);

struct Candidate {
  TemporalMask mask;
  double score = 0.0;
};

/// Index of the selected candidate: among those within the equivalence band of
/// the best score, the one masking the most entries; remaining ties go to the
/// lowest index.
std::size_t select_best_index(std::span<const Candidate> candidates,
                              const AggregationParams& params);
TemporalMask select_best(std::span<const Candidate> candidates, const AggregationParams& params);

/// Scores a batch of candidate masks (median EvalResult each). An empty
/// optional marks a failed evaluation; such candidates are skipped.
using CandidateEvaluator =
    std::function<std::vector<std::optional<EvalResult>>(const std::vector<TemporalMask>&)>;

enum class CandidateOrigin { threshold, all_ones, all_zeros, concatenation };
const char* to_string(CandidateOrigin origin) noexcept;

struct CandidateRecord {
  std::optional<std::size_t> class_index;  // empty for whole-matrix candidates
  CandidateOrigin origin = CandidateOrigin::threshold;
  std::optional<double> threshold;  // lowest threshold that produced the mask
  std::optional<EvalResult> result;
  std::size_t masked_entries = 0;
  bool selected = false;
};

struct FinalizeResult {
  TemporalMask mask;
  EvalResult score;
  std::vector<CandidateRecord> candidates;
  std::vector<bool> degenerate;  // per class
};

/// aggregate -> normalize -> binarize at every threshold -> add the all-ones
/// and all-zeros masks -> deduplicate -> evaluate -> select_best. A degenerate
/// field only evaluates the two constant masks. Requires p = 1.
FinalizeResult finalize_singleclass(std::span<const ScoredSample> samples,
                                    const AggregationParams& params,
                                    const CandidateEvaluator& evaluator);

/// Per class i: zero every other column of the joint aggregate, normalize,
/// binarize, evaluate candidates whose other columns are unmasked and keep the
/// best column i. The concatenated columns are finally compared against the
/// all-ones and all-zeros matrices with select_best. Requires p >= 2.
FinalizeResult finalize_multiclass(std::span<const ScoredSample> samples,
                                   const AggregationParams& params,
                                   const CandidateEvaluator& evaluator);

}  // namespace tempmask
