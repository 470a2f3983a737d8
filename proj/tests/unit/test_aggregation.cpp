#include <cmath>
#include <random>

#include "doctest.h"
#include "support.hpp"
#include "tempmask/aggregation.hpp"
#include "tempmask/error.hpp"

using namespace tempmask;
using testsupport::column_mask;

namespace {

ScoreField field_of(std::vector<double> values) {
  ScoreField f;
  f.frames = values.size();
  f.class_names = {"object"};
  f.values = std::move(values);
  return f;
}

std::vector<ScoredSample> frozen_samples() {
  return {{column_mask("110011"), 0.91},
          {column_mask("000111"), 0.42},
          {column_mask("111000"), 0.77},
          {column_mask("011110"), 0.60},
          {column_mask("001100"), 0.43}};
}

// Score = fraction of entries agreeing with `target`, counting calls.
struct AgreementEvaluator {
  TemporalMask target;
  std::size_t* calls;
  std::vector<std::optional<EvalResult>> operator()(const std::vector<TemporalMask>& masks) const {
    std::vector<std::optional<EvalResult>> out;
    for (const auto& m : masks) {
      ++*calls;
      std::size_t agree = 0, total = 0;
      for (std::size_t t = 0; t < m.frames(); ++t)
        for (std::size_t c = 0; c < m.classes(); ++c, ++total)
          agree += m.at(t, c) == target.at(t, c);
      const double s = double(agree) / double(total);
      out.push_back(EvalResult{0.0, s, s});
    }
    return out;
  }
};

}  // namespace

TEST_CASE("thresholds and params") {
  const auto t = evenly_spaced_thresholds(101);
  REQUIRE(t.size() == 101);
  CHECK(t.front() == 0.0);
  CHECK(t.back() == 1.0);
  CHECK(t[50] == doctest::Approx(0.5));
  CHECK_THROWS_AS(evenly_spaced_thresholds(1), Error);
  AggregationParams p;
  CHECK(p.equivalence_band(0.9) == doctest::Approx(0.045));
  CHECK(p.equivalence_band(0.1) == doctest::Approx(0.01));
  p.sigma_r = -1;
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("two-sample hand case") {
  const std::vector<ScoredSample> s{{column_mask("0011100"), 0.9}, {column_mask("0000000"), 0.5}};
  const auto raw = aggregate(s, AggregationParams{});
  const std::vector<double> expected{0, 0, 0.8, 0.8, 0.8, 0, 0};
  for (std::size_t i = 0; i < 7; ++i) CHECK(raw.values[i] == doctest::Approx(expected[i]));
  const auto n = normalize(raw);
  CHECK_FALSE(n.degenerate);
  CHECK(n.values == std::vector<double>{0, 0, 1, 1, 1, 0, 0});
  CHECK(format_bits(binarize(n, 0.5).column(0)) == "0011100");
  CHECK(format_bits(binarize(n, 0.0).column(0)) == "1111111");
  CHECK(format_bits(binarize(n, 1.0).column(0)) == "0011100");
}

TEST_CASE("aggregate matches the independent oracle") {
  const auto samples = frozen_samples();
  const AggregationParams params;
  const auto raw = aggregate(samples, params);
  const std::vector<double> expected_raw{4.28, 4.02, -0.8, -4.28, 0.54, 0.8};
  const std::vector<double> expected_norm{1.0, 0.969626168224, 0.406542056075,
                                          0.0, 0.56308411215, 0.593457943925};
  REQUIRE(raw.values.size() == 6);
  const auto norm = normalize(raw);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(raw.values[i] == doctest::Approx(expected_raw[i]).epsilon(1e-12));
    CHECK(norm.values[i] == doctest::Approx(expected_norm[i]).epsilon(1e-10));
  }
  CHECK(format_bits(binarize(norm, 0.5).column(0)) == "110011");
}

TEST_CASE("gating drops pairs inside the noise band") {
  // 0.04 is below both 0.05 * 1.0 and 0.05 * 0.96
  AggregationParams p;
  p.sigma_a = 0.0;
  const std::vector<ScoredSample> close{{column_mask("10"), 1.0}, {column_mask("01"), 0.96}};
  CHECK(aggregate(close, p).values == std::vector<double>{0.0, 0.0});
  const std::vector<ScoredSample> far{{column_mask("10"), 1.0}, {column_mask("01"), 0.5}};
  CHECK(aggregate(far, p).values == std::vector<double>{1.0, -1.0});
  // sigma_a dominates for small scores
  p.sigma_a = 0.2;
  const std::vector<ScoredSample> small{{column_mask("10"), 0.1}, {column_mask("01"), 0.25}};
  CHECK(aggregate(small, p).values == std::vector<double>{0.0, 0.0});
}

TEST_CASE("normalize edge cases") {
  const auto n = normalize(field_of({-1.0, 1.0}));
  CHECK(n.values == std::vector<double>{0.0, 1.0});
  const auto d = normalize(field_of({0.3, 0.3, 0.3}));
  CHECK(d.degenerate);
  CHECK(d.values == std::vector<double>{0, 0, 0});
  CHECK_THROWS_AS(normalize(n), Error);
  CHECK_THROWS_AS(binarize(field_of({0.1}), 0.5), Error);
  CHECK_THROWS_AS(binarize(n, 1.5), Error);
}

TEST_CASE("aggregate rejects bad input") {
  const AggregationParams p;
  const std::vector<ScoredSample> one{{column_mask("10"), 0.5}};
  CHECK_THROWS_AS(aggregate(one, p), Error);
  const std::vector<ScoredSample> shapes{{column_mask("10"), 0.5}, {column_mask("101"), 0.5}};
  CHECK_THROWS_AS(aggregate(shapes, p), Error);
  const std::vector<ScoredSample> range{{column_mask("10"), 0.5}, {column_mask("01"), 1.5}};
  CHECK_THROWS_AS(aggregate(range, p), Error);
}

TEST_CASE("select_best") {
  const AggregationParams p;
  const std::vector<Candidate> c{{column_mask("0000"), 0.90},
                                 {column_mask("1100"), 0.88},
                                 {column_mask("1110"), 0.80},
                                 {column_mask("0011"), 0.89}};
  // band = 0.045: indices 0, 1, 3 qualify; 1 and 3 tie on masked count, lowest wins
  CHECK(select_best_index(c, p) == 1);
  CHECK(select_best(c, p) == column_mask("1100"));
  const std::vector<Candidate> single{{column_mask("01"), 0.0}};
  CHECK(select_best_index(single, p) == 0);
  CHECK_THROWS_AS(select_best_index(std::span<const Candidate>{}, p), Error);
}

TEST_CASE("finalize_singleclass deduplicates candidates") {
  AggregationParams p;
  p.thresholds = {0.0, 0.5, 1.0};
  std::size_t calls = 0;
  const auto samples = frozen_samples();
  const auto result =
      finalize_singleclass(samples, p, AgreementEvaluator{column_mask("110011"), &calls});
  // thresholds give 111111, 110011, 100000; plus all-zeros (all-ones already present)
  CHECK(calls == 4);
  CHECK(result.candidates.size() == 4);
  CHECK(result.mask == column_mask("110011"));
  CHECK(result.score.usm == 1.0);
  std::size_t selected = 0;
  for (const auto& r : result.candidates) selected += r.selected;
  CHECK(selected == 1);
  CHECK(result.candidates[0].origin == CandidateOrigin::threshold);
  CHECK(result.candidates[0].threshold == 0.0);
}

TEST_CASE("threshold candidates are deduplicated") {
  AggregationParams p;
  p.thresholds = {0.0, 0.5, 1.0};
  std::size_t calls = 0;
  const std::vector<ScoredSample> s{{column_mask("0011100"), 0.9}, {column_mask("0000000"), 0.5}};
  const auto r = finalize_singleclass(s, p, AgreementEvaluator{column_mask("0011100"), &calls});
  // all-ones, 0011100, then all-zeros
  CHECK(calls == 3);
  CHECK(r.mask == column_mask("0011100"));
  CHECK(r.candidates[1].threshold == 0.5);
}

TEST_CASE("finalize_singleclass with a degenerate field evaluates constants only") {
  std::size_t calls = 0;
  const std::vector<ScoredSample> same{{column_mask("1100"), 0.5}, {column_mask("0011"), 0.5}};
  const auto result =
      finalize_singleclass(same, AggregationParams{}, AgreementEvaluator{column_mask("1111"), &calls});
  CHECK(calls == 2);
  REQUIRE(result.degenerate.size() == 1);
  CHECK(result.degenerate[0]);
  CHECK(result.mask == column_mask("1111"));
}

TEST_CASE("finalize skips failed candidates") {
  std::size_t calls = 0;
  AgreementEvaluator inner{column_mask("110011"), &calls};
  auto flaky = [&](const std::vector<TemporalMask>& masks) {
    auto out = inner(masks);
    for (std::size_t i = 0; i < masks.size(); ++i)
      if (masks[i] == column_mask("110011")) out[i].reset();
    return out;
  };
  const auto result = finalize_singleclass(frozen_samples(), AggregationParams{}, flaky);
  CHECK(result.mask != column_mask("110011"));
  auto none = [](const std::vector<TemporalMask>& masks) {
    return std::vector<std::optional<EvalResult>>(masks.size());
  };
  CHECK_THROWS_AS(finalize_singleclass(frozen_samples(), AggregationParams{}, none), Error);
}

TEST_CASE("aggregation properties") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  std::bernoulli_distribution bit(0.5);
  AggregationParams p;
  p.sigma_a = 0.0;
  p.sigma_r = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ScoredSample> s;
    for (int i = 0; i < 6; ++i) {
      std::string b;
      for (int t = 0; t < 8; ++t) b.push_back(bit(rng) ? '1' : '0');
      s.push_back({column_mask(b), score(rng) * 0.5});
    }
    const auto base = aggregate(s, p);

    // Negating every score difference (1 - s) negates the field.
    auto flipped = s;
    for (auto& x : flipped) x.score = 1.0 - x.score;
    const auto neg = aggregate(flipped, p);
    // Scaling every score by 2 scales the field by 2; shifting leaves it unchanged.
    auto scaled = s;
    for (auto& x : scaled) x.score *= 2.0;
    const auto sc = aggregate(scaled, p);
    auto shifted = s;
    for (auto& x : shifted) x.score += 0.25;
    const auto sh = aggregate(shifted, p);
    for (std::size_t i = 0; i < base.values.size(); ++i) {
      CHECK(neg.values[i] == doctest::Approx(-base.values[i]).epsilon(1e-9).scale(1));
      CHECK(sc.values[i] == doctest::Approx(2 * base.values[i]).epsilon(1e-9).scale(1));
      CHECK(sh.values[i] == doctest::Approx(base.values[i]).epsilon(1e-9).scale(1));
    }

    // Raising the score of a sample that masks frame t never lowers R at t.
    auto raised = s;
    raised[0].score += 0.3;
    const auto up = aggregate(raised, p);
    for (std::size_t t = 0; t < 8; ++t)
      if (s[0].mask.at(t, 0) == 1) CHECK(up.values[t] >= base.values[t] - 1e-12);

    // Normalized field lies in [0, 1] with both ends attained.
    const auto n = normalize(base);
    if (!n.degenerate) {
      CHECK(*std::min_element(n.values.begin(), n.values.end()) == 0.0);
      CHECK(*std::max_element(n.values.begin(), n.values.end()) == 1.0);
    }
    // Binarization is monotone in the threshold.
    CHECK(binarize(n, 0.3).masked_count() >= binarize(n, 0.7).masked_count());
  }
}

TEST_CASE("finalize_multiclass") {
  const std::vector<std::string> names{"a", "b"};
  auto two = [&](const std::string& x, const std::string& y) {
    return TemporalMask::from_columns({parse_bits(x), parse_bits(y)}, names);
  };
  // Identical columns give a symmetric result.
  const std::vector<ScoredSample> s{{two("110011", "110011"), 0.91},
                                    {two("000111", "000111"), 0.42},
                                    {two("111000", "111000"), 0.77},
                                    {two("011110", "011110"), 0.60}};
  std::size_t calls = 0;
  const auto target = two("110011", "110011");
  const auto r = finalize_multiclass(s, AggregationParams{}, AgreementEvaluator{target, &calls});
  CHECK(r.mask.column(0) == r.mask.column(1));
  CHECK(r.degenerate == std::vector<bool>{false, false});
  std::size_t concatenations = 0;
  for (const auto& c : r.candidates) concatenations += c.origin == CandidateOrigin::concatenation;
  CHECK(concatenations == 1);

  // Column b never varies: its zeroed field is degenerate.
  const std::vector<ScoredSample> d{{two("110011", "000000"), 0.91},
                                    {two("000111", "000000"), 0.42}};
  const auto rd = finalize_multiclass(d, AggregationParams{}, AgreementEvaluator{target, &calls});
  CHECK(rd.degenerate == std::vector<bool>{false, true});

  CHECK_THROWS_AS(finalize_multiclass(frozen_samples(), AggregationParams{},
                                      AgreementEvaluator{target, &calls}),
                  Error);
}
