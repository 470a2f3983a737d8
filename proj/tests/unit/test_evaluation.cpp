#include <fstream>
#include <thread>

#include "doctest.h"
#include "support.hpp"
#include "tempmask/error.hpp"
#include "tempmask/io.hpp"
#include "tempmask/evaluation.hpp"
#include "tempmask/sim_slam.hpp"

using namespace tempmask;
using testsupport::column_mask;
using testsupport::TempDir;

namespace {

// Reports tracking_rate = 0.<seed>, ignores the mask.
EvaluatorSpec seed_echo_spec(std::uint32_t reps, std::uint64_t base_seed) {
  EvaluatorSpec spec;
  spec.kind = EvaluatorKind::subprocess;
  spec.command_template =
      "printf '{\"ate_rmse\": 0, \"tracking_rate\": 0.%s}' \"$TEMPMASK_SEED\" > {out}; "
      ": {mask} {sequence}";
  spec.repetitions = reps;
  spec.base_seed = base_seed;
  return spec;
}

// Tracking rate = fraction of unmasked frames, read from the mask CSV.
EvaluatorSpec counting_spec(std::uint32_t reps) {
  EvaluatorSpec spec;
  spec.kind = EvaluatorKind::subprocess;
  spec.command_template =
      "f={mask}; n=$(tail -n +2 \"$f\" | grep -c ',0$'); t=$(tail -n +2 \"$f\" | wc -l); "
      "echo \"{\\\"ate_rmse\\\": 0, \\\"tracking_rate\\\": $(echo \"$n $t\" | "
      "awk '{print $1/$2}')}\" > {out}; : {sequence}";
  spec.repetitions = reps;
  return spec;
}

ErrorKind error_kind(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::internal;
}

sim::SceneScript static_scene(std::size_t length) {
  sim::SceneScript scene;
  scene.sequence_id = "static";
  scene.class_names = {"object"};
  scene.m_min = 10;
  for (std::size_t t = 0; t < length; ++t) {
    scene.frames.push_back({100, {20}, {Eigen::Vector3d::Zero()}});
    scene.ground_truth.push_back(Eigen::Vector3d(0.01 * double(t), 0, 0));
  }
  return scene;
}

}  // namespace

TEST_CASE("median conventions") {
  CHECK(median({3.0}) == 3.0);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK_THROWS_AS(median({}), Error);
  const std::vector<EvalResult> reps{{0.1, 1.0, 0.3}, {0.3, 0.5, 0.1}, {0.2, 0.7, 0.2}};
  const auto m = median_result(reps);
  CHECK(m.ate_rmse == 0.2);
  CHECK(m.tracking_rate == 0.7);
  CHECK(m.usm == 0.2);
}

TEST_CASE("evaluator spec validation") {
  auto spec = seed_echo_spec(1, 0);
  CHECK_NOTHROW(spec.validate());
  spec.command_template = "true {mask} {out}";
  CHECK(error_kind([&] { spec.validate(); }) == ErrorKind::config);
  spec.command_template = "true {mask} {mask} {sequence} {out}";
  CHECK(error_kind([&] { spec.validate(); }) == ErrorKind::config);
  spec = seed_echo_spec(0, 0);
  CHECK(error_kind([&] { spec.validate(); }) == ErrorKind::config);
  EvaluatorSpec in_process;
  CHECK(error_kind([&] { in_process.validate(); }) == ErrorKind::config);
  CHECK(parse_evaluator_kind("subprocess") == EvaluatorKind::subprocess);
  CHECK(parse_evaluator_kind("in_process_simulator") == EvaluatorKind::in_process_simulator);
  CHECK(error_kind([] { parse_evaluator_kind("remote"); }) == ErrorKind::config);
}

TEST_CASE("subprocess evaluator passes seeds and takes medians") {
  const Evaluator ev(seed_echo_spec(3, 1));
  const auto record = ev.evaluate("seq", column_mask("0101"));
  REQUIRE(record.per_rep.size() == 3);
  CHECK(record.per_rep[0].tracking_rate == doctest::Approx(0.1));
  CHECK(record.per_rep[2].tracking_rate == doctest::Approx(0.3));
  CHECK(record.median.tracking_rate == doctest::Approx(0.2));
  CHECK(record.median.usm == doctest::Approx(0.2));
  CHECK(ev.launches() == 3);
  CHECK(record.mask_digest == mask_digest(column_mask("0101")));
}

TEST_CASE("subprocess evaluator reads the mask file") {
  const Evaluator ev(counting_spec(1));
  CHECK(ev.evaluate("seq", column_mask("0011")).median.tracking_rate == doctest::Approx(0.5));
  CHECK(ev.evaluate("seq", column_mask("0001")).median.tracking_rate == doctest::Approx(0.75));
}

TEST_CASE("subprocess failures") {
  auto spec = seed_echo_spec(1, 0);
  const auto mask = column_mask("01");

  spec.command_template = "echo boom >&2; exit 1; : {mask} {sequence} {out}";
  try {
    run_subprocess(spec, "seq", mask, 0);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::evaluation);
    CHECK(std::string(e.what()).find("boom") != std::string::npos);
  }

  spec.command_template = "true {mask} {sequence} {out}";
  CHECK(error_kind([&] { run_subprocess(spec, "seq", mask, 0); }) == ErrorKind::protocol);

  spec.command_template = "echo '{\"ate_rmse\": 0.1}' > {out}; : {mask} {sequence}";
  CHECK(error_kind([&] { run_subprocess(spec, "seq", mask, 0); }) == ErrorKind::protocol);

  spec.command_template = "sleep 20; : {mask} {sequence} {out}";
  spec.timeout_seconds = 0.3;
  const auto start = std::chrono::steady_clock::now();
  CHECK(error_kind([&] { run_subprocess(spec, "seq", mask, 0); }) == ErrorKind::timeout);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(10));
}

TEST_CASE("placeholders are shell-quoted") {
  EvaluatorSpec spec;
  spec.kind = EvaluatorKind::subprocess;
  spec.command_template =
      "test {sequence} = \"it's a; seq\" && echo '{\"ate_rmse\": 0, \"tracking_rate\": 1}' > {out}"
      "; : {mask}";
  spec.repetitions = 1;
  CHECK(run_subprocess(spec, "it's a; seq", column_mask("01"), 0).tracking_rate == 1.0);
}

TEST_CASE("cache hits skip the evaluator") {
  TempDir dir;
  const auto cache = dir / "cache";
  const auto mask = column_mask("0110");
  const Evaluator ev(seed_echo_spec(3, 1));
  EvaluationStats stats;
  const auto first = cached_evaluate(cache, ev, "seq", mask, &stats);
  CHECK(ev.launches() == 3);
  const auto second = cached_evaluate(cache, ev, "seq", mask, &stats);
  CHECK(ev.launches() == 3);
  CHECK(second == first);
  CHECK(stats.cache_hits == 1);
  CHECK(stats.evaluated == 1);

  // A different sequence or repetition count misses.
  cached_evaluate(cache, ev, "other", mask, &stats);
  CHECK(ev.launches() == 6);
  const Evaluator ev5(seed_echo_spec(5, 1));
  CHECK(ev5.spec_digest() != ev.spec_digest());
  cached_evaluate(cache, ev5, "seq", mask, &stats);
  CHECK(ev5.launches() == 5);

  // Changing the timeout does not change the key.
  auto slow = seed_echo_spec(3, 1);
  slow.timeout_seconds = 30;
  const Evaluator ev_slow(slow);
  CHECK(ev_slow.spec_digest() == ev.spec_digest());
  cached_evaluate(cache, ev_slow, "seq", mask);
  CHECK(ev_slow.launches() == 0);
}

TEST_CASE("corrupt cache entries are repaired") {
  TempDir dir;
  const auto mask = column_mask("0110");
  const Evaluator ev(seed_echo_spec(1, 1));
  const auto path = dir.path() / (cache_key("seq", mask_digest(mask), ev.spec_digest()) + ".json");
  std::ofstream(path) << "{ truncated";
  EvaluationStats stats;
  const auto record = cached_evaluate(dir.path(), ev, "seq", mask, &stats);
  CHECK(stats.cache_repairs == 1);
  CHECK(ev.launches() == 1);
  CHECK(record_from_json(nlohmann::json::parse(read_text_file(path))) == record);
  cached_evaluate(dir.path(), ev, "seq", mask, &stats);
  CHECK(ev.launches() == 1);
}

TEST_CASE("concurrent misses on one key leave a valid entry") {
  TempDir dir;
  const auto mask = column_mask("0110");
  const Evaluator ev(seed_echo_spec(1, 2));
  std::vector<EvaluationRecord> results(6);
  {
    std::vector<std::jthread> threads;
    for (std::size_t i = 0; i < results.size(); ++i)
      threads.emplace_back([&, i] { results[i] = cached_evaluate(dir.path(), ev, "seq", mask); });
  }
  for (const auto& r : results) CHECK(r == results.front());
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
  CHECK(files == 1);
  EvaluationStats stats;
  cached_evaluate(dir.path(), ev, "seq", mask, &stats);
  CHECK(stats.cache_hits == 1);
}

TEST_CASE("record JSON round trip") {
  const Evaluator ev(seed_echo_spec(2, 3));
  const auto record = ev.evaluate("seq", column_mask("01"));
  CHECK(record_from_json(to_json(record)) == record);
  CHECK(error_kind([] { record_from_json(nlohmann::json{{"x", 1}}); }) == ErrorKind::parse);
}

TEST_CASE("evaluate_batch keeps order and is deterministic") {
  TempDir dir;
  sim::SceneScript scene = sim::generate_scene(sim::SceneProfile::mixed, 60, 1, 4);
  scene.noise_sigma = 0.001;
  sim::write_scene(dir / "scene.json", scene);
  EvaluatorSpec spec;
  spec.scene_file = dir / "scene.json";
  spec.repetitions = 3;
  const Evaluator ev(spec);

  std::vector<TemporalMask> masks;
  for (std::size_t i = 0; i < 24; ++i) {
    std::string bits(60, '0');
    for (std::size_t t = i; t < 60; t += 7) bits[t] = '1';
    masks.push_back(column_mask(bits));
  }
  const auto serial = evaluate_batch({}, ev, "seq", masks, 1);
  const auto parallel = evaluate_batch(dir / "cache", ev, "seq", masks, 8);
  REQUIRE(serial.size() == masks.size());
  REQUIRE(parallel.size() == masks.size());
  for (std::size_t i = 0; i < masks.size(); ++i) {
    REQUIRE(serial[i].record.has_value());
    REQUIRE(parallel[i].record.has_value());
    CHECK(*serial[i].record == *parallel[i].record);
    CHECK(*serial[i].record == ev.evaluate("seq", masks[i]));
  }
  CHECK(error_kind([&] { evaluate_batch({}, ev, "seq", masks, 0); }) == ErrorKind::parameter);
}

TEST_CASE("evaluate_batch records per-mask failures") {
  TempDir dir;
  sim::write_scene(dir / "scene.json", static_scene(4));
  EvaluatorSpec spec;
  spec.scene_file = dir / "scene.json";
  spec.repetitions = 1;
  const Evaluator ev(spec);
  const std::vector<TemporalMask> masks{column_mask("0000"), column_mask("000")};
  const auto out = evaluate_batch({}, ev, "seq", masks, 2);
  CHECK(out[0].record.has_value());
  CHECK_FALSE(out[1].record.has_value());
  CHECK(out[1].error_kind == ErrorKind::parameter);
  CHECK_FALSE(out[1].error.empty());
  const std::vector<TemporalMask> bad{column_mask("000"), column_mask("00")};
  CHECK_THROWS_AS(evaluate_batch({}, ev, "seq", bad, 2), Error);
}

TEST_CASE("all-static scene scores 1 for any trackable mask") {
  TempDir dir;
  sim::write_scene(dir / "scene.json", static_scene(30));
  EvaluatorSpec spec;
  spec.scene_file = dir / "scene.json";
  spec.repetitions = 3;
  const Evaluator ev(spec);
  for (const char* bits : {"000000000000000000000000000000", "111111111111111111111111111111",
                           "000000000011111111110000000000"}) {
    const auto r = ev.evaluate("static", column_mask(bits)).median;
    CHECK(r.usm == 1.0);
    CHECK(r.ate_rmse == 0.0);
    CHECK(r.tracking_rate == 1.0);
  }
  CHECK(ev.launches() == 0);
}
