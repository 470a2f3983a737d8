// tempmask command line front end. Every subcommand wraps one library call.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tempmask/tempmask.h"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

struct DomainError {
  std::string message;
};

void check(tm_status status) {
  if (status != TM_OK) {
    std::string msg = tm_status_string(status);
    const std::string detail = tm_last_error();
    if (!detail.empty()) msg += ": " + detail;
    throw DomainError{msg};
  }
}

struct LibString {
  char* ptr = nullptr;
  ~LibString() { tm_free_string(ptr); }
  std::string str() const { return ptr ? ptr : ""; }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError{"cannot open " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw DomainError{"cannot write " + path};
}

std::vector<std::string> csv_class_names(const std::string& path) {
  const std::string text = read_file(path);
  std::string header = text.substr(0, text.find('\n'));
  if (!header.empty() && header.back() == '\r') header.pop_back();
  std::vector<std::string> names;
  std::stringstream ss(header);
  std::string field;
  std::getline(ss, field, ',');
  while (std::getline(ss, field, ',')) names.push_back(field);
  return names;
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::uint64_t env_seed() {
  const char* s = std::getenv("TEMPMASK_SEED");
  if (!s || !*s) return 0;
  char* end = nullptr;
  const auto v = std::strtoull(s, &end, 10);
  if (*end != '\0') throw DomainError{"TEMPMASK_SEED is not an unsigned integer"};
  return v;
}

// ---- count ----

struct CountArgs {
  std::int64_t l = 0, k0 = 0, k1 = 0;
  bool json_out = false;
};

int run_count(const CountArgs& a) {
  LibString n;
  check(tm_count_masks(a.l, a.k0, a.k1, &n.ptr));
  if (a.json_out)
    std::cout << json{{"l", a.l}, {"k0", a.k0}, {"k1", a.k1}, {"count", n.str()}}.dump() << "\n";
  else
    std::cout << n.str() << "\n";
  return kExitOk;
}

// ---- sample ----

struct SampleArgs {
  std::int64_t l = 0, k0 = 0, k1 = 0;
  std::size_t q = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> classes{"object"};
  std::string out_dir;
  bool json_out = false;
};

int run_sample(const SampleArgs& a) {
  tm_mask_space* raw = nullptr;
  check(tm_mask_space_create(a.l, a.k0, a.k1, &raw));
  std::unique_ptr<tm_mask_space, decltype(&tm_mask_space_destroy)> space(raw,
                                                                         tm_mask_space_destroy);
  std::vector<const char*> names;
  for (const auto& c : a.classes) names.push_back(c.c_str());
  LibString out;
  check(tm_mask_space_sample_multiclass(space.get(), names.data(), names.size(), a.q, a.seed,
                                        &out.ptr));
  const json doc = json::parse(out.str());

  if (!a.out_dir.empty()) {
    std::size_t index = 0;
    for (const auto& m : doc["masks"]) {
      std::vector<std::string> cols;
      for (const auto& c : a.classes) cols.push_back(m["columns"][c].get<std::string>());
      std::vector<const char*> col_ptrs;
      for (const auto& c : cols) col_ptrs.push_back(c.c_str());
      LibString csv;
      check(tm_mask_csv_from_columns(col_ptrs.data(), names.data(), names.size(), &csv.ptr));
      char name[32];
      std::snprintf(name, sizeof name, "/mask_%04zu.csv", index++);
      write_file(a.out_dir + name, csv.str());
    }
  }
  if (a.json_out) {
    std::cout << doc.dump() << "\n";
  } else {
    for (const auto& m : doc["masks"]) {
      std::string line;
      for (const auto& c : a.classes) {
        if (!line.empty()) line += ' ';
        line += m["columns"][c].get<std::string>();
      }
      std::cout << line << "\n";
    }
  }
  return kExitOk;
}

// ---- aggregate ----

struct AggregateArgs {
  std::string request;
  std::vector<std::string> samples;
  double sigma_a = 0.01, sigma_r = 0.05;
  double threshold = -1.0;
  std::string out;
  bool json_out = false;
};

int run_aggregate(const AggregateArgs& a) {
  json request;
  if (!a.request.empty()) {
    try {
      request = json::parse(read_file(a.request));
    } catch (const json::exception& e) {
      throw DomainError{a.request + ": invalid JSON: " + e.what()};
    }
  } else {
    request["samples"] = json::array();
    for (const auto& s : a.samples) {
      const auto colon = s.rfind(':');
      if (colon == std::string::npos) throw DomainError{"--sample expects MASK.csv:SCORE"};
      const std::string path = s.substr(0, colon);
      double score = 0.0;
      try {
        std::size_t used = 0;
        score = std::stod(s.substr(colon + 1), &used);
        if (used != s.size() - colon - 1) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw DomainError{"bad score in --sample " + s};
      }
      if (!request.contains("class_names")) request["class_names"] = csv_class_names(path);
      request["samples"].push_back({{"mask_csv", path}, {"score", score}});
    }
  }
  if (!request.contains("sigma_a")) request["sigma_a"] = a.sigma_a;
  if (!request.contains("sigma_r")) request["sigma_r"] = a.sigma_r;
  if (a.threshold >= 0.0) request["threshold"] = a.threshold;

  LibString out;
  check(tm_aggregate_json(request.dump().c_str(), &out.ptr));
  const json doc = json::parse(out.str());

  if (!a.out.empty()) {
    if (!doc.contains("mask")) throw DomainError{"--out requires --threshold"};
    std::vector<std::string> names, cols;
    for (const auto& [name, bits] : doc["mask"].items()) {
      names.push_back(name);
      cols.push_back(bits.get<std::string>());
    }
    if (request.contains("class_names")) {
      names = request["class_names"].get<std::vector<std::string>>();
      cols.clear();
      for (const auto& n : names) cols.push_back(doc["mask"][n].get<std::string>());
    }
    std::vector<const char*> np, cp;
    for (const auto& n : names) np.push_back(n.c_str());
    for (const auto& c : cols) cp.push_back(c.c_str());
    LibString csv;
    check(tm_mask_csv_from_columns(cp.data(), np.data(), np.size(), &csv.ptr));
    write_file(a.out, csv.str());
  }

  if (a.json_out) {
    std::cout << doc.dump() << "\n";
    return kExitOk;
  }
  for (const auto& [name, values] : doc["normalized"].items()) {
    std::cout << name << ":";
    for (const auto& v : values) std::cout << " " << fixed6(v.get<double>());
    std::cout << "\n";
  }
  if (doc.value("degenerate", false)) std::cout << "degenerate: true\n";
  if (doc.contains("mask"))
    for (const auto& [name, bits] : doc["mask"].items())
      std::cout << name << " mask: " << bits.get<std::string>() << "\n";
  return kExitOk;
}

// ---- ate ----

struct AteArgs {
  std::string ref, est, align = "rigid";
  double max_dt = 0.02;
  bool json_out = false;
};

int run_ate(const AteArgs& a) {
  using Traj = std::unique_ptr<tm_trajectory, decltype(&tm_trajectory_destroy)>;
  tm_trajectory* r = nullptr;
  check(tm_trajectory_load(a.ref.c_str(), &r));
  Traj ref(r, tm_trajectory_destroy);
  tm_trajectory* e = nullptr;
  check(tm_trajectory_load(a.est.c_str(), &e));
  Traj est(e, tm_trajectory_destroy);

  tm_alignment mode = TM_ALIGN_RIGID;
  if (a.align == "none") mode = TM_ALIGN_NONE;
  else if (a.align == "rigid_with_scale") mode = TM_ALIGN_RIGID_WITH_SCALE;

  double rmse = 0.0;
  size_t pairs = 0;
  check(tm_ate_rmse(ref.get(), est.get(), mode, a.max_dt, &rmse, &pairs));
  if (a.json_out)
    std::cout << json{{"ate_rmse", rmse}, {"pairs", pairs}, {"align", a.align}}.dump() << "\n";
  else
    std::cout << fixed6(rmse) << "\n";
  return kExitOk;
}

// ---- simulate ----

struct SimulateArgs {
  std::string scene, mask, out;
  std::uint64_t seed = 0;
  bool seed_given = false;
  double lambda = 10.0;
  bool json_out = false;
};

int run_simulate(const SimulateArgs& a) {
  const std::uint64_t seed = a.seed_given ? a.seed : env_seed();
  double ate = 0.0, tr = 0.0, score = 0.0;
  check(tm_simulate_files(a.scene.c_str(), a.mask.c_str(), a.out.c_str(), seed, a.lambda, &ate,
                          &tr, &score));
  if (a.json_out)
    std::cout << json{{"ate_rmse", ate}, {"tracking_rate", tr}, {"usm", score}}.dump() << "\n";
  else
    std::cout << "ate_rmse " << fixed6(ate) << " tracking_rate " << fixed6(tr) << " usm "
              << fixed6(score) << "\n";
  return kExitOk;
}

// ---- gen-scene ----

struct GenSceneArgs {
  std::string profile, out, optimal_out;
  std::size_t length = 0, classes = 1;
  std::uint64_t seed = 0;
  bool json_out = false;
};

int run_gen_scene(const GenSceneArgs& a) {
  LibString scene;
  check(tm_generate_scene_json(a.profile.c_str(), a.length, a.classes, a.seed, &scene.ptr));
  if (a.out.empty()) {
    std::cout << scene.str();
  } else {
    write_file(a.out, scene.str());
    if (a.json_out)
      std::cout << json{{"scene", a.out}, {"profile", a.profile}, {"length", a.length},
                        {"classes", a.classes}, {"seed", a.seed}}.dump()
                << "\n";
  }
  if (!a.optimal_out.empty()) {
    if (a.out.empty()) throw DomainError{"--optimal-out requires --out"};
    LibString csv;
    check(tm_optimal_mask_csv(a.out.c_str(), &csv.ptr));
    write_file(a.optimal_out, csv.str());
  }
  return kExitOk;
}

// ---- annotate ----

struct AnnotateArgs {
  std::string config;
  std::string sequence_id, scene, command, cache_dir, mask_out, report_out, evaluator_kind;
  std::vector<std::string> classes;
  std::int64_t q = -1, k0 = -1, k1 = -1, repetitions = -1, parallelism = -1;
  std::int64_t seed = -1;
  double lambda = -1.0;
  bool print_config = false;
  bool json_out = false;
};

int run_annotate(const AnnotateArgs& a) {
  json cfg = json::object();
  if (!a.config.empty()) {
    try {
      cfg = json::parse(read_file(a.config));
    } catch (const json::exception& e) {
      throw DomainError{a.config + ": invalid JSON: " + e.what()};
    }
    if (!cfg.is_object()) throw DomainError{a.config + ": config must be a JSON object"};
  }
  if (!a.sequence_id.empty()) cfg["sequence_id"] = a.sequence_id;
  if (!a.classes.empty()) cfg["class_names"] = a.classes;
  if (a.q >= 0) cfg["sampling"]["q"] = a.q;
  if (a.k0 >= 0) cfg["sampling"]["k0"] = a.k0;
  if (a.k1 >= 0) cfg["sampling"]["k1"] = a.k1;
  if (a.seed >= 0) cfg["sampling"]["seed"] = a.seed;
  if (a.lambda >= 0.0) cfg["usm"]["lambda"] = a.lambda;
  if (!a.evaluator_kind.empty()) cfg["evaluator"]["kind"] = a.evaluator_kind;
  if (!a.scene.empty()) cfg["evaluator"]["scene_file"] = a.scene;
  if (!a.command.empty()) cfg["evaluator"]["command_template"] = a.command;
  if (a.repetitions >= 0) cfg["evaluator"]["repetitions"] = a.repetitions;
  if (a.parallelism >= 0) cfg["parallelism"] = a.parallelism;
  if (!a.cache_dir.empty()) cfg["cache_dir"] = a.cache_dir;
  if (!a.mask_out.empty()) cfg["output"]["mask_csv"] = a.mask_out;
  if (!a.report_out.empty()) cfg["output"]["report_json"] = a.report_out;

  if (a.print_config) {
    LibString normalized;
    check(tm_config_normalize(cfg.dump().c_str(), &normalized.ptr));
    std::cout << normalized.str();
    return kExitOk;
  }

  LibString report;
  check(tm_annotate(cfg.dump().c_str(), &report.ptr));
  if (a.json_out) {
    std::cout << report.str();
    return kExitOk;
  }
  const json r = json::parse(report.str());
  for (const auto& [name, bits] : r["final_mask"]["columns"].items())
    std::cout << name << " " << bits.get<std::string>() << "\n";
  const auto& s = r["final_score"];
  std::cout << "usm " << fixed6(s["usm"].get<double>()) << " ate_rmse "
            << fixed6(s["ate_rmse"].get<double>()) << " tracking_rate "
            << fixed6(s["tracking_rate"].get<double>()) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tempmask: temporal mask annotation for SLAM sequences"};
  app.set_version_flag("--version", std::string(tm_version()));
  app.require_subcommand(1);

  CountArgs count;
  auto* c = app.add_subcommand("count", "Number of masks in E(l, k0, k1)");
  c->add_option("--l", count.l, "Sequence length")->required();
  c->add_option("--k0", count.k0, "Minimum 0-run length")->required();
  c->add_option("--k1", count.k1, "Minimum 1-run length")->required();
  c->add_flag("--json", count.json_out, "Machine-readable output");

  SampleArgs sample;
  auto* s = app.add_subcommand("sample", "Draw uniform masks from E(l, k0, k1)");
  s->add_option("--l", sample.l, "Sequence length")->required();
  s->add_option("--k0", sample.k0, "Minimum 0-run length")->required();
  s->add_option("--k1", sample.k1, "Minimum 1-run length")->required();
  s->add_option("--q", sample.q, "Number of masks")->capture_default_str();
  s->add_option("--seed", sample.seed, "Sampling seed")->capture_default_str();
  s->add_option("--classes", sample.classes, "Class names, one column each")
      ->delimiter(',')
      ->capture_default_str();
  s->add_option("--out-dir", sample.out_dir, "Also write mask_NNNN.csv files here")
      ->check(CLI::ExistingDirectory);
  s->add_flag("--json", sample.json_out, "Machine-readable output");

  AggregateArgs agg;
  auto* g = app.add_subcommand("aggregate", "Relevance scores from scored masks");
  auto* req = g->add_option("--request", agg.request, "Aggregation request JSON file")
                  ->check(CLI::ExistingFile);
  auto* smp = g->add_option("--sample", agg.samples, "Scored mask as MASK.csv:SCORE (repeatable)");
  req->excludes(smp);
  g->add_option("--sigma-a", agg.sigma_a, "Absolute equivalence band")->capture_default_str();
  g->add_option("--sigma-r", agg.sigma_r, "Relative equivalence band")->capture_default_str();
  g->add_option("--threshold", agg.threshold, "Binarize the normalized scores at this value")
      ->check(CLI::Range(0.0, 1.0));
  g->add_option("--out", agg.out, "Write the binarized mask CSV here");
  g->add_flag("--json", agg.json_out, "Machine-readable output");
  g->callback([&] {
    if (agg.request.empty() && agg.samples.empty())
      throw CLI::RequiredError("--request or --sample");
  });

  AteArgs ate;
  auto* a = app.add_subcommand("ate", "ATE RMSE between two TUM trajectories");
  a->add_option("--ref", ate.ref, "Reference trajectory")->required();
  a->add_option("--est", ate.est, "Estimated trajectory")->required();
  a->add_option("--align", ate.align, "Alignment mode")
      ->check(CLI::IsMember({"none", "rigid", "rigid_with_scale"}))
      ->capture_default_str();
  a->add_option("--max-dt", ate.max_dt, "Association window in seconds")->capture_default_str();
  a->add_flag("--json", ate.json_out, "Machine-readable output");

  SimulateArgs sim;
  auto* m = app.add_subcommand("simulate", "Run the synthetic SLAM evaluator on one mask");
  m->add_option("--scene", sim.scene, "Scene JSON")->required();
  m->add_option("--mask", sim.mask, "Mask CSV")->required();
  m->add_option("--out", sim.out, "Result JSON to write")->required();
  auto* seed_opt = m->add_option("--seed", sim.seed, "Noise seed (default: $TEMPMASK_SEED or 0)");
  m->add_option("--lambda", sim.lambda, "USM lambda in 1/m")->capture_default_str();
  m->add_flag("--json", sim.json_out, "Machine-readable output");

  GenSceneArgs gen;
  auto* n = app.add_subcommand("gen-scene", "Generate a synthetic scene");
  n->add_option("--profile", gen.profile, "Scene profile")
      ->required()
      ->check(CLI::IsMember({"consensus_inversion", "excessive_masking", "mixed", "static"}));
  n->add_option("--length", gen.length, "Number of frames")->required();
  n->add_option("--classes", gen.classes, "Number of dynamic classes")->capture_default_str();
  n->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  n->add_option("--out", gen.out, "Scene JSON to write (default: stdout)");
  n->add_option("--optimal-out", gen.optimal_out, "Also write the oracle mask CSV");
  n->add_flag("--json", gen.json_out, "Machine-readable summary");

  AnnotateArgs ann;
  auto* t = app.add_subcommand("annotate", "Full annotation pipeline");
  t->add_option("--config", ann.config, "Config JSON (flags override its fields)")
      ->check(CLI::ExistingFile);
  t->add_option("--sequence-id", ann.sequence_id, "Sequence identifier");
  t->add_option("--classes", ann.classes, "Class names, comma separated")->delimiter(',');
  t->add_option("--q", ann.q, "Number of sampled masks")->check(CLI::NonNegativeNumber);
  t->add_option("--k0", ann.k0, "Minimum 0-run length")->check(CLI::NonNegativeNumber);
  t->add_option("--k1", ann.k1, "Minimum 1-run length")->check(CLI::NonNegativeNumber);
  t->add_option("--seed", ann.seed, "Sampling seed")->check(CLI::NonNegativeNumber);
  t->add_option("--lambda", ann.lambda, "USM lambda in 1/m")->check(CLI::NonNegativeNumber);
  t->add_option("--evaluator", ann.evaluator_kind, "Evaluator kind")
      ->check(CLI::IsMember({"in_process_simulator", "subprocess"}));
  t->add_option("--scene", ann.scene, "Scene JSON for the in-process simulator");
  t->add_option("--command", ann.command, "Subprocess command template");
  t->add_option("--repetitions", ann.repetitions, "Evaluator runs per mask")
      ->check(CLI::NonNegativeNumber);
  t->add_option("--parallelism", ann.parallelism, "Concurrent evaluations")
      ->check(CLI::NonNegativeNumber);
  t->add_option("--cache-dir", ann.cache_dir, "Evaluation cache directory");
  t->add_option("--mask-out", ann.mask_out, "Final mask CSV path");
  t->add_option("--report-out", ann.report_out, "Report JSON path");
  t->add_flag("--print-config", ann.print_config, "Print the effective config and exit");
  t->add_flag("--json", ann.json_out, "Print the report JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (c->parsed()) return run_count(count);
    if (s->parsed()) return run_sample(sample);
    if (g->parsed()) return run_aggregate(agg);
    if (a->parsed()) return run_ate(ate);
    if (m->parsed()) {
      sim.seed_given = seed_opt->count() > 0;
      return run_simulate(sim);
    }
    if (n->parsed()) return run_gen_scene(gen);
    if (t->parsed()) return run_annotate(ann);
  } catch (const DomainError& e) {
    std::cerr << "tempmask: " << e.message << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "tempmask: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitUsage;
}
