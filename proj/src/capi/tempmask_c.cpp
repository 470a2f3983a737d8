#include "tempmask/tempmask.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "json.hpp"
#include "tempmask/aggregation.hpp"
#include "tempmask/annotate.hpp"
#include "tempmask/error.hpp"
#include "tempmask/mask_space.hpp"
#include "tempmask/sim_slam.hpp"
#include "tempmask/trajectory_metrics.hpp"

struct tm_mask_space {
  tempmask::PathCountTable table;
};

struct tm_trajectory {
  tempmask::Trajectory trajectory;
};

namespace {

using tempmask::Error;
using tempmask::ErrorKind;

thread_local std::string last_error;

tm_status to_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parameter: return TM_ERR_PARAMETER;
    case ErrorKind::parse: return TM_ERR_PARSE;
    case ErrorKind::validation: return TM_ERR_VALIDATION;
    case ErrorKind::sampling: return TM_ERR_SAMPLING;
    case ErrorKind::association: return TM_ERR_ASSOCIATION;
    case ErrorKind::evaluation: return TM_ERR_EVALUATION;
    case ErrorKind::protocol: return TM_ERR_PROTOCOL;
    case ErrorKind::timeout: return TM_ERR_TIMEOUT;
    case ErrorKind::io: return TM_ERR_IO;
    case ErrorKind::config: return TM_ERR_CONFIG;
    case ErrorKind::internal: return TM_ERR_INTERNAL;
  }
  return TM_ERR_INTERNAL;
}

template <typename F>
tm_status guarded(F&& body) noexcept {
  try {
    last_error.clear();
    body();
    return TM_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return to_status(e.kind());
  } catch (const nlohmann::json::exception& e) {
    last_error = std::string("JSON error: ") + e.what();
    return TM_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return TM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return TM_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return TM_ERR_INTERNAL;
  }
}

void require_out(const void* ptr, const char* name) {
  tempmask::require(ptr != nullptr, ErrorKind::parameter, std::string(name) + " must not be NULL");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::string> string_list(const char* const* items, std::size_t count, const char* what) {
  tempmask::require(items != nullptr || count == 0, ErrorKind::parameter,
                    std::string(what) + " must not be NULL");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) {
    tempmask::require(items[i] != nullptr, ErrorKind::parameter,
                      std::string(what) + " entries must not be NULL");
    out.emplace_back(items[i]);
  }
  return out;
}

nlohmann::json parse_json(const char* text, const char* what) {
  require_out(text, what);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    tempmask::fail(ErrorKind::parse, std::string(what) + " is not valid JSON: " + e.what());
  }
}

nlohmann::json columns_json(const tempmask::TemporalMask& mask) {
  nlohmann::json out = nlohmann::json::object();
  for (std::size_t c = 0; c < mask.classes(); ++c)
    out[mask.class_names()[c]] = tempmask::format_bits(mask.column(c));
  return out;
}

tempmask::TemporalMask mask_from_request(const nlohmann::json& sample,
                                         const std::vector<std::string>& names) {
  if (sample.contains("mask_csv")) {
    auto mask = tempmask::read_mask_csv(sample.at("mask_csv").get<std::string>());
    tempmask::require(mask.class_names() == names, ErrorKind::parameter,
                      "mask CSV classes do not match class_names");
    return mask;
  }
  const auto& columns = sample.at("columns");
  std::vector<tempmask::BitColumn> bits;
  for (const auto& name : names) {
    tempmask::require(columns.contains(name), ErrorKind::parse,
                      "sample is missing the column for class '" + name + "'");
    bits.push_back(tempmask::parse_bits(columns.at(name).get<std::string>()));
  }
  for (const auto& b : bits)
    tempmask::require(b.size() == bits.front().size(), ErrorKind::parameter,
                      "sample columns must have equal lengths");
  return tempmask::TemporalMask::from_columns(bits, names);
}

}  // namespace

extern "C" {

const char* tm_version(void) { return tempmask::kToolVersion; }

const char* tm_status_string(tm_status status) {
  switch (status) {
    case TM_OK: return "ok";
    case TM_ERR_PARAMETER: return "parameter error";
    case TM_ERR_PARSE: return "parse error";
    case TM_ERR_VALIDATION: return "validation error";
    case TM_ERR_SAMPLING: return "sampling error";
    case TM_ERR_ASSOCIATION: return "association error";
    case TM_ERR_EVALUATION: return "evaluation error";
    case TM_ERR_PROTOCOL: return "protocol error";
    case TM_ERR_TIMEOUT: return "timeout";
    case TM_ERR_IO: return "I/O error";
    case TM_ERR_CONFIG: return "configuration error";
    case TM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* tm_last_error(void) { return last_error.c_str(); }

void tm_free_string(char* str) { std::free(str); }

tm_status tm_count_masks(int64_t l, int64_t k0, int64_t k1, char** out_decimal) {
  return guarded([&] {
    require_out(out_decimal, "out_decimal");
    *out_decimal = copy_string(tempmask::count_masks({l, k0, k1}).str());
  });
}

tm_status tm_mask_space_create(int64_t l, int64_t k0, int64_t k1, tm_mask_space** out) {
  return guarded([&] {
    require_out(out, "out");
    *out = new tm_mask_space{tempmask::PathCountTable({l, k0, k1})};
  });
}

void tm_mask_space_destroy(tm_mask_space* space) { delete space; }

tm_status tm_mask_space_total(const tm_mask_space* space, char** out_decimal) {
  return guarded([&] {
    require_out(space, "space");
    require_out(out_decimal, "out_decimal");
    *out_decimal = copy_string(space->table.total().str());
  });
}

tm_status tm_mask_space_completions(const tm_mask_space* space, int64_t position, int last_symbol,
                                    int64_t run_length, char** out_decimal) {
  return guarded([&] {
    require_out(space, "space");
    require_out(out_decimal, "out_decimal");
    *out_decimal =
        copy_string(space->table.completions(position, last_symbol, run_length).str());
  });
}

tm_status tm_mask_space_sample(const tm_mask_space* space, uint64_t seed, uint8_t* out_bits,
                               size_t length) {
  return guarded([&] {
    require_out(space, "space");
    require_out(out_bits, "out_bits");
    tempmask::require(static_cast<int64_t>(length) == space->table.params().length,
                      ErrorKind::parameter, "output length must equal l");
    const auto bits = tempmask::sample_mask(space->table, seed);
    std::memcpy(out_bits, bits.data(), bits.size());
  });
}

tm_status tm_mask_space_sample_multiclass(const tm_mask_space* space,
                                          const char* const* class_names, size_t class_count,
                                          size_t q, uint64_t seed, char** out_json) {
  return guarded([&] {
    require_out(space, "space");
    require_out(out_json, "out_json");
    const auto names = string_list(class_names, class_count, "class_names");
    const auto masks = tempmask::sample_multiclass(space->table, names, q, seed);
    nlohmann::json doc{{"class_names", names}, {"masks", nlohmann::json::array()}};
    for (const auto& m : masks) doc["masks"].push_back({{"columns", columns_json(m)}});
    *out_json = copy_string(doc.dump());
  });
}

tm_status tm_is_member(const uint8_t* bits, size_t length, int64_t k0, int64_t k1,
                       int* out_member) {
  return guarded([&] {
    require_out(bits, "bits");
    require_out(out_member, "out_member");
    const tempmask::MaskSpaceParams params{static_cast<int64_t>(length), k0, k1};
    params.validate();
    *out_member = tempmask::is_member({bits, length}, params) ? 1 : 0;
  });
}

tm_status tm_mask_csv_from_columns(const char* const* columns, const char* const* class_names,
                                   size_t class_count, char** out_csv) {
  return guarded([&] {
    require_out(out_csv, "out_csv");
    const auto texts = string_list(columns, class_count, "columns");
    std::vector<tempmask::BitColumn> bits;
    for (const auto& t : texts) bits.push_back(tempmask::parse_bits(t));
    for (const auto& b : bits)
      tempmask::require(b.size() == bits.front().size(), ErrorKind::parameter,
                        "columns must have equal lengths");
    const auto mask = tempmask::TemporalMask::from_columns(
        bits, string_list(class_names, class_count, "class_names"));
    *out_csv = copy_string(tempmask::to_csv(mask));
  });
}

tm_status tm_usm(double ate_rmse, double tracking_rate, double lambda, double* out_usm) {
  return guarded([&] {
    require_out(out_usm, "out_usm");
    *out_usm = tempmask::usm(ate_rmse, tracking_rate, {lambda});
  });
}

tm_status tm_default_lambda(double avg_dataset_ate, double* out_lambda) {
  return guarded([&] {
    require_out(out_lambda, "out_lambda");
    *out_lambda = tempmask::default_lambda(avg_dataset_ate).lambda;
  });
}

tm_status tm_tracking_rate(uint64_t tracked_frames, uint64_t total_frames, double* out_rate) {
  return guarded([&] {
    require_out(out_rate, "out_rate");
    *out_rate = tempmask::tracking_rate(tracked_frames, total_frames);
  });
}

tm_status tm_trajectory_parse(const char* text, tm_trajectory** out) {
  return guarded([&] {
    require_out(text, "text");
    require_out(out, "out");
    *out = new tm_trajectory{tempmask::parse_trajectory(text)};
  });
}

tm_status tm_trajectory_load(const char* path, tm_trajectory** out) {
  return guarded([&] {
    require_out(path, "path");
    require_out(out, "out");
    *out = new tm_trajectory{tempmask::read_trajectory(path)};
  });
}

size_t tm_trajectory_size(const tm_trajectory* trajectory) {
  return trajectory ? trajectory->trajectory.size() : 0;
}

void tm_trajectory_destroy(tm_trajectory* trajectory) { delete trajectory; }

tm_status tm_ate_rmse(const tm_trajectory* reference, const tm_trajectory* estimate,
                      tm_alignment alignment, double max_time_diff, double* out_rmse,
                      size_t* out_pairs) {
  return guarded([&] {
    require_out(reference, "reference");
    require_out(estimate, "estimate");
    require_out(out_rmse, "out_rmse");
    tempmask::Alignment align;
    switch (alignment) {
      case TM_ALIGN_NONE: align = tempmask::Alignment::none; break;
      case TM_ALIGN_RIGID: align = tempmask::Alignment::rigid; break;
      case TM_ALIGN_RIGID_WITH_SCALE: align = tempmask::Alignment::rigid_with_scale; break;
      default: tempmask::fail(ErrorKind::parameter, "unknown alignment mode");
    }
    *out_rmse = tempmask::ate_rmse(reference->trajectory, estimate->trajectory, align,
                                   max_time_diff);
    if (out_pairs)
      *out_pairs =
          tempmask::associate(reference->trajectory, estimate->trajectory, max_time_diff).size();
  });
}

tm_status tm_aggregate_json(const char* request_json, char** out_json) {
  return guarded([&] {
    require_out(out_json, "out_json");
    const auto request = parse_json(request_json, "aggregation request");
    std::vector<std::string> names{"object"};
    if (request.contains("class_names"))
      names = request.at("class_names").get<std::vector<std::string>>();

    tempmask::AggregationParams params;
    if (request.contains("sigma_a")) params.sigma_a = request.at("sigma_a").get<double>();
    if (request.contains("sigma_r")) params.sigma_r = request.at("sigma_r").get<double>();

    std::vector<tempmask::ScoredSample> samples;
    for (const auto& s : request.at("samples"))
      samples.push_back({mask_from_request(s, names), s.at("score").get<double>()});

    const auto raw = tempmask::aggregate(samples, params);
    const auto normalized = tempmask::normalize(raw);
    nlohmann::json doc{{"raw", nlohmann::json::object()},
                       {"normalized", nlohmann::json::object()},
                       {"degenerate", normalized.degenerate}};
    for (std::size_t c = 0; c < raw.classes(); ++c) {
      std::vector<double> raw_col, norm_col;
      for (std::size_t t = 0; t < raw.frames; ++t) {
        raw_col.push_back(raw.at(t, c));
        norm_col.push_back(normalized.at(t, c));
      }
      doc["raw"][names[c]] = raw_col;
      doc["normalized"][names[c]] = norm_col;
    }
    if (request.contains("threshold"))
      doc["mask"] = columns_json(tempmask::binarize(normalized, request.at("threshold").get<double>()));
    *out_json = copy_string(doc.dump());
  });
}

tm_status tm_generate_scene_json(const char* profile, size_t length, size_t classes,
                                 uint64_t seed, char** out_json) {
  return guarded([&] {
    require_out(profile, "profile");
    require_out(out_json, "out_json");
    const auto scene = tempmask::sim::generate_scene(tempmask::sim::parse_profile(profile),
                                                     length, classes, seed);
    *out_json = copy_string(tempmask::sim::scene_to_json(scene).dump(1) + "\n");
  });
}

tm_status tm_simulate_files(const char* scene_path, const char* mask_path, const char* out_path,
                            uint64_t seed, double lambda, double* out_ate_rmse,
                            double* out_tracking_rate, double* out_usm) {
  return guarded([&] {
    require_out(scene_path, "scene_path");
    require_out(mask_path, "mask_path");
    require_out(out_path, "out_path");
    const auto result = tempmask::sim::simulate_files(scene_path, mask_path, out_path, seed, {lambda});
    if (out_ate_rmse) *out_ate_rmse = result.ate_rmse;
    if (out_tracking_rate) *out_tracking_rate = result.tracking_rate;
    if (out_usm) *out_usm = result.usm;
  });
}

tm_status tm_optimal_mask_csv(const char* scene_path, char** out_csv) {
  return guarded([&] {
    require_out(scene_path, "scene_path");
    require_out(out_csv, "out_csv");
    const auto scene = tempmask::sim::read_scene(scene_path);
    *out_csv = copy_string(tempmask::to_csv(tempmask::sim::optimal_mask(scene)));
  });
}

tm_status tm_config_normalize(const char* config_json, char** out_json) {
  return guarded([&] {
    require_out(out_json, "out_json");
    const auto config = tempmask::config_from_json(parse_json(config_json, "config"));
    config.validate();
    *out_json = copy_string(tempmask::to_json(config).dump(2) + "\n");
  });
}

tm_status tm_annotate(const char* config_json, char** out_report_json) {
  return guarded([&] {
    const auto config = tempmask::config_from_json(parse_json(config_json, "config"));
    const auto report = tempmask::annotate(config);
    if (out_report_json) *out_report_json = copy_string(tempmask::to_json(report).dump(2) + "\n");
  });
}

}  // extern "C"
