#include "tempmask/result_file.hpp"

#include <cmath>

#include "json.hpp"
#include "tempmask/error.hpp"

namespace tempmask {

namespace {

double required_number(const nlohmann::json& doc, const char* key) {
  auto it = doc.find(key);
  require(it != doc.end(), ErrorKind::protocol,
          std::string("result file is missing required key '") + key + "'");
  require(it->is_number(), ErrorKind::protocol,
          std::string("result key '") + key + "' must be a number");
  const double value = it->get<double>();
  require(std::isfinite(value), ErrorKind::protocol,
          std::string("result key '") + key + "' must be finite");
  return value;
}

std::optional<std::uint64_t> optional_count(const nlohmann::json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) return std::nullopt;
  require(it->is_number_unsigned() || (it->is_number_integer() && it->get<std::int64_t>() >= 0),
          ErrorKind::protocol,
          std::string("result key '") + key + "' must be a non-negative integer");
  return it->get<std::uint64_t>();
}

}  // namespace

ResultFile parse_result_file(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::protocol, std::string("result file is not valid JSON: ") + e.what());
  }
  require(doc.is_object(), ErrorKind::protocol, "result file must hold a JSON object");

  ResultFile out;
  out.ate_rmse = required_number(doc, "ate_rmse");
  out.tracking_rate = required_number(doc, "tracking_rate");
  out.tracked_frames = optional_count(doc, "tracked_frames");
  out.total_frames = optional_count(doc, "total_frames");
  require(out.ate_rmse >= 0.0, ErrorKind::protocol, "ate_rmse must be non-negative");
  require(out.tracking_rate >= 0.0 && out.tracking_rate <= 1.0, ErrorKind::protocol,
          "tracking_rate must lie in [0, 1]");
  if (out.tracked_frames && out.total_frames) {
    require(*out.total_frames > 0 && *out.tracked_frames <= *out.total_frames,
            ErrorKind::protocol, "tracked_frames/total_frames are inconsistent");
    const double rate =
        static_cast<double>(*out.tracked_frames) / static_cast<double>(*out.total_frames);
    require(std::abs(rate - out.tracking_rate) <= 1e-9, ErrorKind::protocol,
            "tracking_rate disagrees with tracked_frames/total_frames");
  }
  return out;
}

std::string format_result_file(const ResultFile& result) {
  nlohmann::json doc;
  doc["ate_rmse"] = result.ate_rmse;
  doc["tracking_rate"] = result.tracking_rate;
  if (result.tracked_frames) doc["tracked_frames"] = *result.tracked_frames;
  if (result.total_frames) doc["total_frames"] = *result.total_frames;
  return doc.dump(2) + "\n";
}

}  // namespace tempmask
