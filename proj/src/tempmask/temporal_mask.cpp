#include "tempmask/temporal_mask.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "tempmask/digest.hpp"
#include "tempmask/error.hpp"
#include "tempmask/io.hpp"

namespace tempmask {

namespace {

void validate_class_names(const std::vector<std::string>& names) {
  require(!names.empty(), ErrorKind::parameter, "a temporal mask needs at least one class");
  std::set<std::string> seen;
  for (const auto& name : names) {
    require(!name.empty(), ErrorKind::parameter, "class names must be non-empty");
    require(name.find_first_of(",\n\r") == std::string::npos, ErrorKind::parameter,
            "class name '" + name + "' contains a CSV delimiter");
    require(seen.insert(name).second, ErrorKind::parameter,
            "duplicate class name '" + name + "'");
  }
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

TemporalMask::TemporalMask(std::size_t frames, std::vector<std::string> class_names)
    : frames_(frames), class_names_(std::move(class_names)) {
  require(frames_ >= 1, ErrorKind::parameter, "a temporal mask needs at least one frame");
  validate_class_names(class_names_);
  bits_.assign(frames_ * class_names_.size(), 0);
}

TemporalMask TemporalMask::filled(std::size_t frames, std::vector<std::string> class_names,
                                  std::uint8_t value) {
  require(value <= 1, ErrorKind::parameter, "mask entries must be 0 or 1");
  TemporalMask mask(frames, std::move(class_names));
  std::fill(mask.bits_.begin(), mask.bits_.end(), value);
  return mask;
}

TemporalMask TemporalMask::from_columns(const std::vector<BitColumn>& columns,
                                        std::vector<std::string> class_names) {
  require(columns.size() == class_names.size(), ErrorKind::parameter,
          "column count does not match class count");
  require(!columns.empty(), ErrorKind::parameter, "a temporal mask needs at least one class");
  TemporalMask mask(columns.front().size(), std::move(class_names));
  for (std::size_t c = 0; c < columns.size(); ++c) mask.set_column(c, columns[c]);
  return mask;
}

void TemporalMask::set(std::size_t frame, std::size_t cls, std::uint8_t value) {
  require(value <= 1, ErrorKind::parameter, "mask entries must be 0 or 1");
  require(frame < frames_ && cls < classes(), ErrorKind::parameter, "mask index out of range");
  bits_[frame * classes() + cls] = value;
}

BitColumn TemporalMask::column(std::size_t cls) const {
  require(cls < classes(), ErrorKind::parameter, "class index out of range");
  BitColumn out(frames_);
  for (std::size_t t = 0; t < frames_; ++t) out[t] = at(t, cls);
  return out;
}

void TemporalMask::set_column(std::size_t cls, std::span<const std::uint8_t> values) {
  require(cls < classes(), ErrorKind::parameter, "class index out of range");
  require(values.size() == frames_, ErrorKind::parameter,
          "column length " + std::to_string(values.size()) + " does not match frame count " +
              std::to_string(frames_));
  for (std::size_t t = 0; t < frames_; ++t) set(t, cls, values[t]);
}

std::size_t TemporalMask::masked_count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

BitColumn parse_bits(std::string_view text) {
  BitColumn bits;
  bits.reserve(text.size());
  for (char ch : text) {
    if (ch != '0' && ch != '1')
      fail(ErrorKind::parse, "invalid mask character '" + std::string(1, ch) + "'");
    bits.push_back(static_cast<std::uint8_t>(ch - '0'));
  }
  return bits;
}

std::string format_bits(std::span<const std::uint8_t> bits) {
  std::string out;
  out.reserve(bits.size());
  for (auto b : bits) out.push_back(b ? '1' : '0');
  return out;
}

std::string to_csv(const TemporalMask& mask) {
  std::string out = "frame";
  for (const auto& name : mask.class_names()) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (std::size_t t = 0; t < mask.frames(); ++t) {
    out += std::to_string(t);
    for (std::size_t c = 0; c < mask.classes(); ++c) {
      out += ',';
      out += mask.at(t, c) ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

TemporalMask parse_mask_csv(std::string_view text) {
  std::vector<std::string_view> lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  require(!lines.empty(), ErrorKind::parse, "mask CSV is empty");

  auto header = split(lines.front(), ',');
  require(header.size() >= 2 && header.front() == "frame", ErrorKind::parse,
          "mask CSV header must be 'frame,<class>,...'");
  std::vector<std::string> names(header.begin() + 1, header.end());
  const std::size_t frames = lines.size() - 1;
  require(frames >= 1, ErrorKind::parse, "mask CSV has no frame rows");

  TemporalMask mask(frames, names);
  for (std::size_t row = 0; row < frames; ++row) {
    const std::size_t line_no = row + 2;
    auto fields = split(lines[row + 1], ',');
    require(fields.size() == names.size() + 1, ErrorKind::parse,
            "mask CSV line " + std::to_string(line_no) + ": expected " +
                std::to_string(names.size() + 1) + " fields");
    std::size_t index = 0;
    auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), index);
    require(ec == std::errc{} && ptr == fields[0].data() + fields[0].size() && index == row,
            ErrorKind::parse,
            "mask CSV line " + std::to_string(line_no) + ": frame index must be " +
                std::to_string(row));
    for (std::size_t c = 0; c < names.size(); ++c) {
      const auto f = fields[c + 1];
      require(f == "0" || f == "1", ErrorKind::parse,
              "mask CSV line " + std::to_string(line_no) + ": entries must be 0 or 1");
      mask.set(row, c, f == "1" ? 1 : 0);
    }
  }
  return mask;
}

TemporalMask read_mask_csv(const std::filesystem::path& path) {
  return parse_mask_csv(read_text_file(path));
}

void write_mask_csv(const std::filesystem::path& path, const TemporalMask& mask) {
  write_file_atomic(path, to_csv(mask));
}

std::string mask_digest(const TemporalMask& mask) { return sha256_hex(to_csv(mask)); }

}  // namespace tempmask
