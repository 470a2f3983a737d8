#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tempmask {

using BitColumn = std::vector<std::uint8_t>;

/// Binary masking decisions, frames x classes. 1 = mask the class in that
/// frame, 0 = keep its features.
class TemporalMask {
 public:
  TemporalMask() = default;

  /// All-zeros mask. Class names must be non-empty and unique.
  TemporalMask(std::size_t frames, std::vector<std::string> class_names);

  static TemporalMask filled(std::size_t frames, std::vector<std::string> class_names,
                             std::uint8_t value);
  static TemporalMask from_columns(const std::vector<BitColumn>& columns,
                                   std::vector<std::string> class_names);

  std::size_t frames() const noexcept { return frames_; }
  std::size_t classes() const noexcept { return class_names_.size(); }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }

  std::uint8_t at(std::size_t frame, std::size_t cls) const {
    return bits_[frame * classes() + cls];
  }
  void set(std::size_t frame, std::size_t cls, std::uint8_t value);

  BitColumn column(std::size_t cls) const;
  void set_column(std::size_t cls, std::span<const std::uint8_t> values);

  /// Number of 1 entries over the whole matrix.
  std::size_t masked_count() const noexcept;

  bool same_shape(const TemporalMask& other) const noexcept {
    return frames_ == other.frames_ && class_names_ == other.class_names_;
  }

  friend bool operator==(const TemporalMask&, const TemporalMask&) = default;

 private:
  std::size_t frames_ = 0;
  std::vector<std::string> class_names_;
  std::vector<std::uint8_t> bits_;  // row-major
};

/// "0011100" -> {0,0,1,1,1,0,0}. Any character other than '0'/'1' is a parse error.
BitColumn parse_bits(std::string_view text);
std::string format_bits(std::span<const std::uint8_t> bits);

// Canonical mask CSV: header `frame,<class_1>,...,<class_p>`, then one row per
// frame `<index>,<0|1>,...`, LF line endings.
std::string to_csv(const TemporalMask& mask);
TemporalMask parse_mask_csv(std::string_view text);
TemporalMask read_mask_csv(const std::filesystem::path& path);
void write_mask_csv(const std::filesystem::path& path, const TemporalMask& mask);

/// Hex SHA-256 of the canonical CSV serialization.
std::string mask_digest(const TemporalMask& mask);

}  // namespace tempmask
