#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tempmask/temporal_mask.hpp"

namespace testsupport {

// Every maximal run checked directly on the string.
inline bool runs_ok(const std::string& s, int k0, int k1) {
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    const auto run = static_cast<int>(j - i);
    if (run < (s[i] == '0' ? k0 : k1)) return false;
    i = j;
  }
  return true;
}

// All members of E(l, k0, k1) in lexicographic order, by enumerating 2^l strings.
inline std::vector<std::string> enumerate_members(int l, int k0, int k1) {
  std::vector<std::string> out;
  for (std::uint64_t v = 0; v < (std::uint64_t{1} << l); ++v) {
    std::string s(static_cast<std::size_t>(l), '0');
    for (int b = 0; b < l; ++b)
      if (v >> (l - 1 - b) & 1U) s[static_cast<std::size_t>(b)] = '1';
    if (runs_ok(s, k0, k1)) out.push_back(s);
  }
  return out;
}

inline std::string bits_string(const tempmask::BitColumn& bits) {
  std::string s;
  for (auto b : bits) s.push_back(b ? '1' : '0');
  return s;
}

inline tempmask::TemporalMask column_mask(const std::string& bits,
                                          const std::string& name = "object") {
  return tempmask::TemporalMask::from_columns({tempmask::parse_bits(bits)}, {name});
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() /
            ("tempmask-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testsupport
