#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace injuryrisk {

/// 64-bit FNV-1a. Used for content hashes in manifests and model file names;
/// not cryptographic.
class Fnv1a {
 public:
  Fnv1a& add(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& add(double v) {
    char buf[sizeof(double)];
    std::memcpy(buf, &v, sizeof v);
    return add(std::string_view(buf, sizeof buf));
  }
  Fnv1a& add(std::uint64_t v) {
    char buf[sizeof v];
    std::memcpy(buf, &v, sizeof v);
    return add(std::string_view(buf, sizeof buf));
  }
  Fnv1a& add(std::span<const double> values) {
    for (double v : values) add(v);
    return *this;
  }

  std::uint64_t value() const noexcept { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

/// Hash of a file's bytes; throws Error if unreadable.
std::string hash_file(const std::filesystem::path& path);

}  // namespace injuryrisk
