#pragma once

#include <cstdint>
#include <filesystem>

namespace injuryrisk::cli {

struct FixtureSpec {
  int players = 8;
  int days = 90;
  int sample_hz = 5;
  int session_seconds = 60;
  std::uint64_t seed = 7;
};

/// Writes a synthetic raw data set (subjective, GPS, match statistics,
/// injury reports) plus a matching `config.json` into `dir`. Injuries are
/// preceded by elevated load and poor wellness so models have signal.
void generate_fixture(const std::filesystem::path& dir, const FixtureSpec& spec);

}  // namespace injuryrisk::cli
