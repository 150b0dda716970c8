#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace injuryrisk {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, rows, cells).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (unknown key, bad value, missing path).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Opaque athlete identifier. Non-empty by construction.
class PlayerId {
 public:
  PlayerId() = default;
  explicit PlayerId(std::string id);

  const std::string& str() const noexcept { return id_; }
  bool empty() const noexcept { return id_.empty(); }

  friend auto operator<=>(const PlayerId&, const PlayerId&) = default;
  friend bool operator==(const PlayerId&, const PlayerId&) = default;

 private:
  std::string id_;
};

/// Calendar date, stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}
  static Date from_ymd(int year, unsigned month, unsigned day);

  /// Strict `YYYY-MM-DD`; throws DataError otherwise.
  static Date parse(std::string_view text);
  std::string iso() const;

  constexpr std::int32_t days() const noexcept { return days_; }
  constexpr Date operator+(std::int32_t n) const noexcept { return Date(days_ + n); }
  constexpr Date operator-(std::int32_t n) const noexcept { return Date(days_ - n); }
  constexpr std::int32_t operator-(Date other) const noexcept { return days_ - other.days_; }

  friend constexpr auto operator<=>(Date, Date) = default;

 private:
  std::int32_t days_ = 0;
};

/// UTC instant with millisecond resolution.
class Timestamp {
 public:
  constexpr Timestamp() = default;
  constexpr explicit Timestamp(std::int64_t ms_since_epoch) : ms_(ms_since_epoch) {}

  /// `YYYY-MM-DDTHH:MM:SS[.fff][Z]`; throws DataError otherwise.
  static Timestamp parse(std::string_view text);
  /// Always `YYYY-MM-DDTHH:MM:SS.fffZ`.
  std::string iso() const;

  constexpr std::int64_t ms() const noexcept { return ms_; }
  /// Whole seconds since epoch (floor).
  constexpr std::int64_t second() const noexcept {
    return ms_ >= 0 ? ms_ / 1000 : -((-ms_ + 999) / 1000);
  }
  Date date() const noexcept;

  friend constexpr auto operator<=>(Timestamp, Timestamp) = default;

 private:
  std::int64_t ms_ = 0;
};

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);
/// Like format_double but always carries a decimal point ("3" -> "3.0").
std::string format_float_repr(double value);
/// Fixed-point with `decimals` digits.
std::string format_fixed(double value, int decimals);
/// Whole-string numeric parse; returns false on any trailing garbage.
bool parse_double(std::string_view text, double& out);
bool parse_int(std::string_view text, long long& out);

std::string_view trim(std::string_view text);

}  // namespace injuryrisk

template <>
struct std::hash<injuryrisk::PlayerId> {
  std::size_t operator()(const injuryrisk::PlayerId& p) const noexcept {
    return std::hash<std::string>{}(p.str());
  }
};
