#include "injuryrisk/common.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace injuryrisk {

namespace {

bool parse_fixed_digits(std::string_view text, std::size_t pos, std::size_t count, int& out) {
  if (pos + count > text.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

}  // namespace

PlayerId::PlayerId(std::string id) : id_(std::move(id)) {
  if (id_.empty()) throw DataError("player id must be non-empty");
}

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok()) {
    throw DataError("invalid calendar date " + std::to_string(year) + "-" + std::to_string(month) + "-" +
                    std::to_string(day));
  }
  return Date(static_cast<std::int32_t>(sys_days{ymd}.time_since_epoch().count()));
}

Date Date::parse(std::string_view text) {
  int y = 0, m = 0, d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !parse_fixed_digits(text, 0, 4, y) ||
      !parse_fixed_digits(text, 5, 2, m) || !parse_fixed_digits(text, 8, 2, d)) {
    throw DataError("malformed date '" + std::string(text) + "' (expected YYYY-MM-DD)");
  }
  return from_ymd(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

std::string Date::iso() const {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{std::chrono::days{days_}}};
  std::array<char, 16> buf{};
  std::snprintf(buf.data(), buf.size(), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf.data();
}

Timestamp Timestamp::parse(std::string_view text) {
  // 2021-05-01T10:00:00.123Z
  auto fail = [&]() -> Timestamp {
    throw DataError("malformed timestamp '" + std::string(text) + "'");
  };
  if (text.size() < 19) return fail();
  Date date;
  try {
    date = Date::parse(text.substr(0, 10));
  } catch (const DataError&) {
    return fail();
  }
  if (text[10] != 'T' && text[10] != ' ') return fail();
  int hh = 0, mm = 0, ss = 0;
  if (!parse_fixed_digits(text, 11, 2, hh) || text[13] != ':' || !parse_fixed_digits(text, 14, 2, mm) ||
      text[16] != ':' || !parse_fixed_digits(text, 17, 2, ss) || hh > 23 || mm > 59 || ss > 60) {
    return fail();
  }
  std::size_t pos = 19;
  int millis = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    int digits = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      if (digits < 3) millis = millis * 10 + (text[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) return fail();
    for (int i = digits; i < 3; ++i) millis *= 10;
  }
  if (pos < text.size() && text[pos] == 'Z') ++pos;
  if (pos != text.size()) return fail();
  const std::int64_t secs = static_cast<std::int64_t>(date.days()) * 86400 + hh * 3600 + mm * 60 + ss;
  return Timestamp(secs * 1000 + millis);
}

std::string Timestamp::iso() const {
  const std::int64_t secs = second();
  const std::int64_t millis = ms_ - secs * 1000;
  const std::int64_t day_secs = ((secs % 86400) + 86400) % 86400;
  const Date d(static_cast<std::int32_t>((secs - day_secs) / 86400));
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%sT%02d:%02d:%02d.%03dZ", d.iso().c_str(),
                static_cast<int>(day_secs / 3600), static_cast<int>((day_secs / 60) % 60),
                static_cast<int>(day_secs % 60), static_cast<int>(millis));
  return buf.data();
}

Date Timestamp::date() const noexcept {
  const std::int64_t secs = second();
  const std::int64_t day_secs = ((secs % 86400) + 86400) % 86400;
  return Date(static_cast<std::int32_t>((secs - day_secs) / 86400));
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

std::string format_float_repr(double value) {
  std::string s = format_double(value);
  if (std::isfinite(value) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string format_fixed(double value, int decimals) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::fixed, decimals);
  return std::string(buf.data(), res.ptr);
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc{} && res.ptr == text.data() + text.size() && std::isfinite(out);
}

bool parse_int(std::string_view text, long long& out) {
  text = trim(text);
  if (text.empty()) return false;
  auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc{} && res.ptr == text.data() + text.size();
}

std::string_view trim(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t' || text.front() == '\r')) {
    text.remove_prefix(1);
  }
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  return text;
}

}  // namespace injuryrisk
