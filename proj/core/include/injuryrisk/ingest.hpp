#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "injuryrisk/common.hpp"

namespace injuryrisk::ingest {

// ---------------------------------------------------------------------------
// Subjective reports
// ---------------------------------------------------------------------------

struct SubjectiveReport {
  PlayerId player;
  Date date;
  std::optional<double> rpe;           // 0..10, integral
  std::optional<double> duration_min;  // >= 0
  std::optional<double> fatigue;       // ordinals 1..5
  std::optional<double> mood;
  std::optional<double> readiness;
  std::optional<double> soreness;
  std::optional<double> stress;
  std::optional<double> sleep_duration_h;  // >= 0
  std::optional<double> sleep_quality;     // 1..5

  friend bool operator==(const SubjectiveReport&, const SubjectiveReport&) = default;
};

/// One subjective feature file: `<name>.csv`, its admissible range and
/// whether values must be whole numbers.
struct SubjectiveField {
  std::string_view name;
  std::optional<double> SubjectiveReport::*member;
  double min;
  double max;
  bool integral;
};

inline constexpr std::size_t kSubjectiveFieldCount = 9;
const std::array<SubjectiveField, kSubjectiveFieldCount>& subjective_fields();

/// Reads every `<feature>.csv` in `dir`. Each file has a `date` column
/// followed by one column per player ID. Result is sorted by (player, date).
std::vector<SubjectiveReport> read_subjective(const std::filesystem::path& dir);

/// Inverse of read_subjective: one file per feature that has any value.
void write_subjective(std::span<const SubjectiveReport> reports, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// GPS telemetry
// ---------------------------------------------------------------------------

struct GpsSample {
  PlayerId player;
  Timestamp timestamp;
  double lat = 0.0;
  double lon = 0.0;
  double speed_kmh = 0.0;
  std::optional<double> heart_rate_bpm;
  std::optional<int> satellites;
  std::optional<double> hdop;

  friend bool operator==(const GpsSample&, const GpsSample&) = default;
};

struct GpsSessionKey {
  PlayerId player;
  Date date;
  std::string session;

  friend auto operator<=>(const GpsSessionKey&, const GpsSessionKey&) = default;
};

/// Parses `<player>_<YYYY-MM-DD>_<session>`; the player part may itself
/// contain underscores.
GpsSessionKey parse_session_filename(std::string_view stem);

struct GpsSession {
  GpsSessionKey key;
  std::filesystem::path file;
  std::vector<GpsSample> samples;  // file order
  std::size_t skipped_rows = 0;
};

/// Streams session files one at a time from a directory; only the current
/// session is held in memory.
class GpsReader {
 public:
  static constexpr std::array<std::string_view, 7> kHeader = {
      "timestamp", "lat", "lon", "speed_kmh", "heart_rate_bpm", "satellites", "hdop"};
  static constexpr std::size_t kMandatoryColumns = 4;  // timestamp..speed_kmh

  explicit GpsReader(const std::filesystem::path& dir);

  /// Next session in file-name order, or nullopt when exhausted.
  std::optional<GpsSession> next_session();

  std::size_t session_count() const noexcept { return files_.size(); }
  std::size_t skipped_rows() const noexcept { return skipped_; }
  /// First few skip reasons, `file:line: reason`.
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  static GpsSession read_file(const std::filesystem::path& file, std::vector<std::string>* warnings = nullptr);

 private:
  std::vector<std::filesystem::path> files_;
  std::size_t cursor_ = 0;
  std::size_t skipped_ = 0;
  std::vector<std::string> warnings_;
};

/// Writes samples with the fixed GPS header (fixtures, round-trips).
void write_gps_file(const std::filesystem::path& file, std::span<const GpsSample> samples);

// ---------------------------------------------------------------------------
// Plausibility filtering
// ---------------------------------------------------------------------------

/// A disabled rule is an empty optional.
struct PlausibilityConfig {
  double lat_min = -90.0;
  double lat_max = 90.0;
  double lon_min = -180.0;
  double lon_max = 180.0;
  std::optional<double> speed_max_kmh = 40.0;
  std::optional<int> min_satellites = 4;
  std::optional<double> max_hdop = 5.0;
};

inline constexpr std::string_view kRuleLat = "lat_range";
inline constexpr std::string_view kRuleLon = "lon_range";
inline constexpr std::string_view kRuleSpeed = "speed_range";
inline constexpr std::string_view kRuleSatellites = "min_satellites";
inline constexpr std::string_view kRuleHdop = "max_hdop";

/// Kept/total counts plus per-rule drop counts. A sample violating several
/// rules increments each of them but is dropped once.
struct RetentionStats {
  std::size_t total = 0;
  std::size_t kept = 0;
  std::map<std::string, std::size_t, std::less<>> drops;

  std::size_t dropped() const noexcept { return total - kept; }
  /// kept/total; 1.0 for empty input (see empty_input()).
  double retention() const noexcept;
  bool empty_input() const noexcept { return total == 0; }
  /// Associative and commutative.
  RetentionStats& merge(const RetentionStats& other);

  friend bool operator==(const RetentionStats&, const RetentionStats&) = default;
};

class PlausibilityFilter {
 public:
  explicit PlausibilityFilter(PlausibilityConfig cfg) : cfg_(cfg) {}

  /// Rules violated by `s` (empty when plausible).
  std::vector<std::string_view> violations(const GpsSample& s) const;
  /// Records the sample in `stats`; true when kept.
  bool accept(const GpsSample& s, RetentionStats& stats) const;

 private:
  PlausibilityConfig cfg_;
};

std::pair<std::vector<GpsSample>, RetentionStats> filter_plausible(std::span<const GpsSample> samples,
                                                                   const PlausibilityConfig& cfg);

// ---------------------------------------------------------------------------
// Match statistics
// ---------------------------------------------------------------------------

/// The 38 per-match attributes, in file/column order.
const std::vector<std::string>& match_attribute_catalog();

struct MatchStats {
  PlayerId player;
  Date date;
  std::vector<std::optional<double>> values;  // catalog order

  friend bool operator==(const MatchStats&, const MatchStats&) = default;
};

/// Header must be `player,date,<catalog...>` exactly.
std::vector<MatchStats> read_match_stats(const std::filesystem::path& file);
void write_match_stats(std::span<const MatchStats> stats, const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Injury reports and name linking
// ---------------------------------------------------------------------------

struct RawInjuryRow {
  std::string name;
  Date date;
  std::string cause;
  std::string activity;
  std::string area;
};

struct InjuryEvent {
  PlayerId player;
  Date date;
  std::string cause;
  std::string activity;
  std::string area;
  std::string body_region;

  friend bool operator==(const InjuryEvent&, const InjuryEvent&) = default;
};

struct RosterEntry {
  PlayerId id;
  std::string name;
};

struct UnmatchedInjury {
  RawInjuryRow row;
  std::vector<RosterEntry> candidates;  // nearest entries
  std::size_t distance = 0;
  std::string reason;  // "tie" | "too_distant" | "empty_roster"
};

struct LinkResult {
  std::vector<InjuryEvent> events;
  std::vector<UnmatchedInjury> unmatched;
};

/// Header `name,date,cause,activity,area`.
std::vector<RawInjuryRow> read_injury_rows(const std::filesystem::path& file);

/// Edit distance over Unicode code points (UTF-8 input), unit costs.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// Lower-cases ASCII letters and collapses runs of whitespace.
std::string normalize_name(std::string_view name);

/// Assigns each row to the roster entry at minimal distance; accepted when
/// distance <= ceil(0.3 * length of the canonical name).
LinkResult link_injuries(std::span<const RawInjuryRow> rows, std::span<const RosterEntry> roster);

/// Fixed area -> body-region table; unknown areas map to "other".
std::string body_region_for(std::string_view area);

}  // namespace injuryrisk::ingest
