#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "injuryrisk/common.hpp"
#include "injuryrisk/ingest.hpp"

namespace injuryrisk::features {

using ingest::GpsSample;

inline constexpr double kEarthRadiusM = 6371000.0;
inline constexpr double kKmhPerMs = 3.6;
inline constexpr double kEpsilon = 1e-9;
inline constexpr std::size_t kZoneCount = 5;

/// Great-circle distance in meters between two points given in degrees.
double haversine_m(double lat1, double lon1, double lat2, double lon2);

/// Averages the samples of each whole second. Input must be sorted by time.
/// HR is averaged over the samples that carry it; satellites keeps the
/// minimum and hdop the maximum of the second (worst quality wins).
std::vector<GpsSample> downsample_1hz(std::span<const GpsSample> samples);

/// Zone boundaries. Speed zones are in km/h; HR zones are percentages of the
/// player's maximum heart rate. Zone k (1-based) is [bound[k-2], bound[k-1]).
struct ZoneConfig {
  std::array<double, kZoneCount - 1> speed_kmh = {7.0, 14.0, 20.0, 25.0};
  std::array<double, kZoneCount - 1> hr_pct = {60.0, 70.0, 80.0, 90.0};
  std::map<PlayerId, double> max_hr_bpm;
};

/// 0-based zone index for a value against ascending boundaries.
std::size_t zone_index(double value, std::span<const double, kZoneCount - 1> bounds);

struct SessionAggregate {
  PlayerId player;
  Date date;
  double duration_s = 0.0;
  double total_distance_m = 0.0;
  double speed_max_ms = 0.0;
  double speed_mean_ms = 0.0;
  std::array<double, kZoneCount> time_in_speed_zone{};
  std::array<double, kZoneCount> time_in_hr_zone{};
  std::optional<double> hr_mean_bpm;
  std::size_t sample_count = 0;
  std::size_t hr_sample_count = 0;
  bool hr_zones_unavailable = false;

  friend bool operator==(const SessionAggregate&, const SessionAggregate&) = default;
};

/// Aggregates the 1 Hz samples of one player-session.
SessionAggregate aggregate_session(const PlayerId& player, Date date, std::span<const GpsSample> samples_1hz,
                                   const ZoneConfig& zones);

/// Sort + downsample + aggregate for a raw (10-100 Hz) session.
SessionAggregate aggregate_raw_session(const PlayerId& player, Date date, std::vector<GpsSample> raw,
                                       const ZoneConfig& zones);

/// Combines two sessions of the same player and day.
SessionAggregate merge_sessions(const SessionAggregate& a, const SessionAggregate& b);

/// Session RPE load: rpe * minutes; absent when either input is absent.
std::optional<double> srpe(std::optional<double> rpe, std::optional<double> duration_min);

enum class LoadModel { rolling, ewma };
LoadModel parse_load_model(std::string_view text);

struct TrainingLoadFeatures {
  PlayerId player;
  Date date;
  double srpe = 0.0;
  double daily_load = 0.0;
  double weekly_load = 0.0;
  double atl = 0.0;
  double ctl28 = 0.0;
  double ctl42 = 0.0;
  double monotony = 0.0;
  double strain = 0.0;
  double acwr = 0.0;
  /// True while fewer than 42 days of history exist.
  bool partial_window = false;
};

/// Per-day load metrics over the dense calendar range [first, last] of
/// `daily`. Days missing from the map count as load 0.
std::vector<TrainingLoadFeatures> derive_loads(const std::map<Date, double>& daily, const PlayerId& player,
                                               LoadModel model = LoadModel::rolling);

}  // namespace injuryrisk::features
