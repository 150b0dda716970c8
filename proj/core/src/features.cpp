#include "injuryrisk/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace injuryrisk::features {

namespace {

constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

double haversine_m(double lat1, double lon1, double lat2, double lon2) {
  const double phi1 = deg2rad(lat1);
  const double phi2 = deg2rad(lat2);
  const double dphi = deg2rad(lat2 - lat1);
  const double dlambda = deg2rad(lon2 - lon1);
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double a = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(a)));
}

std::vector<GpsSample> downsample_1hz(std::span<const GpsSample> samples) {
  std::vector<GpsSample> out;
  std::size_t i = 0;
  while (i < samples.size()) {
    const std::int64_t second = samples[i].timestamp.second();
    std::size_t j = i;
    double lat = 0.0, lon = 0.0, speed = 0.0, hr = 0.0;
    std::size_t hr_n = 0;
    GpsSample merged = samples[i];
    while (j < samples.size() && samples[j].timestamp.second() == second) {
      const auto& s = samples[j];
      lat += s.lat;
      lon += s.lon;
      speed += s.speed_kmh;
      if (s.heart_rate_bpm) {
        hr += *s.heart_rate_bpm;
        ++hr_n;
      }
      if (s.satellites) merged.satellites = std::min(merged.satellites.value_or(*s.satellites), *s.satellites);
      if (s.hdop) merged.hdop = std::max(merged.hdop.value_or(*s.hdop), *s.hdop);
      ++j;
    }
    const auto n = static_cast<double>(j - i);
    merged.timestamp = Timestamp(second * 1000);
    merged.lat = lat / n;
    merged.lon = lon / n;
    merged.speed_kmh = speed / n;
    merged.heart_rate_bpm = hr_n ? std::optional<double>(hr / static_cast<double>(hr_n)) : std::nullopt;
    out.push_back(std::move(merged));
    i = j;
  }
  return out;
}

std::size_t zone_index(double value, std::span<const double, kZoneCount - 1> bounds) {
  return static_cast<std::size_t>(std::upper_bound(bounds.begin(), bounds.end(), value) - bounds.begin());
}

SessionAggregate aggregate_session(const PlayerId& player, Date date, std::span<const GpsSample> samples,
                                   const ZoneConfig& zones) {
  SessionAggregate agg;
  agg.player = player;
  agg.date = date;
  agg.sample_count = samples.size();
  agg.duration_s = static_cast<double>(samples.size());

  const auto max_hr = zones.max_hr_bpm.find(player);
  agg.hr_zones_unavailable = max_hr == zones.max_hr_bpm.end() || !(max_hr->second > 0.0);

  double speed_sum = 0.0;
  double hr_sum = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    if (k > 0) agg.total_distance_m += haversine_m(samples[k - 1].lat, samples[k - 1].lon, s.lat, s.lon);
    speed_sum += s.speed_kmh;
    agg.speed_max_ms = std::max(agg.speed_max_ms, s.speed_kmh / kKmhPerMs);
    agg.time_in_speed_zone[zone_index(s.speed_kmh, zones.speed_kmh)] += 1.0;
    if (s.heart_rate_bpm) {
      hr_sum += *s.heart_rate_bpm;
      ++agg.hr_sample_count;
      if (!agg.hr_zones_unavailable) {
        const double pct = 100.0 * *s.heart_rate_bpm / max_hr->second;
        agg.time_in_hr_zone[zone_index(pct, zones.hr_pct)] += 1.0;
      }
    }
  }
  if (!samples.empty()) agg.speed_mean_ms = speed_sum / static_cast<double>(samples.size()) / kKmhPerMs;
  if (agg.hr_sample_count) agg.hr_mean_bpm = hr_sum / static_cast<double>(agg.hr_sample_count);
  return agg;
}

SessionAggregate aggregate_raw_session(const PlayerId& player, Date date, std::vector<GpsSample> raw,
                                       const ZoneConfig& zones) {
  std::stable_sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  const auto per_second = downsample_1hz(raw);
  return aggregate_session(player, date, per_second, zones);
}

SessionAggregate merge_sessions(const SessionAggregate& a, const SessionAggregate& b) {
  SessionAggregate m = a;
  m.duration_s = a.duration_s + b.duration_s;
  m.total_distance_m = a.total_distance_m + b.total_distance_m;
  m.speed_max_ms = std::max(a.speed_max_ms, b.speed_max_ms);
  m.sample_count = a.sample_count + b.sample_count;
  if (m.sample_count) {
    m.speed_mean_ms = (a.speed_mean_ms * static_cast<double>(a.sample_count) +
                       b.speed_mean_ms * static_cast<double>(b.sample_count)) /
                      static_cast<double>(m.sample_count);
  }
  for (std::size_t z = 0; z < kZoneCount; ++z) {
    m.time_in_speed_zone[z] = a.time_in_speed_zone[z] + b.time_in_speed_zone[z];
    m.time_in_hr_zone[z] = a.time_in_hr_zone[z] + b.time_in_hr_zone[z];
  }
  m.hr_sample_count = a.hr_sample_count + b.hr_sample_count;
  if (m.hr_sample_count) {
    m.hr_mean_bpm = (a.hr_mean_bpm.value_or(0.0) * static_cast<double>(a.hr_sample_count) +
                     b.hr_mean_bpm.value_or(0.0) * static_cast<double>(b.hr_sample_count)) /
                    static_cast<double>(m.hr_sample_count);
  }
  m.hr_zones_unavailable = a.hr_zones_unavailable || b.hr_zones_unavailable;
  return m;
}

std::optional<double> srpe(std::optional<double> rpe, std::optional<double> duration_min) {
  if (!rpe || !duration_min) return std::nullopt;
  return *rpe * *duration_min;
}

LoadModel parse_load_model(std::string_view text) {
  if (text == "rolling") return LoadModel::rolling;
  if (text == "ewma") return LoadModel::ewma;
  throw ConfigError("load_model must be \"rolling\" or \"ewma\", got \"" + std::string(text) + "\"");
}

std::vector<TrainingLoadFeatures> derive_loads(const std::map<Date, double>& daily, const PlayerId& player,
                                               LoadModel model) {
  std::vector<TrainingLoadFeatures> out;
  if (daily.empty()) return out;

  const Date first = daily.begin()->first;
  const Date last = daily.rbegin()->first;
  const auto days = static_cast<std::size_t>(last - first + 1);
  std::vector<double> load(days, 0.0);
  for (const auto& [date, value] : daily) {
    if (!(value >= 0.0)) throw PreconditionError("daily load must be >= 0 (" + date.iso() + ")");
    load[static_cast<std::size_t>(date - first)] = value;
  }

  // Trailing sum over the last `span` days ending at d, clipped at the start.
  auto trailing = [&](std::size_t d, std::size_t span) {
    const std::size_t begin = d + 1 >= span ? d + 1 - span : 0;
    double sum = 0.0;
    for (std::size_t k = begin; k <= d; ++k) sum += load[k];
    return std::pair{sum, static_cast<double>(d - begin + 1)};
  };

  auto ewma_step = [](double prev, double x, double n) {
    const double lambda = 2.0 / (n + 1.0);
    return lambda * x + (1.0 - lambda) * prev;
  };
  double ewma7 = load[0], ewma28 = load[0], ewma42 = load[0];

  out.reserve(days);
  for (std::size_t d = 0; d < days; ++d) {
    TrainingLoadFeatures f;
    f.player = player;
    f.date = first + static_cast<std::int32_t>(d);
    f.srpe = load[d];
    f.daily_load = load[d];
    f.partial_window = d + 1 < 42;

    const auto [week_sum, week_n] = trailing(d, 7);
    f.weekly_load = week_sum;
    const double week_mean = week_sum / week_n;
    double var = 0.0;
    const std::size_t begin = d + 1 >= 7 ? d + 1 - 7 : 0;
    for (std::size_t k = begin; k <= d; ++k) var += (load[k] - week_mean) * (load[k] - week_mean);
    const double popstd = std::sqrt(var / week_n);
    f.monotony = popstd < kEpsilon ? 0.0 : week_mean / popstd;
    f.strain = f.weekly_load * f.monotony;

    if (model == LoadModel::rolling) {
      f.atl = week_mean;
      const auto [s28, n28] = trailing(d, 28);
      const auto [s42, n42] = trailing(d, 42);
      f.ctl28 = s28 / n28;
      f.ctl42 = s42 / n42;
    } else {
      if (d > 0) {
        ewma7 = ewma_step(ewma7, load[d], 7.0);
        ewma28 = ewma_step(ewma28, load[d], 28.0);
        ewma42 = ewma_step(ewma42, load[d], 42.0);
      }
      f.atl = ewma7;
      f.ctl28 = ewma28;
      f.ctl42 = ewma42;
    }
    f.acwr = f.ctl28 < kEpsilon ? 0.0 : f.atl / f.ctl28;
    out.push_back(f);
  }
  return out;
}

}  // namespace injuryrisk::features
