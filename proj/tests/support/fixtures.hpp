#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "injuryrisk/feature_store.hpp"
#include "injuryrisk/windowing.hpp"

namespace fixtures {

namespace fs = std::filesystem;
using injuryrisk::Date;
using injuryrisk::PlayerId;

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static int counter = 0;
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("injuryrisk_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

struct PlantedInjury {
  PlayerId player;
  Date date;
};

/// Imputed store with the standard catalog. Every numeric cell is filled
/// from a seeded generator; session dates and injuries are explicit.
struct StoreFixture {
  injuryrisk::store::FeatureStore store;
  std::vector<PlantedInjury> injuries;  // on- and off-session
};

inline StoreFixture make_store(const std::map<PlayerId, std::vector<Date>>& sessions,
                               const std::vector<PlantedInjury>& injuries, unsigned seed = 1) {
  using namespace injuryrisk::store;
  StoreFixture out;
  out.store.catalog = FeatureCatalog::standard();
  out.injuries = injuries;
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::set<std::pair<PlayerId, Date>> on_session;
  for (const auto& [player, dates] : sessions) {
    for (Date d : dates) {
      DailyRecord r;
      r.player = player;
      r.date = d;
      r.numeric.resize(out.store.catalog.numeric_count());
      for (auto& v : r.numeric) v = std::round(u(gen) * 100.0) / 100.0;
      r.categorical.assign(out.store.catalog.categorical_count(), "unknown");
      for (const auto& inj : injuries) {
        if (inj.player == player && inj.date == d) {
          r.injury = 1;
          on_session.insert({player, d});
        }
      }
      out.store.records.push_back(std::move(r));
    }
  }
  std::sort(out.store.records.begin(), out.store.records.end(),
            [](const auto& a, const auto& b) { return std::tie(a.player, a.date) < std::tie(b.player, b.date); });
  for (const auto& inj : injuries) {
    if (on_session.contains({inj.player, inj.date})) continue;
    injuryrisk::ingest::InjuryEvent e;
    e.player = inj.player;
    e.date = inj.date;
    e.cause = "contact";
    e.activity = "training";
    e.area = "knee";
    e.body_region = "lower limb";
    out.store.off_session_injuries.push_back(e);
  }
  return out;
}

/// 8 players x 50 sessions with irregular gaps (some longer than 14 days)
/// and 12 planted injuries, 4 of them on rest days.
inline StoreFixture windowing_fixture(unsigned seed = 11) {
  std::mt19937 gen(seed);
  std::map<PlayerId, std::vector<Date>> sessions;
  const Date start = Date::from_ymd(2021, 1, 4);
  for (int p = 0; p < 8; ++p) {
    PlayerId id("p" + std::to_string(p + 1));
    Date d = start + static_cast<int>(gen() % 3);
    for (int s = 0; s < 50; ++s) {
      sessions[id].push_back(d);
      const unsigned r = gen() % 20;
      d = d + (r == 0 ? 15 + static_cast<int>(gen() % 5) : 1 + static_cast<int>(r % 3));
    }
  }
  std::vector<PlantedInjury> injuries;
  for (int k = 0; k < 12; ++k) {
    PlayerId id("p" + std::to_string(k % 8 + 1));
    const auto& dates = sessions[id];
    const std::size_t i = 8 + (static_cast<std::size_t>(k) * 7 + gen() % 20) % 38;
    Date d = dates[i];
    if (k % 3 == 2) {
      // Rest day: the day after a session when the next session is later.
      if (dates[i + 1] - dates[i] >= 2) d = dates[i] + 1;
      else d = dates[i] + 0;
    }
    injuries.push_back({id, d});
  }
  return make_store(sessions, injuries, seed);
}

/// Independent enumerator: every contiguous run of n_in + n_out sessions,
/// constraints re-checked, label from the raw injury list.
using WindowKey = std::tuple<std::string, int, int>;  // player, anchor day, label

inline std::set<WindowKey> brute_force_windows(const StoreFixture& f, int n_in, int n_out, int max_span = 14) {
  std::map<PlayerId, std::vector<Date>> dates;
  for (const auto& r : f.store.records) dates[r.player].push_back(r.date);
  std::set<WindowKey> out;
  for (const auto& [player, ds] : dates) {
    const int n = static_cast<int>(ds.size());
    for (int i = 0; i + n_in + n_out <= n; ++i) {
      const Date first = ds[static_cast<std::size_t>(i)];
      const Date anchor = ds[static_cast<std::size_t>(i + n_in - 1)];
      const Date last_out = ds[static_cast<std::size_t>(i + n_in + n_out - 1)];
      if (anchor - first > max_span) continue;
      if (last_out - anchor > max_span) continue;
      int label = 0;
      for (const auto& inj : f.injuries) {
        if (inj.player == player && anchor < inj.date && inj.date <= last_out) label = 1;
      }
      out.emplace(player.str(), anchor.days(), label);
    }
  }
  return out;
}

inline std::set<WindowKey> window_keys(const injuryrisk::windowing::WindowSet& w) {
  std::set<WindowKey> out;
  for (const auto& s : w.samples) out.emplace(s.player.str(), s.anchor_date.days(), s.label);
  return out;
}

}  // namespace fixtures
