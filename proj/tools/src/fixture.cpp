#include "fixture.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "injuryrisk/common.hpp"
#include "injuryrisk/csv.hpp"
#include "injuryrisk/ingest.hpp"
#include "injuryrisk/random.hpp"

namespace injuryrisk::cli {

namespace fs = std::filesystem;
using ingest::GpsSample;

namespace {

const std::vector<std::string>& roster_names() {
  static const std::vector<std::string> names = {
      "Anna Berg",   "Ingrid Solberg", "Maria Dahl",  "Nora Lie",      "Sofie Hansen", "Emma Strand",
      "Ida Moen",    "Thea Bakke",     "Live Haugen", "Sara Lunde",    "Hanna Vik",    "Julie Aas",
      "Maja Holm",   "Tuva Eide",      "Vilde Ruud",  "Kari Nordby"};
  return names;
}

std::string misspell(const std::string& name, Rng& rng) {
  std::string out = name;
  const auto i = 1 + rng.below(out.size() - 2);
  if (out[i] != ' ' && out[i + 1] != ' ') std::swap(out[i], out[i + 1]);
  return out;
}

double clamp_round(double v, double lo, double hi) { return std::clamp(std::round(v), lo, hi); }

}  // namespace

void generate_fixture(const fs::path& dir, const FixtureSpec& spec) {
  if (spec.players < 1 || spec.players > static_cast<int>(roster_names().size())) {
    throw PreconditionError("fixture players must be in 1.." + std::to_string(roster_names().size()));
  }
  if (spec.days < 30) throw PreconditionError("fixture needs at least 30 days");
  Rng rng(spec.seed);
  const Date start = Date::from_ymd(2021, 5, 1);
  const auto raw = dir / "raw";
  fs::create_directories(raw / "gps");

  std::vector<ingest::SubjectiveReport> reports;
  std::vector<ingest::MatchStats> matches;
  std::string injuries = "name,date,cause,activity,area\n";
  const std::vector<std::string> causes = {"contact", "overuse", "non-contact"};
  const std::vector<std::string> areas = {"hamstring", "knee", "ankle", "groin", "calf", "thigh", "lower back"};
  nlohmann::json roster = nlohmann::json::array();
  nlohmann::json max_hr = nlohmann::json::object();

  for (int pi = 0; pi < spec.players; ++pi) {
    const PlayerId player("p" + std::to_string(pi + 1));
    const auto& name = roster_names()[static_cast<std::size_t>(pi)];
    roster.push_back({{"id", player.str()}, {"name", name}});
    const double player_max_hr = 185.0 + static_cast<double>(rng.below(20));
    // The last player has no configured max HR so HR zones are flagged unavailable.
    if (pi + 1 < spec.players) max_hr[player.str()] = player_max_hr;

    std::set<int> injury_days;
    for (int d = 14 + static_cast<int>(rng.below(10)); d < spec.days - 3; d += 16 + static_cast<int>(rng.below(14))) {
      injury_days.insert(d);
    }
    const int gap_start = 30 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, spec.days - 50))));
    int recovering_until = -1;
    for (int day = 0; day < spec.days; ++day) {
      const Date date = start + day;
      int days_to_injury = 1000;
      for (int d : injury_days) {
        if (d >= day) {
          days_to_injury = d - day;
          break;
        }
      }
      const bool at_risk = days_to_injury >= 1 && days_to_injury <= 6;
      const bool injured_today = injury_days.contains(day);
      const bool in_gap = day >= gap_start && day < gap_start + 16 && pi % 3 == 0;
      bool session = !in_gap && day > recovering_until && rng.uniform() < 0.8;
      if (injured_today) session = rng.uniform() < 0.7;
      const bool match_day = session && day % 7 == 6;

      // Wellness is reported on most days, session or not.
      ingest::SubjectiveReport r;
      r.player = player;
      r.date = date;
      bool any = false;
      auto maybe = [&](std::optional<double>& field, double value, double missing = 0.1) {
        if (rng.uniform() >= missing) {
          field = value;
          any = true;
        }
      };
      const double stress_shift = at_risk ? 1.5 : 0.0;
      maybe(r.fatigue, clamp_round(2.5 + stress_shift + rng.normal() * 0.7, 1, 5));
      maybe(r.mood, clamp_round(3.5 - stress_shift * 0.5 + rng.normal() * 0.7, 1, 5));
      maybe(r.readiness, clamp_round(3.5 - stress_shift + rng.normal() * 0.7, 1, 5));
      maybe(r.soreness, clamp_round(2.0 + stress_shift + rng.normal() * 0.7, 1, 5));
      maybe(r.stress, clamp_round(2.5 + stress_shift * 0.5 + rng.normal() * 0.7, 1, 5));
      maybe(r.sleep_duration_h, std::round((7.5 - stress_shift * 0.6 + rng.normal() * 0.6) * 10.0) / 10.0);
      maybe(r.sleep_quality, clamp_round(3.5 - stress_shift * 0.7 + rng.normal() * 0.7, 1, 5));
      if (session) {
        maybe(r.rpe, clamp_round((match_day ? 7.5 : 5.0) + stress_shift + rng.normal(), 0, 10), 0.05);
        maybe(r.duration_min, std::round((match_day ? 90.0 : 70.0) + stress_shift * 10.0 + rng.normal() * 10.0), 0.05);
      }
      if (any) reports.push_back(r);

      if (injured_today) {
        std::string reported = name;
        if (rng.uniform() < 0.4) reported = misspell(name, rng);
        if (rng.uniform() < 0.3) {
          std::transform(reported.begin(), reported.end(), reported.begin(), [](unsigned char c) { return std::tolower(c); });
        }
        injuries += csv::join({reported, date.iso(), causes[rng.below(causes.size())],
                               match_day ? "match" : "training", areas[rng.below(areas.size())]}) +
                    "\n";
        recovering_until = day + 3 + static_cast<int>(rng.below(4));
      }
      if (!session) continue;

      if (match_day) {
        ingest::MatchStats m;
        m.player = player;
        m.date = date;
        for (const auto& attr : ingest::match_attribute_catalog()) {
          if (rng.uniform() < 0.05) {
            m.values.emplace_back();
          } else if (attr == "minutes_played") {
            m.values.emplace_back(static_cast<double>(45 + rng.below(46)));
          } else if (attr.find("expected") != std::string::npos) {
            m.values.emplace_back(std::round(rng.uniform(0.0, 1.2) * 100.0) / 100.0);
          } else {
            m.values.emplace_back(static_cast<double>(rng.below(12)));
          }
        }
        matches.push_back(std::move(m));
      }

      // One GPS session file per session day.
      std::vector<GpsSample> samples;
      const int n = spec.sample_hz * spec.session_seconds;
      const auto t0 = static_cast<std::int64_t>(date.days()) * 86'400'000 + 17LL * 3'600'000;
      double lat = 59.95 + rng.uniform(-0.001, 0.001);
      double lon = 10.75 + rng.uniform(-0.001, 0.001);
      double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double base_speed = (match_day ? 12.0 : 9.0) + (at_risk ? 4.0 : 0.0) + rng.normal() * 1.5;
      const bool has_hr = pi % 4 != 3;
      for (int k = 0; k < n; ++k) {
        GpsSample s;
        s.player = player;
        s.timestamp = Timestamp(t0 + static_cast<std::int64_t>(k) * 1000 / spec.sample_hz);
        const double speed = std::max(0.0, base_speed + 6.0 * std::sin(k / 40.0) + rng.normal() * 1.5);
        s.speed_kmh = std::round(speed * 100.0) / 100.0;
        heading += rng.normal() * 0.05;
        const double step = speed / 3.6 / spec.sample_hz;
        lat += step * std::cos(heading) / 111'195.0;
        lon += step * std::sin(heading) / (111'195.0 * std::cos(lat * std::numbers::pi / 180.0));
        s.lat = std::round(lat * 1e7) / 1e7;
        s.lon = std::round(lon * 1e7) / 1e7;
        if (has_hr) s.heart_rate_bpm = std::round(std::min(player_max_hr, 110.0 + speed * 3.5 + rng.normal() * 4.0));
        s.satellites = 6 + static_cast<int>(rng.below(7));
        s.hdop = std::round(rng.uniform(0.5, 2.0) * 10.0) / 10.0;
        const double u = rng.uniform();
        if (u < 0.02) s.satellites = 3;
        else if (u < 0.03) s.speed_kmh = 55.0;
        else if (u < 0.035) s.hdop = 7.5;
        samples.push_back(std::move(s));
      }
      const auto file = raw / "gps" / (player.str() + "_" + date.iso() + (match_day ? "_match" : "_s1") + ".csv");
      ingest::write_gps_file(file, samples);
      if (rng.uniform() < 0.2) {
        // A corrupted line, as produced by a truncated export.
        std::string text;
        {
          std::ifstream in(file);
          text.assign(std::istreambuf_iterator<char>(in), {});
        }
        text += Timestamp(t0 + static_cast<std::int64_t>(n) * 1000 / spec.sample_hz).iso() + ",abc,10.75,5.0,,,\n";
        csv::write_text(file, text);
      }
    }
  }
  // One report that names nobody on the roster.
  injuries += csv::join({"Unknown Visitor", (start + 40).iso(), "contact", "training", "ankle"}) + "\n";

  ingest::write_subjective(reports, raw / "subjective");
  ingest::write_match_stats(matches, raw / "match_stats.csv");
  csv::write_text(raw / "injuries.csv", injuries);

  nlohmann::json config = {
      {"paths",
       {{"subjective_dir", "raw/subjective"},
        {"gps_dir", "raw/gps"},
        {"match_stats", "raw/match_stats.csv"},
        {"injuries", "raw/injuries.csv"},
        {"store", "work/store.csv"},
        {"windows", "work/windows.csv"},
        {"rounds_dir", "work/rounds"},
        {"results_dir", "work/results"},
        {"models_dir", "work/models"}}},
      {"zones", {{"max_hr_bpm", max_hr}}},
      {"roster", roster},
      {"imputation", "median"},
      {"window", {{"n_in", 3}, {"n_out", 3}, {"rounds", 3}}},
      {"synthesis", {{"enabled", true}, {"event_proportion", 0.25}, {"multiplier", 1.0}}},
      {"grid", {{"rounds", 3}}},
      {"seed", spec.seed}};
  csv::write_text(dir / "config.json", config.dump(2) + "\n");
}

}  // namespace injuryrisk::cli
