#include "injuryrisk/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "injuryrisk/csv.hpp"

namespace injuryrisk::ingest {

namespace fs = std::filesystem;

namespace {

std::string where(const fs::path& file, std::size_t line) {
  return file.string() + ":" + std::to_string(line);
}

std::vector<fs::path> list_csv(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string optional_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

// ---------------------------------------------------------------------------
// Subjective
// ---------------------------------------------------------------------------

const std::array<SubjectiveField, kSubjectiveFieldCount>& subjective_fields() {
  static const std::array<SubjectiveField, kSubjectiveFieldCount> fields = {{
      {"rpe", &SubjectiveReport::rpe, 0.0, 10.0, true},
      {"duration_min", &SubjectiveReport::duration_min, 0.0, 1440.0, false},
      {"fatigue", &SubjectiveReport::fatigue, 1.0, 5.0, true},
      {"mood", &SubjectiveReport::mood, 1.0, 5.0, true},
      {"readiness", &SubjectiveReport::readiness, 1.0, 5.0, true},
      {"soreness", &SubjectiveReport::soreness, 1.0, 5.0, true},
      {"stress", &SubjectiveReport::stress, 1.0, 5.0, true},
      {"sleep_duration_h", &SubjectiveReport::sleep_duration_h, 0.0, 24.0, false},
      {"sleep_quality", &SubjectiveReport::sleep_quality, 1.0, 5.0, true},
  }};
  return fields;
}

std::vector<SubjectiveReport> read_subjective(const fs::path& dir) {
  const auto& fields = subjective_fields();
  std::map<std::pair<PlayerId, Date>, SubjectiveReport> merged;

  for (const auto& file : list_csv(dir)) {
    const std::string stem = file.stem().string();
    auto field = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.name == stem; });
    if (field == fields.end()) throw DataError(file.string() + ": unknown subjective feature '" + stem + "'");

    csv::Reader reader(file);
    auto header = reader.next();
    if (!header || header->empty() || trim((*header)[0]) != "date") {
      throw DataError(file.string() + ": first column must be 'date'");
    }
    std::vector<PlayerId> players;
    std::set<std::string> seen;
    for (std::size_t c = 1; c < header->size(); ++c) {
      const std::string id(trim((*header)[c]));
      if (id.empty()) throw DataError(where(file, reader.line()) + ": empty player column name");
      if (!seen.insert(id).second) throw DataError(where(file, reader.line()) + ": duplicate player column " + id);
      players.emplace_back(id);
    }

    while (auto row = reader.next()) {
      if (row->size() != header->size()) {
        throw DataError(where(file, reader.line()) + ": expected " + std::to_string(header->size()) + " fields");
      }
      Date date;
      try {
        date = Date::parse(trim((*row)[0]));
      } catch (const DataError& e) {
        throw DataError(where(file, reader.line()) + ": " + e.what());
      }
      for (std::size_t c = 1; c < row->size(); ++c) {
        const std::string_view cell = trim((*row)[c]);
        if (cell.empty()) continue;
        double value = 0.0;
        if (!parse_double(cell, value)) {
          throw DataError(where(file, reader.line()) + ": non-numeric " + stem + " value '" + std::string(cell) + "'");
        }
        if (value < field->min || value > field->max || (field->integral && value != std::floor(value))) {
          throw DataError(where(file, reader.line()) + ": " + stem + " value " + std::string(cell) +
                          " outside admissible range");
        }
        const PlayerId& player = players[c - 1];
        auto [it, inserted] = merged.try_emplace({player, date});
        SubjectiveReport& report = it->second;
        if (inserted) {
          report.player = player;
          report.date = date;
        }
        auto& slot = report.*(field->member);
        if (slot) {
          throw DataError(where(file, reader.line()) + ": duplicate " + stem + " for player " + player.str() +
                          " on " + date.iso());
        }
        slot = value;
      }
    }
  }

  std::vector<SubjectiveReport> out;
  out.reserve(merged.size());
  for (auto& [key, report] : merged) out.push_back(std::move(report));
  return out;
}

void write_subjective(std::span<const SubjectiveReport> reports, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& field : subjective_fields()) {
    std::set<PlayerId> players;
    std::map<Date, std::map<PlayerId, double>> by_date;
    for (const auto& r : reports) {
      if (const auto& v = r.*(field.member)) {
        players.insert(r.player);
        auto [it, inserted] = by_date[r.date].emplace(r.player, *v);
        if (!inserted) {
          throw DataError("duplicate " + std::string(field.name) + " for " + r.player.str() + " on " + r.date.iso());
        }
      }
    }
    if (players.empty()) continue;
    std::string text = "date";
    for (const auto& p : players) text += "," + csv::escape(p.str());
    text += '\n';
    for (const auto& [date, values] : by_date) {
      text += date.iso();
      for (const auto& p : players) {
        text += ',';
        if (auto it = values.find(p); it != values.end()) text += format_double(it->second);
      }
      text += '\n';
    }
    csv::write_text(dir / (std::string(field.name) + ".csv"), text);
  }
}

// ---------------------------------------------------------------------------
// GPS
// ---------------------------------------------------------------------------

GpsSessionKey parse_session_filename(std::string_view stem) {
  const auto last = stem.rfind('_');
  if (last == std::string_view::npos || last == 0) {
    throw DataError("GPS file name '" + std::string(stem) + "' is not <player>_<date>_<session>");
  }
  const auto mid = stem.rfind('_', last - 1);
  if (mid == std::string_view::npos || mid == 0 || last + 1 >= stem.size()) {
    throw DataError("GPS file name '" + std::string(stem) + "' is not <player>_<date>_<session>");
  }
  GpsSessionKey key;
  key.player = PlayerId(std::string(stem.substr(0, mid)));
  key.date = Date::parse(stem.substr(mid + 1, last - mid - 1));
  key.session = std::string(stem.substr(last + 1));
  return key;
}

GpsReader::GpsReader(const fs::path& dir) : files_(list_csv(dir)) {}

std::optional<GpsSession> GpsReader::next_session() {
  if (cursor_ >= files_.size()) return std::nullopt;
  GpsSession session = read_file(files_[cursor_++], &warnings_);
  skipped_ += session.skipped_rows;
  return session;
}

GpsSession GpsReader::read_file(const fs::path& file, std::vector<std::string>* warnings) {
  constexpr std::size_t kMaxWarnings = 50;
  GpsSession session;
  session.file = file;
  session.key = parse_session_filename(file.stem().string());

  csv::Reader reader(file);
  auto header = reader.next();
  if (!header) throw DataError(file.string() + ": missing header");
  std::array<std::optional<std::size_t>, kHeader.size()> column{};
  for (std::size_t c = 0; c < header->size(); ++c) {
    const auto name = trim((*header)[c]);
    for (std::size_t k = 0; k < kHeader.size(); ++k) {
      if (name == kHeader[k]) column[k] = c;
    }
  }
  for (std::size_t k = 0; k < kMandatoryColumns; ++k) {
    if (!column[k]) throw DataError(file.string() + ": missing mandatory column '" + std::string(kHeader[k]) + "'");
  }

  auto skip = [&](const std::string& reason) {
    ++session.skipped_rows;
    if (warnings && warnings->size() < kMaxWarnings) warnings->push_back(where(file, reader.line()) + ": " + reason);
  };

  while (auto row = reader.next()) {
    auto cell = [&](std::size_t k) -> std::string_view {
      if (!column[k] || *column[k] >= row->size()) return {};
      return trim((*row)[*column[k]]);
    };
    if (row->size() != header->size()) {
      skip("expected " + std::to_string(header->size()) + " fields");
      continue;
    }
    GpsSample s;
    s.player = session.key.player;
    try {
      s.timestamp = Timestamp::parse(cell(0));
    } catch (const DataError&) {
      skip("bad timestamp");
      continue;
    }
    if (!parse_double(cell(1), s.lat) || !parse_double(cell(2), s.lon) || !parse_double(cell(3), s.speed_kmh)) {
      skip("bad lat/lon/speed");
      continue;
    }
    bool ok = true;
    if (auto v = cell(4); !v.empty()) {
      double hr = 0.0;
      ok = parse_double(v, hr) && hr > 0.0;
      if (ok) s.heart_rate_bpm = hr;
    }
    if (auto v = cell(5); ok && !v.empty()) {
      long long sats = 0;
      ok = parse_int(v, sats) && sats >= 0;
      if (ok) s.satellites = static_cast<int>(sats);
    }
    if (auto v = cell(6); ok && !v.empty()) {
      double hdop = 0.0;
      ok = parse_double(v, hdop) && hdop >= 0.0;
      if (ok) s.hdop = hdop;
    }
    if (!ok) {
      skip("bad optional field");
      continue;
    }
    session.samples.push_back(std::move(s));
  }
  return session;
}

void write_gps_file(const fs::path& file, std::span<const GpsSample> samples) {
  std::ostringstream out;
  for (std::size_t k = 0; k < GpsReader::kHeader.size(); ++k) out << (k ? "," : "") << GpsReader::kHeader[k];
  out << '\n';
  for (const auto& s : samples) {
    out << s.timestamp.iso() << ',' << format_double(s.lat) << ',' << format_double(s.lon) << ','
        << format_double(s.speed_kmh) << ',' << optional_cell(s.heart_rate_bpm) << ','
        << (s.satellites ? std::to_string(*s.satellites) : std::string()) << ',' << optional_cell(s.hdop) << '\n';
  }
  csv::write_text(file, out.str());
}

// ---------------------------------------------------------------------------
// Plausibility
// ---------------------------------------------------------------------------

double RetentionStats::retention() const noexcept {
  if (total == 0) return 1.0;
  return static_cast<double>(kept) / static_cast<double>(total);
}

RetentionStats& RetentionStats::merge(const RetentionStats& other) {
  total += other.total;
  kept += other.kept;
  for (const auto& [rule, n] : other.drops) drops[rule] += n;
  return *this;
}

std::vector<std::string_view> PlausibilityFilter::violations(const GpsSample& s) const {
  std::vector<std::string_view> out;
  if (!(s.lat >= cfg_.lat_min && s.lat <= cfg_.lat_max)) out.push_back(kRuleLat);
  if (!(s.lon >= cfg_.lon_min && s.lon <= cfg_.lon_max)) out.push_back(kRuleLon);
  if (s.speed_kmh < 0.0 || (cfg_.speed_max_kmh && s.speed_kmh > *cfg_.speed_max_kmh)) out.push_back(kRuleSpeed);
  if (cfg_.min_satellites && s.satellites && *s.satellites < *cfg_.min_satellites) out.push_back(kRuleSatellites);
  if (cfg_.max_hdop && s.hdop && *s.hdop > *cfg_.max_hdop) out.push_back(kRuleHdop);
  return out;
}

bool PlausibilityFilter::accept(const GpsSample& s, RetentionStats& stats) const {
  ++stats.total;
  const auto rules = violations(s);
  for (auto rule : rules) ++stats.drops[std::string(rule)];
  if (!rules.empty()) return false;
  ++stats.kept;
  return true;
}

std::pair<std::vector<GpsSample>, RetentionStats> filter_plausible(std::span<const GpsSample> samples,
                                                                   const PlausibilityConfig& cfg) {
  const PlausibilityFilter filter(cfg);
  std::pair<std::vector<GpsSample>, RetentionStats> out;
  for (const auto& s : samples) {
    if (filter.accept(s, out.second)) out.first.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Match statistics
// ---------------------------------------------------------------------------

const std::vector<std::string>& match_attribute_catalog() {
  static const std::vector<std::string> catalog = {
      "minutes_played",   "goals",
      "expected_goals",   "assists",
      "expected_assists", "shots",
      "shots_on_target",  "shot_assists",
      "passes",           "passes_accurate",
      "key_passes",       "long_passes",
      "long_passes_accurate", "crosses",
      "crosses_accurate", "dribbles",
      "dribbles_successful", "duels",
      "duels_won",        "aerial_duels",
      "aerial_duels_won", "defensive_duels",
      "defensive_duels_won", "tackles",
      "tackles_successful", "challenges",
      "challenges_won",   "interceptions",
      "clearances",       "ball_recoveries",
      "ball_losses",      "fouls",
      "fouls_suffered",   "yellow_cards",
      "red_cards",        "offsides",
      "touches_in_box",   "progressive_runs",
  };
  return catalog;
}

std::vector<MatchStats> read_match_stats(const fs::path& file) {
  const auto& catalog = match_attribute_catalog();
  csv::Reader reader(file);
  auto header = reader.next();
  if (!header || header->size() != catalog.size() + 2 || trim((*header)[0]) != "player" ||
      trim((*header)[1]) != "date") {
    throw DataError(file.string() + ": header must be player,date followed by the " +
                    std::to_string(catalog.size()) + " match attributes");
  }
  for (std::size_t k = 0; k < catalog.size(); ++k) {
    if (trim((*header)[k + 2]) != catalog[k]) {
      throw DataError(file.string() + ": column " + std::to_string(k + 3) + " is '" + (*header)[k + 2] +
                      "', expected '" + catalog[k] + "'");
    }
  }
  std::vector<MatchStats> out;
  std::set<std::pair<PlayerId, Date>> seen;
  while (auto row = reader.next()) {
    if (row->size() != header->size()) throw DataError(where(file, reader.line()) + ": wrong field count");
    MatchStats m;
    try {
      m.player = PlayerId(std::string(trim((*row)[0])));
      m.date = Date::parse(trim((*row)[1]));
    } catch (const DataError& e) {
      throw DataError(where(file, reader.line()) + ": " + e.what());
    }
    m.values.resize(catalog.size());
    for (std::size_t k = 0; k < catalog.size(); ++k) {
      const auto cell = trim((*row)[k + 2]);
      if (cell.empty()) continue;
      double v = 0.0;
      if (!parse_double(cell, v) || v < 0.0) {
        throw DataError(where(file, reader.line()) + ": invalid " + catalog[k] + " value '" + std::string(cell) + "'");
      }
      m.values[k] = v;
    }
    if (!seen.insert({m.player, m.date}).second) {
      throw DataError(where(file, reader.line()) + ": duplicate match entry for " + m.player.str() + " on " +
                      m.date.iso());
    }
    out.push_back(std::move(m));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return std::tie(a.player, a.date) < std::tie(b.player, b.date); });
  return out;
}

void write_match_stats(std::span<const MatchStats> stats, const fs::path& file) {
  std::string text = "player,date";
  for (const auto& name : match_attribute_catalog()) text += "," + name;
  text += '\n';
  for (const auto& m : stats) {
    text += csv::escape(m.player.str()) + "," + m.date.iso();
    for (const auto& v : m.values) text += "," + optional_cell(v);
    text += '\n';
  }
  csv::write_text(file, text);
}

// ---------------------------------------------------------------------------
// Injuries
// ---------------------------------------------------------------------------

std::vector<RawInjuryRow> read_injury_rows(const fs::path& file) {
  csv::Reader reader(file);
  auto header = reader.next();
  static const csv::Row expected = {"name", "date", "cause", "activity", "area"};
  if (!header || header->size() != expected.size() ||
      !std::equal(expected.begin(), expected.end(), header->begin(),
                  [](const std::string& a, const std::string& b) { return a == trim(b); })) {
    throw DataError(file.string() + ": header must be name,date,cause,activity,area");
  }
  std::vector<RawInjuryRow> rows;
  while (auto row = reader.next()) {
    if (row->size() != expected.size()) throw DataError(where(file, reader.line()) + ": wrong field count");
    RawInjuryRow r;
    r.name = std::string(trim((*row)[0]));
    try {
      r.date = Date::parse(trim((*row)[1]));
    } catch (const DataError& e) {
      throw DataError(where(file, reader.line()) + ": " + e.what());
    }
    auto categorical = [](std::string_view v) { return v.empty() ? std::string("unknown") : std::string(v); };
    r.cause = categorical(trim((*row)[2]));
    r.activity = categorical(trim((*row)[3]));
    r.area = categorical(trim((*row)[4]));
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    char32_t cp = c;
    if (c >= 0xF0 && c < 0xF8) {
      len = 4;
      cp = c & 0x07;
    } else if (c >= 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if (c >= 0xC0) {
      len = 2;
      cp = c & 0x1F;
    }
    bool valid = len == 1 || i + len <= s.size();
    for (std::size_t k = 1; valid && k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      valid = (cc & 0xC0) == 0x80;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!valid) {
      out.push_back(c);
      ++i;
    } else {
      out.push_back(cp);
      i += len;
    }
  }
  return out;
}

}  // namespace

std::size_t levenshtein(std::string_view a, std::string_view b) {
  const std::u32string x = decode_utf8(a);
  const std::u32string y = decode_utf8(b);
  std::vector<std::size_t> prev(y.size() + 1), cur(y.size() + 1);
  for (std::size_t j = 0; j <= y.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

std::string normalize_name(std::string_view name) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(name)) {
    if (c == ' ' || c == '\t') {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out += ' ';
    pending_space = false;
    out += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
  }
  return out;
}

LinkResult link_injuries(std::span<const RawInjuryRow> rows, std::span<const RosterEntry> roster) {
  LinkResult result;
  std::vector<std::string> canonical;
  canonical.reserve(roster.size());
  for (const auto& entry : roster) canonical.push_back(normalize_name(entry.name));

  for (const auto& row : rows) {
    if (roster.empty()) {
      result.unmatched.push_back({row, {}, 0, "empty_roster"});
      continue;
    }
    const std::string name = normalize_name(row.name);
    std::size_t best = SIZE_MAX;
    std::vector<std::size_t> best_idx;
    for (std::size_t k = 0; k < roster.size(); ++k) {
      const std::size_t d = levenshtein(name, canonical[k]);
      if (d < best) {
        best = d;
        best_idx.assign(1, k);
      } else if (d == best && roster[k].id != roster[best_idx.front()].id) {
        best_idx.push_back(k);
      }
    }
    std::vector<RosterEntry> candidates;
    for (auto k : best_idx) candidates.push_back(roster[k]);
    if (best_idx.size() > 1) {
      result.unmatched.push_back({row, std::move(candidates), best, "tie"});
      continue;
    }
    const std::size_t length = decode_utf8(canonical[best_idx.front()]).size();
    const auto cutoff = static_cast<std::size_t>(std::ceil(0.3 * static_cast<double>(length)));
    if (best > cutoff) {
      result.unmatched.push_back({row, std::move(candidates), best, "too_distant"});
      continue;
    }
    result.events.push_back({roster[best_idx.front()].id, row.date, row.cause, row.activity, row.area,
                             body_region_for(row.area)});
  }
  std::stable_sort(result.events.begin(), result.events.end(), [](const auto& a, const auto& b) {
    return std::tie(a.player, a.date) < std::tie(b.player, b.date);
  });
  return result;
}

std::string body_region_for(std::string_view area) {
  static const std::map<std::string, std::string, std::less<>> table = {
      {"head", "head_neck"},        {"face", "head_neck"},        {"neck", "head_neck"},
      {"cervical spine", "head_neck"}, {"shoulder", "upper_limb"}, {"upper arm", "upper_limb"},
      {"elbow", "upper_limb"},      {"forearm", "upper_limb"},    {"wrist", "upper_limb"},
      {"hand", "upper_limb"},       {"finger", "upper_limb"},     {"thumb", "upper_limb"},
      {"chest", "trunk"},           {"sternum", "trunk"},         {"ribs", "trunk"},
      {"abdomen", "trunk"},         {"upper back", "trunk"},      {"lower back", "trunk"},
      {"back", "trunk"},            {"thoracic spine", "trunk"},  {"lumbar spine", "trunk"},
      {"pelvis", "trunk"},          {"sacrum", "trunk"},          {"hip", "lower_limb"},
      {"groin", "lower_limb"},      {"thigh", "lower_limb"},      {"hamstring", "lower_limb"},
      {"quadriceps", "lower_limb"}, {"adductor", "lower_limb"},   {"knee", "lower_limb"},
      {"lower leg", "lower_limb"},  {"calf", "lower_limb"},       {"shin", "lower_limb"},
      {"achilles", "lower_limb"},   {"achilles tendon", "lower_limb"}, {"ankle", "lower_limb"},
      {"foot", "lower_limb"},       {"toe", "lower_limb"},        {"heel", "lower_limb"},
      {"unknown", "unknown"},
  };
  const std::string key = normalize_name(area);
  if (auto it = table.find(key); it != table.end()) return it->second;
  return "other";
}

}  // namespace injuryrisk::ingest
