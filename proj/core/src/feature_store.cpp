#include "injuryrisk/feature_store.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "injuryrisk/csv.hpp"

namespace injuryrisk::store {

namespace fs = std::filesystem;

std::string_view to_string(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::TL: return "TL";
    case FeatureGroup::W: return "W";
    case FeatureGroup::GPS: return "GPS";
    case FeatureGroup::MATCH: return "MATCH";
    case FeatureGroup::INJ: return "INJ";
  }
  return "?";
}

FeatureGroup parse_group(std::string_view text) {
  for (auto g : {FeatureGroup::TL, FeatureGroup::W, FeatureGroup::GPS, FeatureGroup::MATCH, FeatureGroup::INJ}) {
    if (to_string(g) == text) return g;
  }
  throw ConfigError("unknown feature group '" + std::string(text) + "' (TL, W, GPS, MATCH, INJ)");
}

std::string_view to_string(FeatureKind kind) { return kind == FeatureKind::numeric ? "numeric" : "categorical"; }

std::string_view to_string(SessionType type) { return type == SessionType::match ? "match" : "training"; }

SessionType parse_session_type(std::string_view text) {
  if (text == "training") return SessionType::training;
  if (text == "match") return SessionType::match;
  throw DataError("session_type must be training or match, got '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

FeatureCatalog::FeatureCatalog(std::vector<FeatureSpec> features) : features_(std::move(features)) {
  std::set<std::string_view> names(kKeyColumns.begin(), kKeyColumns.end());
  names.insert(kTargetColumn);
  std::size_t numeric = 0, categorical = 0;
  for (const auto& f : features_) {
    if (f.name.empty() || !names.insert(f.name).second) {
      throw ConfigError("feature catalog: duplicate or reserved name '" + f.name + "'");
    }
    slots_.push_back(f.kind == FeatureKind::numeric ? numeric++ : categorical++);
  }
  numeric_count_ = numeric;
}

FeatureCatalog FeatureCatalog::standard() {
  std::vector<FeatureSpec> f;
  auto num = [&](std::string name, FeatureGroup g) { f.push_back({std::move(name), g, FeatureKind::numeric}); };
  for (const char* n : {"rpe", "duration_min", "srpe", "daily_load", "weekly_load", "atl", "ctl28", "ctl42",
                        "monotony", "strain", "acwr"}) {
    num(n, FeatureGroup::TL);
  }
  for (const char* n : {"fatigue", "mood", "readiness", "soreness", "stress", "sleep_duration_h", "sleep_quality"}) {
    num(n, FeatureGroup::W);
  }
  for (const char* n : {"duration_s", "total_distance_m", "speed_max_ms", "speed_mean_ms"}) num(n, FeatureGroup::GPS);
  for (std::size_t z = 1; z <= features::kZoneCount; ++z) {
    num("time_in_speed_zone_" + std::to_string(z), FeatureGroup::GPS);
  }
  for (std::size_t z = 1; z <= features::kZoneCount; ++z) num("time_in_hr_zone_" + std::to_string(z), FeatureGroup::GPS);
  num("hr_mean_bpm", FeatureGroup::GPS);
  num("sample_count", FeatureGroup::GPS);
  for (const auto& n : ingest::match_attribute_catalog()) num(n, FeatureGroup::MATCH);
  for (const char* n : {"injury_cause", "injury_activity", "injury_area", "body_region"}) {
    f.push_back({n, FeatureGroup::INJ, FeatureKind::categorical});
  }
  return FeatureCatalog(std::move(f));
}

std::optional<std::size_t> FeatureCatalog::find(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t FeatureCatalog::numeric_slot(std::string_view name) const {
  const auto i = find(name);
  if (!i || features_[*i].kind != FeatureKind::numeric) {
    throw PreconditionError("no numeric feature '" + std::string(name) + "' in catalog");
  }
  return slots_[*i];
}

std::size_t FeatureCatalog::categorical_slot(std::string_view name) const {
  const auto i = find(name);
  if (!i || features_[*i].kind != FeatureKind::categorical) {
    throw PreconditionError("no categorical feature '" + std::string(name) + "' in catalog");
  }
  return slots_[*i];
}

std::vector<std::string> FeatureCatalog::header() const {
  std::vector<std::string> h(kKeyColumns.begin(), kKeyColumns.end());
  for (const auto& f : features_) h.push_back(f.name);
  h.emplace_back(kTargetColumn);
  return h;
}

std::vector<std::size_t> FeatureCatalog::numeric_features_in(std::span<const FeatureGroup> groups) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].kind == FeatureKind::numeric &&
        std::find(groups.begin(), groups.end(), features_[i].group) != groups.end()) {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<PlayerId> FeatureStore::players() const {
  std::set<PlayerId> ids;
  for (const auto& r : records) ids.insert(r.player);
  return {ids.begin(), ids.end()};
}

std::vector<Date> FeatureStore::injury_dates(const PlayerId& player) const {
  std::set<Date> dates;
  for (const auto& r : records) {
    if (r.player == player && r.injury) dates.insert(r.date);
  }
  for (const auto& e : off_session_injuries) {
    if (e.player == player) dates.insert(e.date);
  }
  return {dates.begin(), dates.end()};
}

// ---------------------------------------------------------------------------
// Fuse
// ---------------------------------------------------------------------------

namespace {

using Key = std::pair<PlayerId, Date>;

auto session_order(const features::SessionAggregate& s) {
  return std::tie(s.player, s.date, s.sample_count, s.total_distance_m, s.duration_s, s.speed_max_ms,
                  s.speed_mean_ms, s.hr_sample_count);
}

auto injury_order(const InjuryEvent& e) {
  return std::tie(e.player, e.date, e.cause, e.activity, e.area, e.body_region);
}

}  // namespace

FeatureStore fuse(const FuseInputs& in, features::LoadModel load_model) {
  FeatureStore out;
  out.catalog = FeatureCatalog::standard();
  const FeatureCatalog& cat = out.catalog;

  // Sessions define rows; merge same-day sessions in a canonical order.
  std::vector<features::SessionAggregate> sessions(in.sessions.begin(), in.sessions.end());
  std::sort(sessions.begin(), sessions.end(), [](const auto& a, const auto& b) { return session_order(a) < session_order(b); });
  std::map<Key, features::SessionAggregate> by_day;
  for (const auto& s : sessions) {
    auto [it, inserted] = by_day.try_emplace({s.player, s.date}, s);
    if (!inserted) it->second = features::merge_sessions(it->second, s);
  }

  std::map<Key, const ingest::SubjectiveReport*> reports;
  std::map<PlayerId, std::map<Date, double>> daily_load;
  for (const auto& r : in.subjective) {
    if (!reports.emplace(Key{r.player, r.date}, &r).second) {
      throw DataError("duplicate subjective report for " + r.player.str() + " on " + r.date.iso());
    }
    if (auto load = features::srpe(r.rpe, r.duration_min)) daily_load[r.player][r.date] = *load;
  }
  std::map<Key, features::TrainingLoadFeatures> loads;
  for (const auto& [player, series] : daily_load) {
    for (auto& f : features::derive_loads(series, player, load_model)) loads.emplace(Key{player, f.date}, f);
  }

  std::map<Key, const ingest::MatchStats*> matches;
  for (const auto& m : in.matches) {
    if (!matches.emplace(Key{m.player, m.date}, &m).second) {
      throw DataError("duplicate match entry for " + m.player.str() + " on " + m.date.iso());
    }
  }

  std::vector<InjuryEvent> injuries(in.injuries.begin(), in.injuries.end());
  std::sort(injuries.begin(), injuries.end(), [](const auto& a, const auto& b) { return injury_order(a) < injury_order(b); });
  std::map<Key, const InjuryEvent*> injury_on;
  for (const auto& e : injuries) injury_on.emplace(Key{e.player, e.date}, &e);  // first in canonical order wins

  auto set = [&](DailyRecord& rec, std::string_view name, std::optional<double> v) {
    rec.numeric[cat.numeric_slot(name)] = v;
  };

  for (const auto& [key, agg] : by_day) {
    DailyRecord rec;
    rec.player = key.first;
    rec.date = key.second;
    rec.numeric.assign(cat.numeric_count(), std::nullopt);
    rec.categorical.assign(cat.categorical_count(), "unknown");

    if (auto it = reports.find(key); it != reports.end()) {
      const auto& r = *it->second;
      for (const auto& field : ingest::subjective_fields()) set(rec, field.name, r.*(field.member));
      set(rec, "srpe", features::srpe(r.rpe, r.duration_min));
      set(rec, "daily_load", features::srpe(r.rpe, r.duration_min));
    }
    if (auto it = loads.find(key); it != loads.end()) {
      const auto& f = it->second;
      set(rec, "weekly_load", f.weekly_load);
      set(rec, "atl", f.atl);
      set(rec, "ctl28", f.ctl28);
      set(rec, "ctl42", f.ctl42);
      set(rec, "monotony", f.monotony);
      set(rec, "strain", f.strain);
      set(rec, "acwr", f.acwr);
    }

    set(rec, "duration_s", agg.duration_s);
    set(rec, "total_distance_m", agg.total_distance_m);
    set(rec, "speed_max_ms", agg.speed_max_ms);
    set(rec, "speed_mean_ms", agg.speed_mean_ms);
    for (std::size_t z = 0; z < features::kZoneCount; ++z) {
      set(rec, "time_in_speed_zone_" + std::to_string(z + 1), agg.time_in_speed_zone[z]);
      set(rec, "time_in_hr_zone_" + std::to_string(z + 1), agg.time_in_hr_zone[z]);
    }
    set(rec, "hr_mean_bpm", agg.hr_mean_bpm);
    set(rec, "sample_count", static_cast<double>(agg.sample_count));

    if (auto it = matches.find(key); it != matches.end()) {
      rec.session_type = SessionType::match;
      const auto& names = ingest::match_attribute_catalog();
      for (std::size_t k = 0; k < names.size(); ++k) set(rec, names[k], it->second->values.at(k));
    }

    if (auto it = injury_on.find(key); it != injury_on.end()) {
      const auto& e = *it->second;
      rec.injury = 1;
      rec.categorical[cat.categorical_slot("injury_cause")] = e.cause.empty() ? "unknown" : e.cause;
      rec.categorical[cat.categorical_slot("injury_activity")] = e.activity.empty() ? "unknown" : e.activity;
      rec.categorical[cat.categorical_slot("injury_area")] = e.area.empty() ? "unknown" : e.area;
      rec.categorical[cat.categorical_slot("body_region")] = e.body_region.empty() ? "unknown" : e.body_region;
    }
    out.records.push_back(std::move(rec));
  }

  for (const auto& e : injuries) {
    if (!by_day.count({e.player, e.date})) out.off_session_injuries.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Imputation
// ---------------------------------------------------------------------------

ImputeMethod parse_impute_method(std::string_view text) {
  if (text == "median") return ImputeMethod::median;
  if (text == "linear") return ImputeMethod::linear;
  if (text == "iterative") return ImputeMethod::iterative;
  throw ConfigError("unknown imputation method '" + std::string(text) + "' (median, linear, iterative)");
}

std::string_view to_string(ImputeMethod method) {
  switch (method) {
    case ImputeMethod::median: return "median";
    case ImputeMethod::linear: return "linear";
    case ImputeMethod::iterative: return "iterative";
  }
  return "?";
}

namespace {

std::optional<double> median_of(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void impute_linear(std::span<DailyRecord> rows, std::size_t slot) {
  std::vector<std::size_t> present;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].numeric[slot]) present.push_back(i);
  }
  if (present.empty()) return;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].numeric[slot]) continue;
    auto after = std::upper_bound(present.begin(), present.end(), i);
    if (after == present.begin()) {
      rows[i].numeric[slot] = rows[present.front()].numeric[slot];
    } else if (after == present.end()) {
      rows[i].numeric[slot] = rows[present.back()].numeric[slot];
    } else {
      const auto& lo = rows[*(after - 1)];
      const auto& hi = rows[*after];
      const double t = static_cast<double>(rows[i].date - lo.date) / static_cast<double>(hi.date - lo.date);
      rows[i].numeric[slot] = *lo.numeric[slot] + t * (*hi.numeric[slot] - *lo.numeric[slot]);
    }
  }
}

// Rounds of least squares of each originally-missing column on all others.
void impute_iterative(std::span<DailyRecord> rows, const std::vector<std::vector<bool>>& missing) {
  const std::size_t n = rows.size();
  const std::size_t p = rows.front().numeric.size();
  Eigen::MatrixXd x(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) x(i, j) = *rows[i].numeric[j];
  }
  std::vector<std::size_t> targets;
  for (std::size_t j = 0; j < p; ++j) {
    std::size_t miss = 0;
    for (std::size_t i = 0; i < n; ++i) miss += missing[i][j];
    if (miss > 0 && miss < n) targets.push_back(j);
  }
  for (int round = 0; round < kIterativeRounds; ++round) {
    for (std::size_t j : targets) {
      std::vector<Eigen::Index> observed, absent;
      for (std::size_t i = 0; i < n; ++i) (missing[i][j] ? absent : observed).push_back(static_cast<Eigen::Index>(i));
      Eigen::MatrixXd design(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
      design.col(0).setOnes();
      Eigen::Index c = 1;
      for (std::size_t k = 0; k < p; ++k) {
        if (k != j) design.col(c++) = x.col(static_cast<Eigen::Index>(k));
      }
      Eigen::MatrixXd a(static_cast<Eigen::Index>(observed.size()), design.cols());
      Eigen::VectorXd b(static_cast<Eigen::Index>(observed.size()));
      for (std::size_t r = 0; r < observed.size(); ++r) {
        a.row(static_cast<Eigen::Index>(r)) = design.row(observed[r]);
        b(static_cast<Eigen::Index>(r)) = x(observed[r], static_cast<Eigen::Index>(j));
      }
      const Eigen::VectorXd coef = a.completeOrthogonalDecomposition().solve(b);
      for (auto i : absent) {
        const double v = design.row(i).dot(coef);
        if (std::isfinite(v)) x(i, static_cast<Eigen::Index>(j)) = v;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      if (missing[i][j]) rows[i].numeric[j] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
}

}  // namespace

ImputeReport impute(std::vector<DailyRecord>& records, const FeatureCatalog& catalog, ImputeMethod method) {
  ImputeReport report;
  const std::size_t p = catalog.numeric_count();
  std::stable_sort(records.begin(), records.end(),
                   [](const auto& a, const auto& b) { return std::tie(a.player, a.date) < std::tie(b.player, b.date); });

  // Global medians for features a player never reported.
  std::vector<double> global_median(p, 0.0);
  std::vector<bool> globally_missing(p, false);
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> values;
    for (const auto& r : records) {
      if (r.numeric.at(j)) values.push_back(*r.numeric[j]);
    }
    if (auto m = median_of(std::move(values))) {
      global_median[j] = *m;
    } else {
      globally_missing[j] = true;
    }
  }
  std::vector<std::string> numeric_names(p);
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    if (catalog.features()[i].kind == FeatureKind::numeric) numeric_names[catalog.slot(i)] = catalog.features()[i].name;
  }

  std::size_t begin = 0;
  while (begin < records.size()) {
    std::size_t end = begin;
    while (end < records.size() && records[end].player == records[begin].player) ++end;
    std::span<DailyRecord> rows(records.data() + begin, end - begin);

    std::vector<std::vector<bool>> missing(rows.size(), std::vector<bool>(p));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < p; ++j) {
        missing[i][j] = !rows[i].numeric[j];
        report.filled_cells += missing[i][j];
      }
      for (auto& c : rows[i].categorical) {
        if (c.empty()) c = "unknown";
      }
    }

    for (std::size_t j = 0; j < p; ++j) {
      std::vector<double> present;
      for (const auto& r : rows) {
        if (r.numeric[j]) present.push_back(*r.numeric[j]);
      }
      if (present.empty()) {
        report.global_fallbacks.push_back(rows.front().player.str() + ":" + numeric_names[j] +
                                          (globally_missing[j] ? " (zero)" : ""));
        for (auto& r : rows) r.numeric[j] = global_median[j];
        continue;
      }
      if (method == ImputeMethod::linear) {
        impute_linear(rows, j);
      } else {
        const double m = *median_of(std::move(present));
        for (auto& r : rows) {
          if (!r.numeric[j]) r.numeric[j] = m;
        }
      }
    }
    if (method == ImputeMethod::iterative) impute_iterative(rows, missing);
    begin = end;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Store I/O
// ---------------------------------------------------------------------------

void write_store(const FeatureStore& store, const fs::path& path) {
  const auto& cat = store.catalog;
  std::ostringstream out;
  out << csv::join(cat.header()) << '\n';
  for (const auto& r : store.records) {
    if (r.numeric.size() != cat.numeric_count() || r.categorical.size() != cat.categorical_count()) {
      throw PreconditionError("record for " + r.player.str() + " on " + r.date.iso() + " does not match catalog");
    }
    out << csv::escape(r.player.str()) << ',' << r.date.iso() << ',' << to_string(r.session_type);
    for (std::size_t i = 0; i < cat.size(); ++i) {
      out << ',';
      const std::size_t s = cat.slot(i);
      if (cat.features()[i].kind == FeatureKind::numeric) {
        if (r.numeric[s]) out << format_double(*r.numeric[s]);
      } else {
        out << csv::escape(r.categorical[s]);
      }
    }
    out << ',' << r.injury << '\n';
  }
  csv::write_text(path, out.str());
}

std::vector<DailyRecord> read_store(const fs::path& path, const FeatureCatalog& catalog) {
  csv::Reader reader(path);
  const auto expected = catalog.header();
  auto header = reader.next();
  if (!header) throw DataError(path.string() + ": empty store file");
  for (std::size_t c = 0; c < std::max(expected.size(), header->size()); ++c) {
    const std::string got = c < header->size() ? (*header)[c] : "<missing>";
    const std::string want = c < expected.size() ? expected[c] : "<none>";
    if (got != want) {
      throw DataError(path.string() + ": schema mismatch at column " + std::to_string(c + 1) + ": found '" + got +
                      "', expected '" + want + "'");
    }
  }
  std::vector<DailyRecord> records;
  std::set<Key> keys;
  while (auto row = reader.next()) {
    const std::string at = path.string() + ":" + std::to_string(reader.line());
    if (row->size() != expected.size()) throw DataError(at + ": wrong field count");
    DailyRecord r;
    try {
      r.player = PlayerId((*row)[0]);
      r.date = Date::parse((*row)[1]);
      r.session_type = parse_session_type((*row)[2]);
    } catch (const DataError& e) {
      throw DataError(at + ": " + e.what());
    }
    r.numeric.assign(catalog.numeric_count(), std::nullopt);
    r.categorical.assign(catalog.categorical_count(), std::string());
    for (std::size_t i = 0; i < catalog.size(); ++i) {
      const std::string& cell = (*row)[i + 3];
      const std::size_t s = catalog.slot(i);
      if (catalog.features()[i].kind == FeatureKind::numeric) {
        if (cell.empty()) continue;
        double v = 0.0;
        if (!parse_double(cell, v)) throw DataError(at + ": column '" + catalog.features()[i].name + "' is not numeric");
        r.numeric[s] = v;
      } else {
        r.categorical[s] = cell;
      }
    }
    const std::string& target = row->back();
    if (target != "0" && target != "1") throw DataError(at + ": injury must be 0 or 1");
    r.injury = target == "1";
    if (!keys.insert({r.player, r.date}).second) {
      throw DataError(at + ": duplicate key (" + r.player.str() + ", " + r.date.iso() + ")");
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_injury_events(std::span<const InjuryEvent> events, const fs::path& path) {
  std::ostringstream out;
  out << "player,date,cause,activity,area,body_region\n";
  for (const auto& e : events) {
    out << csv::join({e.player.str(), e.date.iso(), e.cause, e.activity, e.area, e.body_region}) << '\n';
  }
  csv::write_text(path, out.str());
}

std::vector<InjuryEvent> read_injury_events(const fs::path& path) {
  const auto table = csv::read_table(path);
  const csv::Row expected = {"player", "date", "cause", "activity", "area", "body_region"};
  if (table.header != expected) throw DataError(path.string() + ": header must be " + csv::join(expected));
  std::vector<InjuryEvent> events;
  for (const auto& row : table.rows) {
    events.push_back({PlayerId(row[0]), Date::parse(row[1]), row[2], row[3], row[4], row[5]});
  }
  return events;
}

FeatureStore load_store(const fs::path& store_csv, const FeatureCatalog& catalog) {
  FeatureStore store;
  store.catalog = catalog;
  store.records = read_store(store_csv, catalog);
  const auto side = store_csv.parent_path() / kOffSessionFile;
  if (fs::exists(side)) store.off_session_injuries = read_injury_events(side);
  return store;
}

void save_store(const FeatureStore& store, const fs::path& store_csv) {
  write_store(store, store_csv);
  write_injury_events(store.off_session_injuries, store_csv.parent_path() / kOffSessionFile);
}

}  // namespace injuryrisk::store
