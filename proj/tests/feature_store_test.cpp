#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "injuryrisk/csv.hpp"
#include "injuryrisk/feature_store.hpp"
#include "injuryrisk/random.hpp"

using namespace injuryrisk;
using namespace injuryrisk::store;
using fixtures::TempDir;

namespace {

const Date kD0 = Date::from_ymd(2021, 5, 1);

features::SessionAggregate session(const std::string& p, Date d, double distance) {
  features::SessionAggregate a;
  a.player = PlayerId(p);
  a.date = d;
  a.duration_s = 3600;
  a.total_distance_m = distance;
  a.speed_max_ms = 8.0;
  a.speed_mean_ms = 2.0;
  a.time_in_speed_zone[0] = 3600;
  a.sample_count = 3600;
  return a;
}

ingest::SubjectiveReport report(const std::string& p, Date d, double rpe, double minutes) {
  ingest::SubjectiveReport r;
  r.player = PlayerId(p);
  r.date = d;
  r.rpe = rpe;
  r.duration_min = minutes;
  r.fatigue = 3;
  return r;
}

ingest::MatchStats match(const std::string& p, Date d) {
  ingest::MatchStats m;
  m.player = PlayerId(p);
  m.date = d;
  m.values.assign(ingest::match_attribute_catalog().size(), 1.0);
  return m;
}

ingest::InjuryEvent injury(const std::string& p, Date d, const std::string& area = "knee") {
  return {PlayerId(p), d, "contact", "match", area, ingest::body_region_for(area)};
}

DailyRecord blank(const FeatureCatalog& cat, const std::string& p, Date d) {
  DailyRecord r;
  r.player = PlayerId(p);
  r.date = d;
  r.numeric.assign(cat.numeric_count(), std::nullopt);
  r.categorical.assign(cat.categorical_count(), "unknown");
  return r;
}

}  // namespace

TEST(Catalog, StandardShape) {
  const auto cat = FeatureCatalog::standard();
  const auto header = cat.header();
  EXPECT_EQ(header.front(), "player");
  EXPECT_EQ(header.back(), "injury");
  EXPECT_EQ(std::set<std::string>(header.begin(), header.end()).size(), header.size());
  EXPECT_EQ(cat.categorical_count(), 4u);
  EXPECT_TRUE(cat.find("acwr"));
  EXPECT_TRUE(cat.find("ctl42"));
  EXPECT_FALSE(cat.find("nope"));
  const std::vector<FeatureGroup> tl = {FeatureGroup::TL};
  for (auto i : cat.numeric_features_in(tl)) EXPECT_EQ(cat.features()[i].group, FeatureGroup::TL);
}

TEST(Catalog, RejectsDuplicateAndReservedNames) {
  EXPECT_THROW(FeatureCatalog({{"a", FeatureGroup::TL, FeatureKind::numeric}, {"a", FeatureGroup::W, FeatureKind::numeric}}),
               ConfigError);
  EXPECT_THROW(FeatureCatalog({{"injury", FeatureGroup::TL, FeatureKind::numeric}}), ConfigError);
  EXPECT_THROW(FeatureCatalog({{"player", FeatureGroup::TL, FeatureKind::numeric}}), ConfigError);
}

TEST(Fuse, SessionWithReportNoMatch) {
  const std::vector sessions = {session("p1", kD0, 5000)};
  const std::vector reports = {report("p1", kD0, 6, 60)};
  const auto s = fuse({reports, sessions, {}, {}});
  ASSERT_EQ(s.records.size(), 1u);
  const auto& r = s.records[0];
  EXPECT_EQ(r.session_type, SessionType::training);
  EXPECT_EQ(r.numeric[s.catalog.numeric_slot("srpe")], 360.0);
  EXPECT_EQ(r.numeric[s.catalog.numeric_slot("total_distance_m")], 5000.0);
  EXPECT_FALSE(r.numeric[s.catalog.numeric_slot("goals")]);
  EXPECT_EQ(r.injury, 0);
}

TEST(Fuse, InjuryOnSessionCopiesMetadata) {
  const std::vector sessions = {session("p1", kD0, 5000)};
  const std::vector injuries = {injury("p1", kD0, "hamstring")};
  const auto s = fuse({{}, sessions, {}, injuries});
  ASSERT_EQ(s.records.size(), 1u);
  EXPECT_EQ(s.records[0].injury, 1);
  EXPECT_EQ(s.records[0].categorical[s.catalog.categorical_slot("injury_area")], "hamstring");
  EXPECT_EQ(s.records[0].categorical[s.catalog.categorical_slot("body_region")], ingest::body_region_for("hamstring"));
  EXPECT_TRUE(s.off_session_injuries.empty());
}

TEST(Fuse, OffSessionInjuryGoesToSideTable) {
  const std::vector sessions = {session("p1", kD0, 5000)};
  const std::vector injuries = {injury("p1", kD0 + 2)};
  const auto s = fuse({{}, sessions, {}, injuries});
  EXPECT_EQ(s.records.size(), 1u);
  ASSERT_EQ(s.off_session_injuries.size(), 1u);
  EXPECT_EQ(s.off_session_injuries[0].date, kD0 + 2);
  EXPECT_EQ(s.injury_dates(PlayerId("p1")), std::vector<Date>{kD0 + 2});
}

TEST(Fuse, MatchesNestedLoopJoinOracle) {
  const std::vector<std::string> players = {"p1", "p2", "p3"};
  const std::vector<Date> dates = {kD0, kD0 + 1};
  std::vector<features::SessionAggregate> sessions;
  std::vector<ingest::SubjectiveReport> reports;
  std::vector<ingest::MatchStats> matches;
  std::vector<ingest::InjuryEvent> injuries;
  // Mixed presence: bit patterns per (player, date).
  int k = 0;
  for (const auto& p : players) {
    for (Date d : dates) {
      if (k % 4 != 3) sessions.push_back(session(p, d, 1000.0 * (k + 1)));
      if (k % 2 == 0) reports.push_back(report(p, d, k % 10, 30));
      if (k % 3 == 1) matches.push_back(match(p, d));
      if (k == 2 || k == 3) injuries.push_back(injury(p, d));
      ++k;
    }
  }
  const auto s = fuse({reports, sessions, matches, injuries});

  std::size_t expected_rows = 0;
  for (const auto& p : players) {
    for (Date d : dates) {
      const features::SessionAggregate* sess = nullptr;
      for (const auto& x : sessions) {
        if (x.player.str() == p && x.date == d) sess = &x;
      }
      const ingest::SubjectiveReport* rep = nullptr;
      for (const auto& x : reports) {
        if (x.player.str() == p && x.date == d) rep = &x;
      }
      bool is_match = false, injured = false;
      for (const auto& x : matches) is_match |= x.player.str() == p && x.date == d;
      for (const auto& x : injuries) injured |= x.player.str() == p && x.date == d;

      const DailyRecord* row = nullptr;
      for (const auto& r : s.records) {
        if (r.player.str() == p && r.date == d) row = &r;
      }
      if (!sess) {
        EXPECT_EQ(row, nullptr);
        continue;
      }
      ++expected_rows;
      ASSERT_NE(row, nullptr);
      EXPECT_EQ(row->numeric[s.catalog.numeric_slot("total_distance_m")], sess->total_distance_m);
      EXPECT_EQ(row->numeric[s.catalog.numeric_slot("rpe")], rep ? rep->rpe : std::nullopt);
      EXPECT_EQ(row->session_type == SessionType::match, is_match);
      EXPECT_EQ(row->injury, injured ? 1 : 0);
    }
  }
  EXPECT_EQ(s.records.size(), expected_rows);
  EXPECT_LE(s.records.size(), 6u);
  EXPECT_EQ(s.off_session_injuries.size(), 1u);  // k == 3 has no session
}

TEST(Fuse, SameDaySessionsMerged) {
  const std::vector sessions = {session("p1", kD0, 1000), session("p1", kD0, 2500)};
  const auto s = fuse({{}, sessions, {}, {}});
  ASSERT_EQ(s.records.size(), 1u);
  EXPECT_EQ(s.records[0].numeric[s.catalog.numeric_slot("total_distance_m")], 3500.0);
  EXPECT_EQ(s.records[0].numeric[s.catalog.numeric_slot("duration_s")], 7200.0);
}

TEST(Fuse, DeterministicUnderPermutation) {
  Rng rng(3);
  std::vector<features::SessionAggregate> sessions;
  std::vector<ingest::SubjectiveReport> reports;
  std::vector<ingest::InjuryEvent> injuries;
  for (int p = 1; p <= 4; ++p) {
    for (int d = 0; d < 30; ++d) {
      const auto name = "p" + std::to_string(p);
      if (rng.uniform() < 0.7) sessions.push_back(session(name, kD0 + d, rng.uniform(1000, 9000)));
      if (rng.uniform() < 0.8) reports.push_back(report(name, kD0 + d, static_cast<double>(rng.below(11)), 60));
      if (rng.uniform() < 0.05) injuries.push_back(injury(name, kD0 + d));
    }
  }
  const auto a = fuse({reports, sessions, {}, injuries});
  rng.shuffle(std::span(sessions));
  rng.shuffle(std::span(reports));
  std::reverse(injuries.begin(), injuries.end());
  const auto b = fuse({reports, sessions, {}, injuries});
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.off_session_injuries, b.off_session_injuries);
}

TEST(Fuse, LoadsUseRestDaysAsZero) {
  // Sessions on day 0 and day 6; a rest-day report does not create a row.
  const std::vector sessions = {session("p1", kD0, 1), session("p1", kD0 + 6, 1)};
  const std::vector reports = {report("p1", kD0, 5, 60), report("p1", kD0 + 3, 5, 60), report("p1", kD0 + 6, 5, 60)};
  const auto s = fuse({reports, sessions, {}, {}});
  ASSERT_EQ(s.records.size(), 2u);
  EXPECT_EQ(s.records[1].numeric[s.catalog.numeric_slot("weekly_load")], 900.0);
  EXPECT_DOUBLE_EQ(*s.records[1].numeric[s.catalog.numeric_slot("atl")], 900.0 / 7.0);
}

TEST(Impute, LinearMidpoint) {
  const auto cat = FeatureCatalog({{"x", FeatureGroup::TL, FeatureKind::numeric}});
  std::vector<DailyRecord> rows = {blank(cat, "p1", kD0), blank(cat, "p1", kD0 + 1), blank(cat, "p1", kD0 + 2)};
  rows[0].numeric[0] = 1.0;
  rows[2].numeric[0] = 3.0;
  impute(rows, cat, ImputeMethod::linear);
  EXPECT_EQ(rows[1].numeric[0], 2.0);
}

TEST(Impute, LinearBoundariesUseNearest) {
  const auto cat = FeatureCatalog({{"x", FeatureGroup::TL, FeatureKind::numeric}});
  std::vector<DailyRecord> rows;
  for (int d = 0; d < 5; ++d) rows.push_back(blank(cat, "p1", kD0 + d));
  rows[1].numeric[0] = 4.0;
  rows[3].numeric[0] = 8.0;
  impute(rows, cat, ImputeMethod::linear);
  EXPECT_EQ(rows[0].numeric[0], 4.0);
  EXPECT_EQ(rows[2].numeric[0], 6.0);
  EXPECT_EQ(rows[4].numeric[0], 8.0);
}

TEST(Impute, MedianOfPresentValues) {
  const auto cat = FeatureCatalog({{"x", FeatureGroup::TL, FeatureKind::numeric}});
  std::vector<DailyRecord> rows = {blank(cat, "p1", kD0), blank(cat, "p1", kD0 + 1), blank(cat, "p1", kD0 + 2)};
  rows[1].numeric[0] = 5.0;
  rows[2].numeric[0] = 7.0;
  impute(rows, cat, ImputeMethod::median);
  EXPECT_EQ(rows[0].numeric[0], 6.0);
}

TEST(Impute, CategoricalGapBecomesUnknown) {
  const auto cat = FeatureCatalog({{"x", FeatureGroup::TL, FeatureKind::numeric}, {"c", FeatureGroup::INJ, FeatureKind::categorical}});
  std::vector<DailyRecord> rows = {blank(cat, "p1", kD0)};
  rows[0].numeric[0] = 1.0;
  rows[0].categorical[0] = "";
  impute(rows, cat, ImputeMethod::median);
  EXPECT_EQ(rows[0].categorical[0], "unknown");
}

TEST(Impute, FullyMissingFeatureUsesGlobalMedian) {
  const auto cat = FeatureCatalog({{"x", FeatureGroup::TL, FeatureKind::numeric}});
  std::vector<DailyRecord> rows = {blank(cat, "p1", kD0), blank(cat, "p2", kD0), blank(cat, "p2", kD0 + 1),
                                   blank(cat, "p3", kD0)};
  rows[1].numeric[0] = 2.0;
  rows[2].numeric[0] = 4.0;
  rows[3].numeric[0] = 10.0;
  const auto report = impute(rows, cat, ImputeMethod::linear);
  EXPECT_EQ(rows[0].numeric[0], 4.0);
  ASSERT_EQ(report.global_fallbacks.size(), 1u);
  EXPECT_EQ(report.global_fallbacks[0], "p1:x");
}

TEST(Impute, IterativeRecoversLinearRelation) {
  const auto cat = FeatureCatalog({{"a", FeatureGroup::TL, FeatureKind::numeric},
                                   {"b", FeatureGroup::TL, FeatureKind::numeric},
                                   {"y", FeatureGroup::TL, FeatureKind::numeric}});
  Rng rng(2);
  std::vector<DailyRecord> rows;
  std::vector<double> truth;
  for (int d = 0; d < 100; ++d) {
    auto r = blank(cat, "p1", kD0 + d);
    const double a = rng.normal(), b = rng.normal();
    r.numeric[0] = a;
    r.numeric[1] = b;
    truth.push_back(2.0 * a - b + 1.0);
    if (d % 7 != 0) r.numeric[2] = truth.back();
    rows.push_back(r);
  }
  impute(rows, cat, ImputeMethod::iterative);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_NEAR(*rows[i].numeric[2], truth[i], 1e-8);
}

class ImputeProperties : public ::testing::TestWithParam<ImputeMethod> {};

TEST_P(ImputeProperties, FillsEverythingAndKeepsPresentValues) {
  const auto cat = FeatureCatalog::standard();
  Rng rng(17);
  std::vector<DailyRecord> rows;
  for (int p = 1; p <= 3; ++p) {
    for (int d = 0; d < 40; ++d) {
      auto r = blank(cat, "p" + std::to_string(p), kD0 + d * 2);
      for (auto& v : r.numeric) {
        if (rng.uniform() < 0.75) v = std::round(rng.uniform(0, 100) * 10) / 10;
      }
      rows.push_back(r);
    }
  }
  // One feature nobody ever reports.
  for (auto& r : rows) r.numeric[0].reset();
  const auto before = rows;
  const auto report = impute(rows, cat, GetParam());
  std::size_t filled = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cat.numeric_count(); ++j) {
      ASSERT_TRUE(rows[i].numeric[j]);
      if (before[i].numeric[j]) EXPECT_EQ(*rows[i].numeric[j], *before[i].numeric[j]);
      else ++filled;
    }
  }
  EXPECT_EQ(report.filled_cells, filled);
}

INSTANTIATE_TEST_SUITE_P(Methods, ImputeProperties,
                         ::testing::Values(ImputeMethod::median, ImputeMethod::linear, ImputeMethod::iterative));

TEST(Impute, MedianIdempotent) {
  const auto cat = FeatureCatalog::standard();
  Rng rng(4);
  std::vector<DailyRecord> rows;
  for (int d = 0; d < 20; ++d) {
    auto r = blank(cat, "p1", kD0 + d);
    for (auto& v : r.numeric) {
      if (rng.uniform() < 0.6) v = rng.uniform(0, 10);
    }
    rows.push_back(r);
  }
  impute(rows, cat, ImputeMethod::median);
  const auto once = rows;
  impute(rows, cat, ImputeMethod::median);
  EXPECT_EQ(rows, once);
}

TEST(Impute, UnknownMethodIsConfigError) { EXPECT_THROW(parse_impute_method("mean"), ConfigError); }

TEST(StoreFile, RoundTrip50Records) {
  const auto cat = FeatureCatalog::standard();
  Rng rng(50);
  FeatureStore s;
  s.catalog = cat;
  for (int i = 0; i < 50; ++i) {
    auto r = blank(cat, "p" + std::to_string(i % 5 + 1), kD0 + i / 5);
    for (auto& v : r.numeric) {
      if (rng.uniform() < 0.8) v = rng.normal() * 100;
    }
    r.session_type = i % 7 == 0 ? SessionType::match : SessionType::training;
    if (i % 11 == 0) {
      r.injury = 1;
      r.categorical[0] = "contact, severe";
    }
    s.records.push_back(r);
  }
  std::sort(s.records.begin(), s.records.end(),
            [](const auto& a, const auto& b) { return std::tie(a.player, a.date) < std::tie(b.player, b.date); });
  s.off_session_injuries.push_back(injury("p2", kD0 + 40));
  TempDir dir("store");
  save_store(s, dir / "store.csv");
  const auto back = load_store(dir / "store.csv", cat);
  EXPECT_EQ(back.records, s.records);
  EXPECT_EQ(back.off_session_injuries, s.off_session_injuries);
}

TEST(StoreFile, ReorderedColumnsRejectedByName) {
  const auto cat = FeatureCatalog({{"a", FeatureGroup::TL, FeatureKind::numeric}, {"b", FeatureGroup::W, FeatureKind::numeric}});
  TempDir dir("store");
  csv::write_text(dir / "s.csv", "player,date,session_type,b,a,injury\np1,2021-05-01,training,1,2,0\n");
  try {
    read_store(dir / "s.csv", cat);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos) << e.what();
  }
}

TEST(StoreFile, Catalog114ColumnsPasses) {
  // The standard catalog plus extra numeric GPS metrics up to 114 columns.
  const auto standard = FeatureCatalog::standard();
  std::vector<FeatureSpec> specs(standard.features().begin(), standard.features().end());
  const std::size_t fixed = FeatureCatalog::kKeyColumns.size() + 1;
  for (int k = 0; specs.size() + fixed < 114; ++k) {
    specs.push_back({"gps_extra_" + std::to_string(k), FeatureGroup::GPS, FeatureKind::numeric});
  }
  const FeatureCatalog cat(specs);
  ASSERT_EQ(cat.header().size(), 114u);
  FeatureStore s;
  s.catalog = cat;
  auto r = blank(cat, "p1", kD0);
  for (auto& v : r.numeric) v = 1.5;
  s.records.push_back(r);
  TempDir dir("store");
  write_store(s, dir / "s.csv");
  EXPECT_EQ(read_store(dir / "s.csv", cat), s.records);
  EXPECT_EQ(csv::read_table(dir / "s.csv").header.size(), 114u);
}
