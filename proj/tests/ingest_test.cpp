#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "injuryrisk/csv.hpp"
#include "injuryrisk/hash.hpp"
#include "injuryrisk/ingest.hpp"
#include "injuryrisk/random.hpp"
#include "oracles.hpp"

using namespace injuryrisk;
using namespace injuryrisk::ingest;
using fixtures::TempDir;

namespace {

GpsSample sample(double lat, double lon, double speed, std::optional<int> sats = 8, std::optional<double> hdop = 1.0) {
  GpsSample s;
  s.player = PlayerId("p1");
  s.timestamp = Timestamp(1'620'000'000'000);
  s.lat = lat;
  s.lon = lon;
  s.speed_kmh = speed;
  s.satellites = sats;
  s.hdop = hdop;
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Subjective reports

TEST(ReadSubjective, SingleCellPivot) {
  TempDir dir("subj");
  csv::write_text(dir / "rpe.csv", "date,p1\n2021-05-01,7\n");
  const auto reports = read_subjective(dir.path());
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_EQ(reports[0].player, PlayerId("p1"));
  EXPECT_EQ(reports[0].date, Date::from_ymd(2021, 5, 1));
  EXPECT_EQ(reports[0].rpe, 7.0);
  EXPECT_FALSE(reports[0].fatigue);
}

TEST(ReadSubjective, EmptyCellStaysAbsent) {
  TempDir dir("subj");
  csv::write_text(dir / "rpe.csv", "date,p1,p2\n2021-05-01,7,\n");
  const auto reports = read_subjective(dir.path());
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_EQ(reports[0].player, PlayerId("p1"));
}

TEST(ReadSubjective, MergesFilesAgainstJoinOracle) {
  TempDir dir("subj");
  // 10 rows over two files with partial overlap.
  const std::vector<std::tuple<std::string, std::string, std::string>> rpe = {
      {"2021-05-01", "7", "5"}, {"2021-05-02", "", "6"}, {"2021-05-03", "8", ""},
      {"2021-05-04", "3", "4"}, {"2021-05-05", "", ""}};
  const std::vector<std::tuple<std::string, std::string, std::string>> fatigue = {
      {"2021-05-01", "2", ""}, {"2021-05-02", "3", "4"}, {"2021-05-04", "", "5"},
      {"2021-05-06", "1", "1"}, {"2021-05-07", "", "2"}};
  auto write = [&](const std::string& name, const auto& rows) {
    std::string text = "date,p1,p2\n";
    for (const auto& [d, a, b] : rows) text += d + "," + a + "," + b + "\n";
    csv::write_text(dir / (name + ".csv"), text);
  };
  write("rpe", rpe);
  write("fatigue", fatigue);

  // Oracle: row-by-row join keyed by (player, date).
  std::map<std::pair<std::string, std::string>, std::pair<std::optional<double>, std::optional<double>>> oracle;
  for (const auto& [d, a, b] : rpe) {
    if (!a.empty()) oracle[{"p1", d}].first = std::stod(a);
    if (!b.empty()) oracle[{"p2", d}].first = std::stod(b);
  }
  for (const auto& [d, a, b] : fatigue) {
    if (!a.empty()) oracle[{"p1", d}].second = std::stod(a);
    if (!b.empty()) oracle[{"p2", d}].second = std::stod(b);
  }

  const auto reports = read_subjective(dir.path());
  ASSERT_EQ(reports.size(), oracle.size());
  for (const auto& r : reports) {
    const auto it = oracle.find({r.player.str(), r.date.iso()});
    ASSERT_NE(it, oracle.end());
    EXPECT_EQ(r.rpe, it->second.first);
    EXPECT_EQ(r.fatigue, it->second.second);
  }
  EXPECT_TRUE(std::is_sorted(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
    return std::tie(a.player, a.date) < std::tie(b.player, b.date);
  }));
}

TEST(ReadSubjective, MalformedDateNamesFileAndLine) {
  TempDir dir("subj");
  csv::write_text(dir / "rpe.csv", "date,p1\n2021-05-01,7\n2021/05/02,6\n");
  try {
    read_subjective(dir.path());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("rpe.csv:3"), std::string::npos) << e.what();
  }
}

TEST(ReadSubjective, DuplicateIsHardError) {
  TempDir dir("subj");
  csv::write_text(dir / "rpe.csv", "date,p1\n2021-05-01,7\n2021-05-01,6\n");
  EXPECT_THROW(read_subjective(dir.path()), DataError);
}

TEST(ReadSubjective, OutOfRangeRejected) {
  TempDir dir("subj");
  csv::write_text(dir / "rpe.csv", "date,p1\n2021-05-01,11\n");
  EXPECT_THROW(read_subjective(dir.path()), DataError);
}

TEST(ReadSubjective, WriteReadRoundTrip) {
  Rng rng(4);
  std::vector<SubjectiveReport> reports;
  for (int p = 1; p <= 3; ++p) {
    for (int d = 0; d < 20; ++d) {
      SubjectiveReport r;
      r.player = PlayerId("p" + std::to_string(p));
      r.date = Date::from_ymd(2021, 5, 1) + d;
      bool any = false;
      for (const auto& f : subjective_fields()) {
        if (rng.uniform() < 0.3) continue;
        double v = f.integral ? std::floor(rng.uniform(f.min, std::min(f.max, 200.0) + 1)) : rng.uniform(0, 10);
        v = std::min(v, f.max);
        r.*(f.member) = v;
        any = true;
      }
      if (any) reports.push_back(r);
    }
  }
  TempDir dir("subj");
  write_subjective(reports, dir.path());
  EXPECT_EQ(read_subjective(dir.path()), reports);
}

// ---------------------------------------------------------------------------
// GPS

TEST(GpsReader, ParsesValidFile) {
  TempDir dir("gps");
  csv::write_text(dir / "p1_2021-05-01_s1.csv",
                  "timestamp,lat,lon,speed_kmh,heart_rate_bpm,satellites,hdop\n"
                  "2021-05-01T10:00:00.000Z,59.9,10.7,5.0,120,8,1.0\n"
                  "2021-05-01T10:00:00.100Z,59.9,10.7,5.5,,8,\n"
                  "2021-05-01T10:00:00.200Z,59.9,10.7,6.0,121,,1.1\n");
  GpsReader reader(dir.path());
  auto s = reader.next_session();
  ASSERT_TRUE(s);
  EXPECT_EQ(s->samples.size(), 3u);
  EXPECT_EQ(s->key.player, PlayerId("p1"));
  EXPECT_EQ(s->key.session, "s1");
  EXPECT_FALSE(s->samples[1].heart_rate_bpm);
  EXPECT_FALSE(s->samples[2].satellites);
  EXPECT_FALSE(reader.next_session());
}

TEST(GpsReader, SkipsMalformedRow) {
  TempDir dir("gps");
  csv::write_text(dir / "p1_2021-05-01_s1.csv",
                  "timestamp,lat,lon,speed_kmh,heart_rate_bpm,satellites,hdop\n"
                  "2021-05-01T10:00:00.000Z,abc,10.7,5.0,120,8,1.0\n"
                  "2021-05-01T10:00:01.000Z,59.9,10.7,5.0,120,8,1.0\n");
  GpsReader reader(dir.path());
  const auto s = reader.next_session();
  ASSERT_TRUE(s);
  EXPECT_EQ(s->samples.size(), 1u);
  EXPECT_EQ(reader.skipped_rows(), 1u);
  ASSERT_EQ(reader.warnings().size(), 1u);
  EXPECT_NE(reader.warnings()[0].find(":2:"), std::string::npos);
}

TEST(GpsReader, MissingMandatoryColumnIsHardError) {
  TempDir dir("gps");
  csv::write_text(dir / "p1_2021-05-01_s1.csv", "timestamp,lat,lon\n2021-05-01T10:00:00.000Z,59.9,10.7\n");
  GpsReader reader(dir.path());
  EXPECT_THROW(reader.next_session(), DataError);
}

TEST(GpsReader, SessionsGroupedInFileOrder) {
  TempDir dir("gps");
  Rng rng(1);
  std::vector<std::vector<GpsSample>> files(2);
  for (int f = 0; f < 2; ++f) {
    for (int k = 0; k < 37 + f * 11; ++k) {
      GpsSample s = sample(59.9 + rng.uniform() * 1e-3, 10.7 + rng.uniform() * 1e-3, rng.uniform(0, 30));
      s.player = PlayerId(f == 0 ? "p_a" : "p2");
      s.timestamp = Timestamp(1'620'000'000'000 + k * 100);
      files[static_cast<std::size_t>(f)].push_back(s);
    }
  }
  write_gps_file(dir / "p_a_2021-05-01_s1.csv", files[0]);
  write_gps_file(dir / "p2_2021-05-02_match.csv", files[1]);

  // Oracle: count data lines per file and hash the concatenated rows.
  std::size_t lines = 0;
  for (const char* name : {"p2_2021-05-02_match.csv", "p_a_2021-05-01_s1.csv"}) {
    const auto t = csv::read_table(dir / name);
    lines += t.rows.size();
  }
  GpsReader reader(dir.path());
  EXPECT_EQ(reader.session_count(), 2u);
  std::size_t parsed = 0;
  std::vector<std::string> players;
  Fnv1a parsed_hash, expected_hash;
  while (auto s = reader.next_session()) {
    players.push_back(s->key.player.str());
    parsed += s->samples.size();
    for (const auto& x : s->samples) parsed_hash.add(x.timestamp.iso()).add(x.lat).add(x.lon).add(x.speed_kmh);
  }
  for (const auto& x : files[1]) expected_hash.add(x.timestamp.iso()).add(x.lat).add(x.lon).add(x.speed_kmh);
  for (const auto& x : files[0]) expected_hash.add(x.timestamp.iso()).add(x.lat).add(x.lon).add(x.speed_kmh);
  EXPECT_EQ(parsed, lines);
  EXPECT_EQ(players, (std::vector<std::string>{"p2", "p_a"}));
  EXPECT_EQ(parsed_hash.value(), expected_hash.value());
}

TEST(GpsReader, FilenameWithUnderscorePlayer) {
  const auto key = parse_session_filename("team_a_p7_2021-05-01_s2");
  EXPECT_EQ(key.player, PlayerId("team_a_p7"));
  EXPECT_EQ(key.date, Date::from_ymd(2021, 5, 1));
  EXPECT_EQ(key.session, "s2");
  EXPECT_THROW(parse_session_filename("p1_s1"), DataError);
}

// ---------------------------------------------------------------------------
// Plausibility

TEST(Plausibility, SpeedBelowMaxKept) {
  const auto [kept, stats] = filter_plausible(std::vector{sample(59.9, 10.7, 38.0)}, {});
  EXPECT_EQ(kept.size(), 1u);
  EXPECT_EQ(stats.retention(), 1.0);
}

TEST(Plausibility, LatitudeOutOfRangeDropped) {
  const auto [kept, stats] = filter_plausible(std::vector{sample(95.0, 10.7, 5.0)}, {});
  EXPECT_TRUE(kept.empty());
  EXPECT_EQ(stats.drops.at(std::string(kRuleLat)), 1u);
}

TEST(Plausibility, EmptyInputFlagged) {
  const auto [kept, stats] = filter_plausible(std::vector<GpsSample>{}, {});
  EXPECT_TRUE(kept.empty());
  EXPECT_TRUE(stats.empty_input());
  EXPECT_EQ(stats.retention(), 1.0);
}

TEST(Plausibility, DisabledRuleIgnored) {
  PlausibilityConfig cfg;
  cfg.speed_max_kmh.reset();
  const auto [kept, stats] = filter_plausible(std::vector{sample(59.9, 10.7, 80.0)}, cfg);
  EXPECT_EQ(kept.size(), 1u);
}

TEST(Plausibility, PlantedViolationsRetention) {
  Rng rng(71);
  std::vector<GpsSample> samples;
  for (int i = 0; i < 1000; ++i) samples.push_back(sample(59.9, 10.7, rng.uniform(0, 30)));
  std::vector<std::size_t> idx(1000);
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(std::span(idx));
  for (std::size_t k = 0; k < 71; ++k) {
    auto& s = samples[idx[k]];
    switch (k % 5) {
      case 0: s.lat = 91.0; break;
      case 1: s.lon = -181.0; break;
      case 2: s.speed_kmh = 45.0; break;
      case 3: s.satellites = 2; break;
      default: s.hdop = 9.0; s.speed_kmh = 50.0; break;  // two rules, one sample
    }
  }
  // Independent scan.
  std::size_t bad = 0;
  for (const auto& s : samples) {
    bad += (std::abs(s.lat) > 90 || std::abs(s.lon) > 180 || s.speed_kmh > 40 || s.satellites < 4 || s.hdop > 5) ? 1 : 0;
  }
  ASSERT_EQ(bad, 71u);
  const auto [kept, stats] = filter_plausible(samples, {});
  EXPECT_EQ(stats.total, 1000u);
  EXPECT_EQ(stats.kept, 929u);
  EXPECT_EQ(stats.retention(), 0.929);
  std::size_t rule_sum = 0;
  for (const auto& [rule, n] : stats.drops) rule_sum += n;
  EXPECT_EQ(rule_sum, 71u + 14u);  // the 14 double violations count twice per rule
  EXPECT_EQ(stats.dropped(), 71u);
}

TEST(Plausibility, Idempotent) {
  Rng rng(3);
  std::vector<GpsSample> samples;
  for (int i = 0; i < 500; ++i) {
    samples.push_back(sample(rng.uniform(-100, 100), rng.uniform(-200, 200), rng.uniform(0, 60),
                             static_cast<int>(rng.below(12)), rng.uniform(0, 8)));
  }
  const auto [once, s1] = filter_plausible(samples, {});
  const auto [twice, s2] = filter_plausible(once, {});
  EXPECT_EQ(once, twice);
  EXPECT_EQ(s2.retention(), 1.0);
}

TEST(Plausibility, MergeAssociativeCommutative) {
  auto stats_of = [](unsigned seed) {
    Rng rng(seed);
    std::vector<GpsSample> v;
    for (int i = 0; i < 100; ++i) v.push_back(sample(59.9, 10.7, rng.uniform(0, 50), static_cast<int>(rng.below(9))));
    return filter_plausible(v, {}).second;
  };
  const auto a = stats_of(1), b = stats_of(2), c = stats_of(3);
  RetentionStats ab_c = a;
  ab_c.merge(b).merge(c);
  RetentionStats bc = b;
  bc.merge(c);
  RetentionStats a_bc = a;
  a_bc.merge(bc);
  RetentionStats cba = c;
  cba.merge(b).merge(a);
  EXPECT_EQ(ab_c, a_bc);
  EXPECT_EQ(ab_c, cba);
}

// ---------------------------------------------------------------------------
// Levenshtein and linking

TEST(Levenshtein, Examples) {
  EXPECT_EQ(levenshtein("", "abc"), 3u);
  EXPECT_EQ(levenshtein("abc", "abc"), 0u);
  EXPECT_EQ(levenshtein("flaw", "lawn"), 2u);
  EXPECT_EQ(levenshtein("kitten", "sitting"), 3u);
  EXPECT_EQ(levenshtein("Ståle", "Stale"), 1u);
}

TEST(Levenshtein, MatchesOracleAndTriangle) {
  Rng rng(8);
  auto word = [&] {
    std::string s(rng.below(7), 'a');
    for (auto& c : s) c = static_cast<char>('a' + rng.below(4));
    return s;
  };
  for (int i = 0; i < 2000; ++i) {
    const auto a = word(), b = word(), c = word();
    const auto ab = levenshtein(a, b);
    EXPECT_EQ(ab, oracles::edit_distance(a, b));
    EXPECT_EQ(ab, levenshtein(b, a));
    EXPECT_EQ(ab == 0, a == b);
    EXPECT_LE(ab, levenshtein(a, c) + levenshtein(c, b));
  }
}

TEST(LinkInjuries, ExactAndNearMatches) {
  const std::vector<RosterEntry> roster = {{PlayerId("p1"), "Anna Berg"}, {PlayerId("p2"), "Anne Borg"}};
  const std::vector<RawInjuryRow> rows = {{"Anna Berg", Date::from_ymd(2021, 5, 1), "contact", "match", "knee"},
                                          {"Ana Berg", Date::from_ymd(2021, 5, 2), "overuse", "training", "calf"},
                                          {"  ANNA   berg ", Date::from_ymd(2021, 5, 3), "", "", ""}};
  // Brute-force all-pairs check of the expected winner.
  EXPECT_EQ(levenshtein("ana berg", "anna berg"), 1u);
  EXPECT_EQ(levenshtein("ana berg", "anne borg"), 3u);
  const auto res = link_injuries(rows, roster);
  ASSERT_EQ(res.events.size(), 3u);
  for (const auto& e : res.events) EXPECT_EQ(e.player, PlayerId("p1"));
  EXPECT_EQ(res.events[0].body_region, body_region_for("knee"));
  EXPECT_TRUE(res.unmatched.empty());
}

TEST(LinkInjuries, TieRoutedToUnmatched) {
  const std::vector<RosterEntry> roster = {{PlayerId("p1"), "Anna Berg"}, {PlayerId("p2"), "Anna Borg"}};
  const std::vector<RawInjuryRow> rows = {{"Anna Bürg", Date::from_ymd(2021, 5, 1), "", "", ""}};
  const auto res = link_injuries(rows, roster);
  EXPECT_TRUE(res.events.empty());
  ASSERT_EQ(res.unmatched.size(), 1u);
  EXPECT_EQ(res.unmatched[0].reason, "tie");
  EXPECT_EQ(res.unmatched[0].candidates.size(), 2u);
}

TEST(LinkInjuries, TooDistantRoutedToUnmatched) {
  const std::vector<RosterEntry> roster = {{PlayerId("p1"), "Anna Berg"}};
  // ceil(0.3 * 9) = 3.
  const std::vector<RawInjuryRow> rows = {{"Anxa Bexg", Date::from_ymd(2021, 5, 1), "", "", ""},
                                          {"Axxa Bxxg", Date::from_ymd(2021, 5, 1), "", "", ""},
                                          {"Unknown Visitor", Date::from_ymd(2021, 5, 2), "", "", ""}};
  const auto res = link_injuries(rows, roster);
  EXPECT_EQ(res.events.size(), 1u);
  ASSERT_EQ(res.unmatched.size(), 2u);
  EXPECT_EQ(res.unmatched[0].reason, "too_distant");
  EXPECT_EQ(res.unmatched[0].distance, 4u);
}

TEST(LinkInjuries, EmptyRoster) {
  const std::vector<RawInjuryRow> rows = {{"Anna", Date::from_ymd(2021, 5, 1), "", "", ""}};
  const auto res = link_injuries(rows, {});
  ASSERT_EQ(res.unmatched.size(), 1u);
  EXPECT_EQ(res.unmatched[0].reason, "empty_roster");
}

TEST(BodyRegion, TotalFunction) {
  EXPECT_EQ(body_region_for("unheard of"), "other");
  EXPECT_EQ(body_region_for("hamstring"), body_region_for("hamstring"));
  EXPECT_NE(body_region_for("hamstring"), "other");
}

// ---------------------------------------------------------------------------
// Match statistics and injury files

TEST(MatchStats, CatalogHas38Attributes) { EXPECT_EQ(match_attribute_catalog().size(), 38u); }

TEST(MatchStats, RoundTrip) {
  Rng rng(2);
  std::vector<MatchStats> stats;
  for (int p = 1; p <= 3; ++p) {
    MatchStats m;
    m.player = PlayerId("p" + std::to_string(p));
    m.date = Date::from_ymd(2021, 5, 7);
    for (std::size_t k = 0; k < match_attribute_catalog().size(); ++k) {
      if (rng.uniform() < 0.1) m.values.emplace_back();
      else m.values.emplace_back(static_cast<double>(rng.below(10)));
    }
    stats.push_back(m);
  }
  TempDir dir("match");
  write_match_stats(stats, dir / "m.csv");
  EXPECT_EQ(read_match_stats(dir / "m.csv"), stats);
}

TEST(MatchStats, WrongHeaderRejected) {
  TempDir dir("match");
  csv::write_text(dir / "m.csv", "player,date,goals\np1,2021-05-01,1\n");
  EXPECT_THROW(read_match_stats(dir / "m.csv"), DataError);
}

TEST(InjuryRows, ReadAndValidateHeader) {
  TempDir dir("inj");
  csv::write_text(dir / "i.csv", "name,date,cause,activity,area\nAnna Berg,2021-05-01,contact,match,knee\n");
  const auto rows = read_injury_rows(dir / "i.csv");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].area, "knee");
  csv::write_text(dir / "bad.csv", "name,date\nAnna,2021-05-01\n");
  EXPECT_THROW(read_injury_rows(dir / "bad.csv"), DataError);
}
