#include "injuryrisk/windowing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "injuryrisk/csv.hpp"
#include "injuryrisk/random.hpp"
#include "injuryrisk/synthesis.hpp"

namespace injuryrisk::windowing {

namespace fs = std::filesystem;

std::string_view to_string(Provenance p) { return p == Provenance::real ? "real" : "synthetic"; }

Provenance parse_provenance(std::string_view text) {
  if (text == "real") return Provenance::real;
  if (text == "synthetic") return Provenance::synthetic;
  throw DataError("provenance must be real or synthetic, got '" + std::string(text) + "'");
}

SplitBy parse_split_by(std::string_view text) {
  if (text == "window") return SplitBy::window;
  if (text == "player") return SplitBy::player;
  throw ConfigError("split_by must be window or player, got '" + std::string(text) + "'");
}

std::string_view to_string(SplitBy s) { return s == SplitBy::window ? "window" : "player"; }

void WindowSpec::validate() const {
  if (n_in < 1 || n_out < 1) throw ConfigError("window n_in and n_out must be >= 1");
  if (max_span_days < 0) throw ConfigError("window max_span_days must be >= 0");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("window test_fraction must be in (0, 1)");
  if (rounds < 1) throw ConfigError("window rounds must be >= 1");
  if (features.empty()) throw ConfigError("window features must name at least one group");
  for (auto g : features) {
    if (g == FeatureGroup::INJ) throw ConfigError("injury metadata cannot be used as predictors");
  }
}

std::vector<std::string> flattened_names(std::span<const std::string> base_features, int n_in) {
  std::vector<std::string> names;
  names.reserve(base_features.size() * static_cast<std::size_t>(n_in));
  for (const auto& f : base_features) {
    for (int t = 1; t <= n_in; ++t) names.push_back(f + "_" + std::to_string(t));
  }
  return names;
}

int infer_n_in(std::span<const std::string> names) {
  if (names.empty()) throw DataError("empty feature name list");
  auto ends_with_1 = [](const std::string& s) { return s.size() > 2 && s.ends_with("_1"); };
  if (!ends_with_1(names.front())) throw DataError("flattened names must start with a position-1 column");
  for (std::size_t i = 1; i < names.size(); ++i) {
    if (ends_with_1(names[i])) return static_cast<int>(i);
  }
  return static_cast<int>(names.size());
}

std::vector<std::string> base_names(std::span<const std::string> names, int n_in) {
  if (n_in < 1 || names.size() % static_cast<std::size_t>(n_in) != 0) {
    throw DataError("feature count is not a multiple of the input window size");
  }
  std::vector<std::string> base;
  for (std::size_t i = 0; i < names.size(); i += static_cast<std::size_t>(n_in)) {
    base.push_back(names[i].substr(0, names[i].size() - 2));
  }
  if (flattened_names(base, n_in) != std::vector<std::string>(names.begin(), names.end())) {
    throw DataError("feature names are not in feature-major <name>_<position> layout");
  }
  return base;
}

std::vector<std::vector<double>> to_sequence(std::span<const double> x, int n_in) {
  const auto steps = static_cast<std::size_t>(n_in);
  const std::size_t per_step = x.size() / steps;
  std::vector<std::vector<double>> seq(steps, std::vector<double>(per_step));
  for (std::size_t f = 0; f < per_step; ++f) {
    for (std::size_t t = 0; t < steps; ++t) seq[t][f] = x[f * steps + t];
  }
  return seq;
}

WindowSet build_windows(const store::FeatureStore& fstore, const WindowSpec& spec) {
  spec.validate();
  const auto& cat = fstore.catalog;
  WindowSet out;
  out.n_in = spec.n_in;
  std::vector<std::size_t> slots;
  for (std::size_t idx : cat.numeric_features_in(spec.features)) {
    out.base_features.push_back(cat.features()[idx].name);
    slots.push_back(cat.slot(idx));
  }
  out.names = flattened_names(out.base_features, spec.n_in);

  std::map<PlayerId, std::vector<const store::DailyRecord*>> sessions;
  for (const auto& r : fstore.records) sessions[r.player].push_back(&r);
  std::map<PlayerId, std::vector<Date>> injuries;
  for (const auto& r : fstore.records) {
    if (r.injury) injuries[r.player].push_back(r.date);
  }
  for (const auto& e : fstore.off_session_injuries) injuries[e.player].push_back(e.date);
  for (auto& [p, dates] : injuries) std::sort(dates.begin(), dates.end());

  const auto n_in = static_cast<std::size_t>(spec.n_in);
  const auto n_out = static_cast<std::size_t>(spec.n_out);
  for (auto& [player, rows] : sessions) {
    std::sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) { return a->date < b->date; });
    if (rows.size() < n_in + n_out) continue;
    const auto& inj = injuries[player];
    for (std::size_t i = 0; i + n_in + n_out <= rows.size(); ++i) {
      const Date first = rows[i]->date;
      const Date anchor = rows[i + n_in - 1]->date;
      const Date horizon = rows[i + n_in + n_out - 1]->date;
      if (anchor - first > spec.max_span_days || horizon - anchor > spec.max_span_days) continue;

      WindowSample w;
      w.player = player;
      w.anchor_date = anchor;
      w.x.resize(slots.size() * n_in);
      for (std::size_t f = 0; f < slots.size(); ++f) {
        for (std::size_t t = 0; t < n_in; ++t) {
          const auto& v = rows[i + t]->numeric[slots[f]];
          if (!v) {
            throw PreconditionError("store not imputed: " + out.base_features[f] + " absent for " + player.str() +
                                    " on " + rows[i + t]->date.iso());
          }
          w.x[f * n_in + t] = *v;
        }
      }
      auto it = std::upper_bound(inj.begin(), inj.end(), anchor);
      w.label = it != inj.end() && *it <= horizon ? 1 : 0;
      out.samples.push_back(std::move(w));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split
// ---------------------------------------------------------------------------

namespace {

Split split_by_window(std::span<const WindowSample> samples, const WindowSpec& spec, Rng& rng) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].provenance == Provenance::real) by_class[samples[i].label ? 1 : 0].push_back(i);
  }
  std::vector<bool> in_test(samples.size(), false);
  for (int c = 0; c < 2; ++c) {
    auto& idx = by_class[static_cast<std::size_t>(c)];
    if (idx.size() < 2) {
      throw PreconditionError("class " + std::to_string(c) + " has " + std::to_string(idx.size()) +
                              " real samples; at least 2 are needed to split");
    }
    auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(idx.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t k = 0; k < n_test; ++k) in_test[idx[k]] = true;
  }
  Split out;
  for (std::size_t i = 0; i < samples.size(); ++i) (in_test[i] ? out.test : out.train).push_back(samples[i]);
  return out;
}

Split split_by_player(std::span<const WindowSample> samples, const WindowSpec& spec, Rng& rng) {
  std::map<PlayerId, std::size_t> counts;
  std::size_t real = 0;
  for (const auto& s : samples) {
    if (s.provenance == Provenance::real) {
      ++counts[s.player];
      ++real;
    }
  }
  std::vector<PlayerId> players;
  for (const auto& [p, n] : counts) players.push_back(p);
  rng.shuffle(std::span<PlayerId>(players));
  const double target = spec.test_fraction * static_cast<double>(real);
  std::map<PlayerId, bool> test_players;
  std::size_t taken = 0;
  for (const auto& p : players) {
    if (static_cast<double>(taken) >= target || test_players.size() + 1 >= players.size()) break;
    test_players[p] = true;
    taken += counts[p];
  }
  Split out;
  for (const auto& s : samples) {
    const bool test = s.provenance == Provenance::real && test_players.count(s.player);
    (test ? out.test : out.train).push_back(s);
  }
  for (int c = 0; c < 2; ++c) {
    auto has = [c](const std::vector<WindowSample>& v) {
      return std::any_of(v.begin(), v.end(), [c](const auto& s) { return s.label == c; });
    };
    if (!has(out.train) || !has(out.test)) {
      throw PreconditionError("player-level split left class " + std::to_string(c) + " absent from train or test");
    }
  }
  return out;
}

}  // namespace

Split split(std::span<const WindowSample> samples, const WindowSpec& spec, int round) {
  Rng rng = Rng::derive(spec.seed, static_cast<std::uint64_t>(round));
  return spec.split_by == SplitBy::player ? split_by_player(samples, spec, rng) : split_by_window(samples, spec, rng);
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

void write_round_csv(const fs::path& path, std::span<const std::string> names, std::span<const WindowSample> samples) {
  std::ostringstream out;
  for (const auto& n : names) out << csv::escape(n) << ',';
  out << "label,provenance\n";
  for (const auto& s : samples) {
    if (s.x.size() != names.size()) throw PreconditionError("sample width does not match header");
    for (double v : s.x) out << format_double(v) << ',';
    out << s.label << ',' << to_string(s.provenance) << '\n';
  }
  csv::write_text(path, out.str());
}

namespace {

WindowSample parse_sample_cells(const csv::Row& row, std::size_t first, std::size_t width, const std::string& at) {
  WindowSample s;
  s.x.resize(width);
  for (std::size_t k = 0; k < width; ++k) {
    if (!parse_double(row[first + k], s.x[k])) throw DataError(at + ": non-numeric feature cell");
  }
  const auto& label = row[first + width];
  if (label != "0" && label != "1") throw DataError(at + ": label must be 0 or 1");
  s.label = label == "1";
  s.provenance = parse_provenance(row[first + width + 1]);
  return s;
}

}  // namespace

RoundTable read_round_csv(const fs::path& path) {
  csv::Reader reader(path);
  auto header = reader.next();
  if (!header || header->size() < 3 || (*header)[header->size() - 2] != "label" || header->back() != "provenance") {
    throw DataError(path.string() + ": header must end with label,provenance");
  }
  RoundTable t;
  t.names.assign(header->begin(), header->end() - 2);
  while (auto row = reader.next()) {
    const std::string at = path.string() + ":" + std::to_string(reader.line());
    if (row->size() != header->size()) throw DataError(at + ": wrong field count");
    auto s = parse_sample_cells(*row, 0, t.names.size(), at);
    s.player = PlayerId(s.provenance == Provenance::real ? "unknown" : "synthetic");
    t.samples.push_back(std::move(s));
  }
  return t;
}

void write_windows_csv(const fs::path& path, const WindowSet& windows) {
  std::ostringstream out;
  out << "player,anchor_date,";
  for (const auto& n : windows.names) out << csv::escape(n) << ',';
  out << "label,provenance\n";
  for (const auto& s : windows.samples) {
    out << csv::escape(s.player.str()) << ',' << s.anchor_date.iso() << ',';
    for (double v : s.x) out << format_double(v) << ',';
    out << s.label << ',' << to_string(s.provenance) << '\n';
  }
  csv::write_text(path, out.str());
}

WindowSet read_windows_csv(const fs::path& path) {
  csv::Reader reader(path);
  auto header = reader.next();
  if (!header || header->size() < 5 || (*header)[0] != "player" || (*header)[1] != "anchor_date" ||
      (*header)[header->size() - 2] != "label" || header->back() != "provenance") {
    throw DataError(path.string() + ": header must be player,anchor_date,<features>,label,provenance");
  }
  WindowSet w;
  w.names.assign(header->begin() + 2, header->end() - 2);
  w.n_in = infer_n_in(w.names);
  w.base_features = base_names(w.names, w.n_in);
  while (auto row = reader.next()) {
    const std::string at = path.string() + ":" + std::to_string(reader.line());
    if (row->size() != header->size()) throw DataError(at + ": wrong field count");
    auto s = parse_sample_cells(*row, 2, w.names.size(), at);
    s.player = PlayerId((*row)[0]);
    s.anchor_date = Date::parse((*row)[1]);
    w.samples.push_back(std::move(s));
  }
  return w;
}

std::vector<RoundSummary> materialize_rounds(const WindowSet& windows, const WindowSpec& spec,
                                             const SynthesisOptions& synthesis, const fs::path& dir, bool force) {
  spec.validate();
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw PreconditionError(dir.string() + " is not empty (use --force to overwrite)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);

  std::vector<RoundSummary> summaries;
  nlohmann::json rounds = nlohmann::json::array();
  for (int k = 0; k < spec.rounds; ++k) {
    auto parts = split(windows.samples, spec, k);
    RoundSummary summary;
    summary.round = k;
    summary.test = parts.test.size();
    summary.train_real = static_cast<std::size_t>(std::count_if(
        parts.train.begin(), parts.train.end(), [](const auto& s) { return s.provenance == Provenance::real; }));
    std::vector<WindowSample> train = std::move(parts.train);
    if (synthesis.enabled) {
      auto balanced = synthesis::balance(train, synthesis.event_proportion, synthesis.multiplier,
                                         Rng::mix(spec.seed ^ 0x5eed5eedULL, static_cast<std::uint64_t>(k)),
                                         synthesis.kind);
      summary.added_positive = balanced.plan.add_positive;
      summary.added_negative = balanced.plan.add_negative;
      summary.positive_synthesizer = balanced.positive_synthesizer;
      summary.negative_synthesizer = balanced.negative_synthesizer;
      train = std::move(balanced.samples);
    }
    const auto round_dir = dir / ("round_" + std::to_string(k));
    write_round_csv(round_dir / "train.csv", windows.names, train);
    write_round_csv(round_dir / "test.csv", windows.names, parts.test);
    rounds.push_back({{"round", k},
                      {"train_real", summary.train_real},
                      {"test", summary.test},
                      {"added_positive", summary.added_positive},
                      {"added_negative", summary.added_negative},
                      {"positive_synthesizer", summary.positive_synthesizer},
                      {"negative_synthesizer", summary.negative_synthesizer}});
    summaries.push_back(std::move(summary));
  }
  nlohmann::json doc = {{"n_in", windows.n_in},
                        {"n_out", spec.n_out},
                        {"rounds", spec.rounds},
                        {"seed", spec.seed},
                        {"test_fraction", spec.test_fraction},
                        {"split_by", to_string(spec.split_by)},
                        {"synthesis",
                         {{"enabled", synthesis.enabled},
                          {"event_proportion", synthesis.event_proportion},
                          {"multiplier", synthesis.multiplier},
                          {"kind", synthesis.kind}}},
                        {"per_round", rounds}};
  csv::write_text(dir / "rounds.json", doc.dump(2) + "\n");
  return summaries;
}

}  // namespace injuryrisk::windowing
