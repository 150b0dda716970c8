#include "stages.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>

#include "injuryrisk/common.hpp"
#include "injuryrisk/csv.hpp"
#include "injuryrisk/hash.hpp"
#include "injuryrisk/random.hpp"

namespace injuryrisk::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Timer {
 public:
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void require_input(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw ConfigError(what + " not found: " + p.string());
}

void require_upstream(const fs::path& p, std::string_view command) {
  if (!fs::exists(p)) {
    throw Error(p.string() + " does not exist; run `" + std::string(command) + "` first");
  }
}

std::string hash_path(const fs::path& p) { return fs::is_directory(p) ? hash_tree(p) : hash_file(p); }

json hashes(const std::vector<fs::path>& paths) {
  json out = json::object();
  for (const auto& p : paths) out[p.generic_string()] = hash_path(p);
  return out;
}

json manifest(std::string_view stage, const GlobalConfig& cfg, json inputs, json outputs, json details,
              const Timer& timer) {
  return {{"stage", stage},
          {"version", kVersion},
          {"seed", cfg.seed},
          {"inputs", std::move(inputs)},
          {"outputs", std::move(outputs)},
          {"config", cfg.snapshot()},
          {"details", std::move(details)},
          {"timings_ms", {{"total", timer.ms()}}}};
}

void write_json(const fs::path& p, const json& j) { csv::write_text(p, j.dump(2) + "\n"); }

fs::path sibling(const fs::path& file, std::string_view name) { return file.parent_path() / name; }

}  // namespace

std::string hash_tree(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Fnv1a h;
  for (const auto& f : files) h.add(fs::relative(f, dir).generic_string()).add(std::string_view("\0", 1)).add(hash_file(f));
  return h.hex();
}

StageOutcome preprocess(const GlobalConfig& cfg) {
  Timer timer;
  const auto& p = cfg.paths;
  require_input(p.subjective_dir, "subjective report directory");
  require_input(p.gps_dir, "GPS session directory");
  require_input(p.match_stats, "match statistics file");
  require_input(p.injuries, "injury report file");

  const auto subjective = ingest::read_subjective(p.subjective_dir);

  ingest::GpsReader reader(p.gps_dir);
  ingest::RetentionStats retention;
  std::vector<features::SessionAggregate> sessions;
  std::size_t empty_sessions = 0;
  std::vector<std::string> hr_unavailable;
  while (auto session = reader.next_session()) {
    auto [kept, stats] = ingest::filter_plausible(session->samples, cfg.plausibility);
    retention.merge(stats);
    if (kept.empty()) {
      ++empty_sessions;
      continue;
    }
    auto agg = features::aggregate_raw_session(session->key.player, session->key.date, std::move(kept), cfg.zones);
    if (agg.hr_zones_unavailable) hr_unavailable.push_back(agg.player.str());
    sessions.push_back(std::move(agg));
  }
  std::sort(hr_unavailable.begin(), hr_unavailable.end());
  hr_unavailable.erase(std::unique(hr_unavailable.begin(), hr_unavailable.end()), hr_unavailable.end());

  const auto matches = ingest::read_match_stats(p.match_stats);
  const auto raw_injuries = ingest::read_injury_rows(p.injuries);
  const auto linked = ingest::link_injuries(raw_injuries, cfg.roster);

  auto fstore = store::fuse({subjective, sessions, matches, linked.events}, cfg.load_model);
  const auto report = store::impute(fstore.records, fstore.catalog, cfg.imputation);
  store::save_store(fstore, p.store);

  std::string unmatched = "name,date,reason,distance,candidates\n";
  for (const auto& u : linked.unmatched) {
    std::string candidates;
    for (const auto& c : u.candidates) candidates += (candidates.empty() ? "" : ";") + c.id.str();
    unmatched += csv::join({u.row.name, u.row.date.iso(), u.reason, std::to_string(u.distance), candidates}) + "\n";
  }
  const auto unmatched_path = sibling(p.store, "unmatched_injuries.csv");
  csv::write_text(unmatched_path, unmatched);

  json drops = json::object();
  for (const auto& [rule, n] : retention.drops) drops[rule] = n;
  json details = {{"gps",
                   {{"sessions", reader.session_count()},
                    {"sessions_without_plausible_samples", empty_sessions},
                    {"skipped_rows", reader.skipped_rows()},
                    {"samples_total", retention.total},
                    {"samples_kept", retention.kept},
                    {"retention", retention.retention()},
                    {"empty_input", retention.empty_input()},
                    {"drops", drops},
                    {"hr_zones_unavailable", hr_unavailable}}},
                  {"subjective_reports", subjective.size()},
                  {"match_entries", matches.size()},
                  {"injuries", {{"rows", raw_injuries.size()}, {"linked", linked.events.size()}, {"unmatched", linked.unmatched.size()}}},
                  {"store",
                   {{"records", fstore.records.size()},
                    {"off_session_injuries", fstore.off_session_injuries.size()},
                    {"imputation", store::to_string(cfg.imputation)},
                    {"imputed_cells", report.filled_cells},
                    {"global_fallbacks", report.global_fallbacks}}}};
  auto m = manifest("preprocess", cfg,
                    hashes({p.subjective_dir, p.gps_dir, p.match_stats, p.injuries}),
                    hashes({p.store, sibling(p.store, store::kOffSessionFile), unmatched_path}), details, timer);
  write_json(sibling(p.store, "preprocess_manifest.json"), m);
  return {m, true};
}

StageOutcome build_windows(const GlobalConfig& cfg) {
  Timer timer;
  const auto& p = cfg.paths;
  require_upstream(p.store, "preprocess");
  const auto side = sibling(p.store, store::kOffSessionFile);
  json window_cfg = cfg.snapshot().at("window");
  window_cfg["seed"] = cfg.window.seed;

  Fnv1a input_hash;
  input_hash.add(hash_file(p.store)).add(fs::exists(side) ? hash_file(side) : std::string()).add(window_cfg.dump());
  const auto manifest_path = sibling(p.windows, "build_windows_manifest.json");

  bool cache_hit = false;
  if (fs::exists(p.windows) && fs::exists(manifest_path)) {
    try {
      std::ifstream in(manifest_path);
      const json old = json::parse(in);
      cache_hit = old.at("details").at("input_hash") == input_hash.hex() &&
                  old.at("outputs").at(p.windows.generic_string()) == hash_file(p.windows);
    } catch (const std::exception&) {
      cache_hit = false;
    }
  }
  std::size_t count = 0, positives = 0;
  if (!cache_hit) {
    const auto fstore = store::load_store(p.store);
    const auto windows = windowing::build_windows(fstore, cfg.window);
    windowing::write_windows_csv(p.windows, windows);
    count = windows.samples.size();
    for (const auto& s : windows.samples) positives += s.label;
  } else {
    const auto windows = windowing::read_windows_csv(p.windows);
    count = windows.samples.size();
    for (const auto& s : windows.samples) positives += s.label;
  }
  json details = {{"input_hash", input_hash.hex()},
                  {"cache_hit", cache_hit},
                  {"windows", count},
                  {"positives", positives},
                  {"n_in", cfg.window.n_in},
                  {"n_out", cfg.window.n_out}};
  auto m = manifest("build-windows", cfg, hashes({p.store}), hashes({p.windows}), details, timer);
  write_json(manifest_path, m);
  return {m, true};
}

StageOutcome synth(const GlobalConfig& cfg, bool force) {
  Timer timer;
  const auto& p = cfg.paths;
  require_upstream(p.windows, "build-windows");
  const auto windows = windowing::read_windows_csv(p.windows);
  if (windows.n_in != cfg.window.n_in) {
    throw Error(p.windows.string() + " was built with n_in=" + std::to_string(windows.n_in) + " but the config says " +
                std::to_string(cfg.window.n_in) + "; rerun `build-windows`");
  }
  const auto summaries = windowing::materialize_rounds(windows, cfg.window, cfg.synthesis, p.rounds_dir, force);
  std::size_t added_pos = 0, added_neg = 0;
  std::vector<std::string> fallbacks;
  for (const auto& s : summaries) {
    added_pos += s.added_positive;
    added_neg += s.added_negative;
    if (s.positive_synthesizer == "jitter" || s.negative_synthesizer == "jitter") {
      fallbacks.push_back("round_" + std::to_string(s.round));
    }
  }
  json details = {{"rounds", summaries.size()},
                  {"event_proportion", cfg.synthesis.event_proportion},
                  {"multiplier", cfg.synthesis.multiplier},
                  {"synthesizer", cfg.synthesis.kind},
                  {"enabled", cfg.synthesis.enabled},
                  {"added_positive_total", added_pos},
                  {"added_negative_total", added_neg},
                  {"jitter_fallback_rounds", fallbacks}};
  const auto m_path = p.rounds_dir / "synth_manifest.json";
  auto m = manifest("synth", cfg, hashes({p.windows}), json::object(), details, timer);
  m["outputs"][p.rounds_dir.generic_string()] = hash_tree(p.rounds_dir);
  write_json(m_path, m);
  return {m, true};
}

StageOutcome train(const GlobalConfig& cfg, const TrainOptions& options) {
  Timer timer;
  const auto& p = cfg.paths;
  const auto round_dir = p.rounds_dir / ("round_" + std::to_string(options.round));
  require_upstream(round_dir / "train.csv", "synth");
  const auto table = windowing::read_round_csv(round_dir / "train.csv");
  const auto data = models::Dataset::from_samples(table.names, windowing::infer_n_in(table.names), table.samples);
  auto mc = cfg.models;
  if (options.model) mc.kind = *options.model;
  mc.seed = Rng::mix(cfg.seed, static_cast<std::uint64_t>(options.round));
  const auto model = models::TrainedModel::train(data, mc);
  const auto path = model.save(p.models_dir);
  json details = {{"model_id", model.id()},
                  {"kind", models::to_string(mc.kind)},
                  {"round", options.round},
                  {"train_rows", data.rows()},
                  {"train_positives", data.positives()}};
  auto m = manifest("train", cfg, hashes({round_dir / "train.csv"}), hashes({path}), details, timer);
  write_json(p.models_dir / "train_manifest.json", m);
  return {m, true};
}

StageOutcome evaluate(const GlobalConfig& cfg, const EvaluateOptions& options) {
  Timer timer;
  const auto& p = cfg.paths;
  require_upstream(p.rounds_dir / "rounds.json", "synth");
  json rounds_doc;
  {
    std::ifstream in(p.rounds_dir / "rounds.json");
    rounds_doc = json::parse(in);
  }
  const int rounds = rounds_doc.at("rounds").get<int>();
  auto mc = cfg.models;
  if (options.model) mc.kind = *options.model;

  evaluation::ExperimentResult result;
  result.config.id = std::string("E-") + std::string(models::to_string(mc.kind));
  result.config.data = rounds_doc.at("synthesis").at("enabled").get<bool>() ? "R+S" : "R";
  result.config.event_proportion = rounds_doc.at("synthesis").at("event_proportion").get<double>();
  result.config.n_in = rounds_doc.at("n_in").get<int>();
  result.config.n_out = rounds_doc.at("n_out").get<int>();
  result.config.features = cfg.window.features;
  result.config.model = mc.kind;
  bool ok = true;
  try {
    for (int k = 0; k < rounds; ++k) {
      result.rounds.push_back(evaluation::run_round(p.rounds_dir / ("round_" + std::to_string(k)), mc, k));
    }
    evaluation::aggregate(result);
  } catch (const Error& e) {
    result.rounds.clear();
    result.error = e.what();
    ok = false;
  }
  const auto out = p.results_dir / ("evaluate_" + std::string(models::to_string(mc.kind)) + ".json");
  write_json(out, evaluation::result_to_json(result, true));
  json details = {{"kind", models::to_string(mc.kind)}, {"rounds", rounds}};
  if (result.error) details["error"] = *result.error;
  auto m = manifest("evaluate", cfg, hashes({p.rounds_dir}), hashes({out}), details, timer);
  write_json(p.results_dir / ("evaluate_" + std::string(models::to_string(mc.kind)) + "_manifest.json"), m);
  if (!ok) throw Error(*result.error);
  return {m, ok};
}

StageOutcome grid(const GlobalConfig& cfg, const GridRunOptions& options) {
  Timer timer;
  const auto& p = cfg.paths;
  require_upstream(p.store, "preprocess");
  const auto fstore = store::load_store(p.store);
  evaluation::GridOptions go;
  go.window = cfg.window;
  go.synthesis = cfg.synthesis;
  go.model_defaults = cfg.models;
  go.only_cells = options.cells;
  go.force = options.force;
  const auto outcome = evaluation::run_grid(fstore, cfg.grid, go, p.results_dir);
  std::vector<std::string> failed;
  for (const auto& r : outcome.results) {
    if (r.error) {
      failed.push_back(r.config.id);
      std::cerr << "cell " << r.config.id << " failed: " << *r.error << "\n";
    }
  }
  json details = {{"cells", outcome.results.size()}, {"failed", failed}, {"rounds", cfg.grid.rounds}};
  auto m = manifest("grid", cfg, hashes({p.store}),
                    hashes({p.results_dir / "results.csv", p.results_dir / "results.json"}), details, timer);
  write_json(p.results_dir / "grid_manifest.json", m);
  return {m, outcome.failed == 0};
}

}  // namespace injuryrisk::cli
