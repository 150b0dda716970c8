#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "injuryrisk/common.hpp"
#include "injuryrisk/feature_store.hpp"

namespace injuryrisk::windowing {

using store::FeatureGroup;

enum class Provenance { real, synthetic };
std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view text);

enum class SplitBy { window, player };
SplitBy parse_split_by(std::string_view text);
std::string_view to_string(SplitBy s);

struct WindowSpec {
  int n_in = 3;
  int n_out = 1;
  int max_span_days = 14;
  std::vector<FeatureGroup> features = {FeatureGroup::TL, FeatureGroup::W, FeatureGroup::GPS};
  double test_fraction = 0.2;
  int rounds = 30;
  std::uint64_t seed = 0;
  SplitBy split_by = SplitBy::window;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

struct WindowSample {
  PlayerId player;
  Date anchor_date;        // date of the last input session
  std::vector<double> x;   // feature-major: f_1..f_n, g_1..g_n, ...
  int label = 0;
  Provenance provenance = Provenance::real;

  friend bool operator==(const WindowSample&, const WindowSample&) = default;
};

struct WindowSet {
  std::vector<std::string> base_features;  // per-session numeric features
  std::vector<std::string> names;          // flattened, `<feature>_<position>`
  int n_in = 0;
  std::vector<WindowSample> samples;
};

/// `<f>_1 .. <f>_n` for every base feature, in order.
std::vector<std::string> flattened_names(std::span<const std::string> base_features, int n_in);
/// Recovers n_in from a flattened name list.
int infer_n_in(std::span<const std::string> names);
/// Recovers the base feature names from a flattened name list.
std::vector<std::string> base_names(std::span<const std::string> names, int n_in);

/// Sequence view of a flattened vector: out[t][f].
std::vector<std::vector<double>> to_sequence(std::span<const double> x, int n_in);

/// Sliding windows over consecutive sessions of each player. The store must
/// be imputed for the selected features.
WindowSet build_windows(const store::FeatureStore& store, const WindowSpec& spec);

struct Split {
  std::vector<WindowSample> train;
  std::vector<WindowSample> test;
};

/// Stratified random split; randomness derived from (spec.seed, round).
/// Synthetic samples are only ever placed in train.
Split split(std::span<const WindowSample> samples, const WindowSpec& spec, int round);

/// Options for training-set augmentation applied per round.
struct SynthesisOptions {
  bool enabled = false;
  double event_proportion = 0.5;
  double multiplier = 1.0;
  std::string kind = "copula";  // "copula" | "jitter"
};

struct RoundSummary {
  int round = 0;
  std::size_t train_real = 0;
  std::size_t test = 0;
  std::size_t added_positive = 0;
  std::size_t added_negative = 0;
  std::string positive_synthesizer;
  std::string negative_synthesizer;
};

/// Writes `round_<k>/train.csv` and `round_<k>/test.csv` for every round,
/// plus `rounds.json`. Refuses a non-empty `dir` unless `force`.
std::vector<RoundSummary> materialize_rounds(const WindowSet& windows, const WindowSpec& spec,
                                             const SynthesisOptions& synthesis, const std::filesystem::path& dir,
                                             bool force);

/// Round CSV: header = names + label + provenance.
void write_round_csv(const std::filesystem::path& path, std::span<const std::string> names,
                     std::span<const WindowSample> samples);
struct RoundTable {
  std::vector<std::string> names;
  std::vector<WindowSample> samples;
};
RoundTable read_round_csv(const std::filesystem::path& path);

/// All-windows CSV: player, anchor_date, names..., label, provenance.
void write_windows_csv(const std::filesystem::path& path, const WindowSet& windows);
WindowSet read_windows_csv(const std::filesystem::path& path);

}  // namespace injuryrisk::windowing
