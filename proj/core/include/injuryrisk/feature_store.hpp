#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "injuryrisk/common.hpp"
#include "injuryrisk/features.hpp"
#include "injuryrisk/ingest.hpp"

namespace injuryrisk::store {

using ingest::InjuryEvent;

/// Feature groups: training load, wellness, GPS-derived, match statistics,
/// and injury metadata (descriptive of the target, never a predictor).
enum class FeatureGroup { TL, W, GPS, MATCH, INJ };
enum class FeatureKind { numeric, categorical };

std::string_view to_string(FeatureGroup group);
FeatureGroup parse_group(std::string_view text);
std::string_view to_string(FeatureKind kind);

struct FeatureSpec {
  std::string name;
  FeatureGroup group;
  FeatureKind kind;
};

/// Ordered list of store columns between the keys and the target.
class FeatureCatalog {
 public:
  static constexpr std::array<std::string_view, 3> kKeyColumns = {"player", "date", "session_type"};
  static constexpr std::string_view kTargetColumn = "injury";

  FeatureCatalog() = default;
  /// Throws ConfigError on duplicate or reserved names.
  explicit FeatureCatalog(std::vector<FeatureSpec> features);

  /// Subjective + derived load, wellness, GPS aggregate, match and injury
  /// metadata columns.
  static FeatureCatalog standard();

  std::span<const FeatureSpec> features() const noexcept { return features_; }
  std::size_t size() const noexcept { return features_.size(); }
  std::size_t numeric_count() const noexcept { return numeric_count_; }
  std::size_t categorical_count() const noexcept { return features_.size() - numeric_count_; }

  std::optional<std::size_t> find(std::string_view name) const;
  /// Position of feature `index` inside DailyRecord::numeric or ::categorical.
  std::size_t slot(std::size_t index) const { return slots_.at(index); }
  /// Numeric slot for a name; throws if absent or categorical.
  std::size_t numeric_slot(std::string_view name) const;
  std::size_t categorical_slot(std::string_view name) const;

  /// Keys, features and target, in file order.
  std::vector<std::string> header() const;
  /// Numeric catalog entries whose group is in `groups`, catalog order.
  std::vector<std::size_t> numeric_features_in(std::span<const FeatureGroup> groups) const;

 private:
  std::vector<FeatureSpec> features_;
  std::vector<std::size_t> slots_;
  std::size_t numeric_count_ = 0;
};

enum class SessionType { training, match };
std::string_view to_string(SessionType type);
SessionType parse_session_type(std::string_view text);

struct DailyRecord {
  PlayerId player;
  Date date;
  SessionType session_type = SessionType::training;
  std::vector<std::optional<double>> numeric;  // catalog numeric slots
  std::vector<std::string> categorical;        // catalog categorical slots
  int injury = 0;

  friend bool operator==(const DailyRecord&, const DailyRecord&) = default;
};

struct FeatureStore {
  FeatureCatalog catalog;
  std::vector<DailyRecord> records;               // sorted by (player, date)
  std::vector<InjuryEvent> off_session_injuries;  // injuries on non-session dates

  std::vector<PlayerId> players() const;
  /// All injury dates of a player (on- and off-session), ascending.
  std::vector<Date> injury_dates(const PlayerId& player) const;
};

struct FuseInputs {
  std::span<const ingest::SubjectiveReport> subjective;
  std::span<const features::SessionAggregate> sessions;
  std::span<const ingest::MatchStats> matches;
  std::span<const InjuryEvent> injuries;
};

/// Joins all sources on (player, date). GPS sessions define the rows;
/// multiple sessions of one day are merged. Uses the standard catalog.
FeatureStore fuse(const FuseInputs& inputs, features::LoadModel load_model = features::LoadModel::rolling);

enum class ImputeMethod { median, linear, iterative };
ImputeMethod parse_impute_method(std::string_view text);
std::string_view to_string(ImputeMethod method);

struct ImputeReport {
  /// `player:feature` pairs that had no value for that player and were
  /// filled with the global median (or 0 when globally missing).
  std::vector<std::string> global_fallbacks;
  std::size_t filled_cells = 0;
};

inline constexpr int kIterativeRounds = 10;

/// Fills every absent numeric cell per player and every empty categorical
/// cell with "unknown". Present values are never modified.
ImputeReport impute(std::vector<DailyRecord>& records, const FeatureCatalog& catalog, ImputeMethod method);

void write_store(const FeatureStore& store, const std::filesystem::path& path);
/// Header must equal `catalog.header()` column by column.
std::vector<DailyRecord> read_store(const std::filesystem::path& path, const FeatureCatalog& catalog);

/// Side table with the InjuryEvent schema.
void write_injury_events(std::span<const InjuryEvent> events, const std::filesystem::path& path);
std::vector<InjuryEvent> read_injury_events(const std::filesystem::path& path);

inline constexpr std::string_view kOffSessionFile = "off_session_injuries.csv";

/// Store CSV plus its side table located next to it.
FeatureStore load_store(const std::filesystem::path& store_csv, const FeatureCatalog& catalog = FeatureCatalog::standard());
void save_store(const FeatureStore& store, const std::filesystem::path& store_csv);

}  // namespace injuryrisk::store
