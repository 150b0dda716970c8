#include "config.hpp"

#include <fstream>
#include <optional>
#include <set>

#include "injuryrisk/common.hpp"

namespace injuryrisk::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(label() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json* raw(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, double def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_number()) throw ConfigError(name(key) + " must be a number");
    return v->get<double>();
  }

  std::optional<double> optional_number(const std::string& key, std::optional<double> def) {
    const json* v = raw(key);
    if (!v) return def;
    if (v->is_null()) return std::nullopt;
    if (!v->is_number()) throw ConfigError(name(key) + " must be a number or null");
    return v->get<double>();
  }

  long long integer(const std::string& key, long long def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_number_integer()) throw ConfigError(name(key) + " must be an integer");
    return v->get<long long>();
  }

  bool boolean(const std::string& key, bool def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_boolean()) throw ConfigError(name(key) + " must be true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& key, const std::string& def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_string()) throw ConfigError(name(key) + " must be a string");
    return v->get<std::string>();
  }

  template <typename T, typename F>
  std::vector<T> list(const std::string& key, std::vector<T> def, F&& convert) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_array() || v->empty()) throw ConfigError(name(key) + " must be a non-empty array");
    std::vector<T> out;
    for (std::size_t i = 0; i < v->size(); ++i) out.push_back(convert((*v)[i], name(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  Section sub(const std::string& key) {
    const json* v = raw(key);
    static const json empty = json::object();
    return Section(v ? *v : empty, name(key));
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.contains(it.key())) throw ConfigError("unknown config key '" + name(it.key()) + "'");
    }
  }

 private:
  std::string label() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

double as_number(const json& v, const std::string& name) {
  if (!v.is_number()) throw ConfigError(name + " must be a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& name) {
  if (!v.is_number_integer()) throw ConfigError(name + " must be an integer");
  return v.get<int>();
}

std::string as_string(const json& v, const std::string& name) {
  if (!v.is_string()) throw ConfigError(name + " must be a string");
  return v.get<std::string>();
}

std::vector<store::FeatureGroup> as_groups(const json& v, const std::string& name) {
  if (!v.is_array() || v.empty()) throw ConfigError(name + " must be a non-empty array of feature groups");
  std::vector<store::FeatureGroup> out;
  for (const auto& g : v) {
    try {
      out.push_back(store::parse_group(as_string(g, name)));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(name + ": " + e.what());
    }
  }
  return out;
}

template <typename F>
auto wrap(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(name + ": " + e.what());
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_absolute() || p.empty() ? p : base / p; }

template <std::size_t N>
std::array<double, N> bounds(Section& s, const std::string& key, std::array<double, N> def) {
  auto v = s.list<double>(key, std::vector<double>(def.begin(), def.end()), as_number);
  if (v.size() != N) throw ConfigError(s.name(key) + " must hold exactly " + std::to_string(N) + " boundaries");
  for (std::size_t i = 1; i < N; ++i) {
    if (!(v[i] > v[i - 1])) throw ConfigError(s.name(key) + " must be strictly increasing");
  }
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

void parse_models(Section s, models::ModelConfig& m) {
  const auto kind = s.string("train_kind", std::string(models::to_string(m.kind)));
  m.kind = wrap(s.name("train_kind"), [&] { return models::parse_model_kind(kind); });
  {
    auto p = s.sub("logit");
    m.logit.l2 = p.number("l2", m.logit.l2);
    m.logit.learning_rate = p.number("learning_rate", m.logit.learning_rate);
    m.logit.max_epochs = static_cast<int>(p.integer("max_epochs", m.logit.max_epochs));
    m.logit.gradient_tolerance = p.number("gradient_tolerance", m.logit.gradient_tolerance);
    p.finish();
  }
  {
    auto p = s.sub("svc");
    m.svc.l2 = p.number("l2", m.svc.l2);
    m.svc.learning_rate = p.number("learning_rate", m.svc.learning_rate);
    m.svc.passes = static_cast<int>(p.integer("passes", m.svc.passes));
    p.finish();
  }
  {
    auto p = s.sub("randomforest");
    m.forest.trees = static_cast<int>(p.integer("trees", m.forest.trees));
    m.forest.max_depth = static_cast<int>(p.integer("max_depth", m.forest.max_depth));
    m.forest.min_leaf = static_cast<int>(p.integer("min_leaf", m.forest.min_leaf));
    m.forest.max_features = static_cast<int>(p.integer("max_features", m.forest.max_features));
    m.forest.bootstrap = p.boolean("bootstrap", m.forest.bootstrap);
    p.finish();
    if (m.forest.trees < 1) throw ConfigError("models.randomforest.trees must be >= 1");
  }
  {
    auto p = s.sub("xgboost");
    m.boost.rounds = static_cast<int>(p.integer("rounds", m.boost.rounds));
    m.boost.max_depth = static_cast<int>(p.integer("max_depth", m.boost.max_depth));
    m.boost.learning_rate = p.number("learning_rate", m.boost.learning_rate);
    m.boost.l2 = p.number("l2", m.boost.l2);
    m.boost.min_child_weight = p.number("min_child_weight", m.boost.min_child_weight);
    p.finish();
    if (m.boost.rounds < 0) throw ConfigError("models.xgboost.rounds must be >= 0");
  }
  {
    auto p = s.sub("lstm");
    m.lstm.hidden = static_cast<int>(p.integer("hidden", m.lstm.hidden));
    m.lstm.learning_rate = p.number("learning_rate", m.lstm.learning_rate);
    m.lstm.epochs = static_cast<int>(p.integer("epochs", m.lstm.epochs));
    m.lstm.clip_norm = p.number("clip_norm", m.lstm.clip_norm);
    m.lstm.init_scale = p.number("init_scale", m.lstm.init_scale);
    m.lstm.forget_bias = p.number("forget_bias", m.lstm.forget_bias);
    m.lstm.early_stopping = p.boolean("early_stopping", m.lstm.early_stopping);
    m.lstm.validation_fraction = p.number("validation_fraction", m.lstm.validation_fraction);
    m.lstm.patience = static_cast<int>(p.integer("patience", m.lstm.patience));
    p.finish();
    if (m.lstm.hidden < 1) throw ConfigError("models.lstm.hidden must be >= 1");
  }
  s.finish();
}

}  // namespace

void GlobalConfig::set_seed(std::uint64_t s) {
  seed = s;
  window.seed = s;
  models.seed = s;
}

GlobalConfig parse_config(const json& doc, const fs::path& base_dir) {
  GlobalConfig cfg;
  Section root(doc, "");

  {
    auto s = root.sub("paths");
    auto p = [&](const char* key, fs::path& field) { field = resolve(base_dir, s.string(key, field.string())); };
    p("subjective_dir", cfg.paths.subjective_dir);
    p("gps_dir", cfg.paths.gps_dir);
    p("match_stats", cfg.paths.match_stats);
    p("injuries", cfg.paths.injuries);
    p("store", cfg.paths.store);
    p("windows", cfg.paths.windows);
    p("rounds_dir", cfg.paths.rounds_dir);
    p("results_dir", cfg.paths.results_dir);
    p("models_dir", cfg.paths.models_dir);
    s.finish();
  }
  {
    auto s = root.sub("plausibility");
    auto& p = cfg.plausibility;
    p.lat_min = s.number("lat_min", p.lat_min);
    p.lat_max = s.number("lat_max", p.lat_max);
    p.lon_min = s.number("lon_min", p.lon_min);
    p.lon_max = s.number("lon_max", p.lon_max);
    p.speed_max_kmh = s.optional_number("speed_max_kmh", p.speed_max_kmh);
    const auto sats = s.optional_number("min_satellites", p.min_satellites);
    p.min_satellites = sats ? std::optional<int>(static_cast<int>(*sats)) : std::nullopt;
    p.max_hdop = s.optional_number("max_hdop", p.max_hdop);
    s.finish();
    if (p.lat_min > p.lat_max || p.lon_min > p.lon_max) throw ConfigError("plausibility ranges are inverted");
  }
  {
    auto s = root.sub("zones");
    cfg.zones.speed_kmh = bounds(s, "speed_kmh", cfg.zones.speed_kmh);
    cfg.zones.hr_pct = bounds(s, "hr_pct", cfg.zones.hr_pct);
    if (const json* m = s.raw("max_hr_bpm")) {
      if (!m->is_object()) throw ConfigError("zones.max_hr_bpm must map player IDs to beats per minute");
      for (auto it = m->begin(); it != m->end(); ++it) {
        const double bpm = as_number(it.value(), "zones.max_hr_bpm." + it.key());
        if (!(bpm > 0)) throw ConfigError("zones.max_hr_bpm." + it.key() + " must be > 0");
        cfg.zones.max_hr_bpm[PlayerId(it.key())] = bpm;
      }
    }
    s.finish();
  }
  if (const json* r = root.raw("roster")) {
    if (!r->is_array()) throw ConfigError("roster must be an array of {\"id\", \"name\"} objects");
    for (std::size_t i = 0; i < r->size(); ++i) {
      Section e((*r)[i], "roster[" + std::to_string(i) + "]");
      const auto id = e.string("id", "");
      const auto name = e.string("name", "");
      e.finish();
      if (id.empty() || name.empty()) throw ConfigError("roster[" + std::to_string(i) + "] needs id and name");
      cfg.roster.push_back({PlayerId(id), name});
    }
  }
  cfg.load_model = wrap("load_model", [&] { return features::parse_load_model(root.string("load_model", "rolling")); });
  cfg.imputation = wrap("imputation", [&] { return store::parse_impute_method(root.string("imputation", "median")); });
  {
    auto s = root.sub("window");
    auto& w = cfg.window;
    w.n_in = static_cast<int>(s.integer("n_in", w.n_in));
    w.n_out = static_cast<int>(s.integer("n_out", w.n_out));
    w.max_span_days = static_cast<int>(s.integer("max_span_days", w.max_span_days));
    w.features = s.has("features") ? as_groups(*s.raw("features"), "window.features") : w.features;
    w.test_fraction = s.number("test_fraction", w.test_fraction);
    w.rounds = static_cast<int>(s.integer("rounds", w.rounds));
    w.split_by = wrap("window.split_by", [&] { return windowing::parse_split_by(s.string("split_by", "window")); });
    s.finish();
    w.validate();
  }
  {
    auto s = root.sub("synthesis");
    auto& y = cfg.synthesis;
    y.enabled = s.boolean("enabled", true);
    y.event_proportion = s.number("event_proportion", y.event_proportion);
    y.multiplier = s.number("multiplier", y.multiplier);
    y.kind = s.string("kind", y.kind);
    s.finish();
    if (!(y.event_proportion > 0.0 && y.event_proportion < 1.0)) {
      throw ConfigError("synthesis.event_proportion must be in (0, 1)");
    }
    if (!(y.multiplier >= 1.0)) throw ConfigError("synthesis.multiplier must be >= 1");
    if (y.kind != "copula" && y.kind != "jitter") throw ConfigError("synthesis.kind must be copula or jitter");
  }
  {
    auto s = root.sub("grid");
    auto& g = cfg.grid;
    g.data = s.list<std::string>("data", g.data, as_string);
    g.event_proportions = s.list<double>("event_proportions", g.event_proportions, as_number);
    g.inputs = s.list<int>("inputs", g.inputs, as_int);
    g.outputs = s.list<int>("outputs", g.outputs, as_int);
    g.feature_sets = s.list<std::vector<store::FeatureGroup>>("feature_sets", g.feature_sets, as_groups);
    g.models = s.list<models::ModelKind>("models", g.models, [](const json& v, const std::string& name) {
      return wrap(name, [&] { return models::parse_model_kind(as_string(v, name)); });
    });
    g.rounds = static_cast<int>(s.integer("rounds", g.rounds));
    s.finish();
    for (double e : g.event_proportions) {
      if (!(e > 0.0 && e < 1.0)) throw ConfigError("grid.event_proportions entries must be in (0, 1)");
    }
    for (const auto& d : g.data) {
      if (d != "R" && d != "R+S") throw ConfigError("grid.data entries must be \"R\" or \"R+S\"");
    }
    for (int v : g.inputs) {
      if (v < 1) throw ConfigError("grid.inputs entries must be >= 1");
    }
    for (int v : g.outputs) {
      if (v < 1) throw ConfigError("grid.outputs entries must be >= 1");
    }
    for (const auto& fs_ : g.feature_sets) {
      for (auto grp : fs_) {
        if (grp == store::FeatureGroup::INJ) throw ConfigError("grid.feature_sets cannot contain INJ");
      }
    }
    if (g.rounds < 1) throw ConfigError("grid.rounds must be >= 1");
  }
  parse_models(root.sub("models"), cfg.models);
  {
    const json* s = root.raw("seed");
    std::uint64_t seed = cfg.seed;
    if (s) {
      if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<long long>() >= 0)) {
        throw ConfigError("seed must be a non-negative integer");
      }
      seed = s->get<std::uint64_t>();
    }
    cfg.set_seed(seed);
  }
  {
    auto s = root.sub("service");
    cfg.service.host = s.string("host", cfg.service.host);
    cfg.service.port = static_cast<int>(s.integer("port", cfg.service.port));
    cfg.service.static_dir = resolve(base_dir, s.string("static_dir", ""));
    s.finish();
    if (cfg.service.port < 0 || cfg.service.port > 65535) throw ConfigError("service.port must be in 0..65535");
  }
  root.finish();
  return cfg;
}

GlobalConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  return parse_config(doc, fs::absolute(file).parent_path());
}

nlohmann::json GlobalConfig::snapshot() const {
  auto groups = [](const std::vector<store::FeatureGroup>& gs) {
    json a = json::array();
    for (auto g : gs) a.push_back(store::to_string(g));
    return a;
  };
  json roster_j = json::array();
  for (const auto& r : roster) roster_j.push_back({{"id", r.id.str()}, {"name", r.name}});
  json max_hr = json::object();
  for (const auto& [p, v] : zones.max_hr_bpm) max_hr[p.str()] = v;
  json grid_sets = json::array();
  for (const auto& s : grid.feature_sets) grid_sets.push_back(groups(s));
  json grid_models = json::array();
  for (auto m : grid.models) grid_models.push_back(models::to_string(m));
  auto opt = [](const auto& o) { return o ? json(*o) : json(nullptr); };
  json model_params = json::object();
  for (auto k : models::kAllModels) {
    auto c = models;
    c.kind = k;
    model_params[std::string(models::to_string(k))] = c.to_json().at("params");
  }
  return {{"plausibility",
           {{"lat_min", plausibility.lat_min},
            {"lat_max", plausibility.lat_max},
            {"lon_min", plausibility.lon_min},
            {"lon_max", plausibility.lon_max},
            {"speed_max_kmh", opt(plausibility.speed_max_kmh)},
            {"min_satellites", opt(plausibility.min_satellites)},
            {"max_hdop", opt(plausibility.max_hdop)}}},
          {"zones", {{"speed_kmh", zones.speed_kmh}, {"hr_pct", zones.hr_pct}, {"max_hr_bpm", max_hr}}},
          {"roster", roster_j},
          {"load_model", load_model == features::LoadModel::rolling ? "rolling" : "ewma"},
          {"imputation", store::to_string(imputation)},
          {"window",
           {{"n_in", window.n_in},
            {"n_out", window.n_out},
            {"max_span_days", window.max_span_days},
            {"features", groups(window.features)},
            {"test_fraction", window.test_fraction},
            {"rounds", window.rounds},
            {"split_by", windowing::to_string(window.split_by)}}},
          {"synthesis",
           {{"enabled", synthesis.enabled},
            {"event_proportion", synthesis.event_proportion},
            {"multiplier", synthesis.multiplier},
            {"kind", synthesis.kind}}},
          {"grid",
           {{"data", grid.data},
            {"event_proportions", grid.event_proportions},
            {"inputs", grid.inputs},
            {"outputs", grid.outputs},
            {"feature_sets", grid_sets},
            {"models", grid_models},
            {"rounds", grid.rounds}}},
          {"models", {{"train_kind", models::to_string(models.kind)}, {"params", model_params}}},
          {"seed", seed}};
}

}  // namespace injuryrisk::cli
