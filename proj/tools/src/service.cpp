#include "service.hpp"

#include <httplib.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <tuple>

#include "injuryrisk/common.hpp"
#include "injuryrisk/windowing.hpp"

namespace injuryrisk::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Response error(int status, const std::string& message, const std::string& field = {}) {
  json body = {{"error", message}};
  if (!field.empty()) body["field"] = field;
  return {status, body};
}

const std::string* param(const Query& q, const std::string& key) {
  auto it = q.find(key);
  return it == q.end() ? nullptr : &it->second;
}

}  // namespace

Service::Service(store::FeatureStore store, json experiments, std::map<std::string, models::TrainedModel> models)
    : store_(std::move(store)), experiments_(std::move(experiments)), models_(std::move(models)) {
  if (!experiments_.is_array()) experiments_ = json::array();
}

Service Service::load(const fs::path& store_csv, const fs::path& results_dir, const fs::path& models_dir) {
  auto fstore = store::load_store(store_csv);
  json experiments = json::array();
  const auto results = results_dir / "results.json";
  if (!results_dir.empty() && fs::exists(results)) {
    std::ifstream in(results);
    experiments = json::parse(in).at("cells");
  }
  std::map<std::string, models::TrainedModel> loaded;
  for (const auto& dir : {models_dir, results_dir / "models"}) {
    if (dir.empty() || !fs::is_directory(dir)) continue;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto name = e.path().filename().string();
      if (e.is_regular_file() && name.starts_with("model_") && name.ends_with(".json")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto m = models::TrainedModel::load(f);
      loaded.emplace(f.stem().string(), std::move(m));
    }
  }
  return Service(std::move(fstore), std::move(experiments), std::move(loaded));
}

Response Service::handle(const std::string& method, const std::string& path, const Query& query,
                         const std::string& body) const {
  try {
    if (method == "GET") {
      if (path == "/players") return players();
      if (path == "/sessions") return sessions(query);
      if (path == "/injuries") return injuries(query);
      if (path == "/catalog") return catalog();
      if (path == "/experiments") return experiments();
      if (path.starts_with("/experiments/")) return experiment(path.substr(13));
      if (path.starts_with("/features/")) return feature(path.substr(10), query);
    } else if (method == "POST" && path == "/predict") {
      return predict(body);
    }
    return error(404, "no route for " + method + " " + path);
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

std::optional<Response> Service::check_player(const Query& q, bool required) const {
  const auto* p = param(q, "player");
  if (!p) {
    if (required) return error(400, "query parameter 'player' is required", "player");
    return std::nullopt;
  }
  const auto players = store_.players();
  if (p->empty() || std::find(players.begin(), players.end(), PlayerId(*p)) == players.end()) {
    return error(404, "unknown player '" + *p + "'", "player");
  }
  return std::nullopt;
}

Response Service::players() const {
  json ids = json::array();
  for (const auto& p : store_.players()) ids.push_back(p.str());
  return {200, {{"players", ids}}};
}

Response Service::sessions(const Query& q) const {
  if (auto err = check_player(q, false)) return *err;
  std::optional<Date> from, to;
  for (auto [key, slot] : {std::pair{"from", &from}, std::pair{"to", &to}}) {
    if (const auto* v = param(q, key)) {
      try {
        *slot = Date::parse(*v);
      } catch (const Error&) {
        return error(400, std::string("query parameter '") + key + "' must be YYYY-MM-DD", key);
      }
    }
  }
  const auto* player = param(q, "player");
  json out = json::array();
  for (const auto& r : store_.records) {
    if (player && r.player.str() != *player) continue;
    if ((from && r.date < *from) || (to && r.date > *to)) continue;
    out.push_back({{"player", r.player.str()},
                   {"date", r.date.iso()},
                   {"session_type", store::to_string(r.session_type)},
                   {"injury", r.injury}});
  }
  return {200, {{"sessions", out}}};
}

Response Service::feature(const std::string& name, const Query& q) const {
  const auto& cat = store_.catalog;
  const auto idx = cat.find(name);
  if (!idx) return error(404, "unknown feature '" + name + "'", "name");
  if (auto err = check_player(q, true)) return *err;
  const PlayerId player(*param(q, "player"));
  const auto& spec = cat.features()[*idx];
  const auto slot = cat.slot(*idx);
  json series = json::array();
  for (const auto& r : store_.records) {
    if (r.player != player) continue;
    json value;
    if (spec.kind == store::FeatureKind::numeric) {
      value = r.numeric[slot] ? json(*r.numeric[slot]) : json(nullptr);
    } else {
      value = r.categorical[slot];
    }
    series.push_back({{"date", r.date.iso()}, {"value", value}});
  }
  json injury_dates = json::array();
  for (const auto& d : store_.injury_dates(player)) injury_dates.push_back(d.iso());
  return {200,
          {{"feature", spec.name},
           {"group", store::to_string(spec.group)},
           {"kind", store::to_string(spec.kind)},
           {"player", player.str()},
           {"series", series},
           {"injury_dates", injury_dates}}};
}

Response Service::injuries(const Query& q) const {
  if (auto err = check_player(q, false)) return *err;
  const auto* player = param(q, "player");
  const auto& cat = store_.catalog;
  std::vector<std::tuple<std::string, std::string, json>> rows;
  auto categorical = [&](const store::DailyRecord& r, std::string_view name) {
    return r.categorical[cat.categorical_slot(name)];
  };
  for (const auto& r : store_.records) {
    if (!r.injury || (player && r.player.str() != *player)) continue;
    rows.emplace_back(r.player.str(), r.date.iso(),
                      json{{"player", r.player.str()},
                           {"date", r.date.iso()},
                           {"cause", categorical(r, "injury_cause")},
                           {"activity", categorical(r, "injury_activity")},
                           {"area", categorical(r, "injury_area")},
                           {"body_region", categorical(r, "body_region")},
                           {"on_session", true}});
  }
  for (const auto& e : store_.off_session_injuries) {
    if (player && e.player.str() != *player) continue;
    rows.emplace_back(e.player.str(), e.date.iso(),
                      json{{"player", e.player.str()},
                           {"date", e.date.iso()},
                           {"cause", e.cause},
                           {"activity", e.activity},
                           {"area", e.area},
                           {"body_region", e.body_region},
                           {"on_session", false}});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });
  json out = json::array();
  for (auto& r : rows) out.push_back(std::move(std::get<2>(r)));
  return {200, {{"injuries", out}}};
}

Response Service::catalog() const {
  json out = json::array();
  for (const auto& f : store_.catalog.features()) {
    out.push_back({{"name", f.name}, {"group", store::to_string(f.group)}, {"kind", store::to_string(f.kind)}});
  }
  return {200, {{"features", out}}};
}

Response Service::experiments() const {
  json out = json::array();
  for (auto cell : experiments_) {
    cell.erase("rounds");
    out.push_back(std::move(cell));
  }
  json model_ids = json::array();
  for (const auto& [id, m] : models_) {
    model_ids.push_back({{"model_id", id},
                         {"kind", models::to_string(m.kind())},
                         {"n_in", m.n_in()},
                         {"features", windowing::base_names(m.feature_names(), m.n_in())}});
  }
  return {200, {{"experiments", out}, {"models", model_ids}}};
}

Response Service::experiment(const std::string& id) const {
  for (const auto& cell : experiments_) {
    if (cell.value("id", "") == id) return {200, cell};
  }
  return error(404, "unknown experiment '" + id + "'", "id");
}

Response Service::predict(const std::string& body) const {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error&) {
    return error(400, "request body is not valid JSON", "body");
  }
  if (!doc.is_object()) return error(400, "request body must be a JSON object", "body");
  if (!doc.contains("model_id") || !doc["model_id"].is_string()) {
    return error(400, "'model_id' must be a string", "model_id");
  }
  if (!doc.contains("sessions") || !doc["sessions"].is_array()) {
    return error(400, "'sessions' must be an array of feature maps", "sessions");
  }
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.key() != "model_id" && it.key() != "sessions" && it.key() != "threshold") {
      return error(400, "unknown field '" + it.key() + "'", it.key());
    }
  }
  double threshold = models::kDefaultThreshold;
  if (doc.contains("threshold")) {
    if (!doc["threshold"].is_number()) return error(400, "'threshold' must be a number", "threshold");
    threshold = doc["threshold"].get<double>();
  }
  const auto id = doc["model_id"].get<std::string>();
  const auto it = models_.find(id);
  if (it == models_.end()) return error(404, "unknown model '" + id + "'", "model_id");
  const auto& model = it->second;
  const auto& sessions = doc["sessions"];
  const auto n_in = static_cast<std::size_t>(model.n_in());
  if (sessions.size() != n_in) {
    return {422,
            {{"error", "model expects " + std::to_string(n_in) + " sessions, got " + std::to_string(sessions.size())},
             {"field", "sessions"},
             {"expected", n_in},
             {"received", sessions.size()}}};
  }
  const auto base = windowing::base_names(model.feature_names(), model.n_in());
  std::vector<double> x(base.size() * n_in);
  for (std::size_t t = 0; t < n_in; ++t) {
    const auto& s = sessions[t];
    const std::string where = "sessions[" + std::to_string(t) + "]";
    if (!s.is_object()) return error(400, where + " must be an object", where);
    for (std::size_t f = 0; f < base.size(); ++f) {
      const auto v = s.find(base[f]);
      if (v == s.end()) return error(400, where + " is missing '" + base[f] + "'", where + "." + base[f]);
      if (!v->is_number()) return error(400, where + "." + base[f] + " must be a number", where + "." + base[f]);
      x[f * n_in + t] = v->get<double>();
    }
    if (s.size() != base.size()) {
      for (auto kv = s.begin(); kv != s.end(); ++kv) {
        if (std::find(base.begin(), base.end(), kv.key()) == base.end()) {
          return error(400, where + " has unknown feature '" + kv.key() + "'", where + "." + kv.key());
        }
      }
    }
  }
  const double score = model.score(x);
  return {200,
          {{"model_id", id},
           {"score", score},
           {"class", models::classify_score(score, threshold)},
           {"threshold", threshold}}};
}

void serve(const Service& service, const std::string& host, int port, const fs::path& static_dir) {
  httplib::Server server;
  auto reply = [&service](const httplib::Request& req, httplib::Response& res) {
    Query q;
    for (const auto& [k, v] : req.params) q.emplace(k, v);
    const auto r = service.handle(req.method, req.path, q, req.body);
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body.dump(), "application/json");
  };
  for (const char* route : {"/players", "/sessions", "/injuries", "/catalog", "/experiments", R"(/experiments/.+)",
                            R"(/features/.+)"}) {
    server.Get(route, reply);
  }
  server.Post("/predict", reply);
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  if (!static_dir.empty() && !server.set_mount_point("/", static_dir.string())) {
    throw ConfigError("service.static_dir does not exist: " + static_dir.string());
  }
  std::cerr << "serving on http://" << host << ":" << port << "\n";
  if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace injuryrisk::cli
