#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "config.hpp"
#include "fixture.hpp"
#include "injuryrisk/common.hpp"
#include "service.hpp"
#include "stages.hpp"

namespace {

enum Exit { kOk = 0, kStageFailure = 1, kConfigError = 2 };

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = std::string(injuryrisk::trim(item));
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void summarize(const injuryrisk::cli::StageOutcome& outcome) {
  std::cout << outcome.manifest.at("stage").get<std::string>() << ": " << outcome.manifest.at("details").dump()
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  using namespace injuryrisk;
  CLI::App app{"Injury-risk pipeline: ingest, features, windows, synthesis, models, evaluation and API"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool force = false;

  auto with_config = [&](CLI::App* sub) {
    sub->add_option("--config,-c", config_path, "Global JSON config")->required();
    sub->add_option("--seed", seed, "Override the global seed");
  };

  auto* pre = app.add_subcommand("preprocess", "Raw sources to the imputed feature store");
  with_config(pre);
  auto* bw = app.add_subcommand("build-windows", "Feature store to sliding-window samples");
  with_config(bw);
  auto* sy = app.add_subcommand("synth", "Materialize MCCV rounds with synthetic training data");
  with_config(sy);
  sy->add_flag("--force", force, "Overwrite an existing rounds directory");
  std::optional<int> rounds;
  sy->add_option("--rounds", rounds, "Override window.rounds")->check(CLI::PositiveNumber);

  auto* tr = app.add_subcommand("train", "Train one model on a materialized round");
  with_config(tr);
  std::string model_name;
  int round = 0;
  tr->add_option("--model", model_name, "logit, lstm, randomforest, svc or xgboost");
  tr->add_option("--round", round, "Round index")->check(CLI::NonNegativeNumber);

  auto* ev = app.add_subcommand("evaluate", "Train and test one model over all materialized rounds");
  with_config(ev);
  ev->add_option("--model", model_name, "logit, lstm, randomforest, svc or xgboost");

  auto* gr = app.add_subcommand("grid", "Run the experiment grid from the feature store");
  with_config(gr);
  std::string cells;
  gr->add_option("--cells", cells, "Comma-separated cell IDs, e.g. I-1,I-58");
  gr->add_option("--rounds", rounds, "Override grid.rounds")->check(CLI::PositiveNumber);
  gr->add_flag("--force", force, "Overwrite an existing results directory");

  auto* sv = app.add_subcommand("serve", "Serve the read-only HTTP API");
  with_config(sv);
  std::optional<int> port;
  std::string host;
  sv->add_option("--port", port, "Override service.port");
  sv->add_option("--host", host, "Override service.host");

  auto* fx = app.add_subcommand("fixture", "Write a synthetic raw data set and config");
  std::string out_dir;
  cli::FixtureSpec fspec;
  fx->add_option("--out", out_dir, "Output directory")->required();
  fx->add_option("--players", fspec.players, "Number of players");
  fx->add_option("--days", fspec.days, "Number of calendar days");
  fx->add_option("--hz", fspec.sample_hz, "GPS sampling rate");
  fx->add_option("--seconds", fspec.session_seconds, "GPS seconds per session");
  fx->add_option("--seed", fspec.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (fx->parsed()) {
      cli::generate_fixture(out_dir, fspec);
      std::cout << "fixture written to " << out_dir << "\n";
      return kOk;
    }
    auto cfg = cli::load_config(config_path);
    if (seed) cfg.set_seed(*seed);
    std::optional<models::ModelKind> kind;
    if (!model_name.empty()) kind = models::parse_model_kind(model_name);

    if (pre->parsed()) {
      summarize(cli::preprocess(cfg));
    } else if (bw->parsed()) {
      summarize(cli::build_windows(cfg));
    } else if (sy->parsed()) {
      if (rounds) cfg.window.rounds = *rounds;
      summarize(cli::synth(cfg, force));
    } else if (tr->parsed()) {
      summarize(cli::train(cfg, {kind, round}));
    } else if (ev->parsed()) {
      summarize(cli::evaluate(cfg, {kind}));
    } else if (gr->parsed()) {
      if (rounds) cfg.grid.rounds = *rounds;
      const auto outcome = cli::grid(cfg, {split_list(cells), force});
      summarize(outcome);
      if (!outcome.ok) return kStageFailure;
    } else if (sv->parsed()) {
      if (port) cfg.service.port = *port;
      if (!host.empty()) cfg.service.host = host;
      if (!std::filesystem::exists(cfg.paths.store)) {
        throw Error(cfg.paths.store.string() + " does not exist; run `preprocess` first");
      }
      const auto service = cli::Service::load(cfg.paths.store, cfg.paths.results_dir, cfg.paths.models_dir);
      cli::serve(service, cfg.service.host, cfg.service.port, cfg.service.static_dir);
    }
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kStageFailure;
  }
}
