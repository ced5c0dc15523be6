#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vfscan/commands.hpp"
#include "vfscan/corpus_io.hpp"
#include "vfscan/synthetic.hpp"

using namespace vfscan;
using nlohmann::json;

namespace {

// Flags that override fields of a JSON run configuration. Each one is
// optional so an absent flag leaves the file (or default) value alone.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::string> corpus;
  std::optional<std::string> split_mode;
  std::optional<double> test_frac, val_frac, train_frac, undersample, lr;
  std::vector<std::string> settings;
  std::optional<std::size_t> max_epochs, patience, finetune_epochs, ensemble_epochs, batch_size;
  std::optional<std::size_t> dim, hidden, channels, kernel_width, max_files, max_lines, max_hunks, ensemble_hidden;
  std::optional<std::string> backend, url;
  std::optional<std::uint64_t> backend_seed, seed;
  std::optional<std::size_t> max_tokens, remote_batch, concurrency, threads;
  std::optional<int> timeout;
  std::optional<bool> adjust;
  std::optional<std::string> output_dir;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--corpus", corpus, "corpus JSONL file or diff directory (repeatable)");
    app.add_option("--split", split_mode, "project | chronological");
    app.add_option("--test-frac", test_frac);
    app.add_option("--val-frac", val_frac);
    app.add_option("--train-frac", train_frac);
    app.add_option("--undersample", undersample, "negatives kept per positive, 0 disables");
    app.add_option("--settings", settings, "embedding settings, e.g. hunk-cd line-cf");
    app.add_option("--max-epochs", max_epochs);
    app.add_option("--patience", patience);
    app.add_option("--finetune-epochs", finetune_epochs);
    app.add_option("--ensemble-epochs", ensemble_epochs);
    app.add_option("--lr", lr);
    app.add_option("--batch-size", batch_size);
    app.add_option("--dim", dim, "embedding width");
    app.add_option("--hidden", hidden);
    app.add_option("--channels", channels);
    app.add_option("--kernel-width", kernel_width);
    app.add_option("--max-files", max_files);
    app.add_option("--max-lines", max_lines);
    app.add_option("--max-hunks", max_hunks);
    app.add_option("--ensemble-hidden", ensemble_hidden);
    app.add_option("--backend", backend, "hash | remote");
    app.add_option("--url", url, "remote encoder base URL");
    app.add_option("--hash-seed", backend_seed);
    app.add_option("--max-tokens", max_tokens);
    app.add_option("--remote-batch", remote_batch);
    app.add_option("--concurrency", concurrency);
    app.add_option("--timeout", timeout, "remote timeout in seconds");
    app.add_flag("--adjust,!--no-adjust", adjust, "effort-aware score adjustment");
    app.add_option("--out", output_dir, "output directory");
    app.add_option("--seed", seed);
    app.add_option("--threads", threads);
  }

  RunConfig resolve() const {
    json j = config_path.empty() ? json::object() : read_json_file(config_path);
    require(j.is_object(), ErrorCode::InvalidArgument, "config must be a JSON object");
    auto set = [&](json& node, const char* key, const auto& v) {
      if (v) node[key] = *v;
    };
    if (!corpus.empty()) j["corpus"] = corpus;
    if (!settings.empty()) j["settings"] = settings;
    if (url && !backend) j["backend"]["kind"] = "remote";
    for (const char* sect : {"split", "schedule", "model", "backend"})
      if (!j.contains(sect)) j[sect] = json::object();
    // a bare --dim moves the hash width along with the model width
    if (dim && !j["backend"].contains("dim")) j["backend"]["dim"] = *dim;
    set(j["split"], "mode", split_mode);
    set(j["split"], "test_frac", test_frac);
    set(j["split"], "val_frac", val_frac);
    set(j["split"], "train_frac", train_frac);
    set(j, "undersample", undersample);
    set(j["schedule"], "max_epochs", max_epochs);
    set(j["schedule"], "patience", patience);
    set(j["schedule"], "finetune_epochs", finetune_epochs);
    set(j["schedule"], "ensemble_epochs", ensemble_epochs);
    set(j["schedule"], "lr", lr);
    set(j["schedule"], "batch_size", batch_size);
    set(j["model"], "dim", dim);
    set(j["model"], "hidden", hidden);
    set(j["model"], "channels", channels);
    set(j["model"], "kernel_width", kernel_width);
    set(j["model"], "max_files", max_files);
    set(j["model"], "max_lines", max_lines);
    set(j["model"], "max_hunks", max_hunks);
    set(j["model"], "ensemble_hidden", ensemble_hidden);
    set(j["backend"], "kind", backend);
    set(j["backend"], "url", url);
    set(j["backend"], "seed", backend_seed);
    set(j["backend"], "max_tokens", max_tokens);
    set(j["backend"], "batch_size", remote_batch);
    set(j["backend"], "concurrency", concurrency);
    set(j["backend"], "timeout_seconds", timeout);
    set(j, "adjust", adjust);
    set(j, "output_dir", output_dir);
    set(j, "seed", seed);
    set(j, "threads", threads);
    auto cfg = run_config_from_json(j);
    require(!cfg.corpus.empty(), ErrorCode::InvalidArgument, "no corpus given (--corpus or config 'corpus')");
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vfscan: rank commits by likelihood of fixing a vulnerability"};
  app.require_subcommand(1);

  // decompose
  auto* dec = app.add_subcommand("decompose", "split commits into fragments, one JSONL file per granularity");
  std::string dec_in, dec_out;
  std::vector<std::string> dec_gran;
  dec->add_option("--input", dec_in, "corpus JSONL")->required();
  dec->add_option("--out", dec_out, "output directory")->required();
  dec->add_option("--granularity", dec_gran, "commit file hunk line (default: all)");

  // train
  auto* train = app.add_subcommand("train", "train base models and the ensemble");
  ConfigFlags train_flags;
  train_flags.attach(*train);
  train->add_flag("--print-config", "print the resolved configuration and exit");

  // rank
  auto* rk = app.add_subcommand("rank", "score and rank commits with a trained model");
  RankOptions rank_opt;
  std::string rk_model, rk_out;
  std::optional<bool> rk_adjust;
  std::optional<std::string> rk_url;
  rk->add_option("--model", rk_model, "training output directory")->required();
  rk->add_option("--corpus", rank_opt.corpus, "commits to rank (default: the recorded test split)");
  rk->add_option("--out", rk_out, "ranked CSV")->required();
  rk->add_flag("--adjust,!--no-adjust", rk_adjust, "override the trained adjustment switch");
  rk->add_option("--url", rk_url, "remote encoder base URL");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "effort-aware metrics for a labelled ranked CSV");
  std::string ev_in, ev_out;
  std::optional<std::string> ev_curve;
  std::vector<double> ev_L;
  std::vector<std::string> ev_units;
  ev->add_option("--ranked", ev_in, "ranked CSV")->required();
  ev->add_option("--L", ev_L, "inspection budgets in percent (default 5 10 15 20)");
  ev->add_option("--unit", ev_units, "loc hunk file commit (default loc)");
  auto* all_units = ev->add_flag("--all-units", "report every cost unit");
  ev->add_option("--out", ev_out, "report JSON")->required();
  ev->add_option("--curve", ev_curve, "Alberg curve CSV");

  // baseline
  auto* bl = app.add_subcommand("baseline", "rank the test split with a simple baseline");
  ConfigFlags bl_flags;
  bl_flags.attach(*bl);
  std::string bl_name = "loc", bl_ranked;
  bl->add_option("--name", bl_name, "loc | lapredict")->check(CLI::IsMember({"loc", "lapredict"}));
  bl->add_option("--ranked", bl_ranked, "ranked CSV")->required();

  // synth
  auto* sy = app.add_subcommand("synth", "write a synthetic labelled corpus");
  SynthConfig sc;
  std::string sy_out, sy_plant = "hunk";
  sy->add_option("--out", sy_out, "corpus JSONL")->required();
  sy->add_option("--commits", sc.commits);
  sy->add_option("--vf-rate", sc.vf_rate);
  sy->add_option("--projects", sc.projects);
  sy->add_option("--seed", sc.seed);
  sy->add_option("--plant", sy_plant, "hunk | line-or-file")->check(CLI::IsMember({"hunk", "line-or-file"}));
  sy->add_option("--vf-size-scale", sc.vf_size_scale);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  return run_guarded([&]() -> int {
    if (*dec) {
      std::vector<Granularity> gs;
      for (const auto& g : dec_gran) gs.push_back(parse_granularity(g));
      if (gs.empty()) gs.assign(kAllGranularities.begin(), kAllGranularities.end());
      const auto report = cmd_decompose(dec_in, dec_out, gs);
      for (const auto& [g, n] : report.fragments) std::cerr << g << ": " << n << " fragments\n";
      for (const auto& issue : report.issues)
        std::cerr << "line " << issue.line << (issue.commit.empty() ? "" : " (" + issue.commit + ")") << ": " << issue.message << '\n';
      return report.exit_code();
    }
    if (*train) {
      const auto cfg = train_flags.resolve();
      if (train->count("--print-config")) {
        std::cout << to_json(cfg).dump(2) << '\n';
        return 0;
      }
      cmd_train(cfg, std::cerr);
      std::cerr << "wrote " << cfg.output_dir << "/manifest.json\n";
      return 0;
    }
    if (*rk) {
      rank_opt.model_dir = rk_model;
      rank_opt.output = rk_out;
      rank_opt.adjust = rk_adjust;
      rank_opt.remote_url = rk_url;
      const auto list = cmd_rank(rank_opt);
      std::cerr << "ranked " << list.size() << " commits\n";
      return 0;
    }
    if (*ev) {
      if (ev_L.empty()) ev_L = default_percents();
      std::vector<CostUnit> units;
      if (*all_units)
        units.assign(std::begin(kAllCostUnits), std::end(kAllCostUnits));
      else
        for (const auto& u : ev_units) units.push_back(parse_cost_unit(u));
      if (units.empty()) units.push_back(CostUnit::Loc);
      std::optional<fs::path> curve;
      if (ev_curve) curve = *ev_curve;
      const auto report = cmd_evaluate(ev_in, ev_L, units, ev_out, curve);
      std::cerr << "auc " << report.auc << '\n';
      return 0;
    }
    if (*bl) {
      const auto cfg = bl_flags.resolve();
      const auto list = cmd_baseline(cfg, bl_name, bl_ranked);
      std::cerr << bl_name << ": ranked " << list.size() << " commits\n";
      return 0;
    }
    if (*sy) {
      sc.plant = sy_plant == "hunk" ? PlantMode::Hunk : PlantMode::LineOrFile;
      const auto corpus = synthesize_corpus(sc);
      write_jsonl_file(sy_out, corpus);
      std::cerr << "wrote " << corpus.size() << " commits\n";
      return 0;
    }
    return 2;
  });
}
