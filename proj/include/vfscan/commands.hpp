#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfscan/checkpoint.hpp"
#include "vfscan/corpus.hpp"
#include "vfscan/corpus_io.hpp"
#include "vfscan/decomposer.hpp"
#include "vfscan/embedding.hpp"
#include "vfscan/errors.hpp"
#include "vfscan/extractors.hpp"
#include "vfscan/metrics.hpp"
#include "vfscan/pipeline.hpp"
#include "vfscan/remote_backend.hpp"

namespace vfscan {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Run configuration

struct BackendConfig {
  std::string kind = "hash";  // hash | remote
  std::size_t dim = 256;
  std::uint64_t seed = 0;
  std::size_t max_tokens = 512;
  std::string url;
  std::size_t batch_size = 32;
  std::size_t concurrency = 1;
  int timeout_seconds = 120;
};

struct RunConfig {
  std::vector<std::string> corpus;
  std::string split_mode = "project";  // project | chronological
  double test_frac = 0.2;
  double val_frac = 0.1;
  double train_frac = 0.8;
  double undersample = 30.0;  // negatives per positive; 0 disables
  std::vector<EmbeddingSetting> settings{kEmbeddingSettings.begin(), kEmbeddingSettings.end()};
  TrainSchedule schedule;
  ExtractorConfig model;
  std::size_t ensemble_hidden = 256;
  BackendConfig backend;
  bool adjust = true;
  std::string output_dir = "run";
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const {
    require(split_mode == "project" || split_mode == "chronological", ErrorCode::InvalidArgument,
            "split mode must be 'project' or 'chronological'");
    require(test_frac > 0 && test_frac < 1 && val_frac > 0 && val_frac < 1 && train_frac > 0 && train_frac < 1,
            ErrorCode::InvalidArgument, "split fractions must lie in (0, 1)");
    require(split_mode != "chronological" || train_frac + val_frac < 1.0, ErrorCode::InvalidArgument,
            "chronological train and validation fractions leave no test data");
    require(undersample >= 0.0, ErrorCode::InvalidArgument, "undersample ratio must be nonnegative");
    require(!settings.empty(), ErrorCode::InvalidArgument, "at least one embedding setting is required");
    std::set<std::string> seen;
    for (auto s : settings) {
      require(is_valid(s), ErrorCode::InvalidSetting, to_string(s));
      require(seen.insert(to_string(s)).second, ErrorCode::InvalidArgument, "setting listed twice: " + to_string(s));
    }
    schedule.validate();
    model.validate();
    require(ensemble_hidden >= 1, ErrorCode::InvalidArgument, "ensemble hidden width must be positive");
    require(backend.kind == "hash" || backend.kind == "remote", ErrorCode::InvalidArgument, "backend must be 'hash' or 'remote'");
    if (backend.kind == "hash")
      require(backend.dim == model.dim, ErrorCode::DimensionMismatch, "hash dimension differs from model dimension");
    else
      require(!backend.url.empty(), ErrorCode::InvalidArgument, "remote backend needs a URL");
    require(threads >= 1, ErrorCode::InvalidArgument, "threads must be positive");
    require(!output_dir.empty(), ErrorCode::InvalidArgument, "output directory is required");
  }
};

namespace detail {

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("config field '") + key + "': " + e.what());
  }
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
  require(j.is_object(), ErrorCode::InvalidArgument, where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    const bool ok = std::any_of(known.begin(), known.end(), [&](const char* k) { return key == k; });
    require(ok, ErrorCode::InvalidArgument, "unknown config key '" + key + "' in " + where);
  }
}

}  // namespace detail

inline nlohmann::json to_json(const ExtractorConfig& c) {
  return {{"dim", c.dim},           {"hidden", c.hidden},       {"channels", c.channels}, {"kernel_width", c.kernel_width},
          {"max_files", c.max_files}, {"max_lines", c.max_lines}, {"max_hunks", c.max_hunks}};
}

inline ExtractorConfig extractor_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, {"dim", "hidden", "channels", "kernel_width", "max_files", "max_lines", "max_hunks", "ensemble_hidden"}, "model");
  ExtractorConfig c;
  detail::read_field(j, "dim", c.dim);
  detail::read_field(j, "hidden", c.hidden);
  detail::read_field(j, "channels", c.channels);
  detail::read_field(j, "kernel_width", c.kernel_width);
  detail::read_field(j, "max_files", c.max_files);
  detail::read_field(j, "max_lines", c.max_lines);
  detail::read_field(j, "max_hunks", c.max_hunks);
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json settings = nlohmann::json::array();
  for (auto s : c.settings) settings.push_back(to_string(s));
  auto schedule = to_json(c.schedule);
  schedule.erase("seed");
  auto model = to_json(c.model);
  model["ensemble_hidden"] = c.ensemble_hidden;
  nlohmann::json backend = {{"kind", c.backend.kind}};
  if (c.backend.kind == "hash") {
    backend["dim"] = c.backend.dim;
    backend["seed"] = c.backend.seed;
    backend["max_tokens"] = c.backend.max_tokens;
  } else {
    backend["url"] = c.backend.url;
    backend["batch_size"] = c.backend.batch_size;
    backend["concurrency"] = c.backend.concurrency;
    backend["timeout_seconds"] = c.backend.timeout_seconds;
  }
  return {{"corpus", c.corpus},
          {"split", {{"mode", c.split_mode}, {"test_frac", c.test_frac}, {"val_frac", c.val_frac}, {"train_frac", c.train_frac}}},
          {"undersample", c.undersample},
          {"settings", settings},
          {"schedule", schedule},
          {"model", model},
          {"backend", backend},
          {"adjust", c.adjust},
          {"output_dir", c.output_dir},
          {"seed", c.seed},
          {"threads", c.threads}};
}

/// Parses and validates a run configuration; absent keys keep their defaults.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j, {"corpus", "split", "undersample", "settings", "schedule", "model", "backend", "adjust", "output_dir", "seed", "threads"},
                         "config");
  RunConfig c;
  detail::read_field(j, "corpus", c.corpus);
  if (j.contains("split")) {
    const auto& s = j.at("split");
    detail::reject_unknown(s, {"mode", "test_frac", "val_frac", "train_frac"}, "split");
    detail::read_field(s, "mode", c.split_mode);
    detail::read_field(s, "test_frac", c.test_frac);
    detail::read_field(s, "val_frac", c.val_frac);
    detail::read_field(s, "train_frac", c.train_frac);
  }
  detail::read_field(j, "undersample", c.undersample);
  if (j.contains("settings")) {
    std::vector<std::string> names;
    detail::read_field(j, "settings", names);
    c.settings.clear();
    for (const auto& n : names) c.settings.push_back(parse_setting(n));
  }
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    detail::reject_unknown(s, {"max_epochs", "patience", "finetune_epochs", "ensemble_epochs", "lr", "batch_size"}, "schedule");
    detail::read_field(s, "max_epochs", c.schedule.max_epochs);
    detail::read_field(s, "patience", c.schedule.patience);
    detail::read_field(s, "finetune_epochs", c.schedule.finetune_epochs);
    detail::read_field(s, "ensemble_epochs", c.schedule.ensemble_epochs);
    detail::read_field(s, "lr", c.schedule.lr);
    detail::read_field(s, "batch_size", c.schedule.batch_size);
  }
  if (j.contains("model")) {
    c.model = extractor_config_from_json(j.at("model"));
    c.ensemble_hidden = c.model.hidden;
    detail::read_field(j.at("model"), "ensemble_hidden", c.ensemble_hidden);
  } else {
    c.ensemble_hidden = c.model.hidden;
  }
  if (j.contains("backend")) {
    const auto& b = j.at("backend");
    detail::reject_unknown(b, {"kind", "dim", "seed", "max_tokens", "url", "batch_size", "concurrency", "timeout_seconds"}, "backend");
    detail::read_field(b, "kind", c.backend.kind);
    detail::read_field(b, "dim", c.backend.dim);
    detail::read_field(b, "seed", c.backend.seed);
    detail::read_field(b, "max_tokens", c.backend.max_tokens);
    detail::read_field(b, "url", c.backend.url);
    detail::read_field(b, "batch_size", c.backend.batch_size);
    detail::read_field(b, "concurrency", c.backend.concurrency);
    detail::read_field(b, "timeout_seconds", c.backend.timeout_seconds);
  }
  detail::read_field(j, "adjust", c.adjust);
  detail::read_field(j, "output_dir", c.output_dir);
  detail::read_field(j, "seed", c.seed);
  detail::read_field(j, "threads", c.threads);
  c.schedule.seed = c.seed;
  c.validate();
  return c;
}

inline nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorCode::Io, "failed writing " + path.string());
}

inline std::unique_ptr<EmbeddingBackend> make_backend(const BackendConfig& b) {
  if (b.kind == "hash") return std::make_unique<HashBackend>(b.dim, b.seed, b.max_tokens);
  if (b.kind == "remote") return std::make_unique<RemoteBackend>(b.url, RemoteBackend::Options{b.batch_size, b.concurrency, b.timeout_seconds});
  fail(ErrorCode::InvalidArgument, "unknown backend kind '" + b.kind + "'");
}

/// A path naming a directory is read as `<id>.diff` files plus labels.csv;
/// anything else as corpus JSONL.
inline std::vector<Commit> load_corpus(const std::vector<std::string>& paths) {
  std::vector<Commit> all;
  for (const auto& p : paths) {
    auto part = fs::is_directory(p) ? read_diff_directory(p, fs::path(p) / "labels.csv") : read_jsonl_file(p);
    for (auto& c : part) all.push_back(std::move(c));
  }
  validate_corpus(all);
  return all;
}

inline CorpusSplit make_split(const RunConfig& cfg, const std::vector<Commit>& commits, std::vector<std::string>* notes = nullptr) {
  CorpusSplit split = cfg.split_mode == "project"
                          ? project_wise_split(commits, cfg.test_frac, cfg.val_frac, derive_seed(cfg.seed, "split"))
                          : chronological_split(commits, cfg.train_frac, cfg.val_frac);
  if (cfg.undersample > 0.0) {
    split.train = undersample(split.train, cfg.undersample, derive_seed(cfg.seed, "undersample:train"));
    const bool val_has_positive = std::any_of(split.validation.begin(), split.validation.end(), [](const Commit& c) { return c.label; });
    if (val_has_positive)
      split.validation = undersample(split.validation, cfg.undersample, derive_seed(cfg.seed, "undersample:validation"));
    else if (notes)
      notes->push_back("validation split has no vulnerability-fixing commit; left as is");
  }
  return split;
}

// ---------------------------------------------------------------------------
// decompose

struct CommitIssue {
  std::size_t line = 0;  // 1-based line in the input file, 0 if unknown
  std::string commit;
  std::string message;
};

struct DecomposeReport {
  std::map<std::string, std::size_t> fragments;  // granularity -> records written
  std::size_t commits = 0;
  std::vector<CommitIssue> issues;

  int exit_code() const noexcept { return issues.empty() ? 0 : 2; }
};

inline nlohmann::json fragment_record(const Commit& c, const Fragment& f) {
  auto opt = [](const std::optional<std::size_t>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j = {{"commit", c.id},          {"granularity", std::string(to_string(f.granularity))},
                      {"removed", f.removed_code}, {"added", f.added_code},
                      {"origin", {opt(f.origin.file), opt(f.origin.hunk), opt(f.origin.line)}}};
  if (f.line_side) j["side"] = *f.line_side == Side::Removed ? "removed" : "added";
  return j;
}

/// Writes `<out>/<granularity>.jsonl` for each requested granularity.
/// Unreadable records and undecomposable commits are reported, not fatal.
inline DecomposeReport cmd_decompose(const fs::path& input, const fs::path& out_dir, std::span<const Granularity> granularities) {
  std::ifstream in(input);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + input.string());
  auto loaded = read_jsonl_lenient(in);
  DecomposeReport report;
  for (const auto& issue : loaded.issues) report.issues.push_back({issue.line, "", issue.message});

  fs::create_directories(out_dir);
  std::map<Granularity, std::ofstream> outs;
  for (auto g : granularities) {
    const auto path = out_dir / (std::string(to_string(g)) + ".jsonl");
    outs[g].open(path, std::ios::trunc);
    require(static_cast<bool>(outs[g]), ErrorCode::Io, "cannot write " + path.string());
    report.fragments[std::string(to_string(g))] = 0;
  }
  for (std::size_t i = 0; i < loaded.commits.size(); ++i) {
    const auto& c = loaded.commits[i];
    const std::size_t line = i < loaded.lines.size() ? loaded.lines[i] : 0;
    std::map<Granularity, std::vector<Fragment>> parts;
    try {
      for (auto g : granularities) parts[g] = decompose(c, g);
    } catch (const Error& e) {
      report.issues.push_back({line, c.id, e.what()});
      continue;
    }
    ++report.commits;
    for (auto& [g, frags] : parts) {
      for (const auto& f : frags) outs[g] << fragment_record(c, f).dump() << '\n';
      report.fragments[std::string(to_string(g))] += frags.size();
    }
  }
  std::ostringstream errors;
  for (const auto& issue : report.issues)
    errors << nlohmann::json{{"line", issue.line}, {"commit", issue.commit}, {"error", issue.message}}.dump() << '\n';
  write_text_file(out_dir / "errors.jsonl", errors.str());
  return report;
}

// ---------------------------------------------------------------------------
// Model persistence

inline std::string base_checkpoint_name(EmbeddingSetting s) { return "base-" + to_string(s) + ".ckpt"; }
inline constexpr const char* kEnsembleCheckpoint = "ensemble.ckpt";

inline std::string serialize_base(BaseModel& b) {
  const nlohmann::json meta = {{"kind", "base"},
                               {"setting", to_string(b.setting())},
                               {"extractor", std::string(to_string(b.net.extractor_kind()))},
                               {"model", to_json(b.net.config())}};
  return serialize_checkpoint(b.net.params(), meta, b.adam_steps);
}

inline std::string serialize_ensemble(EnsembleModel& m) {
  nlohmann::json settings = nlohmann::json::array();
  for (const auto& b : m.bases) settings.push_back(to_string(b.setting()));
  const nlohmann::json meta = {{"kind", "ensemble"},
                               {"a", m.a},
                               {"settings", settings},
                               {"input_width", m.classifier.input_width()},
                               {"hidden", m.classifier.hidden_width()}};
  return serialize_checkpoint(m.classifier.params(), meta, m.adam_steps);
}

inline BaseModel load_base(const fs::path& path) {
  const auto data = deserialize_checkpoint(read_binary_file(path));
  require(data.meta.value("kind", "") == "base", ErrorCode::CheckpointFormat, path.string() + " is not a base checkpoint");
  BaseNetwork net(parse_setting(data.meta.at("setting").get<std::string>()), extractor_config_from_json(data.meta.at("model")),
                  parse_extractor_kind(data.meta.at("extractor").get<std::string>()));
  load_params(data, net.params());
  return BaseModel{std::move(net), {}, data.adam_steps};
}

inline EnsembleModel load_ensemble(const fs::path& dir) {
  const auto data = deserialize_checkpoint(read_binary_file(dir / kEnsembleCheckpoint));
  require(data.meta.value("kind", "") == "ensemble", ErrorCode::CheckpointFormat, "not an ensemble checkpoint");
  EnsembleModel m;
  for (const auto& name : data.meta.at("settings")) m.bases.push_back(load_base(dir / base_checkpoint_name(parse_setting(name.get<std::string>()))));
  m.a = data.meta.at("a").get<std::size_t>();
  m.classifier = EnsembleClassifier(data.meta.at("input_width").get<std::size_t>(), data.meta.at("hidden").get<std::size_t>());
  require(m.classifier.input_width() == m.feature_width(), ErrorCode::CheckpointFormat, "classifier width does not match base features");
  load_params(data, m.classifier.params());
  m.adam_steps = data.adam_steps;
  return m;
}

// ---------------------------------------------------------------------------
// train

struct TrainResult {
  nlohmann::json manifest;
  EnsembleModel model;
  CorpusSplit split;
};

inline nlohmann::json split_ids(const CorpusSplit& split) {
  auto ids = [](const std::vector<Commit>& cs) {
    std::vector<std::string> out;
    for (const auto& c : cs) out.push_back(c.id);
    return out;
  };
  return {{"train", ids(split.train)}, {"validation", ids(split.validation)}, {"test", ids(split.test)}};
}

/// Trains every configured base model and the ensemble; writes checkpoints,
/// split.json and manifest.json into the output directory.
inline TrainResult cmd_train(const RunConfig& cfg, std::ostream& log = std::cerr) {
  cfg.validate();
  auto backend = make_backend(cfg.backend);
  EmbeddingCache cache(*backend, cfg.model);
  cache.check_backend();  // an unreachable or mismatched backend fails here, before any training

  std::vector<std::string> notes;
  const auto corpus = load_corpus(cfg.corpus);
  auto split = make_split(cfg, corpus, &notes);
  log << "split: train " << split.train.size() << ", validation " << split.validation.size() << ", test " << split.test.size() << '\n';

  TrainSchedule schedule = cfg.schedule;
  schedule.seed = cfg.seed;
  auto bases = train_bases(cfg.settings, split, schedule, cache, cfg.threads);
  nlohmann::json base_logs = nlohmann::json::object();
  for (const auto& b : bases) {
    log << to_string(b.setting()) << ": best epoch " << b.log.best_epoch << ", validation loss " << b.log.best_val_loss << '\n';
    base_logs[to_string(b.setting())] = to_json(b.log);
  }
  auto model = train_ensemble(std::move(bases), split, schedule, cache, cfg.ensemble_hidden);
  log << "ensemble: a = " << model.a << ", validation loss " << model.log.best_val_loss << '\n';

  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  nlohmann::json checkpoints = nlohmann::json::array();
  for (auto& b : model.bases) {
    const auto bytes = serialize_base(b);
    const auto name = base_checkpoint_name(b.setting());
    write_binary_file(out / name, bytes);
    checkpoints.push_back({{"path", name}, {"setting", to_string(b.setting())}, {"digest", digest_hex(bytes)}});
  }
  const auto ens_bytes = serialize_ensemble(model);
  write_binary_file(out / kEnsembleCheckpoint, ens_bytes);
  checkpoints.push_back({{"path", kEnsembleCheckpoint}, {"setting", nullptr}, {"digest", digest_hex(ens_bytes)}});
  write_text_file(out / "split.json", split_ids(split).dump(2) + "\n");

  nlohmann::json settings = nlohmann::json::array();
  for (auto s : cfg.settings) settings.push_back(to_string(s));
  nlohmann::json manifest = {{"config", to_json(cfg)},
                             {"settings", settings},
                             {"schedule", to_json(schedule)},
                             {"seeds", {{"run", cfg.seed}, {"split", derive_seed(cfg.seed, "split")}}},
                             {"backend", backend->identity()},
                             {"a", model.a},
                             {"checkpoints", checkpoints},
                             {"split", {{"file", "split.json"}, {"train", split.train.size()}, {"validation", split.validation.size()}, {"test", split.test.size()}}},
                             {"base_logs", base_logs},
                             {"ensemble_log", to_json(model.log)},
                             {"notes", notes}};
  write_text_file(out / "manifest.json", manifest.dump(2) + "\n");
  return {std::move(manifest), std::move(model), std::move(split)};
}

// ---------------------------------------------------------------------------
// rank / evaluate

inline std::string ranked_csv(const RankedList& list) {
  std::ostringstream out;
  out.precision(17);
  out << "rank,id,prob,score,loc,hunks,files,label\n";
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& c = list[i];
    out << i + 1 << ',' << c.id << ',' << c.prob << ',' << c.score << ',' << c.loc << ',' << c.hunks << ',' << c.files << ',';
    if (c.label) out << (*c.label ? 1 : 0);
    out << '\n';
  }
  return out.str();
}

inline RankedList parse_ranked_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::InvalidArgument, "ranked list is empty");
  const auto header = detail::split_csv_line(line);
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };
  const auto c_id = column("id"), c_score = column("score"), c_loc = column("loc");
  require(c_id && c_score && c_loc, ErrorCode::InvalidArgument, "ranked list needs id, score and loc columns");
  const auto c_rank = column("rank"), c_prob = column("prob"), c_hunks = column("hunks"), c_files = column("files"), c_label = column("label");

  std::vector<std::pair<std::size_t, ScoredCommit>> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    auto cell = [&](std::optional<std::size_t> col) -> std::string { return col && *col < cells.size() ? cells[*col] : std::string(); };
    try {
      ScoredCommit c;
      c.id = cell(c_id);
      c.score = std::stod(cell(c_score));
      c.prob = c_prob ? std::stod(cell(c_prob)) : c.score;
      c.loc = std::stoul(cell(c_loc));
      c.hunks = c_hunks ? std::stoul(cell(c_hunks)) : 0;
      c.files = c_files ? std::stoul(cell(c_files)) : 0;
      const auto lab = cell(c_label);
      if (!lab.empty()) {
        require(lab == "0" || lab == "1", ErrorCode::InvalidArgument, "label must be 0 or 1");
        c.label = lab == "1";
      }
      const std::size_t r = c_rank ? std::stoul(cell(c_rank)) : rows.size() + 1;
      rows.emplace_back(r, std::move(c));
    } catch (const std::logic_error& e) {
      fail(ErrorCode::InvalidArgument, "ranked list line " + std::to_string(number) + ": " + e.what());
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  RankedList list;
  for (auto& [_, c] : rows) list.push_back(std::move(c));
  return list;
}

inline RankedList read_ranked_csv(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  return parse_ranked_csv(in);
}

struct RankOptions {
  fs::path model_dir;
  std::vector<std::string> corpus;  // empty: the test split recorded by training
  fs::path output;
  std::optional<bool> adjust;
  std::optional<std::string> remote_url;
};

/// Scores commits with a trained model and writes the ranked CSV.
inline RankedList cmd_rank(const RankOptions& opt) {
  const auto manifest = read_json_file(opt.model_dir / "manifest.json");
  auto cfg = run_config_from_json(manifest.at("config"));
  if (opt.remote_url) {
    cfg.backend.kind = "remote";
    cfg.backend.url = *opt.remote_url;
  }
  auto backend = make_backend(cfg.backend);
  EmbeddingCache cache(*backend, cfg.model);
  cache.check_backend();

  std::vector<Commit> commits;
  if (!opt.corpus.empty()) {
    commits = load_corpus(opt.corpus);
  } else {
    const auto ids = read_json_file(opt.model_dir / "split.json").at("test").get<std::vector<std::string>>();
    const std::set<std::string> wanted(ids.begin(), ids.end());
    for (auto& c : load_corpus(cfg.corpus))
      if (wanted.contains(c.id)) commits.push_back(std::move(c));
  }
  const auto model = load_ensemble(opt.model_dir);
  auto list = rank(model, commits, cache, opt.adjust.value_or(cfg.adjust));
  write_text_file(opt.output, ranked_csv(list));
  return list;
}

inline std::string curve_csv(const RankedList& ranked) {
  std::ostringstream out;
  out.precision(17);
  out << "curve,x,y\n";
  const std::pair<const char*, RankedList> curves[] = {{"model", ranked}, {"optimal", optimal_order(ranked)}, {"worst", worst_order(ranked)}};
  for (const auto& [name, order] : curves)
    for (const auto& p : alberg_curve(order)) out << name << ',' << p.x << ',' << p.y << '\n';
  return out.str();
}

inline const std::vector<double>& default_percents() {
  static const std::vector<double> Ls{5, 10, 15, 20};
  return Ls;
}

inline MetricReport cmd_evaluate(const fs::path& ranked_path, std::span<const double> Ls, std::span<const CostUnit> units,
                                 const fs::path& output, const std::optional<fs::path>& curve_path = std::nullopt) {
  const auto ranked = read_ranked_csv(ranked_path);
  for (const auto& c : ranked) require(c.label.has_value(), ErrorCode::InvalidArgument, "commit " + c.id + " has no label");
  const auto report = evaluate(ranked, Ls, units);
  write_text_file(output, to_json(report).dump(2) + "\n");
  if (curve_path) write_text_file(*curve_path, curve_csv(ranked));
  return report;
}

/// Ranks the test split with one of the simple baselines.
inline RankedList cmd_baseline(const RunConfig& cfg, const std::string& name, const fs::path& output) {
  cfg.validate();
  const auto corpus = load_corpus(cfg.corpus);
  const auto split = make_split(cfg, corpus);
  RankedList list;
  if (name == "loc")
    list = baseline_loc_sensitive(split.test);
  else if (name == "lapredict")
    list = baseline_lapredict(split.train, split.test);
  else
    fail(ErrorCode::InvalidArgument, "unknown baseline '" + name + "' (expected loc or lapredict)");
  write_text_file(output, ranked_csv(list));
  return list;
}

// ---------------------------------------------------------------------------

/// Runs a command body, mapping failures onto exit codes: input problems
/// (library errors) give 2, anything else 1.
template <class Fn>
int run_guarded(Fn&& fn, std::ostream& err = std::cerr) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace vfscan
