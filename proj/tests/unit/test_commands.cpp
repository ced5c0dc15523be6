#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "vfscan/commands.hpp"
#include "vfscan/synthetic.hpp"

using namespace vfscan;
using nlohmann::json;

namespace {

fs::path scratch_root() { return fs::temp_directory_path() / ("vfscan_cmd_" + std::to_string(::getpid())); }

// removes everything the cases wrote once the binary exits
struct ScratchCleanup {
  ~ScratchCleanup() {
    std::error_code ec;
    fs::remove_all(scratch_root(), ec);
  }
} scratch_cleanup;

fs::path scratch(const std::string& name) {
  const auto dir = scratch_root() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path toy_corpus(const fs::path& dir) {
  SynthConfig sc;
  sc.commits = 120;
  sc.vf_rate = 0.2;
  sc.projects = 6;
  sc.seed = 21;
  const auto path = dir / "corpus.jsonl";
  write_jsonl_file(path, synthesize_corpus(sc));
  return path;
}

RunConfig small_run(const fs::path& corpus, const fs::path& out) {
  RunConfig cfg;
  cfg.corpus = {corpus.string()};
  cfg.settings = {parse_setting("line-cf")};
  cfg.model.dim = 16;
  cfg.model.hidden = 4;
  cfg.model.channels = 4;
  cfg.model.max_files = 3;
  cfg.model.max_lines = 8;
  cfg.model.max_hunks = 4;
  cfg.ensemble_hidden = 4;
  cfg.backend.dim = 16;
  cfg.schedule.max_epochs = 2;
  cfg.schedule.patience = 1;
  cfg.schedule.ensemble_epochs = 2;
  cfg.schedule.lr = 1e-3;
  cfg.schedule.batch_size = 4;
  cfg.output_dir = out.string();
  cfg.seed = 4;
  return cfg;
}

std::size_t count_checkpoints(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".ckpt") ++n;
  return n;
}

ScoredCommit row(std::string id, std::size_t loc, bool vf, double score) {
  ScoredCommit c;
  c.id = std::move(id);
  c.loc = loc;
  c.hunks = 1;
  c.files = 1;
  c.label = vf;
  c.prob = c.score = score;
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(VFSCAN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("run config survives a JSON round trip") {
  RunConfig cfg;
  cfg.corpus = {"a.jsonl", "b"};
  cfg.split_mode = "chronological";
  cfg.train_frac = 0.7;
  cfg.settings = {parse_setting("hunk-cd"), parse_setting("line-cf")};
  cfg.schedule.max_epochs = 3;
  cfg.model.hidden = 12;
  cfg.ensemble_hidden = 5;
  cfg.adjust = false;
  cfg.seed = 99;
  cfg.threads = 2;
  const auto j = to_json(cfg);
  const auto back = run_config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.schedule.seed == 99);
  CHECK(back.ensemble_hidden == 5);
}

TEST_CASE("absent keys keep defaults") {
  const auto cfg = run_config_from_json(json{{"corpus", {"x.jsonl"}}});
  CHECK(cfg.settings.size() == 7);
  CHECK(cfg.schedule.lr == 1e-5);
  CHECK(cfg.schedule.batch_size == 1);
  CHECK(cfg.backend.kind == "hash");
  CHECK(cfg.ensemble_hidden == cfg.model.hidden);
  CHECK(cfg.adjust);
}

TEST_CASE("config validation rejects bad input before any work") {
  auto code_of = [](const json& j) {
    try {
      run_config_from_json(j);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;  // sentinel: nothing thrown
  };
  CHECK(code_of({{"corpuz", {}}}) == ErrorCode::InvalidArgument);
  CHECK(code_of({{"schedule", {{"epochs", 3}}}}) == ErrorCode::InvalidArgument);
  CHECK(code_of({{"split", {{"mode", "random"}}}}) == ErrorCode::InvalidArgument);
  CHECK(code_of({{"settings", {"line-cd"}}}) == ErrorCode::InvalidSetting);
  CHECK(code_of({{"settings", {"hunk-cf", "hunk-cf"}}}) == ErrorCode::InvalidArgument);
  CHECK(code_of({{"backend", {{"dim", 64}}}}) == ErrorCode::DimensionMismatch);
  CHECK(code_of({{"backend", {{"kind", "remote"}}}}) == ErrorCode::InvalidArgument);
  CHECK(code_of({{"seed", "seven"}}) == ErrorCode::InvalidArgument);
  CHECK(code_of({{"schedule", {{"lr", 0.0}}}}) == ErrorCode::InvalidArgument);
}

TEST_CASE("decompose writes one record per line fragment of the example commit") {
  const auto dir = scratch("decompose_fig4");
  write_jsonl_file(dir / "in.jsonl", {fixtures::fig4_commit()});
  const auto report = cmd_decompose(dir / "in.jsonl", dir / "out", kAllGranularities);
  CHECK(report.exit_code() == 0);
  CHECK(report.commits == 1);

  const auto lines = read_lines(dir / "out" / "line.jsonl");
  REQUIRE(lines.size() == 8);
  CHECK(read_lines(dir / "out" / "hunk.jsonl").size() == 4);
  CHECK(read_lines(dir / "out" / "file.jsonl").size() == 2);
  CHECK(read_lines(dir / "out" / "commit.jsonl").size() == 1);

  const auto first = json::parse(lines[0]);
  CHECK(first.at("commit") == "fig4");
  CHECK(first.at("granularity") == "line");
  CHECK(first.at("removed") == "int a = 0;");
  CHECK(first.at("added") == "");
  CHECK(first.at("origin") == json({0, 0, 0}));
  const auto last = json::parse(lines[7]);
  CHECK(last.at("added") == "log(sanitize(b));");
  CHECK(last.at("origin") == json({1, 1, 1}));

  const auto hunk = json::parse(read_lines(dir / "out" / "hunk.jsonl")[0]);
  CHECK(hunk.at("origin") == json({0, 0, nullptr}));
  const auto commit = json::parse(read_lines(dir / "out" / "commit.jsonl")[0]);
  CHECK(commit.at("origin") == json({nullptr, nullptr, nullptr}));
}

TEST_CASE("decompose of an empty corpus writes empty outputs and succeeds") {
  const auto dir = scratch("decompose_empty");
  write_text_file(dir / "in.jsonl", "");
  const auto report = cmd_decompose(dir / "in.jsonl", dir / "out", kAllGranularities);
  CHECK(report.exit_code() == 0);
  CHECK(report.commits == 0);
  for (auto g : kAllGranularities) {
    const auto p = dir / "out" / (std::string(to_string(g)) + ".jsonl");
    REQUIRE(fs::exists(p));
    CHECK(fs::file_size(p) == 0);
  }
}

TEST_CASE("decompose reports a corrupt record by line number") {
  const auto dir = scratch("decompose_corrupt");
  std::ostringstream text;
  text << commit_to_json(fixtures::fig4_commit("ok")).dump() << '\n'
       << "{not json\n"
       << commit_to_json(fixtures::fig4_commit("ok2")).dump() << '\n';
  write_text_file(dir / "in.jsonl", text.str());
  const auto report = cmd_decompose(dir / "in.jsonl", dir / "out", kAllGranularities);
  CHECK(report.exit_code() == 2);
  REQUIRE(report.issues.size() == 1);
  CHECK(report.issues[0].line == 2);
  CHECK(report.commits == 2);
  CHECK(read_lines(dir / "out" / "line.jsonl").size() == 16);

  const auto errors = read_lines(dir / "out" / "errors.jsonl");
  REQUIRE(errors.size() == 1);
  CHECK(json::parse(errors[0]).at("line") == 2);
}

TEST_CASE("decompose reports undecomposable commits without stopping") {
  const auto dir = scratch("decompose_degenerate");
  Commit empty;
  empty.id = "empty";
  empty.degenerate = true;
  write_jsonl_file(dir / "in.jsonl", {empty, fixtures::fig4_commit()});
  const std::vector<Granularity> only_hunk{Granularity::HunkLevel};
  const auto report = cmd_decompose(dir / "in.jsonl", dir / "out", only_hunk);
  CHECK(report.exit_code() == 2);
  REQUIRE(report.issues.size() == 1);
  CHECK(report.issues[0].commit == "empty");
  CHECK(report.issues[0].line == 1);
  CHECK(read_lines(dir / "out" / "hunk.jsonl").size() == 4);
  CHECK_FALSE(fs::exists(dir / "out" / "line.jsonl"));
}

TEST_CASE("training a single setting writes a base and an ensemble checkpoint") {
  const auto dir = scratch("train_single");
  const auto cfg = small_run(toy_corpus(dir), dir / "run");
  std::ostringstream log;
  const auto result = cmd_train(cfg, log);
  CHECK(count_checkpoints(dir / "run") == 2);
  CHECK(fs::exists(dir / "run" / "base-line-cf.ckpt"));
  CHECK(fs::exists(dir / "run" / kEnsembleCheckpoint));

  const auto manifest = read_json_file(dir / "run" / "manifest.json");
  CHECK(manifest == result.manifest);
  CHECK(manifest.at("checkpoints").size() == 2);
  CHECK(run_config_from_json(manifest.at("config")).seed == cfg.seed);
  for (const auto& ck : manifest.at("checkpoints"))
    CHECK(ck.at("digest") == digest_hex(read_binary_file(dir / "run" / ck.at("path").get<std::string>())));

  const auto split = read_json_file(dir / "run" / "split.json");
  CHECK(split.at("test").size() == result.split.test.size());
  CHECK(manifest.at("split").at("test") == result.split.test.size());
}

TEST_CASE("identical config and seed give identical checkpoints") {
  const auto dir = scratch("train_determinism");
  const auto corpus = toy_corpus(dir);
  std::ostringstream log;
  cmd_train(small_run(corpus, dir / "a"), log);
  cmd_train(small_run(corpus, dir / "b"), log);
  for (const auto* name : {"base-line-cf.ckpt", kEnsembleCheckpoint}) CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
  CHECK(read_json_file(dir / "a" / "manifest.json").at("checkpoints") == read_json_file(dir / "b" / "manifest.json").at("checkpoints"));

  auto other = small_run(corpus, dir / "c");
  other.seed = 5;
  cmd_train(other, log);
  CHECK(slurp(dir / "a" / kEnsembleCheckpoint) != slurp(dir / "c" / kEnsembleCheckpoint));
}

TEST_CASE("an unreachable remote backend fails before training starts") {
  const auto dir = scratch("train_remote_down");
  auto cfg = small_run(dir / "does-not-exist.jsonl", dir / "run");
  cfg.backend.kind = "remote";
  cfg.backend.url = "http://127.0.0.1:1";
  cfg.backend.timeout_seconds = 2;
  std::ostringstream log;
  try {
    cmd_train(cfg, log);
    FAIL("training did not fail");
  } catch (const Error& e) {
    // the corpus is never opened, so the backend check came first
    CHECK(e.code() == ErrorCode::BackendUnavailable);
  }
  CHECK_FALSE(fs::exists(dir / "run"));
  CHECK(log.str().empty());
}

TEST_CASE("rank scores the recorded test split and honours the adjustment switch") {
  const auto dir = scratch("rank");
  const auto cfg = small_run(toy_corpus(dir), dir / "run");
  std::ostringstream log;
  const auto trained = cmd_train(cfg, log);

  RankOptions opt;
  opt.model_dir = dir / "run";
  opt.output = dir / "ranked.csv";
  const auto list = cmd_rank(opt);
  CHECK(list.size() == trained.split.test.size());
  CHECK(read_lines(opt.output).size() == list.size() + 1);
  const auto again = cmd_rank(opt);
  CHECK(ranked_csv(again) == ranked_csv(list));

  for (const auto& c : list) {
    CHECK(c.score <= c.prob);
    CHECK(c.score == adjust(c.prob, c.loc, trained.model.a));
  }

  opt.adjust = false;
  opt.output = dir / "raw.csv";
  const auto raw = cmd_rank(opt);
  for (const auto& c : raw) CHECK(c.score == c.prob);

  const auto parsed = read_ranked_csv(dir / "ranked.csv");
  REQUIRE(parsed.size() == list.size());
  for (std::size_t i = 0; i < list.size(); ++i) {
    CHECK(parsed[i].id == list[i].id);
    CHECK(parsed[i].score == list[i].score);
    CHECK(parsed[i].prob == list[i].prob);
    CHECK(parsed[i].label == list[i].label);
  }

  const auto report = cmd_evaluate(dir / "ranked.csv", default_percents(), std::vector<CostUnit>{CostUnit::Loc}, dir / "report.json");
  const auto j = read_json_file(dir / "report.json");
  CHECK(j.at("auc") == report.auc);
  CHECK(j.at("cost_effort").at("loc").size() == 4);
}

TEST_CASE("evaluate on the optimal ordering gives Popt 1 at every budget") {
  const auto dir = scratch("evaluate_optimal");
  // VF commits by ascending LOC, then the rest by ascending LOC
  const RankedList order{row("v1", 2, true, 0.9), row("v2", 5, true, 0.8),  row("v3", 9, true, 0.7),
                         row("n1", 1, false, 0.6), row("n2", 4, false, 0.5), row("n3", 30, false, 0.4),
                         row("n4", 50, false, 0.3), row("n5", 80, false, 0.2)};
  write_text_file(dir / "ranked.csv", ranked_csv(order));
  const std::vector<CostUnit> units{kAllCostUnits, kAllCostUnits + 4};
  const auto report = cmd_evaluate(dir / "ranked.csv", default_percents(), units, dir / "report.json", dir / "curve.csv");
  REQUIRE(report.p_opt.size() == 4);
  for (const auto& [L, v] : report.p_opt) CHECK(v == Catch::Approx(1.0).margin(1e-12));
  CHECK(report.auc == 1.0);

  const auto j = read_json_file(dir / "report.json");
  for (const auto* key : {"5", "10", "15", "20"}) CHECK(j.at("p_opt").at(key).get<double>() == Catch::Approx(1.0).margin(1e-12));
  CHECK(j.at("cost_effort").size() == 4);
  // total LOC 181; 5% is 9.05 lines, enough for v1 and v2 only
  CHECK(j.at("cost_effort").at("loc").at("5").get<double>() == Catch::Approx(2.0 / 3.0));
  CHECK(j.at("inspected").at("commit").at("20").get<std::size_t>() == 1);

  const auto curve = read_lines(dir / "curve.csv");
  CHECK(curve.front() == "curve,x,y");
  std::map<std::string, std::size_t> per;
  for (std::size_t i = 1; i < curve.size(); ++i) ++per[curve[i].substr(0, curve[i].find(','))];
  CHECK(per.size() == 3);
  CHECK(per["model"] == per["optimal"]);
  CHECK(curve.back().substr(curve.back().find(',')) == ",100,100");
}

TEST_CASE("ranked CSV parsing") {
  SECTION("rank column decides order") {
    std::istringstream in("rank,id,prob,score,loc,hunks,files,label\n2,b,0.1,0.1,3,1,1,0\n1,a,0.9,0.8,4,2,1,1\n");
    const auto list = parse_ranked_csv(in);
    REQUIRE(list.size() == 2);
    CHECK(list[0].id == "a");
    CHECK(list[0].prob == 0.9);
    CHECK(list[0].hunks == 2);
    CHECK(*list[0].label);
    CHECK_FALSE(*list[1].label);
  }
  SECTION("minimal columns") {
    std::istringstream in("id,score,loc\nx,0.5,7\ny,0.2,3\n");
    const auto list = parse_ranked_csv(in);
    REQUIRE(list.size() == 2);
    CHECK(list[1].id == "y");
    CHECK(list[1].prob == 0.2);
    CHECK_FALSE(list[1].label.has_value());
  }
  SECTION("errors") {
    auto code_of = [](const std::string& text) {
      std::istringstream in(text);
      try {
        parse_ranked_csv(in);
      } catch (const Error& e) {
        return std::pair{e.code(), std::string(e.what())};
      }
      return std::pair{ErrorCode::Io, std::string()};
    };
    CHECK(code_of("").first == ErrorCode::InvalidArgument);
    CHECK(code_of("id,loc\na,3\n").first == ErrorCode::InvalidArgument);
    const auto [code, what] = code_of("id,score,loc,label\na,0.1,3,1\nb,zero,3,0\n");
    CHECK(code == ErrorCode::InvalidArgument);
    CHECK(what.find("line 3") != std::string::npos);
    CHECK(code_of("id,score,loc,label\na,0.1,3,yes\n").first == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("evaluate refuses unlabelled rows") {
  const auto dir = scratch("evaluate_unlabelled");
  write_text_file(dir / "ranked.csv", "id,score,loc,label\na,0.9,3,1\nb,0.2,5,\n");
  CHECK_THROWS_AS(cmd_evaluate(dir / "ranked.csv", default_percents(), std::vector<CostUnit>{CostUnit::Loc}, dir / "r.json"), Error);
}

TEST_CASE("LOC baseline command ranks the test split by ascending size") {
  const auto dir = scratch("baseline");
  auto cfg = small_run(toy_corpus(dir), dir / "run");
  const auto list = cmd_baseline(cfg, "loc", dir / "b.csv");
  const auto split = make_split(cfg, load_corpus(cfg.corpus));
  REQUIRE(list.size() == split.test.size());
  for (std::size_t i = 1; i < list.size(); ++i) CHECK(list[i - 1].loc <= list[i].loc);
  CHECK(read_ranked_csv(dir / "b.csv").size() == list.size());
  CHECK_THROWS_AS(cmd_baseline(cfg, "random", dir / "x.csv"), Error);
}

TEST_CASE("run_guarded maps failures onto exit codes") {
  std::ostringstream err;
  CHECK(run_guarded([] { return 0; }, err) == 0);
  CHECK(run_guarded([]() -> int { fail(ErrorCode::CorpusFormat, "bad"); }, err) == 2);
  CHECK(run_guarded([]() -> int { throw std::runtime_error("boom"); }, err) == 1);
  CHECK(err.str().find("bad") != std::string::npos);
  CHECK(err.str().find("internal error: boom") != std::string::npos);
}

TEST_CASE("command line exit codes") {
  const auto dir = scratch("cli");
  const auto d = dir.string();
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("train --corpus x.jsonl --no-such-flag") == 2);

  CHECK(run_cli("synth --out " + d + "/c.jsonl --commits 120 --vf-rate 0.2 --projects 6 --seed 21") == 0);
  CHECK(read_lines(dir / "c.jsonl").size() == 120);
  CHECK(run_cli("decompose --input " + d + "/c.jsonl --out " + d + "/frag --granularity hunk") == 0);
  CHECK(fs::exists(dir / "frag" / "hunk.jsonl"));
  CHECK_FALSE(fs::exists(dir / "frag" / "line.jsonl"));

  write_text_file(dir / "bad.jsonl", "{\n");
  CHECK(run_cli("decompose --input " + d + "/bad.jsonl --out " + d + "/badfrag") == 2);
  CHECK(run_cli("decompose --input " + d + "/c.jsonl --out " + d + "/frag2 --granularity paragraph") == 2);

  CHECK(run_cli("train --corpus " + d + "/c.jsonl --split sideways") == 2);
  CHECK(run_cli("evaluate --ranked " + d + "/missing.csv --out " + d + "/r.json") == 2);

  CHECK(run_cli("baseline --corpus " + d + "/c.jsonl --name loc --ranked " + d + "/b.csv") == 0);
  CHECK(run_cli("evaluate --ranked " + d + "/b.csv --out " + d + "/r.json --all-units --curve " + d + "/curve.csv") == 0);
  const auto report = read_json_file(dir / "r.json");
  CHECK(report.at("cost_effort").size() == 4);
  CHECK(report.at("p_opt").size() == 4);
  CHECK(run_cli("evaluate --ranked " + d + "/b.csv --out " + d + "/r10.json --L 10") == 0);
  CHECK(read_json_file(dir / "r10.json").at("p_opt").size() == 1);
  CHECK(read_json_file(dir / "r10.json").at("cost_effort").begin().key() == "loc");
}

TEST_CASE("train flags override the config file") {
  const auto dir = scratch("cli_config");
  const auto d = dir.string();
  const auto corpus = toy_corpus(dir);
  auto cfg = small_run(corpus, dir / "run");
  write_text_file(dir / "cfg.json", to_json(cfg).dump(2));
  const auto out = dir / "printed.json";
  const std::string cmd = std::string(VFSCAN_CLI_PATH) + " train --config " + d + "/cfg.json --seed 8 --no-adjust --max-epochs 1 --print-config > " +
                          out.string() + " 2>/dev/null";
  REQUIRE(std::system(cmd.c_str()) == 0);
  const auto printed = run_config_from_json(read_json_file(out));
  CHECK(printed.seed == 8);
  CHECK_FALSE(printed.adjust);
  CHECK(printed.schedule.max_epochs == 1);
  CHECK(printed.model.hidden == 4);
  CHECK(printed.corpus == cfg.corpus);

  CHECK(run_cli("train --config " + d + "/cfg.json --out " + d + "/cli_run") == 0);
  CHECK(count_checkpoints(dir / "cli_run") == 2);
  CHECK(run_cli("rank --model " + d + "/cli_run --out " + d + "/ranked.csv") == 0);
  CHECK(run_cli("evaluate --ranked " + d + "/ranked.csv --out " + d + "/report.json") == 0);
  CHECK(run_cli("rank --model " + d + "/nowhere --out " + d + "/x.csv") == 2);
}
