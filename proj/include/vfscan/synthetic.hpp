#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vfscan/corpus.hpp"
#include "vfscan/errors.hpp"
#include "vfscan/rng.hpp"

namespace vfscan {

// Generator for labelled toy corpora. Vulnerability-fixing commits carry a
// planted identifier that never occurs in other commits; everything else is
// drawn from one shared distribution unless a size bias is requested.

enum class PlantMode {
  Hunk,         // planted token on one added line of exactly one hunk
  LineOrFile,   // half the positives: one planted line; other half: a token in every hunk of one file
};

struct SynthConfig {
  std::size_t commits = 2000;
  double vf_rate = 0.05;
  std::size_t projects = 20;
  std::uint64_t seed = 1;
  PlantMode plant = PlantMode::Hunk;
  double vf_size_scale = 1.0;  // < 1 shrinks vulnerability-fixing commits
  std::string line_token = "sanitize_bounds";
  std::string file_token = "guarded_alloc";
};

namespace synth_detail {

inline constexpr std::array<const char*, 48> kWords = {
    "buf",   "len",    "count", "node",  "next",   "prev",  "data",  "size",  "index", "value", "key",    "item",
    "list",  "map",    "entry", "state", "config", "ctx",   "req",   "resp",  "path",  "name",  "user",   "token",
    "cache", "result", "err",   "flag",  "mode",   "start", "end",   "pos",   "line",  "col",   "offset", "total",
    "limit", "child",  "parent", "root", "iter",   "tmp",   "out",   "in",    "src",   "dst",   "handle", "stream"};

inline constexpr std::array<const char*, 16> kCalls = {"read", "write", "parse", "update", "append", "copy", "init", "free",
                                                       "lookup", "insert", "remove", "flush", "open", "close", "format", "merge"};

inline std::string word(Rng& rng) {
  std::string w = kWords[rng.index(kWords.size())];
  if (rng.bernoulli(0.3)) w += std::to_string(rng.index(8));
  return w;
}

inline std::string call(Rng& rng) { return kCalls[rng.index(kCalls.size())]; }

inline std::string code_line(Rng& rng) {
  switch (rng.index(6)) {
    case 0: return word(rng) + " = " + call(rng) + "(" + word(rng) + ", " + word(rng) + ");";
    case 1: return "if (" + word(rng) + " < " + word(rng) + ") {";
    case 2: return "return " + word(rng) + ";";
    case 3: return word(rng) + "." + call(rng) + "(" + word(rng) + ");";
    case 4: return word(rng) + " += " + std::to_string(rng.index(100)) + ";";
    default: return "}";
  }
}

/// 1 + geometric draw with the given mean excess, capped.
inline std::size_t geometric(Rng& rng, double mean_excess, std::size_t cap) {
  const double p = 1.0 / (1.0 + mean_excess);
  std::size_t n = 1;
  while (n < cap && !rng.bernoulli(p)) ++n;
  return n;
}

inline std::vector<std::string> lines(Rng& rng, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(code_line(rng));
  return out;
}

inline Hunk random_hunk(Rng& rng, double scale) {
  Hunk h;
  const bool bulk = rng.bernoulli(0.05);
  const double mean = (bulk ? 20.0 : 2.0) * scale;
  h.removed = lines(rng, geometric(rng, mean, 200) - 1);
  h.added = lines(rng, geometric(rng, mean, 200));
  return h;
}

inline std::string random_path(Rng& rng) {
  static constexpr std::array<const char*, 6> kDirs = {"src", "lib", "core", "util", "net", "io"};
  static constexpr std::array<const char*, 4> kExts = {".c", ".java", ".py", ".cpp"};
  return std::string(kDirs[rng.index(kDirs.size())]) + "/" + word(rng) + kExts[rng.index(kExts.size())];
}

inline void insert_line(Rng& rng, std::vector<std::string>& body, std::string line) {
  body.insert(body.begin() + static_cast<std::ptrdiff_t>(rng.index(body.size() + 1)), std::move(line));
}

}  // namespace synth_detail

/// A random multi-file commit; `scale` multiplies the expected hunk length.
inline Commit random_commit(Rng& rng, std::string id, double scale = 1.0) {
  using namespace synth_detail;
  Commit c;
  c.id = std::move(id);
  const std::size_t n_files = geometric(rng, 0.5 * std::max(scale, 0.25), 12);
  for (std::size_t f = 0; f < n_files; ++f) {
    FileDiff fd;
    fd.path = random_path(rng) + (n_files > 1 ? std::to_string(f) : "");
    const std::size_t n_hunks = geometric(rng, 0.5 * std::max(scale, 0.25), 8);
    for (std::size_t k = 0; k < n_hunks; ++k) fd.hunks.push_back(random_hunk(rng, scale));
    c.files.push_back(std::move(fd));
  }
  return c;
}

namespace synth_detail {

inline void plant_line(Rng& rng, Commit& c, const std::string& token) {
  auto& file = c.files[rng.index(c.files.size())];
  auto& hunk = file.hunks[rng.index(file.hunks.size())];
  insert_line(rng, hunk.added, "if (!" + token + "(" + word(rng) + ", " + word(rng) + ")) return err;");
}

inline void plant_file(Rng& rng, Commit& c, const std::string& token) {
  auto& file = c.files[rng.index(c.files.size())];
  for (auto& hunk : file.hunks) insert_line(rng, hunk.added, word(rng) + " = " + token + "(" + word(rng) + ");");
}

}  // namespace synth_detail

inline std::vector<Commit> synthesize_corpus(const SynthConfig& cfg) {
  require(cfg.commits >= 1 && cfg.projects >= 1, ErrorCode::InvalidArgument, "corpus needs commits and projects");
  require(cfg.vf_rate >= 0.0 && cfg.vf_rate <= 1.0 && cfg.vf_size_scale > 0.0, ErrorCode::InvalidArgument, "bad synthetic rates");
  Rng rng(cfg.seed);
  const auto n_vf = static_cast<std::size_t>(std::lround(cfg.vf_rate * static_cast<double>(cfg.commits)));

  std::vector<std::size_t> order(cfg.commits);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<bool> positive(cfg.commits, false);
  for (std::size_t k = 0; k < n_vf; ++k) positive[order[k]] = true;

  std::vector<Commit> out;
  out.reserve(cfg.commits);
  std::size_t planted = 0;
  for (std::size_t i = 0; i < cfg.commits; ++i) {
    const bool vf = positive[i];
    Commit c = random_commit(rng, "c" + std::to_string(i), vf ? cfg.vf_size_scale : 1.0);
    c.project = "proj" + std::to_string(i < cfg.projects ? i : rng.index(cfg.projects));
    c.timestamp = 1'600'000'000 + static_cast<std::int64_t>(i) * 3600;
    c.label = vf;
    if (vf) {
      if (cfg.plant == PlantMode::LineOrFile && planted % 2 == 1)
        synth_detail::plant_file(rng, c, cfg.file_token);
      else
        synth_detail::plant_line(rng, c, cfg.line_token);
      ++planted;
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace vfscan
