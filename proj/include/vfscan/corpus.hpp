#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "vfscan/errors.hpp"
#include "vfscan/rng.hpp"

namespace vfscan {

struct Hunk {
  std::vector<std::string> removed;
  std::vector<std::string> added;
  std::optional<std::string> header;

  bool operator==(const Hunk&) const = default;
};

struct FileDiff {
  std::string path;
  std::vector<Hunk> hunks;

  bool operator==(const FileDiff&) const = default;
};

struct Commit {
  std::string id;
  std::string project;
  std::optional<std::int64_t> timestamp;
  bool label = false;
  std::vector<FileDiff> files;
  // Optional extras carried through the JSONL format.
  std::string message;
  bool degenerate = false;

  bool operator==(const Commit&) const = default;
};

struct CorpusSplit {
  std::vector<Commit> train;
  std::vector<Commit> validation;
  std::vector<Commit> test;
};

// ---------------------------------------------------------------------------
// Unified diff parsing

namespace detail {

inline bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

inline std::optional<std::size_t> parse_count(std::string_view s) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

struct HunkRange {
  std::size_t old_count = 1;
  std::size_t new_count = 1;
};

// "@@ -a[,b] +c[,d] @@[ section]"
inline std::optional<HunkRange> parse_hunk_header(std::string_view line) {
  if (!starts_with(line, "@@ -")) return std::nullopt;
  const auto close = line.find(" @@", 4);
  if (close == std::string_view::npos) return std::nullopt;
  const std::string_view body = line.substr(4, close - 4);
  const auto plus = body.find(" +");
  if (plus == std::string_view::npos) return std::nullopt;

  auto parse_side = [](std::string_view side, std::size_t& count) {
    const auto comma = side.find(',');
    if (!parse_count(side.substr(0, comma))) return false;
    if (comma == std::string_view::npos) {
      count = 1;
      return true;
    }
    auto c = parse_count(side.substr(comma + 1));
    if (!c) return false;
    count = *c;
    return true;
  };

  HunkRange range;
  if (!parse_side(body.substr(0, plus), range.old_count)) return std::nullopt;
  if (!parse_side(body.substr(plus + 2), range.new_count)) return std::nullopt;
  return range;
}

inline std::string strip_prefix_path(std::string_view raw) {
  auto tab = raw.find('\t');
  if (tab != std::string_view::npos) raw = raw.substr(0, tab);
  if (starts_with(raw, "a/") || starts_with(raw, "b/")) raw.remove_prefix(2);
  return std::string(raw);
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

}  // namespace detail

/// Parses a git-style unified diff into per-file hunks of changed lines.
/// Context lines are dropped and binary sections skipped. Hunk extents are
/// taken from the @@ header counts, so a removed line that happens to start
/// with "--" is never mistaken for a file header.
inline std::vector<FileDiff> parse_unified_diff(std::string_view text) {
  std::vector<FileDiff> files;
  const auto lines = detail::split_lines(text);

  std::optional<FileDiff> current;
  bool current_binary = false;
  std::string git_path;  // from "diff --git a/x b/y"
  std::string old_path;

  auto flush = [&] {
    if (current && !current_binary && !current->hunks.empty()) files.push_back(std::move(*current));
    current.reset();
    current_binary = false;
  };

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = lines[i];

    if (detail::starts_with(line, "diff --git ")) {
      flush();
      current = FileDiff{};
      const auto b = line.rfind(" b/");
      git_path = b == std::string_view::npos ? std::string{} : std::string(line.substr(b + 3));
      current->path = git_path;
      old_path.clear();
      continue;
    }
    if (detail::starts_with(line, "Binary files ") || detail::starts_with(line, "GIT binary patch")) {
      if (!current) current = FileDiff{};
      current_binary = true;
      continue;
    }
    if (detail::starts_with(line, "--- ")) {
      // A bare unified diff (no "diff --git" line) starts a new file here.
      if (!current || !current->hunks.empty()) {
        flush();
        current = FileDiff{};
      }
      old_path = detail::strip_prefix_path(line.substr(4));
      if (current->path.empty() && old_path != "/dev/null") current->path = old_path;
      continue;
    }
    if (detail::starts_with(line, "+++ ")) {
      if (!current) current = FileDiff{};
      const std::string new_path = detail::strip_prefix_path(line.substr(4));
      if (new_path != "/dev/null") current->path = new_path;
      continue;
    }
    if (detail::starts_with(line, "@@")) {
      const auto range = detail::parse_hunk_header(line);
      if (!range) fail(ErrorCode::MalformedDiff, "invalid hunk header at line " + std::to_string(i + 1) + ": " + std::string(line));
      if (!current) current = FileDiff{};
      if (current_binary) fail(ErrorCode::MalformedDiff, "hunk inside binary section at line " + std::to_string(i + 1));

      Hunk hunk;
      hunk.header = std::string(line);
      std::size_t old_left = range->old_count;
      std::size_t new_left = range->new_count;
      const std::size_t header_line = i;
      while ((old_left > 0 || new_left > 0) && i + 1 < lines.size()) {
        const std::string_view body = lines[i + 1];
        if (!body.empty() && body[0] == '\\') {  // "\ No newline at end of file"
          ++i;
          continue;
        }
        const char tag = body.empty() ? ' ' : body[0];
        const std::string_view content = body.empty() ? body : body.substr(1);
        if (tag == '-' && old_left > 0) {
          hunk.removed.emplace_back(content);
          --old_left;
        } else if (tag == '+' && new_left > 0) {
          hunk.added.emplace_back(content);
          --new_left;
        } else if (tag == ' ' && old_left > 0 && new_left > 0) {
          --old_left;
          --new_left;
        } else {
          fail(ErrorCode::MalformedDiff, "hunk body does not match header counts at line " + std::to_string(i + 2));
        }
        ++i;
      }
      while (i + 1 < lines.size() && !lines[i + 1].empty() && lines[i + 1][0] == '\\') ++i;
      if (old_left > 0 || new_left > 0)
        fail(ErrorCode::MalformedDiff, "truncated hunk starting at line " + std::to_string(header_line + 1));
      if (hunk.removed.empty() && hunk.added.empty())
        fail(ErrorCode::MalformedDiff, "hunk without changed lines at line " + std::to_string(header_line + 1));
      current->hunks.push_back(std::move(hunk));
      continue;
    }
    // Extended headers (index, mode, rename, similarity) and stray text are ignored.
  }
  flush();
  for (const auto& f : files)
    if (f.path.empty()) fail(ErrorCode::MalformedDiff, "file section without a path");
  return files;
}

// ---------------------------------------------------------------------------
// Cost fields

inline std::size_t commit_loc(const Commit& c) noexcept {
  std::size_t loc = 0;
  for (const auto& f : c.files)
    for (const auto& h : f.hunks) loc += h.removed.size() + h.added.size();
  return loc;
}

inline std::size_t commit_added_loc(const Commit& c) noexcept {
  std::size_t loc = 0;
  for (const auto& f : c.files)
    for (const auto& h : f.hunks) loc += h.added.size();
  return loc;
}

inline std::size_t commit_hunks(const Commit& c) noexcept {
  std::size_t n = 0;
  for (const auto& f : c.files) n += f.hunks.size();
  return n;
}

inline std::size_t commit_files(const Commit& c) noexcept { return c.files.size(); }

/// Structural checks applied to every commit entering a corpus.
inline void validate_commit(const Commit& c) {
  require(!c.id.empty(), ErrorCode::CorpusFormat, "commit id is empty");
  require(!c.files.empty() || c.degenerate, ErrorCode::CorpusFormat,
          "commit " + c.id + " has no files and is not marked degenerate");
  for (const auto& f : c.files) {
    require(!f.path.empty(), ErrorCode::CorpusFormat, "commit " + c.id + " has a file without a path");
    for (const auto& h : f.hunks)
      require(!h.removed.empty() || !h.added.empty(), ErrorCode::CorpusFormat,
              "commit " + c.id + " has a hunk without changed lines in " + f.path);
  }
}

inline void validate_corpus(const std::vector<Commit>& commits) {
  std::unordered_set<std::string> seen;
  for (const auto& c : commits) {
    validate_commit(c);
    require(seen.insert(c.id).second, ErrorCode::CorpusFormat, "duplicate commit id " + c.id);
  }
}

// ---------------------------------------------------------------------------
// Splitting and sampling

/// Partitions projects at random: `test_frac` of them form the test part and
/// `val_frac` of the remainder the validation part. Every part receives at
/// least one project.
inline CorpusSplit project_wise_split(const std::vector<Commit>& commits, double test_frac = 0.2,
                                      double val_frac = 0.1, std::uint64_t seed = 0) {
  require(test_frac > 0 && test_frac < 1 && val_frac > 0 && val_frac < 1, ErrorCode::InvalidArgument,
          "split fractions must lie in (0, 1)");
  std::set<std::string> unique;
  for (const auto& c : commits) unique.insert(c.project);
  std::vector<std::string> projects(unique.begin(), unique.end());
  const auto total = projects.size();

  const std::size_t n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(test_frac * total)));
  const std::size_t rest = total > n_test ? total - n_test : 0;
  const std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(val_frac * rest)));
  if (total < 3 || n_test + n_val >= total)
    fail(ErrorCode::TooFewProjects, std::to_string(total) + " project(s) cannot fill train, validation and test");

  Rng rng(seed);
  rng.shuffle(projects);
  std::unordered_set<std::string> test_set(projects.begin(), projects.begin() + n_test);
  std::unordered_set<std::string> val_set(projects.begin() + n_test, projects.begin() + n_test + n_val);

  CorpusSplit split;
  for (const auto& c : commits) {
    if (test_set.count(c.project)) split.test.push_back(c);
    else if (val_set.count(c.project)) split.validation.push_back(c);
    else split.train.push_back(c);
  }
  return split;
}

/// Orders commits by (timestamp, id) and cuts the sequence at the given fractions.
inline CorpusSplit chronological_split(const std::vector<Commit>& commits, double train_frac = 0.8,
                                       double val_frac = 0.1) {
  require(train_frac > 0 && val_frac >= 0 && train_frac + val_frac <= 1, ErrorCode::InvalidArgument,
          "chronological fractions must satisfy 0 < train and train + val <= 1");
  for (const auto& c : commits)
    if (!c.timestamp) fail(ErrorCode::MissingTimestamp, "commit " + c.id + " has no timestamp");

  std::vector<const Commit*> order;
  order.reserve(commits.size());
  for (const auto& c : commits) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](const Commit* a, const Commit* b) {
    if (*a->timestamp != *b->timestamp) return *a->timestamp < *b->timestamp;
    return a->id < b->id;
  });

  const auto n = order.size();
  const auto n_train = std::min<std::size_t>(n, static_cast<std::size_t>(std::lround(train_frac * n)));
  const auto n_val = std::min<std::size_t>(n - n_train, static_cast<std::size_t>(std::lround(val_frac * n)));

  CorpusSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) split.train.push_back(*order[i]);
    else if (i < n_train + n_val) split.validation.push_back(*order[i]);
    else split.test.push_back(*order[i]);
  }
  return split;
}

/// Keeps every positive and floor(neg_per_pos * #positives) negatives drawn
/// without replacement. Input order is preserved among the kept commits.
inline std::vector<Commit> undersample(const std::vector<Commit>& commits, double neg_per_pos = 30.0,
                                       std::uint64_t seed = 0) {
  require(neg_per_pos > 0, ErrorCode::InvalidArgument, "neg_per_pos must be positive");
  std::vector<std::size_t> negatives;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < commits.size(); ++i) {
    if (commits[i].label) ++positives;
    else negatives.push_back(i);
  }
  if (positives == 0) fail(ErrorCode::NoPositives, "cannot undersample a corpus without positives");

  const auto wanted = static_cast<std::size_t>(std::floor(neg_per_pos * static_cast<double>(positives)));
  const auto keep = std::min(wanted, negatives.size());
  Rng rng(seed);
  for (std::size_t i = 0; i < keep; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.index(negatives.size() - i));
    std::swap(negatives[i], negatives[j]);
  }
  std::vector<bool> kept(commits.size(), false);
  for (std::size_t i = 0; i < keep; ++i) kept[negatives[i]] = true;

  std::vector<Commit> out;
  out.reserve(positives + keep);
  for (std::size_t i = 0; i < commits.size(); ++i)
    if (commits[i].label || kept[i]) out.push_back(commits[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Filters

enum class KeywordRule { Strong, Medium, Relabel };

namespace detail {

// Security keyword patterns used to flag security-related commit messages.
inline const std::regex& keyword_regex(KeywordRule rule) {
  static const std::regex strong(
      R"(denial.of.service|\bXXE\b|remote.code.execution|\bopen.redirect|OSVDB|\bXSS\b|\bReDoS\b|\bCVE\b|)"
      R"(\bvuln\b|\bNVD\b|malicious|x-frame-options|attack|cross.site|exploit|directory.traversal|\bRCE\b|)"
      R"(\bdos\b|\bXSRF\b|clickjack|session.fixation|hijack|advisory|insecure|security|\bcross-origin\b|)"
      R"(unauthori[z|s]ed|infinite.loop)",
      std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
  static const std::regex medium(
      R"(authenticat(e|ion)|bruteforce|bypass|constant.time|crack|credential|\bDoS\b|expos(e|ing)|hack|)"
      R"(harden|injection|lockout|overflow|password|\bPoC\b|proof.of.concept|poison|privelage|)"
      R"(\b(in)?secur(e|ity)|(de)?serializ|spoof|timing|traversal)",
      std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
  static const std::regex relabel(R"(vuln|CVE|NVD)", std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
  switch (rule) {
    case KeywordRule::Strong: return strong;
    case KeywordRule::Medium: return medium;
    case KeywordRule::Relabel: return relabel;
  }
  return strong;
}

}  // namespace detail

inline bool keyword_match(std::string_view message, KeywordRule rule) {
  return std::regex_search(message.begin(), message.end(), detail::keyword_regex(rule));
}

inline KeywordRule parse_keyword_rule(std::string_view name) {
  if (name == "strong") return KeywordRule::Strong;
  if (name == "medium") return KeywordRule::Medium;
  if (name == "relabel") return KeywordRule::Relabel;
  fail(ErrorCode::InvalidArgument, "unknown keyword rule '" + std::string(name) + "'");
}

/// Marks commits whose message mentions vuln/CVE/NVD as vulnerability fixes.
/// Returns the number of commits relabeled.
inline std::size_t relabel_by_keywords(std::vector<Commit>& commits) {
  std::size_t changed = 0;
  for (auto& c : commits) {
    if (!c.label && keyword_match(c.message, KeywordRule::Relabel)) {
      c.label = true;
      ++changed;
    }
  }
  return changed;
}

struct SizeFilter {
  std::optional<std::size_t> max_loc;
  std::optional<std::size_t> max_files;
};

inline std::vector<Commit> filter_large(const std::vector<Commit>& commits, const SizeFilter& limits) {
  std::vector<Commit> out;
  for (const auto& c : commits) {
    if (limits.max_loc && commit_loc(c) > *limits.max_loc) continue;
    if (limits.max_files && c.files.size() > *limits.max_files) continue;
    out.push_back(c);
  }
  return out;
}

/// Drops files whose extension is not listed (e.g. {".java"}). Commits left
/// without files are marked degenerate rather than removed.
inline Commit filter_extensions(Commit c, const std::vector<std::string>& allowlist) {
  if (allowlist.empty()) return c;
  std::vector<FileDiff> kept;
  for (auto& f : c.files) {
    const auto dot = f.path.rfind('.');
    const std::string ext = dot == std::string::npos ? std::string{} : f.path.substr(dot);
    if (std::find(allowlist.begin(), allowlist.end(), ext) != allowlist.end()) kept.push_back(std::move(f));
  }
  c.files = std::move(kept);
  if (c.files.empty()) c.degenerate = true;
  return c;
}

}  // namespace vfscan
