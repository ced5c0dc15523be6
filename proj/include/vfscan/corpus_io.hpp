#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfscan/corpus.hpp"
#include "vfscan/errors.hpp"

namespace vfscan {

using json = nlohmann::json;

inline json commit_to_json(const Commit& c) {
  json files = json::array();
  for (const auto& f : c.files) {
    json hunks = json::array();
    for (const auto& h : f.hunks) {
      hunks.push_back({{"header", h.header ? json(*h.header) : json(nullptr)},
                       {"removed", h.removed},
                       {"added", h.added}});
    }
    files.push_back({{"path", f.path}, {"hunks", std::move(hunks)}});
  }
  json j = {{"id", c.id},
            {"project", c.project},
            {"timestamp", c.timestamp ? json(*c.timestamp) : json(nullptr)},
            {"label", c.label ? 1 : 0},
            {"files", std::move(files)}};
  if (!c.message.empty()) j["message"] = c.message;
  if (c.degenerate) j["degenerate"] = true;
  return j;
}

namespace detail {

inline std::vector<std::string> string_list(const json& j, const char* key) {
  std::vector<std::string> out;
  if (!j.contains(key) || j.at(key).is_null()) return out;
  for (const auto& s : j.at(key)) out.push_back(s.get<std::string>());
  return out;
}

}  // namespace detail

inline Commit commit_from_json(const json& j) {
  Commit c;
  try {
    c.id = j.at("id").get<std::string>();
    c.project = j.value("project", std::string{});
    if (j.contains("timestamp") && !j.at("timestamp").is_null()) c.timestamp = j.at("timestamp").get<std::int64_t>();
    const auto& label = j.at("label");
    if (label.is_boolean()) c.label = label.get<bool>();
    else {
      const auto v = label.get<int>();
      require(v == 0 || v == 1, ErrorCode::CorpusFormat, "label must be 0 or 1");
      c.label = v == 1;
    }
    if (j.contains("message") && j.at("message").is_string()) c.message = j.at("message").get<std::string>();
    if (j.contains("degenerate") && j.at("degenerate").is_boolean()) c.degenerate = j.at("degenerate").get<bool>();
    for (const auto& jf : j.at("files")) {
      FileDiff f;
      f.path = jf.at("path").get<std::string>();
      for (const auto& jh : jf.at("hunks")) {
        Hunk h;
        if (jh.contains("header") && !jh.at("header").is_null()) h.header = jh.at("header").get<std::string>();
        h.removed = detail::string_list(jh, "removed");
        h.added = detail::string_list(jh, "added");
        f.hunks.push_back(std::move(h));
      }
      c.files.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::CorpusFormat, e.what());
  }
  validate_commit(c);
  return c;
}

struct LoadIssue {
  std::size_t line = 0;  // 1-based line in the JSONL file
  std::string message;
};

struct LoadResult {
  std::vector<Commit> commits;
  std::vector<std::size_t> lines;  // source line of each commit
  std::vector<LoadIssue> issues;
};

/// Reads a JSONL corpus, collecting per-line problems instead of stopping at
/// the first one. Blank lines are skipped.
inline LoadResult read_jsonl_lenient(std::istream& in) {
  LoadResult result;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto c = commit_from_json(json::parse(line));
      if (!seen.insert(c.id).second) fail(ErrorCode::CorpusFormat, "duplicate commit id " + c.id);
      result.commits.push_back(std::move(c));
      result.lines.push_back(number);
    } catch (const json::exception& e) {
      result.issues.push_back({number, e.what()});
    } catch (const Error& e) {
      result.issues.push_back({number, e.what()});
    }
  }
  return result;
}

inline std::vector<Commit> read_jsonl(std::istream& in) {
  auto result = read_jsonl_lenient(in);
  if (!result.issues.empty())
    fail(ErrorCode::CorpusFormat, "line " + std::to_string(result.issues.front().line) + ": " + result.issues.front().message);
  return std::move(result.commits);
}

inline std::vector<Commit> read_jsonl_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  return read_jsonl(in);
}

inline void write_jsonl(std::ostream& out, const std::vector<Commit>& commits) {
  for (const auto& c : commits) out << commit_to_json(c).dump() << '\n';
}

inline void write_jsonl_file(const std::filesystem::path& path, const std::vector<Commit>& commits) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
  write_jsonl(out, commits);
}

// ---------------------------------------------------------------------------
// Raw diff directory: <id>.diff files plus labels.csv (id,project,timestamp,label)

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (ch != '\r') {
      cell.push_back(ch);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline std::vector<Commit> read_diff_directory(const std::filesystem::path& dir, const std::filesystem::path& labels_csv) {
  std::ifstream in(labels_csv);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + labels_csv.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::CorpusFormat, "labels file is empty");
  const auto header = detail::split_csv_line(line);
  auto column = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    fail(ErrorCode::CorpusFormat, "labels file lacks column '" + name + "'");
  };
  const auto c_id = column("id"), c_project = column("project"), c_ts = column("timestamp"), c_label = column("label");

  std::vector<Commit> commits;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_csv_line(line);
    const auto need = std::max({c_id, c_project, c_ts, c_label});
    require(cells.size() > need, ErrorCode::CorpusFormat, "labels line " + std::to_string(number) + " has too few columns");
    Commit c;
    c.id = cells[c_id];
    c.project = cells[c_project];
    try {
      if (!cells[c_ts].empty()) c.timestamp = std::stoll(cells[c_ts]);
    } catch (const std::exception&) {
      fail(ErrorCode::CorpusFormat, "labels line " + std::to_string(number) + ": bad timestamp");
    }
    const std::string& lab = cells[c_label];
    require(lab == "0" || lab == "1" || lab == "true" || lab == "false", ErrorCode::CorpusFormat,
            "labels line " + std::to_string(number) + ": label must be 0 or 1");
    c.label = lab == "1" || lab == "true";
    try {
      c.files = parse_unified_diff(detail::read_text_file(dir / (c.id + ".diff")));
    } catch (const Error& e) {
      fail(e.code(), "commit " + c.id + ": " + e.what());
    }
    if (c.files.empty()) c.degenerate = true;
    commits.push_back(std::move(c));
  }
  validate_corpus(commits);
  return commits;
}

}  // namespace vfscan
