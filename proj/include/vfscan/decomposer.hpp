#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vfscan/corpus.hpp"
#include "vfscan/errors.hpp"

namespace vfscan {

enum class Granularity { CommitLevel, FileLevel, HunkLevel, LineLevel };

inline constexpr std::array<Granularity, 4> kAllGranularities = {
    Granularity::CommitLevel, Granularity::FileLevel, Granularity::HunkLevel, Granularity::LineLevel};

constexpr std::string_view to_string(Granularity g) noexcept {
  switch (g) {
    case Granularity::CommitLevel: return "commit";
    case Granularity::FileLevel: return "file";
    case Granularity::HunkLevel: return "hunk";
    case Granularity::LineLevel: return "line";
  }
  return "?";
}

inline Granularity parse_granularity(std::string_view name) {
  for (auto g : kAllGranularities)
    if (to_string(g) == name) return g;
  fail(ErrorCode::InvalidArgument, "unknown granularity '" + std::string(name) + "'");
}

enum class Side { Removed, Added };

struct FragmentOrigin {
  std::optional<std::size_t> file;
  std::optional<std::size_t> hunk;  // within the file
  std::optional<std::size_t> line;  // within the hunk, removed lines first

  bool operator==(const FragmentOrigin&) const = default;
};

/// One unit of change at one granularity. Line fragments populate exactly one
/// side, recorded in `line_side` (the text itself may be an empty line).
struct Fragment {
  Granularity granularity = Granularity::CommitLevel;
  std::string removed_code;
  std::string added_code;
  FragmentOrigin origin;
  std::optional<Side> line_side;

  bool operator==(const Fragment&) const = default;
};

namespace detail {

class Joiner {
 public:
  void add(std::string_view line) {
    if (any_) text_.push_back('\n');
    text_.append(line);
    any_ = true;
  }
  std::string take() { return std::move(text_); }

 private:
  std::string text_;
  bool any_ = false;
};

}  // namespace detail

inline std::vector<Fragment> decompose(const Commit& c, Granularity g) {
  if (commit_loc(c) == 0) fail(ErrorCode::EmptyCommit, "commit " + c.id + " has no changed lines");

  std::vector<Fragment> out;
  switch (g) {
    case Granularity::CommitLevel: {
      detail::Joiner removed, added;
      for (const auto& f : c.files)
        for (const auto& h : f.hunks) {
          for (const auto& l : h.removed) removed.add(l);
          for (const auto& l : h.added) added.add(l);
        }
      out.push_back(Fragment{g, removed.take(), added.take(), {}, std::nullopt});
      break;
    }
    case Granularity::FileLevel: {
      for (std::size_t fi = 0; fi < c.files.size(); ++fi) {
        detail::Joiner removed, added;
        for (const auto& h : c.files[fi].hunks) {
          for (const auto& l : h.removed) removed.add(l);
          for (const auto& l : h.added) added.add(l);
        }
        out.push_back(Fragment{g, removed.take(), added.take(), {fi, std::nullopt, std::nullopt}, std::nullopt});
      }
      break;
    }
    case Granularity::HunkLevel: {
      for (std::size_t fi = 0; fi < c.files.size(); ++fi)
        for (std::size_t hi = 0; hi < c.files[fi].hunks.size(); ++hi) {
          const auto& h = c.files[fi].hunks[hi];
          detail::Joiner removed, added;
          for (const auto& l : h.removed) removed.add(l);
          for (const auto& l : h.added) added.add(l);
          out.push_back(Fragment{g, removed.take(), added.take(), {fi, hi, std::nullopt}, std::nullopt});
        }
      break;
    }
    case Granularity::LineLevel: {
      for (std::size_t fi = 0; fi < c.files.size(); ++fi)
        for (std::size_t hi = 0; hi < c.files[fi].hunks.size(); ++hi) {
          const auto& h = c.files[fi].hunks[hi];
          std::size_t li = 0;
          for (const auto& l : h.removed)
            out.push_back(Fragment{g, l, {}, {fi, hi, li++}, Side::Removed});
          for (const auto& l : h.added)
            out.push_back(Fragment{g, {}, l, {fi, hi, li++}, Side::Added});
        }
      break;
    }
  }
  return out;
}

}  // namespace vfscan
