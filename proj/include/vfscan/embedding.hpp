#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vfscan/decomposer.hpp"
#include "vfscan/errors.hpp"
#include "vfscan/rng.hpp"

namespace vfscan {

enum class Representation { ContextDependent, ContextFree };

struct EmbeddingSetting {
  Granularity granularity = Granularity::CommitLevel;
  Representation representation = Representation::ContextDependent;

  bool operator==(const EmbeddingSetting&) const = default;
};

constexpr bool is_valid(EmbeddingSetting s) noexcept {
  return !(s.granularity == Granularity::LineLevel && s.representation == Representation::ContextDependent);
}

/// The seven (granularity, representation) embedding configurations.
inline constexpr std::array<EmbeddingSetting, 7> kEmbeddingSettings = {{
    {Granularity::CommitLevel, Representation::ContextDependent},
    {Granularity::FileLevel, Representation::ContextDependent},
    {Granularity::HunkLevel, Representation::ContextDependent},
    {Granularity::CommitLevel, Representation::ContextFree},
    {Granularity::FileLevel, Representation::ContextFree},
    {Granularity::HunkLevel, Representation::ContextFree},
    {Granularity::LineLevel, Representation::ContextFree},
}};

inline std::string to_string(EmbeddingSetting s) {
  return std::string(to_string(s.granularity)) + (s.representation == Representation::ContextDependent ? "-cd" : "-cf");
}

inline EmbeddingSetting parse_setting(std::string_view name) {
  const auto dash = name.rfind('-');
  require(dash != std::string_view::npos, ErrorCode::InvalidSetting, "setting must look like 'hunk-cd': " + std::string(name));
  const auto kind = name.substr(dash + 1);
  EmbeddingSetting s;
  s.granularity = parse_granularity(name.substr(0, dash));
  if (kind == "cd") s.representation = Representation::ContextDependent;
  else if (kind == "cf") s.representation = Representation::ContextFree;
  else fail(ErrorCode::InvalidSetting, "representation must be 'cd' or 'cf': " + std::string(name));
  require(is_valid(s), ErrorCode::InvalidSetting, "line-level fragments have no context-dependent form");
  return s;
}

// ---------------------------------------------------------------------------
// Tokens and templates

inline constexpr std::string_view kCls = "[CLS]";
inline constexpr std::string_view kSep = "[SEP]";
inline constexpr std::string_view kEos = "[EOS]";

/// A token sequence laid out as [CLS] nl... [SEP] pl... [EOS].
struct TokenSequence {
  std::vector<std::string> tokens;
  std::size_t sep_index = 1;

  std::size_t size() const noexcept { return tokens.size(); }
  bool operator==(const TokenSequence&) const = default;
};

namespace detail {

inline bool is_word_byte(unsigned char ch) noexcept {
  return std::isalnum(ch) || ch == '_' || ch >= 0x80;
}

}  // namespace detail

/// Splits on whitespace; runs of identifier characters (letters, digits,
/// underscore, non-ASCII bytes) stay together and every other byte is a
/// token of its own.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto ch = static_cast<unsigned char>(text[i]);
    if (std::isspace(ch)) {
      ++i;
    } else if (detail::is_word_byte(ch)) {
      const auto start = i;
      while (i < text.size() && detail::is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
      tokens.emplace_back(text.substr(start, i - start));
    } else {
      tokens.emplace_back(1, text[i]);
      ++i;
    }
  }
  return tokens;
}

/// Builds the template, truncating bodies so the result fits `max_tokens`.
/// The first body gets half of the budget up front; whatever either side
/// leaves unused goes to the other. Earliest tokens are kept.
inline TokenSequence make_token_sequence(std::span<const std::string> nl, std::span<const std::string> pl,
                                         std::size_t max_tokens = 512) {
  require(max_tokens >= 3, ErrorCode::InvalidArgument, "max_tokens must leave room for the special tokens");
  const std::size_t budget = max_tokens - 3;
  std::size_t keep_nl = nl.size();
  std::size_t keep_pl = pl.size();
  if (keep_nl + keep_pl > budget) {
    keep_nl = std::min(nl.size(), std::max(budget / 2, budget > pl.size() ? budget - pl.size() : 0));
    keep_pl = std::min(pl.size(), budget - keep_nl);
  }
  TokenSequence seq;
  seq.tokens.reserve(keep_nl + keep_pl + 3);
  seq.tokens.emplace_back(kCls);
  seq.tokens.insert(seq.tokens.end(), nl.begin(), nl.begin() + static_cast<std::ptrdiff_t>(keep_nl));
  seq.sep_index = seq.tokens.size();
  seq.tokens.emplace_back(kSep);
  seq.tokens.insert(seq.tokens.end(), pl.begin(), pl.begin() + static_cast<std::ptrdiff_t>(keep_pl));
  seq.tokens.emplace_back(kEos);
  return seq;
}

inline TokenSequence format_context_dependent(const Fragment& f, std::size_t max_tokens = 512) {
  const auto removed = tokenize(f.removed_code);
  const auto added = tokenize(f.added_code);
  return make_token_sequence(removed, added, max_tokens);
}

/// Returns (removed-side sequence, added-side sequence), each with an empty
/// natural-language segment.
inline std::pair<TokenSequence, TokenSequence> format_context_free(const Fragment& f, std::size_t max_tokens = 512) {
  const auto removed = tokenize(f.removed_code);
  const auto added = tokenize(f.added_code);
  return {make_token_sequence({}, removed, max_tokens), make_token_sequence({}, added, max_tokens)};
}

// ---------------------------------------------------------------------------
// Feature hashing

using EmbedVector = std::vector<double>;

inline std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline EmbedVector hash_embed_tokens(std::span<const std::string> tokens, std::size_t dim, std::uint64_t seed) {
  require(dim >= 8, ErrorCode::InvalidArgument, "hash dimension must be at least 8");
  EmbedVector v(dim, 0.0);
  const std::uint64_t salt = splitmix64(seed);
  for (const auto& t : tokens) {
    const std::uint64_t h = splitmix64(fnv1a64(t) ^ salt);
    v[h % dim] += (h >> 63) ? -1.0 : 1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

/// Signed feature hashing of every token (special tokens included), scaled
/// to unit Euclidean norm. An empty sequence maps to the zero vector.
inline EmbedVector hash_embed(const TokenSequence& seq, std::size_t dim, std::uint64_t seed) {
  return hash_embed_tokens(seq.tokens, dim, seed);
}

// ---------------------------------------------------------------------------
// Backends

struct EmbedderInfo {
  std::size_t dim = 0;
  std::size_t max_tokens = 0;

  bool operator==(const EmbedderInfo&) const = default;
};

/// One encoder input: the natural-language and programming-language slots.
struct TextPair {
  std::string nl;
  std::string pl;

  bool operator==(const TextPair&) const = default;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual EmbedderInfo info() = 0;
  /// One vector per pair, in request order. Implementations either return
  /// every vector or throw.
  virtual std::vector<EmbedVector> embed(std::span<const TextPair> pairs) = 0;
  virtual nlohmann::json identity() const = 0;
};

class HashBackend final : public EmbeddingBackend {
 public:
  explicit HashBackend(std::size_t dim = 256, std::uint64_t seed = 0, std::size_t max_tokens = 512)
      : dim_(dim), seed_(seed), max_tokens_(max_tokens) {
    require(dim >= 8, ErrorCode::InvalidArgument, "hash dimension must be at least 8");
  }

  EmbedderInfo info() override { return {dim_, max_tokens_}; }

  std::vector<EmbedVector> embed(std::span<const TextPair> pairs) override {
    std::vector<EmbedVector> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(hash_embed(make_token_sequence(tokenize(p.nl), tokenize(p.pl), max_tokens_), dim_, seed_));
    return out;
  }

  nlohmann::json identity() const override {
    return {{"kind", "hash"}, {"dim", dim_}, {"seed", seed_}, {"max_tokens", max_tokens_}};
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  std::size_t max_tokens_;
};

/// Encoder inputs for one fragment: a single (removed, added) pair for the
/// context-dependent form, or one pair per side with an empty NL slot.
inline std::vector<TextPair> fragment_pairs(EmbeddingSetting s, const Fragment& f) {
  require(is_valid(s), ErrorCode::InvalidSetting, to_string(s));
  if (s.representation == Representation::ContextDependent) return {TextPair{f.removed_code, f.added_code}};
  return {TextPair{"", f.removed_code}, TextPair{"", f.added_code}};
}

inline std::vector<EmbedVector> checked_embed(EmbeddingBackend& backend, std::span<const TextPair> pairs,
                                              std::size_t expected_dim) {
  auto vectors = backend.embed(pairs);
  require(vectors.size() == pairs.size(), ErrorCode::DimensionMismatch,
          "backend returned " + std::to_string(vectors.size()) + " vectors for " + std::to_string(pairs.size()) + " inputs");
  for (const auto& v : vectors) {
    require(v.size() == expected_dim, ErrorCode::DimensionMismatch,
            "expected dimension " + std::to_string(expected_dim) + ", got " + std::to_string(v.size()));
    for (double x : v) require(std::isfinite(x), ErrorCode::DimensionMismatch, "backend returned a non-finite value");
  }
  return vectors;
}

/// Context-dependent settings yield one vector, context-free ones two
/// (removed side first).
inline std::vector<EmbedVector> embed_fragment(EmbeddingSetting s, const Fragment& f, EmbeddingBackend& backend) {
  const auto info = backend.info();
  const auto pairs = fragment_pairs(s, f);
  return checked_embed(backend, pairs, info.dim);
}

}  // namespace vfscan
