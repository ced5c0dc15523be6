#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "vfscan/embedding.hpp"
#include "vfscan/errors.hpp"
#include "vfscan/nn.hpp"
#include "vfscan/rng.hpp"

namespace vfscan {

using nn::Seq;
using nn::Vec;

struct ExtractorConfig {
  std::size_t dim = 256;           // embedding width d
  std::size_t hidden = 256;        // extractor / fusion width
  std::size_t channels = 256;      // convolution output channels
  std::size_t kernel_width = 3;    // w, odd
  std::size_t max_files = 8;       // F
  std::size_t max_lines = 64;      // T_line
  std::size_t max_hunks = 16;      // slot count when hunks use the padded dense extractor

  bool operator==(const ExtractorConfig&) const = default;

  void validate() const {
    require(dim >= 1 && hidden >= 1 && channels >= 1, ErrorCode::InvalidArgument, "extractor widths must be positive");
    require(kernel_width % 2 == 1, ErrorCode::InvalidArgument, "kernel width must be odd");
    require(max_files >= 1 && max_lines >= 1 && max_hunks >= 1, ErrorCode::InvalidArgument, "sequence bounds must be positive");
  }
};

/// Dense: single vector through a d->d layer. PaddedDense: pad/truncate to a
/// fixed slot count, concatenate, one layer. Conv: convolution + max-pool.
/// BiLstm / Lstm: recurrent pass(es), final hidden state(s).
enum class ExtractorKind { Dense, PaddedDense, Conv, BiLstm, Lstm };

constexpr std::string_view to_string(ExtractorKind k) noexcept {
  switch (k) {
    case ExtractorKind::Dense: return "dense";
    case ExtractorKind::PaddedDense: return "padded-dense";
    case ExtractorKind::Conv: return "conv";
    case ExtractorKind::BiLstm: return "bilstm";
    case ExtractorKind::Lstm: return "lstm";
  }
  return "?";
}

inline ExtractorKind parse_extractor_kind(std::string_view name) {
  for (auto k : {ExtractorKind::Dense, ExtractorKind::PaddedDense, ExtractorKind::Conv, ExtractorKind::BiLstm, ExtractorKind::Lstm})
    if (to_string(k) == name) return k;
  fail(ErrorCode::InvalidArgument, "unknown extractor kind '" + std::string(name) + "'");
}

constexpr ExtractorKind default_extractor(Granularity g) noexcept {
  switch (g) {
    case Granularity::CommitLevel: return ExtractorKind::Dense;
    case Granularity::FileLevel: return ExtractorKind::PaddedDense;
    case Granularity::HunkLevel: return ExtractorKind::Conv;
    case Granularity::LineLevel: return ExtractorKind::BiLstm;
  }
  return ExtractorKind::Dense;
}

struct ExtractorTrace {
  virtual ~ExtractorTrace() = default;
};

class Extractor {
 public:
  virtual ~Extractor() = default;
  virtual ExtractorKind kind() const = 0;
  virtual std::size_t output_width() const = 0;
  /// `trace` receives whatever the backward pass needs; pass nullptr for inference.
  virtual Vec forward(const Seq& in, std::unique_ptr<ExtractorTrace>* trace) const = 0;
  virtual Seq backward(const Seq& in, const ExtractorTrace& trace, std::span<const double> dout, bool want_dx) = 0;

  // Every side of a commit through the same weights. Defaults run them one at a time.
  virtual std::vector<Vec> forward_sides(std::span<const Seq> sides, std::vector<std::unique_ptr<ExtractorTrace>>* traces) const {
    std::vector<Vec> out;
    out.reserve(sides.size());
    if (traces) traces->resize(sides.size());
    for (std::size_t s = 0; s < sides.size(); ++s) out.push_back(forward(sides[s], traces ? &(*traces)[s] : nullptr));
    return out;
  }
  virtual void backward_sides(std::span<const Seq> sides, const std::vector<std::unique_ptr<ExtractorTrace>>& traces,
                              std::span<const Vec> douts) {
    for (std::size_t s = 0; s < sides.size(); ++s) backward(sides[s], *traces[s], douts[s], false);
  }

  virtual void init(Rng& rng) = 0;
  virtual void collect(nn::ParamSet& set) = 0;
  virtual std::unique_ptr<Extractor> clone() const = 0;
};

/// Commit-level: ReLU(W x + b) with W square (d x d).
class DenseExtractor final : public Extractor {
 public:
  DenseExtractor(const std::string& name, std::size_t dim) : dense_(name, dim, dim) {}

  ExtractorKind kind() const override { return ExtractorKind::Dense; }
  std::size_t output_width() const override { return dense_.out(); }

  Vec forward(const Seq& in, std::unique_ptr<ExtractorTrace>* trace) const override {
    require(in.size() == 1, ErrorCode::ArityMismatch, "commit-level extractor takes exactly one embedding");
    require(in[0].size() == dense_.in(), ErrorCode::DimensionMismatch, "commit embedding width mismatch");
    Vec y = dense_.forward(in[0]);
    nn::relu_inplace(y);
    if (trace) *trace = std::make_unique<Trace>(y);
    return y;
  }

  Seq backward(const Seq& in, const ExtractorTrace& trace, std::span<const double> dout, bool want_dx) override {
    const auto& t = static_cast<const Trace&>(trace);
    const Vec dz = nn::relu_backward(t.out, dout);
    Vec dx = dense_.backward(in[0], dz, want_dx);
    Seq result;
    if (want_dx) result.push_back(std::move(dx));
    return result;
  }

  void init(Rng& rng) override { dense_.init(rng); }
  void collect(nn::ParamSet& set) override { dense_.collect(set); }
  std::unique_ptr<Extractor> clone() const override { return std::make_unique<DenseExtractor>(*this); }

  nn::Dense& layer() { return dense_; }

 private:
  struct Trace : ExtractorTrace {
    explicit Trace(Vec y) : out(std::move(y)) {}
    Vec out;
  };
  nn::Dense dense_;
};

/// Pads with zero vectors (or truncates) to `slots` elements, concatenates,
/// then ReLU(W x + b).
class PaddedDenseExtractor final : public Extractor {
 public:
  PaddedDenseExtractor(const std::string& name, std::size_t dim, std::size_t slots, std::size_t out)
      : dense_(name, dim * slots, out), dim_(dim), slots_(slots) {}

  ExtractorKind kind() const override { return ExtractorKind::PaddedDense; }
  std::size_t output_width() const override { return dense_.out(); }
  std::size_t slots() const noexcept { return slots_; }

  Vec padded_input(const Seq& in) const {
    Vec x(dim_ * slots_, 0.0);
    for (std::size_t s = 0; s < std::min(slots_, in.size()); ++s) {
      require(in[s].size() == dim_, ErrorCode::DimensionMismatch, "embedding width mismatch");
      std::copy(in[s].begin(), in[s].end(), x.begin() + static_cast<std::ptrdiff_t>(s * dim_));
    }
    return x;
  }

  Vec forward(const Seq& in, std::unique_ptr<ExtractorTrace>* trace) const override {
    Vec x = padded_input(in);
    Vec y = dense_.forward(x);
    nn::relu_inplace(y);
    if (trace) *trace = std::make_unique<Trace>(std::move(x), y);
    return y;
  }

  Seq backward(const Seq& in, const ExtractorTrace& trace, std::span<const double> dout, bool want_dx) override {
    const auto& t = static_cast<const Trace&>(trace);
    const Vec dz = nn::relu_backward(t.out, dout);
    const Vec dx = dense_.backward(t.x, dz, want_dx);
    Seq result;
    if (want_dx) {
      for (std::size_t s = 0; s < in.size(); ++s) {
        if (s < slots_) result.emplace_back(dx.begin() + static_cast<std::ptrdiff_t>(s * dim_), dx.begin() + static_cast<std::ptrdiff_t>((s + 1) * dim_));
        else result.emplace_back(dim_, 0.0);
      }
    }
    return result;
  }

  void init(Rng& rng) override { dense_.init(rng); }
  void collect(nn::ParamSet& set) override { dense_.collect(set); }
  std::unique_ptr<Extractor> clone() const override { return std::make_unique<PaddedDenseExtractor>(*this); }

  nn::Dense& layer() { return dense_; }

 private:
  struct Trace : ExtractorTrace {
    Trace(Vec a, Vec b) : x(std::move(a)), out(std::move(b)) {}
    Vec x;
    Vec out;
  };
  nn::Dense dense_;
  std::size_t dim_;
  std::size_t slots_;
};

class ConvExtractor final : public Extractor {
 public:
  ConvExtractor(const std::string& name, std::size_t dim, std::size_t channels, std::size_t width)
      : conv_(name, dim, channels, width) {}

  ExtractorKind kind() const override { return ExtractorKind::Conv; }
  std::size_t output_width() const override { return conv_.channels(); }

  Vec forward(const Seq& in, std::unique_ptr<ExtractorTrace>* trace) const override {
    if (!trace) return conv_.forward(in);
    auto t = std::make_unique<Trace>();
    Vec y = conv_.forward(in, &t->inner);
    *trace = std::move(t);
    return y;
  }

  Seq backward(const Seq& in, const ExtractorTrace& trace, std::span<const double> dout, bool want_dx) override {
    return conv_.backward(in, static_cast<const Trace&>(trace).inner, dout, want_dx);
  }

  void init(Rng& rng) override { conv_.init(rng); }
  void collect(nn::ParamSet& set) override { conv_.collect(set); }
  std::unique_ptr<Extractor> clone() const override { return std::make_unique<ConvExtractor>(*this); }

  nn::Conv1dMaxPool& layer() { return conv_; }

 private:
  struct Trace : ExtractorTrace {
    nn::Conv1dMaxPool::Trace inner;
  };
  nn::Conv1dMaxPool conv_;
};

/// Recurrent extractor over at most `max_len` elements. Bidirectional mode
/// concatenates the final forward state and the final backward state.
class RecurrentExtractor final : public Extractor {
 public:
  RecurrentExtractor(const std::string& name, std::size_t dim, std::size_t hidden, std::size_t max_len, bool bidirectional)
      : forward_(name + ".fwd", dim, hidden), max_len_(max_len), bidirectional_(bidirectional) {
    if (bidirectional_) backward_ = nn::Lstm(name + ".bwd", dim, hidden);
  }

  ExtractorKind kind() const override { return bidirectional_ ? ExtractorKind::BiLstm : ExtractorKind::Lstm; }
  std::size_t output_width() const override { return (bidirectional_ ? 2 : 1) * forward_.hidden(); }

  Seq truncated(const Seq& in) const {
    if (in.size() <= max_len_) return in;
    return Seq(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(max_len_));
  }

  Vec forward(const Seq& in, std::unique_ptr<ExtractorTrace>* trace) const override {
    require(!in.empty(), ErrorCode::EmptySequence, "line-level extractor needs at least one element");
    const Seq seq = truncated(in);
    auto t = trace ? std::make_unique<Trace>() : nullptr;
    Vec out = forward_.forward(seq, false, t ? &t->fwd : nullptr);
    if (bidirectional_) {
      const Vec back = backward_.forward(seq, true, t ? &t->bwd : nullptr);
      out.insert(out.end(), back.begin(), back.end());
    }
    if (trace) *trace = std::move(t);
    return out;
  }

  Seq backward(const Seq& in, const ExtractorTrace& trace, std::span<const double> dout, bool want_dx) override {
    const auto& t = static_cast<const Trace&>(trace);
    const Seq seq = truncated(in);
    const std::size_t h = forward_.hidden();
    Seq dx = forward_.backward(seq, t.fwd, dout.subspan(0, h), want_dx);
    if (bidirectional_) {
      const Seq db = backward_.backward(seq, t.bwd, dout.subspan(h, h), want_dx);
      if (want_dx)
        for (std::size_t p = 0; p < dx.size(); ++p)
          for (std::size_t i = 0; i < dx[p].size(); ++i) dx[p][i] += db[p][i];
    }
    if (want_dx)
      while (dx.size() < in.size()) dx.emplace_back(in[dx.size()].size(), 0.0);
    return dx;
  }

  std::vector<Vec> forward_sides(std::span<const Seq> sides, std::vector<std::unique_ptr<ExtractorTrace>>* traces) const override {
    std::vector<Seq> seqs;
    std::vector<const Seq*> ptrs;
    for (const auto& in : sides) {
      require(!in.empty(), ErrorCode::EmptySequence, "line-level extractor needs at least one element");
      seqs.push_back(truncated(in));
    }
    for (const auto& q : seqs) ptrs.push_back(&q);
    std::vector<nn::Lstm::Trace*> fwd(sides.size(), nullptr), bwd(sides.size(), nullptr);
    if (traces) {
      traces->clear();
      for (std::size_t s = 0; s < sides.size(); ++s) {
        auto t = std::make_unique<Trace>();
        fwd[s] = &t->fwd;
        bwd[s] = &t->bwd;
        traces->push_back(std::move(t));
      }
    }
    auto out = forward_.forward_many(ptrs, false, fwd);
    if (bidirectional_) {
      const auto back = backward_.forward_many(ptrs, true, bwd);
      for (std::size_t s = 0; s < out.size(); ++s) out[s].insert(out[s].end(), back[s].begin(), back[s].end());
    }
    return out;
  }

  void backward_sides(std::span<const Seq> sides, const std::vector<std::unique_ptr<ExtractorTrace>>& traces,
                      std::span<const Vec> douts) override {
    const std::size_t h = forward_.hidden();
    std::vector<Seq> seqs;
    std::vector<const Seq*> ptrs;
    std::vector<const nn::Lstm::Trace*> fwd, bwd;
    std::vector<std::span<const double>> dfwd, dbwd;
    for (const auto& in : sides) seqs.push_back(truncated(in));
    for (std::size_t s = 0; s < sides.size(); ++s) {
      const auto& t = static_cast<const Trace&>(*traces[s]);
      ptrs.push_back(&seqs[s]);
      fwd.push_back(&t.fwd);
      bwd.push_back(&t.bwd);
      const std::span<const double> d(douts[s]);
      dfwd.push_back(d.subspan(0, h));
      if (bidirectional_) dbwd.push_back(d.subspan(h, h));
    }
    forward_.backward_many(ptrs, fwd, dfwd, false);
    if (bidirectional_) backward_.backward_many(ptrs, bwd, dbwd, false);
  }

  void init(Rng& rng) override {
    forward_.init(rng);
    if (bidirectional_) backward_.init(rng);
  }

  void collect(nn::ParamSet& set) override {
    forward_.collect(set);
    if (bidirectional_) backward_.collect(set);
  }

  std::unique_ptr<Extractor> clone() const override { return std::make_unique<RecurrentExtractor>(*this); }

  nn::Lstm& forward_cell() { return forward_; }
  nn::Lstm& backward_cell() { return backward_; }

  /// Copies the forward weights into the backward direction.
  void tie_directions() {
    require(bidirectional_, ErrorCode::InvalidArgument, "only bidirectional extractors can tie directions");
    backward_.wx.value = forward_.wx.value;
    backward_.wh.value = forward_.wh.value;
    backward_.b.value = forward_.b.value;
  }

 private:
  struct Trace : ExtractorTrace {
    nn::Lstm::Trace fwd, bwd;
  };
  nn::Lstm forward_;
  nn::Lstm backward_;
  std::size_t max_len_;
  bool bidirectional_;
};

inline std::unique_ptr<Extractor> make_extractor(ExtractorKind kind, Granularity g, const ExtractorConfig& cfg,
                                                 const std::string& name = "extractor") {
  cfg.validate();
  switch (kind) {
    case ExtractorKind::Dense:
      require(g == Granularity::CommitLevel, ErrorCode::InvalidArgument, "the single dense extractor only fits commit-level input");
      return std::make_unique<DenseExtractor>(name, cfg.dim);
    case ExtractorKind::PaddedDense: {
      const std::size_t slots = g == Granularity::FileLevel ? cfg.max_files
                                : g == Granularity::HunkLevel ? cfg.max_hunks
                                : g == Granularity::LineLevel ? cfg.max_lines
                                                              : 1;
      return std::make_unique<PaddedDenseExtractor>(name, cfg.dim, slots, cfg.hidden);
    }
    case ExtractorKind::Conv:
      return std::make_unique<ConvExtractor>(name, cfg.dim, cfg.channels, cfg.kernel_width);
    case ExtractorKind::BiLstm:
      return std::make_unique<RecurrentExtractor>(name, cfg.dim, cfg.hidden, cfg.max_lines, true);
    case ExtractorKind::Lstm:
      return std::make_unique<RecurrentExtractor>(name, cfg.dim, cfg.hidden, cfg.max_lines, false);
  }
  fail(ErrorCode::InvalidArgument, "unknown extractor kind");
}

// ---------------------------------------------------------------------------
// Fusion

enum class FusionMode { Bimodal, Unimodal };

constexpr FusionMode fusion_mode(Representation r) noexcept {
  return r == Representation::ContextDependent ? FusionMode::Bimodal : FusionMode::Unimodal;
}

/// Bimodal: ReLU(W f + b). Unimodal: ReLU(W [f_removed; f_added] + b).
class Fusion {
 public:
  Fusion() = default;
  Fusion(const std::string& name, FusionMode mode, std::size_t feature_width, std::size_t out)
      : mode_(mode), dense_(name, (mode == FusionMode::Bimodal ? 1 : 2) * feature_width, out) {}

  FusionMode mode() const noexcept { return mode_; }
  std::size_t arity() const noexcept { return mode_ == FusionMode::Bimodal ? 1 : 2; }
  std::size_t output_width() const noexcept { return dense_.out(); }

  Vec forward(std::span<const Vec> features) const {
    require(features.size() == arity(), ErrorCode::ArityMismatch,
            std::string(mode_ == FusionMode::Bimodal ? "bimodal" : "unimodal") + " fusion expects " + std::to_string(arity()) +
                " feature vector(s), got " + std::to_string(features.size()));
    Vec y = dense_.forward(nn::concat(features));
    nn::relu_inplace(y);
    return y;
  }

  /// Returns one gradient per input feature vector.
  std::vector<Vec> backward(std::span<const Vec> features, std::span<const double> out, std::span<const double> dout) {
    const Vec x = nn::concat(features);
    const Vec dz = nn::relu_backward(out, dout);
    const Vec dx = dense_.backward(x, dz, true);
    std::vector<Vec> parts;
    std::size_t offset = 0;
    for (const auto& f : features) {
      parts.emplace_back(dx.begin() + static_cast<std::ptrdiff_t>(offset), dx.begin() + static_cast<std::ptrdiff_t>(offset + f.size()));
      offset += f.size();
    }
    return parts;
  }

  void init(Rng& rng) { dense_.init(rng); }
  void collect(nn::ParamSet& set) { dense_.collect(set); }
  nn::Dense& layer() { return dense_; }

 private:
  FusionMode mode_ = FusionMode::Bimodal;
  nn::Dense dense_;
};

// ---------------------------------------------------------------------------
// Free-function entry points for the individual extractors

inline Vec extract_line(const RecurrentExtractor& ex, const Seq& seq) { return ex.forward(seq, nullptr); }
inline Vec extract_hunk(const ConvExtractor& ex, const Seq& seq) { return ex.forward(seq, nullptr); }
inline Vec extract_file(const PaddedDenseExtractor& ex, const Seq& seq) { return ex.forward(seq, nullptr); }
inline Vec extract_commit(const DenseExtractor& ex, const Vec& x) { return ex.forward(Seq{x}, nullptr); }
inline Vec fuse(const Fusion& fusion, std::span<const Vec> features) { return fusion.forward(features); }

// ---------------------------------------------------------------------------
// Base network: extractor (shared across sides) + fusion + temporary head

/// Embeddings of one commit under one setting: one sequence per side
/// (a single side for context-dependent settings, removed then added otherwise).
struct EmbeddedInput {
  std::vector<Seq> sides;
};

class BaseNetwork {
 public:
  BaseNetwork(EmbeddingSetting setting, ExtractorConfig cfg, ExtractorKind kind)
      : setting_(setting), cfg_(cfg), extractor_(make_extractor(kind, setting.granularity, cfg)) {
    require(is_valid(setting), ErrorCode::InvalidSetting, to_string(setting));
    fusion_ = Fusion("fusion", fusion_mode(setting.representation), extractor_->output_width(), cfg.hidden);
    head_ = nn::Dense("head", cfg.hidden, 2);
  }

  BaseNetwork(EmbeddingSetting setting, ExtractorConfig cfg)
      : BaseNetwork(setting, cfg, default_extractor(setting.granularity)) {}

  BaseNetwork(const BaseNetwork& other)
      : setting_(other.setting_), cfg_(other.cfg_), extractor_(other.extractor_->clone()), fusion_(other.fusion_), head_(other.head_) {}

  BaseNetwork& operator=(const BaseNetwork& other) {
    if (this != &other) {
      BaseNetwork copy(other);
      std::swap(*this, copy);
    }
    return *this;
  }

  BaseNetwork(BaseNetwork&&) noexcept = default;
  BaseNetwork& operator=(BaseNetwork&&) noexcept = default;

  EmbeddingSetting setting() const noexcept { return setting_; }
  const ExtractorConfig& config() const noexcept { return cfg_; }
  ExtractorKind extractor_kind() const { return extractor_->kind(); }
  std::size_t feature_width() const noexcept { return fusion_.output_width(); }
  Extractor& extractor() { return *extractor_; }
  Fusion& fusion() { return fusion_; }
  nn::Dense& head() { return head_; }

  void init(std::uint64_t seed) {
    Rng rng(seed);
    extractor_->init(rng);
    fusion_.init(rng);
    head_.init(rng);
  }

  nn::ParamSet params() {
    nn::ParamSet set;
    extractor_->collect(set);
    fusion_.collect(set);
    head_.collect(set);
    return set;
  }

  /// Extractor + fusion parameters only (what the ensemble consumes).
  nn::ParamSet feature_params() {
    nn::ParamSet set;
    extractor_->collect(set);
    fusion_.collect(set);
    return set;
  }

  Vec features(const EmbeddedInput& input) const {
    return fusion_.forward(extractor_->forward_sides(input.sides, nullptr));
  }

  Vec logits(const EmbeddedInput& input) const { return head_.forward(features(input)); }

  double loss(const EmbeddedInput& input, bool label) const { return nn::cross_entropy(logits(input), label ? 1 : 0); }

  /// Forward + backward for one example; gradients accumulate into the parameters.
  double accumulate(const EmbeddedInput& input, bool label) {
    std::vector<std::unique_ptr<ExtractorTrace>> traces;
    const auto per_side = extractor_->forward_sides(input.sides, &traces);
    const Vec fused = fusion_.forward(per_side);
    const Vec z = head_.forward(fused);
    const auto lg = nn::softmax_cross_entropy(z, label ? 1 : 0);
    const Vec dfused = head_.backward(fused, lg.dlogits, true);
    const auto dsides = fusion_.backward(per_side, fused, dfused);
    extractor_->backward_sides(input.sides, traces, dsides);
    return lg.loss;
  }

 private:
  EmbeddingSetting setting_;
  ExtractorConfig cfg_;
  std::unique_ptr<Extractor> extractor_;
  Fusion fusion_;
  nn::Dense head_;
};

// ---------------------------------------------------------------------------
// Ensemble classifier: two dense layers over concatenated base features

class EnsembleClassifier {
 public:
  EnsembleClassifier() = default;
  EnsembleClassifier(std::size_t in, std::size_t hidden) : first_("classifier.0", in, hidden), second_("classifier.1", hidden, 2) {}

  std::size_t input_width() const noexcept { return first_.in(); }
  std::size_t hidden_width() const noexcept { return first_.out(); }
  nn::Dense& output_layer() { return second_; }

  void init(std::uint64_t seed) {
    Rng rng(seed);
    first_.init(rng);
    second_.init(rng);
  }

  nn::ParamSet params() {
    nn::ParamSet set;
    first_.collect(set);
    second_.collect(set);
    return set;
  }

  Vec logits(std::span<const double> x) const {
    Vec h = first_.forward(x);
    nn::relu_inplace(h);
    return second_.forward(h);
  }

  double probability(std::span<const double> x) const { return nn::softmax(logits(x))[1]; }

  double loss(std::span<const double> x, bool label) const { return nn::cross_entropy(logits(x), label ? 1 : 0); }

  /// Returns the loss; gradients accumulate. `dx` (optional) receives the input gradient.
  double accumulate(std::span<const double> x, bool label, Vec* dx = nullptr) {
    Vec h = first_.forward(x);
    nn::relu_inplace(h);
    const Vec z = second_.forward(h);
    const auto lg = nn::softmax_cross_entropy(z, label ? 1 : 0);
    const Vec dh = second_.backward(h, lg.dlogits, true);
    const Vec dpre = nn::relu_backward(h, dh);
    Vec d = first_.backward(x, dpre, dx != nullptr);
    if (dx) *dx = std::move(d);
    return lg.loss;
  }

 private:
  nn::Dense first_;
  nn::Dense second_;
};

}  // namespace vfscan
