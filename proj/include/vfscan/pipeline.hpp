#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfscan/corpus.hpp"
#include "vfscan/decomposer.hpp"
#include "vfscan/embedding.hpp"
#include "vfscan/errors.hpp"
#include "vfscan/extractors.hpp"
#include "vfscan/metrics.hpp"
#include "vfscan/nn.hpp"
#include "vfscan/rng.hpp"

namespace vfscan {

struct TrainSchedule {
  std::size_t max_epochs = 60;
  std::size_t patience = 5;
  std::size_t finetune_epochs = 1;
  std::size_t ensemble_epochs = 20;
  double lr = 1e-5;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;

  bool operator==(const TrainSchedule&) const = default;

  void validate() const {
    require(max_epochs >= 1 && patience >= 1 && finetune_epochs >= 1 && ensemble_epochs >= 1 && batch_size >= 1,
            ErrorCode::InvalidArgument, "schedule counts must be positive");
    require(lr > 0.0 && std::isfinite(lr), ErrorCode::InvalidArgument, "learning rate must be positive");
  }
};

inline nlohmann::json to_json(const TrainSchedule& s) {
  return {{"max_epochs", s.max_epochs}, {"patience", s.patience},  {"finetune_epochs", s.finetune_epochs},
          {"ensemble_epochs", s.ensemble_epochs}, {"lr", s.lr}, {"batch_size", s.batch_size}, {"seed", s.seed}};
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept {
  std::uint64_t s = seed ^ fnv1a64(tag);
  return splitmix64(s);
}

/// Sets a two-class output bias so the initial prediction equals the
/// positive rate of the training labels.
inline void init_prior_bias(nn::Dense& head, const std::vector<bool>& labels) {
  require(head.out() == 2, ErrorCode::InvalidArgument, "prior bias needs a two-class layer");
  double pos = 0.0;
  for (bool l : labels) pos += l ? 1.0 : 0.0;
  const double n = static_cast<double>(labels.size());
  const double p = std::clamp((pos + 0.5) / (n + 1.0), 1e-6, 1.0 - 1e-6);
  head.bias.value = {0.0, std::log(p / (1.0 - p))};
}

// ---------------------------------------------------------------------------
// Fragment labelling

struct LabeledFragment {
  std::string commit_id;
  Fragment fragment;
  bool label = false;
};

/// Every fragment inherits the label of the commit it came from.
inline std::vector<LabeledFragment> label_fragments(std::span<const Commit> commits, Granularity g) {
  std::vector<LabeledFragment> out;
  for (const auto& c : commits) {
    if (commit_loc(c) == 0) continue;
    for (auto& f : decompose(c, g)) out.push_back({c.id, std::move(f), c.label});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embedding of whole commits

/// Encoder inputs for one commit under one setting, grouped by side.
/// Degenerate commits (no changed lines) are represented by one empty fragment.
inline std::vector<std::vector<TextPair>> commit_pairs(EmbeddingSetting s, const Commit& c, const ExtractorConfig& cfg) {
  require(is_valid(s), ErrorCode::InvalidSetting, to_string(s));
  std::vector<Fragment> frags;
  if (commit_loc(c) == 0)
    frags.push_back(Fragment{s.granularity, "", "", {}, std::nullopt});
  else
    frags = decompose(c, s.granularity);

  if (s.representation == Representation::ContextDependent) {
    std::vector<TextPair> side;
    for (const auto& f : frags) side.push_back({f.removed_code, f.added_code});
    return {std::move(side)};
  }

  std::vector<TextPair> removed, added;
  if (s.granularity == Granularity::LineLevel) {
    for (const auto& f : frags) {
      if (f.line_side == Side::Removed && removed.size() < cfg.max_lines) removed.push_back({"", f.removed_code});
      if (f.line_side == Side::Added && added.size() < cfg.max_lines) added.push_back({"", f.added_code});
    }
    if (removed.empty()) removed.push_back({"", ""});
    if (added.empty()) added.push_back({"", ""});
  } else {
    for (const auto& f : frags) {
      removed.push_back({"", f.removed_code});
      added.push_back({"", f.added_code});
    }
  }
  return {std::move(removed), std::move(added)};
}

/// Embeds commits once per setting and keeps the result. Lookups after a
/// `prefill` are read-only and may run concurrently.
class EmbeddingCache {
 public:
  EmbeddingCache(EmbeddingBackend& backend, ExtractorConfig cfg) : backend_(backend), cfg_(cfg) {}

  EmbeddingBackend& backend() noexcept { return backend_; }
  const ExtractorConfig& config() const noexcept { return cfg_; }

  void check_backend() {
    const auto info = backend_.info();
    require(info.dim == cfg_.dim, ErrorCode::DimensionMismatch,
            "backend dimension " + std::to_string(info.dim) + " differs from model dimension " + std::to_string(cfg_.dim));
  }

  void prefill(EmbeddingSetting s, std::span<const Commit> commits) {
    auto& table = tables_[to_string(s)];
    std::vector<const Commit*> missing;
    for (const auto& c : commits)
      if (!table.contains(c.id)) missing.push_back(&c);
    if (missing.empty()) return;
    check_backend();

    constexpr std::size_t kChunk = 4096;
    std::size_t next = 0;
    while (next < missing.size()) {
      std::vector<TextPair> pairs;
      std::vector<std::vector<std::size_t>> side_sizes;
      std::size_t end = next;
      while (end < missing.size() && (pairs.empty() || pairs.size() < kChunk)) {
        auto sides = commit_pairs(s, *missing[end], cfg_);
        side_sizes.emplace_back();
        for (auto& side : sides) {
          side_sizes.back().push_back(side.size());
          for (auto& p : side) pairs.push_back(std::move(p));
        }
        ++end;
      }
      auto vectors = checked_embed(backend_, pairs, cfg_.dim);
      std::size_t k = 0;
      for (std::size_t i = next; i < end; ++i) {
        EmbeddedInput input;
        for (std::size_t n : side_sizes[i - next]) {
          Seq seq;
          for (std::size_t j = 0; j < n; ++j) seq.push_back(std::move(vectors[k++]));
          input.sides.push_back(std::move(seq));
        }
        table.emplace(missing[i]->id, std::move(input));
      }
      next = end;
    }
  }

  const EmbeddedInput& get(EmbeddingSetting s, const std::string& commit_id) const {
    auto t = tables_.find(to_string(s));
    require(t != tables_.end(), ErrorCode::InvalidArgument, "setting " + to_string(s) + " was never embedded");
    auto it = t->second.find(commit_id);
    require(it != t->second.end(), ErrorCode::InvalidArgument, "commit " + commit_id + " was never embedded for " + to_string(s));
    return it->second;
  }

  std::vector<const EmbeddedInput*> lookup(EmbeddingSetting s, std::span<const Commit> commits) {
    prefill(s, commits);
    std::vector<const EmbeddedInput*> out;
    out.reserve(commits.size());
    for (const auto& c : commits) out.push_back(&get(s, c.id));
    return out;
  }

 private:
  EmbeddingBackend& backend_;
  ExtractorConfig cfg_;
  std::map<std::string, std::map<std::string, EmbeddedInput>> tables_;
};

// ---------------------------------------------------------------------------
// Base training

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainLog {
  double initial_val_loss = 0.0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0: the initial parameters were never beaten
  double best_val_loss = 0.0;
  bool early_stopped = false;
  std::vector<std::string> notes;
};

inline nlohmann::json to_json(const TrainLog& log) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : log.epochs) epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
  return {{"initial_val_loss", log.initial_val_loss}, {"epochs", epochs}, {"best_epoch", log.best_epoch},
          {"best_val_loss", log.best_val_loss}, {"early_stopped", log.early_stopped}, {"notes", log.notes}};
}

struct BaseModel {
  BaseNetwork net;
  TrainLog log;
  std::uint64_t adam_steps = 0;

  EmbeddingSetting setting() const noexcept { return net.setting(); }
};

namespace detail {

inline std::vector<bool> labels_of(std::span<const Commit> commits) {
  std::vector<bool> labels;
  labels.reserve(commits.size());
  for (const auto& c : commits) labels.push_back(c.label);
  return labels;
}

template <class LossFn>
double mean_loss(std::size_t n, LossFn&& loss) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += loss(i);
  return total / static_cast<double>(n);
}

/// One epoch of shuffled minibatch Adam. `accumulate(i)` adds the gradient
/// of example i and returns its loss.
template <class AccumulateFn>
double run_epoch(const nn::ParamSet& params, nn::Adam& adam, std::size_t n, std::size_t batch_size, Rng& rng,
                 AccumulateFn&& accumulate) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  double total = 0.0;
  // each step leaves the gradients zeroed for the next batch
  params.zero_grad();
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    for (std::size_t k = start; k < end; ++k) total += accumulate(order[k]);
    params.scale_grad(1.0 / static_cast<double>(end - start));
    adam.step(params, true);
  }
  return total / static_cast<double>(n);
}

}  // namespace detail

/// Trains an initialised network on pre-embedded inputs with early stopping
/// on validation cross-entropy; the best epoch's parameters are kept.
inline BaseModel train_base_embedded(BaseNetwork net, std::span<const EmbeddedInput* const> train, const std::vector<bool>& train_labels,
                                     std::span<const EmbeddedInput* const> val, const std::vector<bool>& val_labels,
                                     const TrainSchedule& schedule) {
  schedule.validate();
  if (train.empty() || val.empty()) fail(ErrorCode::EmptySplit, "base training needs nonempty train and validation sets");
  require(train.size() == train_labels.size() && val.size() == val_labels.size(), ErrorCode::InvalidArgument,
          "inputs and labels differ in length");

  BaseModel model{std::move(net), {}, 0};
  init_prior_bias(model.net.head(), train_labels);
  auto params = model.net.params();
  nn::Adam adam(nn::AdamConfig{schedule.lr});
  Rng rng(derive_seed(schedule.seed, "shuffle:" + to_string(model.setting())));
  auto val_loss = [&] { return detail::mean_loss(val.size(), [&](std::size_t i) { return model.net.loss(*val[i], val_labels[i]); }); };

  model.log.initial_val_loss = val_loss();
  model.log.best_val_loss = model.log.initial_val_loss;
  auto best = params.snapshot();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= schedule.max_epochs; ++epoch) {
    const double tl = detail::run_epoch(params, adam, train.size(), schedule.batch_size, rng,
                                        [&](std::size_t i) { return model.net.accumulate(*train[i], train_labels[i]); });
    const double vl = val_loss();
    model.log.epochs.push_back({epoch, tl, vl});
    if (vl < model.log.best_val_loss) {
      model.log.best_val_loss = vl;
      model.log.best_epoch = epoch;
      best = params.snapshot();
      since_best = 0;
    } else if (++since_best >= schedule.patience) {
      model.log.early_stopped = epoch < schedule.max_epochs;
      break;
    }
  }
  params.restore(best);
  model.adam_steps = adam.steps();
  return model;
}

/// Builds, initialises and trains the base network for one setting.
inline BaseModel train_base(EmbeddingSetting setting, const CorpusSplit& split, const TrainSchedule& schedule, EmbeddingCache& cache,
                            std::optional<ExtractorKind> kind = std::nullopt) {
  if (split.train.empty() || split.validation.empty())
    fail(ErrorCode::EmptySplit, "base training needs nonempty train and validation sets");
  BaseNetwork net(setting, cache.config(), kind.value_or(default_extractor(setting.granularity)));
  net.init(derive_seed(schedule.seed, "init:" + to_string(setting)));

  const auto g = setting.granularity;
  const bool two_step = g == Granularity::HunkLevel || g == Granularity::LineLevel;
  std::vector<std::string> notes;
  if (two_step) {
    const auto fragments = label_fragments(split.train, g);
    std::size_t positives = 0;
    for (const auto& f : fragments) positives += f.label ? 1 : 0;
    notes.push_back("encoder fine-tune on " + std::to_string(fragments.size()) + " " + std::string(to_string(g)) + " fragments (" +
                    std::to_string(positives) + " positive) for " + std::to_string(schedule.finetune_epochs) +
                    " epoch(s): no-op, backend is not trainable");
  } else {
    notes.push_back("joint encoder fine-tune: no-op, backend is not trainable; extractor trained alone");
  }

  const auto train = cache.lookup(setting, split.train);
  const auto val = cache.lookup(setting, split.validation);
  auto model = train_base_embedded(std::move(net), train, detail::labels_of(split.train), val, detail::labels_of(split.validation), schedule);
  model.log.notes.insert(model.log.notes.begin(), notes.begin(), notes.end());
  return model;
}

inline BaseModel train_base(EmbeddingSetting setting, const CorpusSplit& split, const TrainSchedule& schedule, EmbeddingBackend& backend,
                            const ExtractorConfig& cfg) {
  EmbeddingCache cache(backend, cfg);
  return train_base(setting, split, schedule, cache);
}

/// Trains one base model per setting. With threads > 1 the trainings run
/// concurrently; embeddings are computed up front so workers only read.
inline std::vector<BaseModel> train_bases(std::span<const EmbeddingSetting> settings, const CorpusSplit& split, const TrainSchedule& schedule,
                                          EmbeddingCache& cache, std::size_t threads = 1) {
  for (auto s : settings) {
    cache.prefill(s, split.train);
    cache.prefill(s, split.validation);
  }
  std::vector<std::optional<BaseModel>> slots(settings.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < settings.size(); ++i) slots[i] = train_base(settings[i], split, schedule, cache);
  } else {
    for (std::size_t wave = 0; wave < settings.size(); wave += threads) {
      std::vector<std::future<BaseModel>> running;
      const std::size_t end = std::min(settings.size(), wave + threads);
      for (std::size_t i = wave; i < end; ++i)
        running.push_back(std::async(std::launch::async, [&, i] { return train_base(settings[i], split, schedule, cache); }));
      for (std::size_t i = wave; i < end; ++i) slots[i] = running[i - wave].get();
    }
  }
  std::vector<BaseModel> out;
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------------------
// Ensemble

/// Normalising constant of the adjustment: the largest LOC among
/// vulnerability-fixing training commits, at least 2.
inline std::size_t compute_a(std::span<const Commit> train) {
  std::optional<std::size_t> a;
  for (const auto& c : train)
    if (c.label) a = std::max(a.value_or(0), commit_loc(c));
  if (!a) fail(ErrorCode::NoVulnFixInTrain, "training split has no vulnerability-fixing commit");
  return std::max<std::size_t>(*a, 2);
}

struct EnsembleModel {
  std::vector<BaseModel> bases;
  EnsembleClassifier classifier;
  std::size_t a = 2;
  TrainLog log;
  std::uint64_t adam_steps = 0;

  std::size_t feature_width() const noexcept {
    std::size_t w = 0;
    for (const auto& b : bases) w += b.net.feature_width();
    return w;
  }
};

/// Concatenated frozen base features for each commit.
inline std::vector<Vec> ensemble_features(const std::vector<BaseModel>& bases, std::span<const Commit> commits, EmbeddingCache& cache) {
  std::vector<Vec> out(commits.size());
  for (const auto& b : bases) {
    const auto inputs = cache.lookup(b.setting(), commits);
    for (std::size_t i = 0; i < commits.size(); ++i) {
      const Vec f = b.net.features(*inputs[i]);
      out[i].insert(out[i].end(), f.begin(), f.end());
    }
  }
  return out;
}

/// Freezes the bases and trains the two-layer classifier on their features.
inline EnsembleModel train_ensemble(std::vector<BaseModel> bases, const CorpusSplit& split, const TrainSchedule& schedule, EmbeddingCache& cache,
                                    std::optional<std::size_t> hidden = std::nullopt) {
  schedule.validate();
  require(!bases.empty(), ErrorCode::InvalidArgument, "ensemble needs at least one base model");
  if (split.train.empty()) fail(ErrorCode::EmptySplit, "ensemble training needs a nonempty train set");
  EnsembleModel model;
  model.a = compute_a(split.train);
  model.bases = std::move(bases);

  const auto xs = ensemble_features(model.bases, split.train, cache);
  const auto labels = detail::labels_of(split.train);
  model.classifier = EnsembleClassifier(model.feature_width(), hidden.value_or(cache.config().hidden));
  model.classifier.init(derive_seed(schedule.seed, "init:ensemble"));
  init_prior_bias(model.classifier.output_layer(), labels);

  std::vector<Vec> vxs;
  std::vector<bool> vlabels;
  if (!split.validation.empty()) {
    vxs = ensemble_features(model.bases, split.validation, cache);
    vlabels = detail::labels_of(split.validation);
  }
  auto val_loss = [&] {
    if (vxs.empty()) return std::numeric_limits<double>::quiet_NaN();
    return detail::mean_loss(vxs.size(), [&](std::size_t i) { return model.classifier.loss(vxs[i], vlabels[i]); });
  };

  auto params = model.classifier.params();
  nn::Adam adam(nn::AdamConfig{schedule.lr});
  Rng rng(derive_seed(schedule.seed, "shuffle:ensemble"));
  model.log.initial_val_loss = val_loss();
  for (std::size_t epoch = 1; epoch <= schedule.ensemble_epochs; ++epoch) {
    const double tl = detail::run_epoch(params, adam, xs.size(), schedule.batch_size, rng,
                                        [&](std::size_t i) { return model.classifier.accumulate(xs[i], labels[i]); });
    model.log.epochs.push_back({epoch, tl, val_loss()});
  }
  model.log.best_epoch = schedule.ensemble_epochs;
  model.log.best_val_loss = model.log.epochs.back().val_loss;
  model.log.notes.push_back("base models frozen; classifier trained for a fixed number of epochs");
  model.adam_steps = adam.steps();
  return model;
}

// ---------------------------------------------------------------------------
// Scoring

inline std::vector<double> predict(const EnsembleModel& model, std::span<const Commit> commits, EmbeddingCache& cache) {
  const auto xs = ensemble_features(model.bases, commits, cache);
  std::vector<double> probs;
  probs.reserve(xs.size());
  for (const auto& x : xs) probs.push_back(model.classifier.probability(x));
  return probs;
}

inline double predict(const EnsembleModel& model, const Commit& c, EmbeddingCache& cache) {
  return predict(model, std::span<const Commit>(&c, 1), cache)[0];
}

/// S = max(prob - prob * log_a(loc), 0), with loc 0 read as 1.
inline double adjust(double prob, std::size_t loc, std::size_t a) {
  require(a >= 2, ErrorCode::InvalidArgument, "adjustment base a must be at least 2");
  const double l = static_cast<double>(std::max<std::size_t>(loc, 1));
  const double s = prob - prob * (std::log(l) / std::log(static_cast<double>(a)));
  return std::max(s, 0.0);
}

inline ScoredCommit scored(const Commit& c, double prob, double score) {
  return {c.id, prob, score, commit_loc(c), commit_hunks(c), commit_files(c), c.label};
}

inline RankedList rank_commits(std::span<const Commit> commits, std::span<const double> probs, bool use_adjustment, std::size_t a) {
  require(commits.size() == probs.size(), ErrorCode::InvalidArgument, "commit and probability counts differ");
  RankedList list;
  list.reserve(commits.size());
  for (std::size_t i = 0; i < commits.size(); ++i)
    list.push_back(scored(commits[i], probs[i], use_adjustment ? adjust(probs[i], commit_loc(commits[i]), a) : probs[i]));
  sort_ranked(list);
  return list;
}

inline RankedList rank(const EnsembleModel& model, std::span<const Commit> commits, EmbeddingCache& cache, bool use_adjustment) {
  const auto probs = predict(model, commits, cache);
  return rank_commits(commits, probs, use_adjustment, model.a);
}

// ---------------------------------------------------------------------------
// Baselines

/// Smallest commits first; score is 1 - (loc - min) / (max - min).
inline RankedList baseline_loc_sensitive(std::span<const Commit> commits) {
  std::size_t lo = std::numeric_limits<std::size_t>::max(), hi = 0;
  for (const auto& c : commits) {
    lo = std::min(lo, commit_loc(c));
    hi = std::max(hi, commit_loc(c));
  }
  RankedList list;
  for (const auto& c : commits) {
    const double s = hi > lo ? 1.0 - static_cast<double>(commit_loc(c) - lo) / static_cast<double>(hi - lo) : 1.0;
    list.push_back(scored(c, s, s));
  }
  sort_ranked(list);
  return list;
}

struct LogisticFit {
  double mean = 0.0;
  double scale = 1.0;
  double w0 = 0.0;
  double w1 = 0.0;
  std::size_t iterations = 0;

  double probability(double x) const { return nn::sigmoid(w0 + w1 * (x - mean) / scale); }
};

/// One-feature logistic regression by Newton iterations on the standardised
/// feature with a small L2 penalty on the slope.
inline LogisticFit fit_logistic(std::span<const double> x, const std::vector<bool>& y, double l2 = 1e-6, std::size_t max_iter = 100) {
  require(x.size() == y.size() && !x.empty(), ErrorCode::InvalidArgument, "fit needs matching nonempty inputs");
  std::size_t positives = 0;
  for (bool b : y) positives += b ? 1 : 0;
  if (positives == 0 || positives == y.size()) fail(ErrorCode::DegenerateTraining, "logistic fit needs both classes");

  LogisticFit fit;
  const double n = static_cast<double>(x.size());
  for (double v : x) fit.mean += v / n;
  double var = 0.0;
  for (double v : x) var += (v - fit.mean) * (v - fit.mean) / n;
  fit.scale = var > 0.0 ? std::sqrt(var) : 1.0;

  for (fit.iterations = 0; fit.iterations < max_iter; ++fit.iterations) {
    double g0 = 0.0, g1 = l2 * fit.w1, h00 = 0.0, h01 = 0.0, h11 = l2;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double z = (x[i] - fit.mean) / fit.scale;
      const double p = nn::sigmoid(fit.w0 + fit.w1 * z);
      const double r = p - (y[i] ? 1.0 : 0.0);
      const double w = p * (1.0 - p);
      g0 += r;
      g1 += r * z;
      h00 += w;
      h01 += w * z;
      h11 += w * z * z;
    }
    h00 += 1e-12;
    const double det = h00 * h11 - h01 * h01;
    if (!(det > 0.0) || !std::isfinite(det)) break;
    const double d0 = (h11 * g0 - h01 * g1) / det;
    const double d1 = (h00 * g1 - h01 * g0) / det;
    fit.w0 -= d0;
    fit.w1 -= d1;
    if (std::abs(d0) + std::abs(d1) < 1e-10) break;
  }
  require(std::isfinite(fit.w0) && std::isfinite(fit.w1), ErrorCode::DegenerateTraining, "logistic fit diverged");
  return fit;
}

/// Logistic regression on the number of added lines.
inline RankedList baseline_lapredict(std::span<const Commit> train, std::span<const Commit> test) {
  std::vector<double> x;
  for (const auto& c : train) x.push_back(static_cast<double>(commit_added_loc(c)));
  const auto fit = fit_logistic(x, detail::labels_of(train));
  RankedList list;
  for (const auto& c : test) {
    const double p = fit.probability(static_cast<double>(commit_added_loc(c)));
    list.push_back(scored(c, p, p));
  }
  sort_ranked(list);
  return list;
}

}  // namespace vfscan
