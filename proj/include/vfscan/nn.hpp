#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "vfscan/errors.hpp"
#include "vfscan/rng.hpp"

namespace vfscan::nn {

using Vec = std::vector<double>;
using Seq = std::vector<Vec>;

/// A named row-major tensor with its gradient accumulator and Adam moments.
struct Param {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec value, grad, m, v;

  Param() = default;
  Param(std::string n, std::size_t r, std::size_t c)
      : name(std::move(n)), rows(r), cols(c), value(r * c, 0.0), grad(r * c, 0.0), m(r * c, 0.0), v(r * c, 0.0) {}

  std::size_t size() const noexcept { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

/// Non-owning, ordered view over the parameters of a network.
class ParamSet {
 public:
  void add(Param& p) { items_.push_back(&p); }
  void append(const ParamSet& other) { items_.insert(items_.end(), other.items_.begin(), other.items_.end()); }

  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  std::size_t size() const noexcept { return items_.size(); }
  Param& operator[](std::size_t i) const { return *items_[i]; }

  Param* find(const std::string& name) const {
    for (auto* p : items_)
      if (p->name == name) return p;
    return nullptr;
  }

  void zero_grad() const {
    for (auto* p : items_) p->zero_grad();
  }

  void scale_grad(double factor) const {
    if (factor == 1.0) return;
    for (auto* p : items_)
      for (double& g : p->grad) g *= factor;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto* p : items_) n += p->size();
    return n;
  }

  std::vector<Vec> snapshot() const {
    std::vector<Vec> values;
    values.reserve(items_.size());
    for (auto* p : items_) values.push_back(p->value);
    return values;
  }

  void restore(const std::vector<Vec>& values) const {
    require(values.size() == items_.size(), ErrorCode::DimensionMismatch, "snapshot does not match parameter set");
    for (std::size_t i = 0; i < items_.size(); ++i) {
      require(values[i].size() == items_[i]->size(), ErrorCode::DimensionMismatch, "snapshot shape mismatch for " + items_[i]->name);
      items_[i]->value = values[i];
    }
  }

 private:
  std::vector<Param*> items_;
};

inline void glorot_uniform(Param& p, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& x : p.value) x = rng.uniform(-limit, limit);
}

inline double sigmoid(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline void relu_inplace(Vec& x) noexcept {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
}

/// Masks `dy` by the positivity of the ReLU output `y`.
inline Vec relu_backward(std::span<const double> y, std::span<const double> dy) {
  Vec dx(dy.size());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = y[i] > 0.0 ? dy[i] : 0.0;
  return dx;
}

inline Vec concat(std::span<const Vec> parts) {
  Vec out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

namespace detail {

// Hash embeddings are mostly zeros; iterating only the nonzero inputs keeps
// the input-side products cheap.
inline std::vector<std::size_t> nonzeros(std::span<const double> x) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != 0.0) idx.push_back(i);
  return idx;
}

inline bool mostly_zero(std::size_t nnz, std::size_t n) noexcept { return nnz * 4 < n; }

// Four partial sums so the loop is not one serial dependency chain.
inline double dot(const double* a, const double* b, std::size_t n) noexcept {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dense

class Dense {
 public:
  Dense() = default;
  Dense(const std::string& name, std::size_t in, std::size_t out)
      : weight(name + ".weight", out, in), bias(name + ".bias", out, 1), in_(in), out_(out) {}

  std::size_t in() const noexcept { return in_; }
  std::size_t out() const noexcept { return out_; }

  void init(Rng& rng) {
    glorot_uniform(weight, in_, out_, rng);
    std::fill(bias.value.begin(), bias.value.end(), 0.0);
  }

  void collect(ParamSet& set) {
    set.add(weight);
    set.add(bias);
  }

  /// y = W x + b
  Vec forward(std::span<const double> x) const {
    require(x.size() == in_, ErrorCode::DimensionMismatch,
            weight.name + ": input width " + std::to_string(x.size()) + " != " + std::to_string(in_));
    Vec y(bias.value);
    const double* w = weight.value.data();
    const auto nz = detail::nonzeros(x);
    if (detail::mostly_zero(nz.size(), in_)) {
      for (std::size_t o = 0; o < out_; ++o) {
        const double* row = w + o * in_;
        double acc = 0.0;
        for (auto i : nz) acc += row[i] * x[i];
        y[o] += acc;
      }
    } else {
      for (std::size_t o = 0; o < out_; ++o) {
        y[o] += detail::dot(w + o * in_, x.data(), in_);
      }
    }
    return y;
  }

  /// Accumulates dW, db and returns dx (empty when `want_dx` is false).
  Vec backward(std::span<const double> x, std::span<const double> dy, bool want_dx = true) {
    double* gw = weight.grad.data();
    const double* w = weight.value.data();
    const auto nz = detail::nonzeros(x);
    const bool sparse = detail::mostly_zero(nz.size(), in_);
    Vec dx(want_dx ? in_ : 0, 0.0);
    for (std::size_t o = 0; o < out_; ++o) {
      const double g = dy[o];
      if (g == 0.0) continue;
      bias.grad[o] += g;
      double* grow = gw + o * in_;
      if (sparse) {
        for (auto i : nz) grow[i] += g * x[i];
      } else {
        for (std::size_t i = 0; i < in_; ++i) grow[i] += g * x[i];
      }
      if (want_dx) {
        const double* row = w + o * in_;
        for (std::size_t i = 0; i < in_; ++i) dx[i] += g * row[i];
      }
    }
    return dx;
  }

  Param weight, bias;

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

// ---------------------------------------------------------------------------
// 1-D convolution over a sequence of vectors, ReLU, then max over positions

class Conv1dMaxPool {
 public:
  struct Trace {
    std::vector<std::size_t> argmax;  // per channel
    Vec pooled;                       // post-ReLU maxima
  };

  Conv1dMaxPool() = default;
  Conv1dMaxPool(const std::string& name, std::size_t in, std::size_t channels, std::size_t width)
      : kernel(name + ".kernel", channels, width * in), bias(name + ".bias", channels, 1), in_(in), channels_(channels), width_(width) {
    require(width % 2 == 1, ErrorCode::InvalidArgument, "convolution width must be odd");
  }

  std::size_t in() const noexcept { return in_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t width() const noexcept { return width_; }

  void init(Rng& rng) {
    glorot_uniform(kernel, width_ * in_, channels_, rng);
    std::fill(bias.value.begin(), bias.value.end(), 0.0);
  }

  void collect(ParamSet& set) {
    set.add(kernel);
    set.add(bias);
  }

  /// Pre-activations for every position, zero-padded by (width-1)/2 on each side.
  std::vector<Vec> preactivations(const Seq& seq) const {
    const std::size_t n = seq.size();
    const std::ptrdiff_t radius = static_cast<std::ptrdiff_t>(width_ / 2);
    std::vector<std::vector<std::size_t>> nz(n);
    for (std::size_t p = 0; p < n; ++p) {
      require(seq[p].size() == in_, ErrorCode::DimensionMismatch, kernel.name + ": element width mismatch");
      nz[p] = detail::nonzeros(seq[p]);
    }
    std::vector<Vec> pre(n, bias.value);
    const std::size_t row_len = width_ * in_;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t k = 0; k < width_; ++k) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(p) + static_cast<std::ptrdiff_t>(k) - radius;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
        const Vec& x = seq[static_cast<std::size_t>(src)];
        const auto& idx = nz[static_cast<std::size_t>(src)];
        const bool sparse = detail::mostly_zero(idx.size(), in_);
        for (std::size_t c = 0; c < channels_; ++c) {
          const double* row = kernel.value.data() + c * row_len + k * in_;
          double acc = 0.0;
          if (sparse) {
            for (auto i : idx) acc += row[i] * x[i];
          } else {
            acc = detail::dot(row, x.data(), in_);
          }
          pre[p][c] += acc;
        }
      }
    }
    return pre;
  }

  Vec forward(const Seq& seq, Trace* trace = nullptr) const {
    require(!seq.empty(), ErrorCode::EmptySequence, kernel.name + ": empty input sequence");
    const auto pre = preactivations(seq);
    Vec out(channels_, 0.0);
    std::vector<std::size_t> arg(channels_, 0);
    for (std::size_t c = 0; c < channels_; ++c) {
      double best = pre[0][c];
      for (std::size_t p = 1; p < pre.size(); ++p)
        if (pre[p][c] > best) {
          best = pre[p][c];
          arg[c] = p;
        }
      out[c] = best > 0.0 ? best : 0.0;
    }
    if (trace) {
      trace->argmax = std::move(arg);
      trace->pooled = out;
    }
    return out;
  }

  Seq backward(const Seq& seq, const Trace& trace, std::span<const double> dy, bool want_dx = true) {
    const std::size_t n = seq.size();
    const std::ptrdiff_t radius = static_cast<std::ptrdiff_t>(width_ / 2);
    const std::size_t row_len = width_ * in_;
    Seq dx;
    if (want_dx) dx.assign(n, Vec(in_, 0.0));
    for (std::size_t c = 0; c < channels_; ++c) {
      if (trace.pooled[c] <= 0.0 || dy[c] == 0.0) continue;
      const double g = dy[c];
      const std::size_t p = trace.argmax[c];
      bias.grad[c] += g;
      for (std::size_t k = 0; k < width_; ++k) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(p) + static_cast<std::ptrdiff_t>(k) - radius;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
        const Vec& x = seq[static_cast<std::size_t>(src)];
        double* grow = kernel.grad.data() + c * row_len + k * in_;
        const double* row = kernel.value.data() + c * row_len + k * in_;
        for (std::size_t i = 0; i < in_; ++i) {
          if (x[i] != 0.0) grow[i] += g * x[i];
        }
        if (want_dx) {
          Vec& d = dx[static_cast<std::size_t>(src)];
          for (std::size_t i = 0; i < in_; ++i) d[i] += g * row[i];
        }
      }
    }
    return dx;
  }

  Param kernel, bias;

 private:
  std::size_t in_ = 0;
  std::size_t channels_ = 0;
  std::size_t width_ = 1;
};

// ---------------------------------------------------------------------------
// LSTM (gates ordered input, forget, cell, output)

class Lstm {
 public:
  struct Step {
    Vec i, f, g, o, c, h, c_prev, h_prev;
    std::size_t source = 0;  // index into the input sequence
  };
  struct Trace {
    std::vector<Step> steps;
  };

  Lstm() = default;
  Lstm(const std::string& name, std::size_t in, std::size_t hidden)
      : wx(name + ".wx", 4 * hidden, in), wh(name + ".wh", 4 * hidden, hidden), b(name + ".b", 4 * hidden, 1), in_(in), hidden_(hidden) {}

  std::size_t in() const noexcept { return in_; }
  std::size_t hidden() const noexcept { return hidden_; }

  void init(Rng& rng) {
    glorot_uniform(wx, in_, 4 * hidden_, rng);
    glorot_uniform(wh, hidden_, 4 * hidden_, rng);
    std::fill(b.value.begin(), b.value.end(), 0.0);
  }

  void collect(ParamSet& set) {
    set.add(wx);
    set.add(wh);
    set.add(b);
  }

  /// Runs over `seq` (last to first when `reverse`) and returns the final hidden state.
  Vec forward(const Seq& seq, bool reverse, Trace* trace = nullptr) const {
    const Seq* one[] = {&seq};
    Trace* tr[] = {trace};
    return std::move(forward_many(one, reverse, tr)[0]);
  }

  /// Backpropagates a gradient on the final hidden state through time.
  Seq backward(const Seq& seq, const Trace& trace, std::span<const double> dh_last, bool want_dx = true) {
    const Seq* one[] = {&seq};
    const Trace* tr[] = {&trace};
    const std::span<const double> dh[] = {dh_last};
    return std::move(backward_many(one, tr, dh, want_dx)[0]);
  }

  /// Several independent sequences through this cell, stepped together so the
  /// recurrent weights are read once per step for all of them. Each result is
  /// exactly what a separate forward() would give. `traces` may hold nullptrs.
  std::vector<Vec> forward_many(std::span<const Seq* const> seqs, bool reverse, std::span<Trace* const> traces) const {
    const std::size_t h4 = 4 * hidden_;
    const std::size_t n = seqs.size();
    std::size_t steps = 0;
    for (auto* s : seqs) {
      require(!s->empty(), ErrorCode::EmptySequence, wx.name + ": empty input sequence");
      for (const auto& x : *s) require(x.size() == in_, ErrorCode::DimensionMismatch, wx.name + ": element width mismatch");
      steps = std::max(steps, s->size());
    }
    std::vector<Vec> h(n, Vec(hidden_, 0.0)), c(n, Vec(hidden_, 0.0)), z(n);
    std::vector<std::vector<std::size_t>> nz(n);
    std::vector<char> sparse(n);
    std::vector<std::size_t> live;
    for (std::size_t k = 0; k < n; ++k)
      if (k < traces.size() && traces[k]) traces[k]->steps.clear();
    for (std::size_t t = 0; t < steps; ++t) {
      live.clear();
      for (std::size_t k = 0; k < n; ++k) {
        const Seq& seq = *seqs[k];
        if (t >= seq.size()) continue;
        live.push_back(k);
        const Vec& x = seq[reverse ? seq.size() - 1 - t : t];
        z[k] = b.value;
        nz[k] = detail::nonzeros(x);
        sparse[k] = detail::mostly_zero(nz[k].size(), in_);
      }
      for (std::size_t r = 0; r < h4; ++r) {
        const double* row = wx.value.data() + r * in_;
        const double* hrow = wh.value.data() + r * hidden_;
        for (auto k : live) {
          const Seq& seq = *seqs[k];
          const Vec& x = seq[reverse ? seq.size() - 1 - t : t];
          double acc = 0.0;
          if (sparse[k]) {
            for (auto i : nz[k]) acc += row[i] * x[i];
          } else {
            acc = detail::dot(row, x.data(), in_);
          }
          // the state is still zero on the first step
          if (t > 0) acc += detail::dot(hrow, h[k].data(), hidden_);
          z[k][r] += acc;
        }
      }
      for (auto k : live) {
        Trace* trace = k < traces.size() ? traces[k] : nullptr;
        Step s;
        s.source = reverse ? seqs[k]->size() - 1 - t : t;
        s.i.resize(hidden_);
        s.f.resize(hidden_);
        s.g.resize(hidden_);
        s.o.resize(hidden_);
        s.c.resize(hidden_);
        s.h.resize(hidden_);
        const Vec& zk = z[k];
        for (std::size_t j = 0; j < hidden_; ++j) {
          s.i[j] = sigmoid(zk[j]);
          s.f[j] = sigmoid(zk[hidden_ + j]);
          s.g[j] = std::tanh(zk[2 * hidden_ + j]);
          s.o[j] = sigmoid(zk[3 * hidden_ + j]);
          s.c[j] = s.f[j] * c[k][j] + s.i[j] * s.g[j];
          s.h[j] = s.o[j] * std::tanh(s.c[j]);
        }
        if (trace) {
          s.c_prev = c[k];
          s.h_prev = h[k];
        }
        c[k] = s.c;
        h[k] = s.h;
        if (trace) trace->steps.push_back(std::move(s));
      }
    }
    return h;
  }

  /// Backward counterpart of forward_many. Gradients are summed in the same
  /// order as calling backward() on each sequence in turn.
  std::vector<Seq> backward_many(std::span<const Seq* const> seqs, std::span<const Trace* const> traces,
                                 std::span<const std::span<const double>> dh_last, bool want_dx = true) {
    const std::size_t h4 = 4 * hidden_;
    const std::size_t n = seqs.size();
    std::size_t steps = 0;
    for (auto* t : traces) steps = std::max(steps, t->steps.size());
    std::vector<Vec> dh(n), dc(n, Vec(hidden_, 0.0)), dh_prev(n);
    std::vector<Seq> dzs(n);
    for (std::size_t k = 0; k < n; ++k) {
      dh[k].assign(dh_last[k].begin(), dh_last[k].end());
      dzs[k].assign(traces[k]->steps.size(), Vec(h4));
    }
    std::vector<std::size_t> live;
    for (std::size_t t = steps; t-- > 0;) {
      live.clear();
      for (std::size_t k = 0; k < n; ++k) {
        if (t >= traces[k]->steps.size()) continue;
        live.push_back(k);
        const Step& s = traces[k]->steps[t];
        Vec& dz = dzs[k][t];
        Vec& dck = dc[k];
        const Vec& dhk = dh[k];
        for (std::size_t j = 0; j < hidden_; ++j) {
          const double tc = std::tanh(s.c[j]);
          const double d_o = dhk[j] * tc;
          dck[j] += dhk[j] * s.o[j] * (1.0 - tc * tc);
          const double d_i = dck[j] * s.g[j];
          const double d_g = dck[j] * s.i[j];
          const double d_f = dck[j] * s.c_prev[j];
          dz[j] = d_i * s.i[j] * (1.0 - s.i[j]);
          dz[hidden_ + j] = d_f * s.f[j] * (1.0 - s.f[j]);
          dz[2 * hidden_ + j] = d_g * (1.0 - s.g[j] * s.g[j]);
          dz[3 * hidden_ + j] = d_o * s.o[j] * (1.0 - s.o[j]);
          dck[j] *= s.f[j];
        }
        dh_prev[k].assign(hidden_, 0.0);
      }
      // the first step saw a zero state and has no predecessor
      if (t > 0) {
        for (std::size_t r = 0; r < h4; ++r) {
          const double* hrow = wh.value.data() + r * hidden_;
          for (auto k : live) {
            const double g = dzs[k][t][r];
            if (g == 0.0) continue;
            double* d = dh_prev[k].data();
            for (std::size_t j = 0; j < hidden_; ++j) d[j] += g * hrow[j];
          }
        }
      }
      for (auto k : live) std::swap(dh[k], dh_prev[k]);
    }

    std::vector<Seq> dx(n);
    for (std::size_t k = 0; k < n; ++k) {
      const Seq& seq = *seqs[k];
      const auto& trace_steps = traces[k]->steps;
      if (want_dx) dx[k].assign(seq.size(), Vec(in_, 0.0));
      for (std::size_t t = trace_steps.size(); t-- > 0;) {
        const Step& s = trace_steps[t];
        const Vec& dz = dzs[k][t];
        const Vec& x = seq[s.source];
        const auto nz = detail::nonzeros(x);
        const bool sparse = detail::mostly_zero(nz.size(), in_);
        for (std::size_t r = 0; r < h4; ++r) {
          const double g = dz[r];
          if (g == 0.0) continue;
          b.grad[r] += g;
          double* gx = wx.grad.data() + r * in_;
          if (sparse) {
            for (auto i : nz) gx[i] += g * x[i];
          } else {
            for (std::size_t i = 0; i < in_; ++i) gx[i] += g * x[i];
          }
          if (want_dx) {
            const double* row = wx.value.data() + r * in_;
            Vec& d = dx[k][s.source];
            for (std::size_t i = 0; i < in_; ++i) d[i] += g * row[i];
          }
        }
      }
      // summed per row so each row of wh.grad is visited once per sequence
      for (std::size_t r = 0; r < h4; ++r) {
        double* gh = wh.grad.data() + r * hidden_;
        for (std::size_t t = trace_steps.size(); t-- > 1;) {
          const double g = dzs[k][t][r];
          if (g == 0.0) continue;
          const Vec& hp = trace_steps[t].h_prev;
          for (std::size_t j = 0; j < hidden_; ++j) gh[j] += g * hp[j];
        }
      }
    }
    return dx;
  }

  Param wx, wh, b;

 private:
  std::size_t in_ = 0;
  std::size_t hidden_ = 0;
};

// ---------------------------------------------------------------------------
// Loss

struct LossAndGrad {
  double loss = 0.0;
  Vec dlogits;
};

/// Softmax followed by negative log-likelihood of `label`, max-shifted.
inline LossAndGrad softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
  require(label < logits.size(), ErrorCode::InvalidArgument, "label outside the logit range");
  const double shift = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - shift);
  const double log_sum = std::log(sum);
  LossAndGrad out;
  out.loss = -(logits[label] - shift - log_sum);
  out.dlogits.resize(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) out.dlogits[k] = std::exp(logits[k] - shift - log_sum);
  out.dlogits[label] -= 1.0;
  if (out.loss < 0.0) out.loss = 0.0;
  return out;
}

inline double cross_entropy(std::span<const double> logits, std::size_t label) {
  return softmax_cross_entropy(logits, label).loss;
}

inline Vec softmax(std::span<const double> logits) {
  const double shift = *std::max_element(logits.begin(), logits.end());
  Vec p(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) sum += (p[k] = std::exp(logits[k] - shift));
  for (double& x : p) x /= sum;
  return p;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update of `p` using its accumulated gradient; `t` is 1-based.
/// With `clear_grad` the gradient is zeroed in the same pass.
inline void adam_step(Param& p, const AdamConfig& cfg, std::uint64_t t, bool clear_grad = false) {
  require(cfg.lr > 0 && t >= 1, ErrorCode::InvalidArgument, "Adam needs lr > 0 and t >= 1");
  const double inv_c1 = 1.0 / (1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
  const double inv_c2 = 1.0 / (1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
  const double b1 = cfg.beta1, b2 = cfg.beta2, lr = cfg.lr, eps = cfg.epsilon;
  double* __restrict value = p.value.data();
  double* __restrict m = p.m.data();
  double* __restrict v = p.v.data();
  double* __restrict grad = p.grad.data();
  const std::size_t n = p.size();
  auto update = [&](std::size_t i) {
    const double g = grad[i];
    m[i] = b1 * m[i] + (1.0 - b1) * g;
    v[i] = b2 * v[i] + (1.0 - b2) * g * g;
    value[i] -= lr * (m[i] * inv_c1) / (std::sqrt(v[i] * inv_c2) + eps);
  };
  if (clear_grad) {
    for (std::size_t i = 0; i < n; ++i) {
      update(i);
      grad[i] = 0.0;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) update(i);
  }
}

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const ParamSet& params, bool clear_grad = false) {
    ++t_;
    for (auto* p : params) adam_step(*p, cfg_, t_, clear_grad);
  }

  std::uint64_t steps() const noexcept { return t_; }
  void set_steps(std::uint64_t t) noexcept { t_ = t; }
  const AdamConfig& config() const noexcept { return cfg_; }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Finite-difference gradient checking

/// A block of coordinates to perturb together with the analytic gradient
/// computed for it beforehand.
struct GradTarget {
  std::span<double> values;
  std::span<const double> analytic;
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  std::size_t max_coords = 0;  // 0 = every coordinate; otherwise a random subsample (>= 200)
  std::uint64_t seed = 0;
  double floor = 1e-6;         // denominator floor for near-zero gradients
};

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
}

/// Central differences on the selected coordinates, compared to the analytic
/// gradients. Returns the maximum relative error.
inline double grad_check(const std::function<double()>& loss, std::span<const GradTarget> targets,
                         const GradCheckOptions& opt = {}) {
  require(opt.epsilon >= 1e-7 && opt.epsilon <= 1e-3, ErrorCode::InvalidArgument, "epsilon must lie in [1e-7, 1e-3]");
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    require(targets[t].values.size() == targets[t].analytic.size(), ErrorCode::DimensionMismatch, "gradient target shape mismatch");
    for (std::size_t i = 0; i < targets[t].values.size(); ++i) coords.emplace_back(t, i);
  }
  if (opt.max_coords > 0 && coords.size() > opt.max_coords) {
    require(opt.max_coords >= 200, ErrorCode::InvalidArgument, "subsample must cover at least 200 coordinates");
    Rng rng(opt.seed);
    rng.shuffle(coords);
    coords.resize(opt.max_coords);
  }
  double worst = 0.0;
  for (auto [t, i] : coords) {
    double& x = targets[t].values[i];
    const double saved = x;
    x = saved + opt.epsilon;
    const double up = loss();
    x = saved - opt.epsilon;
    const double down = loss();
    x = saved;
    const double numeric = (up - down) / (2.0 * opt.epsilon);
    worst = std::max(worst, relative_error(targets[t].analytic[i], numeric, opt.floor));
  }
  return worst;
}

}  // namespace vfscan::nn
