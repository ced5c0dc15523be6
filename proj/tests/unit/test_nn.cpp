#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "grad_helpers.hpp"
#include "vfscan/nn.hpp"

using namespace vfscan;
using namespace vfscan::nn;
using namespace gradtest;

TEST_CASE("dense forward matches a naive matmul", "[nn]") {
  Rng rng(1);
  Dense d("d", 7, 5);
  randomize(d.weight, rng, 1.0);
  randomize(d.bias, rng, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Vec x = random_vec(rng, 7);
    if (trial % 2) x[1] = x[2] = x[3] = x[4] = x[5] = x[6] = 0.0;  // sparse path
    const Vec y = d.forward(x);
    for (std::size_t o = 0; o < 5; ++o) {
      double s = d.bias.value[o];
      for (std::size_t i = 0; i < 7; ++i) s += d.weight.value[o * 7 + i] * x[i];
      CHECK(std::abs(y[o] - s) < 1e-12);
    }
  }
  CHECK_THROWS_AS(d.forward(Vec(6, 0.0)), Error);
}

TEST_CASE("dense gradients", "[nn][grad]") {
  Rng rng(2);
  Dense d("d", 9, 4);
  d.init(rng);
  randomize(d.bias, rng, 0.5);
  Vec x = random_vec(rng, 9);
  const Vec r = random_vec(rng, 4);
  d.weight.zero_grad();
  d.bias.zero_grad();
  const Vec dx = d.backward(x, r);
  auto loss = [&] { return dot(d.forward(x), r); };
  const std::vector<GradTarget> targets = {{d.weight.value, d.weight.grad}, {d.bias.value, d.bias.grad}, {x, dx}};
  CHECK(grad_check(loss, targets) < 1e-6);
}

namespace {

// Redraws until every channel's maximum is separated from the runner-up and from zero.
bool well_separated(const Conv1dMaxPool& conv, const Seq& seq) {
  const auto pre = conv.preactivations(seq);
  for (std::size_t c = 0; c < conv.channels(); ++c) {
    double best = -1e300, second = -1e300;
    for (const auto& p : pre) {
      if (p[c] > best) {
        second = best;
        best = p[c];
      } else if (p[c] > second) {
        second = p[c];
      }
    }
    if (std::abs(best) < 1e-3 || (pre.size() > 1 && best - second < 1e-3)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("convolution and max-pool gradients", "[nn][grad]") {
  Rng rng(3);
  int checked = 0;
  for (std::uint64_t trial = 0; checked < 5 && trial < 100; ++trial) {
    Conv1dMaxPool conv("c", 6, 5, 3);
    conv.init(rng);
    randomize(conv.bias, rng, 0.3);
    Seq seq = random_seq(rng, 1 + trial % 5, 6);
    if (!well_separated(conv, seq)) continue;
    ++checked;
    Conv1dMaxPool::Trace trace;
    conv.forward(seq, &trace);
    const Vec r = random_vec(rng, 5);
    conv.kernel.zero_grad();
    conv.bias.zero_grad();
    const Seq dx = conv.backward(seq, trace, r);
    auto loss = [&] { return dot(conv.forward(seq), r); };
    std::vector<GradTarget> targets = {{conv.kernel.value, conv.kernel.grad}, {conv.bias.value, conv.bias.grad}};
    for (std::size_t p = 0; p < seq.size(); ++p) targets.push_back({seq[p], dx[p]});
    CHECK(grad_check(loss, targets) < 1e-5);
  }
  CHECK(checked == 5);
}

TEST_CASE("convolution padding law", "[nn]") {
  Rng rng(4);
  Conv1dMaxPool conv("c", 3, 4, 3);
  conv.init(rng);
  randomize(conv.bias, rng, 0.2);
  const Vec h = random_vec(rng, 3);
  const Vec y = conv.forward(Seq{h});
  // With one element and width 3, only the centre kernel column sees data.
  for (std::size_t c = 0; c < 4; ++c) {
    double s = conv.bias.value[c];
    for (std::size_t i = 0; i < 3; ++i) s += conv.kernel.value[c * 9 + 1 * 3 + i] * h[i];
    CHECK(std::abs(y[c] - std::max(s, 0.0)) < 1e-12);
  }
  CHECK_THROWS_AS(Conv1dMaxPool("bad", 3, 4, 2), Error);
}

TEST_CASE("LSTM gradients through three steps", "[nn][grad]") {
  Rng rng(5);
  for (bool reverse : {false, true}) {
    Lstm cell("l", 5, 4);
    cell.init(rng);
    randomize(cell.b, rng, 0.3);
    Seq seq = random_seq(rng, 3, 5);
    Lstm::Trace trace;
    cell.forward(seq, reverse, &trace);
    const Vec r = random_vec(rng, 4);
    cell.wx.zero_grad();
    cell.wh.zero_grad();
    cell.b.zero_grad();
    const Seq dx = cell.backward(seq, trace, r);
    auto loss = [&] { return dot(cell.forward(seq, reverse), r); };
    std::vector<GradTarget> targets = {{cell.wx.value, cell.wx.grad}, {cell.wh.value, cell.wh.grad}, {cell.b.value, cell.b.grad}};
    for (std::size_t p = 0; p < seq.size(); ++p) targets.push_back({seq[p], dx[p]});
    CHECK(grad_check(loss, targets) < 1e-4);
  }
}

TEST_CASE("LSTM sequences stepped together match separate runs", "[nn]") {
  Rng rng(8);
  for (bool reverse : {false, true}) {
    Lstm cell("l", 12, 5);
    cell.init(rng);
    randomize(cell.b, rng, 0.3);
    Seq a = random_seq(rng, 2, 12), b = random_seq(rng, 6, 12), c = random_seq(rng, 4, 12);
    for (auto& x : c) std::fill(x.begin() + 2, x.end(), 0.0);  // sparse path
    const std::vector<const Seq*> seqs = {&a, &b, &c};
    std::vector<Lstm::Trace> solo(3), joint(3);
    std::vector<Vec> alone;
    for (std::size_t k = 0; k < 3; ++k) alone.push_back(cell.forward(*seqs[k], reverse, &solo[k]));
    std::vector<Lstm::Trace*> tp = {&joint[0], &joint[1], &joint[2]};
    const auto together = cell.forward_many(seqs, reverse, tp);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(together[k] == alone[k]);
      REQUIRE(joint[k].steps.size() == seqs[k]->size());
    }

    std::vector<Vec> dh = {random_vec(rng, 5), random_vec(rng, 5), random_vec(rng, 5)};
    for (Param* p : {&cell.wx, &cell.wh, &cell.b}) p->zero_grad();
    std::vector<Seq> dx_alone;
    for (std::size_t k = 0; k < 3; ++k) dx_alone.push_back(cell.backward(*seqs[k], solo[k], dh[k]));
    const Vec gx = cell.wx.grad, gh = cell.wh.grad, gb = cell.b.grad;

    for (Param* p : {&cell.wx, &cell.wh, &cell.b}) p->zero_grad();
    const std::vector<const Lstm::Trace*> ct = {&joint[0], &joint[1], &joint[2]};
    const std::vector<std::span<const double>> ds = {dh[0], dh[1], dh[2]};
    const auto dx_joint = cell.backward_many(seqs, ct, ds);
    CHECK(cell.wx.grad == gx);
    CHECK(cell.wh.grad == gh);
    CHECK(cell.b.grad == gb);
    CHECK(dx_joint == dx_alone);
  }
}

TEST_CASE("LSTM step matches a scalar reference", "[nn]") {
  Rng rng(6);
  const std::size_t in = 3, hid = 2;
  Lstm cell("l", in, hid);
  cell.init(rng);
  randomize(cell.b, rng, 0.5);
  const Seq seq = random_seq(rng, 2, in);
  Vec h(hid, 0.0), c(hid, 0.0);
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  for (const auto& x : seq) {
    Vec z(4 * hid);
    for (std::size_t r = 0; r < 4 * hid; ++r) {
      z[r] = cell.b.value[r];
      for (std::size_t i = 0; i < in; ++i) z[r] += cell.wx.value[r * in + i] * x[i];
      for (std::size_t j = 0; j < hid; ++j) z[r] += cell.wh.value[r * hid + j] * h[j];
    }
    for (std::size_t j = 0; j < hid; ++j) {
      const double ig = sig(z[j]), fg = sig(z[hid + j]), gg = std::tanh(z[2 * hid + j]), og = sig(z[3 * hid + j]);
      c[j] = fg * c[j] + ig * gg;
      h[j] = og * std::tanh(c[j]);
    }
  }
  const Vec out = cell.forward(seq, false);
  for (std::size_t j = 0; j < hid; ++j) CHECK(std::abs(out[j] - h[j]) < 1e-12);
}

TEST_CASE("softmax cross-entropy", "[nn]") {
  const Vec zero = {0.0, 0.0};
  CHECK(std::abs(cross_entropy(zero, 0) - std::log(2.0)) < 1e-15);
  CHECK(std::abs(cross_entropy(zero, 1) - std::log(2.0)) < 1e-15);
  CHECK(cross_entropy(Vec{50.0, -50.0}, 0) < 1e-40);
  CHECK(std::isfinite(cross_entropy(Vec{1000.0, -1000.0}, 1)));

  Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    const Vec z = {rng.uniform(-30, 30), rng.uniform(-30, 30)};
    const std::size_t label = rng.index(2);
    const long double a = z[0], b = z[1];
    const long double ref = std::log(std::exp(a) + std::exp(b)) - (label ? b : a);
    CHECK(std::abs(static_cast<long double>(cross_entropy(z, label)) - ref) < 1e-12L);
    const auto lg = softmax_cross_entropy(z, label);
    const Vec p = softmax(z);
    CHECK(std::abs(lg.dlogits[label] - (p[label] - 1.0)) < 1e-15);
  }
}

TEST_CASE("Adam update rule", "[nn][adam]") {
  AdamConfig cfg;
  cfg.lr = 0.01;

  Param p("p", 1, 3);
  p.value = {1.0, -2.0, 3.0};
  const Vec start = p.value;
  adam_step(p, cfg, 1);
  CHECK(p.value == start);

  // First step: bias-corrected m = g and v = g^2.
  for (double g : {0.5, -3.0, 1e-3}) {
    Param q("q", 1, 1);
    q.grad = {g};
    adam_step(q, cfg, 1);
    CHECK(std::abs(q.value[0] - (-cfg.lr * g / (std::abs(g) + cfg.epsilon))) < 1e-15);
  }

  // Constant gradient: the step tends to lr * sign(g).
  Param r("r", 1, 1);
  r.grad = {-0.25};
  double prev = 0.0;
  for (std::uint64_t t = 1; t <= 2000; ++t) {
    prev = r.value[0];
    adam_step(r, cfg, t);
  }
  CHECK(std::abs((r.value[0] - prev) - cfg.lr) < 1e-6);

  CHECK_THROWS_AS(adam_step(r, cfg, 0), Error);
}

TEST_CASE("Adam step can clear the gradient in place", "[nn][adam]") {
  AdamConfig cfg;
  cfg.lr = 0.01;
  Param a("a", 2, 2), b("b", 2, 2);
  a.value = b.value = {0.3, -1.0, 2.0, 0.0};
  for (std::uint64_t t = 1; t <= 5; ++t) {
    a.grad = b.grad = {0.1 * t, -0.2, 0.0, 1.5};
    adam_step(a, cfg, t);
    adam_step(b, cfg, t, true);
    CHECK(a.value == b.value);
    CHECK(a.m == b.m);
    CHECK(a.v == b.v);
    CHECK(b.grad == Vec(4, 0.0));
  }
}

TEST_CASE("parameter set snapshot and scaling", "[nn]") {
  Dense d("d", 2, 2);
  Rng rng(8);
  d.init(rng);
  ParamSet set;
  d.collect(set);
  CHECK(set.count() == 6);
  CHECK(set.find("d.bias") == &d.bias);
  CHECK(set.find("nope") == nullptr);
  const auto snap = set.snapshot();
  d.weight.value[0] += 1.0;
  set.restore(snap);
  CHECK(d.weight.value == snap[0]);
  d.bias.grad = {2.0, 4.0};
  set.scale_grad(0.5);
  CHECK(d.bias.grad == Vec{1.0, 2.0});
  set.zero_grad();
  CHECK(d.bias.grad == Vec{0.0, 0.0});
}

TEST_CASE("grad_check arguments", "[nn][grad]") {
  Vec x = {1.0};
  Vec g = {2.0};
  const std::vector<GradTarget> t = {{x, g}};
  auto loss = [&] { return x[0] * x[0]; };
  CHECK(grad_check(loss, t) < 1e-8);
  GradCheckOptions bad;
  bad.epsilon = 1e-2;
  CHECK_THROWS_AS(grad_check(loss, t, bad), Error);
}
