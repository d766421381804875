// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include "gradcheck.hpp"

using namespace ghztof;
using namespace ghztof::nn;
using Catch::Approx;

TEST_CASE("layer gradients match finite differences") {
  CHECK(gradcheck::conv_layer(3, 4, 3, 1, 6, 7, 1).max_rel < 1e-4);
  CHECK(gradcheck::conv_layer(2, 3, 3, 2, 8, 6, 2).max_rel < 1e-4);
  CHECK(gradcheck::conv_layer(3, 2, 1, 1, 5, 5, 3).max_rel < 1e-4);
  CHECK(gradcheck::conv_layer(2, 2, 5, 1, 6, 6, 4).max_rel < 1e-4);
  CHECK(gradcheck::relu_layer(5).max_rel < 1e-4);
  CHECK(gradcheck::upsample_layer(6).max_rel < 1e-4);
  CHECK(gradcheck::concat_layer(7).max_rel < 1e-4);
}

TEST_CASE("network gradients match finite differences") {
  const LossConfig cfg{0.1, 10.0, 20.96};
  const auto mini = gradcheck::network(Architecture::miniature(5, 4), 8, 8, 11, cfg);
  CHECK(mini.max_rel < 1e-4);
  CHECK(mini.checked == init_params(Architecture::miniature(5, 4), 0).parameter_count());
  CHECK(gradcheck::network(Architecture::standard(3, 4, 3), 8, 8, 12, cfg).max_rel < 1e-4);
  CHECK(gradcheck::network(Architecture::miniature(3, 4), 8, 8, 13, LossConfig{0.0, 10.0, 1.0}).max_rel < 1e-4);
}

TEST_CASE("input gradient of the network") {
  std::mt19937_64 rng(21);
  const NetworkParams p = init_params(Architecture::standard(2, 3, 2), 21);
  Tensor x = gradcheck::random_tensor(2, 4, 6, rng);
  const Tensor r = gradcheck::random_tensor(3, 4, 6, rng);
  NetworkParams g = p.zeros_like();
  const Tensor dx = backward(p, forward_cached(p, x), r, g);
  auto f = [&] { return gradcheck::dot(forward(p, x), r); };
  gradcheck::Report rep;
  for (std::size_t i = 0; i < x.data.size(); ++i) gradcheck::accumulate(rep, dx.data[i], gradcheck::numeric(f, x.data[i], 1e-6));
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("zero weights give bias logits") {
  NetworkParams p = init_params(Architecture::miniature(3, 4), 1);
  for (auto &c : p.convs) std::fill(c.weights.begin(), c.weights.end(), 0.0);
  p.convs.back().bias = {0.5, -1.0, 2.0, 0.25};
  std::mt19937_64 rng(1);
  const Tensor out = forward(p, gradcheck::random_tensor(3, 8, 8, rng));
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) REQUIRE(out(c, y, x) == p.convs.back().bias[static_cast<std::size_t>(c)]);
}

TEST_CASE("forward is translation equivariant away from borders") {
  const NetworkParams p = init_params(Architecture::standard(2, 3, 4), 3);
  std::mt19937_64 rng(3);
  const Tensor x = gradcheck::random_tensor(2, 32, 32, rng);
  Tensor shifted(2, 32, 32);
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 32; ++y)
      for (int xx = 4; xx < 32; ++xx) shifted(c, y, xx) = x(c, y, xx - 4);
  const Tensor a = forward(p, x), b = forward(p, shifted);
  for (int c = 0; c < 3; ++c)
    for (int y = 10; y < 22; ++y)
      for (int xx = 12; xx < 22; ++xx) REQUIRE(b(c, y, xx + 4) == Approx(a(c, y, xx)).margin(1e-12));
}

TEST_CASE("forward is deterministic and validates shapes") {
  const NetworkParams p = init_params(Architecture::standard(2, 3), 9);
  const NetworkParams q = init_params(Architecture::standard(2, 3), 9);
  std::mt19937_64 rng(9);
  const Tensor x = gradcheck::random_tensor(2, 16, 16, rng);
  CHECK(forward(p, x).data == forward(q, x).data);
  CHECK_THROWS_AS(forward(p, gradcheck::random_tensor(3, 16, 16, rng)), ShapeMismatch);
  CHECK_THROWS_AS(forward(p, gradcheck::random_tensor(2, 15, 16, rng)), ShapeMismatch);
}

TEST_CASE("architecture validation and json round trip") {
  const Architecture a = Architecture::standard(10, 16);
  a.validate();
  CHECK(a.max_downsampling() == 2);
  const Architecture b = architecture_from_json(to_json(a));
  CHECK(to_json(b) == to_json(a));

  Architecture bad = a;
  bad.classes = 8;
  CHECK_THROWS_AS(bad.validate(), ShapeMismatch);
  bad = a;
  bad.layers[0].in_channels = 3;
  CHECK_THROWS_AS(bad.validate(), ShapeMismatch);
  bad = a;
  bad.layers.erase(bad.layers.begin() + 6); // drop the upsample
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  CHECK_THROWS_AS(architecture_from_json(nlohmann::json{{"input_channels", 3}}), FormatError);
  CHECK_THROWS_AS(architecture_from_json(nlohmann::json{{"input_channels", 3}, {"classes", 2}, {"layers", {{{"type", "pool"}}}}}),
                  FormatError);
}

TEST_CASE("soft argmax") {
  std::vector<double> hot(6, 0.0);
  hot[3] = 50.0;
  CHECK(soft_argmax(hot, 1.0) == Approx(3.0).margin(1e-6));
  CHECK(soft_argmax(std::vector<double>(16, 0.4), 10.0) == 7.5);
  CHECK(soft_argmax(std::vector<double>{0.0, 1.0, 0.9}, 100.0) == Approx(1.0).margin(1e-3));
  CHECK(soft_argmax(std::vector<double>{0.0, 1.0, 0.9}, 0.01) == Approx(1.0).margin(0.01));
  CHECK(hard_argmax(std::vector<double>{0.0, 1.0, 0.9}) == 1);
  CHECK_THROWS_AS(soft_argmax(hot, 0.0), InvalidArgument);
  // Large logits stay finite.
  CHECK(std::isfinite(soft_argmax(std::vector<double>{1e4, 2e4, 0.0}, 1e3)));
}

TEST_CASE("soft argmax converges to hard argmax") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const int classes = 8;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> l(classes);
    for (double &v : l) v = u(rng);
    const int h = hard_argmax(l);
    double second = -1e9;
    for (int c = 0; c < classes; ++c)
      if (c != h) second = std::max(second, l[static_cast<std::size_t>(c)]);
    const double margin = l[static_cast<std::size_t>(h)] - second;
    if (margin < 1e-3) continue;
    const double gamma = 20.0 / margin;
    const double err = std::abs(soft_argmax(l, gamma) - h);
    REQUIRE(err <= (classes - 1) * classes * std::exp(-gamma * margin));
    REQUIRE(err < 1e-6);
  }
}

TEST_CASE("wrap loss values") {
  const int classes = 4;
  Grid<int> labels(2, 3);
  labels.data = {0, 1, 2, 3, 1, 0};
  const Mask mask = full_mask(2, 3);

  Tensor uniform(classes, 2, 3, 0.7);
  const LossResult u = wrap_loss(uniform, labels, mask, {0.0, 10.0, 20.0});
  CHECK(u.ce == Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(u.loss == u.ce);

  Tensor perfect(classes, 2, 3, 0.0);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 3; ++x) perfect(labels(y, x), y, x) = 60.0;
  const LossResult p = wrap_loss(perfect, labels, mask, {0.1, 10.0, 20.0});
  CHECK(p.ce == Approx(0.0).margin(1e-12));
  CHECK(p.l1 == Approx(0.0).margin(1e-12));
  CHECK(p.loss >= 0.0);

  // One pixel off by one class: L1 term is one wrap in mm divided by the pixel count.
  Tensor off = perfect;
  off(0, 0, 0) = 0.0;
  off(1, 0, 0) = 60.0;
  const LossResult o = wrap_loss(off, labels, mask, {0.1, 10.0, 20.0});
  CHECK(o.l1 == Approx(20.0 / 6.0).epsilon(1e-9));

  Grid<int> bad = labels;
  bad.data[2] = 4;
  CHECK_THROWS_AS(wrap_loss(uniform, bad, mask, {}), InvalidArgument);
  CHECK_THROWS_AS(wrap_loss(uniform, labels, Mask(2, 3), {}), InvalidArgument);
  Mask partial = mask;
  partial.data[2] = 0;
  CHECK_NOTHROW(wrap_loss(uniform, bad, partial, {}));
}

TEST_CASE("zero input: bias gradient equals the mean softmax residual") {
  // One 1x1 conv layer, zero input: logits equal the bias everywhere.
  Architecture a{2, 3, {LayerSpec::conv(2, 3, 1)}};
  NetworkParams p = init_params(a, 1);
  p.convs[0].bias = {0.2, -0.4, 1.1};
  const Tensor x(2, 4, 4);
  Grid<int> labels(4, 4);
  for (std::size_t i = 0; i < labels.data.size(); ++i) labels.data[i] = static_cast<int>(i % 3);
  const Mask mask = full_mask(4, 4);
  const LossResult r = wrap_loss(forward(p, x), labels, mask, {0.0, 10.0, 1.0});
  NetworkParams g = p.zeros_like();
  backward(p, forward_cached(p, x), r.grad, g);
  std::vector<double> prob(3);
  softmax(p.convs[0].bias, 1.0, prob);
  for (int c = 0; c < 3; ++c) {
    double onehot = 0.0;
    for (int l : labels.data) onehot += (l == c) ? 1.0 : 0.0;
    onehot /= 16.0;
    CHECK(g.convs[0].bias[static_cast<std::size_t>(c)] == Approx(prob[static_cast<std::size_t>(c)] - onehot).margin(1e-12));
  }
}
