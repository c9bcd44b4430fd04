#include <doctest.h>

#include <cmath>
#include <vector>

#include "evorace/errors.hpp"
#include "evorace/nn.hpp"
#include "evorace/rng.hpp"

using namespace evorace;
using nn::Activation;
using nn::LayerKind;
using nn::LayerSpec;
using nn::Tensor3;

namespace {

// Straight transcription of the convolution formula, summation over
// (i, ky, kx) per output element. Independent of the production path.
Tensor3 naive_conv(const Tensor3& in, std::span<const float> w,
                   std::span<const float> b, const LayerSpec& spec) {
  const int k = spec.kernel, s = spec.stride;
  const int oh = (in.height - k) / s + 1;
  const int ow = (in.width - k) / s + 1;
  Tensor3 out(oh, ow, spec.out);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int o = 0; o < spec.out; ++o) {
        double acc = b[o];
        for (int i = 0; i < spec.in; ++i)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx)
              acc += in.at(y * s + ky, x * s + kx, i) *
                     w[((static_cast<std::size_t>(o) * spec.in + i) * k + ky) * k + kx];
        out.at(y, x, o) = nn::apply_activation(spec.act, static_cast<float>(acc));
      }
  return out;
}

Tensor3 random_tensor(int h, int w, int c, RngStream& rng) {
  Tensor3 t(h, w, c);
  for (float& v : t.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

std::vector<float> random_vec(std::size_t n, RngStream& rng) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

}  // namespace

TEST_CASE("conv output dims follow the no-padding formula") {
  CHECK(nn::conv_out_dim(64, 4, 2) == 31);
  CHECK(nn::conv_out_dim(31, 4, 2) == 14);
  CHECK(nn::conv_out_dim(14, 4, 2) == 6);
  CHECK(nn::conv_out_dim(6, 4, 2) == 2);
}

TEST_CASE("conv identity case: 1x1 kernel, unit weight") {
  LayerSpec spec{LayerKind::kConv, 1, 1, 1, 1, Activation::kIdentity};
  RngStream rng(1);
  const Tensor3 in = random_tensor(5, 7, 1, rng);
  const float w[1] = {1.0f}, b[1] = {0.0f};
  const Tensor3 out = nn::conv2d_forward(in, w, b, spec);
  REQUIRE(out.data.size() == in.data.size());
  for (std::size_t i = 0; i < in.data.size(); ++i)
    CHECK(out.data[i] == in.data[i]);
}

TEST_CASE("conv with zero weights emits the bias everywhere") {
  LayerSpec spec{LayerKind::kConv, 2, 3, 3, 1, Activation::kIdentity};
  RngStream rng(2);
  const Tensor3 in = random_tensor(6, 6, 2, rng);
  const std::vector<float> w(3 * 2 * 3 * 3, 0.0f);
  const float b[3] = {0.5f, -1.25f, 2.0f};
  const Tensor3 out = nn::conv2d_forward(in, w, b, spec);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int o = 0; o < 3; ++o) CHECK(out.at(y, x, o) == b[o]);
}

TEST_CASE("conv matches the naive oracle on random shapes") {
  RngStream rng(3);
  const struct { int h, w, ic, oc, k, s; } cases[] = {
      {8, 8, 3, 4, 3, 1}, {10, 7, 2, 5, 4, 2}, {9, 9, 1, 8, 2, 3},
      {12, 12, 4, 4, 5, 2}, {64, 64, 3, 8, 4, 2},
  };
  for (const auto& c : cases) {
    LayerSpec spec{LayerKind::kConv, c.ic, c.oc, c.k, c.s, Activation::kRelu};
    const Tensor3 in = random_tensor(c.h, c.w, c.ic, rng);
    const auto w = random_vec(static_cast<std::size_t>(c.oc) * c.ic * c.k * c.k, rng);
    const auto b = random_vec(c.oc, rng);
    const Tensor3 got = nn::conv2d_forward(in, w, b, spec);
    const Tensor3 want = naive_conv(in, w, b, spec);
    REQUIRE(got.data.size() == want.data.size());
    for (std::size_t i = 0; i < got.data.size(); ++i)
      CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-5));
  }
}

TEST_CASE("conv rejects mismatched dimensions") {
  LayerSpec spec{LayerKind::kConv, 3, 4, 4, 2, Activation::kRelu};
  Tensor3 in(8, 8, 2);  // wrong channel count
  const std::vector<float> w(4 * 3 * 4 * 4, 0.0f), b(4, 0.0f);
  CHECK_THROWS_AS(nn::conv2d_forward(in, w, b, spec), ConfigError);
  Tensor3 in2(8, 8, 3);
  const std::vector<float> w_short(10, 0.0f);
  CHECK_THROWS_AS(nn::conv2d_forward(in2, w_short, b, spec), ConfigError);
  Tensor3 tiny(3, 3, 3);  // smaller than the kernel
  CHECK_THROWS_AS(nn::conv2d_forward(tiny, w, b, spec), ConfigError);
}

TEST_CASE("dense forward hand cases") {
  LayerSpec spec{LayerKind::kDense, 2, 2, 0, 0, Activation::kIdentity};
  const float w[4] = {1, 2, 3, 4};
  const float x[2] = {1, 1};
  const float b[2] = {0, 1};
  const auto y = nn::dense_forward(x, w, b, spec);
  CHECK(y[0] == 3.0f);
  CHECK(y[1] == 8.0f);

  const float zeros[4] = {0, 0, 0, 0};
  const float zb[2] = {0, 0};
  const auto z = nn::dense_forward(x, zeros, zb, spec);
  CHECK(z[0] == 0.0f);
  CHECK(z[1] == 0.0f);

  // identity weights pass the input through the activation
  LayerSpec tanh_spec{LayerKind::kDense, 2, 2, 0, 0, Activation::kTanh};
  const float eye[4] = {1, 0, 0, 1};
  const float xs[2] = {0.3f, -2.0f};
  const auto t = nn::dense_forward(xs, eye, zb, tanh_spec);
  CHECK(t[0] == doctest::Approx(std::tanh(0.3f)));
  CHECK(t[1] == doctest::Approx(std::tanh(-2.0f)));
}

TEST_CASE("dense rejects mismatched dimensions") {
  LayerSpec spec{LayerKind::kDense, 3, 2, 0, 0, Activation::kIdentity};
  const std::vector<float> w(6, 0.0f), b(2, 0.0f), x(4, 0.0f);
  CHECK_THROWS_AS(nn::dense_forward(x, w, b, spec), ConfigError);
}

TEST_CASE("lstm zero case and output bound") {
  const int H = 8, in_dim = 5;
  std::vector<float> w_ih(4 * H * in_dim, 0.0f), w_hh(4 * H * H, 0.0f),
      b_ih(4 * H, 0.0f), b_hh(4 * H, 0.0f);
  nn::LstmWeightViews w{w_ih, w_hh, b_ih, b_hh, in_dim, H};

  std::vector<float> h(H, 0.0f), c(H, 0.0f), x(in_dim, 0.0f);
  nn::lstm_step(x, h, c, w);
  for (float v : h) CHECK(v == 0.0f);
  for (float v : c) CHECK(v == 0.0f);

  // arbitrary weights: components of h stay strictly inside (-1, 1)
  RngStream rng(4);
  for (float& v : w_ih) v = static_cast<float>(rng.uniform(-3.0, 3.0));
  for (float& v : w_hh) v = static_cast<float>(rng.uniform(-3.0, 3.0));
  for (float& v : b_ih) v = static_cast<float>(rng.uniform(-3.0, 3.0));
  for (float& v : b_hh) v = static_cast<float>(rng.uniform(-3.0, 3.0));
  for (int t = 0; t < 50; ++t) {
    for (float& v : x) v = static_cast<float>(rng.uniform(-100.0, 100.0));
    nn::lstm_step(x, h, c, w);
    for (float v : h) {
      CHECK(v > -1.0f);
      CHECK(v < 1.0f);
    }
  }
}

TEST_CASE("lstm single-unit cell matches the scalar gate oracle") {
  const float w_ih[4] = {0.5f, -0.3f, 0.8f, 0.2f};   // i, f, g, o rows
  const float w_hh[4] = {0.1f, 0.4f, -0.2f, 0.3f};
  const float b_ih[4] = {0.05f, 0.1f, -0.05f, 0.2f};
  const float b_hh[4] = {0.0f, -0.1f, 0.15f, 0.05f};
  nn::LstmWeightViews w{w_ih, w_hh, b_ih, b_hh, 1, 1};

  const double x = 0.7, h0 = 0.3, c0 = -0.4;
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double pre_i = 0.5 * x + 0.1 * h0 + 0.05 + 0.0;
  const double pre_f = -0.3 * x + 0.4 * h0 + 0.1 - 0.1;
  const double pre_g = 0.8 * x - 0.2 * h0 - 0.05 + 0.15;
  const double pre_o = 0.2 * x + 0.3 * h0 + 0.2 + 0.05;
  const double c1 = sig(pre_f) * c0 + sig(pre_i) * std::tanh(pre_g);
  const double h1 = sig(pre_o) * std::tanh(c1);

  std::vector<float> h{static_cast<float>(h0)}, c{static_cast<float>(c0)},
      in{static_cast<float>(x)};
  nn::lstm_step(in, h, c, w);
  CHECK(h[0] == doctest::Approx(h1).epsilon(1e-6));
  CHECK(c[0] == doctest::Approx(c1).epsilon(1e-6));
}

TEST_CASE("lstm rejects mismatched state sizes") {
  std::vector<float> w_ih(4 * 2 * 3, 0.0f), w_hh(4 * 2 * 2, 0.0f),
      b(4 * 2, 0.0f);
  nn::LstmWeightViews w{w_ih, w_hh, b, b, 3, 2};
  std::vector<float> h(3, 0.0f), c(2, 0.0f), x(3, 0.0f);
  CHECK_THROWS_AS(nn::lstm_step(x, h, c, w), ConfigError);
}

TEST_CASE("step activation maps strictly-positive to 1") {
  const float x[3] = {-0.3f, 0.0f, 2.1f};
  const auto out = nn::step_activation(x);
  CHECK(out[0] == 0.0f);
  CHECK(out[1] == 0.0f);  // 0.0 is not > 0
  CHECK(out[2] == 1.0f);

  const float neg[4] = {-5.0f, -0.1f, -1e-8f, -100.0f};
  for (float v : nn::step_activation(neg)) CHECK(v == 0.0f);

  RngStream rng(5);
  std::vector<float> big(1000);
  for (float& v : big) v = static_cast<float>(rng.uniform(-10.0, 10.0));
  for (float v : nn::step_activation(big)) CHECK((v == 0.0f || v == 1.0f));
}

TEST_CASE("forward ops are pure") {
  RngStream rng(6);
  LayerSpec spec{LayerKind::kConv, 3, 8, 4, 2, Activation::kRelu};
  const Tensor3 in = random_tensor(16, 16, 3, rng);
  const auto w = random_vec(8 * 3 * 16, rng);
  const auto b = random_vec(8, rng);
  const Tensor3 a = nn::conv2d_forward(in, w, b, spec);
  const Tensor3 c = nn::conv2d_forward(in, w, b, spec);
  CHECK(a.data == c.data);
}

TEST_CASE("layout tiles the parameter range with no gaps") {
  const LayerSpec layers[] = {
      {LayerKind::kConv, 3, 32, 4, 2, Activation::kRelu},
      {LayerKind::kLstm, 35, 256, 0, 0, Activation::kIdentity},
      {LayerKind::kDense, 256, 327, 0, 0, Activation::kIdentity},
  };
  const auto layout = nn::build_layout(layers, 100);
  std::size_t at = 100;
  for (const auto& l : layout) {
    CHECK(l.whole.offset == at);
    std::size_t inner = l.whole.offset;
    for (const auto& blk : l.blocks) {
      CHECK(blk.offset == inner);
      inner += blk.length;
    }
    CHECK(inner == l.whole.end());
    at = l.whole.end();
  }
  CHECK(at == 100 + nn::param_count(layers));
}
