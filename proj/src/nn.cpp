#include "evorace/nn.hpp"

#include <cmath>
#include <cstdio>

#include "evorace/errors.hpp"

namespace evorace::nn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

std::size_t layer_param_count(const LayerSpec& spec) {
  const auto in = static_cast<std::size_t>(spec.in);
  const auto out = static_cast<std::size_t>(spec.out);
  switch (spec.kind) {
    case LayerKind::kConv:
    case LayerKind::kDeconv: {
      const auto k = static_cast<std::size_t>(spec.kernel);
      return out * in * k * k + out;
    }
    case LayerKind::kDense:
      return out * in + out;
    case LayerKind::kLstm:
      // Two bias vectors, one per weight matrix.
      return 4 * out * in + 4 * out * out + 4 * out + 4 * out;
  }
  return 0;
}

std::size_t param_count(std::span<const LayerSpec> layers) {
  std::size_t total = 0;
  for (const auto& l : layers) total += layer_param_count(l);
  return total;
}

int conv_out_dim(int in, int kernel, int stride) {
  require(kernel >= 1 && stride >= 1, "conv kernel and stride must be >= 1");
  require(in >= kernel, "conv input smaller than kernel");
  return (in - kernel) / stride + 1;
}

std::vector<LayerLayout> build_layout(std::span<const LayerSpec> layers,
                                      std::size_t base_offset) {
  std::vector<LayerLayout> out;
  std::size_t at = base_offset;
  for (const auto& spec : layers) {
    LayerLayout layout;
    layout.spec = spec;
    const std::size_t start = at;
    auto push = [&](std::size_t len) {
      layout.blocks.push_back({at, len});
      at += len;
    };
    const auto in = static_cast<std::size_t>(spec.in);
    const auto H = static_cast<std::size_t>(spec.out);
    switch (spec.kind) {
      case LayerKind::kConv:
      case LayerKind::kDeconv:
        push(H * in * spec.kernel * spec.kernel);
        push(H);
        break;
      case LayerKind::kDense:
        push(H * in);
        push(H);
        break;
      case LayerKind::kLstm:
        push(4 * H * in);   // W_ih
        push(4 * H * H);    // W_hh
        push(4 * H);        // b_ih
        push(4 * H);        // b_hh
        break;
    }
    layout.whole = {start, at - start};
    out.push_back(std::move(layout));
  }
  return out;
}

float apply_activation(Activation act, float x) {
  switch (act) {
    case Activation::kIdentity: return x;
    case Activation::kRelu: return x > 0.0f ? x : 0.0f;
    case Activation::kSigmoid: return 1.0f / (1.0f + std::exp(-x));
    case Activation::kTanh: return std::tanh(x);
  }
  return x;
}

// --- ConvPlan --------------------------------------------------------------

ConvPlan::ConvPlan(const LayerSpec& spec, std::span<const float> weights,
                   std::span<const float> bias)
    : spec_(spec) {
  require(spec.kind == LayerKind::kConv, "ConvPlan needs a conv spec");
  require(spec.kernel >= 1 && spec.stride >= 1, "bad conv kernel/stride");
  const int k = spec.kernel, ic = spec.in, oc = spec.out;
  require(weights.size() ==
              static_cast<std::size_t>(oc) * ic * k * k,
          "conv weight length mismatch");
  require(bias.size() == static_cast<std::size_t>(oc),
          "conv bias length mismatch");
  bias_.assign(bias.begin(), bias.end());
  // Genome order is [o][i][ky][kx]; repack to [ky][kx][i][o] so the
  // innermost accumulation runs over contiguous output channels.
  packed_.resize(weights.size());
  for (int o = 0; o < oc; ++o)
    for (int i = 0; i < ic; ++i)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const std::size_t src = ((static_cast<std::size_t>(o) * ic + i) * k + ky) * k + kx;
          const std::size_t dst = ((static_cast<std::size_t>(ky) * k + kx) * ic + i) * oc + o;
          packed_[dst] = weights[src];
        }
}

namespace {

// Vector microkernels. A fixed chunk of output channels lives in register
// accumulators across the whole reduction, and per output element every
// addition happens in the same ascending order as the scalar fallback, so
// the two paths produce bit-identical results.
#if defined(__GNUC__) || defined(__clang__)
#define EVORACE_VECTOR_KERNELS 1
using V16 = float __attribute__((vector_size(64)));

inline V16 load16(const float* p) {
  V16 v;
  __builtin_memcpy(&v, p, sizeof v);
  return v;
}
inline void store16(float* p, V16 v) { __builtin_memcpy(p, &v, sizeof v); }

// acc[0..31] over in iterations of w rows 'stride' apart.
inline void accum32(const float* w, const float* x, int in, std::size_t stride,
                    V16& a0, V16& a1) {
  for (int c = 0; c < in; ++c, w += stride) {
    const V16 v = V16{} + x[c];
    a0 += v * load16(w);
    a1 += v * load16(w + 16);
  }
}

inline void accum64(const float* w, const float* x, int in, std::size_t stride,
                    V16& a0, V16& a1, V16& a2, V16& a3) {
  for (int c = 0; c < in; ++c, w += stride) {
    const V16 v = V16{} + x[c];
    a0 += v * load16(w);
    a1 += v * load16(w + 16);
    a2 += v * load16(w + 32);
    a3 += v * load16(w + 48);
  }
}
#endif

// y[o] += sum_c x[c] * packed[c][o], additions over ascending input index
// per element. packed is the transposed weight matrix, [in][out].
void matvec_add(const float* packed, const float* x, float* y, int in,
                int out) {
#ifdef EVORACE_VECTOR_KERNELS
  if (out % 64 == 0) {
    for (int ob = 0; ob < out; ob += 64) {
      V16 a0 = load16(y + ob), a1 = load16(y + ob + 16),
          a2 = load16(y + ob + 32), a3 = load16(y + ob + 48);
      accum64(packed + ob, x, in, out, a0, a1, a2, a3);
      store16(y + ob, a0);
      store16(y + ob + 16, a1);
      store16(y + ob + 32, a2);
      store16(y + ob + 48, a3);
    }
    return;
  }
  if (out >= 32) {
    const int vec_end = out & ~31;
    for (int ob = 0; ob < vec_end; ob += 32) {
      V16 a0 = load16(y + ob), a1 = load16(y + ob + 16);
      accum32(packed + ob, x, in, out, a0, a1);
      store16(y + ob, a0);
      store16(y + ob + 16, a1);
    }
    for (int c = 0; c < in; ++c) {
      const float v = x[c];
      const float* w = packed + static_cast<std::size_t>(c) * out;
      for (int o = vec_end; o < out; ++o) y[o] += v * w[o];
    }
    return;
  }
#endif
  for (int c = 0; c < in; ++c) {
    const float v = x[c];
    const float* w = packed + static_cast<std::size_t>(c) * out;
    for (int o = 0; o < out; ++o) y[o] += v * w[o];
  }
}

void matvec(const float* packed, const float* bias, const float* x, float* y,
            int in, int out) {
  for (int o = 0; o < out; ++o) y[o] = bias[o];
  matvec_add(packed, x, y, in, out);
}

#ifdef EVORACE_VECTOR_KERNELS
// P output pixels of one row and 32 output channels per weight pass, so
// each weight element is loaded once per P pixels instead of once per
// pixel. The reduction per element still runs over ascending (ky, kx, i).
template <int P>
void conv_pixels32(const float* in_data, int in_width, int ic,
                   const float* packed, const float* bias, float* out_row,
                   int y, int x0, int k, int s, int oc, Activation act) {
  for (int ob = 0; ob < oc; ob += 32) {
    V16 lo[P], hi[P];
    for (int p = 0; p < P; ++p) {
      lo[p] = load16(bias + ob);
      hi[p] = load16(bias + ob + 16);
    }
    for (int ky = 0; ky < k; ++ky) {
      const float* in_row =
          in_data +
          (static_cast<std::size_t>(y * s + ky) * in_width + x0 * s) * ic;
      const float* w =
          packed + (static_cast<std::size_t>(ky) * k) * ic * oc + ob;
      const int run = k * ic;  // (kx, i) pairs are contiguous in both
      for (int c = 0; c < run; ++c, w += oc) {
        const V16 w0 = load16(w);
        const V16 w1 = load16(w + 16);
        for (int p = 0; p < P; ++p) {
          const V16 v = V16{} + in_row[p * s * ic + c];
          lo[p] += v * w0;
          hi[p] += v * w1;
        }
      }
    }
    for (int p = 0; p < P; ++p) {
      store16(out_row + static_cast<std::size_t>(p) * oc + ob, lo[p]);
      store16(out_row + static_cast<std::size_t>(p) * oc + ob + 16, hi[p]);
    }
  }
  for (int j = 0; j < P * oc; ++j)
    out_row[j] = apply_activation(act, out_row[j]);
}

// Same pattern with a 64-channel block: more accumulators per weight load.
template <int P>
void conv_pixels64(const float* in_data, int in_width, int ic,
                   const float* packed, const float* bias, float* out_row,
                   int y, int x0, int k, int s, int oc, Activation act) {
  for (int ob = 0; ob < oc; ob += 64) {
    V16 acc[P][4];
    for (int p = 0; p < P; ++p)
      for (int q = 0; q < 4; ++q) acc[p][q] = load16(bias + ob + 16 * q);
    for (int ky = 0; ky < k; ++ky) {
      const float* in_row =
          in_data +
          (static_cast<std::size_t>(y * s + ky) * in_width + x0 * s) * ic;
      const float* w =
          packed + (static_cast<std::size_t>(ky) * k) * ic * oc + ob;
      const int run = k * ic;
      for (int c = 0; c < run; ++c, w += oc) {
        const V16 w0 = load16(w), w1 = load16(w + 16), w2 = load16(w + 32),
                  w3 = load16(w + 48);
        for (int p = 0; p < P; ++p) {
          const V16 v = V16{} + in_row[p * s * ic + c];
          acc[p][0] += v * w0;
          acc[p][1] += v * w1;
          acc[p][2] += v * w2;
          acc[p][3] += v * w3;
        }
      }
    }
    for (int p = 0; p < P; ++p)
      for (int q = 0; q < 4; ++q)
        store16(out_row + static_cast<std::size_t>(p) * oc + ob + 16 * q,
                acc[p][q]);
  }
  for (int j = 0; j < P * oc; ++j)
    out_row[j] = apply_activation(act, out_row[j]);
}

// Whole 2x2 output plane in one weight pass (the deepest encoder layer is
// exactly this shape and its weights dominate cache traffic).
void conv_all_2x2(const float* in_data, int in_width, int ic,
                  const float* packed, const float* bias, float* out_data,
                  int k, int s, int oc, Activation act) {
  for (int ob = 0; ob < oc; ob += 64) {
    V16 acc[4][4];
    for (int p = 0; p < 4; ++p)
      for (int q = 0; q < 4; ++q) acc[p][q] = load16(bias + ob + 16 * q);
    for (int ky = 0; ky < k; ++ky) {
      const float* row0 =
          in_data + static_cast<std::size_t>(ky) * in_width * ic;
      const float* row1 =
          in_data + static_cast<std::size_t>(s + ky) * in_width * ic;
      const float* in_px[4] = {row0, row0 + static_cast<std::size_t>(s) * ic,
                               row1, row1 + static_cast<std::size_t>(s) * ic};
      const float* w =
          packed + (static_cast<std::size_t>(ky) * k) * ic * oc + ob;
      const int run = k * ic;
      for (int c = 0; c < run; ++c, w += oc) {
        const V16 w0 = load16(w), w1 = load16(w + 16), w2 = load16(w + 32),
                  w3 = load16(w + 48);
        for (int p = 0; p < 4; ++p) {
          const V16 v = V16{} + in_px[p][c];
          acc[p][0] += v * w0;
          acc[p][1] += v * w1;
          acc[p][2] += v * w2;
          acc[p][3] += v * w3;
        }
      }
    }
    for (int p = 0; p < 4; ++p)
      for (int q = 0; q < 4; ++q)
        store16(out_data + static_cast<std::size_t>(p) * oc + ob + 16 * q,
                acc[p][q]);
  }
  for (int j = 0; j < 4 * oc; ++j)
    out_data[j] = apply_activation(act, out_data[j]);
}
#endif

}  // namespace

void ConvPlan::forward(const Tensor3& input, Tensor3& out) const {
  const int k = spec_.kernel, s = spec_.stride, ic = spec_.in, oc = spec_.out;
  require(input.channels == ic, "conv input channel mismatch");
  const int oh = conv_out_dim(input.height, k, s);
  const int ow = conv_out_dim(input.width, k, s);
  if (out.height != oh || out.width != ow || out.channels != oc)
    out = Tensor3(oh, ow, oc);

#ifdef EVORACE_VECTOR_KERNELS
  if (oc % 32 == 0) {
    const float* in_data = input.data.data();
    float* out_data = out.data.data();
    if (oh == 2 && ow == 2 && oc % 64 == 0) {
      conv_all_2x2(in_data, input.width, ic, packed_.data(), bias_.data(),
                   out_data, k, s, oc, spec_.act);
      return;
    }
    const bool wide = oc % 64 == 0;
    for (int y = 0; y < oh; ++y) {
      auto row = [&](int x) {
        return out_data + (static_cast<std::size_t>(y) * ow + x) * oc;
      };
      int x = 0;
      for (; x + 4 <= ow; x += 4) {
        if (wide)
          conv_pixels64<4>(in_data, input.width, ic, packed_.data(),
                           bias_.data(), row(x), y, x, k, s, oc, spec_.act);
        else
          conv_pixels32<4>(in_data, input.width, ic, packed_.data(),
                           bias_.data(), row(x), y, x, k, s, oc, spec_.act);
      }
      for (; x + 2 <= ow; x += 2) {
        if (wide)
          conv_pixels64<2>(in_data, input.width, ic, packed_.data(),
                           bias_.data(), row(x), y, x, k, s, oc, spec_.act);
        else
          conv_pixels32<2>(in_data, input.width, ic, packed_.data(),
                           bias_.data(), row(x), y, x, k, s, oc, spec_.act);
      }
      for (; x < ow; ++x)
        conv_pixels32<1>(in_data, input.width, ic, packed_.data(),
                         bias_.data(), row(x), y, x, k, s, oc, spec_.act);
    }
    return;
  }
#endif

  const float* in_data = input.data.data();
  float* out_data = out.data.data();
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      float* acc = out_data + (static_cast<std::size_t>(y) * ow + x) * oc;
      for (int o = 0; o < oc; ++o) acc[o] = bias_[o];
      for (int ky = 0; ky < k; ++ky) {
        const float* in_row =
            in_data + (static_cast<std::size_t>(y * s + ky) * input.width + x * s) * ic;
        const float* w_row = packed_.data() + static_cast<std::size_t>(ky) * k * ic * oc;
        for (int kx = 0; kx < k; ++kx) {
          const float* in_px = in_row + static_cast<std::size_t>(kx) * ic;
          const float* w_px = w_row + static_cast<std::size_t>(kx) * ic * oc;
          for (int i = 0; i < ic; ++i) {
            const float v = in_px[i];
            const float* w = w_px + static_cast<std::size_t>(i) * oc;
            for (int o = 0; o < oc; ++o) acc[o] += v * w[o];
          }
        }
      }
      for (int o = 0; o < oc; ++o) acc[o] = apply_activation(spec_.act, acc[o]);
    }
  }
}

Tensor3 ConvPlan::forward(const Tensor3& input) const {
  Tensor3 out;
  forward(input, out);
  return out;
}

// --- DensePlan -------------------------------------------------------------

DensePlan::DensePlan(const LayerSpec& spec, std::span<const float> weights,
                     std::span<const float> bias)
    : spec_(spec) {
  require(spec.kind == LayerKind::kDense, "DensePlan needs a dense spec");
  const int in = spec.in, out = spec.out;
  require(weights.size() == static_cast<std::size_t>(out) * in,
          "dense weight length mismatch");
  require(bias.size() == static_cast<std::size_t>(out),
          "dense bias length mismatch");
  bias_.assign(bias.begin(), bias.end());
  packed_.resize(weights.size());
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c)
      packed_[static_cast<std::size_t>(c) * out + r] =
          weights[static_cast<std::size_t>(r) * in + c];
}

void DensePlan::forward(std::span<const float> x, std::span<float> y) const {
  const int in = spec_.in, out = spec_.out;
  require(x.size() == static_cast<std::size_t>(in), "dense input size mismatch");
  require(y.size() == static_cast<std::size_t>(out), "dense output size mismatch");
  // Per output element the addition order is the same ascending-input order
  // as a plain row dot product.
  matvec(packed_.data(), bias_.data(), x.data(), y.data(), in, out);
  for (int r = 0; r < out; ++r) y[r] = apply_activation(spec_.act, y[r]);
}

std::vector<float> DensePlan::forward(std::span<const float> x) const {
  std::vector<float> y(spec_.out);
  forward(x, y);
  return y;
}

// --- LstmPlan ---------------------------------------------------------------

LstmPlan::LstmPlan(const LstmWeightViews& w)
    : input_size_(w.input_size), hidden_size_(w.hidden_size) {
  const std::size_t H = static_cast<std::size_t>(hidden_size_);
  const std::size_t in = static_cast<std::size_t>(input_size_);
  require(w.w_ih.size() == 4 * H * in, "lstm W_ih length mismatch");
  require(w.w_hh.size() == 4 * H * H, "lstm W_hh length mismatch");
  require(w.b_ih.size() == 4 * H && w.b_hh.size() == 4 * H,
          "lstm bias length mismatch");
  packed_ih_.resize(4 * H * in);
  for (std::size_t r = 0; r < 4 * H; ++r)
    for (std::size_t c = 0; c < in; ++c)
      packed_ih_[c * 4 * H + r] = w.w_ih[r * in + c];
  packed_hh_.resize(4 * H * H);
  for (std::size_t r = 0; r < 4 * H; ++r)
    for (std::size_t c = 0; c < H; ++c)
      packed_hh_[c * 4 * H + r] = w.w_hh[r * H + c];
  bias_.resize(4 * H);
  for (std::size_t r = 0; r < 4 * H; ++r) bias_[r] = w.b_ih[r] + w.b_hh[r];
}

void LstmPlan::step(std::span<const float> x, std::span<float> h,
                    std::span<float> c) const {
  const int H = hidden_size_;
  require(x.size() == static_cast<std::size_t>(input_size_),
          "lstm input size mismatch");
  require(h.size() == static_cast<std::size_t>(H) &&
              c.size() == static_cast<std::size_t>(H),
          "lstm state size mismatch");
  static thread_local std::vector<float> gates;
  gates.resize(4 * static_cast<std::size_t>(H));
  float* g = gates.data();
  const int rows = 4 * H;
  matvec(packed_ih_.data(), bias_.data(), x.data(), g, input_size_, rows);
  matvec_add(packed_hh_.data(), h.data(), g, H, rows);
  // Gate order i, f, g, o.
  for (int j = 0; j < H; ++j) {
    const float ig = apply_activation(Activation::kSigmoid, g[j]);
    const float fg = apply_activation(Activation::kSigmoid, g[H + j]);
    const float gg = apply_activation(Activation::kTanh, g[2 * H + j]);
    const float og = apply_activation(Activation::kSigmoid, g[3 * H + j]);
    const float cn = fg * c[j] + ig * gg;
    c[j] = cn;
    h[j] = og * std::tanh(cn);
  }
}

// --- Plain-view entry points -------------------------------------------------

Tensor3 conv2d_forward(const Tensor3& input, std::span<const float> weights,
                       std::span<const float> bias, const LayerSpec& spec) {
  return ConvPlan(spec, weights, bias).forward(input);
}

std::vector<float> dense_forward(std::span<const float> x,
                                 std::span<const float> weights,
                                 std::span<const float> bias,
                                 const LayerSpec& spec) {
  return DensePlan(spec, weights, bias).forward(x);
}

void lstm_step(std::span<const float> x, std::span<float> h,
               std::span<float> c, const LstmWeightViews& weights) {
  LstmPlan(weights).step(x, h, c);
}

std::vector<float> step_activation(std::span<const float> x) {
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0f ? 1.0f : 0.0f;
  return out;
}

std::string layer_to_string(const LayerSpec& spec) {
  const char* kind = "dense";
  switch (spec.kind) {
    case LayerKind::kConv: kind = "conv"; break;
    case LayerKind::kDeconv: kind = "deconv"; break;
    case LayerKind::kDense: kind = "dense"; break;
    case LayerKind::kLstm: kind = "lstm"; break;
  }
  const char* act = "identity";
  switch (spec.act) {
    case Activation::kIdentity: act = "identity"; break;
    case Activation::kRelu: act = "relu"; break;
    case Activation::kSigmoid: act = "sigmoid"; break;
    case Activation::kTanh: act = "tanh"; break;
  }
  char buf[128];
  if (spec.kind == LayerKind::kConv || spec.kind == LayerKind::kDeconv)
    std::snprintf(buf, sizeof buf, "%s %dx%d k%d s%d %s", kind, spec.in,
                  spec.out, spec.kernel, spec.stride, act);
  else
    std::snprintf(buf, sizeof buf, "%s %dx%d %s", kind, spec.in, spec.out, act);
  return buf;
}

}  // namespace evorace::nn
