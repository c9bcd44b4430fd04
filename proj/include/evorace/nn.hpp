#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace evorace::nn {

// Dense (h, w, c) row-major activation block. Channels are the fastest
// moving index so per-pixel channel runs are contiguous.
struct Tensor3 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Tensor3() = default;
  Tensor3(int h, int w, int c)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, 0.0f) {}

  float& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t size() const { return data.size(); }
};

enum class LayerKind { kConv, kDeconv, kDense, kLstm };
enum class Activation { kIdentity, kRelu, kSigmoid, kTanh };

// One layer of a forward network. For conv/deconv, in/out are channel
// counts; for dense they are feature widths; for lstm they are input width
// and hidden size. Parameter counts are derivable from this alone.
struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  int in = 0;
  int out = 0;
  int kernel = 0;  // conv/deconv only
  int stride = 0;  // conv/deconv only
  Activation act = Activation::kIdentity;
};

// Contiguous range of a flat parameter vector.
struct ParamSlice {
  std::size_t offset = 0;
  std::size_t length = 0;
  std::size_t end() const { return offset + length; }
};

// Where one layer's parameter blocks live inside a flat vector. Weight
// blocks precede bias blocks; the LSTM carries two bias vectors (b_ih and
// b_hh) after its two weight matrices. This layout is part of the genome
// and checkpoint file contract.
struct LayerLayout {
  LayerSpec spec;
  std::vector<ParamSlice> blocks;
  ParamSlice whole;
};

std::size_t layer_param_count(const LayerSpec& spec);
std::size_t param_count(std::span<const LayerSpec> layers);

// Valid (no-padding) convolution output size: floor((in - k) / s) + 1.
int conv_out_dim(int in, int kernel, int stride);

// Splits layers into weight/bias blocks starting at base_offset.
std::vector<LayerLayout> build_layout(std::span<const LayerSpec> layers,
                                      std::size_t base_offset);

float apply_activation(Activation act, float x);

// --- Forward plans -------------------------------------------------------
//
// A plan owns a repacked copy of a layer's parameters arranged so the inner
// loops run over contiguous memory. Plans are immutable after construction
// and safe to share across threads. The per-element math matches the plain
// layer formulas; only the weight memory layout changes.

class ConvPlan {
 public:
  ConvPlan(const LayerSpec& spec, std::span<const float> weights,
           std::span<const float> bias);

  // out[y,x,o] = act(b[o] + sum_{ky,kx,i} in[y*s+ky, x*s+kx, i] * w[o,i,ky,kx])
  void forward(const Tensor3& input, Tensor3& out) const;
  Tensor3 forward(const Tensor3& input) const;

  const LayerSpec& spec() const { return spec_; }

 private:
  LayerSpec spec_;
  std::vector<float> packed_;  // [ky][kx][i][o]
  std::vector<float> bias_;
};

class DensePlan {
 public:
  DensePlan(const LayerSpec& spec, std::span<const float> weights,
            std::span<const float> bias);

  // y = act(W x + b), W stored row-major (out x in) in the genome.
  void forward(std::span<const float> x, std::span<float> y) const;
  std::vector<float> forward(std::span<const float> x) const;

  const LayerSpec& spec() const { return spec_; }

 private:
  LayerSpec spec_;
  std::vector<float> packed_;  // transposed, [in][out]
  std::vector<float> bias_;
};

// Weight views for a single LSTM cell in genome order: the input-to-hidden
// matrix (4H x in), the hidden-to-hidden matrix (4H x H), then two bias
// vectors of 4H each. Gate blocks are ordered i, f, g, o.
struct LstmWeightViews {
  std::span<const float> w_ih;
  std::span<const float> w_hh;
  std::span<const float> b_ih;
  std::span<const float> b_hh;
  int input_size = 0;
  int hidden_size = 0;
};

class LstmPlan {
 public:
  explicit LstmPlan(const LstmWeightViews& w);

  // Standard LSTM update: i,f,o = sigmoid, g = tanh,
  // c' = f (*) c + i (*) g, h' = o (*) tanh(c').
  void step(std::span<const float> x, std::span<float> h,
            std::span<float> c) const;

  int input_size() const { return input_size_; }
  int hidden_size() const { return hidden_size_; }

 private:
  int input_size_ = 0;
  int hidden_size_ = 0;
  std::vector<float> packed_ih_;  // transposed, [in][4H]
  std::vector<float> packed_hh_;  // transposed, [H][4H]
  std::vector<float> bias_;       // b_ih + b_hh, pre-summed
};

// --- Plain-view entry points (construct a plan per call) ------------------

Tensor3 conv2d_forward(const Tensor3& input, std::span<const float> weights,
                       std::span<const float> bias, const LayerSpec& spec);

std::vector<float> dense_forward(std::span<const float> x,
                                 std::span<const float> weights,
                                 std::span<const float> bias,
                                 const LayerSpec& spec);

// Updates h and c in place.
void lstm_step(std::span<const float> x, std::span<float> h,
               std::span<float> c, const LstmWeightViews& weights);

// out_i = 1 if x_i > 0 else 0.
std::vector<float> step_activation(std::span<const float> x);

std::string layer_to_string(const LayerSpec& spec);

}  // namespace evorace::nn
