#include "evorace/agent.hpp"

#include <cmath>
#include <cstdio>

#include "evorace/errors.hpp"

namespace evorace::agent {

namespace {

using nn::Activation;
using nn::LayerKind;
using nn::LayerSpec;

Architecture make_architecture() {
  Architecture a;
  const int chans[5] = {kFrameChannels, 32, 64, 128, 256};
  for (int i = 0; i < 4; ++i)
    a.encoder_convs.push_back(
        {LayerKind::kConv, chans[i], chans[i + 1], 4, 2, Activation::kRelu});
  // 64 -> 31 -> 14 -> 6 -> 2 spatial, so the flattened width is 2*2*256.
  const int flat = 2 * 2 * 256;
  a.mu_head = {LayerKind::kDense, flat, kLatentDim, 0, 0, Activation::kIdentity};
  a.log_sigma_head = a.mu_head;
  a.lstm = {LayerKind::kLstm, kMemoryInputDim, kHiddenDim, 0, 0,
            Activation::kIdentity};
  a.mdn_head = {LayerKind::kDense, kHiddenDim, kMdnHeadDim, 0, 0,
                Activation::kIdentity};
  a.controller = {LayerKind::kDense, kControllerInputDim, kActionDim, 0, 0,
                  Activation::kIdentity};
  // Static shape definition only; the decoder is never evaluated here.
  a.decoder.push_back(
      {LayerKind::kDense, kLatentDim, 1024, 0, 0, Activation::kIdentity});
  a.decoder.push_back({LayerKind::kDeconv, 1024, 128, 5, 2, Activation::kRelu});
  a.decoder.push_back({LayerKind::kDeconv, 128, 64, 5, 2, Activation::kRelu});
  a.decoder.push_back({LayerKind::kDeconv, 64, 32, 6, 2, Activation::kRelu});
  a.decoder.push_back({LayerKind::kDeconv, 32, 3, 6, 2, Activation::kSigmoid});
  return a;
}

std::vector<LayerSpec> vision_specs(const Architecture& a) {
  std::vector<LayerSpec> v = a.encoder_convs;
  v.push_back(a.mu_head);
  v.push_back(a.log_sigma_head);
  return v;
}

std::vector<LayerSpec> memory_specs(const Architecture& a) {
  return {a.lstm, a.mdn_head};
}

struct Layouts {
  std::vector<nn::LayerLayout> vision;
  std::vector<nn::LayerLayout> memory;
  std::vector<nn::LayerLayout> controller;
  GenomePartition partition;
};

Layouts make_layouts() {
  const Architecture& a = architecture();
  Layouts l;
  const auto vspecs = vision_specs(a);
  l.vision = nn::build_layout(vspecs, 0);
  const std::size_t vlen = nn::param_count(vspecs);
  const auto mspecs = memory_specs(a);
  l.memory = nn::build_layout(mspecs, vlen);
  const std::size_t mlen = nn::param_count(mspecs);
  const LayerSpec cspec[] = {a.controller};
  l.controller = nn::build_layout(cspec, vlen + mlen);
  l.partition.vision = {0, vlen};
  l.partition.memory = {vlen, mlen};
  l.partition.controller = {vlen + mlen, nn::layer_param_count(a.controller)};
  return l;
}

const Layouts& layouts() {
  static const Layouts l = make_layouts();
  return l;
}

std::uint64_t fnv1a(std::span<const char> bytes) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char b : bytes) {
    h ^= static_cast<unsigned char>(b);
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace

const Architecture& architecture() {
  static const Architecture a = make_architecture();
  return a;
}

const std::vector<nn::LayerLayout>& vision_layout() { return layouts().vision; }
const std::vector<nn::LayerLayout>& memory_layout() { return layouts().memory; }
const std::vector<nn::LayerLayout>& controller_layout() {
  return layouts().controller;
}

std::size_t vision_param_count() { return layouts().partition.vision.length; }
std::size_t memory_param_count() { return layouts().partition.memory.length; }
std::size_t controller_param_count() {
  return layouts().partition.controller.length;
}
std::size_t genome_param_count() {
  return layouts().partition.controller.end();
}
std::size_t decoder_param_count() {
  return nn::param_count(architecture().decoder);
}
std::size_t vae_param_count() {
  return vision_param_count() + decoder_param_count();
}

const GenomePartition& genome_partition() { return layouts().partition; }

std::string architecture_table() {
  const Architecture& a = architecture();
  std::string out;
  auto add = [&](const char* group, const LayerSpec& s) {
    out += group;
    out += ": ";
    out += nn::layer_to_string(s);
    out += "\n";
  };
  for (const auto& s : a.encoder_convs) add("encoder", s);
  add("encoder", a.mu_head);
  add("encoder", a.log_sigma_head);
  add("memory", a.lstm);
  add("memory", a.mdn_head);
  add("controller", a.controller);
  for (const auto& s : a.decoder) add("decoder", s);
  return out;
}

std::uint64_t architecture_hash() {
  static const std::uint64_t h = [] {
    const std::string t = architecture_table();
    return fnv1a(std::span<const char>(t.data(), t.size()));
  }();
  return h;
}

Genome init_genome(std::uint64_t seed) {
  Genome g;
  RngStream rng = RngStream::derive(seed, 0, StreamPurpose::kGenomeInit, 0);
  auto fill_block = [&](const nn::ParamSlice& s, double bound) {
    float* p = g.params.data() + s.offset;
    for (std::size_t i = 0; i < s.length; ++i)
      p[i] = static_cast<float>(rng.uniform(-bound, bound));
  };
  auto fill_layer = [&](const nn::LayerLayout& l) {
    const auto& spec = l.spec;
    switch (spec.kind) {
      case LayerKind::kConv:
      case LayerKind::kDeconv: {
        const double bound =
            std::sqrt(1.0 / (static_cast<double>(spec.in) * spec.kernel * spec.kernel));
        fill_block(l.blocks[0], bound);
        fill_block(l.blocks[1], bound);
        break;
      }
      case LayerKind::kDense: {
        const double bound = std::sqrt(1.0 / spec.in);
        fill_block(l.blocks[0], bound);
        fill_block(l.blocks[1], bound);
        break;
      }
      case LayerKind::kLstm: {
        // Each matrix uses its own input width: W_ih/b_ih the cell input,
        // W_hh/b_hh the hidden width.
        const double bound_ih = std::sqrt(1.0 / spec.in);
        const double bound_hh = std::sqrt(1.0 / spec.out);
        fill_block(l.blocks[0], bound_ih);
        fill_block(l.blocks[1], bound_hh);
        fill_block(l.blocks[2], bound_ih);
        fill_block(l.blocks[3], bound_hh);
        break;
      }
    }
  };
  for (const auto& l : vision_layout()) fill_layer(l);
  for (const auto& l : memory_layout()) fill_layer(l);
  for (const auto& l : controller_layout()) fill_layer(l);
  return g;
}

std::array<float, kMixtureCount> MdnOutput::mixture_weights() const {
  std::array<float, kMixtureCount> w{};
  float max_logit = mixture_logits[0];
  for (float v : mixture_logits) max_logit = std::max(max_logit, v);
  float sum = 0.0f;
  for (int i = 0; i < kMixtureCount; ++i) {
    w[i] = std::exp(mixture_logits[i] - max_logit);
    sum += w[i];
  }
  for (float& v : w) v /= sum;
  return w;
}

// --- Policy -----------------------------------------------------------------

namespace {

nn::ConvPlan make_conv_plan(const Genome& g, const nn::LayerLayout& l) {
  return nn::ConvPlan(l.spec, g.slice(l.blocks[0]), g.slice(l.blocks[1]));
}

nn::DensePlan make_dense_plan(const Genome& g, const nn::LayerLayout& l) {
  return nn::DensePlan(l.spec, g.slice(l.blocks[0]), g.slice(l.blocks[1]));
}

nn::LstmPlan make_lstm_plan(const Genome& g, const nn::LayerLayout& l) {
  nn::LstmWeightViews w;
  w.w_ih = g.slice(l.blocks[0]);
  w.w_hh = g.slice(l.blocks[1]);
  w.b_ih = g.slice(l.blocks[2]);
  w.b_hh = g.slice(l.blocks[3]);
  w.input_size = l.spec.in;
  w.hidden_size = l.spec.out;
  return nn::LstmPlan(w);
}

}  // namespace

Policy::Policy(const Genome& genome, LatentMode mode)
    : mode_(mode),
      convs_([&] {
        std::vector<nn::ConvPlan> v;
        for (int i = 0; i < 4; ++i)
          v.push_back(make_conv_plan(genome, vision_layout()[i]));
        return v;
      }()),
      mu_head_(make_dense_plan(genome, vision_layout()[4])),
      log_sigma_head_(make_dense_plan(genome, vision_layout()[5])),
      lstm_(make_lstm_plan(genome, memory_layout()[0])),
      mdn_head_(make_dense_plan(genome, memory_layout()[1])),
      controller_(make_dense_plan(genome, controller_layout()[0])),
      conv_out_(4),
      mdn_raw_(kMdnHeadDim) {
  if (genome.params.size() != genome_param_count())
    throw ConfigError("genome length mismatch");
}

LatentCode Policy::encode(const nn::Tensor3& frame, RngStream* sample_rng) {
  if (frame.height != kFrameDim || frame.width != kFrameDim ||
      frame.channels != kFrameChannels)
    throw ConfigError("encoder expects a 64x64x3 frame");
  const nn::Tensor3* in = &frame;
  for (int i = 0; i < 4; ++i) {
    convs_[i].forward(*in, conv_out_[i]);
    in = &conv_out_[i];
  }
  LatentCode out;
  out.mode = mode_;
  std::span<const float> flat(in->data);
  mu_head_.forward(flat, out.z);
  switch (mode_) {
    case LatentMode::kContinuous:
      break;
    case LatentMode::kDiscrete:
      for (float& v : out.z) v = v > 0.0f ? 1.0f : 0.0f;
      break;
    case LatentMode::kSampled: {
      if (sample_rng == nullptr)
        throw UsageError("sampled latent mode needs an RNG stream");
      std::array<float, kLatentDim> log_sigma;
      log_sigma_head_.forward(flat, log_sigma);
      for (int i = 0; i < kLatentDim; ++i)
        out.z[i] += std::exp(log_sigma[i]) *
                    static_cast<float>(sample_rng->normal());
      break;
    }
  }
  return out;
}

MdnOutput Policy::memory_step(const LatentCode& z, const Action& prev_action,
                              MemoryState& state) {
  float input[kMemoryInputDim];
  for (int i = 0; i < kLatentDim; ++i) input[i] = z.z[i];
  input[kLatentDim] = prev_action.steer;
  input[kLatentDim + 1] = prev_action.gas;
  input[kLatentDim + 2] = prev_action.brake;
  lstm_.step(input, state.h, state.c);
  mdn_head_.forward(state.h, mdn_raw_);
  MdnOutput out;
  const float* p = mdn_raw_.data();
  for (int i = 0; i < kMixtureCount; ++i) out.mixture_logits[i] = *p++;
  for (auto& v : out.means) v = *p++;
  for (auto& v : out.log_sigmas) v = *p++;
  out.reward_pred = *p++;
  out.done_pred = *p++;
  return out;
}

Action Policy::act(const LatentCode& z, const MemoryState& state) {
  float input[kControllerInputDim];
  for (int i = 0; i < kLatentDim; ++i) input[i] = z.z[i];
  for (int i = 0; i < kHiddenDim; ++i) input[kLatentDim + i] = state.h[i];
  float raw[kActionDim];
  controller_.forward(input, raw);
  Action a;
  a.steer = std::tanh(raw[0]);
  a.gas = 1.0f / (1.0f + std::exp(-raw[1]));
  a.brake = 1.0f / (1.0f + std::exp(-raw[2]));
  return a;
}

Action Policy::step(const nn::Tensor3& frame, const Action& prev_action,
                    MemoryState& state, StepExtras* extras,
                    RngStream* sample_rng) {
  LatentCode z = encode(frame, sample_rng);
  MdnOutput mdn = memory_step(z, prev_action, state);
  Action a = act(z, state);
  if (extras != nullptr) {
    extras->z = z;
    extras->mdn = std::move(mdn);
  }
  return a;
}

LatentCode encode(const nn::Tensor3& frame, const Genome& genome,
                  LatentMode mode, RngStream* sample_rng) {
  return Policy(genome, mode).encode(frame, sample_rng);
}

std::pair<MemoryState, MdnOutput> memory_step(const LatentCode& z,
                                              const Action& prev_action,
                                              const MemoryState& state,
                                              const Genome& genome) {
  Policy p(genome, z.mode);
  MemoryState next = state;
  MdnOutput mdn = p.memory_step(z, prev_action, next);
  return {std::move(next), std::move(mdn)};
}

Action act(const LatentCode& z, const MemoryState& state,
           const Genome& genome) {
  return Policy(genome, z.mode).act(z, state);
}

}  // namespace evorace::agent
