#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evorace/nn.hpp"
#include "evorace/rng.hpp"

namespace evorace::agent {

// Fixed agent geometry. The evolved genome is the concatenation of the
// vision, memory, and controller parameter blocks in that order.
inline constexpr int kFrameDim = 64;
inline constexpr int kFrameChannels = 3;
inline constexpr int kLatentDim = 32;
inline constexpr int kHiddenDim = 256;
inline constexpr int kActionDim = 3;
inline constexpr int kMixtureCount = 5;
inline constexpr int kMemoryInputDim = kLatentDim + kActionDim;        // 35
inline constexpr int kControllerInputDim = kLatentDim + kHiddenDim;    // 288
// mixture logits + means + log sigmas + reward + done predictions
inline constexpr int kMdnHeadDim =
    kMixtureCount + 2 * kMixtureCount * kLatentDim + 2;                // 327

struct Architecture {
  std::vector<nn::LayerSpec> encoder_convs;  // 4 layers, ReLU, k=4, s=2
  nn::LayerSpec mu_head;                     // 1024 -> 32, identity
  nn::LayerSpec log_sigma_head;              // 1024 -> 32, identity
  nn::LayerSpec lstm;                        // 35 -> 256
  nn::LayerSpec mdn_head;                    // 256 -> 327, identity
  nn::LayerSpec controller;                  // 288 -> 3, identity (squashed later)
  std::vector<nn::LayerSpec> decoder;        // static definition, never evaluated
};

const Architecture& architecture();

// Flat-vector layouts. Vision covers the four convs plus both dense heads;
// memory covers the LSTM plus the MDN head; controller is one dense layer.
const std::vector<nn::LayerLayout>& vision_layout();
const std::vector<nn::LayerLayout>& memory_layout();
const std::vector<nn::LayerLayout>& controller_layout();

std::size_t vision_param_count();      // 755,744
std::size_t memory_param_count();      // 384,071
std::size_t controller_param_count();  // 867
std::size_t genome_param_count();      // 1,140,682
std::size_t decoder_param_count();     // 3,592,803
std::size_t vae_param_count();         // 4,348,547

struct GenomePartition {
  nn::ParamSlice vision;
  nn::ParamSlice memory;
  nn::ParamSlice controller;
};
const GenomePartition& genome_partition();

// Stable fingerprint of the architecture (layer table hash); embedded in
// genome and checkpoint headers so files from a different build of the
// network cannot be loaded by accident.
std::uint64_t architecture_hash();
std::string architecture_table();  // human-readable per-layer listing

// The unit of evolution: every parameter of the agent in one flat vector.
struct Genome {
  std::vector<float> params;

  Genome() : params(genome_param_count(), 0.0f) {}

  std::span<float> slice(const nn::ParamSlice& s) {
    return std::span<float>(params).subspan(s.offset, s.length);
  }
  std::span<const float> slice(const nn::ParamSlice& s) const {
    return std::span<const float>(params).subspan(s.offset, s.length);
  }
  std::span<const float> vision() const { return slice(genome_partition().vision); }
  std::span<const float> memory() const { return slice(genome_partition().memory); }
  std::span<const float> controller() const {
    return slice(genome_partition().controller);
  }
};

// He-uniform initialization: every weight and bias of a layer is drawn
// i.i.d. from U(-b, b) with b = sqrt(1 / fan_in), where fan_in is the input
// width of the owning matrix (in_ch * k^2 for convs). Deterministic in seed.
Genome init_genome(std::uint64_t seed);

enum class LatentMode { kContinuous, kDiscrete, kSampled };

struct LatentCode {
  std::array<float, kLatentDim> z{};
  LatentMode mode = LatentMode::kContinuous;
};

struct MemoryState {
  std::vector<float> h = std::vector<float>(kHiddenDim, 0.0f);
  std::vector<float> c = std::vector<float>(kHiddenDim, 0.0f);
};

struct Action {
  float steer = 0.0f;  // [-1, 1]
  float gas = 0.0f;    // [0, 1]
  float brake = 0.0f;  // [0, 1]
};

// Mixture-of-Gaussians head over the next latent, plus reward/done scalars.
// Populated on every memory step; the controller only consumes h, so these
// evolve as free-riding structure exactly like the underlying weights.
struct MdnOutput {
  std::array<float, kMixtureCount> mixture_logits{};
  std::array<float, kMixtureCount * kLatentDim> means{};       // [mix][latent]
  std::array<float, kMixtureCount * kLatentDim> log_sigmas{};  // [mix][latent]
  float reward_pred = 0.0f;
  float done_pred = 0.0f;

  std::array<float, kMixtureCount> mixture_weights() const;  // softmax
};

// Packed forward pass over one genome. Construction repacks all weights
// once; per-step evaluation then touches only contiguous memory. A Policy
// instance is owned by a single rollout (internal scratch buffers), but any
// number of Policies may share one genome concurrently.
class Policy {
 public:
  Policy(const Genome& genome, LatentMode mode);

  LatentCode encode(const nn::Tensor3& frame, RngStream* sample_rng = nullptr);
  MdnOutput memory_step(const LatentCode& z, const Action& prev_action,
                        MemoryState& state);
  Action act(const LatentCode& z, const MemoryState& state);

  // Full timestep in dataflow order: z_t = encode(frame_t);
  // h_t from memory_step(z_t, a_{t-1}); a_t = act(z_t, h_t).
  struct StepExtras {
    LatentCode z;
    MdnOutput mdn;
  };
  Action step(const nn::Tensor3& frame, const Action& prev_action,
              MemoryState& state, StepExtras* extras = nullptr,
              RngStream* sample_rng = nullptr);

  LatentMode mode() const { return mode_; }

 private:
  LatentMode mode_;
  std::vector<nn::ConvPlan> convs_;
  nn::DensePlan mu_head_;
  nn::DensePlan log_sigma_head_;
  nn::LstmPlan lstm_;
  nn::DensePlan mdn_head_;
  nn::DensePlan controller_;
  // scratch
  std::vector<nn::Tensor3> conv_out_;
  std::vector<float> mdn_raw_;
};

// Single-shot forms of the per-timestep operations (each builds the packed
// plans internally; use Policy in loops).
LatentCode encode(const nn::Tensor3& frame, const Genome& genome,
                  LatentMode mode, RngStream* sample_rng = nullptr);
std::pair<MemoryState, MdnOutput> memory_step(const LatentCode& z,
                                              const Action& prev_action,
                                              const MemoryState& state,
                                              const Genome& genome);
Action act(const LatentCode& z, const MemoryState& state,
           const Genome& genome);

// Versioned genome file: header (magic, version, architecture hash, slice
// lengths) followed by the raw little-endian float32 parameters in
// partition order. Round-trips bit-exactly.
void save_genome(const std::string& path, const Genome& genome);
Genome load_genome(const std::string& path);

}  // namespace evorace::agent
