#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "evorace/agent.hpp"
#include "evorace/errors.hpp"
#include "evorace/nn.hpp"
#include "evorace/rng.hpp"
#include "evorace/track.hpp"

using namespace evorace;
using agent::Genome;

TEST_CASE("table of parameter counts") {
  CHECK(agent::vision_param_count() == 755744);
  CHECK(agent::memory_param_count() == 384071);
  CHECK(agent::controller_param_count() == 867);
  CHECK(agent::genome_param_count() == 1140682);
  CHECK(agent::decoder_param_count() == 3592803);
  CHECK(agent::vae_param_count() == 4348547);
}

TEST_CASE("genome partition tiles the flat vector") {
  const auto& part = agent::genome_partition();
  CHECK(part.vision.offset == 0);
  CHECK(part.memory.offset == part.vision.end());
  CHECK(part.controller.offset == part.memory.end());
  CHECK(part.controller.end() == agent::genome_param_count());

  // layer blocks tile each component slice with no gaps or overlaps
  for (const auto* layout :
       {&agent::vision_layout(), &agent::memory_layout(),
        &agent::controller_layout()}) {
    std::size_t at = layout->front().whole.offset;
    for (const auto& l : *layout) {
      CHECK(l.whole.offset == at);
      at = l.whole.end();
    }
  }
  CHECK(agent::vision_layout().front().whole.offset == 0);
  CHECK(agent::memory_layout().front().whole.offset == part.memory.offset);
  CHECK(agent::controller_layout().back().whole.end() ==
        agent::genome_param_count());
}

TEST_CASE("initialization respects per-layer He bounds") {
  const Genome g = agent::init_genome(1234);

  // conv1: fan_in = 3 * 4 * 4 = 48
  const auto& conv1 = agent::vision_layout()[0];
  const double bound1 = std::sqrt(1.0 / 48.0);
  double max_abs = 0.0;
  for (std::size_t i = conv1.whole.offset; i < conv1.whole.end(); ++i)
    max_abs = std::max(max_abs, std::abs(static_cast<double>(g.params[i])));
  CHECK(max_abs <= bound1);
  CHECK(max_abs > 0.9 * bound1);  // the bound is actually approached

  // controller: fan_in = 288
  const double bound_c = std::sqrt(1.0 / 288.0);
  double max_c = 0.0, sum_c = 0.0;
  for (float v : g.controller()) {
    max_c = std::max(max_c, std::abs(static_cast<double>(v)));
    sum_c += v;
  }
  CHECK(max_c <= bound_c);
  CHECK(std::abs(sum_c / 867.0) < bound_c / 5.0);  // roughly centered

  // LSTM hidden-to-hidden block: fan_in = 256
  const auto& lstm = agent::memory_layout()[0];
  const double bound_hh = std::sqrt(1.0 / 256.0);
  double max_hh = 0.0;
  const auto whh = lstm.blocks[1];
  for (std::size_t i = whh.offset; i < whh.end(); ++i)
    max_hh = std::max(max_hh, std::abs(static_cast<double>(g.params[i])));
  CHECK(max_hh <= bound_hh);
}

TEST_CASE("initialization is deterministic in the seed") {
  const Genome a = agent::init_genome(77);
  const Genome b = agent::init_genome(77);
  const Genome c = agent::init_genome(78);
  CHECK(a.params == b.params);
  CHECK(a.params != c.params);
}

TEST_CASE("zero vision slice encodes the zero frame to zero") {
  Genome g;  // all zeros
  nn::Tensor3 frame(64, 64, 3);
  const auto z = agent::encode(frame, g, agent::LatentMode::kContinuous);
  for (float v : z.z) CHECK(v == 0.0f);
}

TEST_CASE("discrete mode produces only binary latents") {
  const Genome g = agent::init_genome(5);
  track::Env env;
  const track::Frame frame = env.reset(3);
  const auto z = agent::encode(frame, g, agent::LatentMode::kDiscrete);
  for (float v : z.z) CHECK((v == 0.0f || v == 1.0f));
}

TEST_CASE("encoder rejects wrong frame shapes") {
  const Genome g;
  nn::Tensor3 bad(32, 64, 3);
  CHECK_THROWS_AS(agent::encode(bad, g, agent::LatentMode::kContinuous),
                  ConfigError);
}

TEST_CASE("zero genome memory step: zero state, uniform mixture") {
  const Genome g;
  agent::LatentCode z;  // zero latent
  const agent::MemoryState state;
  const auto [next, mdn] = agent::memory_step(z, agent::Action{}, state, g);
  for (float v : next.h) CHECK(v == 0.0f);
  for (float v : next.c) CHECK(v == 0.0f);
  CHECK(mdn.reward_pred == 0.0f);
  CHECK(mdn.done_pred == 0.0f);
  const auto weights = mdn.mixture_weights();
  for (float w : weights) CHECK(w == doctest::Approx(0.2f));
}

TEST_CASE("memory state stays strictly inside (-1, 1)") {
  const Genome g = agent::init_genome(11);
  agent::Policy policy(g, agent::LatentMode::kContinuous);
  track::Env env;
  env.reset(4);
  agent::MemoryState state;
  agent::Action prev;
  for (int t = 0; t < 30; ++t) {
    const auto frame = env.render();
    prev = policy.step(frame, prev, state);
    for (float v : state.h) {
      CHECK(v > -1.0f);
      CHECK(v < 1.0f);
    }
    env.step(prev);
  }
}

TEST_CASE("controller squashing: zero slice gives the neutral action") {
  const Genome g;
  agent::LatentCode z;
  agent::MemoryState state;
  const auto a = agent::act(z, state, g);
  CHECK(a.steer == 0.0f);
  CHECK(a.gas == 0.5f);
  CHECK(a.brake == 0.5f);
}

TEST_CASE("controller squashing hand case: raw (2, -1, 0)") {
  Genome g;
  // bias-only controller: W = 0, b = (2, -1, 0)
  const auto& layout = agent::controller_layout()[0];
  g.params[layout.blocks[1].offset + 0] = 2.0f;
  g.params[layout.blocks[1].offset + 1] = -1.0f;
  g.params[layout.blocks[1].offset + 2] = 0.0f;
  agent::LatentCode z;
  agent::MemoryState state;
  const auto a = agent::act(z, state, g);
  CHECK(a.steer == doctest::Approx(0.9640276f));
  CHECK(a.gas == doctest::Approx(0.2689414f));
  CHECK(a.brake == 0.5f);
}

TEST_CASE("actions always stay inside their declared ranges") {
  RngStream rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const Genome g = agent::init_genome(rng.next_u64());
    agent::Policy policy(g, agent::LatentMode::kContinuous);
    agent::LatentCode z;
    for (float& v : z.z) v = static_cast<float>(rng.uniform(-50.0, 50.0));
    agent::MemoryState state;
    for (float& v : state.h) v = static_cast<float>(rng.uniform(-0.99, 0.99));
    const auto a = policy.act(z, state);
    CHECK(a.steer >= -1.0f);
    CHECK(a.steer <= 1.0f);
    CHECK(a.gas >= 0.0f);
    CHECK(a.gas <= 1.0f);
    CHECK(a.brake >= 0.0f);
    CHECK(a.brake <= 1.0f);
  }
}

TEST_CASE("policy and single-shot operations agree bit-exactly") {
  const Genome g = agent::init_genome(31);
  track::Env env;
  const track::Frame frame = env.reset(9);

  agent::Policy policy(g, agent::LatentMode::kContinuous);
  const auto z_fast = policy.encode(frame);
  const auto z_ref = agent::encode(frame, g, agent::LatentMode::kContinuous);
  for (int i = 0; i < agent::kLatentDim; ++i) CHECK(z_fast.z[i] == z_ref.z[i]);

  agent::MemoryState s_fast;
  const auto mdn_fast = policy.memory_step(z_fast, agent::Action{}, s_fast);
  const auto [s_ref, mdn_ref] =
      agent::memory_step(z_ref, agent::Action{}, agent::MemoryState{}, g);
  CHECK(s_fast.h == s_ref.h);
  CHECK(s_fast.c == s_ref.c);
  CHECK(mdn_fast.mixture_logits == mdn_ref.mixture_logits);

  const auto a_fast = policy.act(z_fast, s_fast);
  const auto a_ref = agent::act(z_ref, s_ref, g);
  CHECK(a_fast.steer == a_ref.steer);
  CHECK(a_fast.gas == a_ref.gas);
  CHECK(a_fast.brake == a_ref.brake);
}

TEST_CASE("sampled latent mode perturbs the mean prediction") {
  const Genome g = agent::init_genome(41);
  track::Env env;
  const track::Frame frame = env.reset(12);
  agent::Policy policy(g, agent::LatentMode::kSampled);
  RngStream rng(1);
  const auto z1 = policy.encode(frame, &rng);
  const auto z2 = policy.encode(frame, &rng);
  bool any_diff = false;
  for (int i = 0; i < agent::kLatentDim; ++i)
    if (z1.z[i] != z2.z[i]) any_diff = true;
  CHECK(any_diff);
  CHECK_THROWS_AS(policy.encode(frame, nullptr), UsageError);
}

TEST_CASE("genome files round-trip bit-exactly") {
  const Genome g = agent::init_genome(55);
  const auto path = std::filesystem::temp_directory_path() / "evorace_t.evg";
  agent::save_genome(path.string(), g);
  const Genome loaded = agent::load_genome(path.string());
  CHECK(loaded.params == g.params);
  std::filesystem::remove(path);
}

TEST_CASE("genome loader rejects foreign and corrupt files") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = (dir / "evorace_bad.evg").string();
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    const char junk[32] = "definitely not a genome";
    std::fwrite(junk, 1, sizeof junk, f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(agent::load_genome(path), IoError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(agent::load_genome((dir / "missing.evg").string()), IoError);
}
