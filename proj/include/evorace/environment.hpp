#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "evorace/agent.hpp"
#include "evorace/track.hpp"

namespace evorace {

// Episode-oriented environment surface the rollout loop drives. The native
// track environment implements it directly; ExternalEnvironment bridges to a
// child process speaking the JSON-lines protocol documented in the README.
class Environment {
 public:
  struct StepOutcome {
    double reward = 0.0;
    bool new_tile = false;  // progress marker feeding early termination
    bool done = false;
  };

  virtual ~Environment() = default;

  // Starts an episode; returns the tile count N (or -1 when unknown).
  // The first observation is available via observation() afterwards.
  virtual int reset(std::uint64_t seed) = 0;
  virtual StepOutcome step(const agent::Action& action) = 0;
  virtual const track::Frame& observation() const = 0;

  // Extended state, available on the native environment only.
  virtual bool has_state() const { return false; }
  virtual track::Vec2 car_position() const { return {}; }
  virtual int tiles_visited() const { return -1; }
  virtual double frame_reward_rate() const { return -0.1; }
};

class NativeEnvironment final : public Environment {
 public:
  explicit NativeEnvironment(const track::EnvParams& params)
      : env_(params) {}

  int reset(std::uint64_t seed) override {
    frame_ = env_.reset(seed);
    return env_.state().track.tile_count();
  }

  StepOutcome step(const agent::Action& action) override {
    const track::StepResult r = env_.step(action);
    if (!r.done) frame_ = env_.render();
    return {r.reward, r.new_tiles > 0, r.done};
  }

  const track::Frame& observation() const override { return frame_; }

  bool has_state() const override { return true; }
  track::Vec2 car_position() const override {
    return env_.state().car.position;
  }
  int tiles_visited() const override { return env_.state().tiles_visited; }

  track::Env& env() { return env_; }

 private:
  track::Env env_;
  track::Frame frame_;
};

// Drives a child process over stdin/stdout, one JSON object per line:
//   -> {"cmd":"reset","seed":S}
//   <- {"obs":"<base64 f32le 64*64*3>","n_tiles":N}
//   -> {"cmd":"step","action":[steer,gas,brake]}
//   <- {"obs":"...","reward":r,"done":false}
// New-tile progress is inferred from the per-step reward exceeding the
// constant frame penalty.
class ExternalEnvironment final : public Environment {
 public:
  explicit ExternalEnvironment(const std::string& command);
  ~ExternalEnvironment() override;

  ExternalEnvironment(const ExternalEnvironment&) = delete;
  ExternalEnvironment& operator=(const ExternalEnvironment&) = delete;

  int reset(std::uint64_t seed) override;
  StepOutcome step(const agent::Action& action) override;
  const track::Frame& observation() const override { return frame_; }

 private:
  std::string exchange(const std::string& request);

  int child_pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string read_buffer_;
  track::Frame frame_;
};

}  // namespace evorace
