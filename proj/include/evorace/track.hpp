#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "evorace/agent.hpp"
#include "evorace/nn.hpp"

namespace evorace::track {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const;
  Vec2 normalized() const;
};

// All tunables of the environment: track generation, car physics, and the
// camera. Defaults are calibrated so the scripted centerline driver laps a
// median track in roughly 350-600 frames.
struct EnvParams {
  // track generation
  int checkpoints = 12;
  double field_radius = 70.0;      // checkpoint placement radius, meters
  double radius_jitter_min = 0.55; // checkpoint radius in [min,1]*field_radius
  double tile_spacing = 1.28;      // arc length per tile, meters
  double track_width = 12.0;       // full road width, meters
  int generation_attempts = 20;

  // Car physics: kinematic bicycle with linear drag. The balance matters
  // for trainability: a mid-throttle, mid-brake policy (every squashed
  // network starts near gas = brake = 0.5) must still creep fast enough
  // that collecting tiles beats standing still.
  double dt = 0.05;                 // seconds per frame
  double accel = 34.0;              // full-throttle acceleration, m/s^2
  double brake_decel = 6.0;         // full-brake deceleration, m/s^2
  double drag = 1.62;               // linear drag coefficient, 1/s
  double offroad_drag_mult = 1.8;   // drag multiplier off the road
  double steer_gain = 0.18;         // curvature at full lock, rad/m
  double steer_speed_cap = 14.0;    // m/s; steering authority stops growing here
  double playfield_bound = 88.0;    // |x| or |y| beyond this ends the episode
  int frame_cap = 1000;

  // camera
  double view_span = 48.0;  // meters covered by the 64-pixel frame
  double car_half_width = 1.1;
  double car_half_length = 2.2;
};

struct Tile {
  std::array<Vec2, 4> corners;  // CCW quad; edge 3-0 is shared with tile i-1
  bool contains(const Vec2& p) const;
  double area() const;
};

struct TrackSpec {
  std::vector<Vec2> control_points;  // jittered checkpoints
  std::vector<Vec2> centerline;      // N samples; closes back to [0]
  std::vector<Tile> tiles;           // N quads, tile i spans samples i..i+1
  double track_width = 0.0;
  int tile_count() const { return static_cast<int>(tiles.size()); }
  double total_length() const;
};

// Deterministic procedural track: 12 checkpoints at uniformly spaced angles
// with radius jittered in [0.55, 1.0] * field_radius, smoothed into a closed
// centripetal Catmull-Rom loop and resampled at fixed arc-length spacing.
// Rejects self-intersecting or degenerate layouts and retries with a derived
// seed; throws GenerationError after `attempts` failures.
TrackSpec generate_track(std::uint64_t seed, const EnvParams& params);

struct CarState {
  Vec2 position;
  double heading = 0.0;  // radians in [-pi, pi); 0 points along +x
  double speed = 0.0;    // m/s, never negative
  bool on_track = true;
};

enum class DoneReason { kNone, kCompleted, kFrameCap, kOffField };

struct EnvState {
  TrackSpec track;
  CarState car;
  int frame_index = 0;
  int tiles_visited = 0;
  bool done = false;
  DoneReason done_reason = DoneReason::kNone;
  std::vector<std::uint8_t> visited;
  // The starting tile is marked visited at reset; its reward credit is
  // granted on the first step.
  int pending_credit = 0;
};

using Frame = nn::Tensor3;  // 64x64x3, values in [0, 1]

// Uniform spatial hash over tile quads; answers point -> tile index queries
// for physics, tile visits, and the rasterizer.
class TileIndex {
 public:
  TileIndex() = default;
  TileIndex(const TrackSpec& track, double bound);
  // Returns the tile containing p, or -1.
  int lookup(const TrackSpec& track, const Vec2& p) const;

 private:
  double origin_ = 0.0;
  double cell_size_ = 4.0;
  int cells_per_side_ = 0;
  std::vector<std::vector<std::int32_t>> cells_;
};

struct StepResult {
  double reward = 0.0;
  int new_tiles = 0;  // tiles credited this step (includes the start credit)
  bool done = false;
};

class Env {
 public:
  explicit Env(const EnvParams& params = {});

  // Fresh procedural track; car on tile 0 facing along the centerline.
  Frame reset(std::uint64_t seed);
  // Same, on a caller-supplied track.
  Frame reset_with_track(TrackSpec track);

  StepResult step(const agent::Action& action);
  Frame render() const;

  const EnvState& state() const { return state_; }
  EnvState& mutable_state() { return state_; }  // test hook
  const EnvParams& params() const { return params_; }

 private:
  Frame start_episode();
  void mark_visit_path(const Vec2& from, const Vec2& to, int* newly);

  EnvParams params_;
  EnvState state_;
  TileIndex index_;
};

}  // namespace evorace::track
