#include <doctest.h>

#include <cmath>
#include <set>

#include "evorace/errors.hpp"
#include "evorace/rng.hpp"
#include "evorace/scripted_driver.hpp"
#include "evorace/track.hpp"

using namespace evorace;
using track::EnvParams;
using track::TrackSpec;
using track::Vec2;

namespace {

bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c,
                    const Vec2& d) {
  auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    const double v = (q - p).cross(r - p);
    return v > 0 ? 1 : (v < 0 ? -1 : 0);
  };
  return orient(a, b, c) != orient(a, b, d) &&
         orient(c, d, a) != orient(c, d, b);
}

// Small synthetic ring track, for tests needing exact tile counts.
TrackSpec make_ring_track(int n, double radius, double width) {
  TrackSpec spec;
  spec.track_width = width;
  for (int i = 0; i <= n; ++i) {
    const double a = 2.0 * 3.14159265358979323846 * (i % n) / n;
    spec.centerline.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  std::vector<Vec2> left(n + 1), right(n + 1);
  for (int i = 0; i < n; ++i) {
    const Vec2 prev = spec.centerline[(i + n - 1) % n];
    const Vec2 next = spec.centerline[(i + 1) % n];
    const Vec2 d = (next - prev).normalized();
    const Vec2 normal{-d.y, d.x};
    left[i] = spec.centerline[i] + normal * (width / 2);
    right[i] = spec.centerline[i] - normal * (width / 2);
  }
  left[n] = left[0];
  right[n] = right[0];
  for (int i = 0; i < n; ++i)
    spec.tiles.push_back({{right[i], right[i + 1], left[i + 1], left[i]}});
  return spec;
}

}  // namespace

TEST_CASE("track generation is deterministic in the seed") {
  const EnvParams params;
  const TrackSpec a = track::generate_track(0, params);
  const TrackSpec b = track::generate_track(0, params);
  REQUIRE(a.tile_count() == b.tile_count());
  for (int i = 0; i <= a.tile_count(); ++i) {
    CHECK(a.centerline[i].x == b.centerline[i].x);
    CHECK(a.centerline[i].y == b.centerline[i].y);
  }
}

TEST_CASE("property sweep over many seeds") {
  const EnvParams params;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const TrackSpec t = track::generate_track(seed, params);
    const int n = t.tile_count();
    REQUIRE(n >= 100);
    // closed loop, bit-exact
    CHECK(t.centerline.front().x == t.centerline.back().x);
    CHECK(t.centerline.front().y == t.centerline.back().y);
    // positive tile areas, shared edges
    for (int i = 0; i < n; ++i) {
      CHECK(t.tiles[i].area() > 0.0);
      const auto& cur = t.tiles[i].corners;
      const auto& next = t.tiles[(i + 1) % n].corners;
      CHECK(cur[1].x == next[0].x);
      CHECK(cur[1].y == next[0].y);
      CHECK(cur[2].x == next[3].x);
      CHECK(cur[2].y == next[3].y);
    }
  }
}

TEST_CASE("centerlines are simple closed curves (dense spot check)") {
  const EnvParams params;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const TrackSpec t = track::generate_track(seed, params);
    const int n = t.tile_count();
    for (int i = 0; i < n; ++i)
      for (int j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        CHECK_FALSE(segments_cross(t.centerline[i], t.centerline[i + 1],
                                   t.centerline[j], t.centerline[j + 1]));
      }
  }
}

TEST_CASE("generation failure surfaces instead of silently reusing tracks") {
  EnvParams params;
  params.generation_attempts = 0;
  CHECK_THROWS_AS(track::generate_track(0, params), GenerationError);
}

TEST_CASE("reset state: start tile visited, no reward emitted") {
  track::Env env;
  env.reset(0);
  const auto& s = env.state();
  CHECK(s.frame_index == 0);
  CHECK(s.tiles_visited == 1);
  CHECK(s.visited[0] == 1);
  CHECK_FALSE(s.done);
  CHECK(s.car.speed == 0.0);
  // car sits inside tile 0
  CHECK(s.track.tiles[0].contains(s.car.position));
  // facing along the centerline
  const Vec2 d =
      (s.track.centerline[1] - s.track.centerline[0]).normalized();
  CHECK(std::cos(s.car.heading) == doctest::Approx(d.x).epsilon(1e-9));
  CHECK(std::sin(s.car.heading) == doctest::Approx(d.y).epsilon(1e-9));
}

TEST_CASE("reset is deterministic") {
  track::Env a, b;
  const auto fa = a.reset(42);
  const auto fb = b.reset(42);
  CHECK(fa.data == fb.data);
  CHECK(a.state().car.position.x == b.state().car.position.x);
}

TEST_CASE("first step credits the start tile; later idle steps cost 0.1") {
  track::Env env;
  env.reset(1);
  const int n = env.state().track.tile_count();
  const auto first = env.step(agent::Action{0, 0, 0});
  CHECK(first.new_tiles == 1);
  CHECK(first.reward == doctest::Approx(-0.1 + 100.0 / n));
  const auto second = env.step(agent::Action{0, 0, 0});
  CHECK(second.new_tiles == 0);
  CHECK(second.reward == -0.1);  // exact: -0.1 + (100/N) * 0
}

TEST_CASE("a stationary car never visits new tiles after the start") {
  track::Env env;
  env.reset(2);
  for (int t = 0; t < 200; ++t) env.step(agent::Action{0, 0, 0});
  CHECK(env.state().tiles_visited == 1);
  CHECK(env.state().car.speed == 0.0);
}

TEST_CASE("multi-tile step on a synthetic 50-tile ring") {
  track::EnvParams params;
  track::Env env(params);
  env.reset_with_track(make_ring_track(50, 40.0, 10.0));
  REQUIRE(env.state().track.tile_count() == 50);
  // consume the start credit
  env.step(agent::Action{0, 0, 0});
  // teleport-grade speed: cover ~3 tiles (centerline spacing ~5m) this step
  env.mutable_state().car.speed = 15.1 / params.dt;
  const auto out = env.step(agent::Action{0, 0, 0});
  CHECK(out.new_tiles == 3);
  CHECK(out.reward == doctest::Approx(-0.1 + 3 * 2.0));
}

TEST_CASE("off-field exit terminates the episode") {
  track::Env env;
  env.reset(3);
  auto& car = env.mutable_state().car;
  car.position = {env.params().playfield_bound - 1.0, 0.0};
  car.heading = 0.0;
  car.speed = 100.0;
  const auto out = env.step(agent::Action{0, 1, 0});
  CHECK(out.done);
  CHECK(env.state().done_reason == track::DoneReason::kOffField);
  CHECK_THROWS_AS(env.step(agent::Action{}), UsageError);
}

TEST_CASE("frame cap terminates the episode") {
  track::EnvParams params;
  params.frame_cap = 25;
  track::Env env(params);
  env.reset(4);
  track::StepResult out;
  for (int t = 0; t < 25; ++t) out = env.step(agent::Action{0, 0, 0});
  CHECK(out.done);
  CHECK(env.state().done_reason == track::DoneReason::kFrameCap);
}

TEST_CASE("physics stays finite under bang-bang inputs") {
  track::Env env;
  env.reset(5);
  RngStream rng(1);
  const double v_max_bound =
      env.params().accel / env.params().drag + 1.0;
  for (int t = 0; t < 900 && !env.state().done; ++t) {
    agent::Action a;
    a.steer = static_cast<float>(rng.uniform(-1, 1));
    a.gas = rng.below(2) ? 1.0f : 0.0f;
    a.brake = rng.below(4) == 0 ? 1.0f : 0.0f;
    env.step(a);
    const auto& car = env.state().car;
    CHECK(std::isfinite(car.position.x));
    CHECK(std::isfinite(car.position.y));
    CHECK(car.speed >= 0.0);
    CHECK(car.speed <= v_max_bound);
  }
}

TEST_CASE("rendering is deterministic with values in [0,1]") {
  track::Env env;
  env.reset(6);
  const auto f1 = env.render();
  const auto f2 = env.render();
  CHECK(f1.data == f2.data);
  REQUIRE(f1.height == 64);
  REQUIRE(f1.width == 64);
  REQUIRE(f1.channels == 3);
  for (float v : f1.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("render semantics: car pixels at center, road under the car") {
  track::Env env;
  env.reset(7);
  const auto f = env.render();
  // the car rectangle is red
  CHECK(f.at(32, 32, 0) == doctest::Approx(0.80f));
  CHECK(f.at(32, 32, 1) == doctest::Approx(0.08f));
  // just left/right of the car: road gray (the car starts mid-tile,
  // +-4.1m lateral is well inside the 6m half-width)
  for (int col : {26, 37}) {
    CHECK(f.at(32, col, 0) == doctest::Approx(0.42f));
    CHECK(f.at(32, col, 1) == doctest::Approx(0.42f));
    CHECK(f.at(32, col, 2) == doctest::Approx(0.42f));
  }
  // both materials are visible in the frame
  int road = 0, grass = 0;
  for (int row = 0; row < 64; ++row)
    for (int col = 0; col < 64; ++col) {
      if (f.at(row, col, 1) > f.at(row, col, 0) + 0.1f) ++grass;
      if (std::abs(f.at(row, col, 0) - 0.42f) < 1e-6f) ++road;
    }
  CHECK(road > 300);
  CHECK(grass > 300);
}

TEST_CASE("visited state does not leak into pixels") {
  track::Env env;
  env.reset(8);
  const auto before = env.render();
  auto& s = env.mutable_state();
  for (std::size_t i = 0; i < s.visited.size(); ++i) s.visited[i] = 1;
  const auto after = env.render();
  CHECK(before.data == after.data);
}

TEST_CASE("scripted driver laps every track with the exact reward identity") {
  const EnvParams params;
  for (std::uint64_t seed : {0ull, 11ull, 23ull}) {
    track::Env env(params);
    env.reset(seed);
    const int n = env.state().track.tile_count();
    double total = 0.0;
    int frames = 0;
    bool completed = false;
    for (int t = 0; t < params.frame_cap; ++t) {
      const auto action =
          track::centerline_driver_action(env.state(), params);
      const auto out = env.step(action);
      total += out.reward;
      ++frames;
      if (out.done) {
        completed =
            env.state().done_reason == track::DoneReason::kCompleted;
        break;
      }
    }
    INFO("seed ", seed, " frames ", frames, " tiles ",
         env.state().tiles_visited, "/", n);
    REQUIRE(completed);
    CHECK(frames >= 350);
    CHECK(frames <= 600);
    // all N tiles visited in T frames: cumulative reward = 100 - 0.1 T
    CHECK(total == doctest::Approx(100.0 - 0.1 * frames).epsilon(1e-9));
  }
}

TEST_CASE("reward conservation holds for partial episodes too") {
  const EnvParams params;
  track::Env env(params);
  env.reset(9);
  const int n = env.state().track.tile_count();
  double total = 0.0;
  for (int t = 0; t < 150; ++t) {
    const auto action = track::centerline_driver_action(env.state(), params);
    total += env.step(action).reward;
  }
  const double expect =
      100.0 * env.state().tiles_visited / n - 0.1 * env.state().frame_index;
  CHECK(total == doctest::Approx(expect).epsilon(1e-7));
}
