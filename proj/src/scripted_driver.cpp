#include "evorace/scripted_driver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace evorace::track {

namespace {

double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

// Curvature of the circumcircle through three consecutive samples.
double curvature_at(const TrackSpec& track, int i) {
  const int n = track.tile_count();
  const Vec2& a = track.centerline[(i + n - 1) % n];
  const Vec2& b = track.centerline[i % n];
  const Vec2& c = track.centerline[(i + 1) % n];
  const Vec2 ab = b - a, bc = c - b, ac = c - a;
  const double denom = ab.norm() * bc.norm() * ac.norm();
  if (denom < 1e-9) return 0.0;
  return 2.0 * std::abs(ab.cross(bc)) / denom;
}

}  // namespace

agent::Action centerline_driver_action(const EnvState& state,
                                       const EnvParams& params) {
  const TrackSpec& track = state.track;
  const int n = track.tile_count();
  const CarState& car = state.car;

  int nearest = 0;
  double best = std::numeric_limits<double>::max();
  for (int i = 0; i < n; ++i) {
    const Vec2 d = track.centerline[i] - car.position;
    const double dist = d.dot(d);
    if (dist < best) {
      best = dist;
      nearest = i;
    }
  }

  // Pure pursuit on a speed-scaled lookahead point.
  const double lookahead_m = clamp(0.7 * car.speed, 6.0, 24.0);
  const int ahead =
      nearest + std::max(1, static_cast<int>(lookahead_m / params.tile_spacing));
  const Vec2 target = track.centerline[ahead % n];
  const Vec2 to_target = target - car.position;
  const double dist = std::max(to_target.norm(), 1e-6);
  const Vec2 fwd{std::cos(car.heading), std::sin(car.heading)};
  const double alpha = std::atan2(fwd.cross(to_target), fwd.dot(to_target));
  const double desired_curvature = 2.0 * std::sin(alpha) / dist;

  // heading rate = steer * gain * min(v, cap), so undo that relation.
  const double authority =
      params.steer_gain * std::min(std::max(car.speed, 1.0), params.steer_speed_cap);
  const double steer =
      clamp(desired_curvature * std::max(car.speed, 1.0) / authority, -1.0, 1.0);

  // Speed target: the tightest curve we must be ready for within the
  // braking horizon bounds the feasible speed.
  const double v_top = 0.95 * params.accel / params.drag;
  const double horizon_m =
      10.0 + car.speed * car.speed / (2.0 * 0.6 * params.brake_decel);
  const int horizon_samples =
      std::max(2, static_cast<int>(horizon_m / params.tile_spacing));
  double max_curvature = 1e-6;
  for (int j = 1; j <= horizon_samples; ++j)
    max_curvature = std::max(max_curvature, curvature_at(track, nearest + j));
  // Above the steering speed cap the achievable curvature falls as 1/v.
  const double v_curve =
      0.85 * params.steer_gain * params.steer_speed_cap / max_curvature;
  const double target_speed = std::min(v_top, std::max(v_curve, 6.0));

  agent::Action action;
  action.steer = static_cast<float>(steer);
  if (car.speed < target_speed - 1.0) {
    action.gas = 1.0f;
  } else if (car.speed > target_speed + 1.0) {
    action.brake =
        static_cast<float>(clamp((car.speed - target_speed) * 0.25, 0.1, 1.0));
  } else {
    // hold: throttle that balances drag at the current speed
    action.gas =
        static_cast<float>(clamp(params.drag * car.speed / params.accel, 0.0, 1.0));
  }
  return action;
}

}  // namespace evorace::track
