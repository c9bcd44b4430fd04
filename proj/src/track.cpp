#include "evorace/track.hpp"

#include <algorithm>
#include <cmath>

#include "evorace/errors.hpp"
#include "evorace/rng.hpp"

namespace evorace::track {

namespace {

constexpr double kPi = 3.14159265358979323846;

double wrap_angle(double a) {
  while (a >= kPi) a -= 2.0 * kPi;
  while (a < -kPi) a += 2.0 * kPi;
  return a;
}

double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

// Centripetal Catmull-Rom (Barry-Goldman form) between p1 and p2.
Vec2 catmull_rom(const Vec2& p0, const Vec2& p1, const Vec2& p2,
                 const Vec2& p3, double u) {
  auto knot = [](double t, const Vec2& a, const Vec2& b) {
    return t + std::sqrt((b - a).norm());
  };
  const double t0 = 0.0;
  const double t1 = knot(t0, p0, p1);
  const double t2 = knot(t1, p1, p2);
  const double t3 = knot(t2, p2, p3);
  const double t = t1 + u * (t2 - t1);
  auto lerp = [](const Vec2& a, const Vec2& b, double ta, double tb, double t) {
    const double w = (t - ta) / (tb - ta);
    return a * (1.0 - w) + b * w;
  };
  const Vec2 a1 = lerp(p0, p1, t0, t1, t);
  const Vec2 a2 = lerp(p1, p2, t1, t2, t);
  const Vec2 a3 = lerp(p2, p3, t2, t3, t);
  const Vec2 b1 = lerp(a1, a2, t0, t2, t);
  const Vec2 b2 = lerp(a2, a3, t1, t3, t);
  return lerp(b1, b2, t1, t2, t);
}

int orientation(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = (b - a).cross(c - a);
  if (v > 0) return 1;
  if (v < 0) return -1;
  return 0;
}

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c,
                        const Vec2& d) {
  const int o1 = orientation(a, b, c);
  const int o2 = orientation(a, b, d);
  const int o3 = orientation(c, d, a);
  const int o4 = orientation(c, d, b);
  return o1 != o2 && o3 != o4;
}

struct BuildFailure {};

TrackSpec try_generate(RngStream& rng, const EnvParams& params) {
  TrackSpec spec;
  spec.track_width = params.track_width;

  // Checkpoints on uniformly spaced rays with jittered radius.
  const int cp = params.checkpoints;
  for (int i = 0; i < cp; ++i) {
    const double angle = 2.0 * kPi * i / cp;
    const double radius =
        rng.uniform(params.radius_jitter_min, 1.0) * params.field_radius;
    spec.control_points.push_back(
        {radius * std::cos(angle), radius * std::sin(angle)});
  }

  // Dense spline sampling, then arc-length resampling into tiles.
  constexpr int kSubdiv = 100;
  std::vector<Vec2> dense;
  dense.reserve(static_cast<std::size_t>(cp) * kSubdiv);
  for (int i = 0; i < cp; ++i) {
    const Vec2& p0 = spec.control_points[(i + cp - 1) % cp];
    const Vec2& p1 = spec.control_points[i];
    const Vec2& p2 = spec.control_points[(i + 1) % cp];
    const Vec2& p3 = spec.control_points[(i + 2) % cp];
    for (int j = 0; j < kSubdiv; ++j)
      dense.push_back(catmull_rom(p0, p1, p2, p3, static_cast<double>(j) / kSubdiv));
  }
  std::vector<double> cum(dense.size() + 1, 0.0);
  for (std::size_t i = 0; i < dense.size(); ++i)
    cum[i + 1] = cum[i] + (dense[(i + 1) % dense.size()] - dense[i]).norm();
  const double total = cum.back();
  const int n = static_cast<int>(std::lround(total / params.tile_spacing));
  if (n < 100) throw BuildFailure{};

  spec.centerline.reserve(n + 1);
  std::size_t cursor = 0;
  for (int j = 0; j < n; ++j) {
    const double target = total * j / n;
    while (cursor + 1 < cum.size() - 1 && cum[cursor + 1] < target) ++cursor;
    const double seg = cum[cursor + 1] - cum[cursor];
    const double w = seg > 0.0 ? (target - cum[cursor]) / seg : 0.0;
    const Vec2& a = dense[cursor];
    const Vec2& b = dense[(cursor + 1) % dense.size()];
    spec.centerline.push_back(a * (1.0 - w) + b * w);
  }
  spec.centerline.push_back(spec.centerline.front());  // explicit closure

  // Road edges from central-difference normals; the loop runs
  // counterclockwise, so the left normal points inward.
  const double half = params.track_width * 0.5;
  std::vector<Vec2> left(n + 1), right(n + 1);
  for (int i = 0; i < n; ++i) {
    const Vec2& prev = spec.centerline[(i + n - 1) % n];
    const Vec2& next = spec.centerline[(i + 1) % n];
    const Vec2 d = (next - prev).normalized();
    const Vec2 normal{-d.y, d.x};
    left[i] = spec.centerline[i] + normal * half;
    right[i] = spec.centerline[i] - normal * half;
  }
  left[n] = left[0];
  right[n] = right[0];

  spec.tiles.reserve(n);
  for (int i = 0; i < n; ++i) {
    Tile t;
    t.corners = {right[i], right[i + 1], left[i + 1], left[i]};
    // Strictly convex CCW quads only; a kink here means the curvature beat
    // the road width and the layout is unusable.
    for (int k = 0; k < 4; ++k) {
      const Vec2& a = t.corners[k];
      const Vec2& b = t.corners[(k + 1) % 4];
      const Vec2& c = t.corners[(k + 2) % 4];
      if ((b - a).cross(c - b) <= 0.0) throw BuildFailure{};
    }
    spec.tiles.push_back(t);
  }

  // Reject self-intersecting centerlines (non-adjacent segment pairs).
  for (int i = 0; i < n; ++i) {
    const Vec2& a = spec.centerline[i];
    const Vec2& b = spec.centerline[i + 1];
    for (int j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // wrap-adjacent
      if (segments_intersect(a, b, spec.centerline[j], spec.centerline[j + 1]))
        throw BuildFailure{};
    }
  }

  // The whole road must stay inside the playfield.
  const double limit = params.playfield_bound - 2.0;
  for (const Tile& t : spec.tiles)
    for (const Vec2& c : t.corners)
      if (std::abs(c.x) > limit || std::abs(c.y) > limit) throw BuildFailure{};

  return spec;
}

}  // namespace

double Vec2::norm() const { return std::sqrt(x * x + y * y); }

Vec2 Vec2::normalized() const {
  const double n = norm();
  if (n == 0.0) return {0.0, 0.0};
  return {x / n, y / n};
}

bool Tile::contains(const Vec2& p) const {
  for (int k = 0; k < 4; ++k) {
    const Vec2& a = corners[k];
    const Vec2& b = corners[(k + 1) % 4];
    if ((b - a).cross(p - a) < 0.0) return false;
  }
  return true;
}

double Tile::area() const {
  double acc = 0.0;
  for (int k = 0; k < 4; ++k) {
    const Vec2& a = corners[k];
    const Vec2& b = corners[(k + 1) % 4];
    acc += a.cross(b);
  }
  return 0.5 * acc;
}

double TrackSpec::total_length() const {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < centerline.size(); ++i)
    acc += (centerline[i + 1] - centerline[i]).norm();
  return acc;
}

TrackSpec generate_track(std::uint64_t seed, const EnvParams& params) {
  for (int attempt = 0; attempt < params.generation_attempts; ++attempt) {
    RngStream rng =
        RngStream::derive(seed, attempt, StreamPurpose::kTrackRetry, 0);
    try {
      return try_generate(rng, params);
    } catch (const BuildFailure&) {
      continue;
    }
  }
  throw GenerationError("track generation failed after " +
                        std::to_string(params.generation_attempts) +
                        " attempts (seed " + std::to_string(seed) + ")");
}

// --- TileIndex ---------------------------------------------------------------

TileIndex::TileIndex(const TrackSpec& track, double bound) {
  cell_size_ = 6.0;
  origin_ = -bound;
  cells_per_side_ = static_cast<int>(std::ceil(2.0 * bound / cell_size_));
  cells_.assign(static_cast<std::size_t>(cells_per_side_) * cells_per_side_, {});
  for (std::int32_t ti = 0; ti < track.tile_count(); ++ti) {
    const Tile& t = track.tiles[ti];
    double min_x = t.corners[0].x, max_x = t.corners[0].x;
    double min_y = t.corners[0].y, max_y = t.corners[0].y;
    for (const Vec2& c : t.corners) {
      min_x = std::min(min_x, c.x);
      max_x = std::max(max_x, c.x);
      min_y = std::min(min_y, c.y);
      max_y = std::max(max_y, c.y);
    }
    const int x0 = std::max(0, static_cast<int>((min_x - origin_) / cell_size_));
    const int x1 = std::min(cells_per_side_ - 1,
                            static_cast<int>((max_x - origin_) / cell_size_));
    const int y0 = std::max(0, static_cast<int>((min_y - origin_) / cell_size_));
    const int y1 = std::min(cells_per_side_ - 1,
                            static_cast<int>((max_y - origin_) / cell_size_));
    for (int cy = y0; cy <= y1; ++cy)
      for (int cx = x0; cx <= x1; ++cx)
        cells_[static_cast<std::size_t>(cy) * cells_per_side_ + cx].push_back(ti);
  }
}

int TileIndex::lookup(const TrackSpec& track, const Vec2& p) const {
  const int cx = static_cast<int>((p.x - origin_) / cell_size_);
  const int cy = static_cast<int>((p.y - origin_) / cell_size_);
  if (cx < 0 || cy < 0 || cx >= cells_per_side_ || cy >= cells_per_side_)
    return -1;
  for (std::int32_t ti :
       cells_[static_cast<std::size_t>(cy) * cells_per_side_ + cx])
    if (track.tiles[ti].contains(p)) return ti;
  return -1;
}

// --- Env ----------------------------------------------------------------------

Env::Env(const EnvParams& params) : params_(params) {}

Frame Env::reset(std::uint64_t seed) {
  state_ = EnvState{};
  state_.track = generate_track(seed, params_);
  return start_episode();
}

Frame Env::reset_with_track(TrackSpec track) {
  state_ = EnvState{};
  state_.track = std::move(track);
  return start_episode();
}

Frame Env::start_episode() {
  index_ = TileIndex(state_.track, params_.playfield_bound);
  const Vec2& p0 = state_.track.centerline[0];
  const Vec2& p1 = state_.track.centerline[1];
  state_.car.position = (p0 + p1) * 0.5;  // firmly inside tile 0
  state_.car.heading = std::atan2(p1.y - p0.y, p1.x - p0.x);
  state_.car.speed = 0.0;
  state_.car.on_track = true;
  state_.visited.assign(state_.track.tile_count(), 0);
  state_.visited[0] = 1;
  state_.tiles_visited = 1;
  state_.pending_credit = 1;  // start tile credit lands on the first step
  return render();
}

void Env::mark_visit_path(const Vec2& from, const Vec2& to, int* newly) {
  const double dist = (to - from).norm();
  const int samples =
      std::max(1, static_cast<int>(std::ceil(dist / (0.4 * params_.tile_spacing))));
  for (int j = 1; j <= samples; ++j) {
    const double w = static_cast<double>(j) / samples;
    const Vec2 p = from * (1.0 - w) + to * w;
    const int tile = index_.lookup(state_.track, p);
    if (tile >= 0 && !state_.visited[tile]) {
      state_.visited[tile] = 1;
      ++state_.tiles_visited;
      ++*newly;
    }
  }
}

StepResult Env::step(const agent::Action& action) {
  if (state_.done) throw UsageError("step() called on a finished episode");
  const double steer = clamp(action.steer, -1.0, 1.0);
  const double gas = clamp(action.gas, 0.0, 1.0);
  const double brake = clamp(action.brake, 0.0, 1.0);

  CarState& car = state_.car;
  const double drag =
      params_.drag * (car.on_track ? 1.0 : params_.offroad_drag_mult);
  car.speed += (gas * params_.accel - brake * params_.brake_decel -
                drag * car.speed) *
               params_.dt;
  car.speed = std::max(car.speed, 0.0);
  car.heading = wrap_angle(car.heading +
                           steer * params_.steer_gain *
                               std::min(car.speed, params_.steer_speed_cap) *
                               params_.dt);
  const Vec2 old_pos = car.position;
  car.position = car.position + Vec2{std::cos(car.heading),
                                     std::sin(car.heading)} *
                                    (car.speed * params_.dt);

  int newly = 0;
  mark_visit_path(old_pos, car.position, &newly);
  const int credited = newly + state_.pending_credit;
  state_.pending_credit = 0;
  car.on_track = index_.lookup(state_.track, car.position) >= 0;
  state_.frame_index += 1;

  const int n = state_.track.tile_count();
  StepResult out;
  out.reward = -0.1 + (100.0 / n) * credited;
  out.new_tiles = credited;

  if (state_.tiles_visited == n) {
    state_.done = true;
    state_.done_reason = DoneReason::kCompleted;
  } else if (std::abs(car.position.x) > params_.playfield_bound ||
             std::abs(car.position.y) > params_.playfield_bound) {
    state_.done = true;
    state_.done_reason = DoneReason::kOffField;
  } else if (state_.frame_index >= params_.frame_cap) {
    state_.done = true;
    state_.done_reason = DoneReason::kFrameCap;
  }
  out.done = state_.done;
  return out;
}

Frame Env::render() const {
  constexpr float kRoad[3] = {0.42f, 0.42f, 0.42f};
  constexpr float kGrass[3] = {0.25f, 0.60f, 0.25f};
  constexpr float kCar[3] = {0.80f, 0.08f, 0.08f};

  Frame f(agent::kFrameDim, agent::kFrameDim, agent::kFrameChannels);
  const double mpp = params_.view_span / agent::kFrameDim;
  const CarState& car = state_.car;
  const Vec2 fwd{std::cos(car.heading), std::sin(car.heading)};
  const Vec2 right{fwd.y, -fwd.x};
  const double center = (agent::kFrameDim - 1) / 2.0;

  float* px = f.data.data();
  for (int row = 0; row < agent::kFrameDim; ++row) {
    const double df = (center - row) * mpp;
    for (int col = 0; col < agent::kFrameDim; ++col, px += 3) {
      const double dr = (col - center) * mpp;
      const Vec2 p = car.position + right * dr + fwd * df;
      const float* color =
          index_.lookup(state_.track, p) >= 0 ? kRoad : kGrass;
      px[0] = color[0];
      px[1] = color[1];
      px[2] = color[2];
    }
  }
  // The camera is car-locked, so the car is an upright rectangle at center.
  for (int row = 0; row < agent::kFrameDim; ++row) {
    const double df = (center - row) * mpp;
    if (std::abs(df) > params_.car_half_length) continue;
    for (int col = 0; col < agent::kFrameDim; ++col) {
      const double dr = (col - center) * mpp;
      if (std::abs(dr) > params_.car_half_width) continue;
      float* c = &f.at(row, col, 0);
      c[0] = kCar[0];
      c[1] = kCar[1];
      c[2] = kCar[2];
    }
  }
  return f;
}

}  // namespace evorace::track
