#pragma once

#include "evorace/agent.hpp"
#include "evorace/track.hpp"

namespace evorace::track {

// Geometric reference driver that bypasses the network entirely: pure-pursuit
// steering toward a lookahead point on the centerline plus a speed target
// capped by the upcoming curvature. Exists to validate reward accounting and
// to calibrate the physics constants.
agent::Action centerline_driver_action(const EnvState& state,
                                       const EnvParams& params);

}  // namespace evorace::track
