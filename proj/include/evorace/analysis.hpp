#pragma once

#include <span>
#include <string>
#include <vector>

#include "evorace/rollout.hpp"

namespace evorace::analysis {

// Per-step deviation of the mean hidden activation from its episode
// average: raw_t = (mean(xbar) - xbar_t)^2, min-max normalized to [0, 1].
// A constant raw profile maps to all zeros.
std::vector<double> hidden_variance(std::span<const double> mean_activation);

// Writes the recorded rollout traces as CSV with columns
// t,z_0..z_31,a_steer,a_gas,a_brake,hbar,car_x,car_y.
void export_latents(const rollout::RolloutResult& result,
                    const std::string& path);

void write_variance_csv(const std::vector<double>& profile,
                        const std::string& path);

// Renders the generation log as a self-contained SVG line chart of
// best_single and elite_avg against generation.
void emit_fitness_plot(const std::string& log_path,
                       const std::string& out_path);

}  // namespace evorace::analysis
