#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evorace/evolution.hpp"

namespace evorace {

// Start-of-generation snapshot of a run. All stochastic streams are pure
// functions of (master_seed, generation, purpose, index), so storing the
// config and generation index is enough to continue a run bit-exactly.
struct Checkpoint {
  std::string config_text;
  int generation = 0;  // next generation to run
  std::uint64_t lineage_counter = 0;
  std::vector<evo::Individual> population;
  int elite_index = -1;  // carried elite's position, -1 before generation 0
  std::uint64_t log_offset = 0;
};

// Binary, versioned, checksummed (trailing FNV-1a over the payload),
// little-endian. Written atomically via rename.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace evorace
