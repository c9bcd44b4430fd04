#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "evorace/checkpoint.hpp"
#include "evorace/config.hpp"
#include "evorace/environment.hpp"

namespace evorace {

// Drives a full evolutionary run: evaluation waves, the generation log,
// periodic checkpoints, and the final elite genome. Runs are bit-exactly
// resumable from any checkpoint; only the wall_time_s log column reflects
// the actual machine.
class Runner {
 public:
  // Fresh run rooted at config.output_dir. Refuses a non-empty directory
  // unless force is set.
  Runner(const RunConfig& config, bool force);

  // Continues from a checkpoint; an explicit sigma override starts a new
  // phase (noted on stderr, stored in later checkpoints).
  static Runner resume(const std::string& checkpoint_path,
                       std::optional<double> sigma_override,
                       std::optional<int> workers_override);

  // Blocks until the configured generations finish or *stop becomes true
  // (a checkpoint is written either way). Returns the last generation run.
  int run(const std::atomic<bool>* stop = nullptr);

  const RunConfig& config() const { return config_; }
  const std::string& log_path() const { return log_path_; }
  std::string elite_path() const;

 private:
  Runner(RunConfig config, Checkpoint state, bool fresh, bool force);

  void open_log();
  void write_checkpoint();
  evo::EvalFn make_eval_fn();

  RunConfig config_;
  Checkpoint state_;
  std::string log_path_;
  std::uint64_t log_bytes_ = 0;
  std::vector<std::unique_ptr<Environment>> external_envs_;
  long failed_evals_ = 0;
};

}  // namespace evorace
