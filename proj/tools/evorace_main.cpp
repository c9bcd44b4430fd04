#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "evorace/agent.hpp"
#include "evorace/analysis.hpp"
#include "evorace/config.hpp"
#include "evorace/errors.hpp"
#include "evorace/rollout.hpp"
#include "evorace/runner.hpp"

namespace {

namespace fs = std::filesystem;
using namespace evorace;

std::atomic<bool> g_interrupted{false};

void handle_sigint(int) { g_interrupted.store(true); }

agent::LatentMode parse_latent(const std::string& name) {
  if (name == "continuous") return agent::LatentMode::kContinuous;
  if (name == "discrete") return agent::LatentMode::kDiscrete;
  throw ConfigError("latent mode must be continuous or discrete");
}

int cmd_inspect() {
  std::printf("%s", agent::architecture_table().c_str());
  std::printf("\n");
  std::printf("%-22s %12s\n", "component", "parameters");
  std::printf("%-22s %12zu\n", "encoder", agent::vision_param_count());
  std::printf("%-22s %12zu\n", "mdn-rnn", agent::memory_param_count());
  std::printf("%-22s %12zu\n", "controller", agent::controller_param_count());
  std::printf("%-22s %12zu\n", "evolved genome", agent::genome_param_count());
  std::printf("%-22s %12zu\n", "decoder (static)", agent::decoder_param_count());
  std::printf("%-22s %12zu\n", "vae total", agent::vae_param_count());
  std::printf("\narchitecture hash: %016llx\n",
              static_cast<unsigned long long>(agent::architecture_hash()));
  return 0;
}

int cmd_train(const std::string& config_path, bool paper, bool force,
              const std::string& write_config, const std::string& out_dir,
              std::optional<int> workers, std::optional<std::uint64_t> seed) {
  RunConfig config;
  if (paper) {
    config = paper_defaults();
  } else if (!config_path.empty()) {
    config = load_config(config_path);
  } else {
    throw UsageError("train needs --config FILE or --paper-defaults");
  }
  if (!out_dir.empty()) config.output_dir = out_dir;
  if (workers) config.workers = *workers;
  if (seed) config.evolution.master_seed = *seed;

  if (!write_config.empty()) {
    std::ofstream out(write_config, std::ios::binary);
    if (!out) throw IoError("cannot write config: " + write_config);
    out << render_config(config);
    std::printf("wrote %s\n", write_config.c_str());
    return 0;
  }

  Runner runner(config, force);
  std::signal(SIGINT, handle_sigint);
  const int last = runner.run(&g_interrupted);
  std::printf("finished at generation %d; elite genome: %s\n", last,
              runner.elite_path().c_str());
  return 0;
}

int cmd_resume(const std::string& checkpoint_path,
               std::optional<double> sigma, std::optional<int> workers) {
  Runner runner = Runner::resume(checkpoint_path, sigma, workers);
  std::signal(SIGINT, handle_sigint);
  const int last = runner.run(&g_interrupted);
  std::printf("finished at generation %d; elite genome: %s\n", last,
              runner.elite_path().c_str());
  return 0;
}

int cmd_evaluate(const std::string& genome_path, int trials,
                 std::uint64_t seed, const std::string& latent,
                 const std::string& out_csv, const std::string& config_path,
                 int workers) {
  const agent::Genome genome = agent::load_genome(genome_path);
  RunConfig config;
  if (!config_path.empty()) config = load_config(config_path);
  rollout::EvalConfig eval = config.eval;
  eval.latent_mode = parse_latent(latent);
  const auto report = rollout::evaluate_generalization(
      genome, trials, seed, eval, config.env, workers);
  std::printf("trials %d  mean %.3f  std %.3f  solved %s\n", trials,
              report.mean, report.stddev, report.solved ? "yes" : "no");
  if (!out_csv.empty()) {
    std::ofstream out(out_csv, std::ios::binary);
    if (!out) throw IoError("cannot write report: " + out_csv);
    out << "trial,track_seed,fitness\n";
    for (std::size_t i = 0; i < report.per_trial.size(); ++i) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%zu,%llu,%.6f\n", i,
                    static_cast<unsigned long long>(report.trial_seeds[i]),
                    report.per_trial[i]);
      out << buf;
    }
    std::printf("per-trial scores: %s\n", out_csv.c_str());
  }
  return 0;
}

int cmd_analyze(const std::string& genome_path, std::uint64_t track_seed,
                const std::string& out_dir, const std::string& latent,
                const std::string& log_path, const std::string& config_path) {
  const agent::Genome genome = agent::load_genome(genome_path);
  RunConfig config;
  if (!config_path.empty()) config = load_config(config_path);
  fs::create_directories(out_dir);

  rollout::EvalConfig eval = config.eval;
  eval.early_term_enabled = false;
  eval.record_traces = true;
  eval.latent_mode = parse_latent(latent);
  const rollout::RolloutResult result =
      rollout::run(genome, track_seed, eval, config.env);

  const std::string trace_path = (fs::path(out_dir) / "trace.csv").string();
  analysis::export_latents(result, trace_path);
  const auto profile = analysis::hidden_variance(result.traces->hidden_means);
  const std::string var_path = (fs::path(out_dir) / "variance.csv").string();
  analysis::write_variance_csv(profile, var_path);
  std::printf("rollout: %d frames, %d tiles, fitness %.3f\n", result.frames,
              result.tiles_visited, result.fitness);
  std::printf("wrote %s and %s\n", trace_path.c_str(), var_path.c_str());

  if (!log_path.empty()) {
    const std::string svg_path = (fs::path(out_dir) / "fitness.svg").string();
    analysis::emit_fitness_plot(log_path, svg_path);
    std::printf("wrote %s\n", svg_path.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evorace: end-to-end neuroevolution of a world-model driving "
               "agent on a built-in procedural track environment"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "run evolution from a config");
  std::string train_config, write_config, train_out;
  bool paper = false, force = false;
  int train_workers = -1;
  std::int64_t train_seed = -1;
  train->add_option("--config", train_config, "run config file");
  train->add_flag("--paper-defaults", paper,
                  "use the published run protocol instead of a config file");
  train->add_option("--write-config", write_config,
                    "write the effective config to FILE and exit");
  train->add_option("--out", train_out, "output directory override");
  train->add_flag("--force", force, "reuse a non-empty output directory");
  train->add_option("--workers", train_workers, "worker thread override");
  train->add_option("--seed", train_seed, "master seed override");

  // resume
  auto* resume = app.add_subcommand("resume", "continue from a checkpoint");
  std::string ckpt_path;
  double resume_sigma = -1.0;
  int resume_workers = -1;
  resume->add_option("checkpoint", ckpt_path, "checkpoint file")->required();
  resume->add_option("--sigma", resume_sigma,
                     "mutation rate override (starts a new phase)");
  resume->add_option("--workers", resume_workers, "worker thread override");

  // evaluate
  auto* evaluate =
      app.add_subcommand("evaluate", "score a genome on fresh tracks");
  std::string eval_genome, eval_out, eval_latent = "continuous",
              eval_config_path;
  int trials = 100, eval_workers = 0;
  std::uint64_t eval_seed = 0;
  evaluate->add_option("genome", eval_genome, "genome file")->required();
  evaluate->add_option("--trials", trials, "number of fresh tracks");
  evaluate->add_option("--seed", eval_seed, "base seed for trial tracks");
  evaluate->add_option("--latent", eval_latent, "continuous|discrete");
  evaluate->add_option("--out", eval_out, "per-trial CSV path");
  evaluate->add_option("--config", eval_config_path,
                       "config file for env constants");
  evaluate->add_option("--workers", eval_workers, "worker threads");

  // analyze
  auto* analyze =
      app.add_subcommand("analyze", "trace one rollout and export analyses");
  std::string an_genome, an_out = "analysis", an_latent = "continuous",
              an_log, an_config_path;
  std::uint64_t an_seed = 0;
  analyze->add_option("genome", an_genome, "genome file")->required();
  analyze->add_option("--track-seed", an_seed, "track seed");
  analyze->add_option("--out-dir", an_out, "output directory");
  analyze->add_option("--latent", an_latent, "continuous|discrete");
  analyze->add_option("--log", an_log,
                      "generation log for the fitness curve SVG");
  analyze->add_option("--config", an_config_path,
                      "config file for env constants");

  // inspect
  app.add_subcommand("inspect",
                     "print the architecture and parameter counts");

  try {
    app.parse(argc, argv);
    if (app.got_subcommand("inspect")) return cmd_inspect();
    if (app.got_subcommand("train"))
      return cmd_train(train_config, paper, force, write_config, train_out,
                       train_workers >= 0 ? std::optional<int>(train_workers)
                                          : std::nullopt,
                       train_seed >= 0
                           ? std::optional<std::uint64_t>(
                                 static_cast<std::uint64_t>(train_seed))
                           : std::nullopt);
    if (app.got_subcommand("resume"))
      return cmd_resume(ckpt_path,
                        resume_sigma > 0 ? std::optional<double>(resume_sigma)
                                         : std::nullopt,
                        resume_workers >= 0 ? std::optional<int>(resume_workers)
                                            : std::nullopt);
    if (app.got_subcommand("evaluate"))
      return cmd_evaluate(eval_genome, trials, eval_seed, eval_latent,
                          eval_out, eval_config_path, eval_workers);
    if (app.got_subcommand("analyze"))
      return cmd_analyze(an_genome, an_seed, an_out, an_latent, an_log,
                         an_config_path);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
