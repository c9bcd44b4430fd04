#include "evorace/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "evorace/errors.hpp"

namespace evorace {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long out = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' needs an integer, got '" + v +
                      "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const std::uint64_t out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' needs an unsigned integer, "
                      "got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' needs a number, got '" + v +
                      "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "' needs on/off, got '" + v + "'");
}

evo::MutationMode parse_mode(const std::string& key, const std::string& v) {
  if (v == "all") return evo::MutationMode::kAll;
  if (v == "mod") return evo::MutationMode::kMod;
  if (v == "controller_only") return evo::MutationMode::kControllerOnly;
  if (v == "discrete_mod") return evo::MutationMode::kDiscreteMod;
  throw ConfigError("config key '" + key +
                    "' must be one of all|mod|controller_only|discrete_mod");
}

}  // namespace

void RunConfig::validate() const {
  evolution.validate();
  if (eval.frame_cap < 1) throw ConfigError("eval.frame_cap must be >= 1");
  if (env_mode != "native" && env_mode != "external")
    throw ConfigError("run.env_mode must be native or external");
  if (env_mode == "external" && external_command.empty())
    throw ConfigError("external env_mode requires env.external_command");
  if (workers < 0) throw ConfigError("run.workers must be >= 0");
  if (checkpoint_interval < 1)
    throw ConfigError("run.checkpoint_interval must be >= 1");
  if (env.dt <= 0.0 || env.tile_spacing <= 0.0 || env.track_width <= 0.0 ||
      env.field_radius <= 0.0 || env.view_span <= 0.0)
    throw ConfigError("env geometry/physics constants must be positive");
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  bool fine_tune_on = true;
  evo::FineTunePhase fine_tune;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> schema = {
      {"evolution.population_size",
       [&](const std::string& k, const std::string& v) {
         c.evolution.population_size = static_cast<int>(parse_int(k, v));
       }},
      {"evolution.sigma",
       [&](const std::string& k, const std::string& v) {
         c.evolution.sigma = parse_double(k, v);
       }},
      {"evolution.mutation_mode",
       [&](const std::string& k, const std::string& v) {
         c.evolution.mutation_mode = parse_mode(k, v);
       }},
      {"evolution.generations",
       [&](const std::string& k, const std::string& v) {
         c.evolution.generations = static_cast<int>(parse_int(k, v));
       }},
      {"evolution.elite_candidates",
       [&](const std::string& k, const std::string& v) {
         c.evolution.elite_candidates = static_cast<int>(parse_int(k, v));
       }},
      {"evolution.elite_trials",
       [&](const std::string& k, const std::string& v) {
         c.evolution.elite_trials = static_cast<int>(parse_int(k, v));
       }},
      {"evolution.early_term_window",
       [&](const std::string& k, const std::string& v) {
         c.evolution.early_term_window = static_cast<int>(parse_int(k, v));
       }},
      {"evolution.master_seed",
       [&](const std::string& k, const std::string& v) {
         c.evolution.master_seed = parse_u64(k, v);
       }},
      {"evolution.tournament_pool",
       [&](const std::string& k, const std::string& v) {
         if (v == "survivors")
           c.evolution.tournament_pool = evo::TournamentPool::kSurvivors;
         else if (v == "full")
           c.evolution.tournament_pool = evo::TournamentPool::kFull;
         else
           throw ConfigError("config key '" + k +
                             "' must be survivors or full");
       }},
      {"evolution.fine_tune",
       [&](const std::string& k, const std::string& v) {
         fine_tune_on = parse_bool(k, v);
       }},
      {"evolution.fine_tune_generations",
       [&](const std::string& k, const std::string& v) {
         fine_tune.generations = static_cast<int>(parse_int(k, v));
       }},
      {"evolution.fine_tune_sigma",
       [&](const std::string& k, const std::string& v) {
         fine_tune.sigma = parse_double(k, v);
       }},
      {"evolution.fine_tune_elite_trials",
       [&](const std::string& k, const std::string& v) {
         fine_tune.elite_trials = static_cast<int>(parse_int(k, v));
       }},
      {"eval.frame_cap",
       [&](const std::string& k, const std::string& v) {
         c.eval.frame_cap = static_cast<int>(parse_int(k, v));
       }},
      {"eval.window_everywhere",
       [&](const std::string& k, const std::string& v) {
         c.eval.window_everywhere = parse_bool(k, v);
       }},
      {"env.dt", [&](const std::string& k,
                     const std::string& v) { c.env.dt = parse_double(k, v); }},
      {"env.accel",
       [&](const std::string& k, const std::string& v) {
         c.env.accel = parse_double(k, v);
       }},
      {"env.brake_decel",
       [&](const std::string& k, const std::string& v) {
         c.env.brake_decel = parse_double(k, v);
       }},
      {"env.drag",
       [&](const std::string& k, const std::string& v) {
         c.env.drag = parse_double(k, v);
       }},
      {"env.offroad_drag_mult",
       [&](const std::string& k, const std::string& v) {
         c.env.offroad_drag_mult = parse_double(k, v);
       }},
      {"env.steer_gain",
       [&](const std::string& k, const std::string& v) {
         c.env.steer_gain = parse_double(k, v);
       }},
      {"env.steer_speed_cap",
       [&](const std::string& k, const std::string& v) {
         c.env.steer_speed_cap = parse_double(k, v);
       }},
      {"env.field_radius",
       [&](const std::string& k, const std::string& v) {
         c.env.field_radius = parse_double(k, v);
       }},
      {"env.radius_jitter_min",
       [&](const std::string& k, const std::string& v) {
         c.env.radius_jitter_min = parse_double(k, v);
       }},
      {"env.tile_spacing",
       [&](const std::string& k, const std::string& v) {
         c.env.tile_spacing = parse_double(k, v);
       }},
      {"env.track_width",
       [&](const std::string& k, const std::string& v) {
         c.env.track_width = parse_double(k, v);
       }},
      {"env.playfield_bound",
       [&](const std::string& k, const std::string& v) {
         c.env.playfield_bound = parse_double(k, v);
       }},
      {"env.view_span",
       [&](const std::string& k, const std::string& v) {
         c.env.view_span = parse_double(k, v);
       }},
      {"env.checkpoints",
       [&](const std::string& k, const std::string& v) {
         c.env.checkpoints = static_cast<int>(parse_int(k, v));
       }},
      {"env.generation_attempts",
       [&](const std::string& k, const std::string& v) {
         c.env.generation_attempts = static_cast<int>(parse_int(k, v));
       }},
      {"env.mode",
       [&](const std::string&, const std::string& v) { c.env_mode = v; }},
      {"env.external_command",
       [&](const std::string&, const std::string& v) {
         c.external_command = v;
       }},
      {"run.workers",
       [&](const std::string& k, const std::string& v) {
         c.workers = static_cast<int>(parse_int(k, v));
       }},
      {"run.output_dir",
       [&](const std::string&, const std::string& v) { c.output_dir = v; }},
      {"run.checkpoint_interval",
       [&](const std::string& k, const std::string& v) {
         c.checkpoint_interval = static_cast<int>(parse_int(k, v));
       }},
  };

  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    const std::string key = section + "." + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = schema.find(key);
    if (it == schema.end())
      throw ConfigError("unknown config key '" + key + "' (line " +
                        std::to_string(line_no) + ")");
    it->second(key, value);
  }

  if (fine_tune_on)
    c.evolution.fine_tune = fine_tune;
  else
    c.evolution.fine_tune.reset();
  c.env.frame_cap = c.eval.frame_cap;  // the episode budget is shared
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string render_config(const RunConfig& c) {
  std::ostringstream out;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "[evolution]\n";
  out << "population_size = " << c.evolution.population_size << "\n";
  out << "sigma = " << num(c.evolution.sigma) << "\n";
  out << "mutation_mode = " << evo::mutation_mode_name(c.evolution.mutation_mode)
      << "\n";
  out << "generations = " << c.evolution.generations << "\n";
  out << "elite_candidates = " << c.evolution.elite_candidates << "\n";
  out << "elite_trials = " << c.evolution.elite_trials << "\n";
  out << "early_term_window = " << c.evolution.early_term_window << "\n";
  out << "master_seed = " << c.evolution.master_seed << "\n";
  out << "tournament_pool = "
      << (c.evolution.tournament_pool == evo::TournamentPool::kSurvivors
              ? "survivors"
              : "full")
      << "\n";
  out << "fine_tune = " << (c.evolution.fine_tune ? "on" : "off") << "\n";
  const evo::FineTunePhase ft =
      c.evolution.fine_tune.value_or(evo::FineTunePhase{});
  out << "fine_tune_generations = " << ft.generations << "\n";
  out << "fine_tune_sigma = " << num(ft.sigma) << "\n";
  out << "fine_tune_elite_trials = " << ft.elite_trials << "\n";
  out << "\n[eval]\n";
  out << "frame_cap = " << c.eval.frame_cap << "\n";
  out << "window_everywhere = " << (c.eval.window_everywhere ? "on" : "off")
      << "\n";
  out << "\n[env]\n";
  out << "mode = " << c.env_mode << "\n";
  if (!c.external_command.empty())
    out << "external_command = " << c.external_command << "\n";
  out << "dt = " << num(c.env.dt) << "\n";
  out << "accel = " << num(c.env.accel) << "\n";
  out << "brake_decel = " << num(c.env.brake_decel) << "\n";
  out << "drag = " << num(c.env.drag) << "\n";
  out << "offroad_drag_mult = " << num(c.env.offroad_drag_mult) << "\n";
  out << "steer_gain = " << num(c.env.steer_gain) << "\n";
  out << "steer_speed_cap = " << num(c.env.steer_speed_cap) << "\n";
  out << "field_radius = " << num(c.env.field_radius) << "\n";
  out << "radius_jitter_min = " << num(c.env.radius_jitter_min) << "\n";
  out << "tile_spacing = " << num(c.env.tile_spacing) << "\n";
  out << "track_width = " << num(c.env.track_width) << "\n";
  out << "playfield_bound = " << num(c.env.playfield_bound) << "\n";
  out << "view_span = " << num(c.env.view_span) << "\n";
  out << "checkpoints = " << c.env.checkpoints << "\n";
  out << "generation_attempts = " << c.env.generation_attempts << "\n";
  out << "\n[run]\n";
  out << "workers = " << c.workers << "\n";
  out << "output_dir = " << c.output_dir << "\n";
  out << "checkpoint_interval = " << c.checkpoint_interval << "\n";
  return out.str();
}

RunConfig paper_defaults() {
  RunConfig c;
  c.evolution.population_size = 200;
  c.evolution.sigma = 0.01;
  c.evolution.mutation_mode = evo::MutationMode::kMod;
  c.evolution.generations = 1000;
  c.evolution.elite_candidates = 3;
  c.evolution.elite_trials = 20;
  c.evolution.early_term_window = 20;
  c.evolution.fine_tune = evo::FineTunePhase{200, 0.003, 40};
  c.eval.frame_cap = 1000;
  c.env.frame_cap = 1000;
  return c;
}

}  // namespace evorace
