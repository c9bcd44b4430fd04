#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "evorace/analysis.hpp"
#include "evorace/errors.hpp"
#include "evorace/rng.hpp"

using namespace evorace;
namespace fs = std::filesystem;

TEST_CASE("hidden variance hand case (0, 2, 4)") {
  const double xbar[] = {0.0, 2.0, 4.0};
  const auto out = analysis::hidden_variance(xbar);
  REQUIRE(out.size() == 3);
  CHECK(out[0] == 1.0);
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 1.0);
}

TEST_CASE("hidden variance degenerate cases") {
  const double constant[] = {0.7, 0.7, 0.7, 0.7};
  for (double v : analysis::hidden_variance(constant)) CHECK(v == 0.0);

  // two distinct steps: raw deviations are mirror images, so the profile is
  // flat and normalization maps it to zeros
  const double pair[] = {1.0, 3.0};
  for (double v : analysis::hidden_variance(pair)) CHECK(v == 0.0);

  CHECK_THROWS_AS(analysis::hidden_variance(std::span<const double>{}),
                  UsageError);
}

TEST_CASE("hidden variance properties") {
  RngStream rng(17);
  std::vector<double> xbar(200);
  for (double& v : xbar) v = rng.uniform(-0.5, 0.5);
  const auto out = analysis::hidden_variance(xbar);

  int ones = 0, zeros = 0;
  for (double v : out) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    if (v == 1.0) ++ones;
    if (v == 0.0) ++zeros;
  }
  CHECK(ones >= 1);
  CHECK(zeros >= 1);

  // translation invariance
  std::vector<double> shifted = xbar;
  for (double& v : shifted) v += 3.25;
  const auto out2 = analysis::hidden_variance(shifted);
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(out[i] == doctest::Approx(out2[i]).epsilon(1e-9));
}

namespace {

rollout::RolloutResult tiny_traced_result(int frames) {
  rollout::RolloutResult r;
  r.frames = frames;
  r.traces.emplace();
  RngStream rng(23);
  for (int t = 0; t < frames; ++t) {
    std::array<float, agent::kLatentDim> z;
    for (float& v : z) v = static_cast<float>(rng.uniform(-2.0, 2.0));
    r.traces->latents.push_back(z);
    r.traces->hidden_means.push_back(rng.uniform(-0.2, 0.2));
    r.traces->actions.push_back(
        {static_cast<float>(rng.uniform(-1, 1)),
         static_cast<float>(rng.next_unit()),
         static_cast<float>(rng.next_unit())});
    r.traces->positions.push_back({rng.uniform(-100, 100), rng.uniform(-100, 100)});
  }
  return r;
}

}  // namespace

TEST_CASE("latent export row counts and round-trip precision") {
  const auto r = tiny_traced_result(10);
  const auto path = (fs::temp_directory_path() / "evorace_trace.csv").string();
  analysis::export_latents(r, path);

  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line.rfind("t,z_0", 0) == 0);
  int rows = 0;
  std::vector<std::string> lines;
  while (std::getline(in, line)) {
    lines.push_back(line);
    ++rows;
  }
  CHECK(rows == 10);

  // parse a row back and compare to 6 significant digits
  std::stringstream ss(lines[3]);
  std::string cell;
  std::getline(ss, cell, ',');
  CHECK(cell == "3");
  for (int i = 0; i < agent::kLatentDim; ++i) {
    std::getline(ss, cell, ',');
    const double parsed = std::stod(cell);
    const double want = r.traces->latents[3][i];
    CHECK(parsed == doctest::Approx(want).epsilon(1e-6));
  }
  fs::remove(path);
}

TEST_CASE("latent export requires recorded traces") {
  rollout::RolloutResult r;
  CHECK_THROWS_AS(analysis::export_latents(r, "/tmp/never.csv"), UsageError);
}

namespace {

std::string write_log(const std::vector<std::string>& rows) {
  const auto path = (fs::temp_directory_path() / "evorace_log.csv").string();
  std::ofstream out(path, std::ios::binary);
  out << "generation,best_single,elite_avg,elite_std,pop_mean,pop_std,"
         "rollouts,frames,wall_time_s\n";
  for (const auto& r : rows) out << r << "\n";
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("fitness plot: single-row log yields a valid self-contained SVG") {
  const auto log = write_log({"0,1.5,1.2,0.3,0.4,0.2,68,1234,2.5"});
  const auto svg_path = (fs::temp_directory_path() / "evorace_plot.svg").string();
  analysis::emit_fitness_plot(log, svg_path);
  const std::string svg = slurp(svg_path);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("generation") != std::string::npos);
  CHECK(svg.find("fitness") != std::string::npos);
  CHECK(svg.find("href") == std::string::npos);  // no external assets
  fs::remove(log);
  fs::remove(svg_path);
}

TEST_CASE("fitness plot: many rows, deterministic output") {
  std::vector<std::string> rows;
  for (int g = 0; g < 1000; ++g) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d,%.4f,%.4f,0.5,0.1,0.2,68,999,1.0", g,
                  g * 0.9 + 3.0, g * 0.85);
    rows.push_back(buf);
  }
  const auto log = write_log(rows);
  const auto p1 = (fs::temp_directory_path() / "evorace_p1.svg").string();
  const auto p2 = (fs::temp_directory_path() / "evorace_p2.svg").string();
  analysis::emit_fitness_plot(log, p1);
  analysis::emit_fitness_plot(log, p2);
  const std::string a = slurp(p1), b = slurp(p2);
  CHECK(a == b);
  CHECK(a.find("polyline") != std::string::npos);
  fs::remove(log);
  fs::remove(p1);
  fs::remove(p2);
}

TEST_CASE("fitness plot: malformed logs name the offending line") {
  const auto log = write_log({"0,1.5,1.2,0.3,0.4,0.2,68,99,2.5",
                              "mangled row"});
  const auto out = (fs::temp_directory_path() / "evorace_p3.svg").string();
  try {
    analysis::emit_fitness_plot(log, out);
    FAIL("expected a parse error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  fs::remove(log);
}
