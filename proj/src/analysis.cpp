#include "evorace/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "evorace/errors.hpp"

namespace evorace::analysis {

std::vector<double> hidden_variance(std::span<const double> mean_activation) {
  if (mean_activation.empty())
    throw UsageError("hidden_variance needs a non-empty trace");
  const std::size_t n = mean_activation.size();
  double overall = 0.0;
  for (double v : mean_activation) overall += v;
  overall /= static_cast<double>(n);

  std::vector<double> raw(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double d = overall - mean_activation[t];
    raw[t] = d * d;
  }
  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi == lo) return std::vector<double>(n, 0.0);
  for (double& v : raw) v = (v - lo) / (hi - lo);
  return raw;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace

void export_latents(const rollout::RolloutResult& result,
                    const std::string& path) {
  if (!result.traces)
    throw UsageError("export_latents: rollout was run without traces");
  const rollout::Traces& tr = *result.traces;
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "w"));
  if (!f) throw IoError("cannot open trace file for writing: " + path);
  std::string header = "t";
  for (int i = 0; i < agent::kLatentDim; ++i)
    header += ",z_" + std::to_string(i);
  header += ",a_steer,a_gas,a_brake,hbar,car_x,car_y\n";
  std::fputs(header.c_str(), f.get());
  for (std::size_t t = 0; t < tr.latents.size(); ++t) {
    std::fprintf(f.get(), "%zu", t);
    for (float z : tr.latents[t]) std::fprintf(f.get(), ",%.7g", z);
    std::fprintf(f.get(), ",%.7g,%.7g,%.7g,%.7g,%.7g,%.7g\n",
                 tr.actions[t].steer, tr.actions[t].gas, tr.actions[t].brake,
                 tr.hidden_means[t], tr.positions[t].x, tr.positions[t].y);
  }
}

void write_variance_csv(const std::vector<double>& profile,
                        const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "w"));
  if (!f) throw IoError("cannot open variance file for writing: " + path);
  std::fputs("t,sigma\n", f.get());
  for (std::size_t t = 0; t < profile.size(); ++t)
    std::fprintf(f.get(), "%zu,%.7g\n", t, profile[t]);
}

namespace {

struct LogRow {
  double generation;
  double best_single;
  double elite_avg;
};

std::vector<LogRow> parse_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open generation log: " + path);
  std::vector<LogRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("generation,", 0) == 0) continue;
    LogRow row{};
    double elite_std, pop_mean, pop_std, wall;
    long rollouts, frames;
    const int got = std::sscanf(
        line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%ld,%ld,%lf", &row.generation,
        &row.best_single, &row.elite_avg, &elite_std, &pop_mean, &pop_std,
        &rollouts, &frames, &wall);
    if (got != 9)
      throw IoError("malformed generation log at line " +
                    std::to_string(line_no) + ": " + line);
    rows.push_back(row);
  }
  if (rows.empty())
    throw IoError("generation log has no data rows: " + path);
  return rows;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void polyline(std::ostringstream& svg, const std::vector<LogRow>& rows,
              double LogRow::*field, double x0, double y0, double w, double h,
              double gen_lo, double gen_hi, double fit_lo, double fit_hi,
              const char* color) {
  svg << "  <polyline fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double gx = gen_hi > gen_lo
                          ? (rows[i].generation - gen_lo) / (gen_hi - gen_lo)
                          : 0.5;
    const double gy =
        fit_hi > fit_lo ? (rows[i].*field - fit_lo) / (fit_hi - fit_lo) : 0.5;
    svg << fmt(x0 + gx * w) << "," << fmt(y0 + h - gy * h);
    if (i + 1 < rows.size()) svg << " ";
  }
  svg << "\"/>\n";
}

}  // namespace

void emit_fitness_plot(const std::string& log_path,
                       const std::string& out_path) {
  const std::vector<LogRow> rows = parse_log(log_path);

  double gen_lo = rows.front().generation, gen_hi = rows.front().generation;
  double fit_lo = rows.front().elite_avg, fit_hi = rows.front().elite_avg;
  for (const LogRow& r : rows) {
    gen_lo = std::min(gen_lo, r.generation);
    gen_hi = std::max(gen_hi, r.generation);
    fit_lo = std::min({fit_lo, r.best_single, r.elite_avg});
    fit_hi = std::max({fit_hi, r.best_single, r.elite_avg});
  }

  const double width = 820, height = 500;
  const double x0 = 70, y0 = 30, plot_w = width - 100, plot_h = height - 90;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  svg << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "  <rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n";

  // axis ticks (5 per axis)
  for (int i = 0; i <= 5; ++i) {
    const double fx = x0 + plot_w * i / 5.0;
    const double gen = gen_lo + (gen_hi - gen_lo) * i / 5.0;
    svg << "  <line x1=\"" << fmt(fx) << "\" y1=\"" << fmt(y0 + plot_h)
        << "\" x2=\"" << fmt(fx) << "\" y2=\"" << fmt(y0 + plot_h + 5)
        << "\" stroke=\"#444\"/>\n";
    svg << "  <text x=\"" << fmt(fx) << "\" y=\"" << fmt(y0 + plot_h + 20)
        << "\" font-size=\"12\" text-anchor=\"middle\">" << fmt(gen)
        << "</text>\n";
    const double fy = y0 + plot_h - plot_h * i / 5.0;
    const double fit = fit_lo + (fit_hi - fit_lo) * i / 5.0;
    svg << "  <line x1=\"" << fmt(x0 - 5) << "\" y1=\"" << fmt(fy)
        << "\" x2=\"" << fmt(x0) << "\" y2=\"" << fmt(fy)
        << "\" stroke=\"#444\"/>\n";
    svg << "  <text x=\"" << fmt(x0 - 9) << "\" y=\"" << fmt(fy + 4)
        << "\" font-size=\"12\" text-anchor=\"end\">" << fmt(fit)
        << "</text>\n";
  }
  svg << "  <text x=\"" << fmt(x0 + plot_w / 2) << "\" y=\""
      << fmt(height - 15)
      << "\" font-size=\"14\" text-anchor=\"middle\">generation</text>\n";
  svg << "  <text x=\"18\" y=\"" << fmt(y0 + plot_h / 2)
      << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << fmt(y0 + plot_h / 2) << ")\">fitness</text>\n";

  if (rows.size() == 1) {
    // degenerate single-point log: draw markers instead of lines
    const double cx = x0 + plot_w / 2, cy = y0 + plot_h / 2;
    svg << "  <circle cx=\"" << fmt(cx) << "\" cy=\"" << fmt(cy)
        << "\" r=\"4\" fill=\"#1f77b4\"/>\n";
  } else {
    polyline(svg, rows, &LogRow::best_single, x0, y0, plot_w, plot_h, gen_lo,
             gen_hi, fit_lo, fit_hi, "#aec7e8");
    polyline(svg, rows, &LogRow::elite_avg, x0, y0, plot_w, plot_h, gen_lo,
             gen_hi, fit_lo, fit_hi, "#1f77b4");
  }

  // legend
  svg << "  <rect x=\"" << fmt(x0 + 10) << "\" y=\"" << fmt(y0 + 10)
      << "\" width=\"14\" height=\"3\" fill=\"#1f77b4\"/>\n";
  svg << "  <text x=\"" << fmt(x0 + 30) << "\" y=\"" << fmt(y0 + 15)
      << "\" font-size=\"12\">elite_avg</text>\n";
  svg << "  <rect x=\"" << fmt(x0 + 10) << "\" y=\"" << fmt(y0 + 25)
      << "\" width=\"14\" height=\"3\" fill=\"#aec7e8\"/>\n";
  svg << "  <text x=\"" << fmt(x0 + 30) << "\" y=\"" << fmt(y0 + 30)
      << "\" font-size=\"12\">best_single</text>\n";
  svg << "</svg>\n";

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw IoError("cannot open SVG output: " + out_path);
  out << svg.str();
}

}  // namespace evorace::analysis
