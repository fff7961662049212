#include <algorithm>
#include <cstdio>
#include <limits>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "adacong/harness.hpp"

namespace adacong::harness {

namespace {

constexpr double kWidth = 880.0;
constexpr double kHeight = 560.0;
constexpr double kLeft = 72.0;
constexpr double kRight = 852.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 512.0;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

struct Curve {
  std::string label;
  std::vector<double> xs;
  std::vector<double> mean;
  std::vector<double> stddev;
};

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

void render_curves(const std::vector<RunRecord>& records, const std::string& metric,
                   const std::string& split, const std::filesystem::path& out_path) {
  if (records.empty()) throw std::invalid_argument("render_curves: no records");

  // group -> step -> samples across seeds
  std::map<std::string, std::map<std::int64_t, std::vector<double>>> groups;
  for (const auto& rec : records) {
    auto& series = groups[group_of_run_id(rec.run_id)];
    bool found = false;
    for (const auto& row : rec.series) {
      if (row.metric != metric) continue;
      if (!split.empty() && row.split != split) continue;
      series[row.step].push_back(row.value);
      found = true;
    }
    if (!found) {
      throw std::invalid_argument("render_curves: run " + rec.run_id + " has no metric '" +
                                  metric + "'" +
                                  (split.empty() ? "" : " in split '" + split + "'"));
    }
  }

  std::vector<Curve> curves;
  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (const auto& [label, series] : groups) {
    Curve c;
    c.label = label;
    for (const auto& [step, values] : series) {
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double sd = 0.0;
      if (values.size() > 1) {
        for (double v : values) sd += (v - mean) * (v - mean);
        sd = std::sqrt(sd / static_cast<double>(values.size() - 1));
      }
      c.xs.push_back(static_cast<double>(step));
      c.mean.push_back(mean);
      c.stddev.push_back(sd);
      x_min = std::min(x_min, c.xs.back());
      x_max = std::max(x_max, c.xs.back());
      y_min = std::min(y_min, mean - sd);
      y_max = std::max(y_max, mean + sd);
    }
    curves.push_back(std::move(c));
  }
  if (x_min == x_max) {
    x_min -= 0.5;
    x_max += 0.5;
  }
  if (y_min == y_max) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  const double y_pad = 0.05 * (y_max - y_min);
  y_min -= y_pad;
  y_max += y_pad;

  auto sx = [&](double x) {
    return kLeft + (x - x_min) / (x_max - x_min) * (kRight - kLeft);
  };
  auto sy = [&](double y) {
    return kBottom - (y - y_min) / (y_max - y_min) * (kBottom - kTop);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"#ffffff\"/>\n";

  // gridlines and tick labels
  for (int i = 0; i <= 5; ++i) {
    const double fy = y_min + (y_max - y_min) * i / 5.0;
    const double py = sy(fy);
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << py << "\" x2=\"" << kRight << "\" y2=\""
        << py << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << py + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">"
        << tick_label(fy) << "</text>\n";
    const double fx = x_min + (x_max - x_min) * i / 5.0;
    const double px = sx(fx);
    svg << "<line x1=\"" << px << "\" y1=\"" << kBottom << "\" x2=\"" << px << "\" y2=\""
        << kBottom + 5 << "\" stroke=\"#888888\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << px << "\" y=\"" << kBottom + 20
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
        << tick_label(fx) << "</text>\n";
  }
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kBottom << "\" stroke=\"#333333\" stroke-width=\"1.5\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kBottom << "\" x2=\"" << kRight
      << "\" y2=\"" << kBottom << "\" stroke=\"#333333\" stroke-width=\"1.5\"/>\n";
  svg << "<text x=\"" << (kLeft + kRight) / 2 << "\" y=\"" << kHeight - 10
      << "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">step</text>\n";
  svg << "<text x=\"18\" y=\"" << (kTop + kBottom) / 2
      << "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 18 "
      << (kTop + kBottom) / 2 << ")\">" << (split.empty() ? metric : split + " " + metric)
      << "</text>\n";

  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const auto& c = curves[ci];
    const char* color = kPalette[ci % (sizeof(kPalette) / sizeof(kPalette[0]))];

    bool has_band = false;
    for (double sd : c.stddev) {
      if (sd > 0.0) has_band = true;
    }
    if (has_band) {
      svg << "<path d=\"";
      for (std::size_t i = 0; i < c.xs.size(); ++i) {
        svg << (i == 0 ? 'M' : 'L') << sx(c.xs[i]) << ',' << sy(c.mean[i] + c.stddev[i]);
      }
      for (std::size_t i = c.xs.size(); i-- > 0;) {
        svg << 'L' << sx(c.xs[i]) << ',' << sy(c.mean[i] - c.stddev[i]);
      }
      svg << "Z\" fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }

    svg << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t i = 0; i < c.xs.size(); ++i) {
      svg << sx(c.xs[i]) << ',' << sy(c.mean[i]) << ' ';
    }
    svg << "\"/>\n";

    const double ly = kTop + 18.0 * static_cast<double>(ci);
    svg << "<line x1=\"" << kRight - 180 << "\" y1=\"" << ly << "\" x2=\"" << kRight - 156
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n";
    svg << "<text x=\"" << kRight - 150 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << c.label << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open " + out_path.string() + " for writing");
  out << svg.str();
}

}  // namespace adacong::harness
