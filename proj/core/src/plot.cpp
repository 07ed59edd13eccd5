#include "afirl/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace afirl {

namespace {

constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};
constexpr double kPanelWidth = 520.0;
constexpr double kPanelHeight = 340.0;
constexpr double kMarginLeft = 60.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 36.0;
constexpr double kMarginBottom = 44.0;
constexpr double kTitleHeight = 40.0;

std::string escape(const std::string& text) {
  std::string out;
  for (const char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << v;
  return out.str();
}

// Roughly five "nice" tick values covering [lo, hi].
std::vector<double> ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double magnitude = std::pow(10.0, std::floor(std::log10(raw)));
  double stepSize = magnitude;
  for (const double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    stepSize = m * magnitude;
    if (span / stepSize <= 6.0) break;
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / stepSize) * stepSize; t <= hi + 1e-9 * span; t += stepSize)
    out.push_back(std::abs(t) < 1e-12 ? 0.0 : t);
  return out;
}

void renderPanel(std::ostream& svg, const PlotPanel& panel, double x0, double y0) {
  const double left = x0 + kMarginLeft;
  const double top = y0 + kMarginTop;
  const double width = kPanelWidth - kMarginLeft - kMarginRight;
  const double height = kPanelHeight - kMarginTop - kMarginBottom;

  std::size_t length = 1;
  double lo = 0.0;
  double hi = 0.0;
  bool any = false;
  for (const auto& s : panel.series) {
    length = std::max(length, s.values.size());
    for (const double v : s.values) {
      if (!std::isfinite(v)) continue;
      lo = any ? std::min(lo, v) : v;
      hi = any ? std::max(hi, v) : v;
      any = true;
    }
  }
  if (!any || hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double xMax = static_cast<double>(std::max<std::size_t>(length, 2) - 1);
  auto px = [&](double x) { return left + width * x / xMax; };
  auto py = [&](double y) { return top + height * (hi - y) / (hi - lo); };

  svg << "<text x=\"" << fixed(left + width / 2) << "\" y=\"" << fixed(y0 + 22)
      << "\" text-anchor=\"middle\" font-size=\"14\">" << escape(panel.title) << "</text>\n";
  svg << "<rect x=\"" << fixed(left) << "\" y=\"" << fixed(top) << "\" width=\"" << fixed(width)
      << "\" height=\"" << fixed(height) << "\" fill=\"none\" stroke=\"#333\"/>\n";

  for (const double t : ticks(lo, hi)) {
    svg << "<line x1=\"" << fixed(left) << "\" x2=\"" << fixed(left + width) << "\" y1=\"" << fixed(py(t))
        << "\" y2=\"" << fixed(py(t)) << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << fixed(left - 6) << "\" y=\"" << fixed(py(t) + 4)
        << "\" text-anchor=\"end\" font-size=\"11\">" << fixed(t) << "</text>\n";
  }
  for (const double t : ticks(0.0, xMax)) {
    svg << "<text x=\"" << fixed(px(t)) << "\" y=\"" << fixed(top + height + 16)
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fixed(t, 0) << "</text>\n";
  }
  svg << "<text x=\"" << fixed(left + width / 2) << "\" y=\"" << fixed(top + height + 34)
      << "\" text-anchor=\"middle\" font-size=\"12\">Episodes</text>\n";
  svg << "<text transform=\"translate(" << fixed(x0 + 16) << "," << fixed(top + height / 2)
      << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"12\">Reward</text>\n";

  for (std::size_t i = 0; i < panel.series.size(); ++i) {
    const auto& s = panel.series[i];
    const char* colour = kPalette[i % kPalette.size()];
    svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < s.values.size(); ++k) {
      if (!std::isfinite(s.values[k])) continue;
      svg << fixed(px(static_cast<double>(k))) << ',' << fixed(py(s.values[k])) << ' ';
    }
    svg << "\"/>\n";
    const double ly = top + 14 + 16 * static_cast<double>(i);
    svg << "<line x1=\"" << fixed(left + width - 150) << "\" x2=\"" << fixed(left + width - 130) << "\" y1=\""
        << fixed(ly - 4) << "\" y2=\"" << fixed(ly - 4) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << fixed(left + width - 125) << "\" y=\"" << fixed(ly)
        << "\" font-size=\"11\">" << escape(s.label) << "</text>\n";
  }
}

}  // namespace

std::string renderSvgPlot(std::span<const PlotPanel> panels, const std::string& title, int columns) {
  const int cols = std::max(1, std::min<int>(columns, static_cast<int>(std::max<std::size_t>(panels.size(), 1))));
  const int rows = static_cast<int>((panels.size() + static_cast<std::size_t>(cols) - 1) / static_cast<std::size_t>(cols));
  const double width = kPanelWidth * cols;
  const double height = kTitleHeight + kPanelHeight * std::max(rows, 1);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(width, 0) << "\" height=\""
      << fixed(height, 0) << "\" viewBox=\"0 0 " << fixed(width, 0) << ' ' << fixed(height, 0)
      << "\" font-family=\"sans-serif\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fixed(width / 2) << "\" y=\"26\" text-anchor=\"middle\" font-size=\"16\">"
      << escape(title) << "</text>\n";
  for (std::size_t i = 0; i < panels.size(); ++i) {
    const double x0 = kPanelWidth * static_cast<double>(static_cast<int>(i) % cols);
    const double y0 = kTitleHeight + kPanelHeight * static_cast<double>(static_cast<int>(i) / cols);
    renderPanel(svg, panels[i], x0, y0);
  }
  svg << "</svg>\n";
  return svg.str();
}

void writeSvgPlot(std::span<const PlotPanel> panels, const std::string& title,
                  const std::filesystem::path& path, int columns) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write plot file " + path.string());
  out << renderSvgPlot(panels, title, columns);
  if (!out) throw std::runtime_error("error while writing plot file " + path.string());
}

void writeCurvesPlot(std::span<const LearningCurve> curves, const std::string& title,
                     const std::filesystem::path& path) {
  PlotPanel panel{title, {}};
  for (const auto& c : curves)
    panel.series.push_back({c.param == "-" ? c.condition : c.condition + " " + c.param, c.smoothed});
  writeSvgPlot(std::span<const PlotPanel>(&panel, 1), title, path, 1);
}

}  // namespace afirl
