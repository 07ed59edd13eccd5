#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "afirl/experiment.hpp"

namespace afirl {

struct PlotSeries {
  std::string label;
  std::vector<double> values;
};

struct PlotPanel {
  std::string title;
  std::vector<PlotSeries> series;
};

/// Standalone SVG with one axes per panel laid out on a grid, x = episode,
/// y = reward. Throws std::runtime_error naming the file if it cannot be
/// written.
void writeSvgPlot(std::span<const PlotPanel> panels, const std::string& title,
                  const std::filesystem::path& path, int columns = 2);

/// Smoothed curves as one panel; the legend reads "condition param".
void writeCurvesPlot(std::span<const LearningCurve> curves, const std::string& title,
                     const std::filesystem::path& path);

/// SVG text for the same layout, for callers that write elsewhere.
std::string renderSvgPlot(std::span<const PlotPanel> panels, const std::string& title, int columns = 2);

}  // namespace afirl
