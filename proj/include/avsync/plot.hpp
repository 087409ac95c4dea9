#pragma once

#include <string>
#include <vector>

namespace avsync {

// Minimal SVG line charts. plot_csv reads a CSV whose first column is the x
// axis and emits one SVG per remaining column, axis labels taken from the
// header. Returns the written file paths.
std::vector<std::string> plot_csv(const std::string& csv_path, const std::string& out_dir);

void write_line_chart_svg(const std::string& path, const std::string& x_label,
                          const std::string& y_label, const std::vector<double>& x,
                          const std::vector<double>& y);

}  // namespace avsync
