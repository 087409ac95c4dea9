#include "avsync/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "avsync/common.hpp"

namespace avsync {

namespace {

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name)
    out += (std::isalnum(static_cast<unsigned char>(c)) != 0) ? c : '_';
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

void write_line_chart_svg(const std::string& path, const std::string& x_label,
                          const std::string& y_label, const std::vector<double>& x,
                          const std::vector<double>& y) {
  check(x.size() == y.size() && !x.empty(), "plot: x/y size mismatch or empty series");
  const double width = 640, height = 420, ml = 70, mr = 20, mt = 30, mb = 50;
  double xmin = *std::min_element(x.begin(), x.end());
  double xmax = *std::max_element(x.begin(), x.end());
  double ymin = *std::min_element(y.begin(), y.end());
  double ymax = *std::max_element(y.begin(), y.end());
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) {
    ymax += 0.5;
    ymin -= 0.5;
  }
  const double px = (width - ml - mr) / (xmax - xmin);
  const double py = (height - mt - mb) / (ymax - ymin);
  auto sx = [&](double v) { return ml + (v - xmin) * px; };
  auto sy = [&](double v) { return height - mb - (v - ymin) * py; };

  std::ofstream os(path, std::ios::trunc);
  check(os.good(), cat("cannot open for write: ", path));
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
     << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
     << height - mb << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    os << "<text x=\"" << sx(xv) << "\" y=\"" << height - mb + 18
       << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n"
       << "<text x=\"" << ml - 8 << "\" y=\"" << sy(yv) + 4
       << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(yv) << "</text>\n"
       << "<line x1=\"" << ml << "\" y1=\"" << sy(yv) << "\" x2=\"" << width - mr << "\" y2=\""
       << sy(yv) << "\" stroke=\"#dddddd\"/>\n";
  }
  os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < x.size(); ++i) os << sx(x[i]) << "," << sy(y[i]) << " ";
  os << "\"/>\n"
     << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 12
     << "\" font-size=\"13\" text-anchor=\"middle\">" << x_label << "</text>\n"
     << "<text x=\"16\" y=\"" << (mt + height - mb) / 2
     << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (mt + height - mb) / 2 << ")\">" << y_label << "</text>\n"
     << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"18\" font-size=\"14\" "
     << "text-anchor=\"middle\">" << y_label << " vs " << x_label << "</text>\n</svg>\n";
  check(os.good(), cat("write failed: ", path));
}

std::vector<std::string> plot_csv(const std::string& csv_path, const std::string& out_dir) {
  std::ifstream is(csv_path);
  check(is.good(), cat("cannot open csv: ", csv_path));
  std::string line;
  check(static_cast<bool>(std::getline(is, line)), cat(csv_path, ": empty file"));
  std::vector<std::string> headers;
  {
    std::istringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) headers.push_back(tok);
  }
  check(headers.size() >= 2, cat(csv_path, ": need at least two columns"));
  std::vector<std::vector<double>> cols(headers.size());
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    std::size_t i = 0;
    while (std::getline(ss, tok, ',')) {
      check(i < cols.size(), cat(csv_path, ":", lineno, ": too many columns"));
      try {
        cols[i].push_back(tok.empty() ? std::nan("") : std::stod(tok));
      } catch (...) {
        fail(cat(csv_path, ":", lineno, ": non-numeric cell '", tok, "'"));
      }
      ++i;
    }
    check(i == cols.size(), cat(csv_path, ":", lineno, ": too few columns"));
  }
  check(!cols[0].empty(), cat(csv_path, ": no data rows"));

  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  for (std::size_t c = 1; c < headers.size(); ++c) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < cols[0].size(); ++i) {
      if (!std::isnan(cols[c][i])) {
        xs.push_back(cols[0][i]);
        ys.push_back(cols[c][i]);
      }
    }
    if (xs.empty()) continue;
    const std::string path = out_dir + "/" + sanitize(headers[c]) + ".svg";
    write_line_chart_svg(path, headers[0], headers[c], xs, ys);
    written.push_back(path);
  }
  return written;
}

}  // namespace avsync
