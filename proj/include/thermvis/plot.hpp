#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "thermvis/error.hpp"
#include "thermvis/evaluation.hpp"

namespace thermvis {

struct LabeledCurve {
  std::string label;
  APReport report;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

}  // namespace detail

/// Renders precision (y) against recall (x) for every curve as one SVG figure.
inline std::string render_pr_svg(const std::vector<LabeledCurve>& curves) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  constexpr double kW = 480, kH = 400, kLeft = 60, kTop = 20, kPlot = 320;
  std::ostringstream s;
  s << std::fixed << std::setprecision(2);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kPlot << "\" height=\"" << kPlot
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 10; i += 2) {
    const double t = i / 10.0;
    const double x = kLeft + t * kPlot;
    const double y = kTop + (1 - t) * kPlot;
    s << "<text x=\"" << x << "\" y=\"" << kTop + kPlot + 16 << "\" text-anchor=\"middle\">" << t
      << "</text>\n";
    s << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << t << "</text>\n";
  }
  s << "<text x=\"" << kLeft + kPlot / 2 << "\" y=\"" << kTop + kPlot + 34
    << "\" text-anchor=\"middle\">Recall</text>\n";
  s << "<text transform=\"translate(16," << kTop + kPlot / 2
    << ") rotate(-90)\" text-anchor=\"middle\">Precision</text>\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const char* color = kColors[c % std::size(kColors)];
    s << "<polyline class=\"curve\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : curves[c].report.curve.points) {
      s << kLeft + p.recall * kPlot << ',' << kTop + (1 - p.precision) * kPlot << ' ';
    }
    s << "\"/>\n";
    const double ly = kTop + 16 + 18 * static_cast<double>(c);
    s << "<line x1=\"" << kLeft + kPlot + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kLeft + kPlot + 30
      << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text class=\"label\" x=\"" << kLeft + kPlot + 34 << "\" y=\"" << ly << "\">"
      << detail::xml_escape(curves[c].label) << " (AP " << std::setprecision(3) << curves[c].report.ap
      << std::setprecision(2) << ")</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

inline void write_pr_svg(const std::filesystem::path& path, const std::vector<LabeledCurve>& curves) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << render_pr_svg(curves);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
}

}  // namespace thermvis
