// Copyright 2026 The mltts Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mltts/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mltts::analysis {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 480;
constexpr int kMargin = 48;

std::string escape_xml(const std::string& s) {
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

const char* color_for(text::Language lang) {
  switch (lang) {
    case text::Language::MAN: return "#1f77b4";
    case text::Language::ENG: return "#d62728";
    default: return "#7f7f7f";
  }
}

void open_svg(std::ostringstream& os, const std::string& title) {
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  os << "  <rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" fill=\"white\"/>\n";
  os << "  <text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
     << escape_xml(title) << "</text>\n";
  os << "  <rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kWidth - 2 * kMargin
     << "\" height=\"" << kHeight - 2 * kMargin
     << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
}

} // namespace

std::string scatter_svg(const Array<double>& points2d,
                        const std::vector<text::PhonemeSymbol>& labels,
                        const std::string& title) {
  if (points2d.numel() > 0 && (points2d.ndim() != 2 || points2d.cols() != 2))
    throw DimensionError("scatter_svg: expected [n,2] points, got " + shape_str(points2d.shape));
  std::ostringstream os;
  open_svg(os, title);

  const int n = points2d.numel() > 0 ? points2d.rows() : 0;
  if (n > 0) {
    double xmin = points2d.at(0, 0), xmax = xmin, ymin = points2d.at(0, 1), ymax = ymin;
    for (int i = 0; i < n; ++i) {
      xmin = std::min(xmin, points2d.at(i, 0));
      xmax = std::max(xmax, points2d.at(i, 0));
      ymin = std::min(ymin, points2d.at(i, 1));
      ymax = std::max(ymax, points2d.at(i, 1));
    }
    const double xspan = std::max(xmax - xmin, 1e-9);
    const double yspan = std::max(ymax - ymin, 1e-9);
    const double plot_w = kWidth - 2.0 * kMargin - 16.0;
    const double plot_h = kHeight - 2.0 * kMargin - 16.0;
    for (int i = 0; i < n; ++i) {
      const double px = kMargin + 8 + (points2d.at(i, 0) - xmin) / xspan * plot_w;
      const double py = kHeight - kMargin - 8 - (points2d.at(i, 1) - ymin) / yspan * plot_h;
      const text::Language lang =
          i < static_cast<int>(labels.size()) ? labels[static_cast<size_t>(i)].language
                                              : text::Language::SPECIAL;
      os << "  <circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"4\" fill=\"" << color_for(lang)
         << "\" fill-opacity=\"0.8\">";
      if (i < static_cast<int>(labels.size()))
        os << "<title>" << escape_xml(labels[static_cast<size_t>(i)].label) << "</title>";
      os << "</circle>\n";
    }
  }

  // legend
  os << "  <circle cx=\"" << kWidth - kMargin - 110 << "\" cy=\"" << kMargin + 14
     << "\" r=\"5\" fill=\"" << color_for(text::Language::MAN) << "\"/>\n";
  os << "  <text x=\"" << kWidth - kMargin - 100 << "\" y=\"" << kMargin + 18
     << "\" font-size=\"12\">Mandarin</text>\n";
  os << "  <circle cx=\"" << kWidth - kMargin - 110 << "\" cy=\"" << kMargin + 32
     << "\" r=\"5\" fill=\"" << color_for(text::Language::ENG) << "\"/>\n";
  os << "  <text x=\"" << kWidth - kMargin - 100 << "\" y=\"" << kMargin + 36
     << "\" font-size=\"12\">English</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::string alignment_svg(const std::vector<tts::AttentionTrace<float>>& traces,
                          const std::string& title) {
  std::ostringstream os;
  open_svg(os, title);
  const int steps = static_cast<int>(traces.size());
  const int t_len = steps > 0 ? static_cast<int>(traces[0].weights.numel()) : 0;
  if (steps > 0 && t_len > 0) {
    const double cell_w = (kWidth - 2.0 * kMargin) / steps;
    const double cell_h = (kHeight - 2.0 * kMargin) / t_len;
    for (int i = 0; i < steps; ++i) {
      for (int j = 0; j < t_len; ++j) {
        const double w = std::clamp(
            static_cast<double>(traces[static_cast<size_t>(i)].weights.v[static_cast<size_t>(j)]),
            0.0, 1.0);
        const int shade = static_cast<int>(std::lround(255.0 * (1.0 - w)));
        os << "  <rect class=\"cell\" x=\"" << kMargin + i * cell_w << "\" y=\""
           << kHeight - kMargin - (j + 1) * cell_h << "\" width=\"" << cell_w + 0.5
           << "\" height=\"" << cell_h + 0.5 << "\" fill=\"rgb(" << shade << "," << shade << ","
           << shade << ")\"/>\n";
      }
    }
  }
  os << "  <text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
     << "\" text-anchor=\"middle\" font-size=\"12\">decoder step</text>\n";
  os << "  <text x=\"16\" y=\"" << kHeight / 2
     << "\" font-size=\"12\" transform=\"rotate(-90 16 " << kHeight / 2
     << ")\">encoder position</text>\n";
  os << "</svg>\n";
  return os.str();
}

void write_svg(const std::string& path, const std::string& svg) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write SVG: " + path);
  f << svg;
  if (!f) throw IoError("failed writing SVG: " + path);
}

} // namespace mltts::analysis
