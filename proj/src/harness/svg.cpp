#include "complearn/harness/svg.hpp"

#include "complearn/error.hpp"
#include "complearn/harness/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace complearn::harness {

namespace {

void write_rows(std::ostream& out, const char* kind, const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw ShapeError("samples and labels differ in length");
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out << kind;
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << ',' << csv_number(x(i, j));
    out << ',' << labels[static_cast<std::size_t>(i)] << '\n';
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

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

}  // namespace

void write_samples_csv(const std::string& path, const Eigen::MatrixXd& real, const std::vector<int>& real_labels,
                       const Eigen::MatrixXd& generated, const std::vector<int>& generated_labels) {
  const Eigen::Index d = real.rows() > 0 ? real.cols() : generated.cols();
  if (generated.rows() > 0 && real.rows() > 0 && generated.cols() != real.cols()) {
    throw ShapeError("real and generated samples differ in dimension");
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "kind";
  if (d == 2) {
    out << ",x,y";
  } else {
    for (Eigen::Index j = 0; j < d; ++j) out << ",x" << j;
  }
  out << ",label\n";
  write_rows(out, "real", real, real_labels);
  write_rows(out, "generated", generated, generated_labels);
}

std::vector<SamplePoint> read_samples_csv(const std::string& path) {
  const CsvTable t = read_csv_file(path);
  if (t.header != std::vector<std::string>{"kind", "x", "y", "label"}) {
    throw InvalidArgument("samples in " + path + " are not 2-D; scatter plots only support 2-D data, skip plotting");
  }
  std::vector<SamplePoint> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    if (row[0] != "real" && row[0] != "generated") throw InvalidArgument("unknown sample kind '" + row[0] + "'");
    out.push_back({row[0] == "generated", parse_number(row[1]), parse_number(row[2]), std::stoi(row[3])});
  }
  return out;
}

std::string class_color(int label) {
  static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  constexpr int kSize = static_cast<int>(std::size(kPalette));
  if (label >= 0 && label < kSize) return kPalette[label];
  const int hue = (label * 137) % 360;
  return "hsl(" + std::to_string(hue < 0 ? hue + 360 : hue) + ",65%,45%)";
}

std::string render_scatter_svg(const std::vector<SamplePoint>& points, int classes, const std::string& title) {
  constexpr double kWidth = 640, kHeight = 640, kMargin = 40, kLegend = 120;
  double xmin = -1, xmax = 1, ymin = -1, ymax = 1;
  if (!points.empty()) {
    xmin = xmax = points.front().x;
    ymin = ymax = points.front().y;
    for (const auto& p : points) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
  }
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-9});
  const double scale = (kWidth - 2 * kMargin) / span;
  auto sx = [&](double x) { return kMargin + (x - xmin) * scale; };
  auto sy = [&](double y) { return kHeight - kMargin - (y - ymin) * scale; };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth + kLegend << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth + kLegend << ' ' << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) {
    svg << "<text x=\"" << kMargin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << escape_xml(title)
        << "</text>\n";
  }
  svg << "<g id=\"real\" fill-opacity=\"0.5\">\n";
  for (const auto& p : points) {
    if (p.generated) continue;
    svg << "<circle cx=\"" << fmt(sx(p.x)) << "\" cy=\"" << fmt(sy(p.y)) << "\" r=\"2.5\" fill=\""
        << class_color(p.label) << "\"/>\n";
  }
  svg << "</g>\n<g id=\"generated\" stroke-width=\"1.2\">\n";
  for (const auto& p : points) {
    if (!p.generated) continue;
    const double cx = sx(p.x), cy = sy(p.y);
    svg << "<path d=\"M" << fmt(cx - 3) << ' ' << fmt(cy - 3) << "L" << fmt(cx + 3) << ' ' << fmt(cy + 3) << "M"
        << fmt(cx - 3) << ' ' << fmt(cy + 3) << "L" << fmt(cx + 3) << ' ' << fmt(cy - 3) << "\" stroke=\""
        << class_color(p.label) << "\"/>\n";
  }
  svg << "</g>\n<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (int k = 0; k < classes; ++k) {
    const double y = kMargin + 18.0 * k;
    svg << "<rect class=\"legend-entry\" x=\"" << kWidth << "\" y=\"" << fmt(y - 9) << "\" width=\"10\" height=\"10\" fill=\""
        << class_color(k) << "\"/><text x=\"" << kWidth + 16 << "\" y=\"" << fmt(y) << "\">class " << k
        << "</text>\n";
  }
  const double note_y = kMargin + 18.0 * classes + 12;
  svg << "<text x=\"" << kWidth << "\" y=\"" << fmt(note_y) << "\">o real</text>\n"
      << "<text x=\"" << kWidth << "\" y=\"" << fmt(note_y + 16) << "\">x generated</text>\n"
      << "</g>\n</svg>\n";
  return svg.str();
}

void emit_scatter_svg(const std::string& samples_csv, const std::string& svg_path, int classes) {
  const auto points = read_samples_csv(samples_csv);
  if (classes <= 0) {
    for (const auto& p : points) classes = std::max(classes, p.label + 1);
  }
  std::ofstream out(svg_path);
  if (!out) throw Error("cannot write " + svg_path);
  out << render_scatter_svg(points, classes);
}

}  // namespace complearn::harness
