#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace complearn::harness {

struct SamplePoint {
  bool generated = false;
  double x = 0.0;
  double y = 0.0;
  int label = 0;
};

// Header "kind,x,y,label"; kind is "real" or "generated". Other dimensions use x0..x{d-1}.
void write_samples_csv(const std::string& path, const Eigen::MatrixXd& real, const std::vector<int>& real_labels,
                       const Eigen::MatrixXd& generated, const std::vector<int>& generated_labels);
// Throws InvalidArgument for anything but two coordinate columns.
std::vector<SamplePoint> read_samples_csv(const std::string& path);

// Palette entry for a class; cycles hues past the fixed palette.
std::string class_color(int label);

// Real points as circles, generated points as crosses, one legend entry per class.
std::string render_scatter_svg(const std::vector<SamplePoint>& points, int classes, const std::string& title = {});
void emit_scatter_svg(const std::string& samples_csv, const std::string& svg_path, int classes = 0);

}  // namespace complearn::harness
