#pragma once

#include "complearn/harness/mixture.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace complearn::harness {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// Images as rows of pixels scaled to [0, 1].
Eigen::MatrixXd read_idx_images(std::istream& in);
std::vector<int> read_idx_labels(std::istream& in);

// Pairs an image file with its label file; counts must agree.
LabeledData load_idx(const std::string& images_path, const std::string& labels_path);

}  // namespace complearn::harness
