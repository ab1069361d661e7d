#pragma once

#include "complearn/diff/graph.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace complearn::diff {

// Container layout, all little-endian:
//   "CCGN" | u32 version | repeated { u32 name_len | name | u64 rows | u64 cols | f64[rows*cols] row-major }
// Tensors run to end of file.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Matrix value;
};

void write_checkpoint(std::ostream& out, const std::vector<const Parameter*>& params);
std::vector<NamedTensor> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const std::vector<const Parameter*>& params);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

/// Copy tensors into parameters by name. Every parameter must be present with a matching shape.
void restore(const std::vector<NamedTensor>& tensors, const std::vector<Parameter*>& params);

}  // namespace complearn::diff
