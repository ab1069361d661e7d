#pragma once

#include "complearn/labels/dataset.hpp"

#include <filesystem>
#include <iosfwd>

namespace complearn::labels {

// One line of JSON (n, d, K, r_l, r_c, seed, evidence, ...) terminated by '\n',
// then n*d little-endian f64 features in row-major order.
void write_dataset(std::ostream& out, const ComplementaryDataset& ds);
ComplementaryDataset read_dataset(std::istream& in);

void save_dataset(const std::filesystem::path& path, const ComplementaryDataset& ds);
ComplementaryDataset load_dataset(const std::filesystem::path& path);

}  // namespace complearn::labels
