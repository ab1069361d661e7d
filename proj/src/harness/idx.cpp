#include "complearn/harness/idx.hpp"

#include "complearn/error.hpp"

#include <array>
#include <fstream>
#include <istream>

namespace complearn::harness {

namespace {

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint32_t u32(const char* what) {
    std::array<unsigned char, 4> b{};
    bytes(b.data(), b.size(), what);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
  }

  void bytes(unsigned char* out, std::size_t n, const char* what) {
    in_.read(reinterpret_cast<char*>(out), static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got != n) throw ParseError(std::string("IDX file truncated while reading ") + what, offset_ + got);
    offset_ += n;
  }

  std::size_t offset() const { return offset_; }

 private:
  std::istream& in_;
  std::size_t offset_ = 0;
};

}  // namespace

Eigen::MatrixXd read_idx_images(std::istream& in) {
  Reader r(in);
  const std::uint32_t magic = r.u32("magic");
  if (magic != kIdxImageMagic) throw ParseError("bad IDX image magic " + std::to_string(magic), 0);
  const std::uint32_t count = r.u32("image count");
  const std::uint32_t rows = r.u32("row count");
  const std::uint32_t cols = r.u32("column count");
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(pixels));
  std::vector<unsigned char> buf(pixels);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (pixels > 0) r.bytes(buf.data(), pixels, "pixel data");
    for (std::size_t j = 0; j < pixels; ++j) out(i, static_cast<Eigen::Index>(j)) = buf[j] / 255.0;
  }
  return out;
}

std::vector<int> read_idx_labels(std::istream& in) {
  Reader r(in);
  const std::uint32_t magic = r.u32("magic");
  if (magic != kIdxLabelMagic) throw ParseError("bad IDX label magic " + std::to_string(magic), 0);
  const std::uint32_t count = r.u32("label count");
  std::vector<unsigned char> buf(count);
  if (count > 0) r.bytes(buf.data(), count, "label data");
  return {buf.begin(), buf.end()};
}

LabeledData load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream images(images_path, std::ios::binary);
  if (!images) throw Error("cannot open IDX image file " + images_path);
  std::ifstream labels(labels_path, std::ios::binary);
  if (!labels) throw Error("cannot open IDX label file " + labels_path);
  LabeledData out{read_idx_images(images), read_idx_labels(labels)};
  if (static_cast<std::size_t>(out.features.rows()) != out.labels.size()) {
    throw ParseError("IDX label count " + std::to_string(out.labels.size()) + " differs from image count " +
                         std::to_string(out.features.rows()),
                     4);
  }
  return out;
}

}  // namespace complearn::harness
