#include "complearn/diff/checkpoint.hpp"

#include "complearn/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

namespace complearn::diff {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'C', 'C', 'G', 'N'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename T>
  T get(const char* what) {
    T v;
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (in_.gcount() != static_cast<std::streamsize>(sizeof(T))) {
      throw ParseError(std::string("truncated checkpoint while reading ") + what, offset_ + in_.gcount());
    }
    offset_ += sizeof(T);
    return v;
  }

  void bytes(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) {
      throw ParseError(std::string("truncated checkpoint while reading ") + what, offset_ + in_.gcount());
    }
    offset_ += n;
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
  std::size_t offset() const { return offset_; }

 private:
  std::istream& in_;
  std::size_t offset_ = 0;
};

}  // namespace

void write_checkpoint(std::ostream& out, const std::vector<const Parameter*>& params) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  for (const Parameter* p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p->value.cols()));
    for (Index r = 0; r < p->value.rows(); ++r) {
      for (Index c = 0; c < p->value.cols(); ++c) put<double>(out, p->value(r, c));
    }
  }
  if (!out) throw Error("failed writing checkpoint");
}

std::vector<NamedTensor> read_checkpoint(std::istream& in) {
  Reader r(in);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw ParseError("bad checkpoint magic", 0);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 4);
  }
  std::vector<NamedTensor> out;
  while (!r.at_end()) {
    const auto len = r.get<std::uint32_t>("name length");
    std::string name(len, '\0');
    r.bytes(name.data(), len, "name");
    const auto rows = r.get<std::uint64_t>("rows");
    const auto cols = r.get<std::uint64_t>("cols");
    if (rows > (1ULL << 32) || cols > (1ULL << 32)) throw ParseError("implausible tensor shape", r.offset());
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) m(i, j) = r.get<double>("payload");
    }
    out.push_back({std::move(name), std::move(m)});
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<const Parameter*>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open checkpoint for writing: " + path.string());
  write_checkpoint(out, params);
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  return read_checkpoint(in);
}

void restore(const std::vector<NamedTensor>& tensors, const std::vector<Parameter*>& params) {
  std::map<std::string, const Matrix*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t.value;
  for (Parameter* p : params) {
    const auto it = by_name.find(p->name);
    if (it == by_name.end()) throw InvalidArgument("checkpoint lacks tensor '" + p->name + "'");
    if (it->second->rows() != p->value.rows() || it->second->cols() != p->value.cols()) {
      throw ShapeError("checkpoint tensor '" + p->name + "' has the wrong shape");
    }
    p->value = *it->second;
    p->zero_grad();
  }
}

}  // namespace complearn::diff
