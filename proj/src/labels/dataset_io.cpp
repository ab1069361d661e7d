#include "complearn/labels/dataset_io.hpp"

#include "complearn/error.hpp"

#include <json.hpp>

#include <bit>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace complearn::labels {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "dataset blob I/O assumes a little-endian host");

namespace {

json evidence_to_json(const LabelEvidence& ev) {
  if (const auto* o = std::get_if<Ordinary>(&ev)) return json{{"y", o->label}};
  if (const auto* c = std::get_if<Complementary>(&ev)) return json{{"not", c->labels}};
  return nullptr;
}

LabelEvidence evidence_from_json(const json& j) {
  if (j.is_null()) return Unlabeled{};
  if (j.contains("y")) return Ordinary{j.at("y").get<int>()};
  if (j.contains("not")) return Complementary{j.at("not").get<std::vector<int>>()};
  throw InvalidArgument("unrecognized evidence entry: " + j.dump());
}

}  // namespace

void write_dataset(std::ostream& out, const ComplementaryDataset& ds) {
  json header;
  header["format"] = "complearn-dataset";
  header["n"] = ds.size();
  header["d"] = ds.dim();
  header["K"] = ds.classes();
  header["r_l"] = ds.labeled_ratio();
  header["r_c"] = ds.complementary_ratio();
  header["seed"] = ds.seed();
  header["labels_per_example"] = ds.labels_per_example();
  json ev = json::array();
  for (const auto& e : ds.evidence()) ev.push_back(evidence_to_json(e));
  header["evidence"] = std::move(ev);
  header["ground_truth"] = ds.ground_truth(EvaluationKey{});
  if (ds.transition()) {
    json rows = json::array();
    const auto& m = ds.transition()->entries();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(std::move(row));
    }
    header["transition"] = std::move(rows);
  }
  out << header.dump() << '\n';
  const auto& x = ds.features();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double v = x(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
  if (!out) throw Error("failed writing dataset");
}

ComplementaryDataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("dataset header missing", 0);
  const std::size_t blob_start = line.size() + 1;
  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("dataset header is not JSON: ") + e.what(), e.byte);
  }
  const auto n = header.at("n").get<Eigen::Index>();
  const auto d = header.at("d").get<Eigen::Index>();
  const int k = header.at("K").get<int>();
  Eigen::MatrixXd x(n, d);
  std::size_t offset = blob_start;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      double v;
      in.read(reinterpret_cast<char*>(&v), sizeof v);
      if (in.gcount() != static_cast<std::streamsize>(sizeof v)) {
        throw ParseError("dataset feature blob truncated", offset + static_cast<std::size_t>(in.gcount()));
      }
      offset += sizeof v;
      x(i, j) = v;
    }
  }
  std::vector<LabelEvidence> evidence;
  for (const auto& e : header.at("evidence")) evidence.push_back(evidence_from_json(e));
  ComplementaryDataset ds(std::move(x), std::move(evidence), header.at("ground_truth").get<std::vector<int>>(), k,
                          header.at("r_l").get<double>(), header.at("r_c").get<double>(),
                          header.at("seed").get<std::uint64_t>());
  ds.set_labels_per_example(header.value("labels_per_example", 1));
  if (header.contains("transition")) {
    Eigen::MatrixXd m(k, k);
    const auto& rows = header.at("transition");
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) m(i, j) = rows.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(j)).get<double>();
    }
    ds.set_transition(TransitionMatrix(std::move(m)));
  }
  return ds;
}

void save_dataset(const std::filesystem::path& path, const ComplementaryDataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open dataset for writing: " + path.string());
  write_dataset(out, ds);
}

ComplementaryDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset: " + path.string());
  return read_dataset(in);
}

}  // namespace complearn::labels
