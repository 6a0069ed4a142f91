#include "arbolatent/snapshot.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "arbolatent/error.hpp"
#include "arbolatent/model.hpp"

namespace arbolatent {

using nlohmann::json;

namespace {

constexpr const char* kMagic = "ARBOLATENT SNAPSHOT 1";

void write_f64_le(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

double read_f64_le(std::istream& in) {
  char bytes[8];
  in.read(bytes, 8);
  if (!in) throw ValidationError("snapshot truncated while reading values");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace

void save_model(const std::string& path, const ParamStore& params, const EmbeddingTable& table,
                const RunConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write snapshot: " + path);

  json header;
  header["config"] = json::parse(cfg.to_json());
  header["vocab"] = table.words();
  header["embedding_dim"] = table.dimension();
  json plist = json::array();
  for (const auto& [name, p] : params.params()) {
    json entry;
    entry["name"] = name;
    entry["shape"] = p.value.shape();
    plist.push_back(entry);
  }
  header["params"] = plist;

  out << kMagic << '\n' << header.dump() << '\n';
  for (const auto& [name, p] : params.params()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) write_f64_le(out, p.value[i]);
  }
  if (!out) throw ValidationError("write failed for snapshot: " + path);
}

ModelSnapshot load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open snapshot: " + path);
  std::string magic, header_line;
  if (!std::getline(in, magic) || magic != kMagic) {
    throw ValidationError("not a model snapshot: " + path);
  }
  if (!std::getline(in, header_line)) throw ValidationError("snapshot missing header: " + path);
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::exception& e) {
    throw ValidationError("snapshot header is malformed JSON: " + std::string(e.what()));
  }

  ModelSnapshot snap;
  snap.config.apply_json(header.at("config").dump());
  auto vocab = header.at("vocab").get<std::vector<std::string>>();
  const auto dim = header.at("embedding_dim").get<std::size_t>();
  snap.table = EmbeddingTable::from_words(std::move(vocab), dim);

  for (const auto& entry : header.at("params")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    Tensor value{shape};
    for (std::size_t i = 0; i < value.size(); ++i) value[i] = read_f64_le(in);
    snap.params.declare_external(name, std::move(value));
  }

  // shape check: the stored parameters must match what the stored config declares
  ParamStore expected;
  declare_model_params(expected, snap.config, snap.table);
  if (expected.params().size() != snap.params.params().size()) {
    throw ValidationError("snapshot/config mismatch: parameter set differs");
  }
  for (const auto& [name, p] : expected.params()) {
    if (!snap.params.contains(name)) {
      throw ValidationError("snapshot/config mismatch: missing parameter " + name);
    }
    if (snap.params.value(name).shape() != p.value.shape()) {
      throw ValidationError("snapshot/config mismatch: shape of " + name);
    }
  }
  return snap;
}

}  // namespace arbolatent
