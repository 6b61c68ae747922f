#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mfld/error.hpp"
#include "mfld/tensor_io.hpp"

namespace mfld {

static_assert(std::endian::native == std::endian::little,
              "store payloads are little-endian; big-endian hosts are not supported");

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestName = "manifest.json";

bool valid_layer_name(const std::string& name) {
  if (name.empty() || name == "." || name == "..") return false;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

json manifest_to_json(const Manifest& m) {
  json examples = json::array();
  for (const auto& e : m.examples) {
    json entry = {{"id", e.id}, {"labels", e.labels}};
    if (e.center_frame) entry["center_frame"] = *e.center_frame;
    examples.push_back(std::move(entry));
  }
  return {{"version", m.version}, {"examples", std::move(examples)}, {"layers", m.layers}};
}

Manifest manifest_from_json(const json& j) {
  Manifest m;
  try {
    m.version = j.at("version").get<int>();
    for (const auto& entry : j.at("examples")) {
      ExampleEntry e;
      e.id = entry.at("id").get<std::string>();
      if (entry.contains("labels")) {
        for (const auto& [k, v] : entry.at("labels").items()) {
          e.labels[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
      }
      if (entry.contains("center_frame") && !entry.at("center_frame").is_null()) {
        e.center_frame = entry.at("center_frame").get<std::int64_t>();
      }
      m.examples.push_back(std::move(e));
    }
    m.layers = j.at("layers").get<std::vector<std::string>>();
  } catch (const json::exception& ex) {
    fail(ErrorCode::InvalidStore, std::string("malformed manifest: ") + ex.what());
  }
  if (m.version != 1) {
    fail(ErrorCode::InvalidStore, "unsupported manifest version " + std::to_string(m.version));
  }
  return m;
}

Layer read_layer(const fs::path& file, const std::string& name) {
  std::ifstream in(file, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + file.string());

  char magic[8];
  in.read(magic, sizeof magic);
  if (in.gcount() != static_cast<std::streamsize>(sizeof magic)) {
    fail(ErrorCode::Truncated, file.string() + ": header shorter than magic");
  }
  if (std::memcmp(magic, kStoreMagic, sizeof magic) != 0) {
    fail(ErrorCode::BadMagic, file.string());
  }
  unsigned char dtype_code = 0;
  std::uint64_t dims[3] = {0, 0, 0};
  in.read(reinterpret_cast<char*>(&dtype_code), 1);
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!in) fail(ErrorCode::Truncated, file.string() + ": incomplete header");
  if (dtype_code > 1) {
    fail(ErrorCode::InvalidStore, file.string() + ": unknown dtype code " + std::to_string(dtype_code));
  }

  Layer layer;
  layer.name = name;
  layer.shape = {dims[0], dims[1], dims[2]};
  if (layer.shape.examples == 0 || layer.shape.timesteps == 0 || layer.shape.features == 0) {
    fail(ErrorCode::InvalidStore, file.string() + ": zero-sized shape");
  }
  const std::uint64_t count = layer.shape.count();
  if (count / layer.shape.examples / layer.shape.timesteps != layer.shape.features) {
    fail(ErrorCode::InvalidStore, file.string() + ": shape overflows");
  }

  auto read_payload = [&](auto& buffer) {
    using T = typename std::decay_t<decltype(buffer)>::value_type;
    const auto file_size = fs::file_size(file);
    if (file_size < kLayerHeaderBytes + count * sizeof(T)) {
      fail(ErrorCode::Truncated, file.string() + ": payload shorter than shape implies");
    }
    buffer.resize(count);
    in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(count * sizeof(T)));
    if (!in) fail(ErrorCode::Truncated, file.string());
    if (file_size != kLayerHeaderBytes + count * sizeof(T)) {
      fail(ErrorCode::InvalidStore, file.string() + ": trailing bytes after payload");
    }
  };
  if (dtype_code == 0) {
    std::vector<float> buffer;
    read_payload(buffer);
    layer.data = std::move(buffer);
  } else {
    std::vector<double> buffer;
    read_payload(buffer);
    layer.data = std::move(buffer);
  }
  return layer;
}

}  // namespace

std::size_t Layer::size() const {
  return std::visit([](const auto& v) { return v.size(); }, data);
}

double Layer::at(std::uint64_t example, std::uint64_t timestep, std::uint64_t feature) const {
  const std::uint64_t i = (example * shape.timesteps + timestep) * shape.features + feature;
  return std::visit([i](const auto& v) { return static_cast<double>(v[i]); }, data);
}

std::uint64_t Layer::payload_bytes() const {
  return shape.count() * (dtype() == DType::F32 ? 4 : 8);
}

fs::path layer_file_name(const std::string& layer_name) { return layer_name + ".bin"; }

void ActivationStore::validate() const {
  require(!layers.empty(), ErrorCode::InvalidStore, "store has no layers");
  require(layers.size() == manifest.layers.size(), ErrorCode::ManifestMismatch,
          "manifest lists " + std::to_string(manifest.layers.size()) + " layers, store has " +
              std::to_string(layers.size()));

  std::set<std::string> ids;
  for (const auto& e : manifest.examples) {
    require(!e.id.empty(), ErrorCode::ManifestMismatch, "example with empty id");
    require(ids.insert(e.id).second, ErrorCode::ManifestMismatch, "duplicate example id " + e.id);
  }

  std::set<std::string> names;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    require(valid_layer_name(l.name), ErrorCode::InvalidStore, "invalid layer name '" + l.name + "'");
    require(names.insert(l.name).second, ErrorCode::InvalidStore, "duplicate layer " + l.name);
    require(manifest.layers[i] == l.name, ErrorCode::ManifestMismatch,
            "manifest layer order differs at position " + std::to_string(i));
    require(l.shape.examples > 0 && l.shape.timesteps > 0 && l.shape.features > 0,
            ErrorCode::InvalidStore, "layer " + l.name + " has a zero-sized shape");
    require(l.size() == l.shape.count(), ErrorCode::InvalidStore,
            "layer " + l.name + " payload does not match its shape");
    require(l.shape.examples == manifest.examples.size(), ErrorCode::ManifestMismatch,
            "layer " + l.name + " has " + std::to_string(l.shape.examples) + " examples, manifest has " +
                std::to_string(manifest.examples.size()));
  }
}

const Layer& ActivationStore::layer(const std::string& name) const {
  for (const auto& l : layers) {
    if (l.name == name) return l;
  }
  fail(ErrorCode::UnknownLayer, name);
}

void write_store(const ActivationStore& store, const fs::path& dir) {
  store.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());

  for (const Layer& layer : store.layers) {
    const fs::path file = dir / layer_file_name(layer.name);
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + file.string());
    out.write(kStoreMagic, sizeof kStoreMagic);
    const auto code = static_cast<unsigned char>(layer.dtype());
    out.write(reinterpret_cast<const char*>(&code), 1);
    put_u64(out, layer.shape.examples);
    put_u64(out, layer.shape.timesteps);
    put_u64(out, layer.shape.features);
    std::visit(
        [&out](const auto& v) {
          out.write(reinterpret_cast<const char*>(v.data()),
                    static_cast<std::streamsize>(v.size() * sizeof(v[0])));
        },
        layer.data);
    require(static_cast<bool>(out), ErrorCode::Io, "write failed for " + file.string());
  }

  std::ofstream out(dir / kManifestName, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write manifest in " + dir.string());
  out << manifest_to_json(store.manifest).dump(1) << '\n';
  require(static_cast<bool>(out), ErrorCode::Io, "manifest write failed");
}

ActivationStore read_store(const fs::path& dir) {
  std::ifstream in(dir / kManifestName);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + (dir / kManifestName).string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    fail(ErrorCode::InvalidStore, std::string("manifest is not valid JSON: ") + ex.what());
  }

  ActivationStore store;
  store.manifest = manifest_from_json(j);
  for (const auto& name : store.manifest.layers) {
    require(valid_layer_name(name), ErrorCode::InvalidStore, "invalid layer name '" + name + "'");
    store.layers.push_back(read_layer(dir / layer_file_name(name), name));
  }
  store.validate();
  return store;
}

ActivationStore import_csv(const fs::path& csv, const std::string& layer_name,
                           const std::string& label_key) {
  std::ifstream in(csv);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + csv.string());

  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
      cells.push_back(cell);
    }
    return cells;
  };

  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::InvalidArgument, "empty CSV");
  const auto header = split(line);
  require(header.size() >= 2 && header[0] == "label", ErrorCode::InvalidArgument,
          "CSV header must be label,f0,f1,...");
  const std::size_t features = header.size() - 1;

  std::vector<double> payload;
  Manifest manifest;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    require(cells.size() == header.size(), ErrorCode::InvalidArgument,
            "CSV row " + std::to_string(row + 2) + " has " + std::to_string(cells.size()) + " cells");
    for (std::size_t c = 1; c < cells.size(); ++c) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cells[c], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      require(used == cells[c].size() && used > 0, ErrorCode::InvalidArgument,
              "CSV row " + std::to_string(row + 2) + ": bad number '" + cells[c] + "'");
      payload.push_back(v);
    }
    ExampleEntry e;
    e.id = "row" + std::to_string(row);
    e.labels[label_key] = cells[0];
    manifest.examples.push_back(std::move(e));
    ++row;
  }
  require(row > 0, ErrorCode::InvalidArgument, "CSV has no data rows");

  Layer layer;
  layer.name = layer_name;
  layer.shape = {row, 1, features};
  layer.data = std::move(payload);
  manifest.layers = {layer_name};

  ActivationStore store{{std::move(layer)}, std::move(manifest)};
  store.validate();
  return store;
}

}  // namespace mfld
