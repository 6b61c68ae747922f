#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace mfld {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr char kStoreMagic[8] = {'M', 'F', 'L', 'D', 'S', 'T', 'R', '1'};
inline constexpr std::size_t kLayerHeaderBytes = 8 + 1 + 3 * 8;

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

struct LayerShape {
  std::uint64_t examples = 0;
  std::uint64_t timesteps = 0;
  std::uint64_t features = 0;

  std::uint64_t count() const { return examples * timesteps * features; }
  bool operator==(const LayerShape&) const = default;
};

// One dense (examples x timesteps x features) tensor, row-major with the
// example index slowest. f32 layers keep their payload in single precision.
struct Layer {
  std::string name;
  LayerShape shape;
  std::variant<std::vector<float>, std::vector<double>> data;

  DType dtype() const { return data.index() == 0 ? DType::F32 : DType::F64; }
  std::size_t size() const;
  double at(std::uint64_t example, std::uint64_t timestep, std::uint64_t feature) const;
  std::uint64_t payload_bytes() const;

  bool operator==(const Layer&) const = default;
};

struct ExampleEntry {
  std::string id;
  std::map<std::string, std::string> labels;
  std::optional<std::int64_t> center_frame;

  bool operator==(const ExampleEntry&) const = default;
};

struct Manifest {
  int version = 1;
  std::vector<ExampleEntry> examples;
  std::vector<std::string> layers;

  bool operator==(const Manifest&) const = default;
};

struct ActivationStore {
  std::vector<Layer> layers;
  Manifest manifest;

  // Throws ManifestMismatch / InvalidStore when the invariants do not hold.
  void validate() const;
  const Layer& layer(const std::string& name) const;

  bool operator==(const ActivationStore&) const = default;
};

std::filesystem::path layer_file_name(const std::string& layer_name);

void write_store(const ActivationStore& store, const std::filesystem::path& dir);
ActivationStore read_store(const std::filesystem::path& dir);

// Single-layer, single-timestep store from `label,f0,f1,...` rows.
ActivationStore import_csv(const std::filesystem::path& csv, const std::string& layer_name = "input",
                           const std::string& label_key = "label");

struct Manifold {
  std::string label;
  Matrix points;  // M x N, one feature vector per row
};

struct Provenance {
  std::string layer;
  std::string timestep;
  std::string manifold_key;
  std::optional<std::uint64_t> projection_seed;
};

// P >= 2 labeled point clouds sharing one feature dimension. Immutable once
// built; every transform returns a new set.
class ManifoldSet {
 public:
  ManifoldSet(std::vector<Manifold> manifolds, Provenance provenance = {});

  std::size_t size() const { return manifolds_.size(); }
  Index feature_dim() const { return feature_dim_; }
  const Manifold& operator[](std::size_t i) const { return manifolds_[i]; }
  const std::vector<Manifold>& manifolds() const { return manifolds_; }
  const Provenance& provenance() const { return provenance_; }

  std::vector<Index> sizes() const;
  Index total_points() const;
  double mean_size() const;
  Matrix pooled() const;

 private:
  std::vector<Manifold> manifolds_;
  Provenance provenance_;
  Index feature_dim_ = 0;
};

struct TimestepSelector {
  enum class Kind { Index, Center, FlattenAll };
  Kind kind = Kind::FlattenAll;
  std::uint64_t index = 0;

  static TimestepSelector at(std::uint64_t t) { return {Kind::Index, t}; }
  static TimestepSelector center() { return {Kind::Center, 0}; }
  static TimestepSelector flatten_all() { return {Kind::FlattenAll, 0}; }

  std::string describe() const;
};

ManifoldSet assemble_manifolds(const ActivationStore& store, const std::string& manifold_key,
                               const std::string& layer, TimestepSelector selector,
                               std::vector<std::string>* warnings = nullptr);

struct ProjectionOptions {
  bool orthonormalize = false;
};

// N x target_dim matrix with standard-normal entries and unit-norm columns
// (or orthonormal columns when requested).
Matrix projection_matrix(Index input_dim, Index target_dim, std::uint64_t seed,
                         ProjectionOptions options = {});

ManifoldSet random_project(const ManifoldSet& mset, Index target_dim, std::uint64_t seed,
                           ProjectionOptions options = {});

ManifoldSet permute_labels(const ManifoldSet& mset, std::uint64_t seed);

}  // namespace mfld
