#include <algorithm>
#include <cmath>
#include <map>

#include "mfld/error.hpp"
#include "mfld/rng.hpp"
#include "mfld/tensor_io.hpp"

namespace mfld {

ManifoldSet::ManifoldSet(std::vector<Manifold> manifolds, Provenance provenance)
    : manifolds_(std::move(manifolds)), provenance_(std::move(provenance)) {
  require(manifolds_.size() >= 2, ErrorCode::TooFewManifolds,
          "need at least 2 manifolds, got " + std::to_string(manifolds_.size()));
  feature_dim_ = manifolds_.front().points.cols();
  require(feature_dim_ >= 1, ErrorCode::InvalidArgument, "feature dimension must be positive");
  for (const auto& m : manifolds_) {
    require(m.points.rows() >= 1, ErrorCode::InvalidArgument, "manifold '" + m.label + "' is empty");
    require(m.points.cols() == feature_dim_, ErrorCode::InvalidArgument,
            "manifold '" + m.label + "' has " + std::to_string(m.points.cols()) + " features, expected " +
                std::to_string(feature_dim_));
    require(m.points.allFinite(), ErrorCode::InvalidArgument,
            "manifold '" + m.label + "' contains non-finite values");
  }
}

std::vector<Index> ManifoldSet::sizes() const {
  std::vector<Index> out;
  out.reserve(manifolds_.size());
  for (const auto& m : manifolds_) out.push_back(m.points.rows());
  return out;
}

Index ManifoldSet::total_points() const {
  Index n = 0;
  for (const auto& m : manifolds_) n += m.points.rows();
  return n;
}

double ManifoldSet::mean_size() const {
  return static_cast<double>(total_points()) / static_cast<double>(manifolds_.size());
}

Matrix ManifoldSet::pooled() const {
  Matrix out(total_points(), feature_dim_);
  Index row = 0;
  for (const auto& m : manifolds_) {
    out.middleRows(row, m.points.rows()) = m.points;
    row += m.points.rows();
  }
  return out;
}

std::string TimestepSelector::describe() const {
  switch (kind) {
    case Kind::Index: return std::to_string(index);
    case Kind::Center: return "center";
    case Kind::FlattenAll: return "all";
  }
  return "?";
}

ManifoldSet assemble_manifolds(const ActivationStore& store, const std::string& manifold_key,
                               const std::string& layer_name, TimestepSelector selector,
                               std::vector<std::string>* warnings) {
  const Layer& layer = store.layer(layer_name);
  const auto& shape = layer.shape;

  bool key_seen = false;
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::uint64_t>> members;
  for (std::uint64_t e = 0; e < store.manifest.examples.size(); ++e) {
    const auto& labels = store.manifest.examples[e].labels;
    auto it = labels.find(manifold_key);
    if (it == labels.end()) {
      if (warnings) warnings->push_back("example " + store.manifest.examples[e].id + " lacks key " + manifold_key);
      continue;
    }
    key_seen = true;
    auto [slot, inserted] = members.try_emplace(it->second);
    if (inserted) order.push_back(it->second);
    slot->second.push_back(e);
  }
  require(key_seen, ErrorCode::UnknownKey, manifold_key);

  std::uint64_t t_first = 0;
  std::uint64_t t_count = 1;
  switch (selector.kind) {
    case TimestepSelector::Kind::Index:
      require(selector.index < shape.timesteps, ErrorCode::InvalidArgument,
              "timestep " + std::to_string(selector.index) + " out of range for layer " + layer_name);
      t_first = selector.index;
      break;
    case TimestepSelector::Kind::Center:
      t_first = shape.timesteps / 2;
      break;
    case TimestepSelector::Kind::FlattenAll:
      t_count = shape.timesteps;
      break;
  }
  const auto width = static_cast<Index>(t_count * shape.features);

  std::vector<Manifold> manifolds;
  for (const auto& label : order) {
    const auto& rows = members.at(label);
    if (rows.empty()) {
      if (warnings) warnings->push_back("label '" + label + "' has no examples; omitted");
      continue;
    }
    Manifold m{label, Matrix(static_cast<Index>(rows.size()), width)};
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::uint64_t t = 0; t < t_count; ++t) {
        for (std::uint64_t f = 0; f < shape.features; ++f) {
          m.points(static_cast<Index>(r), static_cast<Index>(t * shape.features + f)) =
              layer.at(rows[r], t_first + t, f);
        }
      }
    }
    manifolds.push_back(std::move(m));
  }
  require(manifolds.size() >= 2, ErrorCode::TooFewManifolds,
          "key '" + manifold_key + "' has " + std::to_string(manifolds.size()) + " distinct label(s)");
  return ManifoldSet(std::move(manifolds), {layer_name, selector.describe(), manifold_key, std::nullopt});
}

Matrix projection_matrix(Index input_dim, Index target_dim, std::uint64_t seed, ProjectionOptions options) {
  require(input_dim >= 1 && target_dim >= 1, ErrorCode::InvalidArgument, "projection dims must be positive");
  Rng rng(seed);
  Matrix g(input_dim, target_dim);
  for (Index c = 0; c < target_dim; ++c) {
    for (Index r = 0; r < input_dim; ++r) g(r, c) = rng.normal();
  }
  if (options.orthonormalize) {
    require(target_dim <= input_dim, ErrorCode::InvalidArgument,
            "orthonormal projection needs target_dim <= input_dim");
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(input_dim, target_dim);
    // Fix the sign ambiguity of QR so that columns correlate positively with the draw.
    for (Index c = 0; c < target_dim; ++c) {
      if (q.col(c).dot(g.col(c)) < 0) q.col(c) *= -1.0;
    }
    return q;
  }
  for (Index c = 0; c < target_dim; ++c) g.col(c) /= g.col(c).norm();
  return g;
}

ManifoldSet random_project(const ManifoldSet& mset, Index target_dim, std::uint64_t seed,
                           ProjectionOptions options) {
  const Matrix g = projection_matrix(mset.feature_dim(), target_dim, seed, options);
  std::vector<Manifold> out;
  out.reserve(mset.size());
  for (const auto& m : mset.manifolds()) out.push_back({m.label, m.points * g});
  Provenance p = mset.provenance();
  p.projection_seed = seed;
  return ManifoldSet(std::move(out), std::move(p));
}

ManifoldSet permute_labels(const ManifoldSet& mset, std::uint64_t seed) {
  const Matrix pool = mset.pooled();
  std::vector<Index> perm(static_cast<std::size_t>(pool.rows()));
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<Index>(i);
  Rng rng(seed);
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.below(i)]);
  }
  std::vector<Manifold> out;
  std::size_t next = 0;
  for (const auto& m : mset.manifolds()) {
    Manifold pm{m.label, Matrix(m.points.rows(), m.points.cols())};
    for (Index r = 0; r < m.points.rows(); ++r) pm.points.row(r) = pool.row(perm[next++]);
    out.push_back(std::move(pm));
  }
  return ManifoldSet(std::move(out), mset.provenance());
}

}  // namespace mfld
