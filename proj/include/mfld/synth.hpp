#pragma once

#include <cstdint>
#include <string>

#include "mfld/tensor_io.hpp"

namespace mfld {

enum class SynthFamily { Ball, GaussianCloud, CorrelatedCenters };

SynthFamily parse_family(const std::string& name);
std::string to_string(SynthFamily family);

struct SynthSpec {
  SynthFamily family = SynthFamily::Ball;
  std::size_t P = 10;
  Index M = 50;
  Index N = 100;
  Index D = 5;            // ball only
  double R = 1.0;
  double center_corr = 0;  // correlated-centers only
  std::uint64_t seed = 0;
  bool solid = false;  // ball: sample the solid ball instead of its surface

  void validate() const;
};

// Unit-norm random centers; each manifold is center + R * (points of the unit
// D-sphere in a random D-dim subspace orthogonal to its center).
ManifoldSet make_ball_manifolds(const SynthSpec& spec);

// Unit-norm centers (optionally sharing a common component) plus isotropic
// Gaussian noise of scale R / sqrt(N).
ManifoldSet make_gaussian_clouds(const SynthSpec& spec);

ManifoldSet make_synthetic(const SynthSpec& spec);

// Single-layer, single-timestep store; label values are the manifold labels.
ActivationStore to_store(const ManifoldSet& mset, const std::string& layer = "synth",
                         const std::string& label_key = "label", DType dtype = DType::F64);

}  // namespace mfld
