#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mfld/error.hpp"
#include "mfld/tensor_io.hpp"

namespace mfld {

enum class Separability { Separable, Inseparable, Marginal };

struct SeparabilityResult {
  Separability verdict = Separability::Inseparable;
  double distance = 0;  // upper bound on the normalized margin reached
  Vector weights;       // separating direction (with bias last) when separable
  std::size_t iterations = 0;

  bool separable() const { return verdict == Separability::Separable; }
};

// Hard-margin feasibility on the rows y_i * (x_i, 1) scaled to unit length:
// decides whether some w has y_i w.(x_i,1) >= margin |w| |(x_i,1)| for all i.
// Marginal instances (within 1e-9 of the boundary) count as inseparable.
SeparabilityResult check_separability(const Matrix& points, std::span<const int> signs, double margin = 0.0);

// Same decision on rows already multiplied by their sign and augmented with the
// bias column. Rows must be nonzero.
SeparabilityResult check_separability_signed(Matrix signed_rows, double margin = 0.0);

bool is_separable(const Matrix& points, std::span<const int> signs, double margin = 0.0);

// Per-manifold random +-1 labels, never all equal.
std::vector<int> random_dichotomy(std::size_t p, std::uint64_t seed);

struct SeparabilityOptions {
  std::size_t n_dichotomies = 101;
  bool shared_projection = false;
};

struct CurvePoint {
  Index n_features = 0;
  double fraction = 0;
  std::size_t n_dichotomies = 0;
  std::size_t n_marginal = 0;
};

// Dichotomy experiments on one manifold set. The set is reduced once to a
// canonical frame of its span; each trial draws its Gaussian projection there.
class DichotomyExperiment {
 public:
  explicit DichotomyExperiment(const ManifoldSet& mset);

  CurvePoint fraction(Index n_features, std::uint64_t seed, const SeparabilityOptions& options = {}) const;

  Index span_rank() const { return rank_; }
  Index feature_dim() const { return feature_dim_; }
  std::size_t manifolds() const { return parts_.size(); }
  double mean_size() const { return mean_size_; }

 private:
  struct Part {
    Vector origin;  // rank_ coordinates of the manifold mean
    Matrix basis;   // rank_ x d coordinates of the manifold's directions
    Matrix coords;  // M x d
  };
  Matrix signed_points(const std::vector<Matrix>& projected_origin_basis, std::span<const int> signs,
                       Index n_features) const;

  std::vector<Part> parts_;
  Index rank_ = 0;
  Index feature_dim_ = 0;
  Index total_points_ = 0;
  double mean_size_ = 0;
};

double fraction_separable(const ManifoldSet& mset, Index n_features, std::size_t n_dichotomies,
                          std::uint64_t seed, bool shared_projection = false);

struct CapacityEstimate {
  Index critical_n = 0;
  double alpha_sim = 0;
  double fraction_at_critical = 0;
  std::vector<CurvePoint> curve;  // in evaluation order
};

CapacityEstimate empirical_capacity(const ManifoldSet& mset, std::size_t n_dichotomies, std::uint64_t seed,
                                    double frac_tol = 0.05, bool shared_projection = false);

class NotBracketableError : public Error {
 public:
  NotBracketableError(const std::string& message, std::vector<CurvePoint> curve)
      : Error(ErrorCode::NotBracketable, message), curve_(std::move(curve)) {}
  const std::vector<CurvePoint>& curve() const { return curve_; }

 private:
  std::vector<CurvePoint> curve_;
};

}  // namespace mfld
