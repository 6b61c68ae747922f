#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfld/tensor_io.hpp"

namespace mfld {

// Eigenvalues of the (n-1)-normalized sample covariance, descending. Small
// negative round-off is clipped to zero; anything below -1e-10 lambda_max throws.
Vector eigenspectrum(const Matrix& rows);

double participation_ratio(const Vector& spectrum);

// Smallest k whose leading eigenvalues reach `threshold` of the total.
Index explained_variance_dim(const Vector& spectrum, double threshold = 0.90);

struct SpectrumMetrics {
  Vector eigenvalues;
  double participation_ratio = 0;
  Index explained_variance_dim = 0;
  double variance_threshold = 0.90;
};

SpectrumMetrics spectrum_metrics(const Matrix& rows, double variance_threshold = 0.90);

struct ProbeOptions {
  std::size_t n_splits = 10;
  double train_frac = 0.8;
  double l2 = 0.0;
  double grad_tol = 1e-5;
  int max_iterations = 5000;
};

struct ProbeResult {
  std::vector<double> accuracies;  // one per split
  double mean = 0;
  double stderr_mean = 0;
  double train_frac = 0.8;
  std::vector<std::string> excluded;  // labels with fewer than 2 points
};

// Softmax regression trained by full-batch gradient descent on stratified
// train/test splits of the pooled manifold points.
ProbeResult classifier_probe(const ManifoldSet& mset, std::uint64_t seed, const ProbeOptions& options = {});

}  // namespace mfld
