#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "memaudit/core.hpp"
#include "memaudit/ingest.hpp"

namespace memaudit {

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double dynamic_range = 255.0;
  double k1 = 0.01;
  double k2 = 0.03;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
  void validate() const;
};

/// Mean SSIM over every position where the Gaussian window fits entirely
/// inside the image. Multi-channel inputs are scored per channel and averaged.
double ssim(const ImageRecord& a, const ImageRecord& b, const SsimParams& params = {});

inline constexpr std::size_t kDefaultMiBins = 64;

/// Histogram estimate of mutual information in bits. Each image is binned
/// over its own [min, max] with equal-width bins; a constant image puts
/// everything in bin 0 and so scores 0.
double mutual_information(const ImageRecord& a, const ImageRecord& b,
                          std::size_t bins = kDefaultMiBins);

struct GaussianStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;  // unbiased, divisor n - 1
  std::size_t n = 0;
};

GaussianStats gaussian_stats(const EmbeddingSet& embeddings);

/// Principal square root of a symmetric PSD matrix via eigendecomposition;
/// negative eigenvalues from round-off are clamped to zero.
Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& s);

/// Frechet distance between two Gaussians:
/// |mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2).
double fid(const GaussianStats& a, const GaussianStats& b);

struct InceptionScore {
  double mean = 0.0;
  double std = 0.0;  // population std over splits
  std::size_t splits = 1;
};

inline constexpr std::size_t kDefaultIsSplits = 10;

/// exp(mean KL(p(y|x) || p(y))) per contiguous split of the rows. Falls back
/// to a single split when there are fewer than 2 rows per split.
InceptionScore inception_score(const EmbeddingSet& probabilities,
                               std::size_t splits = kDefaultIsSplits);

}  // namespace memaudit
