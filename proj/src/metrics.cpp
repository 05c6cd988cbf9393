#include "memaudit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "memaudit/error.hpp"

namespace memaudit {

void SsimParams::validate() const {
  if (window == 0 || window % 2 == 0) {
    fail(ErrorCode::invalid_argument, "SSIM window must be an odd positive integer");
  }
  if (!(sigma > 0) || !(dynamic_range > 0) || !(k1 > 0) || !(k2 > 0)) {
    fail(ErrorCode::invalid_argument, "SSIM sigma, dynamic range, k1 and k2 must be positive");
  }
}

namespace {

std::vector<double> gaussian_kernel(std::size_t window, double sigma) {
  std::vector<double> k(window);
  const double centre = static_cast<double>(window / 2);
  double sum = 0.0;
  for (std::size_t i = 0; i < window; ++i) {
    const double d = static_cast<double>(i) - centre;
    k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Separable valid-region filter of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                 const std::vector<double>& k) {
  const std::size_t n = k.size();
  const std::size_t ow = w - n + 1;
  const std::size_t oh = h - n + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += k[i] * plane[y * w + x + i];
      rows[y * ow + x] = s;
    }
  }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += k[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  }
  return out;
}

double ssim_plane(std::span<const float> a, std::span<const float> b, std::size_t h,
                  std::size_t w, const std::vector<double>& kernel, double c1, double c2) {
  const std::size_t n = h * w;
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::vector<double> xx(n);
  std::vector<double> yy(n);
  std::vector<double> xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, h, w, kernel);
  const auto my = filter_valid(y, h, w, kernel);
  const auto exx = filter_valid(xx, h, w, kernel);
  const auto eyy = filter_valid(yy, h, w, kernel);
  const auto exy = filter_valid(xy, h, w, kernel);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = exx[i] - mx[i] * mx[i];
    const double vy = eyy[i] - my[i] * my[i];
    const double cxy = exy[i] - mx[i] * my[i];
    total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

std::vector<std::size_t> bin_indices(std::span<const float> v, std::size_t bins) {
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it;
  const double range = static_cast<double>(*hi_it) - lo;
  std::vector<std::size_t> idx(v.size(), 0);
  if (!(range > 0)) return idx;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto b = static_cast<std::size_t>((v[i] - lo) / range * static_cast<double>(bins));
    idx[i] = std::min(b, bins - 1);
  }
  return idx;
}

}  // namespace

double ssim(const ImageRecord& a, const ImageRecord& b, const SsimParams& params) {
  params.validate();
  if (a.shape() != b.shape()) {
    fail(ErrorCode::invalid_argument, "ssim: '" + a.id() + "' is " + to_string(a.shape()) +
                                          " but '" + b.id() + "' is " + to_string(b.shape()));
  }
  if (a.height() < params.window || a.width() < params.window) {
    fail(ErrorCode::invalid_argument, "ssim: image " + to_string(a.shape()) +
                                          " is smaller than the " +
                                          std::to_string(params.window) + "-pixel window");
  }
  const auto kernel = gaussian_kernel(params.window, params.sigma);
  double sum = 0.0;
  for (std::size_t c = 0; c < a.channels(); ++c) {
    sum += ssim_plane(a.channel(c), b.channel(c), a.height(), a.width(), kernel, params.c1(),
                      params.c2());
  }
  return sum / static_cast<double>(a.channels());
}

double mutual_information(const ImageRecord& a, const ImageRecord& b, std::size_t bins) {
  if (bins < 2) fail(ErrorCode::invalid_argument, "mutual_information: bins must be at least 2");
  if (a.shape() != b.shape()) {
    fail(ErrorCode::invalid_argument, "mutual_information: '" + a.id() + "' and '" + b.id() +
                                          "' differ in shape");
  }
  const auto ia = bin_indices(a.pixels(), bins);
  const auto ib = bin_indices(b.pixels(), bins);
  std::vector<double> joint(bins * bins, 0.0);
  std::vector<double> pa(bins, 0.0);
  std::vector<double> pb(bins, 0.0);
  for (std::size_t i = 0; i < ia.size(); ++i) {
    joint[ia[i] * bins + ib[i]] += 1.0;
    pa[ia[i]] += 1.0;
    pb[ib[i]] += 1.0;
  }
  const auto n = static_cast<double>(ia.size());
  double mi = 0.0;
  for (std::size_t i = 0; i < bins; ++i) {
    for (std::size_t j = 0; j < bins; ++j) {
      const double count = joint[i * bins + j];
      if (count == 0.0) continue;
      mi += (count / n) * std::log2(count * n / (pa[i] * pb[j]));
    }
  }
  return std::max(mi, 0.0);
}

GaussianStats gaussian_stats(const EmbeddingSet& embeddings) {
  const std::size_t n = embeddings.size();
  if (n < 2) {
    fail(ErrorCode::invalid_argument, "gaussian_stats needs at least 2 rows, got " +
                                          std::to_string(n));
  }
  const std::size_t d = embeddings.dim();
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = embeddings.row(i);
    for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r[j];
  }
  GaussianStats g;
  g.n = n;
  g.mu = x.colwise().mean().transpose();
  const Eigen::MatrixXd centred = x.rowwise() - g.mu.transpose();
  g.sigma = (centred.transpose() * centred) / static_cast<double>(n - 1);
  g.sigma = 0.5 * (g.sigma + g.sigma.transpose()).eval();
  return g;
}

Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& s) {
  if (s.rows() != s.cols()) fail(ErrorCode::invalid_argument, "matrix_sqrt_psd: not square");
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    fail(ErrorCode::invalid_argument, "matrix_sqrt_psd: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (s + s.transpose()));
  if (eig.info() != Eigen::Success) {
    fail(ErrorCode::numerical, "matrix_sqrt_psd: eigendecomposition did not converge");
  }
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

double fid(const GaussianStats& a, const GaussianStats& b) {
  if (a.mu.size() != b.mu.size() || a.sigma.rows() != b.sigma.rows()) {
    fail(ErrorCode::invalid_argument, "fid: dimensions differ (" + std::to_string(a.mu.size()) +
                                          " vs " + std::to_string(b.mu.size()) + ")");
  }
  const Eigen::MatrixXd root_a = matrix_sqrt_psd(a.sigma);
  Eigen::MatrixXd inner = root_a * b.sigma * root_a;
  inner = 0.5 * (inner + inner.transpose()).eval();
  const double cross = matrix_sqrt_psd(inner).trace();
  const double value =
      (a.mu - b.mu).squaredNorm() + a.sigma.trace() + b.sigma.trace() - 2.0 * cross;
  if (value < 0.0) {
    if (value > -1e-6) return 0.0;
    fail(ErrorCode::numerical, "fid: negative distance " + std::to_string(value));
  }
  return value;
}

InceptionScore inception_score(const EmbeddingSet& probabilities, std::size_t splits) {
  if (splits == 0) fail(ErrorCode::invalid_argument, "inception_score: splits must be >= 1");
  const std::size_t n = probabilities.size();
  const std::size_t classes = probabilities.dim();
  if (n == 0) fail(ErrorCode::empty_set, "inception_score: no rows");
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (float p : probabilities.row(i)) {
      if (p < 0.0f) {
        fail(ErrorCode::invalid_argument, "inception_score: row " + std::to_string(i) + " ('" +
                                              probabilities.ids()[i] +
                                              "') has a negative probability");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-5) {
      fail(ErrorCode::invalid_argument, "inception_score: row " + std::to_string(i) + " ('" +
                                            probabilities.ids()[i] + "') sums to " +
                                            std::to_string(sum) + ", not 1");
    }
  }
  if (n < 2 * splits) splits = 1;

  std::vector<double> scores;
  scores.reserve(splits);
  for (std::size_t s = 0; s < splits; ++s) {
    const std::size_t begin = n * s / splits;
    const std::size_t end = n * (s + 1) / splits;
    std::vector<double> marginal(classes, 0.0);
    for (std::size_t i = begin; i < end; ++i) {
      auto row = probabilities.row(i);
      for (std::size_t c = 0; c < classes; ++c) marginal[c] += row[c];
    }
    const auto count = static_cast<double>(end - begin);
    for (double& m : marginal) m /= count;
    double kl_sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      auto row = probabilities.row(i);
      for (std::size_t c = 0; c < classes; ++c) {
        if (row[c] > 0.0f) kl_sum += row[c] * (std::log(double(row[c])) - std::log(marginal[c]));
      }
    }
    scores.push_back(std::exp(kl_sum / count));
  }
  InceptionScore result;
  result.splits = splits;
  for (double v : scores) result.mean += v;
  result.mean /= static_cast<double>(splits);
  double var = 0.0;
  for (double v : scores) var += (v - result.mean) * (v - result.mean);
  result.std = std::sqrt(var / static_cast<double>(splits));
  return result;
}

}  // namespace memaudit
