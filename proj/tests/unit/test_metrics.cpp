#include <doctest.h>

#include <cmath>

#include "memaudit/error.hpp"
#include "memaudit/ingest.hpp"
#include "memaudit/metrics.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace memaudit;

namespace {

GaussianStats stats_1d(double mu, double var) {
  GaussianStats g;
  g.mu = Eigen::VectorXd::Constant(1, mu);
  g.sigma = Eigen::MatrixXd::Constant(1, 1, var);
  g.n = 10;
  return g;
}

EmbeddingSet probs(std::size_t n, std::size_t classes, const std::vector<float>& rows) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  return EmbeddingSet(ids, classes, rows);
}

}  // namespace

TEST_CASE("ssim identities") {
  SplitMix64 rng(51);
  const auto x = fixture::random_image("x", Shape{1, 32, 32}, rng);
  CHECK(std::abs(ssim(x, x) - 1.0) <= 1e-9);
  const ImageRecord black("b", Shape{1, 16, 16}, std::vector<float>(256, 0.f));
  const ImageRecord white("w", Shape{1, 16, 16}, std::vector<float>(256, 255.f));
  const double c1 = (0.01 * 255) * (0.01 * 255);
  const double analytic = c1 / (255.0 * 255.0 + c1);
  CHECK(std::abs(ssim(black, white) - analytic) <= 1e-8);
  CHECK(std::abs(ssim(black, white) - 1.0e-4) <= 1e-8);
}

TEST_CASE("ssim matches the direct-window oracle and is symmetric") {
  SplitMix64 rng(52);
  for (int trial = 0; trial < 5; ++trial) {
    const Shape s{2, 12 + rng.below(10), 12 + rng.below(10)};
    const auto a = fixture::random_image("a", s, rng);
    const auto b = fixture::random_image("b", s, rng);
    double expected = 0.0;
    for (std::size_t c = 0; c < 2; ++c) {
      expected += oracle::ssim_plane(fixture::to_double(a.channel(c)), fixture::to_double(b.channel(c)),
                                     s.height, s.width, 11, 1.5, 255.0);
    }
    expected /= 2.0;
    CHECK(std::abs(ssim(a, b) - expected) <= 1e-9);
    CHECK(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-9);
    const double v = ssim(a, b);
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("ssim errors") {
  SplitMix64 rng(53);
  const auto small = fixture::random_image("s", Shape{1, 10, 40}, rng);
  CHECK_THROWS_AS(ssim(small, small), Error);
  const auto a = fixture::random_image("a", Shape{1, 12, 12}, rng);
  const auto b = fixture::random_image("b", Shape{1, 12, 13}, rng);
  CHECK_THROWS_AS(ssim(a, b), Error);
  SsimParams even;
  even.window = 10;
  CHECK_THROWS_AS(even.validate(), Error);
}

TEST_CASE("mutual information") {
  const auto two = fixture::plane_image("t", 2, 2, {10, 10, 200, 200});
  CHECK(std::abs(mutual_information(two, two) - 1.0) <= 1e-9);
  const auto flat = fixture::plane_image("f", 2, 2, {3, 3, 3, 3});
  CHECK(mutual_information(two, flat) == 0.0);

  SplitMix64 rng(54);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = fixture::random_image("a", Shape{1, 20, 30}, rng);
    const auto b = fixture::random_image("b", Shape{1, 20, 30}, rng);
    const std::size_t bins = 2 + rng.below(70);
    const double ab = mutual_information(a, b, bins);
    CHECK(std::abs(ab - mutual_information(b, a, bins)) <= 1e-12);
    CHECK(std::abs(ab - oracle::mutual_information(fixture::to_double(a.pixels()),
                                                   fixture::to_double(b.pixels()), bins)) <= 1e-9);
    CHECK(ab >= 0.0);
    // MI(a, a) is the entropy of the binned marginal
    const auto da = fixture::to_double(a.pixels());
    CHECK(std::abs(mutual_information(a, a, bins) - oracle::mutual_information(da, da, bins)) <= 1e-9);
  }
  CHECK_THROWS_AS(mutual_information(two, two, 1), Error);
}

TEST_CASE("gaussian stats") {
  const EmbeddingSet e({"a", "b"}, 2, {0, 0, 2, 2});
  const auto g = gaussian_stats(e);
  CHECK(g.mu(0) == 1.0);
  CHECK(g.mu(1) == 1.0);
  CHECK(g.sigma(0, 0) == 2.0);
  CHECK(g.sigma(0, 1) == 2.0);
  CHECK(g.sigma(1, 1) == 2.0);
  CHECK(gaussian_stats(EmbeddingSet({"a", "b", "c"}, 2, {1, 5, 1, 5, 1, 5})).sigma.isZero());
  CHECK_THROWS_AS(gaussian_stats(EmbeddingSet({"a"}, 2, {1, 2})), Error);

  SplitMix64 rng(55);
  std::vector<float> rows(30 * 4);
  for (float& v : rows) v = static_cast<float>(rng.normal());
  std::vector<std::string> ids(30);
  for (std::size_t i = 0; i < 30; ++i) ids[i] = std::to_string(i);
  const auto g1 = gaussian_stats(EmbeddingSet(ids, 4, rows));
  std::vector<float> reversed;
  for (std::size_t i = 30; i-- > 0;) reversed.insert(reversed.end(), rows.begin() + i * 4, rows.begin() + i * 4 + 4);
  const auto g2 = gaussian_stats(EmbeddingSet(ids, 4, reversed));
  CHECK((g1.mu - g2.mu).norm() <= 1e-12);
  CHECK((g1.sigma - g2.sigma).norm() <= 1e-12);
  CHECK((g1.sigma - g1.sigma.transpose()).norm() <= 1e-9);
}

TEST_CASE("matrix square root") {
  CHECK((matrix_sqrt_psd(Eigen::MatrixXd::Identity(3, 3)) - Eigen::MatrixXd::Identity(3, 3)).norm() <= 1e-12);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 4;
  d(1, 1) = 9;
  const auto r = matrix_sqrt_psd(d);
  CHECK(r(0, 0) == doctest::Approx(2.0));
  CHECK(r(1, 1) == doctest::Approx(3.0));
  CHECK(std::abs(r(0, 1)) <= 1e-12);

  SplitMix64 rng(56);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd a(5, 5);
    for (int i = 0; i < 25; ++i) a.data()[i] = rng.normal();
    const Eigen::MatrixXd s = a.transpose() * a;
    const Eigen::MatrixXd root = matrix_sqrt_psd(s);
    CHECK((root * root - s).norm() <= 1e-6 * (1.0 + s.norm()));
  }
  Eigen::MatrixXd asym = Eigen::MatrixXd::Identity(2, 2);
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(matrix_sqrt_psd(asym), Error);
}

TEST_CASE("fid closed forms and properties") {
  const auto g = stats_1d(0, 1);
  CHECK(std::abs(fid(g, g)) <= 1e-6);
  CHECK(std::abs(fid(stats_1d(0, 1), stats_1d(1, 1)) - 1.0) <= 1e-9);
  CHECK(std::abs(fid(stats_1d(0, 1), stats_1d(0, 4)) - 1.0) <= 1e-9);

  SplitMix64 rng(57);
  const auto random_stats = [&](double shift) {
    std::vector<float> rows(40 * 6);
    for (float& v : rows) v = static_cast<float>(rng.normal() + shift);
    std::vector<std::string> ids(40);
    for (std::size_t i = 0; i < 40; ++i) ids[i] = std::to_string(i);
    return gaussian_stats(EmbeddingSet(ids, 6, rows));
  };
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = random_stats(0.0);
    const auto b = random_stats(0.5);
    CHECK(std::abs(fid(a, a)) <= 1e-6);
    CHECK(fid(a, b) >= 0.0);
    CHECK(std::abs(fid(a, b) - fid(b, a)) <= 1e-6);
  }
  CHECK_THROWS_AS(fid(stats_1d(0, 1), random_stats(0)), Error);
}

TEST_CASE("inception score") {
  const auto uniform = probs(20, 10, std::vector<float>(200, 0.1f));
  CHECK(std::abs(inception_score(uniform).mean - 1.0) <= 1e-9);
  const auto two = probs(2, 2, {1, 0, 0, 1});
  const auto is2 = inception_score(two, 1);
  CHECK(std::abs(is2.mean - 2.0) <= 1e-9);
  CHECK(is2.std == 0.0);
  const auto same = probs(6, 3, {0, 1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0});
  CHECK(std::abs(inception_score(same, 2).mean - 1.0) <= 1e-9);
  // too few rows for 10 splits
  CHECK(inception_score(two).splits == 1);

  SplitMix64 rng(58);
  std::vector<float> rows(50 * 7);
  for (std::size_t i = 0; i < 50; ++i) {
    double total = 0;
    for (std::size_t c = 0; c < 7; ++c) total += (rows[i * 7 + c] = static_cast<float>(rng.uniform() + 1e-3));
    for (std::size_t c = 0; c < 7; ++c) rows[i * 7 + c] = static_cast<float>(rows[i * 7 + c] / total);
  }
  const auto score = inception_score(probs(50, 7, rows), 5);
  CHECK(score.splits == 5);
  CHECK(score.mean >= 1.0 - 1e-9);
  CHECK(score.mean <= 7.0 + 1e-9);

  auto bad = std::vector<float>{0.5f, 0.5f, 0.7f, 0.7f};
  try {
    inception_score(probs(2, 2, bad), 1);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_argument);
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
}
