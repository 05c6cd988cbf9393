#include "support/fixtures.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>

#include "memaudit/harness.hpp"

namespace fs = std::filesystem;

namespace fixture {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<unsigned> counter{0};
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  path_ = fs::temp_directory_path() /
          ("memaudit-" + tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

memaudit::ImageRecord random_image(const std::string& id, const memaudit::Shape& shape,
                                   memaudit::SplitMix64& rng) {
  std::vector<float> px(shape.size());
  for (float& v : px) v = static_cast<float>(rng.uniform() * 255.0);
  return memaudit::ImageRecord(id, shape, std::move(px));
}

memaudit::ImageRecord random_u8_image(const std::string& id, const memaudit::Shape& shape,
                                      memaudit::SplitMix64& rng) {
  std::vector<float> px(shape.size());
  for (float& v : px) v = static_cast<float>(rng.below(256));
  return memaudit::ImageRecord(id, shape, std::move(px));
}

memaudit::Dataset random_dataset(const std::string& prefix, std::size_t n,
                                 const memaudit::Shape& shape, std::uint64_t seed,
                                 memaudit::Role role) {
  memaudit::SplitMix64 rng(seed);
  std::vector<memaudit::ImageRecord> images;
  char id[64];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(id, sizeof id, "%s%04zu", prefix.c_str(), i);
    images.push_back(random_image(id, shape, rng));
  }
  return memaudit::Dataset(prefix, role, std::move(images));
}

memaudit::Dataset smooth_dataset(const std::string& prefix, std::size_t n,
                                 const memaudit::Shape& shape, double blur_sigma,
                                 std::uint64_t seed, memaudit::Role role) {
  memaudit::SplitMix64 rng(seed);
  const std::vector<double> mean(shape.channels, 128.0);
  const std::vector<double> stddev(shape.channels, 50.0);
  std::vector<memaudit::ImageRecord> images;
  char id[64];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(id, sizeof id, "%s%04zu", prefix.c_str(), i);
    images.push_back(memaudit::smoothed_field(id, shape, blur_sigma, mean, stddev, rng));
  }
  return memaudit::Dataset(prefix, role, std::move(images));
}

memaudit::ImageRecord plane_image(const std::string& id, std::size_t h, std::size_t w,
                                  std::vector<float> pixels) {
  return memaudit::ImageRecord(id, memaudit::Shape{1, h, w}, std::move(pixels));
}

std::vector<double> to_double(std::span<const float> values) {
  return std::vector<double>(values.begin(), values.end());
}

}  // namespace fixture
