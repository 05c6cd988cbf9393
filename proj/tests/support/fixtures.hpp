#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "memaudit/core.hpp"
#include "memaudit/random.hpp"

namespace fixture {

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Uniform random pixels in [0, 255).
memaudit::ImageRecord random_image(const std::string& id, const memaudit::Shape& shape,
                                   memaudit::SplitMix64& rng);

/// Integer-valued pixels in [0, 255].
memaudit::ImageRecord random_u8_image(const std::string& id, const memaudit::Shape& shape,
                                      memaudit::SplitMix64& rng);

memaudit::Dataset random_dataset(const std::string& prefix, std::size_t n,
                                 const memaudit::Shape& shape, std::uint64_t seed,
                                 memaudit::Role role = memaudit::Role::train);

/// Set of smoothed, moment-matched fields (mean 128, stddev 50), the
/// training stand-in for planted-memorization runs.
memaudit::Dataset smooth_dataset(const std::string& prefix, std::size_t n,
                                 const memaudit::Shape& shape, double blur_sigma,
                                 std::uint64_t seed, memaudit::Role role);

memaudit::ImageRecord plane_image(const std::string& id, std::size_t h, std::size_t w,
                                  std::vector<float> pixels);

std::vector<double> to_double(std::span<const float> values);

}  // namespace fixture
