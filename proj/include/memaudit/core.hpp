#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace memaudit {

/// Channel count and spatial extent of a 2D multi-channel image.
struct Shape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t plane() const noexcept { return height * width; }
  std::size_t size() const noexcept { return channels * height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& shape);

/// One multi-channel 2D image. Pixels are stored channel-major (channel,
/// row, column) as 32-bit reals regardless of the file they came from.
/// Immutable once constructed; the constructor enforces every invariant.
class ImageRecord {
 public:
  ImageRecord(std::string id, Shape shape, std::vector<float> pixels,
              std::string source = {});

  const std::string& id() const noexcept { return id_; }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t channels() const noexcept { return shape_.channels; }
  std::size_t height() const noexcept { return shape_.height; }
  std::size_t width() const noexcept { return shape_.width; }
  const std::string& source() const noexcept { return source_; }

  std::span<const float> pixels() const noexcept { return pixels_; }
  std::span<const float> channel(std::size_t c) const;
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels_[(c * shape_.height + y) * shape_.width + x];
  }

  /// Same pixels under a new identifier.
  ImageRecord renamed(std::string id, std::string source = {}) const;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;

 private:
  std::string id_;
  Shape shape_;
  std::vector<float> pixels_;
  std::string source_;
};

enum class Role { train, test, synthetic };

std::string_view to_string(Role role) noexcept;
Role parse_role(std::string_view text);

/// Ordered collection of images sharing one shape, with unique ids.
class Dataset {
 public:
  Dataset(std::string name, Role role, std::vector<ImageRecord> images);

  const std::string& name() const noexcept { return name_; }
  Role role() const noexcept { return role_; }
  const std::vector<ImageRecord>& images() const noexcept { return images_; }
  const ImageRecord& operator[](std::size_t i) const { return images_[i]; }
  std::size_t size() const noexcept { return images_.size(); }
  bool empty() const noexcept { return images_.empty(); }
  /// Shape of every member; all zero for an empty dataset.
  Shape shape() const noexcept { return shape_; }

  /// Subset in the order given by `indices`.
  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  std::string name_;
  Role role_;
  std::vector<ImageRecord> images_;
  Shape shape_;
};

/// Sorted, duplicate-free list of channel indices taking part in a comparison.
using ChannelMask = std::vector<std::size_t>;

/// {0..3} for 5-channel data (the last channel holds the annotation),
/// every channel otherwise.
ChannelMask default_channel_mask(std::size_t channels);

/// Sorts and deduplicates `mask`; throws invalid_argument when it is empty
/// or names a channel >= `channels`.
ChannelMask normalize_mask(ChannelMask mask, std::size_t channels);

/// How the selected channels are folded into one correlation.
enum class CombineMode {
  /// One Pearson correlation over the concatenated channel pixels.
  concatenate,
  /// Mean of the per-channel Pearson correlations.
  channel_mean,
};

std::string_view to_string(CombineMode mode) noexcept;
CombineMode parse_combine_mode(std::string_view text);

/// Population variance below which a vector is treated as constant.
inline constexpr double kMinVariance = 1e-12;

/// Mean-centred, unit-norm image vector; the dot product of two of these is
/// their Pearson correlation. Invalid vectors (constant source) are all zero.
struct StandardizedVector {
  std::string id;
  std::vector<double> values;
  bool valid = false;
};

StandardizedVector standardize(const ImageRecord& image, const ChannelMask& mask,
                               CombineMode mode = CombineMode::concatenate);

/// Length of the standardized vector for `shape` under `mask`.
std::size_t standardized_length(const Shape& shape, const ChannelMask& mask);

/// Writes the standardized vector into `out` (length standardized_length)
/// and returns its validity. Accumulation is always in double.
template <typename T>
bool standardize_into(const ImageRecord& image, const ChannelMask& mask,
                      CombineMode mode, std::span<T> out);

/// Centre (unless `center` is false) and L2-normalise `in` into `out`,
/// scaled by `scale`. Returns false and zero-fills for degenerate input.
template <typename T>
bool normalize_values(std::span<const float> in, std::span<T> out, bool center,
                      double scale = 1.0);

/// Reference scalar Pearson correlation over plain vectors. Throws
/// undefined_correlation when either side is constant.
double pearson(std::span<const float> a, std::span<const float> b);

/// Reference scalar Pearson correlation between two images on `mask`.
/// Serves as the oracle for the blocked engine.
double pearson(const ImageRecord& a, const ImageRecord& b, const ChannelMask& mask,
               CombineMode mode = CombineMode::concatenate);

/// Dot product with 64-bit accumulation.
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace memaudit
