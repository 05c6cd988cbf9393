#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "memaudit/core.hpp"
#include "memaudit/ingest.hpp"

namespace memaudit {

/// Brain-content filter for axial slices: keep a slice when at least
/// `min_fraction` of the pixels on `channel` are strictly above
/// `intensity_threshold`.
struct SliceFilterRule {
  double min_fraction = 0.15;
  double intensity_threshold = 50.0;
  std::size_t channel = 0;

  void validate() const;
  /// Smallest qualifying-pixel count that retains a slice of `area` pixels.
  std::size_t required_count(std::size_t area) const;
};

/// Splits a volume into axial slices that pass `rule`. Slice ids are
/// "<volume id>_s<ddd>", in ascending slice order.
std::vector<ImageRecord> slice_volume(const VolumeRecord& volume, const SliceFilterRule& rule);

/// Symmetric zero padding; any odd remainder goes to the bottom/right.
ImageRecord zero_pad(const ImageRecord& image, std::size_t target_height,
                     std::size_t target_width);

/// Per-channel min-max map onto [0, 255]. Output stays real-valued; constant
/// channels become all zero. `channels` restricts the map (empty = all), the
/// others are copied through.
ImageRecord rescale_intensity(const ImageRecord& image, std::span<const std::size_t> channels = {});
VolumeRecord rescale_intensity(const VolumeRecord& volume,
                               std::span<const std::size_t> channels = {});

using LabelMap = std::vector<std::pair<float, float>>;

/// Parses "1=51,2=102,4=204".
LabelMap parse_label_map(std::string_view text);

/// Replaces pixels within 1e-6 of a key by the mapped value. `channels`
/// restricts the remap (empty = all).
ImageRecord remap_labels(const ImageRecord& image, const LabelMap& mapping,
                         std::span<const std::size_t> channels = {});

/// Bilinear resampling with half-pixel centres and edge clamping.
ImageRecord resize_bilinear(const ImageRecord& image, std::size_t target_height,
                            std::size_t target_width);

}  // namespace memaudit
