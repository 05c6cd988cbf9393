#include "memaudit/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

#include "memaudit/error.hpp"

namespace memaudit {

void SliceFilterRule::validate() const {
  if (!(min_fraction > 0.0 && min_fraction <= 1.0)) {
    fail(ErrorCode::invalid_argument, "slice filter min_fraction must lie in (0, 1]");
  }
  if (!std::isfinite(intensity_threshold)) {
    fail(ErrorCode::invalid_argument, "slice filter threshold must be finite");
  }
}

std::size_t SliceFilterRule::required_count(std::size_t area) const {
  // 0.15 * 57600 is not exact in binary; the slack keeps "at least 15%" inclusive.
  const double exact = min_fraction * static_cast<double>(area);
  return static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
}

namespace {

bool in_set(std::span<const std::size_t> channels, std::size_t c) {
  return channels.empty() || std::find(channels.begin(), channels.end(), c) != channels.end();
}

void check_channels(std::span<const std::size_t> channels, std::size_t count, const char* op) {
  for (std::size_t c : channels) {
    if (c >= count) {
      fail(ErrorCode::invalid_argument,
           std::string(op) + ": channel " + std::to_string(c) + " out of range");
    }
  }
}

void rescale_span(std::span<float> values) {
  if (values.empty()) return;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) {
    std::fill(values.begin(), values.end(), 0.0f);
    return;
  }
  const double range = hi - lo;
  for (float& v : values) v = static_cast<float>((v - lo) / range * 255.0);
}

}  // namespace

std::vector<ImageRecord> slice_volume(const VolumeRecord& volume, const SliceFilterRule& rule) {
  rule.validate();
  if (rule.channel >= volume.channels()) {
    fail(ErrorCode::invalid_argument, "slice filter channel " + std::to_string(rule.channel) +
                                          " out of range for volume '" + volume.id() + "'");
  }
  const std::size_t hw = volume.height() * volume.width();
  const std::size_t required = rule.required_count(hw);
  std::vector<ImageRecord> slices;
  for (std::size_t d = 0; d < volume.depth(); ++d) {
    auto probe = volume.plane(rule.channel, d);
    const auto qualifying = static_cast<std::size_t>(
        std::count_if(probe.begin(), probe.end(),
                      [&](float v) { return v > rule.intensity_threshold; }));
    if (qualifying < required) continue;

    std::vector<float> pixels;
    pixels.reserve(volume.channels() * hw);
    for (std::size_t c = 0; c < volume.channels(); ++c) {
      auto plane = volume.plane(c, d);
      pixels.insert(pixels.end(), plane.begin(), plane.end());
    }
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "_s%03zu", d);
    slices.emplace_back(volume.id() + suffix, Shape{volume.channels(), volume.height(), volume.width()},
                        std::move(pixels), volume.id() + " slice " + std::to_string(d));
  }
  return slices;
}

ImageRecord zero_pad(const ImageRecord& image, std::size_t target_height,
                     std::size_t target_width) {
  if (target_height < image.height() || target_width < image.width()) {
    fail(ErrorCode::invalid_argument, "zero_pad: target " + std::to_string(target_height) + "x" +
                                          std::to_string(target_width) + " is smaller than '" +
                                          image.id() + "' (" + to_string(image.shape()) + ")");
  }
  const std::size_t top = (target_height - image.height()) / 2;
  const std::size_t left = (target_width - image.width()) / 2;
  const Shape out_shape{image.channels(), target_height, target_width};
  std::vector<float> out(out_shape.size(), 0.0f);
  for (std::size_t c = 0; c < image.channels(); ++c) {
    for (std::size_t y = 0; y < image.height(); ++y) {
      for (std::size_t x = 0; x < image.width(); ++x) {
        out[(c * target_height + y + top) * target_width + x + left] = image.at(c, y, x);
      }
    }
  }
  return ImageRecord(image.id(), out_shape, std::move(out), image.source());
}

ImageRecord rescale_intensity(const ImageRecord& image, std::span<const std::size_t> channels) {
  check_channels(channels, image.channels(), "rescale_intensity");
  std::vector<float> out(image.pixels().begin(), image.pixels().end());
  const std::size_t plane = image.shape().plane();
  for (std::size_t c = 0; c < image.channels(); ++c) {
    if (in_set(channels, c)) rescale_span(std::span<float>(out).subspan(c * plane, plane));
  }
  return ImageRecord(image.id(), image.shape(), std::move(out), image.source());
}

VolumeRecord rescale_intensity(const VolumeRecord& volume, std::span<const std::size_t> channels) {
  check_channels(channels, volume.channels(), "rescale_intensity");
  std::vector<float> out(volume.voxels().begin(), volume.voxels().end());
  const std::size_t block = volume.depth() * volume.height() * volume.width();
  for (std::size_t c = 0; c < volume.channels(); ++c) {
    if (in_set(channels, c)) rescale_span(std::span<float>(out).subspan(c * block, block));
  }
  return VolumeRecord(volume.id(), volume.channels(), volume.depth(), volume.height(),
                      volume.width(), std::move(out));
}

LabelMap parse_label_map(std::string_view text) {
  LabelMap mapping;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string_view item = text.substr(pos, comma - pos);
    const std::size_t eq = item.find('=');
    float from = 0;
    float to = 0;
    const auto parse = [](std::string_view s, float& v) {
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      return ec == std::errc{} && p == s.data() + s.size() && !s.empty();
    };
    if (eq == std::string_view::npos || !parse(item.substr(0, eq), from) ||
        !parse(item.substr(eq + 1), to)) {
      fail(ErrorCode::invalid_argument, "bad label mapping '" + std::string(item) +
                                            "' (expected FROM=TO[,FROM=TO...])");
    }
    mapping.emplace_back(from, to);
    pos = comma + 1;
  }
  return mapping;
}

ImageRecord remap_labels(const ImageRecord& image, const LabelMap& mapping,
                         std::span<const std::size_t> channels) {
  check_channels(channels, image.channels(), "remap_labels");
  std::vector<float> out(image.pixels().begin(), image.pixels().end());
  const std::size_t plane = image.shape().plane();
  for (std::size_t c = 0; c < image.channels(); ++c) {
    if (!in_set(channels, c)) continue;
    for (float& v : std::span<float>(out).subspan(c * plane, plane)) {
      for (const auto& [from, to] : mapping) {
        if (std::abs(double(v) - double(from)) <= 1e-6) {
          v = to;
          break;
        }
      }
    }
  }
  return ImageRecord(image.id(), image.shape(), std::move(out), image.source());
}

ImageRecord resize_bilinear(const ImageRecord& image, std::size_t target_height,
                            std::size_t target_width) {
  if (target_height == 0 || target_width == 0) {
    fail(ErrorCode::invalid_argument, "resize_bilinear: target dimensions must be positive");
  }
  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  const auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
      const double src = std::clamp((static_cast<double>(i) + 0.5) * scale - 0.5, 0.0,
                                    static_cast<double>(in - 1));
      const auto lo = static_cast<std::size_t>(std::floor(src));
      t[i] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
    }
    return t;
  };
  const auto ty = taps(image.height(), target_height);
  const auto tx = taps(image.width(), target_width);
  const Shape out_shape{image.channels(), target_height, target_width};
  std::vector<float> out(out_shape.size());
  for (std::size_t c = 0; c < image.channels(); ++c) {
    for (std::size_t y = 0; y < target_height; ++y) {
      const auto& a = ty[y];
      for (std::size_t x = 0; x < target_width; ++x) {
        const auto& b = tx[x];
        const double top = image.at(c, a.lo, b.lo) * (1.0 - b.frac) + image.at(c, a.lo, b.hi) * b.frac;
        const double bottom =
            image.at(c, a.hi, b.lo) * (1.0 - b.frac) + image.at(c, a.hi, b.hi) * b.frac;
        out[(c * target_height + y) * target_width + x] =
            static_cast<float>(top * (1.0 - a.frac) + bottom * a.frac);
      }
    }
  }
  return ImageRecord(image.id(), out_shape, std::move(out), image.source());
}

}  // namespace memaudit
