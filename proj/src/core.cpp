#include "memaudit/core.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "memaudit/error.hpp"

namespace memaudit {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::undefined_correlation: return "undefined correlation";
    case ErrorCode::format: return "format error";
    case ErrorCode::unsupported_version: return "unsupported version";
    case ErrorCode::empty_set: return "empty set";
    case ErrorCode::manifest: return "manifest error";
    case ErrorCode::io: return "I/O error";
    case ErrorCode::empty_distribution: return "empty distribution";
    case ErrorCode::numerical: return "numerical error";
  }
  return "error";
}

std::string to_string(const Shape& shape) {
  return std::to_string(shape.channels) + "x" + std::to_string(shape.height) + "x" +
         std::to_string(shape.width);
}

ImageRecord::ImageRecord(std::string id, Shape shape, std::vector<float> pixels,
                         std::string source)
    : id_(std::move(id)), shape_(shape), pixels_(std::move(pixels)), source_(std::move(source)) {
  if (id_.empty()) fail(ErrorCode::invalid_argument, "image id must be non-empty");
  if (shape_.channels == 0 || shape_.height == 0 || shape_.width == 0) {
    fail(ErrorCode::invalid_argument,
         "image '" + id_ + "' has a zero dimension (" + to_string(shape_) + ")");
  }
  if (pixels_.size() != shape_.size()) {
    fail(ErrorCode::invalid_argument, "image '" + id_ + "' holds " +
                                          std::to_string(pixels_.size()) + " pixels, expected " +
                                          std::to_string(shape_.size()));
  }
  for (std::size_t i = 0; i < pixels_.size(); ++i) {
    if (!std::isfinite(pixels_[i])) {
      fail(ErrorCode::invalid_argument,
           "image '" + id_ + "' has a non-finite pixel at index " + std::to_string(i));
    }
  }
}

std::span<const float> ImageRecord::channel(std::size_t c) const {
  if (c >= shape_.channels) {
    fail(ErrorCode::invalid_argument, "channel " + std::to_string(c) + " out of range for '" +
                                          id_ + "'");
  }
  return std::span<const float>(pixels_).subspan(c * shape_.plane(), shape_.plane());
}

ImageRecord ImageRecord::renamed(std::string id, std::string source) const {
  return ImageRecord(std::move(id), shape_, pixels_, source.empty() ? source_ : std::move(source));
}

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::train: return "train";
    case Role::test: return "test";
    case Role::synthetic: return "synthetic";
  }
  return "train";
}

Role parse_role(std::string_view text) {
  if (text == "train") return Role::train;
  if (text == "test") return Role::test;
  if (text == "synthetic") return Role::synthetic;
  fail(ErrorCode::invalid_argument, "unknown dataset role '" + std::string(text) + "'");
}

Dataset::Dataset(std::string name, Role role, std::vector<ImageRecord> images)
    : name_(std::move(name)), role_(role), images_(std::move(images)) {
  if (images_.empty()) return;
  shape_ = images_.front().shape();
  std::unordered_set<std::string_view> seen;
  seen.reserve(images_.size());
  for (const auto& img : images_) {
    if (img.shape() != shape_) {
      fail(ErrorCode::invalid_argument, "dataset '" + name_ + "': image '" + img.id() +
                                            "' is " + to_string(img.shape()) + ", expected " +
                                            to_string(shape_));
    }
    if (!seen.insert(img.id()).second) {
      fail(ErrorCode::invalid_argument,
           "dataset '" + name_ + "': duplicate image id '" + img.id() + "'");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<ImageRecord> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) picked.push_back(images_.at(i));
  return Dataset(name_, role_, std::move(picked));
}

ChannelMask default_channel_mask(std::size_t channels) {
  const std::size_t used = channels == 5 ? 4 : channels;
  ChannelMask mask(used);
  for (std::size_t c = 0; c < used; ++c) mask[c] = c;
  return mask;
}

ChannelMask normalize_mask(ChannelMask mask, std::size_t channels) {
  if (mask.empty()) fail(ErrorCode::invalid_argument, "channel mask is empty");
  std::sort(mask.begin(), mask.end());
  mask.erase(std::unique(mask.begin(), mask.end()), mask.end());
  if (mask.back() >= channels) {
    fail(ErrorCode::invalid_argument, "channel index " + std::to_string(mask.back()) +
                                          " out of range for " + std::to_string(channels) +
                                          "-channel images");
  }
  return mask;
}

std::string_view to_string(CombineMode mode) noexcept {
  return mode == CombineMode::concatenate ? "concatenate" : "channel-mean";
}

CombineMode parse_combine_mode(std::string_view text) {
  if (text == "concatenate" || text == "concat") return CombineMode::concatenate;
  if (text == "channel-mean" || text == "mean") return CombineMode::channel_mean;
  fail(ErrorCode::invalid_argument, "unknown combine mode '" + std::string(text) + "'");
}

template <typename T>
bool normalize_values(std::span<const float> in, std::span<T> out, bool center, double scale) {
  if (in.size() != out.size()) {
    fail(ErrorCode::invalid_argument, "normalize_values: length mismatch");
  }
  const auto n = static_cast<double>(in.size());
  double mean = 0.0;
  if (center && !in.empty()) {
    for (float v : in) mean += v;
    mean /= n;
  }
  double ss = 0.0;
  for (float v : in) {
    const double d = v - mean;
    ss += d * d;
  }
  if (in.empty() || ss / n < kMinVariance) {
    std::fill(out.begin(), out.end(), T{0});
    return false;
  }
  const double inv = scale / std::sqrt(ss);
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = static_cast<T>((in[i] - mean) * inv);
  return true;
}

template bool normalize_values<float>(std::span<const float>, std::span<float>, bool, double);
template bool normalize_values<double>(std::span<const float>, std::span<double>, bool, double);

std::size_t standardized_length(const Shape& shape, const ChannelMask& mask) {
  return mask.size() * shape.plane();
}

template <typename T>
bool standardize_into(const ImageRecord& image, const ChannelMask& mask, CombineMode mode,
                      std::span<T> out) {
  const std::size_t plane = image.shape().plane();
  if (mask.empty()) fail(ErrorCode::invalid_argument, "channel mask is empty");
  for (std::size_t c : mask) {
    if (c >= image.channels()) {
      fail(ErrorCode::invalid_argument, "channel index " + std::to_string(c) +
                                            " out of range for image '" + image.id() + "'");
    }
  }
  if (out.size() != mask.size() * plane) {
    fail(ErrorCode::invalid_argument, "standardize: output length mismatch");
  }

  if (mode == CombineMode::channel_mean) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(mask.size()));
    for (std::size_t m = 0; m < mask.size(); ++m) {
      if (!normalize_values(image.channel(mask[m]), out.subspan(m * plane, plane), true, scale)) {
        std::fill(out.begin(), out.end(), T{0});
        return false;
      }
    }
    return true;
  }

  const auto n = static_cast<double>(out.size());
  double mean = 0.0;
  for (std::size_t c : mask) {
    for (float v : image.channel(c)) mean += v;
  }
  mean /= n;
  double ss = 0.0;
  for (std::size_t c : mask) {
    for (float v : image.channel(c)) {
      const double d = v - mean;
      ss += d * d;
    }
  }
  if (ss / n < kMinVariance) {
    std::fill(out.begin(), out.end(), T{0});
    return false;
  }
  const double inv = 1.0 / std::sqrt(ss);
  std::size_t k = 0;
  for (std::size_t c : mask) {
    for (float v : image.channel(c)) out[k++] = static_cast<T>((v - mean) * inv);
  }
  return true;
}

template bool standardize_into<float>(const ImageRecord&, const ChannelMask&, CombineMode,
                                      std::span<float>);
template bool standardize_into<double>(const ImageRecord&, const ChannelMask&, CombineMode,
                                       std::span<double>);

StandardizedVector standardize(const ImageRecord& image, const ChannelMask& mask,
                               CombineMode mode) {
  StandardizedVector v;
  v.id = image.id();
  v.values.resize(standardized_length(image.shape(), mask));
  v.valid = standardize_into<double>(image, mask, mode, v.values);
  return v;
}

double pearson(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    fail(ErrorCode::invalid_argument, "pearson: length mismatch (" + std::to_string(a.size()) +
                                          " vs " + std::to_string(b.size()) + ")");
  }
  const auto n = static_cast<double>(a.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (a.empty() || saa / n < kMinVariance || sbb / n < kMinVariance) {
    fail(ErrorCode::undefined_correlation, "pearson: correlation undefined for a constant input");
  }
  return sab / std::sqrt(saa * sbb);
}

namespace {

std::vector<float> gather(const ImageRecord& image, const ChannelMask& mask) {
  std::vector<float> values;
  values.reserve(mask.size() * image.shape().plane());
  for (std::size_t c : mask) {
    auto ch = image.channel(c);
    values.insert(values.end(), ch.begin(), ch.end());
  }
  return values;
}

}  // namespace

double pearson(const ImageRecord& a, const ImageRecord& b, const ChannelMask& mask,
               CombineMode mode) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::invalid_argument, "pearson: '" + a.id() + "' is " + to_string(a.shape()) +
                                          " but '" + b.id() + "' is " + to_string(b.shape()));
  }
  const ChannelMask m = normalize_mask(mask, a.channels());
  if (mode == CombineMode::channel_mean) {
    double sum = 0.0;
    for (std::size_t c : m) sum += pearson(a.channel(c), b.channel(c));
    return sum / static_cast<double>(m.size());
  }
  return pearson(gather(a, m), gather(b, m));
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::invalid_argument, "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace memaudit
