#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "memaudit/core.hpp"
#include "memaudit/random.hpp"
#include "memaudit/report.hpp"

namespace memaudit {

enum class PlantKind { copy = 0, noisy = 1, shift = 2, fresh = 3 };

std::string_view to_string(PlantKind kind) noexcept;
PlantKind parse_plant_kind(std::string_view text);

struct PlantConfig {
  std::size_t n_output = 0;
  double p_copy = 0.0;
  double p_noisy = 0.0;
  double p_shift = 0.0;
  double noise_sigma = 5.0;       // on the 0-255 scale
  std::size_t shift_pixels = 4;   // applied down and right, zero fill
  std::uint64_t seed = 0;

  void validate() const;
};

/// Standard deviation of the separable blur used for fresh images.
inline constexpr double kFreshBlurSigma = 8.0;

struct TruthEntry {
  std::string output_id;
  PlantKind kind = PlantKind::fresh;
  std::string source_id;  // empty for fresh images
  friend bool operator==(const TruthEntry&, const TruthEntry&) = default;
};

struct GroundTruth {
  std::vector<TruthEntry> entries;

  const TruthEntry* find(std::string_view output_id) const;
  std::array<std::size_t, 4> kind_counts() const;
  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct PlantResult {
  Dataset synthetic;
  GroundTruth truth;
};

/// Per-kind counts {copy, noisy, shift, fresh} by largest-remainder rounding
/// of n_output times each probability (ties go to the earlier kind).
std::array<std::size_t, 4> plant_counts(const PlantConfig& config);

/// Builds a synthetic set with known copies, noisy copies, shifted copies
/// and fresh smoothed-noise images.
///
/// Determinism: a master SplitMix64(seed) stream shuffles the kind
/// assignment (Fisher-Yates, from the last index down) and then draws each
/// output's source index in output order. Output i draws its pixel noise
/// from SplitMix64(seed ^ i).
PlantResult plant(const Dataset& train, const PlantConfig& config, std::size_t workers = 1);

/// Gaussian white noise blurred with a separable Gaussian of `blur_sigma`
/// (drawn on a canvas padded by the kernel radius, so no
/// border effects), rescaled per channel to `mean`/`stddev`, clamped to [0, 255].
ImageRecord smoothed_field(std::string id, const Shape& shape, double blur_sigma,
                           std::span<const double> mean, std::span<const double> stddev,
                           SplitMix64& rng);

struct DetectorScore {
  std::size_t flagged = 0;
  std::size_t positives = 0;
  std::size_t true_positives = 0;  // positive kind and correct source
  std::optional<double> precision;  // none when nothing was flagged
  std::optional<double> recall;     // none when there are no positives
  /// Recall per kind among all four kinds; none when a kind is absent.
  std::array<std::optional<double>, 4> kind_recall;
  /// Share of flagged positives whose reference is the true source.
  std::optional<double> source_attribution;
};

/// Scores a flag list against ground truth. A flag counts as a true positive
/// only when its query is of a positive kind and its reference is that
/// query's source.
DetectorScore evaluate_detector(std::span<const FlaggedPair> flags, const GroundTruth& truth,
                                const std::set<PlantKind>& positive_kinds = {PlantKind::copy,
                                                                             PlantKind::noisy});

nlohmann::ordered_json truth_to_json(const GroundTruth& truth, const PlantConfig& config);
GroundTruth truth_from_json(const nlohmann::json& json);
void write_truth(const std::filesystem::path& path, const GroundTruth& truth,
                 const PlantConfig& config);
GroundTruth read_truth(const std::filesystem::path& path);

}  // namespace memaudit
