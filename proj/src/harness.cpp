#include "memaudit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "memaudit/error.hpp"
#include "memaudit/ingest.hpp"
#include "memaudit/parallel.hpp"

namespace memaudit {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(PlantKind kind) noexcept {
  switch (kind) {
    case PlantKind::copy: return "copy";
    case PlantKind::noisy: return "noisy";
    case PlantKind::shift: return "shift";
    case PlantKind::fresh: return "fresh";
  }
  return "fresh";
}

PlantKind parse_plant_kind(std::string_view text) {
  if (text == "copy") return PlantKind::copy;
  if (text == "noisy") return PlantKind::noisy;
  if (text == "shift") return PlantKind::shift;
  if (text == "fresh") return PlantKind::fresh;
  fail(ErrorCode::invalid_argument, "unknown plant kind '" + std::string(text) + "'");
}

void PlantConfig::validate() const {
  if (n_output == 0) fail(ErrorCode::invalid_argument, "plant: n_output must be positive");
  for (double p : {p_copy, p_noisy, p_shift}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      fail(ErrorCode::invalid_argument, "plant: probabilities must lie in [0, 1]");
    }
  }
  if (p_copy + p_noisy + p_shift > 1.0 + 1e-12) {
    fail(ErrorCode::invalid_argument, "plant: p_copy + p_noisy + p_shift exceeds 1");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    fail(ErrorCode::invalid_argument, "plant: noise sigma must be >= 0");
  }
}

const TruthEntry* GroundTruth::find(std::string_view output_id) const {
  for (const auto& e : entries) {
    if (e.output_id == output_id) return &e;
  }
  return nullptr;
}

std::array<std::size_t, 4> GroundTruth::kind_counts() const {
  std::array<std::size_t, 4> counts{};
  for (const auto& e : entries) ++counts[static_cast<std::size_t>(e.kind)];
  return counts;
}

std::array<std::size_t, 4> plant_counts(const PlantConfig& config) {
  config.validate();
  const auto n = static_cast<double>(config.n_output);
  const std::array<double, 4> share{config.p_copy, config.p_noisy, config.p_shift,
                                    std::max(0.0, 1.0 - config.p_copy - config.p_noisy -
                                                      config.p_shift)};
  std::array<std::size_t, 4> counts{};
  std::array<double, 4> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    const double raw = share[k] * n;
    counts[k] = static_cast<std::size_t>(std::floor(raw));
    remainder[k] = raw - std::floor(raw);
    assigned += counts[k];
  }
  std::array<std::size_t, 4> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < config.n_output; i = (i + 1) % 4, ++assigned) {
    ++counts[order[i]];
  }
  return counts;
}

namespace {

std::vector<double> blur_kernel(double sigma) {
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-double(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Valid-region separable blur: `canvas` is (h + 2r) x (w + 2r), the result
/// is h x w. Every output pixel sees a full kernel, so the field is stationary.
std::vector<double> blur_valid(const std::vector<double>& canvas, std::size_t h, std::size_t w,
                               const std::vector<double>& k) {
  const std::size_t r = k.size() / 2;
  const std::size_t cw = w + 2 * r;
  std::vector<double> tmp((h + 2 * r) * w);
  for (std::size_t y = 0; y < h + 2 * r; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < k.size(); ++i) s += k[i] * canvas[y * cw + x + i];
      tmp[y * w + x] = s;
    }
  }
  std::vector<double> out(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < k.size(); ++i) s += k[i] * tmp[(y + i) * w + x];
      out[y * w + x] = s;
    }
  }
  return out;
}

}  // namespace

ImageRecord smoothed_field(std::string id, const Shape& shape, double blur_sigma,
                           std::span<const double> mean, std::span<const double> stddev,
                           SplitMix64& rng) {
  if (mean.size() != shape.channels || stddev.size() != shape.channels) {
    fail(ErrorCode::invalid_argument, "smoothed_field: one mean/stddev per channel required");
  }
  const auto kernel = blur_sigma > 0.0 ? blur_kernel(blur_sigma) : std::vector<double>{1.0};
  const std::size_t plane = shape.plane();
  std::vector<float> pixels(shape.size());
  const std::size_t r = kernel.size() / 2;
  std::vector<double> canvas((shape.height + 2 * r) * (shape.width + 2 * r));
  std::vector<double> field;
  for (std::size_t c = 0; c < shape.channels; ++c) {
    for (double& v : canvas) v = rng.normal();
    field = blur_valid(canvas, shape.height, shape.width, kernel);
    double m = 0.0;
    for (double v : field) m += v;
    m /= static_cast<double>(plane);
    double var = 0.0;
    for (double v : field) var += (v - m) * (v - m);
    var /= static_cast<double>(plane);
    const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const double v = (field[i] - m) * inv * stddev[c] + mean[c];
      pixels[c * plane + i] = static_cast<float>(std::clamp(v, 0.0, 255.0));
    }
  }
  return ImageRecord(std::move(id), shape, std::move(pixels), "fresh smoothed field");
}

PlantResult plant(const Dataset& train, const PlantConfig& config, std::size_t workers) {
  config.validate();
  if (train.empty()) fail(ErrorCode::invalid_argument, "plant: training set is empty");
  const auto counts = plant_counts(config);
  const std::size_t n = config.n_output;

  std::vector<PlantKind> kinds;
  kinds.reserve(n);
  for (std::size_t k = 0; k < 4; ++k) kinds.insert(kinds.end(), counts[k], static_cast<PlantKind>(k));
  SplitMix64 master(config.seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(kinds[i], kinds[master.below(i + 1)]);
  std::vector<std::size_t> sources(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (kinds[i] != PlantKind::fresh) sources[i] = master.below(train.size());
  }

  const Shape shape = train.shape();
  const std::size_t plane = shape.plane();
  std::vector<double> mean(shape.channels, 0.0);
  std::vector<double> stddev(shape.channels, 0.0);
  for (std::size_t c = 0; c < shape.channels; ++c) {
    double s = 0.0;
    double ss = 0.0;
    for (const auto& img : train.images()) {
      for (float v : img.channel(c)) {
        s += v;
        ss += double(v) * v;
      }
    }
    const double count = static_cast<double>(plane * train.size());
    mean[c] = s / count;
    stddev[c] = std::sqrt(std::max(0.0, ss / count - mean[c] * mean[c]));
  }

  const int width = n > 100000 ? static_cast<int>(std::to_string(n - 1).size()) : 5;
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "planted_%0*zu", width, i);
    ids[i] = buf;
  }

  std::vector<std::optional<ImageRecord>> images(n);
  parallel_for(n, workers, [&](std::size_t i) {
    SplitMix64 rng(config.seed ^ static_cast<std::uint64_t>(i));
    const ImageRecord& src = train[sources[i]];
    switch (kinds[i]) {
      case PlantKind::copy:
        images[i] = src.renamed(ids[i], "copy of " + src.id());
        break;
      case PlantKind::noisy: {
        std::vector<float> px(src.pixels().begin(), src.pixels().end());
        for (float& v : px) {
          v = static_cast<float>(std::clamp(v + config.noise_sigma * rng.normal(), 0.0, 255.0));
        }
        images[i] = ImageRecord(ids[i], shape, std::move(px), "noisy copy of " + src.id());
        break;
      }
      case PlantKind::shift: {
        const std::size_t s = config.shift_pixels;
        std::vector<float> px(shape.size(), 0.0f);
        for (std::size_t c = 0; c < shape.channels; ++c) {
          for (std::size_t y = s; y < shape.height; ++y) {
            for (std::size_t x = s; x < shape.width; ++x) {
              px[(c * shape.height + y) * shape.width + x] = src.at(c, y - s, x - s);
            }
          }
        }
        images[i] = ImageRecord(ids[i], shape, std::move(px), "shifted copy of " + src.id());
        break;
      }
      case PlantKind::fresh:
        images[i] = smoothed_field(ids[i], shape, kFreshBlurSigma, mean, stddev, rng);
        break;
    }
  });

  std::vector<ImageRecord> out;
  out.reserve(n);
  GroundTruth truth;
  truth.entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(std::move(*images[i]));
    truth.entries.push_back(
        {ids[i], kinds[i], kinds[i] == PlantKind::fresh ? std::string() : train[sources[i]].id()});
  }
  return PlantResult{Dataset("planted", Role::synthetic, std::move(out)), std::move(truth)};
}

DetectorScore evaluate_detector(std::span<const FlaggedPair> flags, const GroundTruth& truth,
                                const std::set<PlantKind>& positive_kinds) {
  std::unordered_map<std::string_view, const TruthEntry*> index;
  for (const auto& e : truth.entries) index.emplace(e.output_id, &e);

  DetectorScore score;
  std::array<std::size_t, 4> total{};
  std::array<std::size_t, 4> hit{};
  for (const auto& e : truth.entries) {
    ++total[static_cast<std::size_t>(e.kind)];
    if (positive_kinds.count(e.kind)) ++score.positives;
  }

  std::set<std::string_view> seen;
  std::size_t flagged_positive = 0;
  std::size_t attributed = 0;
  for (const auto& f : flags) {
    auto it = index.find(f.query_id);
    if (it == index.end()) {
      fail(ErrorCode::invalid_argument, "flag refers to unknown output id '" + f.query_id + "'");
    }
    if (!seen.insert(f.query_id).second) continue;
    ++score.flagged;
    const TruthEntry& e = *it->second;
    const bool correct_source = e.kind != PlantKind::fresh && f.reference_id == e.source_id;
    if (e.kind == PlantKind::fresh || correct_source) ++hit[static_cast<std::size_t>(e.kind)];
    if (positive_kinds.count(e.kind)) {
      ++flagged_positive;
      if (correct_source) {
        ++attributed;
        ++score.true_positives;
      }
    }
  }
  if (score.flagged > 0) {
    score.precision = static_cast<double>(score.true_positives) / static_cast<double>(score.flagged);
  }
  if (score.positives > 0) {
    score.recall = static_cast<double>(score.true_positives) / static_cast<double>(score.positives);
  }
  for (std::size_t k = 0; k < 4; ++k) {
    if (total[k] > 0) score.kind_recall[k] = static_cast<double>(hit[k]) / static_cast<double>(total[k]);
  }
  if (flagged_positive > 0) {
    score.source_attribution =
        static_cast<double>(attributed) / static_cast<double>(flagged_positive);
  }
  return score;
}

ordered_json truth_to_json(const GroundTruth& truth, const PlantConfig& config) {
  ordered_json j;
  j["config"] = {{"n_output", config.n_output},   {"p_copy", config.p_copy},
                 {"p_noisy", config.p_noisy},     {"p_shift", config.p_shift},
                 {"noise_sigma", config.noise_sigma}, {"shift_pixels", config.shift_pixels},
                 {"seed", config.seed}};
  j["entries"] = ordered_json::array();
  for (const auto& e : truth.entries) {
    j["entries"].push_back(
        {{"output_id", e.output_id}, {"kind", to_string(e.kind)}, {"source_id", e.source_id}});
  }
  return j;
}

GroundTruth truth_from_json(const json& j) {
  try {
    GroundTruth truth;
    for (const auto& e : j.at("entries")) {
      truth.entries.push_back({e.at("output_id").get<std::string>(),
                               parse_plant_kind(e.at("kind").get<std::string>()),
                               e.at("source_id").get<std::string>()});
    }
    return truth;
  } catch (const json::exception& err) {
    fail(ErrorCode::format, std::string("malformed ground-truth JSON: ") + err.what());
  }
}

void write_truth(const std::filesystem::path& path, const GroundTruth& truth,
                 const PlantConfig& config) {
  write_file_atomic(path, truth_to_json(truth, config).dump(2) + "\n");
}

GroundTruth read_truth(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return truth_from_json(json::parse(bytes.begin(), bytes.end()));
  } catch (const json::exception& err) {
    fail(ErrorCode::format, "'" + path.string() + "' is not valid JSON: " + err.what());
  }
}

}  // namespace memaudit
