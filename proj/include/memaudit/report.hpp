#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "memaudit/correlate.hpp"

namespace memaudit {

inline constexpr std::array<double, 8> kReportedPercentiles{1, 5, 25, 50, 75, 95, 99, 99.5};

/// Linear interpolation between order statistics: rank p/100 * (n - 1)
/// over the ascending sample (numpy's default convention).
double percentile(std::span<const double> sorted, double p);

/// Statistics over the top-1 correlation of every valid query.
struct DistributionSummary {
  std::string label;
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::vector<std::pair<double, double>> percentiles;  // (p, value)
  std::vector<double> values;                          // ascending
  friend bool operator==(const DistributionSummary&, const DistributionSummary&) = default;
};

DistributionSummary summarize(std::span<const TopKMatches> matches, std::string label);
DistributionSummary summarize_values(std::vector<double> values, std::string label);

/// Memorization decision rule.
struct ThresholdRule {
  enum class Kind { percentile, fixed };
  Kind kind = Kind::percentile;
  double value = 99.5;

  /// "percentile:99.5" or "fixed:0.95".
  static ThresholdRule parse(std::string_view text);
  std::string to_string() const;
};

struct Threshold {
  double value = 0.0;
  std::string provenance;
  friend bool operator==(const Threshold&, const Threshold&) = default;
};

Threshold derive_threshold(const DistributionSummary& baseline, const ThresholdRule& rule);

struct FlaggedPair {
  std::string query_id;
  std::string reference_id;
  double correlation = 0.0;
  friend bool operator==(const FlaggedPair&, const FlaggedPair&) = default;
};

/// Every (query, top-1 reference) pair at or above `threshold`, descending,
/// ties by query id.
std::vector<FlaggedPair> flag_memorized(std::span<const TopKMatches> matches, double threshold);

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> edges;  // n_bins + 1
  std::vector<std::size_t> counts;
  std::size_t underflow = 0;
  std::size_t overflow = 0;
  friend bool operator==(const Histogram&, const Histogram&) = default;
};

inline constexpr std::size_t kDefaultHistogramBins = 50;

/// Uniform left-inclusive bins; the last bin also includes `hi`.
Histogram histogram(std::span<const double> values, std::size_t n_bins = kDefaultHistogramBins,
                    double lo = 0.0, double hi = 1.0);

struct LabeledHistogram {
  std::string label;
  Histogram histogram;
  friend bool operator==(const LabeledHistogram&, const LabeledHistogram&) = default;
};

struct MetricsTable {
  std::optional<double> fid;
  std::optional<double> is_mean;
  std::optional<double> is_std;
  std::optional<double> mean_highest_correlation;
  friend bool operator==(const MetricsTable&, const MetricsTable&) = default;
};

struct AuditReport {
  ComparisonPlan plan;
  std::vector<DistributionSummary> summaries;
  std::vector<LabeledHistogram> histograms;
  Threshold threshold;
  std::vector<FlaggedPair> flagged;
  std::optional<MetricsTable> metrics_table;
  std::vector<std::string> sample_ids;  // queries of the primary audit
  friend bool operator==(const AuditReport&, const AuditReport&) = default;
};

enum class ReportFormat { json, csv };
ReportFormat parse_report_format(std::string_view text);

nlohmann::ordered_json to_json(const AuditReport& report);
AuditReport report_from_json(const nlohmann::json& json);

/// JSON keeps full double precision; CSV renders 6 significant digits.
std::string render_report(const AuditReport& report, ReportFormat format);
void export_report(const AuditReport& report, const std::filesystem::path& path,
                   ReportFormat format);
AuditReport read_report_json(const std::filesystem::path& path);

/// Match lists of one audit direction, as written by `memaudit audit`
/// and consumed by `memaudit report`.
struct MatchSet {
  std::string label;
  ComparisonPlan plan;
  std::vector<TopKMatches> matches;
  friend bool operator==(const MatchSet&, const MatchSet&) = default;
};

nlohmann::ordered_json to_json(const MatchSet& set);
MatchSet match_set_from_json(const nlohmann::json& json);
void write_match_set(const std::filesystem::path& path, const MatchSet& set);
MatchSet read_match_set(const std::filesystem::path& path);

/// Assembles the full report: summaries and histograms for every supplied
/// direction, the threshold from `rule` (percentile rules read the
/// baseline), flags on the primary matches, and the metrics table with the
/// primary mean highest correlation filled in.
AuditReport build_audit_report(const MatchSet& primary, const MatchSet* baseline,
                               const MatchSet* cross, const ThresholdRule& rule,
                               std::size_t histogram_bins = kDefaultHistogramBins,
                               std::optional<MetricsTable> metrics = std::nullopt);

}  // namespace memaudit
