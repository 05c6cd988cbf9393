#include "memaudit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "memaudit/error.hpp"
#include "memaudit/ingest.hpp"

namespace memaudit {

using nlohmann::json;
using nlohmann::ordered_json;

double percentile(std::span<const double> sorted, double p) {
  if (sorted.empty()) fail(ErrorCode::empty_distribution, "percentile of an empty sample");
  if (!(p >= 0.0 && p <= 100.0)) {
    fail(ErrorCode::invalid_argument, "percentile " + std::to_string(p) + " outside [0, 100]");
  }
  const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  const double v = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
  return std::clamp(v, sorted[lo], sorted[hi]);
}

DistributionSummary summarize_values(std::vector<double> values, std::string label) {
  if (values.empty()) {
    fail(ErrorCode::empty_distribution, "distribution '" + label + "' has no valid entries");
  }
  std::sort(values.begin(), values.end());
  DistributionSummary s;
  s.label = std::move(label);
  s.n = values.size();
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  s.median = percentile(values, 50.0);
  s.min = values.front();
  s.max = values.back();
  for (double p : kReportedPercentiles) s.percentiles.emplace_back(p, percentile(values, p));
  s.values = std::move(values);
  return s;
}

DistributionSummary summarize(std::span<const TopKMatches> matches, std::string label) {
  std::vector<double> top1;
  top1.reserve(matches.size());
  for (const auto& m : matches) {
    if (m.query_valid && !m.matches.empty()) top1.push_back(m.matches.front().correlation);
  }
  return summarize_values(std::move(top1), std::move(label));
}

ThresholdRule ThresholdRule::parse(std::string_view text) {
  const auto colon = text.find(':');
  ThresholdRule rule;
  const std::string_view kind = text.substr(0, colon);
  if (colon == std::string_view::npos) {
    fail(ErrorCode::invalid_argument,
         "threshold rule '" + std::string(text) + "' must be percentile:P or fixed:V");
  }
  if (kind == "percentile") {
    rule.kind = Kind::percentile;
  } else if (kind == "fixed") {
    rule.kind = Kind::fixed;
  } else {
    fail(ErrorCode::invalid_argument, "unknown threshold rule '" + std::string(kind) + "'");
  }
  const std::string value(text.substr(colon + 1));
  std::size_t used = 0;
  try {
    rule.value = std::stod(value, &used);
  } catch (...) {
    used = 0;
  }
  if (used == 0 || used != value.size() || !std::isfinite(rule.value)) {
    fail(ErrorCode::invalid_argument, "threshold rule value '" + value + "' is not a number");
  }
  if (rule.kind == Kind::percentile && !(rule.value > 0.0 && rule.value < 100.0)) {
    fail(ErrorCode::invalid_argument, "percentile " + value + " must lie in (0, 100)");
  }
  return rule;
}

std::string ThresholdRule::to_string() const {
  std::ostringstream out;
  out << (kind == Kind::percentile ? "percentile:" : "fixed:") << value;
  return out.str();
}

Threshold derive_threshold(const DistributionSummary& baseline, const ThresholdRule& rule) {
  std::ostringstream provenance;
  if (rule.kind == ThresholdRule::Kind::fixed) {
    provenance << "fixed value " << rule.value;
    return {rule.value, provenance.str()};
  }
  if (!(rule.value > 0.0 && rule.value < 100.0)) {
    fail(ErrorCode::invalid_argument,
         "percentile " + std::to_string(rule.value) + " must lie in (0, 100)");
  }
  if (baseline.values.empty()) {
    fail(ErrorCode::empty_distribution, "baseline '" + baseline.label + "' is empty");
  }
  provenance << "percentile " << rule.value << " of baseline '" << baseline.label
             << "' (n=" << baseline.n << ", linear interpolation)";
  return {percentile(baseline.values, rule.value), provenance.str()};
}

std::vector<FlaggedPair> flag_memorized(std::span<const TopKMatches> matches, double threshold) {
  std::vector<FlaggedPair> flagged;
  for (const auto& m : matches) {
    if (!m.query_valid || m.matches.empty()) continue;
    const auto& top = m.matches.front();
    if (top.correlation >= threshold) flagged.push_back({m.query_id, top.reference_id, top.correlation});
  }
  std::sort(flagged.begin(), flagged.end(), [](const FlaggedPair& a, const FlaggedPair& b) {
    if (a.correlation != b.correlation) return a.correlation > b.correlation;
    return a.query_id < b.query_id;
  });
  return flagged;
}

Histogram histogram(std::span<const double> values, std::size_t n_bins, double lo, double hi) {
  if (n_bins == 0) fail(ErrorCode::invalid_argument, "histogram needs at least one bin");
  if (!(hi > lo)) fail(ErrorCode::invalid_argument, "histogram range must satisfy lo < hi");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(n_bins, 0);
  h.edges.resize(n_bins + 1);
  for (std::size_t i = 0; i <= n_bins; ++i) {
    h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_bins);
  }
  for (double v : values) {
    if (v < lo) {
      ++h.underflow;
    } else if (!(v <= hi)) {
      ++h.overflow;
    } else {
      const auto bin = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(n_bins));
      ++h.counts[std::min(bin, n_bins - 1)];
    }
  }
  return h;
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "json") return ReportFormat::json;
  if (text == "csv") return ReportFormat::csv;
  fail(ErrorCode::invalid_argument, "unknown report format '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// JSON

namespace {

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::optional<double> read_optional(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

ordered_json plan_to_json(const ComparisonPlan& p) {
  ordered_json j;
  j["n_query"] = p.n_query;
  j["n_reference"] = p.n_reference;
  j["total_comparisons"] = p.total_comparisons;
  j["vector_length"] = p.vector_length;
  j["block_query"] = p.block_query;
  j["block_reference"] = p.block_reference;
  j["estimated_multiply_adds"] = p.estimated_multiply_adds;
  return j;
}

ComparisonPlan plan_from_json(const json& j) {
  ComparisonPlan p;
  p.n_query = j.at("n_query").get<std::uint64_t>();
  p.n_reference = j.at("n_reference").get<std::uint64_t>();
  p.total_comparisons = j.at("total_comparisons").get<std::uint64_t>();
  p.vector_length = j.at("vector_length").get<std::uint64_t>();
  p.block_query = j.at("block_query").get<std::uint64_t>();
  p.block_reference = j.at("block_reference").get<std::uint64_t>();
  p.estimated_multiply_adds = j.at("estimated_multiply_adds").get<std::uint64_t>();
  return p;
}

}  // namespace

ordered_json to_json(const AuditReport& report) {
  ordered_json j;
  j["plan"] = plan_to_json(report.plan);
  j["threshold"] = {{"value", report.threshold.value},
                    {"provenance", report.threshold.provenance}};
  j["summaries"] = ordered_json::array();
  for (const auto& s : report.summaries) {
    ordered_json e;
    e["label"] = s.label;
    e["n"] = s.n;
    e["mean"] = s.mean;
    e["median"] = s.median;
    e["min"] = s.min;
    e["max"] = s.max;
    e["percentiles"] = ordered_json::array();
    for (const auto& [p, v] : s.percentiles) e["percentiles"].push_back({{"p", p}, {"value", v}});
    e["values"] = s.values;
    j["summaries"].push_back(std::move(e));
  }
  j["histograms"] = ordered_json::array();
  for (const auto& lh : report.histograms) {
    ordered_json e;
    e["label"] = lh.label;
    e["lo"] = lh.histogram.lo;
    e["hi"] = lh.histogram.hi;
    e["edges"] = lh.histogram.edges;
    e["counts"] = lh.histogram.counts;
    e["underflow"] = lh.histogram.underflow;
    e["overflow"] = lh.histogram.overflow;
    j["histograms"].push_back(std::move(e));
  }
  j["flagged"] = ordered_json::array();
  for (const auto& f : report.flagged) {
    j["flagged"].push_back(
        {{"query_id", f.query_id}, {"reference_id", f.reference_id}, {"correlation", f.correlation}});
  }
  if (report.metrics_table) {
    const auto& m = *report.metrics_table;
    j["metrics_table"] = {{"fid", optional_number(m.fid)},
                          {"is_mean", optional_number(m.is_mean)},
                          {"is_std", optional_number(m.is_std)},
                          {"mean_highest_correlation", optional_number(m.mean_highest_correlation)}};
  } else {
    j["metrics_table"] = nullptr;
  }
  j["sample_ids"] = report.sample_ids;
  return j;
}

AuditReport report_from_json(const json& j) {
  try {
    AuditReport r;
    r.plan = plan_from_json(j.at("plan"));
    r.threshold.value = j.at("threshold").at("value").get<double>();
    r.threshold.provenance = j.at("threshold").at("provenance").get<std::string>();
    for (const auto& e : j.at("summaries")) {
      DistributionSummary s;
      s.label = e.at("label").get<std::string>();
      s.n = e.at("n").get<std::size_t>();
      s.mean = e.at("mean").get<double>();
      s.median = e.at("median").get<double>();
      s.min = e.at("min").get<double>();
      s.max = e.at("max").get<double>();
      for (const auto& p : e.at("percentiles")) {
        s.percentiles.emplace_back(p.at("p").get<double>(), p.at("value").get<double>());
      }
      s.values = e.at("values").get<std::vector<double>>();
      r.summaries.push_back(std::move(s));
    }
    for (const auto& e : j.at("histograms")) {
      LabeledHistogram lh;
      lh.label = e.at("label").get<std::string>();
      lh.histogram.lo = e.at("lo").get<double>();
      lh.histogram.hi = e.at("hi").get<double>();
      lh.histogram.edges = e.at("edges").get<std::vector<double>>();
      lh.histogram.counts = e.at("counts").get<std::vector<std::size_t>>();
      lh.histogram.underflow = e.at("underflow").get<std::size_t>();
      lh.histogram.overflow = e.at("overflow").get<std::size_t>();
      r.histograms.push_back(std::move(lh));
    }
    for (const auto& e : j.at("flagged")) {
      r.flagged.push_back({e.at("query_id").get<std::string>(),
                           e.at("reference_id").get<std::string>(),
                           e.at("correlation").get<double>()});
    }
    if (!j.at("metrics_table").is_null()) {
      const auto& m = j.at("metrics_table");
      r.metrics_table = MetricsTable{read_optional(m, "fid"), read_optional(m, "is_mean"),
                                     read_optional(m, "is_std"),
                                     read_optional(m, "mean_highest_correlation")};
    }
    r.sample_ids = j.at("sample_ids").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& err) {
    fail(ErrorCode::format, std::string("malformed report JSON: ") + err.what());
  }
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string g6(const std::optional<double>& v) { return v ? g6(*v) : std::string(); }

std::string render_csv(const AuditReport& report) {
  std::ostringstream out;
  out << "query_id,reference_id,correlation\n";
  for (const auto& f : report.flagged) {
    out << csv_field(f.query_id) << ',' << csv_field(f.reference_id) << ',' << g6(f.correlation)
        << '\n';
  }
  if (report.summaries.empty()) return out.str();
  out << "\nlabel,n,mean,median,min,max";
  for (double p : kReportedPercentiles) out << ",p" << g6(p);
  out << '\n';
  for (const auto& s : report.summaries) {
    out << csv_field(s.label) << ',' << s.n << ',' << g6(s.mean) << ',' << g6(s.median) << ','
        << g6(s.min) << ',' << g6(s.max);
    for (const auto& [p, v] : s.percentiles) out << ',' << g6(v);
    out << '\n';
  }
  out << "\nthreshold,provenance,total_comparisons";
  if (report.metrics_table) out << ",fid,is_mean,is_std,mean_highest_correlation";
  out << '\n' << g6(report.threshold.value) << ',' << csv_field(report.threshold.provenance) << ','
      << report.plan.total_comparisons;
  if (report.metrics_table) {
    const auto& m = *report.metrics_table;
    out << ',' << g6(m.fid) << ',' << g6(m.is_mean) << ',' << g6(m.is_std) << ','
        << g6(m.mean_highest_correlation);
  }
  out << '\n';
  return out.str();
}

}  // namespace

std::string render_report(const AuditReport& report, ReportFormat format) {
  if (format == ReportFormat::csv) return render_csv(report);
  return to_json(report).dump(2) + "\n";
}

void export_report(const AuditReport& report, const std::filesystem::path& path,
                   ReportFormat format) {
  write_file_atomic(path, render_report(report, format));
}

AuditReport read_report_json(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& err) {
    fail(ErrorCode::format, "'" + path.string() + "' is not valid JSON: " + err.what());
  }
  return report_from_json(j);
}

// ---------------------------------------------------------------------------
// Match files

ordered_json to_json(const MatchSet& set) {
  ordered_json j;
  j["label"] = set.label;
  j["plan"] = plan_to_json(set.plan);
  j["queries"] = ordered_json::array();
  for (const auto& m : set.matches) {
    ordered_json q;
    q["query_id"] = m.query_id;
    q["query_valid"] = m.query_valid;
    q["skipped_invalid"] = m.skipped_invalid;
    q["matches"] = ordered_json::array();
    for (const auto& match : m.matches) {
      q["matches"].push_back(
          {{"reference_id", match.reference_id}, {"correlation", match.correlation}});
    }
    j["queries"].push_back(std::move(q));
  }
  return j;
}

MatchSet match_set_from_json(const json& j) {
  try {
    MatchSet set;
    set.label = j.at("label").get<std::string>();
    set.plan = plan_from_json(j.at("plan"));
    for (const auto& q : j.at("queries")) {
      TopKMatches m;
      m.query_id = q.at("query_id").get<std::string>();
      m.query_valid = q.at("query_valid").get<bool>();
      m.skipped_invalid = q.at("skipped_invalid").get<std::size_t>();
      for (const auto& e : q.at("matches")) {
        m.matches.push_back({e.at("reference_id").get<std::string>(),
                             e.at("correlation").get<double>()});
      }
      set.matches.push_back(std::move(m));
    }
    return set;
  } catch (const json::exception& err) {
    fail(ErrorCode::format, std::string("malformed matches JSON: ") + err.what());
  }
}

void write_match_set(const std::filesystem::path& path, const MatchSet& set) {
  write_file_atomic(path, to_json(set).dump(2) + "\n");
}

MatchSet read_match_set(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& err) {
    fail(ErrorCode::format, "'" + path.string() + "' is not valid JSON: " + err.what());
  }
  return match_set_from_json(j);
}

AuditReport build_audit_report(const MatchSet& primary, const MatchSet* baseline,
                               const MatchSet* cross, const ThresholdRule& rule,
                               std::size_t histogram_bins, std::optional<MetricsTable> metrics) {
  if (rule.kind == ThresholdRule::Kind::percentile && baseline == nullptr) {
    fail(ErrorCode::invalid_argument,
         "a percentile threshold needs a baseline (test-vs-train) match set");
  }
  AuditReport report;
  report.plan = primary.plan;
  const auto add = [&](const MatchSet& set) {
    report.summaries.push_back(summarize(set.matches, set.label));
    report.histograms.push_back(
        {set.label, histogram(report.summaries.back().values, histogram_bins)});
  };
  add(primary);
  if (baseline) add(*baseline);
  if (cross) add(*cross);

  report.threshold = derive_threshold(baseline ? report.summaries[1] : report.summaries[0], rule);
  report.flagged = flag_memorized(primary.matches, report.threshold.value);
  MetricsTable table = metrics.value_or(MetricsTable{});
  table.mean_highest_correlation = report.summaries.front().mean;
  report.metrics_table = table;
  for (const auto& m : primary.matches) report.sample_ids.push_back(m.query_id);
  return report;
}

}  // namespace memaudit
