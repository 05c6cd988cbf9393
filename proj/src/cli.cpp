#include "memaudit/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <variant>

#include <nlohmann/json.hpp>

#include "memaudit/correlate.hpp"
#include "memaudit/error.hpp"
#include "memaudit/harness.hpp"
#include "memaudit/ingest.hpp"
#include "memaudit/metrics.hpp"
#include "memaudit/parallel.hpp"
#include "memaudit/preprocess.hpp"
#include "memaudit/random.hpp"
#include "memaudit/report.hpp"

namespace fs = std::filesystem;

namespace memaudit::cli {

std::string format_progress(const std::string& label, std::uint64_t done, std::uint64_t total,
                            double elapsed_seconds) {
  const double fraction = total == 0 ? 1.0 : static_cast<double>(done) / static_cast<double>(total);
  char buf[256];
  if (done >= total) {
    std::snprintf(buf, sizeof buf, "%s: %llu/%llu comparisons (100.0%%), done in %.1fs",
                  label.c_str(), static_cast<unsigned long long>(done),
                  static_cast<unsigned long long>(total), elapsed_seconds);
    return buf;
  }
  const double rate = elapsed_seconds > 0 ? static_cast<double>(done) / elapsed_seconds : 0.0;
  char eta[32] = "?";
  if (rate > 0) {
    std::snprintf(eta, sizeof eta, "%.0fs", static_cast<double>(total - done) / rate);
  }
  std::snprintf(buf, sizeof buf, "%s: %llu/%llu comparisons (%.1f%%), %.3g/s, ETA %s",
                label.c_str(), static_cast<unsigned long long>(done),
                static_cast<unsigned long long>(total), 100.0 * fraction, rate, eta);
  return buf;
}

ProgressReporter::ProgressReporter(std::string label, std::uint64_t total, std::ostream& sink,
                                   bool quiet, std::chrono::milliseconds interval)
    : label_(std::move(label)),
      total_(total),
      sink_(sink),
      quiet_(quiet),
      interval_(interval),
      start_(Clock::now()),
      last_(start_) {}

void ProgressReporter::update(std::uint64_t done) {
  done_ = done;
  if (quiet_ || final_printed_) return;
  const auto now = Clock::now();
  const bool final = done >= total_;
  if (!final && now - last_ < interval_) return;
  last_ = now;
  final_printed_ = final;
  sink_ << format_progress(label_, done, total_,
                           std::chrono::duration<double>(now - start_).count())
        << '\n';
}

void ProgressReporter::finish() { update(std::max(done_, total_)); }

namespace {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

class Log {
 public:
  Log(std::ostream& sink, Level level) : sink_(sink), level_(level) {}
  void error(const std::string& m) const { emit(Level::error, "error", m); }
  void warn(const std::string& m) const { emit(Level::warn, "warning", m); }
  void info(const std::string& m) const { emit(Level::info, "info", m); }
  void debug(const std::string& m) const { emit(Level::debug, "debug", m); }

 private:
  void emit(Level l, const char* tag, const std::string& m) const {
    if (l <= level_) sink_ << "memaudit: " << tag << ": " << m << '\n';
  }
  std::ostream& sink_;
  Level level_;
};

Level parse_level(const std::string& text) {
  if (text == "error") return Level::error;
  if (text == "warn") return Level::warn;
  if (text == "info") return Level::info;
  if (text == "debug") return Level::debug;
  fail(ErrorCode::invalid_argument, "unknown log level '" + text + "'");
}

struct Globals {
  std::size_t workers = 0;
  bool quiet = false;
  std::string log_level = "info";
  double progress_seconds = 5.0;

  std::size_t resolved_workers() const { return workers > 0 ? workers : default_workers(); }
};

ChannelMask parse_channels(const std::string& text) {
  ChannelMask mask;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    long v = -1;
    try {
      v = std::stol(item, &used);
    } catch (...) {
      used = 0;
    }
    if (used == 0 || used != item.size() || v < 0) {
      fail(ErrorCode::invalid_argument, "--channels: '" + item + "' is not a channel index");
    }
    mask.push_back(static_cast<std::size_t>(v));
  }
  if (mask.empty()) fail(ErrorCode::invalid_argument, "--channels is empty");
  return mask;
}

/// Ascending indices of a without-replacement sample (partial Fisher-Yates
/// over SplitMix64(seed)); everything when n <= count.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (count >= n) return idx;
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

EmbeddingSet subset(const EmbeddingSet& set, std::span<const std::size_t> indices) {
  std::vector<std::string> ids;
  std::vector<float> rows;
  for (std::size_t i : indices) {
    ids.push_back(set.ids()[i]);
    auto r = set.row(i);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return EmbeddingSet(std::move(ids), set.dim(), std::move(rows));
}

bool is_embedding_manifest(const Manifest& m) {
  return !m.entries.empty() && std::all_of(m.entries.begin(), m.entries.end(), [](const auto& e) {
    return e.format == FileFormat::emb;
  });
}

void check_role(const Manifest& m, Role expected, const Log& log) {
  if (m.role != expected) {
    log.warn("manifest '" + m.location.string() + "' declares role '" +
             std::string(to_string(m.role)) + "' but is used as " +
             std::string(to_string(expected)));
  }
}

MatchSet run_search(const std::string& label, const VectorSource& query,
                    const VectorSource& reference, SearchOptions options, const Globals& g,
                    std::ostream& err) {
  const ComparisonPlan plan =
      plan_audit(query.size(), reference.size(), query.length(), options.block_budget_bytes);
  ProgressReporter progress(
      label, plan.total_comparisons, err, g.quiet,
      std::chrono::milliseconds(static_cast<long long>(g.progress_seconds * 1000.0)));
  options.progress = [&](std::uint64_t done, const ComparisonPlan&) { progress.update(done); };
  MatchSet set{label, plan, query.size() == 0 ? std::vector<TopKMatches>{}
                                              : search_top_k(query, reference, options)};
  progress.finish();
  return set;
}

std::optional<MetricsTable> read_metrics_table(const std::string& path) {
  if (path.empty()) return std::nullopt;
  const auto bytes = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::format, "'" + path + "' is not valid JSON: " + e.what());
  }
  MetricsTable table;
  if (j.contains("fid") && j["fid"].is_number()) table.fid = j["fid"].get<double>();
  if (j.contains("inception_score") && j["inception_score"].is_object()) {
    table.is_mean = j["inception_score"].at("mean").get<double>();
    table.is_std = j["inception_score"].at("std").get<double>();
  }
  return table;
}

ReportFormat format_for(const std::string& format, const std::string& path) {
  if (!format.empty()) return parse_report_format(format);
  return fs::path(path).extension() == ".csv" ? ReportFormat::csv : ReportFormat::json;
}

// ---------------------------------------------------------------------------

struct AuditArgs {
  std::string train, synthetic, test;
  std::string channels;
  std::string combine = "concatenate";
  std::size_t k = 5;
  std::size_t sample = 1000;
  std::optional<std::uint64_t> seed;
  double block_budget_mib = 32;
  std::string rule;
  std::string out;
  std::string format;
  std::string matches_out, baseline_out, cross_out;
  std::string metrics;
  std::size_t histogram_bins = kDefaultHistogramBins;
  bool cosine = false;
};

int run_audit(const AuditArgs& a, const Globals& g, const Log& log, std::ostream& err) {
  // Everything that can be checked without touching data is checked first.
  const ThresholdRule rule =
      ThresholdRule::parse(a.rule.empty() ? "percentile:99.5" : a.rule);
  if (rule.kind == ThresholdRule::Kind::percentile && a.test.empty()) {
    fail(ErrorCode::invalid_argument,
         "--rule " + rule.to_string() + " needs a --test manifest for the baseline; "
         "pass --test or use --rule fixed:V");
  }
  if (!a.seed) fail(ErrorCode::invalid_argument, "--seed is required for the synthetic sample");
  const ReportFormat format = format_for(a.format, a.out);
  const CombineMode combine = parse_combine_mode(a.combine);
  const std::optional<ChannelMask> mask =
      a.channels.empty() ? std::nullopt : std::optional<ChannelMask>(parse_channels(a.channels));
  if (a.k == 0) fail(ErrorCode::invalid_argument, "--k must be at least 1");
  if (a.sample == 0) fail(ErrorCode::invalid_argument, "--sample must be at least 1");
  if (!(a.block_budget_mib > 0)) fail(ErrorCode::invalid_argument, "--block-budget-mib must be positive");
  if (a.histogram_bins == 0) fail(ErrorCode::invalid_argument, "--histogram-bins must be positive");

  const Manifest train_m = load_manifest(a.train);
  const Manifest synth_m = load_manifest(a.synthetic);
  const std::optional<Manifest> test_m =
      a.test.empty() ? std::nullopt : std::optional<Manifest>(load_manifest(a.test));
  const std::optional<MetricsTable> metrics = read_metrics_table(a.metrics);
  check_role(train_m, Role::train, log);
  check_role(synth_m, Role::synthetic, log);
  if (test_m) check_role(*test_m, Role::test, log);

  SearchOptions options;
  options.k = a.k;
  options.workers = g.resolved_workers();
  options.block_budget_bytes = static_cast<std::size_t>(a.block_budget_mib * 1024 * 1024);
  log.debug("using " + std::to_string(options.workers) + " worker(s)");

  MatchSet primary;
  std::optional<MatchSet> baseline;
  std::optional<MatchSet> cross;
  if (is_embedding_manifest(train_m)) {
    const EmbeddingMetric metric = a.cosine ? EmbeddingMetric::cosine : EmbeddingMetric::pearson;
    const EmbeddingSet train = load_embedding_set(train_m);
    const EmbeddingSet all_synth = load_embedding_set(synth_m);
    const EmbeddingSet synth =
        subset(all_synth, sample_indices(all_synth.size(), a.sample, *a.seed));
    log.info("auditing " + std::to_string(synth.size()) + " of " +
             std::to_string(all_synth.size()) + " synthetic embeddings against " +
             std::to_string(train.size()) + " training embeddings");
    const EmbeddingSource train_src(train, metric);
    const EmbeddingSource synth_src(synth, metric);
    primary = run_search("synth-vs-train", synth_src, train_src, options, g, err);
    if (test_m) {
      const EmbeddingSet test = load_embedding_set(*test_m);
      const EmbeddingSource test_src(test, metric);
      baseline = run_search("test-vs-train", test_src, train_src, options, g, err);
      cross = run_search("synth-vs-test", synth_src, test_src, options, g, err);
    }
  } else {
    if (a.cosine) fail(ErrorCode::invalid_argument, "--cosine applies to embedding manifests only");
    const Dataset train = load_dataset(train_m);
    const Dataset all_synth = load_dataset(synth_m);
    if (train.empty()) fail(ErrorCode::invalid_argument, "training manifest holds no images");
    const Dataset synth = all_synth.subset(sample_indices(all_synth.size(), a.sample, *a.seed));
    const ChannelMask used =
        normalize_mask(mask.value_or(default_channel_mask(train.shape().channels)),
                       train.shape().channels);
    log.info("auditing " + std::to_string(synth.size()) + " of " +
             std::to_string(all_synth.size()) + " synthetic images against " +
             std::to_string(train.size()) + " training images (" + to_string(train.shape()) +
             ", " + std::to_string(used.size()) + " channel(s), " +
             std::string(to_string(combine)) + ")");
    if (!synth.empty() && synth.shape() != train.shape()) {
      fail(ErrorCode::invalid_argument, "synthetic images are " + to_string(synth.shape()) +
                                            " but training images are " +
                                            to_string(train.shape()));
    }
    const DatasetSource train_src(train, used, combine);
    const DatasetSource synth_src(synth, used, combine);
    primary = run_search("synth-vs-train", synth_src, train_src, options, g, err);
    if (test_m) {
      const Dataset test = load_dataset(*test_m);
      if (!test.empty() && test.shape() != train.shape()) {
        fail(ErrorCode::invalid_argument, "test images are " + to_string(test.shape()) +
                                              " but training images are " +
                                              to_string(train.shape()));
      }
      const DatasetSource test_src(test, used, combine);
      baseline = run_search("test-vs-train", test_src, train_src, options, g, err);
      if (!test.empty()) cross = run_search("synth-vs-test", synth_src, test_src, options, g, err);
    }
  }

  const AuditReport report =
      build_audit_report(primary, baseline ? &*baseline : nullptr, cross ? &*cross : nullptr,
                         rule, a.histogram_bins, metrics);
  if (!a.matches_out.empty()) write_match_set(a.matches_out, primary);
  if (!a.baseline_out.empty() && baseline) write_match_set(a.baseline_out, *baseline);
  if (!a.cross_out.empty() && cross) write_match_set(a.cross_out, *cross);
  export_report(report, a.out, format);

  log.info("threshold " + std::to_string(report.threshold.value) + " (" +
           report.threshold.provenance + "); " + std::to_string(report.flagged.size()) +
           " synthetic image(s) flagged; report written to " + a.out);
  return report.flagged.empty() ? kSuccess : kMemorizationFlagged;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string matches, baseline, cross;
  std::string rule;
  std::string format;
  std::string out;
  std::string metrics;
  std::size_t histogram_bins = kDefaultHistogramBins;
};

int run_report(const ReportArgs& a, const Log& log) {
  const ThresholdRule rule = ThresholdRule::parse(a.rule.empty() ? "percentile:99.5" : a.rule);
  if (rule.kind == ThresholdRule::Kind::percentile && a.baseline.empty()) {
    fail(ErrorCode::invalid_argument, "--rule " + rule.to_string() + " needs --baseline");
  }
  if (a.histogram_bins == 0) fail(ErrorCode::invalid_argument, "--histogram-bins must be positive");
  const ReportFormat format = format_for(a.format, a.out);
  const MatchSet primary = read_match_set(a.matches);
  const std::optional<MatchSet> baseline =
      a.baseline.empty() ? std::nullopt : std::optional<MatchSet>(read_match_set(a.baseline));
  const std::optional<MatchSet> cross =
      a.cross.empty() ? std::nullopt : std::optional<MatchSet>(read_match_set(a.cross));
  const AuditReport report =
      build_audit_report(primary, baseline ? &*baseline : nullptr, cross ? &*cross : nullptr,
                         rule, a.histogram_bins, read_metrics_table(a.metrics));
  export_report(report, a.out, format);
  log.info(std::to_string(report.flagged.size()) + " image(s) flagged; report written to " + a.out);
  return report.flagged.empty() ? kSuccess : kMemorizationFlagged;
}

// ---------------------------------------------------------------------------

struct MetricsArgs {
  std::string ssim_pairs, mi_pairs;
  std::vector<std::string> fid;
  std::string is;
  std::size_t splits = kDefaultIsSplits;
  std::size_t mi_bins = kDefaultMiBins;
  std::size_t ssim_window = 11;
  double ssim_sigma = 1.5;
  double dynamic_range = 255.0;
  std::string out;
};

ImageRecord load_single_image(const fs::path& path) {
  if (format_from_extension(path) == FileFormat::pgm) return read_pgm(path);
  for (auto& r : read_ivc(path)) {
    if (auto* img = std::get_if<ImageRecord>(&r)) return std::move(*img);
  }
  fail(ErrorCode::format, "'" + path.string() + "' contains no 2D image");
}

std::vector<std::pair<fs::path, fs::path>> read_pairs(const fs::path& path) {
  const auto bytes = read_file(path);
  std::stringstream in(std::string(bytes.begin(), bytes.end()));
  std::vector<std::pair<fs::path, fs::path>> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::stringstream fields(line);
    std::string a;
    std::string b;
    std::string extra;
    if (!(fields >> a) || a.front() == '#') continue;
    if (!(fields >> b) || (fields >> extra)) {
      fail(ErrorCode::format, "'" + path.string() + "' line " + std::to_string(line_no) +
                                  ": expected two image paths");
    }
    const auto resolve = [&](const std::string& p) {
      return fs::path(p).is_absolute() ? fs::path(p) : path.parent_path() / p;
    };
    pairs.emplace_back(resolve(a), resolve(b));
  }
  return pairs;
}

int run_metrics(const MetricsArgs& a, const Globals& g, const Log& log, std::ostream& out) {
  SsimParams params;
  params.window = a.ssim_window;
  params.sigma = a.ssim_sigma;
  params.dynamic_range = a.dynamic_range;
  params.validate();
  if (a.mi_bins < 2) fail(ErrorCode::invalid_argument, "--mi-bins must be at least 2");
  if (a.splits == 0) fail(ErrorCode::invalid_argument, "--splits must be at least 1");
  if (a.ssim_pairs.empty() && a.mi_pairs.empty() && a.fid.empty() && a.is.empty()) {
    fail(ErrorCode::invalid_argument,
         "nothing to compute: pass --ssim-pairs, --mi-pairs, --fid or --is");
  }

  nlohmann::ordered_json result;
  const auto pairwise = [&](const std::string& file, const char* key, auto&& metric) {
    const auto pairs = read_pairs(file);
    std::vector<double> values(pairs.size());
    parallel_for(pairs.size(), g.resolved_workers(), [&](std::size_t i) {
      values[i] = metric(load_single_image(pairs[i].first), load_single_image(pairs[i].second));
    });
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      list.push_back({{"a", pairs[i].first.string()},
                      {"b", pairs[i].second.string()},
                      {"value", values[i]}});
    }
    result[key] = std::move(list);
  };
  if (!a.ssim_pairs.empty()) {
    pairwise(a.ssim_pairs, "ssim",
             [&](const ImageRecord& x, const ImageRecord& y) { return ssim(x, y, params); });
  }
  if (!a.mi_pairs.empty()) {
    pairwise(a.mi_pairs, "mutual_information", [&](const ImageRecord& x, const ImageRecord& y) {
      return mutual_information(x, y, a.mi_bins);
    });
  }
  if (!a.fid.empty()) {
    const GaussianStats real = gaussian_stats(read_embeddings(a.fid.at(0)));
    const GaussianStats synth = gaussian_stats(read_embeddings(a.fid.at(1)));
    result["fid"] = fid(real, synth);
  }
  if (!a.is.empty()) {
    const InceptionScore score = inception_score(read_embeddings(a.is), a.splits);
    result["inception_score"] = {{"mean", score.mean}, {"std", score.std}, {"splits", score.splits}};
  }
  const std::string text = result.dump(2) + "\n";
  if (a.out.empty() || a.out == "-") {
    out << text;
  } else {
    write_file_atomic(a.out, text);
    log.info("metrics written to " + a.out);
  }
  return kSuccess;
}

// ---------------------------------------------------------------------------

struct PreprocessArgs {
  std::string input, output, manifest_out;
  double min_fraction = 0.15;
  double threshold = 50.0;
  std::size_t filter_channel = 0;
  std::vector<std::size_t> pad, resize;
  std::string remap;
  std::optional<std::size_t> label_channel;
  bool rescale = false;
};

fs::path sibling_manifest(const std::string& explicit_path, const std::string& container) {
  if (!explicit_path.empty()) return explicit_path;
  fs::path p = container;
  p.replace_extension(".mf");
  return p;
}

int run_preprocess(const PreprocessArgs& a, const Log& log) {
  SliceFilterRule rule{a.min_fraction, a.threshold, a.filter_channel};
  rule.validate();
  const LabelMap mapping = a.remap.empty() ? LabelMap{} : parse_label_map(a.remap);
  for (const auto* dims : {&a.pad, &a.resize}) {
    if (!dims->empty() && (dims->size() != 2 || dims->at(0) == 0 || dims->at(1) == 0)) {
      fail(ErrorCode::invalid_argument, "--pad/--resize take two positive sizes H W");
    }
  }

  const Manifest input = load_manifest(a.input);
  auto records = load_records(input);
  std::vector<IvcRecord> out;
  std::size_t volumes = 0;
  std::size_t dropped = 0;
  for (auto& record : records) {
    std::vector<ImageRecord> images;
    if (auto* vol = std::get_if<VolumeRecord>(&record)) {
      ++volumes;
      images = slice_volume(*vol, rule);
      dropped += vol->depth() - images.size();
    } else {
      images.push_back(std::move(std::get<ImageRecord>(record)));
    }
    for (auto& img : images) {
      ImageRecord cur = std::move(img);
      if (!a.pad.empty()) cur = zero_pad(cur, a.pad[0], a.pad[1]);
      if (!a.resize.empty()) cur = resize_bilinear(cur, a.resize[0], a.resize[1]);
      std::optional<std::size_t> label = a.label_channel;
      if (!label && cur.channels() == 5) label = 4;
      std::vector<std::size_t> label_only;
      std::vector<std::size_t> intensity;
      if (label) {
        if (*label >= cur.channels()) {
          fail(ErrorCode::invalid_argument, "--label-channel " + std::to_string(*label) +
                                                " out of range for '" + cur.id() + "'");
        }
        label_only.push_back(*label);
        for (std::size_t c = 0; c < cur.channels(); ++c) {
          if (c != *label) intensity.push_back(c);
        }
      }
      if (!mapping.empty()) cur = remap_labels(cur, mapping, label_only);
      if (a.rescale && (!label || !intensity.empty())) cur = rescale_intensity(cur, intensity);
      out.emplace_back(std::move(cur));
    }
  }
  if (out.empty()) fail(ErrorCode::empty_set, "preprocess produced no images");
  write_ivc(out, a.output);
  Manifest result{input.name, input.role, {{fs::absolute(a.output), FileFormat::ivc}}, {}};
  const fs::path manifest_path = sibling_manifest(a.manifest_out, a.output);
  write_manifest(result, manifest_path);
  log.info(std::to_string(out.size()) + " image(s) written to " + a.output + " (" +
           std::to_string(volumes) + " volume(s) sliced, " + std::to_string(dropped) +
           " slice(s) dropped); manifest " + manifest_path.string());
  return kSuccess;
}

// ---------------------------------------------------------------------------

struct PlantArgs {
  std::string train, out, truth, manifest_out;
  PlantConfig config;
  std::optional<std::uint64_t> seed;
};

int run_plant(PlantArgs a, const Globals& g, const Log& log) {
  if (!a.seed) fail(ErrorCode::invalid_argument, "--seed is required");
  a.config.seed = *a.seed;
  a.config.validate();
  const Dataset train = load_dataset(load_manifest(a.train));
  const PlantResult result = plant(train, a.config, g.resolved_workers());
  std::vector<IvcRecord> records(result.synthetic.images().begin(),
                                 result.synthetic.images().end());
  write_ivc(records, a.out);
  write_truth(a.truth, result.truth, a.config);
  const fs::path manifest_path = sibling_manifest(a.manifest_out, a.out);
  write_manifest(Manifest{"planted", Role::synthetic, {{fs::absolute(a.out), FileFormat::ivc}}, {}},
                 manifest_path);
  const auto counts = result.truth.kind_counts();
  log.info("planted " + std::to_string(a.config.n_output) + " image(s): " +
           std::to_string(counts[0]) + " copy, " + std::to_string(counts[1]) + " noisy, " +
           std::to_string(counts[2]) + " shift, " + std::to_string(counts[3]) + " fresh");
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"memaudit: audit synthetic images for memorized training data"};
  app.name(args.empty() ? "memaudit" : fs::path(args.front()).filename().string());
  app.require_subcommand(1);
  app.fallthrough();
  app.failure_message(CLI::FailureMessage::help);

  Globals g;
  app.add_option("--workers", g.workers, "Worker threads (default: MEMAUDIT_WORKERS or all cores)")
      ->check(CLI::PositiveNumber);
  auto* quiet = app.add_flag("--quiet", g.quiet, "Suppress progress and info lines");
  app.add_option("--log-level", g.log_level, "error|warn|info|debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}))
      ->excludes(quiet);
  app.add_option("--progress-interval", g.progress_seconds, "Seconds between progress lines")
      ->check(CLI::NonNegativeNumber);

  AuditArgs audit;
  auto* audit_cmd = app.add_subcommand("audit", "Top-k correlation audit of synthetic vs training images");
  audit_cmd->add_option("--train", audit.train, "Training manifest")->required();
  audit_cmd->add_option("--synthetic", audit.synthetic, "Synthetic manifest")->required();
  audit_cmd->add_option("--test", audit.test, "Held-out test manifest (baseline)");
  audit_cmd->add_option("--channels", audit.channels, "Comma-separated channel indices");
  audit_cmd->add_option("--combine", audit.combine, "concatenate|channel-mean");
  audit_cmd->add_option("--k", audit.k, "Matches kept per query")->capture_default_str();
  audit_cmd->add_option("--sample", audit.sample, "Synthetic images sampled")->capture_default_str();
  audit_cmd->add_option("--seed", audit.seed, "Sampling seed (required)");
  audit_cmd->add_option("--block-budget-mib", audit.block_budget_mib, "Tile working-set budget")
      ->capture_default_str();
  audit_cmd->add_option("--rule", audit.rule, "percentile:P or fixed:V (default percentile:99.5)");
  audit_cmd->add_option("--out", audit.out, "Report path")->required();
  audit_cmd->add_option("--format", audit.format, "json|csv (default from --out extension)");
  audit_cmd->add_option("--matches-out", audit.matches_out, "Write synth-vs-train matches");
  audit_cmd->add_option("--baseline-out", audit.baseline_out, "Write test-vs-train matches");
  audit_cmd->add_option("--cross-out", audit.cross_out, "Write synth-vs-test matches");
  audit_cmd->add_option("--metrics", audit.metrics, "Metrics JSON to include in the report");
  audit_cmd->add_option("--histogram-bins", audit.histogram_bins)->capture_default_str();
  audit_cmd->add_flag("--cosine", audit.cosine, "Cosine instead of Pearson for embeddings");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Build a report from saved match files");
  report_cmd->add_option("--matches", report.matches, "Primary match file")->required();
  report_cmd->add_option("--baseline", report.baseline, "Baseline match file");
  report_cmd->add_option("--cross", report.cross, "Synthetic-vs-test match file");
  report_cmd->add_option("--rule", report.rule, "percentile:P or fixed:V");
  report_cmd->add_option("--format", report.format, "json|csv");
  report_cmd->add_option("--out", report.out, "Report path")->required();
  report_cmd->add_option("--metrics", report.metrics, "Metrics JSON to include");
  report_cmd->add_option("--histogram-bins", report.histogram_bins)->capture_default_str();

  MetricsArgs metrics;
  auto* metrics_cmd = app.add_subcommand("metrics", "SSIM, mutual information, FID, Inception Score");
  metrics_cmd->add_option("--ssim-pairs", metrics.ssim_pairs, "File of image path pairs");
  metrics_cmd->add_option("--mi-pairs", metrics.mi_pairs, "File of image path pairs");
  metrics_cmd->add_option("--fid", metrics.fid, "REAL.emb SYNTH.emb")->expected(2);
  metrics_cmd->add_option("--is", metrics.is, "Class-probability EMB1 file");
  metrics_cmd->add_option("--splits", metrics.splits)->capture_default_str();
  metrics_cmd->add_option("--mi-bins", metrics.mi_bins)->capture_default_str();
  metrics_cmd->add_option("--ssim-window", metrics.ssim_window)->capture_default_str();
  metrics_cmd->add_option("--ssim-sigma", metrics.ssim_sigma)->capture_default_str();
  metrics_cmd->add_option("--dynamic-range", metrics.dynamic_range)->capture_default_str();
  metrics_cmd->add_option("--out", metrics.out, "Output JSON (default stdout)");

  PreprocessArgs prep;
  auto* prep_cmd = app.add_subcommand("preprocess", "Slice, filter, pad, resize, remap and rescale");
  prep_cmd->add_option("--input", prep.input, "Input manifest")->required();
  prep_cmd->add_option("--output", prep.output, "Output IVC1 container")->required();
  prep_cmd->add_option("--manifest-out", prep.manifest_out, "Output manifest (default OUTPUT.mf)");
  prep_cmd->add_option("--min-fraction", prep.min_fraction)->capture_default_str();
  prep_cmd->add_option("--threshold", prep.threshold)->capture_default_str();
  prep_cmd->add_option("--filter-channel", prep.filter_channel)->capture_default_str();
  prep_cmd->add_option("--pad", prep.pad, "H W")->expected(2);
  prep_cmd->add_option("--resize", prep.resize, "H W")->expected(2);
  prep_cmd->add_option("--remap", prep.remap, "Label map, e.g. 1=51,2=102,4=204");
  prep_cmd->add_option("--label-channel", prep.label_channel,
                       "Annotation channel (default 4 for 5-channel images)");
  prep_cmd->add_flag("--rescale", prep.rescale, "Min-max rescale intensity channels to [0,255]");

  PlantArgs plant_args;
  auto* plant_cmd = app.add_subcommand("plant", "Generate a synthetic set with planted copies");
  plant_cmd->add_option("--train", plant_args.train, "Training manifest")->required();
  plant_cmd->add_option("--n", plant_args.config.n_output, "Number of outputs")->required();
  plant_cmd->add_option("--p-copy", plant_args.config.p_copy)->capture_default_str();
  plant_cmd->add_option("--p-noisy", plant_args.config.p_noisy)->capture_default_str();
  plant_cmd->add_option("--p-shift", plant_args.config.p_shift)->capture_default_str();
  plant_cmd->add_option("--sigma", plant_args.config.noise_sigma)->capture_default_str();
  plant_cmd->add_option("--shift", plant_args.config.shift_pixels)->capture_default_str();
  plant_cmd->add_option("--seed", plant_args.seed, "Generator seed (required)");
  plant_cmd->add_option("--out", plant_args.out, "Output IVC1 container")->required();
  plant_cmd->add_option("--truth", plant_args.truth, "Ground-truth JSON")->required();
  plant_cmd->add_option("--manifest-out", plant_args.manifest_out, "Output manifest (default OUT.mf)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  Level level = Level::info;
  try {
    level = parse_level(g.log_level);
  } catch (const Error& e) {
    err << "memaudit: " << e.what() << '\n';
    return kUsageError;
  }
  if (g.quiet) level = Level::warn;
  const Log log(err, level);

  try {
    if (*audit_cmd) return run_audit(audit, g, log, err);
    if (*report_cmd) return run_report(report, log);
    if (*metrics_cmd) return run_metrics(metrics, g, log, out);
    if (*prep_cmd) return run_preprocess(prep, log);
    if (*plant_cmd) return run_plant(plant_args, g, log);
  } catch (const Error& e) {
    log.error(e.what());
    return e.code() == ErrorCode::invalid_argument ? kUsageError : kDataError;
  } catch (const std::exception& e) {
    log.error(e.what());
    return kDataError;
  }
  return kUsageError;
}

}  // namespace memaudit::cli
