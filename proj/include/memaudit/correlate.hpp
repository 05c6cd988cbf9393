#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "memaudit/core.hpp"
#include "memaudit/ingest.hpp"

namespace memaudit {

inline constexpr std::size_t kDefaultBlockBudgetBytes = std::size_t{32} << 20;

/// Size of one all-pairs audit and the tiling chosen for it.
struct ComparisonPlan {
  std::uint64_t n_query = 0;
  std::uint64_t n_reference = 0;
  std::uint64_t total_comparisons = 0;
  std::uint64_t vector_length = 1;
  std::uint64_t block_query = 1;
  std::uint64_t block_reference = 1;
  std::uint64_t estimated_multiply_adds = 0;

  friend bool operator==(const ComparisonPlan&, const ComparisonPlan&) = default;
};

/// Exact comparison counts, plus query/reference tile sizes such that one
/// tile pair of float vectors fits in `budget_bytes`.
ComparisonPlan plan_audit(std::uint64_t n_query, std::uint64_t n_reference,
                          std::uint64_t vector_length,
                          std::size_t budget_bytes = kDefaultBlockBudgetBytes);

struct Match {
  std::string reference_id;
  double correlation = 0.0;
  friend bool operator==(const Match&, const Match&) = default;
};

/// Highest correlations for one query, descending, ties by ascending
/// reference id. A constant query is marked invalid and has no matches.
struct TopKMatches {
  std::string query_id;
  bool query_valid = true;
  std::vector<Match> matches;
  std::size_t skipped_invalid = 0;
  friend bool operator==(const TopKMatches&, const TopKMatches&) = default;
};

/// Indexed provider of standardized vectors. fill() must be safe to call
/// concurrently for distinct indices.
class VectorSource {
 public:
  virtual ~VectorSource() = default;
  virtual std::size_t size() const = 0;
  virtual std::size_t length() const = 0;
  virtual const std::string& id(std::size_t i) const = 0;
  /// Writes vector i (unit norm, or all zero when invalid) and returns validity.
  virtual bool fill(std::size_t i, std::span<float> out) const = 0;
};

class DatasetSource final : public VectorSource {
 public:
  DatasetSource(const Dataset& dataset, ChannelMask mask, CombineMode mode);
  std::size_t size() const override { return dataset_.size(); }
  std::size_t length() const override { return length_; }
  const std::string& id(std::size_t i) const override { return dataset_[i].id(); }
  bool fill(std::size_t i, std::span<float> out) const override;

 private:
  const Dataset& dataset_;
  ChannelMask mask_;
  CombineMode mode_;
  std::size_t length_;
};

enum class EmbeddingMetric {
  /// Mean-centred then normalised rows.
  pearson,
  /// Normalised rows without centring.
  cosine,
};

class EmbeddingSource final : public VectorSource {
 public:
  EmbeddingSource(const EmbeddingSet& set, EmbeddingMetric metric) : set_(set), metric_(metric) {}
  std::size_t size() const override { return set_.size(); }
  std::size_t length() const override { return set_.dim(); }
  const std::string& id(std::size_t i) const override { return set_.ids()[i]; }
  bool fill(std::size_t i, std::span<float> out) const override;

 private:
  const EmbeddingSet& set_;
  EmbeddingMetric metric_;
};

struct SearchOptions {
  std::size_t k = 5;
  std::size_t workers = 1;
  std::size_t block_budget_bytes = kDefaultBlockBudgetBytes;
  /// Called on the calling thread after each reference block with the
  /// number of comparisons completed so far.
  std::function<void(std::uint64_t done, const ComparisonPlan& plan)> progress;
};

/// Blocked exact search: standardized vectors stored as float, dot products
/// accumulated in double, reference blocks merged in ascending order.
/// Reference vectors are standardized block by block, so memory holds all
/// queries plus one reference tile.
std::vector<TopKMatches> search_top_k(const VectorSource& query, const VectorSource& reference,
                                      const SearchOptions& options);

/// Top-k Pearson correlations of every query image against every reference image.
std::vector<TopKMatches> max_correlations(const Dataset& query, const Dataset& reference,
                                          const ChannelMask& mask, const SearchOptions& options,
                                          CombineMode mode = CombineMode::concatenate);

/// Same contract over embedding rows.
std::vector<TopKMatches> max_correlations_embeddings(
    const EmbeddingSet& query, const EmbeddingSet& reference, const SearchOptions& options,
    EmbeddingMetric metric = EmbeddingMetric::pearson);

/// Dense correlation matrix; undefined entries (a constant side) are NaN.
struct CorrelationMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  bool defined(std::size_t i, std::size_t j) const;
};

inline constexpr std::uint64_t kBruteForceLimit = 10'000'000;

/// Scalar reference path: entry (i, j) is pearson(query_i, reference_j).
/// Refuses more than kBruteForceLimit entries.
CorrelationMatrix brute_force_correlations(const Dataset& query, const Dataset& reference,
                                           const ChannelMask& mask,
                                           CombineMode mode = CombineMode::concatenate);

CorrelationMatrix brute_force_correlations_embeddings(
    const EmbeddingSet& query, const EmbeddingSet& reference,
    EmbeddingMetric metric = EmbeddingMetric::pearson);

}  // namespace memaudit
