#include "memaudit/correlate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "memaudit/error.hpp"
#include "memaudit/parallel.hpp"

namespace memaudit {

ComparisonPlan plan_audit(std::uint64_t n_query, std::uint64_t n_reference,
                          std::uint64_t vector_length, std::size_t budget_bytes) {
  ComparisonPlan plan;
  plan.n_query = n_query;
  plan.n_reference = n_reference;
  plan.vector_length = vector_length;
  plan.total_comparisons = n_query * n_reference;
  plan.estimated_multiply_adds = plan.total_comparisons * vector_length;

  const std::uint64_t vector_bytes = std::max<std::uint64_t>(vector_length, 1) * sizeof(float);
  const std::uint64_t capacity = std::max<std::uint64_t>(2, budget_bytes / vector_bytes);
  plan.block_query = std::clamp<std::uint64_t>(capacity / 2, 1, std::max<std::uint64_t>(n_query, 1));
  plan.block_reference =
      std::clamp<std::uint64_t>(capacity - plan.block_query, 1, std::max<std::uint64_t>(n_reference, 1));
  return plan;
}

DatasetSource::DatasetSource(const Dataset& dataset, ChannelMask mask, CombineMode mode)
    : dataset_(dataset),
      mask_(normalize_mask(std::move(mask), std::max<std::size_t>(dataset.shape().channels, 1))),
      mode_(mode),
      length_(standardized_length(dataset.shape(), mask_)) {}

bool DatasetSource::fill(std::size_t i, std::span<float> out) const {
  return standardize_into<float>(dataset_[i], mask_, mode_, out);
}

bool EmbeddingSource::fill(std::size_t i, std::span<float> out) const {
  return normalize_values<float>(set_.row(i), out, metric_ == EmbeddingMetric::pearson);
}

namespace {

// Chunk of the vector dimension processed per pass over a tile; each pair's
// sum is built chunk by chunk in this fixed order.
constexpr std::size_t kChunk = 2048;
constexpr std::size_t kLanes = 8;
constexpr std::size_t kRowsPerKernel = 4;
constexpr std::size_t kColsPerKernel = 4;

// MR x NR dot products over n elements. Each pair keeps kLanes independent
// double partial sums so the loop vectorizes; the lanes are folded in a
// fixed order at the end.
template <std::size_t MR, std::size_t NR>
void micro_kernel(const float* const* q, const float* const* r, std::size_t n, double* out,
                  std::size_t out_stride) {
  const float* __restrict qp[MR];
  const float* __restrict rp[NR];
  for (std::size_t m = 0; m < MR; ++m) qp[m] = q[m];
  for (std::size_t c = 0; c < NR; ++c) rp[c] = r[c];
  double acc[MR][NR][kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    double rv[NR][kLanes];
    for (std::size_t c = 0; c < NR; ++c) {
      for (std::size_t l = 0; l < kLanes; ++l) rv[c][l] = rp[c][i + l];
    }
    for (std::size_t m = 0; m < MR; ++m) {
      double qa[kLanes];
      for (std::size_t l = 0; l < kLanes; ++l) qa[l] = qp[m][i + l];
      for (std::size_t c = 0; c < NR; ++c) {
        for (std::size_t l = 0; l < kLanes; ++l) acc[m][c][l] += qa[l] * rv[c][l];
      }
    }
  }
  for (; i < n; ++i) {
    for (std::size_t m = 0; m < MR; ++m) {
      for (std::size_t c = 0; c < NR; ++c) {
        acc[m][c][0] += static_cast<double>(qp[m][i]) * static_cast<double>(rp[c][i]);
      }
    }
  }
  for (std::size_t m = 0; m < MR; ++m) {
    for (std::size_t c = 0; c < NR; ++c) {
      double s = 0.0;
      for (std::size_t l = 0; l < kLanes; ++l) s += acc[m][c][l];
      out[m * out_stride + c] += s;
    }
  }
}

template <std::size_t MR>
void kernel_row(const float* const* q, const float* const* r, std::size_t cols, std::size_t n,
                double* out, std::size_t out_stride) {
  std::size_t c = 0;
  for (; c + kColsPerKernel <= cols; c += kColsPerKernel) {
    micro_kernel<MR, kColsPerKernel>(q, r + c, n, out + c, out_stride);
  }
  for (; c < cols; ++c) micro_kernel<MR, 1>(q, r + c, n, out + c, out_stride);
}

/// acc[i * n_ref + j] = <query_i, reference_j> for the given vectors.
void tile_dot(std::span<const float* const> query, std::span<const float* const> reference,
              std::size_t length, std::span<double> acc) {
  std::fill(acc.begin(), acc.end(), 0.0);
  const std::size_t n_ref = reference.size();
  std::vector<const float*> q(query.size());
  std::vector<const float*> r(n_ref);
  for (std::size_t c0 = 0; c0 < length; c0 += kChunk) {
    const std::size_t n = std::min(kChunk, length - c0);
    for (std::size_t j = 0; j < n_ref; ++j) r[j] = reference[j] + c0;
    for (std::size_t i = 0; i < query.size(); ++i) q[i] = query[i] + c0;
    std::size_t i = 0;
    for (; i + kRowsPerKernel <= query.size(); i += kRowsPerKernel) {
      kernel_row<kRowsPerKernel>(q.data() + i, r.data(), n_ref, n, acc.data() + i * n_ref, n_ref);
    }
    for (; i + 2 <= query.size(); i += 2) {
      kernel_row<2>(q.data() + i, r.data(), n_ref, n, acc.data() + i * n_ref, n_ref);
    }
    for (; i < query.size(); ++i) {
      kernel_row<1>(q.data() + i, r.data(), n_ref, n, acc.data() + i * n_ref, n_ref);
    }
  }
}

/// Bounded best-k list: descending correlation, ties by ascending id.
class TopKSelector {
 public:
  TopKSelector(std::size_t k, const std::vector<const std::string*>& ids) : k_(k), ids_(&ids) {
    entries_.reserve(k + 1);
  }

  void offer(double corr, std::uint32_t index) {
    if (entries_.size() == k_ && !ranks_before(corr, index, entries_.back())) return;
    auto pos = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) {
      return ranks_before(corr, index, e);
    });
    entries_.insert(pos, Entry{corr, index});
    if (entries_.size() > k_) entries_.pop_back();
  }

  std::vector<Match> matches() const {
    std::vector<Match> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back({*(*ids_)[e.index], e.corr});
    return out;
  }

 private:
  struct Entry {
    double corr;
    std::uint32_t index;
  };

  bool ranks_before(double corr, std::uint32_t index, const Entry& other) const {
    if (corr != other.corr) return corr > other.corr;
    return *(*ids_)[index] < *(*ids_)[other.index];
  }

  std::size_t k_;
  const std::vector<const std::string*>* ids_;
  std::vector<Entry> entries_;
};

}  // namespace

std::vector<TopKMatches> search_top_k(const VectorSource& query, const VectorSource& reference,
                                      const SearchOptions& options) {
  if (options.k == 0) fail(ErrorCode::invalid_argument, "k must be at least 1");
  if (reference.size() == 0) fail(ErrorCode::invalid_argument, "reference set is empty");
  if (query.length() != reference.length()) {
    fail(ErrorCode::invalid_argument, "query vectors have length " +
                                          std::to_string(query.length()) +
                                          " but reference vectors have length " +
                                          std::to_string(reference.length()));
  }
  if (reference.size() > std::numeric_limits<std::uint32_t>::max()) {
    fail(ErrorCode::invalid_argument, "reference set exceeds 2^32 entries");
  }
  const std::size_t nq = query.size();
  const std::size_t nr = reference.size();
  const std::size_t len = query.length();
  const std::size_t workers = std::max<std::size_t>(options.workers, 1);
  const ComparisonPlan plan = plan_audit(nq, nr, len, options.block_budget_bytes);

  std::vector<float> qbuf(nq * len);
  std::vector<char> qvalid(nq);
  parallel_for(nq, workers, [&](std::size_t i) {
    qvalid[i] = query.fill(i, std::span<float>(qbuf).subspan(i * len, len));
  });

  std::vector<const std::string*> ref_ids(nr);
  for (std::size_t j = 0; j < nr; ++j) ref_ids[j] = &reference.id(j);
  std::vector<TopKSelector> selectors(nq, TopKSelector(options.k, ref_ids));

  // Query tasks never straddle a plan tile and are small enough to spread
  // over every worker; per-pair sums do not depend on task boundaries.
  const std::size_t per_worker = (nq + workers - 1) / workers;
  const std::size_t task_rows =
      std::max<std::size_t>(1, std::min<std::size_t>(plan.block_query, per_worker));
  const std::size_t n_tasks = (nq + task_rows - 1) / task_rows;

  const std::size_t br = plan.block_reference;
  std::vector<float> rbuf(br * len);
  std::vector<char> rvalid(br);
  std::size_t skipped = 0;
  for (std::size_t rs = 0; rs < nr; rs += br) {
    const std::size_t rc = std::min(br, nr - rs);
    parallel_for(rc, workers, [&](std::size_t j) {
      rvalid[j] = reference.fill(rs + j, std::span<float>(rbuf).subspan(j * len, len));
    });
    std::vector<const float*> rptr;
    std::vector<std::uint32_t> rindex;
    for (std::size_t j = 0; j < rc; ++j) {
      if (rvalid[j]) {
        rptr.push_back(rbuf.data() + j * len);
        rindex.push_back(static_cast<std::uint32_t>(rs + j));
      } else {
        ++skipped;
      }
    }
    if (!rptr.empty()) {
      parallel_for(n_tasks, workers, [&](std::size_t t) {
        const std::size_t qs = t * task_rows;
        const std::size_t qe = std::min(nq, qs + task_rows);
        std::vector<const float*> qptr;
        std::vector<std::size_t> qindex;
        for (std::size_t i = qs; i < qe; ++i) {
          if (qvalid[i]) {
            qptr.push_back(qbuf.data() + i * len);
            qindex.push_back(i);
          }
        }
        if (qptr.empty()) return;
        std::vector<double> acc(qptr.size() * rptr.size());
        tile_dot(qptr, rptr, len, acc);
        for (std::size_t a = 0; a < qptr.size(); ++a) {
          auto& sel = selectors[qindex[a]];
          for (std::size_t b = 0; b < rptr.size(); ++b) {
            sel.offer(std::clamp(acc[a * rptr.size() + b], -1.0, 1.0), rindex[b]);
          }
        }
      });
    }
    if (options.progress) options.progress(static_cast<std::uint64_t>(nq) * (rs + rc), plan);
  }

  std::vector<TopKMatches> out(nq);
  for (std::size_t i = 0; i < nq; ++i) {
    out[i].query_id = query.id(i);
    out[i].query_valid = qvalid[i] != 0;
    out[i].skipped_invalid = skipped;
    if (out[i].query_valid) out[i].matches = selectors[i].matches();
  }
  return out;
}

std::vector<TopKMatches> max_correlations(const Dataset& query, const Dataset& reference,
                                          const ChannelMask& mask, const SearchOptions& options,
                                          CombineMode mode) {
  if (reference.empty()) fail(ErrorCode::invalid_argument, "reference dataset is empty");
  if (!query.empty() && query.shape() != reference.shape()) {
    fail(ErrorCode::invalid_argument, "query images are " + to_string(query.shape()) +
                                          " but reference images are " +
                                          to_string(reference.shape()));
  }
  const DatasetSource ref(reference, mask, mode);
  if (query.empty()) return {};
  const DatasetSource qry(query, mask, mode);
  return search_top_k(qry, ref, options);
}

std::vector<TopKMatches> max_correlations_embeddings(const EmbeddingSet& query,
                                                     const EmbeddingSet& reference,
                                                     const SearchOptions& options,
                                                     EmbeddingMetric metric) {
  if (query.dim() != reference.dim()) {
    fail(ErrorCode::invalid_argument, "embedding dimensions differ (" +
                                          std::to_string(query.dim()) + " vs " +
                                          std::to_string(reference.dim()) + ")");
  }
  return search_top_k(EmbeddingSource(query, metric), EmbeddingSource(reference, metric), options);
}

bool CorrelationMatrix::defined(std::size_t i, std::size_t j) const {
  return !std::isnan(at(i, j));
}

namespace {

void check_brute_force_size(std::size_t rows, std::size_t cols) {
  if (static_cast<std::uint64_t>(rows) * cols > kBruteForceLimit) {
    fail(ErrorCode::invalid_argument,
         "brute_force_correlations refuses " + std::to_string(rows) + " x " +
             std::to_string(cols) + " entries (limit 10^7); use max_correlations at this scale");
  }
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  const auto n = static_cast<double>(a.size());
  if (aa / n < kMinVariance || bb / n < kMinVariance) {
    fail(ErrorCode::undefined_correlation, "cosine similarity undefined for a zero vector");
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace

CorrelationMatrix brute_force_correlations(const Dataset& query, const Dataset& reference,
                                           const ChannelMask& mask, CombineMode mode) {
  check_brute_force_size(query.size(), reference.size());
  if (!query.empty() && !reference.empty() && query.shape() != reference.shape()) {
    fail(ErrorCode::invalid_argument, "query and reference shapes differ");
  }
  CorrelationMatrix m{query.size(), reference.size(),
                      std::vector<double>(query.size() * reference.size())};
  for (std::size_t i = 0; i < query.size(); ++i) {
    for (std::size_t j = 0; j < reference.size(); ++j) {
      try {
        m.values[i * m.cols + j] = pearson(query[i], reference[j], mask, mode);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::undefined_correlation) throw;
        m.values[i * m.cols + j] = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return m;
}

CorrelationMatrix brute_force_correlations_embeddings(const EmbeddingSet& query,
                                                      const EmbeddingSet& reference,
                                                      EmbeddingMetric metric) {
  check_brute_force_size(query.size(), reference.size());
  if (query.dim() != reference.dim()) {
    fail(ErrorCode::invalid_argument, "embedding dimensions differ");
  }
  CorrelationMatrix m{query.size(), reference.size(),
                      std::vector<double>(query.size() * reference.size())};
  for (std::size_t i = 0; i < query.size(); ++i) {
    for (std::size_t j = 0; j < reference.size(); ++j) {
      try {
        m.values[i * m.cols + j] = metric == EmbeddingMetric::pearson
                                       ? pearson(query.row(i), reference.row(j))
                                       : cosine(query.row(i), reference.row(j));
      } catch (const Error& err) {
        if (err.code() != ErrorCode::undefined_correlation) throw;
        m.values[i * m.cols + j] = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return m;
}

}  // namespace memaudit
