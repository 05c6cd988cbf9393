#include <doctest.h>

#include <cmath>

#include "memaudit/correlate.hpp"
#include "memaudit/error.hpp"
#include "memaudit/ingest.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace memaudit;

namespace {

SearchOptions opts(std::size_t k, std::size_t workers = 1, std::size_t budget = kDefaultBlockBudgetBytes) {
  SearchOptions o;
  o.k = k;
  o.workers = workers;
  o.block_budget_bytes = budget;
  return o;
}

std::vector<std::string> ids_of(const Dataset& d) {
  std::vector<std::string> out;
  for (const auto& img : d.images()) out.push_back(img.id());
  return out;
}

/// Blocked result against the brute-force matrix: values within 1e-6, ids
/// identical unless the ranking is within 2e-6 of a tie.
void check_against_oracle(const std::vector<TopKMatches>& got, const CorrelationMatrix& m,
                          const std::vector<std::string>& ref_ids, std::size_t k) {
  REQUIRE(got.size() == m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    std::vector<double> row(m.values.begin() + i * m.cols, m.values.begin() + (i + 1) * m.cols);
    const auto expected = oracle::top_k(row, ref_ids, k + 1);
    const std::size_t n = std::min(k, expected.size());
    REQUIRE(got[i].matches.size() == n);
    for (std::size_t r = 0; r < n; ++r) {
      CHECK(std::abs(got[i].matches[r].correlation - expected[r].second) <= 1e-6);
      const bool separated = r + 1 >= expected.size() ||
                             expected[r].second - expected[r + 1].second > 2e-6;
      if (separated) CHECK(got[i].matches[r].reference_id == ref_ids[expected[r].first]);
    }
  }
}

}  // namespace

TEST_CASE("plan counts") {
  CHECK(plan_audit(1000, 23478, 262144).total_comparisons == 23'478'000);
  CHECK(plan_audit(1000, 91271, 262144).total_comparisons == 91'271'000);
  CHECK(plan_audit(1000, 5216, 65536).total_comparisons + plan_audit(1000, 1300, 65536).total_comparisons ==
        6'516'000);
  const auto p = plan_audit(1000, 23478, 262144);
  CHECK(p.estimated_multiply_adds == 23'478'000ull * 262144ull);
  CHECK(plan_audit(0, 10, 4).total_comparisons == 0);
}

TEST_CASE("plan tiles fit the budget") {
  SplitMix64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint64_t nq = 1 + rng.below(5000);
    const std::uint64_t nr = 1 + rng.below(50000);
    const std::uint64_t len = 1 + rng.below(300000);
    const std::size_t budget = (1 + rng.below(64)) << 20;
    const auto p = plan_audit(nq, nr, len, budget);
    CHECK(p.block_query >= 1);
    CHECK(p.block_reference >= 1);
    CHECK(p.block_query <= nq);
    CHECK(p.block_reference <= nr);
    if (2 * len * 4 <= budget) CHECK((p.block_query + p.block_reference) * len * 4 <= budget);
  }
}

TEST_CASE("self match and negated query") {
  const auto ref = fixture::random_dataset("r", 10, Shape{1, 8, 8}, 32);
  std::vector<float> neg(ref[3].pixels().begin(), ref[3].pixels().end());
  for (float& v : neg) v = -v;
  const Dataset q("q", Role::synthetic,
                  {ref[7].renamed("copy"), ImageRecord("neg", ref[3].shape(), neg)});
  const auto got = max_correlations(q, ref, {0}, opts(10));
  CHECK(got[0].matches[0].reference_id == "r0007");
  CHECK(std::abs(got[0].matches[0].correlation - 1.0) <= 1e-6);
  CHECK(std::abs(got[1].matches.back().correlation + 1.0) <= 1e-6);
  CHECK(got[1].matches.back().reference_id == "r0003");
  check_against_oracle(max_correlations(q, ref, {0}, opts(1)), brute_force_correlations(q, ref, {0}),
                       ids_of(ref), 1);
}

TEST_CASE("blocked search matches brute force across tilings and workers") {
  const auto ref = fixture::random_dataset("r", 50, Shape{2, 16, 16}, 33);
  const auto q = fixture::random_dataset("q", 20, Shape{2, 16, 16}, 34, Role::synthetic);
  const ChannelMask m{0, 1};
  const auto oracle_m = brute_force_correlations(q, ref, m);
  const auto baseline = max_correlations(q, ref, m, opts(5));
  check_against_oracle(baseline, oracle_m, ids_of(ref), 5);
  for (std::size_t workers : {1, 2, 3, 8}) {
    // tiny budgets force many reference blocks
    for (std::size_t budget : {std::size_t{4096}, std::size_t{20000}, kDefaultBlockBudgetBytes}) {
      CHECK(max_correlations(q, ref, m, opts(5, workers, budget)) == baseline);
    }
  }
}

TEST_CASE("brute force small examples") {
  const Dataset q("q", Role::synthetic, {fixture::plane_image("a", 1, 3, {1, 2, 3})});
  const Dataset r("r", Role::train,
                  {fixture::plane_image("x", 1, 3, {2, 4, 6}), fixture::plane_image("y", 1, 3, {1, 3, 2}),
                   fixture::plane_image("z", 1, 3, {5, 5, 5})});
  const auto m = brute_force_correlations(q, r, {0});
  CHECK(m.at(0, 0) == doctest::Approx(1.0));
  CHECK(m.at(0, 1) == doctest::Approx(0.5));
  CHECK_FALSE(m.defined(0, 2));
  const auto top = max_correlations(q, r, {0}, opts(5));
  CHECK(top[0].matches.size() == 2);
  CHECK(top[0].skipped_invalid == 1);
}

TEST_CASE("constant queries are reported invalid") {
  const auto ref = fixture::random_dataset("r", 5, Shape{1, 4, 4}, 35);
  const Dataset q("q", Role::synthetic, {ImageRecord("flat", Shape{1, 4, 4}, std::vector<float>(16, 3.f))});
  const auto got = max_correlations(q, ref, {0}, opts(3));
  CHECK_FALSE(got[0].query_valid);
  CHECK(got[0].matches.empty());
}

TEST_CASE("ties break on ascending reference id") {
  const auto base = fixture::random_dataset("r", 1, Shape{1, 5, 5}, 36)[0];
  const Dataset ref("r", Role::train, {base.renamed("c"), base.renamed("a"), base.renamed("b")});
  const Dataset q("q", Role::synthetic, {base.renamed("q")});
  const auto got = max_correlations(q, ref, {0}, opts(3));
  CHECK(got[0].matches[0].reference_id == "a");
  CHECK(got[0].matches[1].reference_id == "b");
  CHECK(got[0].matches[2].reference_id == "c");
  for (const auto& match : got[0].matches) CHECK(match.correlation <= 1.0);
}

TEST_CASE("top-1 is the head of top-k and grows with the reference set") {
  const auto ref = fixture::random_dataset("r", 40, Shape{1, 6, 6}, 37);
  const auto q = fixture::random_dataset("q", 15, Shape{1, 6, 6}, 38, Role::synthetic);
  const auto k1 = max_correlations(q, ref, {0}, opts(1));
  const auto k7 = max_correlations(q, ref, {0}, opts(7));
  std::vector<std::size_t> first(20);
  for (std::size_t i = 0; i < 20; ++i) first[i] = i;
  const auto smaller = max_correlations(q, ref.subset(first), {0}, opts(1));
  for (std::size_t i = 0; i < q.size(); ++i) {
    CHECK(k1[i].matches[0] == k7[i].matches[0]);
    CHECK(smaller[i].matches[0].correlation <= k1[i].matches[0].correlation);
  }
}

TEST_CASE("argument errors") {
  const auto ref = fixture::random_dataset("r", 3, Shape{1, 4, 4}, 39);
  const auto other = fixture::random_dataset("o", 3, Shape{1, 4, 5}, 40);
  const Dataset empty("e", Role::train, {});
  CHECK_THROWS_AS(max_correlations(ref, other, {0}, opts(1)), Error);
  CHECK_THROWS_AS(max_correlations(ref, empty, {0}, opts(1)), Error);
  CHECK_THROWS_AS(max_correlations(ref, ref, {0}, opts(0)), Error);
  const auto big = fixture::random_dataset("b", 4000, Shape{1, 1, 2}, 41);
  CHECK_THROWS_AS(brute_force_correlations(big, big, {0}), Error);
}

TEST_CASE("embedding search") {
  const EmbeddingSet a({"p", "q"}, 2, {1, 0, 0, 1});
  const auto self = max_correlations_embeddings(a, a, opts(1));
  CHECK(self[0].matches[0].reference_id == "p");
  CHECK(self[0].matches[0].correlation == doctest::Approx(1.0));
  const auto m = brute_force_correlations_embeddings(a, a);
  CHECK(m.at(0, 1) == doctest::Approx(-1.0));
  const auto cos = brute_force_correlations_embeddings(a, a, EmbeddingMetric::cosine);
  CHECK(cos.at(0, 1) == doctest::Approx(0.0));

  SplitMix64 rng(42);
  std::vector<float> rows(100 * 64);
  for (float& v : rows) v = static_cast<float>(rng.normal());
  std::vector<std::string> ids;
  for (int i = 0; i < 100; ++i) ids.push_back("e" + std::to_string(1000 + i));
  const EmbeddingSet big(ids, 64, rows);
  for (auto metric : {EmbeddingMetric::pearson, EmbeddingMetric::cosine}) {
    check_against_oracle(max_correlations_embeddings(big, big, opts(5, 3, 8192), metric),
                         brute_force_correlations_embeddings(big, big, metric), ids, 5);
  }
  CHECK_THROWS_AS(max_correlations_embeddings(a, big, opts(1)), Error);
}

TEST_CASE("progress callback reaches the total") {
  const auto ref = fixture::random_dataset("r", 30, Shape{1, 8, 8}, 43);
  const auto q = fixture::random_dataset("q", 7, Shape{1, 8, 8}, 44, Role::synthetic);
  auto o = opts(2, 2, 2048);
  std::vector<std::uint64_t> seen;
  o.progress = [&](std::uint64_t done, const ComparisonPlan&) { seen.push_back(done); };
  max_correlations(q, ref, {0}, o);
  REQUIRE_FALSE(seen.empty());
  CHECK(seen.back() == 7 * 30);
  CHECK(std::is_sorted(seen.begin(), seen.end()));
}
