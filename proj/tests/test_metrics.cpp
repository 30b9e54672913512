#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "pvrnet/errors.hpp"
#include "pvrnet/metrics.hpp"
#include "test_support.hpp"

namespace pvr {
namespace {

// AP of one query from the 1-based ranks of its relevant items.
double ap_from_ranks(std::vector<std::size_t> ranks) {
  std::sort(ranks.begin(), ranks.end());
  double s = 0.0;
  for (std::size_t h = 0; h < ranks.size(); ++h) s += (h + 1.0) / static_cast<double>(ranks[h]);
  return s / static_cast<double>(ranks.size());
}

Matrix angles(const std::vector<double>& degrees) {
  Matrix m(degrees.size(), 2);
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    m(i, 0) = std::cos(degrees[i] * std::acos(-1.0) / 180.0);
    m(i, 1) = std::sin(degrees[i] * std::acos(-1.0) / 180.0);
  }
  return m;
}

TEST(Classification, PerfectAndConstantPredictors) {
  std::vector<std::uint32_t> labels;
  for (std::uint32_t c = 0; c < 8; ++c) labels.insert(labels.end(), 25, c);
  const auto perfect = evaluate_classification(labels, labels, 8);
  EXPECT_EQ(perfect.overall_acc, 1.0);
  EXPECT_EQ(perfect.mean_class_acc, 1.0);

  const std::vector<std::uint32_t> constant(labels.size(), 3);
  const auto c = evaluate_classification(constant, labels, 8);
  EXPECT_DOUBLE_EQ(c.overall_acc, 0.125);
  EXPECT_DOUBLE_EQ(c.mean_class_acc, 0.125);
  double mean = 0.0;
  for (const auto& a : c.per_class_acc) mean += *a;
  EXPECT_DOUBLE_EQ(c.mean_class_acc, mean / 8.0);
}

TEST(Classification, ImbalancedConstantPredictorSeparatesMetrics) {
  std::vector<std::uint32_t> labels(100, 0);
  for (std::uint32_t c = 1; c < 4; ++c) labels.insert(labels.end(), 10, c);
  const std::vector<std::uint32_t> constant(labels.size(), 0);
  const auto m = evaluate_classification(constant, labels, 4);
  EXPECT_GT(m.overall_acc, m.mean_class_acc);
  EXPECT_DOUBLE_EQ(m.mean_class_acc, 0.25);
}

TEST(Classification, EmptyClassIsExcluded) {
  const std::vector<std::uint32_t> labels{0, 0, 1};
  const std::vector<std::uint32_t> pred{0, 1, 1};
  const auto m = evaluate_classification(pred, labels, 3);
  EXPECT_FALSE(m.per_class_acc[2].has_value());
  EXPECT_EQ(m.excluded_classes, (std::vector<std::uint32_t>{2}));
  EXPECT_DOUBLE_EQ(m.mean_class_acc, 0.75);
}

TEST(Retrieval, FourItemHandExample) {
  // Classes {0, 1} and {2, 3} on the unit circle at 0, 20, 8 and 90 degrees.
  //   query 0 ranks 2, 1, 3 -> AP 1/2     query 1 ranks 2, 0, 3 -> AP 1/2
  //   query 2 ranks 0, 1, 3 -> AP 1/3     query 3 ranks 1, 2, 0 -> AP 1/2
  const std::vector<std::uint32_t> labels{0, 0, 1, 1};
  const RetrievalResult r = retrieval_map(angles({0, 20, 8, 90}), labels);
  EXPECT_EQ(r.average_precision, (std::vector<double>{0.5, 0.5, 1.0 / 3.0, 0.5}));
  EXPECT_DOUBLE_EQ(r.map, 11.0 / 24.0);
}

TEST(Retrieval, PerfectClustersGiveOne) {
  Matrix e(12, 3);
  std::vector<std::uint32_t> labels;
  for (std::size_t i = 0; i < 12; ++i) {
    e(i, i % 3) = 1.0 + 0.1 * i;  // orthogonal centres, scale does not matter for cosine
    labels.push_back(static_cast<std::uint32_t>(i % 3));
  }
  const RetrievalResult r = retrieval_map(e, labels);
  EXPECT_EQ(r.map, 1.0);
  ASSERT_EQ(r.pr_curve.size(), kPrLevels);
  for (const auto& pt : r.pr_curve) EXPECT_EQ(pt.precision, 1.0);
}

TEST(Retrieval, MatchesBruteForceRankCounting) {
  std::mt19937_64 rng(51);
  for (std::size_t m = 2; m <= 30; ++m) {
    const Matrix e = test::random_matrix(m, 3, rng);
    std::vector<std::uint32_t> labels(m);
    std::uniform_int_distribution<std::uint32_t> cls(0, 2);
    for (auto& l : labels) l = cls(rng);
    labels[0] = labels[1];  // at least one same-label pair
    const RetrievalResult r = retrieval_map(e, labels);
    auto dist = [&](std::size_t a, std::size_t b) {
      double dot = 0, na = 0, nb = 0;
      for (std::size_t c = 0; c < 3; ++c) {
        dot += e(a, c) * e(b, c);
        na += e(a, c) * e(a, c);
        nb += e(b, c) * e(b, c);
      }
      return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
    };
    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t q = 0; q < m; ++q) {
      std::vector<std::size_t> ranks;
      for (std::size_t i = 0; i < m; ++i) {
        if (i == q || labels[i] != labels[q]) continue;
        std::size_t rank = 1;
        for (std::size_t j = 0; j < m; ++j) {
          if (j != q && j != i && (dist(q, j) < dist(q, i) || (dist(q, j) == dist(q, i) && j < i))) {
            ++rank;
          }
        }
        ranks.push_back(rank);
      }
      if (ranks.empty()) {
        EXPECT_TRUE(std::isnan(r.average_precision[q]));
        continue;
      }
      const double ap = ap_from_ranks(ranks);
      EXPECT_EQ(r.average_precision[q], ap) << "m=" << m << " q=" << q;
      total += ap;
      ++used;
    }
    EXPECT_NEAR(r.map, total / used, 1e-15);
    for (std::size_t j = 1; j < r.pr_curve.size(); ++j) {
      EXPECT_LE(r.pr_curve[j].precision, r.pr_curve[j - 1].precision);
      EXPECT_GE(r.pr_curve[j].recall, r.pr_curve[j - 1].recall);
    }
  }
}

TEST(Retrieval, RandomLabelsApproachSimulatedChanceLevel) {
  // Oracle: AP of uniformly random rankings, simulated with rank counting.
  std::mt19937_64 rng(52);
  const std::size_t m = 200, classes = 8;
  std::vector<std::uint32_t> labels(m);
  for (std::size_t i = 0; i < m; ++i) labels[i] = static_cast<std::uint32_t>(i % classes);
  double measured = 0.0, simulated = 0.0;
  for (int seed = 0; seed < 10; ++seed) {
    std::vector<std::uint32_t> shuffled = labels;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    measured += retrieval_map(test::random_matrix(m, 16, rng), shuffled).map;

    double sum_ap = 0.0;
    for (std::size_t q = 0; q < m; ++q) {
      std::vector<std::size_t> others(m - 1);
      std::iota(others.begin(), others.end(), 0);
      std::shuffle(others.begin(), others.end(), rng);
      std::vector<std::size_t> ranks;
      for (std::size_t pos = 0; pos < others.size(); ++pos) {
        const std::size_t item = others[pos] >= q ? others[pos] + 1 : others[pos];
        if (labels[item] == labels[q]) ranks.push_back(pos + 1);
      }
      sum_ap += ap_from_ranks(ranks);
    }
    simulated += sum_ap / m;
  }
  EXPECT_NEAR(measured / 10.0, simulated / 10.0, 0.05);
}

TEST(Retrieval, ZeroNormAndErrors) {
  Matrix e(3, 2);
  e(1, 0) = 1.0;
  e(2, 0) = 1.0;
  const RetrievalResult r = retrieval_map(e, std::vector<std::uint32_t>{0, 1, 1});
  EXPECT_EQ(r.excluded_queries, 1u);
  EXPECT_EQ(r.map, 1.0);
  EXPECT_THROW(retrieval_map(e, std::vector<std::uint32_t>{0, 1, 2}), InputError);
  EXPECT_THROW(retrieval_map(e, std::vector<std::uint32_t>{0, 1}), InputError);
}

TEST(PrCurveCsv, Format) {
  const std::string csv = pr_curve_csv({{0.0, 1.0}, {0.1, 0.5}});
  EXPECT_EQ(csv, "recall,precision\n0.0,1.000000\n0.1,0.500000\n");
}

}  // namespace
}  // namespace pvr
