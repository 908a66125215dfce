#include <gtest/gtest.h>

#include <cmath>

#include "jolt/dataset.hpp"
#include "jolt/kmeans.hpp"

namespace jolt {
namespace {

TEST(KMeansTest, SingleClusterInertiaEqualsTotalScatter) {
  Rng rng(1);
  const std::size_t n = 40, d = 3;
  std::vector<double> features(n * d);
  for (double& v : features) v = rng.normal() * 2.0;
  const KMeansResult res = kmeanspp(features, n, d, 1, 7, 50);

  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += features[i * d + k];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  double scatter = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = features[i * d + k] - mean[k];
      scatter += diff * diff;
    }
  }
  EXPECT_NEAR(res.inertia, scatter, 1e-9);
  for (std::uint32_t a : res.assignments) ASSERT_EQ(a, 0u);
}

TEST(KMeansTest, TwoPointMassesSeparatePerfectly) {
  // two point masses at distance 10; brute force over every 2-assignment of
  // the six points confirms zero is the optimal inertia
  const std::size_t n = 6, d = 2;
  std::vector<double> features = {0, 0, 0, 0, 0, 0, 10, 0, 10, 0, 10, 0};
  const KMeansResult res = kmeanspp(features, n, d, 2, 3, 50);
  EXPECT_NEAR(res.inertia, 0.0, 1e-12);
  EXPECT_NE(res.assignments[0], res.assignments[3]);
  EXPECT_EQ(res.assignments[0], res.assignments[1]);
  EXPECT_EQ(res.assignments[3], res.assignments[5]);

  // independent brute-force minimum over all assignments
  double best = 1e300;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    double sum[2][2] = {{0, 0}, {0, 0}};
    std::size_t cnt[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const int g = (mask >> i) & 1;
      ++cnt[g];
      sum[g][0] += features[i * d];
      sum[g][1] += features[i * d + 1];
    }
    if (cnt[0] == 0 || cnt[1] == 0) continue;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const int g = (mask >> i) & 1;
      const double cx = sum[g][0] / static_cast<double>(cnt[g]);
      const double cy = sum[g][1] / static_cast<double>(cnt[g]);
      const double dx = features[i * d] - cx, dy = features[i * d + 1] - cy;
      inertia += dx * dx + dy * dy;
    }
    best = std::min(best, inertia);
  }
  EXPECT_NEAR(best, 0.0, 1e-12);
  EXPECT_NEAR(res.inertia, best, 1e-12);
}

TEST(KMeansTest, MatchesBruteForceOnSmallClusteredInput) {
  // two tight, well-separated groups; Lloyd from ++ seeding reaches the
  // global optimum, which the exhaustive search certifies
  const std::size_t n = 8, d = 1;
  std::vector<double> features = {0.0, 0.1, 0.2, 0.05, 5.0, 5.1, 5.2, 4.9};
  const KMeansResult res = kmeanspp(features, n, d, 2, 11, 100);

  double best = 1e300;
  for (unsigned mask = 1; mask < (1u << n) - 1; ++mask) {
    double sum[2] = {0, 0};
    std::size_t cnt[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const int g = (mask >> i) & 1;
      ++cnt[g];
      sum[g] += features[i];
    }
    if (cnt[0] == 0 || cnt[1] == 0) continue;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const int g = (mask >> i) & 1;
      const double diff = features[i] - sum[g] / static_cast<double>(cnt[g]);
      inertia += diff * diff;
    }
    best = std::min(best, inertia);
  }
  EXPECT_NEAR(res.inertia, best, 1e-9);
}

TEST(KMeansTest, InvalidArgumentsAreConfigErrors) {
  std::vector<double> features = {0.0, 1.0};
  EXPECT_THROW(kmeanspp(features, 2, 1, 3, 1, 10), ConfigError);
  EXPECT_THROW(kmeanspp(features, 2, 1, 0, 1, 10), ConfigError);
  EXPECT_THROW(kmeanspp(features, 2, 1, 2, 1, 0), ConfigError);
}

TEST(KMeansTest, DeterministicUnderSeed) {
  Rng rng(2);
  std::vector<double> features(60);
  for (double& v : features) v = rng.normal();
  const KMeansResult a = kmeanspp(features, 30, 2, 3, 21, 100);
  const KMeansResult b = kmeanspp(features, 30, 2, 3, 21, 100);
  EXPECT_EQ(a.assignments, b.assignments);
  EXPECT_EQ(a.inertia, b.inertia);
}

TEST(PseudoLabelTest, MajorityMappingOnSeparatedBlobs) {
  BlobsConfig cfg;
  cfg.train_per_class = 60;
  cfg.test_per_class = 20;
  cfg.classes = 3;
  cfg.dim = 2;
  cfg.separation = 6.0;
  cfg.seed = 31;
  const LabeledDataset ds = make_blobs(cfg);
  const PseudoLabelResult res = kmeanspp_pseudo_labels(ds, 3, 32, 100);
  EXPECT_GE(res.accuracy_pct, 90.0);
  // labels changed only on the train split
  for (std::size_t i = ds.n_train; i < ds.size(); ++i) {
    ASSERT_EQ(res.dataset.noisy[i], res.dataset.ground_truth[i]);
  }
  res.dataset.validate();
}

TEST(PseudoLabelTest, OverSizedKIsConfigError) {
  BlobsConfig cfg;
  cfg.train_per_class = 5;
  cfg.test_per_class = 2;
  cfg.classes = 2;
  const LabeledDataset ds = make_blobs(cfg);
  EXPECT_THROW(kmeanspp_pseudo_labels(ds, ds.n_train + 1, 1, 10), ConfigError);
}

}  // namespace
}  // namespace jolt
