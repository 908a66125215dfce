#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "jolt/dataset.hpp"

namespace jolt {
namespace {

TEST(BlobsTest, SplitSizesAndOrdering) {
  BlobsConfig cfg;
  cfg.train_per_class = 300;
  cfg.test_per_class = 100;
  cfg.classes = 3;
  cfg.seed = 1;
  const LabeledDataset ds = make_blobs(cfg);
  EXPECT_EQ(ds.n_train, 810u);  // 270 per class after the 10% validation cut
  EXPECT_EQ(ds.n_val, 90u);
  EXPECT_EQ(ds.n_test, 300u);
  EXPECT_EQ(ds.size(), 1200u);
  EXPECT_EQ(ds.features.size(), ds.size() * ds.dim);
  // balanced classes within each split
  for (Split s : {Split::train, Split::val, Split::test}) {
    std::vector<std::size_t> counts(3, 0);
    for (std::size_t i : ds.indices_of(s)) ++counts[ds.ground_truth[i]];
    EXPECT_EQ(counts[0], counts[1]);
    EXPECT_EQ(counts[1], counts[2]);
  }
}

TEST(BlobsTest, DeterministicUnderSeed) {
  BlobsConfig cfg;
  cfg.train_per_class = 40;
  cfg.test_per_class = 10;
  cfg.seed = 9;
  const LabeledDataset a = make_blobs(cfg);
  const LabeledDataset b = make_blobs(cfg);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.ground_truth, b.ground_truth);
  cfg.seed = 10;
  const LabeledDataset c = make_blobs(cfg);
  EXPECT_NE(a.features, c.features);
}

// With separation 10 sigma a nearest-centroid classifier is essentially
// perfect on the test split.
TEST(BlobsTest, WideSeparationNearestCentroidOracle) {
  BlobsConfig cfg;
  cfg.train_per_class = 100;
  cfg.test_per_class = 100;
  cfg.classes = 3;
  cfg.dim = 2;
  cfg.separation = 10.0;
  cfg.seed = 4;
  const LabeledDataset ds = make_blobs(cfg);

  // centroid per class from the train split
  std::vector<std::vector<double>> centroids(3, std::vector<double>(ds.dim, 0.0));
  std::vector<std::size_t> counts(3, 0);
  for (std::size_t i : ds.indices_of(Split::train)) {
    const std::uint32_t c = ds.ground_truth[i];
    ++counts[c];
    for (std::size_t d = 0; d < ds.dim; ++d) {
      centroids[c][d] += ds.features[i * ds.dim + d];
    }
  }
  for (std::size_t c = 0; c < 3; ++c) {
    for (double& v : centroids[c]) v /= static_cast<double>(counts[c]);
  }
  std::size_t correct = 0;
  const auto test_idx = ds.indices_of(Split::test);
  for (std::size_t i : test_idx) {
    double best = 1e300;
    std::size_t best_c = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      double d2 = 0.0;
      for (std::size_t d = 0; d < ds.dim; ++d) {
        const double diff = ds.features[i * ds.dim + d] - centroids[c][d];
        d2 += diff * diff;
      }
      if (d2 < best) {
        best = d2;
        best_c = c;
      }
    }
    if (best_c == ds.ground_truth[i]) ++correct;
  }
  const double acc = 100.0 * static_cast<double>(correct) /
                     static_cast<double>(test_idx.size());
  EXPECT_GE(acc, 99.0);
}

// With zero separation the classes are the same distribution; an
// independently trained softmax-regression reference model stays at chance.
TEST(BlobsTest, ZeroSeparationIsChanceLevel) {
  BlobsConfig cfg;
  cfg.train_per_class = 150;
  cfg.test_per_class = 100;
  cfg.classes = 3;
  cfg.dim = 2;
  cfg.separation = 0.0;
  cfg.seed = 5;
  const LabeledDataset ds = make_blobs(cfg);

  // plain full-batch softmax regression, written out loop by loop
  const std::size_t c = 3, d = ds.dim;
  std::vector<double> w(d * c, 0.0), b(c, 0.0);
  const auto train_idx = ds.indices_of(Split::train);
  for (int it = 0; it < 300; ++it) {
    std::vector<double> gw(d * c, 0.0), gb(c, 0.0);
    for (std::size_t i : train_idx) {
      double z[3], p[3];
      double m = -1e300, sum = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        z[j] = b[j];
        for (std::size_t k = 0; k < d; ++k) {
          z[j] += ds.features[i * d + k] * w[k * c + j];
        }
        m = std::max(m, z[j]);
      }
      for (std::size_t j = 0; j < c; ++j) {
        p[j] = std::exp(z[j] - m);
        sum += p[j];
      }
      for (std::size_t j = 0; j < c; ++j) {
        p[j] /= sum;
        const double g = p[j] - (ds.ground_truth[i] == j ? 1.0 : 0.0);
        gb[j] += g;
        for (std::size_t k = 0; k < d; ++k) gw[k * c + j] += ds.features[i * d + k] * g;
      }
    }
    const double lr = 0.5 / static_cast<double>(train_idx.size());
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr * gw[j];
    for (std::size_t j = 0; j < c; ++j) b[j] -= lr * gb[j];
  }
  std::size_t correct = 0;
  const auto test_idx = ds.indices_of(Split::test);
  for (std::size_t i : test_idx) {
    double best = -1e300;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < c; ++j) {
      double z = b[j];
      for (std::size_t k = 0; k < d; ++k) z += ds.features[i * d + k] * w[k * c + j];
      if (z > best) {
        best = z;
        best_j = j;
      }
    }
    if (best_j == ds.ground_truth[i]) ++correct;
  }
  const double acc = 100.0 * static_cast<double>(correct) /
                     static_cast<double>(test_idx.size());
  EXPECT_NEAR(acc, 100.0 / 3.0, 10.0);
}

TEST(BlobsTest, MeansRespectSeparation) {
  BlobsConfig cfg;
  cfg.train_per_class = 400;
  cfg.test_per_class = 0;
  cfg.classes = 5;
  cfg.dim = 3;
  cfg.separation = 6.0;
  cfg.seed = 6;
  const LabeledDataset ds = make_blobs(cfg);
  // empirical class means must be at least ~separation apart
  std::vector<std::vector<double>> means(5, std::vector<double>(3, 0.0));
  std::vector<std::size_t> counts(5, 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ++counts[ds.ground_truth[i]];
    for (std::size_t d = 0; d < 3; ++d) {
      means[ds.ground_truth[i]][d] += ds.features[i * 3 + d];
    }
  }
  for (std::size_t c = 0; c < 5; ++c) {
    for (double& v : means[c]) v /= static_cast<double>(counts[c]);
  }
  for (std::size_t a = 0; a < 5; ++a) {
    for (std::size_t b2 = a + 1; b2 < 5; ++b2) {
      double d2 = 0.0;
      for (std::size_t d = 0; d < 3; ++d) {
        const double diff = means[a][d] - means[b2][d];
        d2 += diff * diff;
      }
      EXPECT_GE(std::sqrt(d2), cfg.separation - 0.5);
    }
  }
}

TEST(BlobsTest, ConfigValidation) {
  BlobsConfig cfg;
  cfg.classes = 1;
  EXPECT_THROW(make_blobs(cfg), ConfigError);
  cfg.classes = 3;
  cfg.dim = 1;
  EXPECT_THROW(make_blobs(cfg), ConfigError);
}

TEST(DatasetTest, ValidateCatchesCorruptedValSplit) {
  BlobsConfig cfg;
  cfg.train_per_class = 20;
  cfg.test_per_class = 5;
  LabeledDataset ds = make_blobs(cfg);
  ds.noisy[ds.n_train] = (ds.noisy[ds.n_train] + 1) % ds.classes;  // first val sample
  EXPECT_THROW(ds.validate(), ContractError);
}

TEST(DatasetTest, GatherAndLabelHelpers) {
  BlobsConfig cfg;
  cfg.train_per_class = 10;
  cfg.test_per_class = 5;
  cfg.classes = 2;
  const LabeledDataset ds = make_blobs(cfg);
  const Tensor feats = ds.gather_features({0, 1, 2});
  EXPECT_EQ(feats.rows(), 3u);
  EXPECT_EQ(feats.cols(), ds.dim);
  EXPECT_EQ(feats.at(1, 0), ds.features[1 * ds.dim]);
  EXPECT_EQ(ds.labels_of(Split::test, false).size(), ds.n_test);
}

}  // namespace
}  // namespace jolt
