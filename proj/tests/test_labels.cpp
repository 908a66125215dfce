#include <gtest/gtest.h>

#include <cmath>

#include "jolt/labels.hpp"
#include "jolt/losses.hpp"
#include "jolt/rng.hpp"

namespace jolt {
namespace {

Tensor random_stochastic(std::size_t n, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t = Tensor::matrix(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      t.at(i, j) = std::exp(rng.normal());
      sum += t.at(i, j);
    }
    for (std::size_t j = 0; j < c; ++j) t.at(i, j) /= sum;
  }
  return t;
}

TEST(ProbBufferTest, AveragesOnlyRecordedEpochsBeforeWindowFills) {
  ProbBuffer buf(10);
  Tensor a = Tensor::row({1.0, 0.0});
  Tensor b = Tensor::row({0.0, 1.0});
  Tensor c = Tensor::row({0.5, 0.5});
  buf.record(a);
  buf.record(b);
  buf.record(c);
  EXPECT_EQ(buf.stored(), 3u);
  const Tensor avg = buf.averaged();
  EXPECT_NEAR(avg.at(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(avg.at(0, 1), 0.5, 1e-15);
}

TEST(ProbBufferTest, IdenticalSnapshotsAverageToThemselves) {
  ProbBuffer buf(5);
  const Tensor m = random_stochastic(4, 3, 1);
  for (int i = 0; i < 3; ++i) buf.record(m);
  const Tensor avg = buf.averaged();
  for (std::size_t i = 0; i < m.numel(); ++i) {
    ASSERT_NEAR(avg.values[i], m.values[i], 1e-15);
  }
}

TEST(ProbBufferTest, RingEviction) {
  ProbBuffer buf(2);
  buf.record(Tensor::row({1.0, 0.0}));  // A, evicted
  buf.record(Tensor::row({0.0, 1.0}));  // B
  buf.record(Tensor::row({0.5, 0.5}));  // C
  EXPECT_EQ(buf.stored(), 2u);
  EXPECT_EQ(buf.epoch_count(), 3u);
  const Tensor avg = buf.averaged();
  EXPECT_NEAR(avg.at(0, 0), 0.25, 1e-15);  // mean of B and C
  EXPECT_NEAR(avg.at(0, 1), 0.75, 1e-15);
}

TEST(ProbBufferTest, MatchesBruteForceMean) {
  ProbBuffer buf(0);  // "all"
  std::vector<Tensor> snaps;
  for (std::uint64_t s = 0; s < 5; ++s) {
    snaps.push_back(random_stochastic(6, 4, 10 + s));
    buf.record(snaps.back());
  }
  const Tensor avg = buf.averaged();
  for (std::size_t i = 0; i < avg.numel(); ++i) {
    double mean = 0.0;
    for (const Tensor& s : snaps) mean += s.values[i];
    mean /= 5.0;
    ASSERT_NEAR(avg.values[i], mean, 1e-12);
  }
  check_row_stochastic(avg, "averaged", 1e-6);
}

TEST(ProbBufferTest, EmptyBufferIsUsageError) {
  ProbBuffer buf(3);
  EXPECT_THROW(buf.averaged(), UsageError);
}

TEST(ProbBufferTest, ShapeMismatchIsContractError) {
  ProbBuffer buf(3);
  buf.record(random_stochastic(4, 3, 2));
  EXPECT_THROW(buf.record(random_stochastic(5, 3, 3)), ContractError);
}

LabelStore hard_store(const std::vector<std::uint32_t>& noisy,
                      const std::vector<std::uint32_t>& truth, std::size_t c) {
  return LabelStore(one_hot(noisy, c), one_hot(truth, c), LabelMode::hard);
}

TEST(HardUpdateTest, ArgmaxAssignment) {
  LabelStore store = hard_store({0}, {1}, 3);
  Tensor probs = Tensor::row({0.1, 0.7, 0.2});
  const std::size_t changed = store.hard_update(probs);
  EXPECT_EQ(changed, 1u);
  EXPECT_EQ(store.current().at(0, 1), 1.0);
  EXPECT_EQ(store.current().at(0, 0), 0.0);
}

TEST(HardUpdateTest, FixedPointWhenProbsMatchLabels) {
  LabelStore store = hard_store({0, 1, 2}, {0, 1, 2}, 3);
  const Tensor probs = store.current();
  EXPECT_EQ(store.hard_update(probs), 0u);
  EXPECT_EQ(store.current().values, probs.values);
  // idempotence with any probs
  const Tensor p2 = random_stochastic(3, 3, 4);
  store.hard_update(p2);
  const Tensor once = store.current();
  EXPECT_EQ(store.hard_update(p2), 0u);
  EXPECT_EQ(store.current().values, once.values);
}

TEST(HardUpdateTest, TieBreaksToLowestClass) {
  LabelStore store = hard_store({1}, {1}, 2);
  Tensor probs = Tensor::row({0.5, 0.5});
  store.hard_update(probs);
  EXPECT_EQ(store.current().at(0, 0), 1.0);
}

TEST(HardUpdateTest, TopKRewritesLowestConfidenceFirst) {
  // four samples labeled class 0; predictions disagree on three of them
  // with confidences in current label 0.4 (s1), 0.1 (s2), 0.25 (s3)
  LabelStore store = hard_store({0, 0, 0, 0}, {0, 1, 1, 1}, 2);
  Tensor probs = Tensor::matrix(4, 2);
  probs.values = {0.9, 0.1,    // agrees, not a candidate
                  0.4, 0.6,    // candidate, confidence 0.4
                  0.1, 0.9,    // candidate, confidence 0.1  <- first
                  0.25, 0.75}; // candidate, confidence 0.25 <- second
  const std::size_t changed = store.hard_update(probs, 2);
  EXPECT_EQ(changed, 2u);
  EXPECT_EQ(store.current().at(0, 0), 1.0);  // untouched
  EXPECT_EQ(store.current().at(1, 0), 1.0);  // not in top 2
  EXPECT_EQ(store.current().at(2, 1), 1.0);  // rewritten
  EXPECT_EQ(store.current().at(3, 1), 1.0);  // rewritten
}

TEST(HardUpdateTest, TopKTiesBreakBySampleIndex) {
  LabelStore store = hard_store({0, 0}, {1, 1}, 2);
  Tensor probs = Tensor::matrix(2, 2);
  probs.values = {0.2, 0.8, 0.2, 0.8};  // equal confidence in current label
  store.hard_update(probs, 1);
  EXPECT_EQ(store.current().at(0, 1), 1.0);  // lower index wins
  EXPECT_EQ(store.current().at(1, 0), 1.0);
}

TEST(HardUpdateTest, SoftStoreRejected) {
  LabelStore store(one_hot({0}, 2), std::nullopt, LabelMode::soft);
  EXPECT_THROW(store.hard_update(Tensor::row({0.5, 0.5})), UsageError);
}

TEST(SoftUpdateTest, AssignsProbsVerbatim) {
  LabelStore store(one_hot({0, 1}, 2), std::nullopt, LabelMode::soft);
  const Tensor probs = random_stochastic(2, 2, 5);
  store.soft_update(probs);
  EXPECT_EQ(store.current().values, probs.values);  // bit-for-bit
  // idempotence
  const std::size_t changed = store.soft_update(probs);
  EXPECT_EQ(changed, 0u);
  EXPECT_EQ(store.current().values, probs.values);
}

TEST(SoftUpdateTest, RealizesKlFixedPoint) {
  LabelStore store(one_hot({0, 1, 2}, 3), std::nullopt, LabelMode::soft);
  const Tensor probs = random_stochastic(3, 3, 6);
  store.soft_update(probs);
  EXPECT_LE(kl_classification_loss(store.current(), probs), 1e-9);
}

TEST(SoftUpdateTest, HardStoreRejected) {
  LabelStore store = hard_store({0}, {0}, 2);
  EXPECT_THROW(store.soft_update(Tensor::row({0.5, 0.5})), UsageError);
}

TEST(MaybeUpdateTest, GatesOnSchedule) {
  const Tensor probs = random_stochastic(3, 2, 7);
  ProbBuffer buf(5);
  buf.record(probs);
  UpdateSchedule sched;
  sched.t1 = 2;
  sched.t2 = 4;

  LabelStore store(one_hot({0, 0, 1}, 2), std::nullopt, LabelMode::soft);
  const Tensor before = store.current();
  EXPECT_FALSE(maybe_update(store, buf, sched, 1).did_update);
  EXPECT_EQ(store.current().values, before.values);
  EXPECT_FALSE(maybe_update(store, buf, sched, 4).did_update);
  EXPECT_EQ(store.current().values, before.values);
  EXPECT_TRUE(maybe_update(store, buf, sched, 2).did_update);
  EXPECT_EQ(store.current().values, probs.values);
}

TEST(MaybeUpdateTest, UpdateEpochSetMatchesWindow) {
  const Tensor probs = random_stochastic(2, 2, 8);
  ProbBuffer buf(3);
  buf.record(probs);
  UpdateSchedule sched;
  sched.t1 = 3;
  sched.t2 = 6;
  LabelStore store(one_hot({0, 1}, 2), std::nullopt, LabelMode::soft);
  std::vector<std::size_t> updated;
  for (std::size_t e = 0; e < 10; ++e) {
    if (maybe_update(store, buf, sched, e).did_update) updated.push_back(e);
  }
  EXPECT_EQ(updated, (std::vector<std::size_t>{3, 4, 5}));
}

TEST(MaybeUpdateTest, AlwaysOnReducesToSoftUpdate) {
  const Tensor probs = random_stochastic(2, 3, 9);
  ProbBuffer buf(4);
  buf.record(probs);
  UpdateSchedule sched;  // t1=0, t2=max, defaults
  LabelStore store(one_hot({0, 2}, 3), std::nullopt, LabelMode::soft);
  EXPECT_TRUE(maybe_update(store, buf, sched, 0).did_update);
  EXPECT_EQ(store.current().values, probs.values);
}

TEST(LabelStoreTest, OriginalsFrozenAndRecoveryAccuracy) {
  // 4 samples, one corrupted: recovery accuracy of untouched store = 75%
  LabelStore store = hard_store({0, 1, 1, 1}, {0, 1, 2, 1}, 3);
  EXPECT_NEAR(store.recovery_accuracy_pct(), 75.0, 1e-12);
  const Tensor original = store.original_noisy();
  store.hard_update(random_stochastic(4, 3, 10));
  EXPECT_EQ(store.original_noisy().values, original.values);
  LabelStore no_truth(one_hot({0}, 2), std::nullopt, LabelMode::hard);
  EXPECT_THROW(no_truth.recovery_accuracy_pct(), UsageError);
}

TEST(LabelStoreTest, RowStochasticityPreservedByUpdates) {
  LabelStore store(one_hot({0, 1, 0, 1}, 2), std::nullopt, LabelMode::soft);
  for (std::uint64_t s = 0; s < 20; ++s) {
    store.soft_update(random_stochastic(4, 2, 100 + s));
    check_row_stochastic(store.current(), "current", 1e-6);
  }
}

TEST(BinReportTest, AllCorrectOneHot) {
  LabelStore store(one_hot({0, 1, 2}, 3), one_hot({0, 1, 2}, 3), LabelMode::soft);
  const std::vector<BinRow> bins = bin_recovery_report(store);
  ASSERT_EQ(bins.size(), 5u);  // four ranges + overall
  EXPECT_EQ(bins[0].count, 3u);
  EXPECT_DOUBLE_EQ(bins[0].accuracy_pct(), 100.0);
  EXPECT_EQ(bins[1].count + bins[2].count + bins[3].count, 0u);
  EXPECT_EQ(bins[4].count, 3u);  // overall row
}

TEST(BinReportTest, MatchesBruteForceBinning) {
  const std::size_t n = 20, c = 4;
  const Tensor truth = one_hot(
      {0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3}, c);
  Tensor soft = Tensor::matrix(n, c);
  Rng rng(11);
  for (std::size_t i = 0; i < n; ++i) {
    // mix of sharp and diffuse rows so every bin gets traffic
    const double peak = (i % 4 == 0) ? 0.999 : (i % 4 == 1) ? 0.97
                                 : (i % 4 == 2) ? 0.92 : 0.5;
    const std::size_t cls = rng.uniform_int(c);
    for (std::size_t j = 0; j < c; ++j) {
      soft.at(i, j) = (j == cls) ? peak : (1.0 - peak) / static_cast<double>(c - 1);
    }
  }
  LabelStore store(one_hot(std::vector<std::uint32_t>(n, 0), c), truth,
                   LabelMode::soft);
  store.soft_update(soft);
  const std::vector<BinRow> bins = bin_recovery_report(store);

  // independent binning
  const double lo[4] = {0.99, 0.95, 0.9, 0.0};
  const double hi[4] = {1.0, 0.99, 0.95, 0.9};
  std::size_t counts[4] = {0, 0, 0, 0};
  std::size_t correct[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    double top = 0.0;
    std::size_t pred = 0;
    for (std::size_t j = 0; j < c; ++j) {
      if (soft.at(i, j) > top) {
        top = soft.at(i, j);
        pred = j;
      }
    }
    for (int b = 0; b < 4; ++b) {
      if (top > lo[b] && top <= hi[b]) {
        ++counts[b];
        if (truth.at(i, pred) == 1.0) ++correct[b];
        break;
      }
    }
  }
  std::size_t total = 0;
  for (int b = 0; b < 4; ++b) {
    EXPECT_EQ(bins[b].count, counts[b]);
    EXPECT_EQ(bins[b].correct, correct[b]);
    total += bins[b].count;
  }
  EXPECT_EQ(total, n);
}

TEST(BinReportTest, RequiresSoftModeAndTruth) {
  LabelStore hard = hard_store({0}, {0}, 2);
  EXPECT_THROW(bin_recovery_report(hard), UsageError);
  LabelStore no_truth(one_hot({0}, 2), std::nullopt, LabelMode::soft);
  EXPECT_THROW(bin_recovery_report(no_truth), UsageError);
}

}  // namespace
}  // namespace jolt
