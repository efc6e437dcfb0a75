#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "msprompt/errors.hpp"
#include "msprompt/metrics.hpp"
#include "oracle.hpp"

namespace msprompt {
namespace {

using L = std::vector<std::string>;

TEST(SamplePrf, HandCases) {
  auto s = sample_prf(L{"A", "B"}, L{"A"});
  EXPECT_EQ(s.precision, 0.5);
  EXPECT_EQ(s.recall, 1.0);
  EXPECT_EQ(s.f1, 2.0 / 3.0);
  s = sample_prf(L{"A", "C"}, L{"C", "A"});
  EXPECT_EQ(s, (SampleScore{1.0, 1.0, 1.0}));
  s = sample_prf(L{}, L{"A"});
  EXPECT_EQ(s, (SampleScore{0.0, 0.0, 0.0}));
  s = sample_prf(L{"B"}, L{"A"});
  EXPECT_EQ(s, (SampleScore{0.0, 0.0, 0.0}));
  EXPECT_THROW(sample_prf(L{"A"}, L{}), EmptyTruth);
  s = sample_prf(L{"A", "A"}, L{"A"});
  EXPECT_EQ(s.precision, 1.0);
}

TEST(SamplePrf, LabelSetOverload) {
  LabelSet p, t;
  p.add("A");
  p.add("B");
  t.add("A");
  EXPECT_EQ(sample_prf(p, t).f1, 2.0 / 3.0);
}

TEST(HarmonicF1, ZeroConvention) {
  EXPECT_EQ(harmonic_f1(0, 0), 0.0);
  EXPECT_EQ(harmonic_f1(1, 1), 1.0);
}

TEST(Aggregate, Examples) {
  const std::vector<SampleScore> two = {{0.5, 1.0, 2.0 / 3.0}, {1.0, 0.5, 2.0 / 3.0}};
  EXPECT_NEAR(aggregate_sample_averaged(two).f1, 2.0 / 3.0, 1e-15);
  const std::vector<SampleScore> perfect(5, SampleScore{1, 1, 1});
  EXPECT_EQ(aggregate_sample_averaged(perfect), (SampleScore{1, 1, 1}));
  const std::vector<OverlapCounts> pc(3, OverlapCounts{2, 2, 2});
  EXPECT_EQ(aggregate_micro(pc), (SampleScore{1, 1, 1}));
  EXPECT_THROW(aggregate_sample_averaged({}), EmptyRun);
  EXPECT_THROW(aggregate_micro({}), EmptyRun);
}

TEST(Aggregate, SingleSampleModesAgreeOnPrecisionRecall) {
  const L pred = {"A", "B", "C"}, truth = {"A", "D"};
  const auto s = sample_prf(pred, truth);
  const std::vector<OverlapCounts> c = {overlap(pred, truth)};
  const auto m = aggregate_micro(c);
  EXPECT_DOUBLE_EQ(m.precision, s.precision);
  EXPECT_DOUBLE_EQ(m.recall, s.recall);
}

struct RandomRun {
  std::vector<L> preds, truths;
};

RandomRun random_run(std::mt19937_64& rng) {
  const std::vector<std::string> classes = {"A", "B", "C", "D", "E"};
  const std::size_t k = 1 + rng() % 5;
  const std::size_t n = 1 + rng() % 8;
  RandomRun run;
  for (std::size_t i = 0; i < n; ++i) {
    L p, t;
    for (std::size_t c = 0; c < k; ++c) {
      if (rng() % 3 == 0) p.push_back(classes[c]);
      if (rng() % 2 == 0) t.push_back(classes[c]);
    }
    if (t.empty()) t.push_back(classes[rng() % k]);
    run.preds.push_back(p);
    run.truths.push_back(t);
  }
  return run;
}

TEST(Aggregate, MatchesBruteForceAndIsPermutationInvariant) {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    auto run = random_run(rng);
    std::vector<SampleScore> scores;
    std::vector<OverlapCounts> counts;
    for (std::size_t i = 0; i < run.preds.size(); ++i) {
      scores.push_back(sample_prf(run.preds[i], run.truths[i]));
      counts.push_back(overlap(run.preds[i], run.truths[i]));
      const auto s = scores.back();
      for (double v : {s.precision, s.recall, s.f1}) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
      }
    }
    const auto sa = aggregate_sample_averaged(scores), mi = aggregate_micro(counts);
    const auto osa = oracle::sample_averaged(run.preds, run.truths), omi = oracle::micro(run.preds, run.truths);
    EXPECT_NEAR(sa.precision, osa.p, 1e-12);
    EXPECT_NEAR(sa.recall, osa.r, 1e-12);
    EXPECT_NEAR(sa.f1, osa.f, 1e-12);
    EXPECT_NEAR(mi.precision, omi.p, 1e-12);
    EXPECT_NEAR(mi.recall, omi.r, 1e-12);
    EXPECT_NEAR(mi.f1, omi.f, 1e-12);

    std::shuffle(scores.begin(), scores.end(), rng);
    std::shuffle(counts.begin(), counts.end(), rng);
    EXPECT_NEAR(aggregate_sample_averaged(scores).f1, sa.f1, 1e-12);
    EXPECT_EQ(aggregate_micro(counts), mi);
  }
}

TEST(SamplePrf, MonotoneInAddedLabels) {
  std::mt19937_64 rng(77);
  const std::vector<std::string> classes = {"A", "B", "C", "D", "E", "F"};
  for (int trial = 0; trial < 500; ++trial) {
    L truth, pred;
    for (const auto& c : classes) {
      if (rng() % 2) truth.push_back(c);
      if (rng() % 2) pred.push_back(c);
    }
    if (truth.empty()) truth.push_back("A");
    const auto base = sample_prf(pred, truth);
    EXPECT_EQ(sample_prf(truth, truth).f1, 1.0);
    for (const auto& c : classes) {
      if (std::ranges::find(pred, c) != pred.end()) continue;
      L more = pred;
      more.push_back(c);
      const auto s = sample_prf(more, truth);
      if (std::ranges::find(truth, c) != truth.end()) {
        EXPECT_GE(s.recall, base.recall);
      } else {
        EXPECT_LE(s.precision, base.precision);
      }
    }
  }
}

TEST(Top1, Examples) {
  using R = Top1Record;
  EXPECT_EQ(top1_accuracy(std::vector<R>{{"A", "A"}, {"B", "B"}, {"C", "C"}, {"A", "B"}}), 0.75);
  EXPECT_EQ(top1_accuracy(std::vector<R>{{std::nullopt, "A"}, {std::nullopt, "B"}}), 0.0);
  std::vector<R> recs = {{"A", "A"}, {std::nullopt, "B"}, {"C", "C"}, {"D", "C"}, {"E", "E"}};
  const double acc = top1_accuracy(recs);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10; ++i) {
    std::shuffle(recs.begin(), recs.end(), rng);
    EXPECT_EQ(top1_accuracy(recs), acc);
  }
  EXPECT_THROW(top1_accuracy(std::vector<R>{}), EmptyRun);
}

}  // namespace
}  // namespace msprompt
