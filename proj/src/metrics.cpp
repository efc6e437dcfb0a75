#include "msprompt/metrics.hpp"

#include <algorithm>
#include <set>

#include "msprompt/errors.hpp"

namespace msprompt {

double harmonic_f1(double precision, double recall) noexcept {
  const double sum = precision + recall;
  return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

OverlapCounts overlap(std::span<const std::string> predicted, std::span<const std::string> truth) {
  const std::set<std::string> p(predicted.begin(), predicted.end());
  const std::set<std::string> t(truth.begin(), truth.end());
  OverlapCounts c;
  c.predicted = p.size();
  c.actual = t.size();
  c.true_positives = static_cast<std::size_t>(std::ranges::count_if(p, [&](const auto& x) { return t.contains(x); }));
  return c;
}

SampleScore sample_prf(std::span<const std::string> predicted, std::span<const std::string> truth) {
  if (truth.empty()) throw EmptyTruth("ground-truth label set is empty");
  const OverlapCounts c = overlap(predicted, truth);
  SampleScore s;
  s.precision = c.predicted ? static_cast<double>(c.true_positives) / static_cast<double>(c.predicted) : 0.0;
  s.recall = static_cast<double>(c.true_positives) / static_cast<double>(c.actual);
  s.f1 = harmonic_f1(s.precision, s.recall);
  return s;
}

SampleScore sample_prf(const LabelSet& predicted, const LabelSet& truth) {
  return sample_prf(predicted.labels, truth.labels);
}

std::string_view averaging_name(Averaging a) noexcept {
  return a == Averaging::SampleAveraged ? "sample-averaged" : "micro";
}

SampleScore aggregate_sample_averaged(std::span<const SampleScore> scores) {
  if (scores.empty()) throw EmptyRun("no samples to aggregate");
  SampleScore mean;
  for (const auto& s : scores) {
    mean.precision += s.precision;
    mean.recall += s.recall;
    mean.f1 += s.f1;
  }
  const auto n = static_cast<double>(scores.size());
  mean.precision /= n;
  mean.recall /= n;
  mean.f1 /= n;
  return mean;
}

SampleScore aggregate_micro(std::span<const OverlapCounts> counts) {
  if (counts.empty()) throw EmptyRun("no samples to aggregate");
  std::size_t tp = 0, predicted = 0, actual = 0;
  for (const auto& c : counts) {
    tp += c.true_positives;
    predicted += c.predicted;
    actual += c.actual;
  }
  SampleScore s;
  s.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
  s.recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
  s.f1 = harmonic_f1(s.precision, s.recall);
  return s;
}

double top1_accuracy(std::span<const Top1Record> records) {
  if (records.empty()) throw EmptyRun("no records to score");
  const auto correct = std::ranges::count_if(records, [](const Top1Record& r) {
    return r.predicted.has_value() && *r.predicted == r.truth;
  });
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

}  // namespace msprompt
