#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msprompt/parse.hpp"

namespace msprompt {

struct SampleScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  friend bool operator==(const SampleScore&, const SampleScore&) = default;
};

// Set-overlap tallies for one sample; micro averaging pools these.
struct OverlapCounts {
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t actual = 0;
};

// 2pr/(p+r), 0 when p + r == 0.
double harmonic_f1(double precision, double recall) noexcept;

OverlapCounts overlap(std::span<const std::string> predicted, std::span<const std::string> truth);

// p = |pred ∩ truth| / |pred| (0 for an empty prediction), r = |pred ∩ truth| / |truth|.
// Duplicates are counted once. Throws EmptyTruth.
SampleScore sample_prf(std::span<const std::string> predicted, std::span<const std::string> truth);
SampleScore sample_prf(const LabelSet& predicted, const LabelSet& truth);

enum class Averaging { SampleAveraged, Micro };
std::string_view averaging_name(Averaging a) noexcept;

// Arithmetic means of per-sample p/r/f1. Throws EmptyRun.
SampleScore aggregate_sample_averaged(std::span<const SampleScore> scores);
// p and r from pooled counts, f1 from the pooled p and r. Throws EmptyRun.
SampleScore aggregate_micro(std::span<const OverlapCounts> counts);

struct Top1Record {
  std::optional<std::string> predicted;
  std::string truth;
};

// Fraction of records with predicted == truth; a missing prediction is wrong.
// Throws EmptyRun.
double top1_accuracy(std::span<const Top1Record> records);

}  // namespace msprompt
