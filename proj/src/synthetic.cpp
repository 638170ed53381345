#include "ecglens/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "ecglens/common.hpp"

namespace ecglens {

namespace {

double amplitude(std::size_t c, std::size_t lead) {
  return 0.4 + 0.3 * static_cast<double>((c * 7 + lead * 3) % 5);
}

double offset(std::size_t c, std::size_t lead) {
  return 0.15 * (static_cast<double>((c * 3 + lead * 5) % 7) - 3.0);
}

LabeledRecord make_record(const SyntheticSpec& spec, std::uint64_t split, std::size_t index, int ecg_id, int fold) {
  Rng rng(derive_seed(spec.seed, {0x5717, split, index}));
  const std::size_t c = index % kNumClasses;
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, spec.noise);
  const double phase = phase_dist(rng);
  const double w = 2.0 * std::numbers::pi * kSyntheticFrequencies[c] / 100.0;

  LabeledRecord r;
  r.ecg_id = ecg_id;
  r.label = superclass_from_index(static_cast<int>(c));
  r.strat_fold = fold;
  for (std::size_t t = 0; t < kSamples; ++t) {
    for (std::size_t l = 0; l < kLeads; ++l) {
      const double angle = w * static_cast<double>(t) + phase + static_cast<double>(l) * std::numbers::pi / 6.0;
      r.signal.at(t, l) = amplitude(c, l) * std::sin(angle) + offset(c, l) + noise(rng);
    }
  }
  return r;
}

}  // namespace

void validate(const SyntheticSpec& spec) {
  if (spec.train == 0 || spec.val == 0 || spec.test == 0)
    throw Error(ErrorCode::Config, "synthetic: train, val and test sizes must be positive");
  if (!(spec.noise >= 0.0) || !std::isfinite(spec.noise))
    throw Error(ErrorCode::Config, "synthetic: noise must be a finite non-negative number");
}

LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  LabeledDataset out;
  out.records.reserve(spec.train + spec.val + spec.test);
  int next_id = 1;
  for (std::size_t i = 0; i < spec.train; ++i)
    out.records.push_back(make_record(spec, 0, i, next_id++, static_cast<int>(i % 8) + 1));
  for (std::size_t i = 0; i < spec.val; ++i) out.records.push_back(make_record(spec, 1, i, next_id++, 9));
  for (std::size_t i = 0; i < spec.test; ++i) out.records.push_back(make_record(spec, 2, i, next_id++, 10));
  return out;
}

}  // namespace ecglens
