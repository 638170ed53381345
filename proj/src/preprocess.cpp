#include "ecglens/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "ecglens/common.hpp"

namespace ecglens {

void validate_split(const SplitSpec& spec) {
  std::set<int> seen;
  auto claim = [&](int fold, const char* part) {
    if (fold < 1 || fold > 10)
      throw Error(ErrorCode::Config, std::string("split: ") + part + " fold " + std::to_string(fold) + " outside 1-10");
    if (!seen.insert(fold).second)
      throw Error(ErrorCode::Config, "split: fold " + std::to_string(fold) + " assigned twice");
  };
  for (int f : spec.train_folds) claim(f, "train");
  claim(spec.val_fold, "validation");
  claim(spec.test_fold, "test");
  if (seen.size() != 10) throw Error(ErrorCode::Config, "split: folds must cover 1-10");
}

DatasetSplit split_by_fold(const LabeledDataset& dataset, const SplitSpec& spec) {
  validate_split(spec);
  DatasetSplit out;
  for (const auto& record : dataset.records) {
    if (spec.train_folds.count(record.strat_fold)) {
      out.train.records.push_back(record);
    } else if (record.strat_fold == spec.val_fold) {
      out.val.records.push_back(record);
    } else if (record.strat_fold == spec.test_fold) {
      out.test.records.push_back(record);
    } else {
      throw Error(ErrorCode::Data, "ecg_id " + std::to_string(record.ecg_id) + ": fold " +
                                       std::to_string(record.strat_fold) + " not covered by the split");
    }
  }
  return out;
}

NormStats fit_normalizer(const LabeledDataset& train) {
  if (train.empty()) throw Error(ErrorCode::Data, "cannot fit normalizer on an empty training split");
  NormStats stats;
  std::array<double, kLeads> sum{};
  for (const auto& r : train.records) {
    for (std::size_t t = 0; t < kSamples; ++t)
      for (std::size_t l = 0; l < kLeads; ++l) sum[l] += r.signal.at(t, l);
  }
  const double count = static_cast<double>(train.size() * kSamples);
  for (std::size_t l = 0; l < kLeads; ++l) stats.mean[l] = sum[l] / count;

  std::array<double, kLeads> squares{};
  for (const auto& r : train.records) {
    for (std::size_t t = 0; t < kSamples; ++t) {
      for (std::size_t l = 0; l < kLeads; ++l) {
        const double d = r.signal.at(t, l) - stats.mean[l];
        squares[l] += d * d;
      }
    }
  }
  for (std::size_t l = 0; l < kLeads; ++l) stats.std[l] = std::max(std::sqrt(squares[l] / count), kStdFloor);
  return stats;
}

EcgSignal normalize(const EcgSignal& signal, const NormStats& stats) {
  EcgSignal out = signal;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const std::size_t l = i % kLeads;
    out.samples[i] = (signal.samples[i] - stats.mean[l]) / stats.std[l];
  }
  return out;
}

EcgSignal denormalize(const EcgSignal& signal, const NormStats& stats) {
  EcgSignal out = signal;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const std::size_t l = i % kLeads;
    out.samples[i] = signal.samples[i] * stats.std[l] + stats.mean[l];
  }
  return out;
}

LabeledDataset normalize(const LabeledDataset& dataset, const NormStats& stats) {
  LabeledDataset out = dataset;
  for (auto& r : out.records) r.signal = normalize(r.signal, stats);
  return out;
}

std::array<double, kNumClasses> one_hot(Superclass label) {
  std::array<double, kNumClasses> v{};
  v.at(static_cast<std::size_t>(label)) = 1.0;
  return v;
}

std::vector<double> flatten(const EcgSignal& signal) {
  if (signal.samples.size() != kSignalValues)
    throw Error(ErrorCode::Data, "flatten: signal is not 1000x12");
  return signal.samples;
}

EcgSignal unflatten(const std::vector<double>& flat) {
  if (flat.size() != kSignalValues)
    throw Error(ErrorCode::Data, "unflatten: expected 12000 values, got " + std::to_string(flat.size()));
  EcgSignal s;
  s.samples = flat;
  return s;
}

}  // namespace ecglens
