#pragma once

#include <array>
#include <set>
#include <vector>

#include "ecglens/ingest.hpp"

namespace ecglens {

struct SplitSpec {
  std::set<int> train_folds = {1, 2, 3, 4, 5, 6, 7, 8};
  int val_fold = 9;
  int test_fold = 10;
};

/// Throws Error(Config) unless the parts are disjoint and cover folds 1-10.
void validate_split(const SplitSpec& spec);

struct DatasetSplit {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

DatasetSplit split_by_fold(const LabeledDataset& dataset, const SplitSpec& spec);

inline constexpr double kStdFloor = 1e-8;

struct NormStats {
  std::array<double, kLeads> mean{};
  std::array<double, kLeads> std{};

  bool operator==(const NormStats&) const = default;
};

/// Per-lead population mean/std over every time step of every record.
NormStats fit_normalizer(const LabeledDataset& train);

EcgSignal normalize(const EcgSignal& signal, const NormStats& stats);
EcgSignal denormalize(const EcgSignal& signal, const NormStats& stats);
LabeledDataset normalize(const LabeledDataset& dataset, const NormStats& stats);

std::array<double, kNumClasses> one_hot(Superclass label);

/// Time-major: t0 leads 0..11, then t1, ...
std::vector<double> flatten(const EcgSignal& signal);
EcgSignal unflatten(const std::vector<double>& flat);

}  // namespace ecglens
