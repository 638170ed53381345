#pragma once

#include <array>
#include <cstdint>

#include "ecglens/ingest.hpp"

namespace ecglens {

/// Five-class stand-in for PTB-XL. Record i of class c is
///   x[t,l] = amp[c][l] * sin(2 pi freq[c] t / 100 + phase + l pi / 6) + offset[c][l] + N(0, noise^2)
/// with phase ~ U[0, 2 pi) per record. Labels cycle NORM, MI, STTC, CD, HYP.
/// Training records get folds 1-8 round-robin, validation fold 9, test fold 10.
struct SyntheticSpec {
  std::size_t train = 2000;
  std::size_t val = 500;
  std::size_t test = 500;
  double noise = 0.3;
  std::uint64_t seed = 0;
};

inline constexpr std::array<double, kNumClasses> kSyntheticFrequencies = {1.0, 1.7, 2.5, 3.4, 4.5};

void validate(const SyntheticSpec& spec);

/// Deterministic in (spec.seed, split, index); records sorted by ecg_id.
LabeledDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace ecglens
