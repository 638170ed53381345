#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ecglens/common.hpp"
#include "ecglens/ingest.hpp"

namespace ecglens::swt {

struct WaveletFilter {
  std::string name;
  std::vector<double> lo_d;
  std::vector<double> hi_d;
  std::vector<double> lo_r;
  std::vector<double> hi_r;
};

/// "haar" or "db4" (8 taps). Throws Error(Config) for anything else.
const WaveletFilter& wavelet(const std::string& name);

struct SwtDecomposition {
  int levels = 0;
  std::vector<double> approx;                // level `levels`
  std::vector<std::vector<double>> details;  // details[0] is level 1 (finest)
};

/// Undecimated a trous decomposition with periodic extension. At level j the
/// filters are upsampled by 2^(j-1) and applied as circular convolutions:
///   a_j[n] = sum_k lo_d[k] a_{j-1}[(n - k 2^(j-1)) mod N]
SwtDecomposition decompose(std::span<const double> x, const WaveletFilter& w, int levels);

/// Inverse of decompose: a_{j-1} = (H_j^T a_j + G_j^T d_j) / 2, which is the
/// average of the 2^(j-1)-phase inverse transforms.
std::vector<double> reconstruct(const SwtDecomposition& d, const WaveletFilter& w);

struct AugmentParams {
  double gain_low = 0.9;
  double gain_high = 1.1;
  double noise_scale = 0.05;
  int levels = 3;
  std::string wavelet = "db4";
  std::uint64_t seed = 0;
};

void validate(const AugmentParams& p);

/// Per lead: decompose, scale each band by a gain drawn from
/// U[gain_low, gain_high], add N(0, (noise_scale * band_rms)^2) noise,
/// reconstruct. Bands are visited details 1..L then the approximation.
EcgSignal augment_record(const EcgSignal& signal, const AugmentParams& p, Rng& rng);

/// Appends add_per_class[c] augmented copies for each class c, cycling
/// through that class's records in order. Sample i of class c uses its own
/// generator seeded from (p.seed, c, i).
LabeledDataset balance_classes(const LabeledDataset& train, const std::map<Superclass, std::size_t>& add_per_class,
                               const AugmentParams& p);

}  // namespace ecglens::swt
