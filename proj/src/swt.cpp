#include "ecglens/swt.hpp"

#include <cmath>

namespace ecglens::swt {

namespace {

WaveletFilter make_orthonormal(std::string name, std::vector<double> lo) {
  WaveletFilter w;
  w.name = std::move(name);
  const std::size_t len = lo.size();
  w.lo_d = lo;
  w.hi_d.resize(len);
  for (std::size_t k = 0; k < len; ++k) w.hi_d[k] = ((k % 2) ? -1.0 : 1.0) * lo[len - 1 - k];
  w.lo_r.assign(w.lo_d.rbegin(), w.lo_d.rend());
  w.hi_r.assign(w.hi_d.rbegin(), w.hi_d.rend());
  return w;
}

// Circular convolution of x with `filter` upsampled by `step`.
void convolve_periodic(std::span<const double> x, std::span<const double> filter, std::size_t step,
                       std::vector<double>& out) {
  const std::size_t n = x.size();
  out.assign(n, 0.0);
  for (std::size_t k = 0; k < filter.size(); ++k) {
    const std::size_t shift = (k * step) % n;
    const double h = filter[k];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t src = i >= shift ? i - shift : i + n - shift;
      out[i] += h * x[src];
    }
  }
}

// Adjoint of convolve_periodic, expressed with the reversed (reconstruction)
// filter: y[m] += sum_k rec[L-1-k] x[(m + k step) mod N].
void accumulate_adjoint(std::span<const double> x, std::span<const double> rec, std::size_t step,
                        std::vector<double>& out) {
  const std::size_t n = x.size();
  const std::size_t len = rec.size();
  for (std::size_t k = 0; k < len; ++k) {
    const std::size_t shift = (k * step) % n;
    const double h = rec[len - 1 - k];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t src = i + shift < n ? i + shift : i + shift - n;
      out[i] += h * x[src];
    }
  }
}

void check_levels(std::size_t n, int levels) {
  if (n == 0) throw Error(ErrorCode::Data, "swt: empty input");
  if (levels < 1) throw Error(ErrorCode::Config, "swt: levels must be >= 1");
  if (levels > 30 || n % (std::size_t{1} << levels) != 0)
    throw Error(ErrorCode::Config, "swt: length " + std::to_string(n) + " is not divisible by 2^" +
                                       std::to_string(levels));
}

double rms(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

const WaveletFilter& wavelet(const std::string& name) {
  static const WaveletFilter haar = make_orthonormal("haar", {M_SQRT1_2, M_SQRT1_2});
  static const WaveletFilter db4 = make_orthonormal(
      "db4", {-0.010597401785069032, 0.0328830116668852, 0.030841381835560764, -0.18703481171909309,
              -0.027983769416859854, 0.6308807679298589, 0.7148465705529157, 0.2303778133088965});
  if (name == "haar") return haar;
  if (name == "db4") return db4;
  throw Error(ErrorCode::Config, "unknown wavelet '" + name + "' (supported: haar, db4)");
}

SwtDecomposition decompose(std::span<const double> x, const WaveletFilter& w, int levels) {
  check_levels(x.size(), levels);
  SwtDecomposition d;
  d.levels = levels;
  std::vector<double> approx(x.begin(), x.end());
  std::vector<double> next;
  for (int j = 1; j <= levels; ++j) {
    const std::size_t step = std::size_t{1} << (j - 1);
    std::vector<double> detail;
    convolve_periodic(approx, w.hi_d, step, detail);
    convolve_periodic(approx, w.lo_d, step, next);
    d.details.push_back(std::move(detail));
    approx.swap(next);
  }
  d.approx = std::move(approx);
  return d;
}

std::vector<double> reconstruct(const SwtDecomposition& d, const WaveletFilter& w) {
  const std::size_t n = d.approx.size();
  if (d.levels < 1 || d.details.size() != static_cast<std::size_t>(d.levels))
    throw Error(ErrorCode::Data, "swt: decomposition has " + std::to_string(d.details.size()) +
                                     " detail bands for " + std::to_string(d.levels) + " levels");
  for (const auto& band : d.details) {
    if (band.size() != n) throw Error(ErrorCode::Data, "swt: band length mismatch");
  }
  check_levels(n, d.levels);

  std::vector<double> approx = d.approx;
  std::vector<double> prev;
  for (int j = d.levels; j >= 1; --j) {
    const std::size_t step = std::size_t{1} << (j - 1);
    prev.assign(n, 0.0);
    accumulate_adjoint(approx, w.lo_r, step, prev);
    accumulate_adjoint(d.details[static_cast<std::size_t>(j - 1)], w.hi_r, step, prev);
    for (double& v : prev) v *= 0.5;
    approx.swap(prev);
  }
  return approx;
}

void validate(const AugmentParams& p) {
  if (!(p.gain_low > 0.0) || !(p.gain_low <= p.gain_high))
    throw Error(ErrorCode::Config, "augment: require 0 < gain_low <= gain_high");
  if (!(p.noise_scale >= 0.0)) throw Error(ErrorCode::Config, "augment: noise_scale must be >= 0");
  wavelet(p.wavelet);
  check_levels(kSamples, p.levels);
}

EcgSignal augment_record(const EcgSignal& signal, const AugmentParams& p, Rng& rng) {
  validate(p);
  const WaveletFilter& w = wavelet(p.wavelet);
  std::uniform_real_distribution<double> gain_dist(p.gain_low, p.gain_high);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto perturb = [&](std::vector<double>& band) {
    // A degenerate range still consumes a draw so the stream layout does not
    // depend on the parameter values.
    const double drawn = gain_dist(rng);
    const double gain = p.gain_low == p.gain_high ? p.gain_low : drawn;
    const double sigma = p.noise_scale * rms(band);
    for (double& v : band) {
      v *= gain;
      if (sigma > 0.0) v += sigma * normal(rng);
    }
  };

  EcgSignal out = signal;
  std::vector<double> lead(kSamples);
  for (std::size_t l = 0; l < kLeads; ++l) {
    for (std::size_t t = 0; t < kSamples; ++t) lead[t] = signal.at(t, l);
    SwtDecomposition d = decompose(lead, w, p.levels);
    for (auto& band : d.details) perturb(band);
    perturb(d.approx);
    const auto rebuilt = reconstruct(d, w);
    for (std::size_t t = 0; t < kSamples; ++t) out.at(t, l) = rebuilt[t];
  }
  return out;
}

LabeledDataset balance_classes(const LabeledDataset& train, const std::map<Superclass, std::size_t>& add_per_class,
                               const AugmentParams& p) {
  validate(p);
  std::array<std::vector<std::size_t>, kNumClasses> members;
  for (std::size_t i = 0; i < train.records.size(); ++i)
    members[static_cast<std::size_t>(train.records[i].label)].push_back(i);

  LabeledDataset out = train;
  for (const auto& [cls, count] : add_per_class) {
    if (count == 0) continue;
    const auto& sources = members[static_cast<std::size_t>(cls)];
    if (sources.empty())
      throw Error(ErrorCode::Data, "augment: class " + std::string(superclass_name(cls)) +
                                       " requested but absent from the training split");
    for (std::size_t i = 0; i < count; ++i) {
      const LabeledRecord& src = train.records[sources[i % sources.size()]];
      Rng rng(derive_seed(p.seed, {static_cast<std::uint64_t>(class_index(cls)), i}));
      LabeledRecord copy;
      copy.ecg_id = src.ecg_id;
      copy.label = src.label;
      copy.strat_fold = src.strat_fold;
      copy.signal = augment_record(src.signal, p, rng);
      out.records.push_back(std::move(copy));
    }
  }
  return out;
}

}  // namespace ecglens::swt
