#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ecglens/swt.hpp"
#include "support/fixtures.hpp"

using namespace ecglens;

namespace {

// Zero-inserted filter convolved circularly, written out the long way.
std::vector<double> circular_oracle(const std::vector<double>& x, const std::vector<double>& filter, int level) {
  const std::size_t step = std::size_t{1} << (level - 1);
  std::vector<double> up((filter.size() - 1) * step + 1, 0.0);
  for (std::size_t k = 0; k < filter.size(); ++k) up[k * step] = filter[k];
  const std::size_t n = x.size();
  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t m = 0; m < up.size(); ++m) acc += up[m] * x[(i + n * up.size() - m) % n];
    y[i] = acc;
  }
  return y;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

std::vector<double> rotate_right(const std::vector<double>& x, std::size_t k) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[(i + k) % x.size()] = x[i];
  return y;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> lead(const EcgSignal& s, std::size_t l) {
  std::vector<double> v(kSamples);
  for (std::size_t t = 0; t < kSamples; ++t) v[t] = s.at(t, l);
  return v;
}

}  // namespace

TEST_CASE("filter banks satisfy the quadrature-mirror relations") {
  for (const char* name : {"haar", "db4"}) {
    const auto& w = swt::wavelet(name);
    const std::size_t len = w.lo_d.size();
    CHECK(len == (std::string(name) == "haar" ? 2u : 8u));
    CHECK(std::accumulate(w.lo_d.begin(), w.lo_d.end(), 0.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    double energy = 0.0;
    for (double v : w.lo_d) energy += v * v;
    CHECK(energy == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t k = 0; k < len; ++k) {
      const double sign = k % 2 ? -1.0 : 1.0;
      CHECK(w.hi_d[k] == doctest::Approx(sign * w.lo_d[len - 1 - k]).epsilon(1e-15));
      CHECK(w.lo_r[k] == doctest::Approx(w.lo_d[len - 1 - k]).epsilon(1e-15));
      CHECK(w.hi_r[k] == doctest::Approx(w.hi_d[len - 1 - k]).epsilon(1e-15));
    }
  }
  CHECK_THROWS_AS(swt::wavelet("sym5"), Error);
}

TEST_CASE("constant input through one Haar level") {
  std::vector<double> x(1000, 3.5);
  const auto d = swt::decompose(x, swt::wavelet("haar"), 1);
  for (double v : d.approx) CHECK(v == doctest::Approx(3.5 * std::sqrt(2.0)).epsilon(1e-14));
  for (double v : d.details[0]) CHECK(std::abs(v) < 1e-14);
}

TEST_CASE("bands match the zero-inserted circular convolution oracle") {
  for (const char* name : {"haar", "db4"}) {
    const auto& w = swt::wavelet(name);
    const auto x = fixtures::random_vector(1000, 11);
    const auto d = swt::decompose(x, w, 3);
    REQUIRE(d.details.size() == 3);
    std::vector<double> a = x;
    for (int j = 1; j <= 3; ++j) {
      CHECK(max_abs_diff(d.details[static_cast<std::size_t>(j - 1)], circular_oracle(a, w.hi_d, j)) < 1e-12);
      a = circular_oracle(a, w.lo_d, j);
    }
    CHECK(max_abs_diff(d.approx, a) < 1e-12);
  }
}

TEST_CASE("perfect reconstruction, linearity and shift covariance") {
  for (const char* name : {"haar", "db4"}) {
    const auto& w = swt::wavelet(name);
    for (int levels = 1; levels <= 3; ++levels) {
      double worst = 0.0;
      for (std::uint64_t s = 0; s < 20; ++s) {
        const auto x = fixtures::random_vector(1000, s * 31 + static_cast<std::uint64_t>(levels));
        worst = std::max(worst, max_abs_diff(swt::reconstruct(swt::decompose(x, w, levels), w), x));
      }
      CHECK(worst < 1e-8);
    }
    const auto x = fixtures::random_vector(1000, 1);
    const auto y = fixtures::random_vector(1000, 2);
    std::vector<double> mix(1000);
    for (std::size_t i = 0; i < 1000; ++i) mix[i] = 2.5 * x[i] - 0.75 * y[i];
    const auto dx = swt::decompose(x, w, 3), dy = swt::decompose(y, w, 3), dm = swt::decompose(mix, w, 3);
    for (std::size_t b = 0; b < 4; ++b) {
      const auto& bx = b < 3 ? dx.details[b] : dx.approx;
      const auto& by = b < 3 ? dy.details[b] : dy.approx;
      const auto& bm = b < 3 ? dm.details[b] : dm.approx;
      std::vector<double> expect(1000);
      for (std::size_t i = 0; i < 1000; ++i) expect[i] = 2.5 * bx[i] - 0.75 * by[i];
      CHECK(max_abs_diff(bm, expect) < 1e-10);
    }
    for (std::size_t k : {1u, 7u, 500u, 999u}) {
      const auto ds = swt::decompose(rotate_right(x, k), w, 3);
      for (std::size_t b = 0; b < 3; ++b) CHECK(max_abs_diff(ds.details[b], rotate_right(dx.details[b], k)) < 1e-10);
      CHECK(max_abs_diff(ds.approx, rotate_right(dx.approx, k)) < 1e-10);
    }
    // Zero and scaled bands.
    auto zero = dx;
    for (auto& b : zero.details) std::fill(b.begin(), b.end(), 0.0);
    std::fill(zero.approx.begin(), zero.approx.end(), 0.0);
    for (double v : swt::reconstruct(zero, w)) CHECK(v == 0.0);
    auto scaled = dx;
    for (auto& b : scaled.details)
      for (auto& v : b) v *= -1.5;
    for (auto& v : scaled.approx) v *= -1.5;
    const auto rx = swt::reconstruct(dx, w);
    const auto rs = swt::reconstruct(scaled, w);
    for (std::size_t i = 0; i < 1000; ++i) REQUIRE(std::abs(rs[i] + 1.5 * rx[i]) < 1e-10);
  }
}

TEST_CASE("decompose and reconstruct preconditions") {
  const auto& w = swt::wavelet("db4");
  CHECK_THROWS_AS(swt::decompose(std::vector<double>(1000, 0.0), w, 4), Error);
  CHECK_THROWS_AS(swt::decompose(std::vector<double>{}, w, 1), Error);
  CHECK_THROWS_AS(swt::decompose(std::vector<double>(1000, 0.0), w, 0), Error);
  auto d = swt::decompose(fixtures::random_vector(1000, 4), w, 2);
  d.details[1].pop_back();
  CHECK_THROWS_AS(swt::reconstruct(d, w), Error);
}

TEST_CASE("augment_record with identity and pure-gain parameters") {
  const auto sig = fixtures::random_signal(21);
  swt::AugmentParams p;
  p.gain_low = p.gain_high = 1.0;
  p.noise_scale = 0.0;
  Rng rng(1);
  const auto same = swt::augment_record(sig, p, rng);
  double worst = 0.0;
  for (std::size_t i = 0; i < kSignalValues; ++i) worst = std::max(worst, std::abs(same.samples[i] - sig.samples[i]));
  CHECK(worst < 1e-8);

  p.gain_low = p.gain_high = 1.1;
  const auto louder = swt::augment_record(sig, p, rng);
  worst = 0.0;
  for (std::size_t i = 0; i < kSignalValues; ++i)
    worst = std::max(worst, std::abs(louder.samples[i] - 1.1 * sig.samples[i]));
  CHECK(worst < 1e-8);

  swt::AugmentParams bad;
  bad.gain_low = 1.2;
  bad.gain_high = 1.1;
  CHECK_THROWS_AS(swt::validate(bad), Error);
  bad = {};
  bad.noise_scale = -0.1;
  CHECK_THROWS_AS(swt::validate(bad), Error);
  bad = {};
  bad.levels = 4;
  CHECK_THROWS_AS(swt::validate(bad), Error);
  bad = {};
  bad.gain_low = 0.0;
  CHECK_THROWS_AS(swt::validate(bad), Error);
}

TEST_CASE("default augmentation stays correlated with the source") {
  // A smooth, ECG-like source: a few harmonics per lead.
  EcgSignal sig;
  for (std::size_t t = 0; t < kSamples; ++t)
    for (std::size_t l = 0; l < kLeads; ++l)
      sig.at(t, l) = std::sin(0.07 * static_cast<double>(t) + static_cast<double>(l)) +
                     0.3 * std::sin(0.31 * static_cast<double>(t) * (1.0 + 0.05 * static_cast<double>(l)));
  const swt::AugmentParams p;
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto out = swt::augment_record(sig, p, rng);
    double per_lead = 0.0;
    for (std::size_t l = 0; l < kLeads; ++l) per_lead += correlation(lead(sig, l), lead(out, l));
    sum += per_lead / kLeads;
  }
  CHECK(sum / 100.0 >= 0.9);
}

TEST_CASE("balance_classes adds exact counts deterministically") {
  LabeledDataset train;
  for (int i = 0; i < 23; ++i) {
    LabeledRecord r;
    r.ecg_id = i + 1;
    r.label = superclass_from_index(i % 4);  // no HYP records
    r.strat_fold = 1 + i % 8;
    r.signal = fixtures::random_signal(static_cast<std::uint64_t>(i));
    train.records.push_back(r);
  }
  swt::AugmentParams p;
  p.seed = 99;
  CHECK(swt::balance_classes(train, {}, p).records == train.records);

  const std::map<Superclass, std::size_t> add = {{Superclass::MI, 10}, {Superclass::STTC, 7}, {Superclass::CD, 0}};
  const auto out = swt::balance_classes(train, add, p);
  REQUIRE(out.size() == train.size() + 17);
  for (std::size_t i = 0; i < train.size(); ++i) CHECK(out.records[i] == train.records[i]);
  const auto before = train.class_counts(), after = out.class_counts();
  CHECK(after[1] - before[1] == 10);
  CHECK(after[2] - before[2] == 7);
  CHECK(after[0] == before[0]);
  CHECK(after[3] == before[3]);
  // Round-robin sources: MI records in order are ids 2, 6, 10, 14, 18, 22.
  std::vector<int> mi_sources;
  for (std::size_t i = train.size(); i < out.size(); ++i)
    if (out.records[i].label == Superclass::MI) mi_sources.push_back(out.records[i].ecg_id);
  CHECK(mi_sources == std::vector<int>{2, 6, 10, 14, 18, 22, 2, 6, 10, 14});
  CHECK(swt::balance_classes(train, add, p).records == out.records);
  p.seed = 100;
  CHECK(swt::balance_classes(train, add, p).records != out.records);
  CHECK_THROWS_AS(swt::balance_classes(train, {{Superclass::HYP, 1}}, p), Error);
}
