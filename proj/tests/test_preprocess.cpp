#include <doctest.h>

#include <cmath>
#include <set>

#include "ecglens/preprocess.hpp"
#include "support/fixtures.hpp"

using namespace ecglens;

namespace {

LabeledDataset folds_dataset(std::size_t n) {
  LabeledDataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledRecord r;
    r.ecg_id = static_cast<int>(i + 1);
    r.strat_fold = static_cast<int>(i % 10) + 1;
    r.label = superclass_from_index(static_cast<int>(i % 5));
    r.signal = fixtures::random_signal(i, 1.0 + static_cast<double>(i % 3));
    ds.records.push_back(r);
  }
  return ds;
}

}  // namespace

TEST_CASE("split_by_fold partitions by fold") {
  const auto ds = folds_dataset(10);
  const auto s = split_by_fold(ds, SplitSpec{});
  CHECK(s.train.size() == 8);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 1);
  CHECK(s.val.records[0].strat_fold == 9);
  CHECK(s.test.records[0].strat_fold == 10);

  const auto big = folds_dataset(237);
  const auto p = split_by_fold(big, SplitSpec{});
  CHECK(p.train.size() + p.val.size() + p.test.size() == big.size());
  std::set<int> ids;
  for (const auto* part : {&p.train, &p.val, &p.test}) {
    int last = 0;
    for (const auto& r : part->records) {
      CHECK(ids.insert(r.ecg_id).second);
      CHECK(r.ecg_id > last);  // order preserved
      last = r.ecg_id;
    }
  }
  const auto e = split_by_fold(LabeledDataset{}, SplitSpec{});
  CHECK(e.train.empty());
  CHECK(e.val.empty());
  CHECK(e.test.empty());
}

TEST_CASE("split specs must partition folds 1-10") {
  SplitSpec overlap;
  overlap.val_fold = 8;
  CHECK_THROWS_AS(validate_split(overlap), Error);
  SplitSpec gap;
  gap.train_folds = {1, 2, 3, 4, 5, 6, 7};
  CHECK_THROWS_AS(validate_split(gap), Error);
  SplitSpec out_of_range;
  out_of_range.train_folds = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  CHECK_THROWS_AS(validate_split(out_of_range), Error);
  SplitSpec custom;
  custom.train_folds = {3, 4, 5, 6, 7, 8, 9, 10};
  custom.val_fold = 1;
  custom.test_fold = 2;
  CHECK_NOTHROW(validate_split(custom));
  auto ds = folds_dataset(10);
  ds.records[0].strat_fold = 11;
  CHECK_THROWS_AS(split_by_fold(ds, SplitSpec{}), Error);
}

TEST_CASE("normalizer statistics") {
  SUBCASE("constant lead is clamped") {
    LabeledDataset ds;
    LabeledRecord r;
    for (std::size_t t = 0; t < kSamples; ++t) r.signal.at(t, 0) = 2.0;
    ds.records.push_back(r);
    const auto s = fit_normalizer(ds);
    CHECK(s.mean[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(s.std[0] == kStdFloor);
  }
  SUBCASE("symmetric +-1 lead") {
    LabeledDataset ds;
    LabeledRecord r;
    for (std::size_t t = 0; t < kSamples; ++t) r.signal.at(t, 4) = t % 2 ? 1.0 : -1.0;
    ds.records.push_back(r);
    const auto s = fit_normalizer(ds);
    CHECK(std::abs(s.mean[4]) < 1e-15);
    CHECK(s.std[4] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("standard normal samples") {
    LabeledDataset ds;
    LabeledRecord r;
    r.signal = fixtures::random_signal(77);
    ds.records.push_back(r);
    const auto s = fit_normalizer(ds);
    for (std::size_t l = 0; l < kLeads; ++l) {
      CHECK(std::abs(s.mean[l]) < 0.1);
      CHECK(std::abs(s.std[l] - 1.0) < 0.1);
    }
    // 12,000 draws pooled across leads: mean within 0.05 of 0, std within 0.05 of 1.
    double sum = 0.0, sq = 0.0;
    for (double v : r.signal.samples) sum += v, sq += v * v;
    const double m = sum / kSignalValues;
    CHECK(std::abs(m) < 0.05);
    CHECK(std::abs(std::sqrt(sq / kSignalValues - m * m) - 1.0) < 0.05);
  }
  CHECK_THROWS_AS(fit_normalizer(LabeledDataset{}), Error);
}

TEST_CASE("normalize is a per-lead z-score and inverts") {
  const auto ds = folds_dataset(20);
  const auto stats = fit_normalizer(ds);
  const auto n = normalize(ds, stats);
  for (std::size_t l = 0; l < kLeads; ++l) {
    double sum = 0.0, sq = 0.0;
    for (const auto& r : n.records)
      for (std::size_t t = 0; t < kSamples; ++t) sum += r.signal.at(t, l), sq += r.signal.at(t, l) * r.signal.at(t, l);
    const double count = static_cast<double>(kSamples * n.size());
    CHECK(std::abs(sum / count) < 1e-6);
    CHECK(std::abs(sq / count - 1.0) < 1e-6);
  }
  const auto& src = ds.records[3].signal;
  const auto back = denormalize(normalize(src, stats), stats);
  for (std::size_t i = 0; i < kSignalValues; ++i) REQUIRE(std::abs(back.samples[i] - src.samples[i]) < 1e-6);

  NormStats identity;
  identity.std.fill(1.0);
  CHECK(normalize(src, identity) == src);
  CHECK(n.records[5].label == ds.records[5].label);
  CHECK(n.records[5].ecg_id == ds.records[5].ecg_id);
}

TEST_CASE("one-hot vectors are the standard basis") {
  CHECK(one_hot(Superclass::STTC) == std::array<double, 5>{0, 0, 1, 0, 0});
  CHECK(one_hot(Superclass::NORM) == std::array<double, 5>{1, 0, 0, 0, 0});
  for (auto c : kAllSuperclasses) {
    const auto v = one_hot(c);
    double sum = 0.0;
    for (double x : v) sum += x;
    CHECK(sum == 1.0);
    CHECK(v[static_cast<std::size_t>(class_index(c))] == 1.0);
  }
}

TEST_CASE("flatten is time-major") {
  EcgSignal s;
  s.at(0, 0) = 7.0;
  s.at(1, 0) = 9.0;
  s.at(2, 5) = 4.0;
  const auto flat = flatten(s);
  REQUIRE(flat.size() == 12000);
  CHECK(flat[0] == 7.0);
  CHECK(flat[12] == 9.0);
  CHECK(flat[29] == 4.0);
  const auto r = fixtures::random_signal(3);
  CHECK(unflatten(flatten(r)) == r);
  CHECK_THROWS_AS(unflatten(std::vector<double>(11999)), Error);
}
