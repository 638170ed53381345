#include <doctest.h>

#include <set>

#include "ecglens/common.hpp"
#include "ecglens/csv.hpp"
#include "ecglens/dataset_io.hpp"
#include "ecglens/synthetic.hpp"
#include "support/fixtures.hpp"

using namespace ecglens;

TEST_CASE("error codes have stable machine names") {
  CHECK(error_code_name(ErrorCode::Usage) == "E_USAGE");
  CHECK(error_code_name(ErrorCode::Config) == "E_CONFIG");
  CHECK(error_code_name(ErrorCode::Io) == "E_IO");
  CHECK(error_code_name(ErrorCode::Format) == "E_FORMAT");
  CHECK(error_code_name(ErrorCode::Data) == "E_DATA");
  CHECK(error_code_name(ErrorCode::Training) == "E_TRAINING");
}

TEST_CASE("derived seeds depend on every tag and their order") {
  const auto a = derive_seed(1, {2, 3});
  CHECK(a == derive_seed(1, {2, 3}));
  CHECK(a != derive_seed(1, {3, 2}));
  CHECK(a != derive_seed(2, {2, 3}));
  CHECK(a != derive_seed(1, {2}));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(7, {i}));
  CHECK(seen.size() == 1000);
}

TEST_CASE("fnv1a64 matches the published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("csv parsing handles quotes, embedded separators and blank lines") {
  const auto rows = csv::parse("a,b,c\n1,\"x, y\",\"say \"\"hi\"\"\"\n\n2,\"multi\nline\",\r\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == csv::Row{"a", "b", "c"});
  CHECK(rows[1] == csv::Row{"1", "x, y", "say \"hi\""});
  CHECK(rows[2] == csv::Row{"2", "multi\nline", ""});
  CHECK(csv::parse("").empty());
  CHECK(csv::escape("plain") == "plain");
  CHECK(csv::escape("a,b") == "\"a,b\"");
  CHECK(csv::escape("q\"") == "\"q\"\"\"");
  CHECK(csv::parse(csv::join({"a,b", "c\"d", "e"}))[0] == csv::Row{"a,b", "c\"d", "e"});
}

TEST_CASE("dataset files roundtrip and reject damage") {
  fixtures::TempDir dir("dsio");
  LabeledDataset ds;
  for (int i = 0; i < 3; ++i) {
    LabeledRecord r;
    r.ecg_id = 10 + i;
    r.label = superclass_from_index(i);
    r.strat_fold = i + 1;
    r.signal = fixtures::random_signal(static_cast<std::uint64_t>(i));
    ds.records.push_back(r);
  }
  const auto path = dir / "x.ecgds";
  save_dataset(ds, path);
  CHECK(load_dataset(path).records == ds.records);

  auto bytes = fixtures::read_bytes(path);
  bytes.resize(bytes.size() - 9);
  fixtures::write_file(dir / "cut.ecgds", std::string(bytes.begin(), bytes.end()));
  CHECK_THROWS_AS(load_dataset(dir / "cut.ecgds"), Error);
  fixtures::write_file(dir / "bad.ecgds", "NOPE");
  try {
    load_dataset(dir / "bad.ecgds");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Format);
  }
  CHECK_THROWS_AS(load_dataset(dir / "missing.ecgds"), Error);
}

TEST_CASE("portable records roundtrip exactly") {
  fixtures::TempDir dir("portable");
  LabeledRecord r;
  r.ecg_id = 42;
  r.label = Superclass::HYP;
  r.strat_fold = 7;
  r.signal = fixtures::random_signal(5);
  write_portable_record(r, dir / "rec42");
  CHECK(read_portable_record(dir / "rec42") == r);

  fixtures::write_file(dir / "rec42.label", "42,XYZ,7\n");
  CHECK_THROWS_AS(read_portable_record(dir / "rec42"), Error);
}

TEST_CASE("synthetic generator is deterministic, balanced and fold-assigned") {
  SyntheticSpec spec;
  spec.train = 40;
  spec.val = 10;
  spec.test = 15;
  spec.seed = 9;
  const auto a = generate_synthetic(spec);
  CHECK(a.records == generate_synthetic(spec).records);
  REQUIRE(a.size() == 65);
  std::size_t train = 0, val = 0, test = 0;
  for (const auto& r : a.records) {
    validate_signal(r.signal);
    if (r.strat_fold <= 8) ++train;
    if (r.strat_fold == 9) ++val;
    if (r.strat_fold == 10) ++test;
  }
  CHECK(train == 40);
  CHECK(val == 10);
  CHECK(test == 15);
  for (auto n : a.class_counts()) CHECK(n == 13);
  spec.seed = 10;
  CHECK(generate_synthetic(spec).records != a.records);
  spec.train = 0;
  CHECK_THROWS_AS(generate_synthetic(spec), Error);
}
