#include <doctest.h>

#include <algorithm>

#include "ecglens/common.hpp"
#include "ecglens/ingest.hpp"
#include "support/fixtures.hpp"

using namespace ecglens;

namespace {

// Rows copied from the upstream scp_statements.csv layout (first column
// unnamed, trailing columns trimmed).
const char* kStatements =
    ",description,diagnostic,form,rhythm,diagnostic_class,diagnostic_subclass\n"
    "NDT,non-diagnostic T abnormalities,1.0,1.0,,STTC,STTC\n"
    "NORM,normal ECG,1.0,,,NORM,NORM\n"
    "IMI,inferior myocardial infarction,1.0,,,MI,IMI\n"
    "ASMI,anteroseptal myocardial infarction,1.0,,,MI,AMI\n"
    "LVH,left ventricular hypertrophy,1.0,,,HYP,LVH\n"
    "CLBBB,complete left bundle branch block,1.0,,,CD,CLBBB\n"
    "SR,sinus rhythm,,,1.0,,\n"
    "PVC,ventricular premature complex,,,1.0,,\n";

StatementMap statements(const fixtures::TempDir& dir) {
  fixtures::write_file(dir / "scp_statements.csv", kStatements);
  return parse_statement_map(dir / "scp_statements.csv");
}

RecordMeta meta(int id, std::map<std::string, double> codes, int fold = 1) {
  RecordMeta m;
  m.ecg_id = id;
  m.patient_id = 100 + id;
  m.scp_codes = std::move(codes);
  m.strat_fold = fold;
  m.waveform_path = "records100/00000/" + std::to_string(id) + "_lr";
  return m;
}

}  // namespace

TEST_CASE("superclass codes are bijective with names") {
  for (int i = 0; i < 5; ++i) {
    const auto c = superclass_from_index(i);
    CHECK(class_index(c) == i);
    CHECK(parse_superclass(superclass_name(c)) == c);
  }
  CHECK(superclass_name(Superclass::STTC) == "STTC");
  CHECK_FALSE(parse_superclass("HY").has_value());
  CHECK_THROWS_AS(superclass_from_index(5), Error);
  CHECK(standard_lead_names()[0] == "I");
  CHECK(standard_lead_names()[11] == "V6");
}

TEST_CASE("scp_codes text parsing") {
  const auto codes = parse_scp_codes("{'NORM': 100.0, 'SR': 0.0}");
  CHECK(codes == std::map<std::string, double>{{"NORM", 100.0}, {"SR", 0.0}});
  CHECK(parse_scp_codes("{\"IMI\": 35, \"LVH\": 50.5}") == std::map<std::string, double>{{"IMI", 35}, {"LVH", 50.5}});
  CHECK(parse_scp_codes("{}").empty());
  CHECK_THROWS_AS(parse_scp_codes("{'NORM' 100}"), Error);
  CHECK_THROWS_AS(parse_scp_codes("NORM"), Error);
  CHECK_THROWS_AS(parse_scp_codes("{'NORM': 120.0}"), Error);
  CHECK(parse_scp_codes(format_scp_codes(codes)) == codes);
}

TEST_CASE("metadata parsing") {
  fixtures::TempDir dir("meta");
  fixtures::write_file(dir / "m.csv",
                       "ecg_id,patient_id,age,scp_codes,strat_fold,filename_lr\n"
                       "1,15709,56,\"{'NORM': 100.0, 'SR': 0.0}\",3,records100/00000/00001_lr\n"
                       "2,13243,19,\"{'IMI': 35.0}\",10,records100/00000/00002_lr\n");
  const auto metas = parse_metadata(dir / "m.csv");
  REQUIRE(metas.size() == 2);
  CHECK(metas[0].ecg_id == 1);
  CHECK(metas[0].patient_id == 15709);
  CHECK(metas[0].scp_codes == std::map<std::string, double>{{"NORM", 100.0}, {"SR", 0.0}});
  CHECK(metas[0].strat_fold == 3);
  CHECK(metas[0].sampling_rate == 100);
  CHECK(metas[1].waveform_path == "records100/00000/00002_lr");

  SUBCASE("header only gives an empty list") {
    fixtures::write_file(dir / "e.csv", "ecg_id,patient_id,scp_codes,strat_fold,filename_lr\n");
    CHECK(parse_metadata(dir / "e.csv").empty());
  }
  SUBCASE("serialize then parse is a fixed point") {
    write_metadata(metas, dir / "w.csv");
    const auto again = parse_metadata(dir / "w.csv");
    CHECK(again == metas);
    write_metadata(again, dir / "w2.csv");
    CHECK(fixtures::read_bytes(dir / "w.csv") == fixtures::read_bytes(dir / "w2.csv"));
  }
  SUBCASE("errors carry the row number") {
    fixtures::write_file(dir / "bad.csv",
                         "ecg_id,patient_id,scp_codes,strat_fold,filename_lr\n"
                         "1,5,\"{'NORM': 100.0}\",3,a\n"
                         "2,6,\"{'NORM': 100.0}\",11,b\n");
    try {
      parse_metadata(dir / "bad.csv");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("row 3") != std::string::npos);
      CHECK(std::string(e.what()).find("strat_fold") != std::string::npos);
    }
    fixtures::write_file(dir / "bad2.csv",
                         "ecg_id,patient_id,scp_codes,strat_fold,filename_lr\n"
                         "1,5,\"{'NORM' 100.0}\",3,a\n");
    try {
      parse_metadata(dir / "bad2.csv");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_metadata(dir / "missing.csv"), Error);
  }
}

TEST_CASE("statement map from upstream-style rows") {
  fixtures::TempDir dir("stmt");
  const auto map = statements(dir);
  CHECK(map.at("IMI") == Superclass::MI);
  CHECK(map.at("NDT") == Superclass::STTC);
  CHECK(map.at("LVH") == Superclass::HYP);
  CHECK(map.at("CLBBB") == Superclass::CD);
  CHECK_FALSE(map.at("SR").has_value());
  CHECK_FALSE(map.at("PVC").has_value());

  fixtures::write_file(dir / "empty.csv", "");
  CHECK(parse_statement_map(dir / "empty.csv").empty());

  fixtures::write_file(dir / "bad.csv", ",diagnostic,diagnostic_class\nXYZ,1.0,FOO\n");
  try {
    parse_statement_map(dir / "bad.csv");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("XYZ") != std::string::npos);
  }
}

TEST_CASE("superclass assignment keeps single-label records only") {
  fixtures::TempDir dir("assign");
  const auto map = statements(dir);
  CHECK(assign_superclass(meta(1, {{"NORM", 100.0}, {"SR", 0.0}}), map) == Superclass::NORM);
  CHECK_FALSE(assign_superclass(meta(2, {{"IMI", 50.0}, {"NORM", 100.0}}), map).has_value());
  CHECK_FALSE(assign_superclass(meta(3, {{"SR", 0.0}, {"PVC", 100.0}}), map).has_value());
  // Zero likelihood still counts toward the superclass set.
  CHECK_FALSE(assign_superclass(meta(4, {{"IMI", 0.0}, {"LVH", 100.0}}), map).has_value());
  CHECK(assign_superclass(meta(5, {{"IMI", 15.0}, {"ASMI", 100.0}}), map) == Superclass::MI);
  // Codes absent from the statement file are ignored.
  CHECK(assign_superclass(meta(6, {{"LVH", 100.0}, {"???", 10.0}}), map) == Superclass::HYP);

  const std::vector<RecordMeta> metas = {meta(1, {{"NORM", 100.0}}), meta(2, {{"IMI", 50.0}, {"NORM", 100.0}}),
                                         meta(3, {{"SR", 0.0}}), meta(4, {{"LVH", 100.0}})};
  const auto census = count_classes(metas, map);
  CHECK(census.total_records == 4);
  CHECK(census.unlabeled == 1);
  CHECK(census.multi_label_records == 1);
  CHECK(census.single_label == std::array<std::size_t, 5>{1, 0, 0, 0, 1});
  CHECK(census.multi_label == std::array<std::size_t, 5>{2, 1, 0, 0, 1});
}

TEST_CASE("WFDB format 16 reading") {
  fixtures::TempDir dir("wfdb");
  SUBCASE("gain and baseline") {
    EcgSignal s;
    s.at(0, 0) = 0.0;
    s.at(1, 0) = 1.0;
    s.at(2, 3) = -0.25;
    fixtures::write_wfdb(dir / "r", s, 1000.0, 0);
    const auto back = read_wfdb_record(dir / "r");
    CHECK(back.at(0, 0) == 0.0);
    CHECK(back.at(1, 0) == 1.0);
    CHECK(back.at(2, 3) == -0.25);
  }
  SUBCASE("writer roundtrip is exact for many gain/baseline pairs") {
    const std::pair<double, int> cases[] = {{1000.0, 0}, {200.0, -17}, {500.0, 1024}, {1000.0, -300}};
    int k = 0;
    for (const auto& [gain, baseline] : cases) {
      EcgSignal s = fixtures::quantized_signal(static_cast<std::uint64_t>(k));
      for (auto& v : s.samples) v = std::round(v * gain) / gain;
      const auto base = dir / ("g" + std::to_string(k++));
      fixtures::write_wfdb(base, s, gain, baseline);
      const auto back = read_wfdb_record(base.string() + ".hea", base.string() + ".dat");
      double worst = 0.0;
      for (std::size_t i = 0; i < kSignalValues; ++i) worst = std::max(worst, std::abs(back.samples[i] - s.samples[i]));
      CHECK(worst < 1e-12);
    }
  }
  SUBCASE("header details") {
    fixtures::write_wfdb(dir / "h", EcgSignal{}, 1000.0, 5);
    const auto h = parse_wfdb_header(dir / "h.hea");
    CHECK(h.record_name == "h");
    CHECK(h.num_signals == 12);
    CHECK(h.sampling_frequency == 100.0);
    CHECK(h.num_samples == 1000);
    REQUIRE(h.signals.size() == 12);
    CHECK(h.signals[0].gain == 1000.0);
    CHECK(h.signals[0].baseline == 5);
    CHECK(h.signals[0].format == 16);
    CHECK(h.signals[11].description == "V6");
  }
  SUBCASE("structural errors") {
    fixtures::write_wfdb(dir / "n11", EcgSignal{}, 1000.0, 0, 1000, 11);
    CHECK_THROWS_AS(read_wfdb_record(dir / "n11"), Error);
    fixtures::write_wfdb(dir / "short", EcgSignal{}, 1000.0, 0, 999, 12);
    CHECK_THROWS_AS(read_wfdb_record(dir / "short"), Error);

    fixtures::write_wfdb(dir / "cut", EcgSignal{});
    std::filesystem::resize_file(dir / "cut.dat", 1000 * 12 * 2 - 2);
    try {
      read_wfdb_record(dir / "cut");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Format);
    }

    fixtures::write_wfdb(dir / "f212", EcgSignal{});
    std::string hea;
    {
      std::ifstream in(dir / "f212.hea");
      hea.assign(std::istreambuf_iterator<char>(in), {});
    }
    for (std::size_t p; (p = hea.find(".dat 16 ")) != std::string::npos;) hea.replace(p, 8, ".dat 212 ");
    fixtures::write_file(dir / "f212.hea", hea);
    CHECK_THROWS_AS(read_wfdb_record(dir / "f212"), Error);

    fixtures::write_file(dir / "g0.hea", "g0 12 100 1000\n");
    std::string lines;
    for (int l = 0; l < 12; ++l) lines += "g0.dat 16 0/mV 16 0 0 0 0 I\n";
    fixtures::write_file(dir / "g0.hea", "g0 12 100 1000\n" + lines);
    CHECK_THROWS_AS(parse_wfdb_header(dir / "g0.hea"), Error);
  }
}

TEST_CASE("build_dataset keeps exactly the single-label records") {
  fixtures::TempDir dir("build");
  const auto map = statements(dir);
  std::vector<RecordMeta> metas = {meta(3, {{"LVH", 100.0}}, 2), meta(1, {{"NORM", 100.0}, {"SR", 0.0}}, 9),
                                   meta(2, {{"IMI", 50.0}, {"NORM", 100.0}}, 10)};
  const auto s1 = fixtures::quantized_signal(1);
  const auto s3 = fixtures::quantized_signal(3);
  fixtures::write_wfdb(dir.path() / metas[0].waveform_path, s3);
  fixtures::write_wfdb(dir.path() / metas[1].waveform_path, s1);
  // Record 2 is multi-label: no waveform needed.
  const auto ds = build_dataset(metas, map, dir.path());
  REQUIRE(ds.size() == 2);
  CHECK(ds.records[0].ecg_id == 1);
  CHECK(ds.records[0].label == Superclass::NORM);
  CHECK(ds.records[0].strat_fold == 9);
  CHECK(ds.records[1].ecg_id == 3);
  CHECK(ds.records[1].label == Superclass::HYP);
  for (std::size_t i = 0; i < kSignalValues; ++i) {
    REQUIRE(std::abs(ds.records[0].signal.samples[i] - s1.samples[i]) < 1e-12);
  }
  CHECK(build_dataset({}, map, dir.path()).empty());

  metas.push_back(meta(7, {{"CLBBB", 100.0}}, 4));
  try {
    build_dataset(metas, map, dir.path());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("ecg_id 7") != std::string::npos);
  }
}
