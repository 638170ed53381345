#include "ecglens/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ecglens/common.hpp"
#include "ecglens/csv.hpp"

namespace ecglens {

namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames = {"NORM", "MI", "STTC", "CD", "HYP"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

// Accepts "12" and "12.0" (pandas writes integer columns with missing values
// as floats).
std::optional<long> to_integer(std::string_view s) {
  auto value = to_double(s);
  if (!value || !std::isfinite(*value) || std::floor(*value) != *value) return std::nullopt;
  return static_cast<long>(*value);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string out(buf, ptr);
  if (out.find_first_of(".eEn") == std::string::npos) out += ".0";
  return out;
}

std::size_t column_index(const csv::Row& header, std::initializer_list<std::string_view> names,
                         const std::filesystem::path& path) {
  for (std::string_view name : names) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
  }
  throw Error(ErrorCode::Format,
              path.string() + ": missing required column '" + std::string(*names.begin()) + "'");
}

std::optional<std::size_t> optional_column(const csv::Row& header, std::string_view name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

std::string_view superclass_name(Superclass c) { return kClassNames.at(static_cast<std::size_t>(c)); }

std::optional<Superclass> parse_superclass(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kClassNames[i] == name) return static_cast<Superclass>(i);
  }
  return std::nullopt;
}

Superclass superclass_from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kNumClasses))
    throw Error(ErrorCode::Data, "class index out of range: " + std::to_string(index));
  return static_cast<Superclass>(index);
}

const std::array<std::string, kLeads>& standard_lead_names() {
  static const std::array<std::string, kLeads> names = {"I",  "II", "III", "AVR", "AVL", "AVF",
                                                        "V1", "V2", "V3",  "V4",  "V5",  "V6"};
  return names;
}

void validate_signal(const EcgSignal& signal) {
  if (signal.samples.size() != kSignalValues)
    throw Error(ErrorCode::Data, "signal must hold 1000x12 samples, got " +
                                     std::to_string(signal.samples.size()) + " values");
  for (std::size_t i = 0; i < signal.samples.size(); ++i) {
    if (!std::isfinite(signal.samples[i]))
      throw Error(ErrorCode::Data, "non-finite sample at t=" + std::to_string(i / kLeads) +
                                       " lead=" + std::to_string(i % kLeads));
  }
}

std::array<std::size_t, kNumClasses> LabeledDataset::class_counts() const {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& r : records) ++counts[static_cast<std::size_t>(r.label)];
  return counts;
}

std::map<std::string, double> parse_scp_codes(std::string_view text) {
  std::map<std::string, double> codes;
  std::size_t pos = 0;
  auto fail = [&](const std::string& why) -> void {
    throw Error(ErrorCode::Format, "scp_codes: " + why + " in '" + std::string(text) + "'");
  };
  auto skip_ws = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };

  skip_ws();
  if (pos >= text.size() || text[pos] != '{') fail("expected '{'");
  ++pos;
  skip_ws();
  if (pos < text.size() && text[pos] == '}') {
    ++pos;
  } else {
    while (true) {
      skip_ws();
      if (pos >= text.size() || (text[pos] != '\'' && text[pos] != '"')) fail("expected quoted key");
      const char quote = text[pos++];
      const std::size_t key_end = text.find(quote, pos);
      if (key_end == std::string_view::npos) fail("unterminated key");
      std::string key(text.substr(pos, key_end - pos));
      pos = key_end + 1;
      skip_ws();
      if (pos >= text.size() || text[pos] != ':') fail("expected ':' after key '" + key + "'");
      ++pos;
      skip_ws();
      const std::size_t value_end = text.find_first_of(",}", pos);
      if (value_end == std::string_view::npos) fail("unterminated mapping");
      auto value = to_double(text.substr(pos, value_end - pos));
      if (!value || !std::isfinite(*value)) fail("bad likelihood for '" + key + "'");
      if (*value < 0.0 || *value > 100.0) fail("likelihood outside [0,100] for '" + key + "'");
      if (!codes.emplace(std::move(key), *value).second) fail("duplicate key");
      pos = value_end;
      if (text[pos] == '}') {
        ++pos;
        break;
      }
      ++pos;
    }
  }
  skip_ws();
  if (pos != text.size()) fail("trailing characters");
  return codes;
}

std::string format_scp_codes(const std::map<std::string, double>& codes) {
  std::string out = "{";
  bool first = true;
  for (const auto& [code, likelihood] : codes) {
    if (!first) out += ", ";
    first = false;
    out += "'" + code + "': " + format_double(likelihood);
  }
  out += "}";
  return out;
}

std::vector<RecordMeta> parse_metadata(const std::filesystem::path& csv_path) {
  if (!std::filesystem::exists(csv_path))
    throw Error(ErrorCode::Io, "metadata file not found: " + csv_path.string());
  const auto rows = csv::read_file(csv_path);
  if (rows.empty()) throw Error(ErrorCode::Format, csv_path.string() + ": missing header row");

  const auto& header = rows.front();
  const std::size_t ecg_col = column_index(header, {"ecg_id"}, csv_path);
  const std::size_t patient_col = column_index(header, {"patient_id"}, csv_path);
  const std::size_t scp_col = column_index(header, {"scp_codes"}, csv_path);
  const std::size_t fold_col = column_index(header, {"strat_fold"}, csv_path);
  const std::size_t path_col = column_index(header, {"filename_lr", "waveform_path"}, csv_path);
  const auto rate_col = optional_column(header, "sampling_rate");

  std::vector<RecordMeta> out;
  out.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    // Row numbers in messages count the header as row 1.
    const std::string where = csv_path.string() + ": row " + std::to_string(r + 1);
    if (row.size() != header.size())
      throw Error(ErrorCode::Format, where + ": expected " + std::to_string(header.size()) +
                                         " fields, got " + std::to_string(row.size()));
    RecordMeta meta;
    auto ecg_id = to_integer(row[ecg_col]);
    auto patient = to_integer(row[patient_col]);
    auto fold = to_integer(row[fold_col]);
    if (!ecg_id || *ecg_id <= 0) throw Error(ErrorCode::Format, where + ": bad ecg_id '" + row[ecg_col] + "'");
    if (!patient || *patient <= 0)
      throw Error(ErrorCode::Format, where + ": bad patient_id '" + row[patient_col] + "'");
    if (!fold) throw Error(ErrorCode::Format, where + ": bad strat_fold '" + row[fold_col] + "'");
    if (*fold < 1 || *fold > 10)
      throw Error(ErrorCode::Format, where + ": strat_fold " + std::to_string(*fold) + " outside 1-10");
    meta.ecg_id = static_cast<int>(*ecg_id);
    meta.patient_id = static_cast<int>(*patient);
    meta.strat_fold = static_cast<int>(*fold);
    try {
      meta.scp_codes = parse_scp_codes(row[scp_col]);
    } catch (const Error& e) {
      throw Error(ErrorCode::Format, where + ": " + e.what());
    }
    if (rate_col) {
      auto rate = to_integer(row[*rate_col]);
      if (!rate || *rate <= 0)
        throw Error(ErrorCode::Format, where + ": bad sampling_rate '" + row[*rate_col] + "'");
      meta.sampling_rate = static_cast<int>(*rate);
    }
    meta.waveform_path = row[path_col];
    out.push_back(std::move(meta));
  }
  return out;
}

void write_metadata(const std::vector<RecordMeta>& records, const std::filesystem::path& csv_path) {
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + csv_path.string());
  out << "ecg_id,patient_id,scp_codes,strat_fold,sampling_rate,filename_lr\n";
  for (const auto& m : records) {
    out << csv::join({std::to_string(m.ecg_id), std::to_string(m.patient_id), format_scp_codes(m.scp_codes),
                      std::to_string(m.strat_fold), std::to_string(m.sampling_rate), m.waveform_path})
        << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed: " + csv_path.string());
}

StatementMap parse_statement_map(const std::filesystem::path& csv_path) {
  if (!std::filesystem::exists(csv_path))
    throw Error(ErrorCode::Io, "statement file not found: " + csv_path.string());
  const auto rows = csv::read_file(csv_path);
  StatementMap map;
  if (rows.empty()) return map;

  const auto& header = rows.front();
  std::size_t code_col = 0;
  if (auto named = optional_column(header, "code")) code_col = *named;
  const std::size_t diag_col = column_index(header, {"diagnostic"}, csv_path);
  const std::size_t class_col = column_index(header, {"diagnostic_class"}, csv_path);

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size())
      throw Error(ErrorCode::Format, csv_path.string() + ": row " + std::to_string(r + 1) + ": expected " +
                                         std::to_string(header.size()) + " fields");
    const std::string code(trim(row[code_col]));
    if (code.empty())
      throw Error(ErrorCode::Format, csv_path.string() + ": row " + std::to_string(r + 1) + ": empty code");
    const auto flag = to_double(row[diag_col]);
    const bool diagnostic = flag && *flag != 0.0;
    if (!diagnostic) {
      map[code] = std::nullopt;
      continue;
    }
    const std::string_view cls = trim(row[class_col]);
    auto superclass = parse_superclass(cls);
    if (!superclass)
      throw Error(ErrorCode::Format, "statement '" + code + "': unknown diagnostic_class '" +
                                         std::string(cls) + "'");
    map[code] = *superclass;
  }
  return map;
}

WfdbHeader parse_wfdb_header(const std::filesystem::path& header_path) {
  std::ifstream in(header_path);
  if (!in) throw Error(ErrorCode::Io, "cannot open WFDB header " + header_path.string());
  const std::string where = header_path.string();

  WfdbHeader header;
  bool have_record_line = false;
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    std::istringstream tokens{std::string(view)};
    std::vector<std::string> fields;
    for (std::string f; tokens >> f;) fields.push_back(f);

    if (!have_record_line) {
      if (fields.size() < 4)
        throw Error(ErrorCode::Format, where + ": record line needs name, signal count, frequency and length");
      header.record_name = fields[0];
      auto nsig = to_integer(fields[1]);
      // The frequency field may carry "/counter(base)" suffixes.
      auto fs = to_double(fields[2].substr(0, fields[2].find_first_of("/(")));
      auto nsamp = to_integer(fields[3]);
      if (!nsig || !fs || !nsamp) throw Error(ErrorCode::Format, where + ": malformed record line");
      header.num_signals = static_cast<int>(*nsig);
      header.sampling_frequency = *fs;
      header.num_samples = *nsamp;
      have_record_line = true;
      continue;
    }
    if (static_cast<int>(header.signals.size()) >= header.num_signals) break;
    if (fields.size() < 2) throw Error(ErrorCode::Format, where + ": malformed signal line");

    WfdbSignalSpec spec;
    spec.file_name = fields[0];
    auto format = to_integer(fields[1].substr(0, fields[1].find_first_of("x:+")));
    if (!format) throw Error(ErrorCode::Format, where + ": bad format field '" + fields[1] + "'");
    spec.format = static_cast<int>(*format);

    std::optional<int> explicit_baseline;
    if (fields.size() > 2) {
      // gain[(baseline)][/units]
      std::string g = fields[2];
      if (auto slash = g.find('/'); slash != std::string::npos) {
        spec.units = g.substr(slash + 1);
        g.resize(slash);
      }
      if (auto paren = g.find('('); paren != std::string::npos) {
        const auto close = g.find(')', paren);
        if (close == std::string::npos) throw Error(ErrorCode::Format, where + ": bad baseline in '" + fields[2] + "'");
        auto base = to_integer(std::string_view(g).substr(paren + 1, close - paren - 1));
        if (!base) throw Error(ErrorCode::Format, where + ": bad baseline in '" + fields[2] + "'");
        explicit_baseline = static_cast<int>(*base);
        g.resize(paren);
      }
      auto gain = to_double(g);
      if (!gain) throw Error(ErrorCode::Format, where + ": bad gain '" + fields[2] + "'");
      if (*gain == 0.0) throw Error(ErrorCode::Format, where + ": uncalibrated signal (gain 0)");
      spec.gain = *gain;
    }
    // Without an explicit baseline, WFDB uses the ADC zero (field 5).
    int adc_zero = 0;
    if (fields.size() > 4) {
      auto z = to_integer(fields[4]);
      if (!z) throw Error(ErrorCode::Format, where + ": bad ADC zero '" + fields[4] + "'");
      adc_zero = static_cast<int>(*z);
    }
    spec.baseline = explicit_baseline.value_or(adc_zero);
    if (fields.size() > 8) {
      std::string desc;
      for (std::size_t i = 8; i < fields.size(); ++i) desc += (i > 8 ? " " : "") + fields[i];
      spec.description = desc;
    }
    header.signals.push_back(std::move(spec));
  }
  if (!have_record_line) throw Error(ErrorCode::Format, where + ": missing record line");
  if (static_cast<int>(header.signals.size()) != header.num_signals)
    throw Error(ErrorCode::Format, where + ": header declares " + std::to_string(header.num_signals) +
                                       " signals but describes " + std::to_string(header.signals.size()));
  return header;
}

EcgSignal read_wfdb_record(const std::filesystem::path& header_path, const std::filesystem::path& data_path) {
  const WfdbHeader header = parse_wfdb_header(header_path);
  const std::string where = header_path.string();
  if (header.num_signals != static_cast<int>(kLeads))
    throw Error(ErrorCode::Format, where + ": expected 12 signals, header declares " +
                                       std::to_string(header.num_signals));
  for (const auto& s : header.signals) {
    if (s.format != 16)
      throw Error(ErrorCode::Format, where + ": unsupported WFDB format " + std::to_string(s.format) +
                                         " (only format 16 is supported)");
  }
  if (header.num_samples != static_cast<long>(kSamples))
    throw Error(ErrorCode::Format, where + ": expected 1000 samples per signal, header declares " +
                                       std::to_string(header.num_samples));

  std::ifstream in(data_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open WFDB data " + data_path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t expected = kSignalValues * 2;
  if (bytes.size() != expected)
    throw Error(ErrorCode::Format, data_path.string() + ": sample count mismatch, expected " +
                                       std::to_string(expected) + " bytes, file has " +
                                       std::to_string(bytes.size()));

  EcgSignal signal;
  for (std::size_t i = 0; i < kSignalValues; ++i) {
    const auto raw = static_cast<std::int16_t>(static_cast<std::uint16_t>(bytes[2 * i]) |
                                               static_cast<std::uint16_t>(bytes[2 * i + 1]) << 8);
    const auto& spec = header.signals[i % kLeads];
    signal.samples[i] = (static_cast<double>(raw) - spec.baseline) / spec.gain;
  }
  return signal;
}

EcgSignal read_wfdb_record(const std::filesystem::path& record_base) {
  std::filesystem::path header_path = record_base;
  header_path += ".hea";
  const WfdbHeader header = parse_wfdb_header(header_path);
  if (header.signals.empty()) throw Error(ErrorCode::Format, header_path.string() + ": no signals");
  const std::string& file = header.signals.front().file_name;
  for (const auto& s : header.signals) {
    if (s.file_name != file)
      throw Error(ErrorCode::Format, header_path.string() + ": signals spread over several data files");
  }
  return read_wfdb_record(header_path, header_path.parent_path() / file);
}

std::set<Superclass> superclass_set(const RecordMeta& meta, const StatementMap& statements) {
  std::set<Superclass> classes;
  for (const auto& [code, likelihood] : meta.scp_codes) {
    (void)likelihood;
    auto it = statements.find(code);
    if (it != statements.end() && it->second) classes.insert(*it->second);
  }
  return classes;
}

std::optional<Superclass> assign_superclass(const RecordMeta& meta, const StatementMap& statements) {
  const auto classes = superclass_set(meta, statements);
  if (classes.size() != 1) return std::nullopt;
  return *classes.begin();
}

ClassCensus count_classes(const std::vector<RecordMeta>& metas, const StatementMap& statements) {
  ClassCensus census;
  census.total_records = metas.size();
  for (const auto& meta : metas) {
    const auto classes = superclass_set(meta, statements);
    for (Superclass c : classes) ++census.multi_label[static_cast<std::size_t>(c)];
    if (classes.empty()) {
      ++census.unlabeled;
    } else if (classes.size() == 1) {
      ++census.single_label[static_cast<std::size_t>(*classes.begin())];
    } else {
      ++census.multi_label_records;
    }
  }
  return census;
}

LabeledDataset build_dataset(const std::vector<RecordMeta>& metas, const StatementMap& statements,
                             const std::filesystem::path& data_root) {
  LabeledDataset dataset;
  for (const auto& meta : metas) {
    auto label = assign_superclass(meta, statements);
    if (!label) continue;
    LabeledRecord record;
    record.ecg_id = meta.ecg_id;
    record.label = *label;
    record.strat_fold = meta.strat_fold;
    try {
      record.signal = read_wfdb_record(data_root / meta.waveform_path);
      validate_signal(record.signal);
    } catch (const Error& e) {
      throw Error(e.code(), "ecg_id " + std::to_string(meta.ecg_id) + ": " + e.what());
    }
    dataset.records.push_back(std::move(record));
  }
  std::stable_sort(dataset.records.begin(), dataset.records.end(),
                   [](const LabeledRecord& a, const LabeledRecord& b) { return a.ecg_id < b.ecg_id; });
  return dataset;
}

}  // namespace ecglens
