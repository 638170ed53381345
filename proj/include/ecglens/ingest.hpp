#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ecglens {

inline constexpr std::size_t kSamples = 1000;
inline constexpr std::size_t kLeads = 12;
inline constexpr std::size_t kSignalValues = kSamples * kLeads;
inline constexpr std::size_t kNumClasses = 5;

// Codes follow the notation column of the PTB-XL superclass table.
enum class Superclass : int { NORM = 0, MI = 1, STTC = 2, CD = 3, HYP = 4 };

inline constexpr std::array<Superclass, kNumClasses> kAllSuperclasses = {
    Superclass::NORM, Superclass::MI, Superclass::STTC, Superclass::CD, Superclass::HYP};

std::string_view superclass_name(Superclass c);
std::optional<Superclass> parse_superclass(std::string_view name);
inline int class_index(Superclass c) { return static_cast<int>(c); }
Superclass superclass_from_index(int index);

const std::array<std::string, kLeads>& standard_lead_names();

/// One 10 s, 100 Hz, 12-lead recording in millivolts, stored time-major:
/// value(t, lead) lives at samples[t * 12 + lead].
struct EcgSignal {
  std::vector<double> samples = std::vector<double>(kSignalValues, 0.0);

  double& at(std::size_t t, std::size_t lead) { return samples[t * kLeads + lead]; }
  double at(std::size_t t, std::size_t lead) const { return samples[t * kLeads + lead]; }

  bool operator==(const EcgSignal&) const = default;
};

/// Throws Error(Data) unless the signal is 1000x12 and finite.
void validate_signal(const EcgSignal& signal);

struct RecordMeta {
  int ecg_id = 0;
  int patient_id = 0;
  std::map<std::string, double> scp_codes;
  int strat_fold = 1;
  int sampling_rate = 100;
  std::string waveform_path;

  bool operator==(const RecordMeta&) const = default;
};

/// statement code -> superclass, or nullopt for non-diagnostic statements.
using StatementMap = std::map<std::string, std::optional<Superclass>>;

struct LabeledRecord {
  int ecg_id = 0;
  EcgSignal signal;
  Superclass label = Superclass::NORM;
  int strat_fold = 1;

  bool operator==(const LabeledRecord&) const = default;
};

struct LabeledDataset {
  std::vector<LabeledRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  std::array<std::size_t, kNumClasses> class_counts() const;
};

/// Parses a Python-dict style scp_codes field such as
/// "{'NORM': 100.0, 'SR': 0.0}". Keys may use single or double quotes and
/// likelihoods may be integers or reals.
std::map<std::string, double> parse_scp_codes(std::string_view text);
std::string format_scp_codes(const std::map<std::string, double>& codes);

/// Reads a PTB-XL style metadata CSV (ptbxl_database.csv). Required columns:
/// ecg_id, patient_id, scp_codes, strat_fold and filename_lr (or
/// waveform_path). An optional sampling_rate column overrides the 100 Hz
/// default.
std::vector<RecordMeta> parse_metadata(const std::filesystem::path& csv_path);

/// Writes the subset of columns parse_metadata consumes.
void write_metadata(const std::vector<RecordMeta>& records, const std::filesystem::path& csv_path);

/// Reads a PTB-XL style scp_statements.csv. The statement code is the
/// first column (unnamed in the upstream file, or named "code").
StatementMap parse_statement_map(const std::filesystem::path& csv_path);

struct WfdbSignalSpec {
  std::string file_name;
  int format = 16;
  double gain = 200.0;
  int baseline = 0;
  std::string units = "mV";
  std::string description;
};

struct WfdbHeader {
  std::string record_name;
  int num_signals = 0;
  double sampling_frequency = 0.0;
  long num_samples = 0;
  std::vector<WfdbSignalSpec> signals;
};

WfdbHeader parse_wfdb_header(const std::filesystem::path& header_path);

/// Reads a format-16 WFDB record with 12 signals and 1000 samples per
/// signal. physical = (raw - baseline) / gain.
EcgSignal read_wfdb_record(const std::filesystem::path& header_path,
                           const std::filesystem::path& data_path);

/// Same, given the record base path without extension; the data file is
/// the one named by the header, resolved next to it.
EcgSignal read_wfdb_record(const std::filesystem::path& record_base);

/// Set of superclasses over every diagnostic statement present in the
/// record, whatever its likelihood.
std::set<Superclass> superclass_set(const RecordMeta& meta, const StatementMap& statements);

/// The record's superclass iff its diagnostic statements map to exactly one.
std::optional<Superclass> assign_superclass(const RecordMeta& meta, const StatementMap& statements);

struct ClassCensus {
  /// Records whose superclass set contains the class (a record may count
  /// toward several classes).
  std::array<std::size_t, kNumClasses> multi_label{};
  /// Records retained by the single-label filter.
  std::array<std::size_t, kNumClasses> single_label{};
  std::size_t total_records = 0;
  std::size_t unlabeled = 0;
  std::size_t multi_label_records = 0;
};

ClassCensus count_classes(const std::vector<RecordMeta>& metas, const StatementMap& statements);

/// Loads every single-label record below data_root, ordered by ascending
/// ecg_id.
LabeledDataset build_dataset(const std::vector<RecordMeta>& metas, const StatementMap& statements,
                             const std::filesystem::path& data_root);

}  // namespace ecglens
