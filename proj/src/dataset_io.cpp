#include "ecglens/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ecglens/common.hpp"
#include "ecglens/csv.hpp"

namespace ecglens {

namespace {

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");

constexpr char kMagic[4] = {'E', 'C', 'G', 'D'};
constexpr std::uint32_t kVersion = 1;

template <typename V>
void put(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& in, const std::filesystem::path& path) {
  V v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(V)))
    throw Error(ErrorCode::Format, path.string() + ": truncated dataset file");
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, dataset.size());
  for (const auto& r : dataset.records) {
    put<std::int32_t>(out, r.ecg_id);
    put<std::int32_t>(out, class_index(r.label));
    put<std::int32_t>(out, r.strat_fold);
    out.write(reinterpret_cast<const char*>(r.signal.samples.data()),
              static_cast<std::streamsize>(kSignalValues * sizeof(double)));
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open dataset " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw Error(ErrorCode::Format, path.string() + ": not a dataset file");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion)
    throw Error(ErrorCode::Format, path.string() + ": unsupported dataset version " + std::to_string(version));
  const auto count = get<std::uint64_t>(in, path);
  const auto file_size = std::filesystem::file_size(path);
  if (count > file_size / (kSignalValues * sizeof(double)))
    throw Error(ErrorCode::Format, path.string() + ": record count exceeds file size");
  LabeledDataset out;
  out.records.resize(static_cast<std::size_t>(count));
  for (auto& r : out.records) {
    r.ecg_id = get<std::int32_t>(in, path);
    const auto label = get<std::int32_t>(in, path);
    if (label < 0 || label >= static_cast<int>(kNumClasses))
      throw Error(ErrorCode::Format, path.string() + ": bad label " + std::to_string(label));
    r.label = superclass_from_index(label);
    r.strat_fold = get<std::int32_t>(in, path);
    if (!in.read(reinterpret_cast<char*>(r.signal.samples.data()),
                 static_cast<std::streamsize>(kSignalValues * sizeof(double))))
      throw Error(ErrorCode::Format, path.string() + ": truncated dataset file");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::Format, path.string() + ": trailing bytes");
  return out;
}

void write_portable_record(const LabeledRecord& record, const std::filesystem::path& base) {
  if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());
  std::ofstream csv(base.string() + ".csv", std::ios::trunc);
  if (!csv) throw Error(ErrorCode::Io, "cannot write " + base.string() + ".csv");
  const auto& leads = standard_lead_names();
  csv << csv::join(std::vector<std::string>(leads.begin(), leads.end())) << '\n';
  for (std::size_t t = 0; t < kSamples; ++t) {
    for (std::size_t l = 0; l < kLeads; ++l) csv << (l ? "," : "") << format_double(record.signal.at(t, l));
    csv << '\n';
  }
  std::ofstream label(base.string() + ".label", std::ios::trunc);
  if (!label) throw Error(ErrorCode::Io, "cannot write " + base.string() + ".label");
  label << record.ecg_id << ',' << superclass_name(record.label) << ',' << record.strat_fold << '\n';
}

LabeledRecord read_portable_record(const std::filesystem::path& base) {
  const std::string csv_path = base.string() + ".csv";
  const auto rows = csv::read_file(csv_path);
  if (rows.size() != kSamples + 1)
    throw Error(ErrorCode::Format, csv_path + ": expected a header and " + std::to_string(kSamples) + " rows, got " +
                                       std::to_string(rows.size()));
  const auto& leads = standard_lead_names();
  if (rows[0] != std::vector<std::string>(leads.begin(), leads.end()))
    throw Error(ErrorCode::Format, csv_path + ": header must list the 12 standard leads in order");
  LabeledRecord r;
  for (std::size_t t = 0; t < kSamples; ++t) {
    const auto& row = rows[t + 1];
    if (row.size() != kLeads)
      throw Error(ErrorCode::Format, csv_path + ": row " + std::to_string(t + 2) + " has " +
                                         std::to_string(row.size()) + " fields");
    for (std::size_t l = 0; l < kLeads; ++l) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(row[l], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != row[l].size())
        throw Error(ErrorCode::Format, csv_path + ": row " + std::to_string(t + 2) + " has non-numeric value '" +
                                           row[l] + "'");
      r.signal.at(t, l) = v;
    }
  }
  validate_signal(r.signal);

  const std::string label_path = base.string() + ".label";
  const auto label_rows = csv::read_file(label_path);
  if (label_rows.size() != 1 || label_rows[0].size() != 3)
    throw Error(ErrorCode::Format, label_path + ": expected one line 'ecg_id,SUPERCLASS,fold'");
  const auto& f = label_rows[0];
  const auto cls = parse_superclass(f[1]);
  if (!cls) throw Error(ErrorCode::Format, label_path + ": unknown superclass '" + f[1] + "'");
  try {
    r.ecg_id = std::stoi(f[0]);
    r.strat_fold = std::stoi(f[2]);
  } catch (const std::exception&) {
    throw Error(ErrorCode::Format, label_path + ": ecg_id and fold must be integers");
  }
  r.label = *cls;
  return r;
}

}  // namespace ecglens
