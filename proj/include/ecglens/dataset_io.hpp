#pragma once

#include <filesystem>

#include "ecglens/ingest.hpp"

namespace ecglens {

/// Binary split file: "ECGD", u32 version, u64 count, then per record
/// i32 ecg_id, i32 label, i32 fold and 12000 little-endian f64 samples.
void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

/// Portable record: <base>.csv with a header of the 12 lead names and 1000
/// rows in millivolts, plus <base>.label holding "ecg_id,SUPERCLASS,fold".
void write_portable_record(const LabeledRecord& record, const std::filesystem::path& base);
LabeledRecord read_portable_record(const std::filesystem::path& base);

}  // namespace ecglens
