#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecglens/ingest.hpp"

namespace ecglens::metrics {

/// counts[i][j]: true class i predicted as class j.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

  std::uint64_t total() const;
  std::uint64_t row_total(std::size_t i) const;
  std::uint64_t col_total(std::size_t j) const;
  std::uint64_t tp(std::size_t c) const { return counts[c][c]; }
  std::uint64_t fn(std::size_t c) const { return row_total(c) - counts[c][c]; }
  std::uint64_t fp(std::size_t c) const { return col_total(c) - counts[c][c]; }
  std::uint64_t tn(std::size_t c) const { return total() - tp(c) - fp(c) - fn(c); }

  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred);

/// trace / total; 0 for an empty matrix.
double accuracy(const ConfusionMatrix& cm);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when the corresponding denominator was zero and the value defaulted to 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

struct PrfResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::array<ClassScores, kNumClasses> per_class{};
};

/// Macro averaging over the five classes.
PrfResult precision_recall_f1(const ConfusionMatrix& cm);

struct AucResult {
  double macro = 0.0;
  std::array<double, kNumClasses> per_class{};
  std::vector<int> skipped_classes;  // no positives or no negatives
};

/// Binary AUC by average ranks (ties count one half).
double binary_auc(std::span<const double> scores, std::span<const bool> positive);

/// One-vs-rest macro ROC-AUC. `scores` is row-major N x 5.
AucResult roc_auc(std::span<const int> y_true, std::span<const double> scores);

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double roc_auc = 0.0;
  std::string averaging = "macro";
  std::array<ClassScores, kNumClasses> per_class{};
  std::array<double, kNumClasses> per_class_auc{};
  std::vector<int> auc_skipped_classes;
  ConfusionMatrix confusion;
  std::uint64_t samples = 0;
};

MetricsReport evaluate(std::span<const int> y_true, std::span<const double> scores);

/// argmax with lowest-index tie-break.
int argmax(std::span<const double> row);

enum class DocFormat { Text, Csv, Markdown };

/// "count pct%" with pct = count / grand total, two decimals, half-up.
std::string format_cell(std::uint64_t count, std::uint64_t total);

/// Rows are true classes, columns predicted classes, totals in the margins.
std::string render_confusion(const ConfusionMatrix& cm, DocFormat format);

/// Raw counts only, with a header row of class names.
std::string confusion_counts_csv(const ConfusionMatrix& cm);
ConfusionMatrix parse_confusion_counts_csv(const std::string& text);

/// Integer percent, half-up: 0.801 -> "80".
std::string percent_cell(double value);

using NamedReports = std::vector<std::pair<std::string, MetricsReport>>;

/// Benchmark table: rows Accuracy, ROC-AUC, F1-Score, Precision, Recall;
/// one column per model in the given order.
std::string render_benchmark(const NamedReports& reports, DocFormat format);

/// Machine-readable version with full precision.
std::string render_benchmark_csv(const NamedReports& reports);

}  // namespace ecglens::metrics
