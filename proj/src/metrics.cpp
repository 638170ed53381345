#include "ecglens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <sstream>

#include "ecglens/common.hpp"
#include "ecglens/csv.hpp"

namespace ecglens::metrics {

namespace {

double safe_ratio(double num, double den, bool& undefined) {
  undefined = den == 0.0;
  return undefined ? 0.0 : num / den;
}

std::string render_grid(const std::vector<std::vector<std::string>>& grid, DocFormat format) {
  std::ostringstream out;
  if (format == DocFormat::Csv) {
    for (const auto& row : grid) out << csv::join(row) << '\n';
    return out.str();
  }
  if (format == DocFormat::Markdown) {
    for (std::size_t r = 0; r < grid.size(); ++r) {
      out << '|';
      for (const auto& cell : grid[r]) out << ' ' << cell << " |";
      out << '\n';
      if (r == 0) {
        out << '|';
        for (std::size_t c = 0; c < grid[r].size(); ++c) out << (c == 0 ? " :--- |" : " ---: |");
        out << '\n';
      }
    }
    return out.str();
  }
  std::vector<std::size_t> width;
  for (const auto& row : grid) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  for (const auto& row : grid) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == 0) {
        line += row[c] + std::string(width[c] - row[c].size(), ' ');
      } else {
        line += "  " + std::string(width[c] - row[c].size(), ' ') + row[c];
      }
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
  return out.str();
}

std::string full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (const auto& row : counts)
    for (auto v : row) t += v;
  return t;
}

std::uint64_t ConfusionMatrix::row_total(std::size_t i) const {
  return std::accumulate(counts[i].begin(), counts[i].end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::col_total(std::size_t j) const {
  std::uint64_t t = 0;
  for (const auto& row : counts) t += row[j];
  return t;
}

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size())
    throw Error(ErrorCode::Data, "confusion: label vectors differ in length (" + std::to_string(y_true.size()) +
                                     " vs " + std::to_string(y_pred.size()) + ")");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if (t < 0 || t >= static_cast<int>(kNumClasses) || p < 0 || p >= static_cast<int>(kNumClasses))
      throw Error(ErrorCode::Data, "confusion: label out of range at index " + std::to_string(i));
    ++cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) return 0.0;
  std::uint64_t trace = 0;
  for (std::size_t i = 0; i < kNumClasses; ++i) trace += cm.counts[i][i];
  return static_cast<double>(trace) / static_cast<double>(total);
}

PrfResult precision_recall_f1(const ConfusionMatrix& cm) {
  PrfResult out;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& s = out.per_class[c];
    const double tp = static_cast<double>(cm.tp(c));
    s.precision = safe_ratio(tp, tp + static_cast<double>(cm.fp(c)), s.precision_undefined);
    s.recall = safe_ratio(tp, tp + static_cast<double>(cm.fn(c)), s.recall_undefined);
    s.f1 = safe_ratio(2.0 * s.precision * s.recall, s.precision + s.recall, s.f1_undefined);
    out.precision += s.precision;
    out.recall += s.recall;
    out.f1 += s.f1;
  }
  out.precision /= kNumClasses;
  out.recall /= kNumClasses;
  out.f1 /= kNumClasses;
  return out;
}

double binary_auc(std::span<const double> scores, std::span<const bool> positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks are 1-based; tied runs share their average rank.
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]]) {
        positive_rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  const double p = static_cast<double>(n_pos);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(n_neg));
}

AucResult roc_auc(std::span<const int> y_true, std::span<const double> scores) {
  const std::size_t n = y_true.size();
  if (scores.size() != n * kNumClasses)
    throw Error(ErrorCode::Data, "roc_auc: score matrix must be N x 5");
  for (double s : scores) {
    if (!std::isfinite(s)) throw Error(ErrorCode::Data, "roc_auc: non-finite score");
  }

  AucResult out;
  std::vector<double> column(n);
  std::unique_ptr<bool[]> positive(new bool[n]);
  std::size_t evaluated = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = scores[i * kNumClasses + c];
      positive[i] = y_true[i] == static_cast<int>(c);
      n_pos += positive[i];
    }
    if (n_pos == 0 || n_pos == n) {
      out.skipped_classes.push_back(static_cast<int>(c));
      out.per_class[c] = 0.0;
      continue;
    }
    out.per_class[c] = binary_auc(column, std::span<const bool>(positive.get(), n));
    out.macro += out.per_class[c];
    ++evaluated;
  }
  if (evaluated == 0)
    throw Error(ErrorCode::Data, "roc_auc: no class has both positive and negative samples");
  out.macro /= static_cast<double>(evaluated);
  return out;
}

int argmax(std::span<const double> row) {
  int best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

MetricsReport evaluate(std::span<const int> y_true, std::span<const double> scores) {
  if (scores.size() != y_true.size() * kNumClasses)
    throw Error(ErrorCode::Data, "evaluate: score matrix must be N x 5");
  std::vector<int> y_pred(y_true.size());
  for (std::size_t i = 0; i < y_true.size(); ++i)
    y_pred[i] = argmax(scores.subspan(i * kNumClasses, kNumClasses));

  MetricsReport r;
  r.confusion = confusion(y_true, y_pred);
  r.samples = y_true.size();
  r.accuracy = accuracy(r.confusion);
  const auto prf = precision_recall_f1(r.confusion);
  r.precision = prf.precision;
  r.recall = prf.recall;
  r.f1 = prf.f1;
  r.per_class = prf.per_class;
  const auto auc = roc_auc(y_true, scores);
  r.roc_auc = auc.macro;
  r.per_class_auc = auc.per_class;
  r.auc_skipped_classes = auc.skipped_classes;
  return r;
}

std::string format_cell(std::uint64_t count, std::uint64_t total) {
  std::uint64_t basis_points = 0;
  if (total > 0) basis_points = (count * 20000 + total) / (2 * total);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%llu %llu.%02llu%%", static_cast<unsigned long long>(count),
                static_cast<unsigned long long>(basis_points / 100),
                static_cast<unsigned long long>(basis_points % 100));
  return buf;
}

std::string render_confusion(const ConfusionMatrix& cm, DocFormat format) {
  const auto total = cm.total();
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header = {"true \\ predicted"};
  for (Superclass c : kAllSuperclasses) header.emplace_back(superclass_name(c));
  header.emplace_back("Total");
  grid.push_back(header);
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    std::vector<std::string> row = {std::string(superclass_name(kAllSuperclasses[i]))};
    for (std::size_t j = 0; j < kNumClasses; ++j) row.push_back(format_cell(cm.counts[i][j], total));
    row.push_back(std::to_string(cm.row_total(i)));
    grid.push_back(row);
  }
  std::vector<std::string> footer = {"Total"};
  for (std::size_t j = 0; j < kNumClasses; ++j) footer.push_back(std::to_string(cm.col_total(j)));
  footer.push_back(std::to_string(total));
  grid.push_back(footer);
  return render_grid(grid, format);
}

std::string confusion_counts_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "true\\predicted";
  for (Superclass c : kAllSuperclasses) out << ',' << superclass_name(c);
  out << '\n';
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    out << superclass_name(kAllSuperclasses[i]);
    for (std::size_t j = 0; j < kNumClasses; ++j) out << ',' << cm.counts[i][j];
    out << '\n';
  }
  return out.str();
}

ConfusionMatrix parse_confusion_counts_csv(const std::string& text) {
  const auto rows = csv::parse(text);
  if (rows.size() != kNumClasses + 1) throw Error(ErrorCode::Format, "confusion csv: expected 6 rows");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    const auto& row = rows[i + 1];
    if (row.size() != kNumClasses + 1) throw Error(ErrorCode::Format, "confusion csv: expected 6 columns");
    if (row[0] != superclass_name(kAllSuperclasses[i]))
      throw Error(ErrorCode::Format, "confusion csv: unexpected row label '" + row[0] + "'");
    for (std::size_t j = 0; j < kNumClasses; ++j) cm.counts[i][j] = std::stoull(row[j + 1]);
  }
  return cm;
}

std::string percent_cell(double value) {
  const double scaled = std::floor(value * 100.0 + 0.5 + 1e-9);
  return std::to_string(static_cast<long long>(scaled));
}

std::string render_benchmark(const NamedReports& reports, DocFormat format) {
  if (format == DocFormat::Csv) return render_benchmark_csv(reports);
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header = {"Metrics"};
  for (const auto& [name, report] : reports) header.push_back(name + "(%)");
  grid.push_back(header);
  if (!reports.empty()) {
    const std::pair<const char*, double MetricsReport::*> rows[] = {
        {"Accuracy", &MetricsReport::accuracy}, {"ROC-AUC", &MetricsReport::roc_auc},
        {"F1-Score", &MetricsReport::f1},       {"Precision", &MetricsReport::precision},
        {"Recall", &MetricsReport::recall}};
    for (const auto& [label, field] : rows) {
      std::vector<std::string> row = {label};
      for (const auto& [name, report] : reports) row.push_back(percent_cell(report.*field));
      grid.push_back(row);
    }
  }
  return render_grid(grid, format);
}

std::string render_benchmark_csv(const NamedReports& reports) {
  std::ostringstream out;
  out << "model,accuracy,roc_auc,f1,precision,recall,samples\n";
  for (const auto& [name, r] : reports) {
    out << csv::escape(name) << ',' << full_precision(r.accuracy) << ',' << full_precision(r.roc_auc) << ','
        << full_precision(r.f1) << ',' << full_precision(r.precision) << ',' << full_precision(r.recall) << ','
        << r.samples << '\n';
  }
  return out.str();
}

}  // namespace ecglens::metrics
