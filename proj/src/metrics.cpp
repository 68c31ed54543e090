#include "birdsong/metrics.hpp"

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "birdsong/error.hpp"
#include "text_util.hpp"

namespace birdsong {

ConfusionMatrix::ConfusionMatrix(std::size_t n_classes, std::vector<std::string> class_names)
    : n_(n_classes), names_(std::move(class_names)), counts_(n_classes * n_classes, 0) {
  if (n_ == 0) throw Error(ErrorCode::IndexOutOfRange, "confusion matrix needs at least one class");
  if (names_.empty()) {
    for (std::size_t i = 0; i < n_; ++i) names_.push_back("class_" + std::to_string(i));
  }
  if (names_.size() != n_) {
    throw Error(ErrorCode::IndexOutOfRange, "class name count differs from class count");
  }
}

void ConfusionMatrix::add(std::size_t true_class, std::size_t predicted_class, std::int64_t count) {
  if (true_class >= n_ || predicted_class >= n_) {
    throw Error(ErrorCode::IndexOutOfRange, "class index (" + std::to_string(true_class) + ", " +
                                                std::to_string(predicted_class) + ") outside [0, " +
                                                std::to_string(n_) + ")");
  }
  counts_[predicted_class * n_ + true_class] += count;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.n_ != n_) throw Error(ErrorCode::ShapeMismatch, "cannot merge matrices of different size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::row_sum(std::size_t predicted) const {
  std::int64_t s = 0;
  for (std::size_t j = 0; j < n_; ++j) s += at(predicted, j);
  return s;
}

std::int64_t ConfusionMatrix::column_sum(std::size_t truth) const {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < n_; ++i) s += at(i, truth);
  return s;
}

double ConfusionMatrix::accuracy() const {
  const std::int64_t t = total();
  if (t == 0) return 0.0;
  std::int64_t diag = 0;
  for (std::size_t i = 0; i < n_; ++i) diag += at(i, i);
  return static_cast<double>(diag) / static_cast<double>(t);
}

std::vector<std::vector<double>> ConfusionMatrix::column_normalized() const {
  std::vector<std::vector<double>> out(n_, std::vector<double>(n_, 0.0));
  for (std::size_t j = 0; j < n_; ++j) {
    const std::int64_t col = column_sum(j);
    if (col == 0) continue;
    for (std::size_t i = 0; i < n_; ++i) out[i][j] = static_cast<double>(at(i, j)) / static_cast<double>(col);
  }
  return out;
}

ConfusionMatrix confusion_from_predictions(
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs, std::size_t n_classes,
    std::vector<std::string> class_names) {
  ConfusionMatrix cm(n_classes, std::move(class_names));
  for (const auto& [truth, predicted] : pairs) cm.add(truth, predicted);
  return cm;
}

ClassMetrics metrics_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn, std::int64_t tn) {
  ClassMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  m.support = tp + fn;
  if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  else m.recall_undefined = true;
  if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  else m.precision_undefined = true;
  if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  else m.f1_undefined = true;
  return m;
}

ClassMetrics class_metrics(const ConfusionMatrix& cm, std::size_t i) {
  if (i >= cm.size()) throw Error(ErrorCode::IndexOutOfRange, "class index out of range");
  return metrics_from_counts(cm.tp(i), cm.fp(i), cm.fn(i), cm.tn(i));
}

MacroMetrics macro_metrics(const ConfusionMatrix& cm) {
  MacroMetrics m;
  for (std::size_t i = 0; i < cm.size(); ++i) {
    ClassMetrics c = class_metrics(cm, i);
    m.recall += c.recall;
    m.precision += c.precision;
    m.f1 += c.f1;
    if (c.any_undefined()) m.undefined_classes.push_back(i);
  }
  const double n = static_cast<double>(cm.size());
  m.recall /= n;
  m.precision /= n;
  m.f1 /= n;
  return m;
}

F1Histogram f1_histogram(const std::vector<double>& values, double bin_width) {
  if (!(bin_width > 0.0) || bin_width > 1.0) throw Error(ErrorCode::BadConfig, "bin width must be in (0, 1]");
  const double bins_real = 1.0 / bin_width;
  const auto bins = static_cast<std::int64_t>(std::llround(bins_real));
  if (std::abs(bins_real - static_cast<double>(bins)) > 1e-9) {
    throw Error(ErrorCode::BadConfig, "bin width must divide 1 evenly");
  }
  F1Histogram h;
  h.bin_width = bin_width;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  double sum = 0.0;
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::BadConfig, "F1 value outside [0, 1]");
    // Nudge so that values sitting on an edge (0.3 with w = 0.1) land in the
    // bin they open rather than the one below.
    auto k = static_cast<std::int64_t>(std::floor(v * static_cast<double>(bins) + 1e-9));
    k = std::min(k, bins - 1);
    h.counts[static_cast<std::size_t>(k)] += 1;
    sum += v;
  }
  h.macro_f1 = values.empty() ? 0.0 : sum / static_cast<double>(values.size());
  return h;
}

std::string metrics_report_json(const ConfusionMatrix& cm, int indent) {
  using nlohmann::json;
  json classes = json::array();
  for (std::size_t i = 0; i < cm.size(); ++i) {
    ClassMetrics c = class_metrics(cm, i);
    json flags = json::array();
    if (c.recall_undefined) flags.push_back("recall");
    if (c.precision_undefined) flags.push_back("precision");
    if (c.f1_undefined) flags.push_back("f1");
    classes.push_back({{"name", cm.class_names()[i]},
                       {"support", c.support},
                       {"tp", c.tp},
                       {"fp", c.fp},
                       {"fn", c.fn},
                       {"tn", c.tn},
                       {"recall", c.recall},
                       {"precision", c.precision},
                       {"f1", c.f1},
                       {"undefined_flags", flags}});
  }
  MacroMetrics m = macro_metrics(cm);
  json undefined = json::array();
  for (std::size_t i : m.undefined_classes) undefined.push_back(cm.class_names()[i]);
  json matrix = json::array();
  for (std::size_t i = 0; i < cm.size(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < cm.size(); ++j) row.push_back(cm.at(i, j));
    matrix.push_back(row);
  }
  json report = {{"classes", classes},
                 {"macro",
                  {{"recall", m.recall},
                   {"precision", m.precision},
                   {"f1", m.f1},
                   {"undefined_classes", undefined}}},
                 {"accuracy", cm.accuracy()},
                 {"total", cm.total()},
                 {"matrix_layout", "rows=predicted,columns=true"},
                 {"matrix", matrix}};
  return report.dump(indent);
}

std::string metrics_report_csv(const ConfusionMatrix& cm) {
  std::string out = "class,support,tp,fp,fn,tn,recall,precision,f1,undefined\n";
  auto num = [](double v) { return detail::format_fixed(v, 6); };
  for (std::size_t i = 0; i < cm.size(); ++i) {
    ClassMetrics c = class_metrics(cm, i);
    std::string flags;
    if (c.recall_undefined) flags += "recall;";
    if (c.precision_undefined) flags += "precision;";
    if (c.f1_undefined) flags += "f1;";
    if (!flags.empty()) flags.pop_back();
    out += detail::csv_field(cm.class_names()[i]) + ',' + std::to_string(c.support) + ',' +
           std::to_string(c.tp) + ',' + std::to_string(c.fp) + ',' + std::to_string(c.fn) + ',' +
           std::to_string(c.tn) + ',' + num(c.recall) + ',' + num(c.precision) + ',' + num(c.f1) + ',' +
           flags + '\n';
  }
  MacroMetrics m = macro_metrics(cm);
  out += "macro," + std::to_string(cm.total()) + ",,,,," + num(m.recall) + ',' + num(m.precision) + ',' +
         num(m.f1) + ",\n";
  return out;
}

std::string normalized_matrix_csv(const ConfusionMatrix& cm) {
  auto norm = cm.column_normalized();
  std::string out = "predicted\\true";
  for (const auto& name : cm.class_names()) out += ',' + detail::csv_field(name);
  out += '\n';
  for (std::size_t i = 0; i < cm.size(); ++i) {
    out += detail::csv_field(cm.class_names()[i]);
    for (std::size_t j = 0; j < cm.size(); ++j) out += ',' + detail::format_fixed(norm[i][j], 6);
    out += '\n';
  }
  return out;
}

std::string histogram_csv(const F1Histogram& h) {
  std::string out = "bin_low,bin_high,count\n";
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    out += detail::format_fixed(static_cast<double>(k) * h.bin_width, 4) + ',' +
           detail::format_fixed(static_cast<double>(k + 1) * h.bin_width, 4) + ',' +
           std::to_string(h.counts[k]) + '\n';
  }
  out += "# macro_f1," + detail::format_fixed(h.macro_f1, 6) + '\n';
  return out;
}

}  // namespace birdsong
