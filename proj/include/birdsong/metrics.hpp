#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace birdsong {

/// Square count matrix. Rows are PREDICTED classes, columns are TRUE classes:
/// false positives of class i lie along row i, false negatives down column i.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t n_classes, std::vector<std::string> class_names = {});

  std::size_t size() const { return n_; }
  const std::vector<std::string>& class_names() const { return names_; }

  /// Throws IndexOutOfRange.
  void add(std::size_t true_class, std::size_t predicted_class, std::int64_t count = 1);
  /// Element-wise sum; shards accumulated separately merge exactly.
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  std::int64_t at(std::size_t predicted, std::size_t truth) const { return counts_[predicted * n_ + truth]; }
  std::int64_t total() const;
  std::int64_t row_sum(std::size_t predicted) const;
  std::int64_t column_sum(std::size_t truth) const;

  std::int64_t tp(std::size_t i) const { return at(i, i); }
  std::int64_t fp(std::size_t i) const { return row_sum(i) - tp(i); }
  std::int64_t fn(std::size_t i) const { return column_sum(i) - tp(i); }
  std::int64_t tn(std::size_t i) const { return total() - tp(i) - fp(i) - fn(i); }

  /// Diagonal over total; 0 for an empty matrix.
  double accuracy() const;
  /// Each column divided by its sum (fraction of true class j predicted as i);
  /// columns with no support are all zeros.
  std::vector<std::vector<double>> column_normalized() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t n_;
  std::vector<std::string> names_;
  std::vector<std::int64_t> counts_;
};

ConfusionMatrix confusion_from_predictions(
    const std::vector<std::pair<std::size_t, std::size_t>>& true_predicted_pairs, std::size_t n_classes,
    std::vector<std::string> class_names = {});

struct ClassMetrics {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;  // true instances
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  // Set when the ratio had a zero denominator and the score was defined as 0.
  bool recall_undefined = false;
  bool precision_undefined = false;
  bool f1_undefined = false;

  bool any_undefined() const { return recall_undefined || precision_undefined || f1_undefined; }
};

/// R = TP/(TP+FN), P = TP/(TP+FP), F1 = 2PR/(P+R).
ClassMetrics class_metrics(const ConfusionMatrix& cm, std::size_t i);
ClassMetrics metrics_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn, std::int64_t tn = 0);

struct MacroMetrics {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;  // mean of per-class F1
  std::vector<std::size_t> undefined_classes;
};

/// Unweighted mean over all classes; undefined scores contribute 0.
MacroMetrics macro_metrics(const ConfusionMatrix& cm);

struct F1Histogram {
  double bin_width = 0.1;
  std::vector<std::int64_t> counts;  // bin k covers [k*w, (k+1)*w); the last bin includes 1.0
  double macro_f1 = 0.0;             // annotation: mean of the binned values
};

/// Throws BadConfig if bin_width does not divide 1 or a value is outside [0, 1].
F1Histogram f1_histogram(const std::vector<double>& per_class_f1, double bin_width);

/// Macro (recall, precision, f1) reported for fine-tuned checkpoints on the
/// 20-species wetland-bird test split. Comparison targets for externally
/// produced predictions only.
struct ReferenceScores {
  std::string_view arch;
  double recall;
  double precision;
  double f1;
};
inline constexpr ReferenceScores kReferenceMacroScores[] = {
    {"vgg16", 0.757, 0.812, 0.768},
    {"resnet50", 0.856, 0.855, 0.834},
    {"mobilenet_v2", 0.824, 0.785, 0.789},
};

/// JSON report: per-class block, macro block, accuracy and the raw matrix.
std::string metrics_report_json(const ConfusionMatrix& cm, int indent = 2);
std::string metrics_report_csv(const ConfusionMatrix& cm);
std::string normalized_matrix_csv(const ConfusionMatrix& cm);
std::string histogram_csv(const F1Histogram& h);

}  // namespace birdsong
