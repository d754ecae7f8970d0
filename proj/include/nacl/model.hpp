#pragma once

// Core model types: logistic regression classifiers, naive Bayes
// distributions over binary features, partial observations and binary
// datasets, plus exact naive Bayes inference.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nacl/error.hpp"

namespace nacl {

using Bit = std::uint8_t;
using BitVector = std::vector<Bit>;

// ---------------------------------------------------------------------------
// Scalar helpers shared by every module.

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
inline double softplus(double z) {
  if (z > 0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

// Normalizes log-scores into a probability vector.
inline std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> out(scores.size());
  if (scores.empty()) return out;
  const double m = *std::max_element(scores.begin(), scores.end());
  double s = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) s += out[k] = std::exp(scores[k] - m);
  for (double& v : out) v /= s;
  return out;
}

// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> p) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < p.size(); ++k)
    if (p[k] > p[best]) best = k;
  return best;
}

// ---------------------------------------------------------------------------

// Discriminative classifier F. Column 0 of the weight matrix is the bias.
//
// Binary models (num_classes == 2) store a single row holding the logit of
// class 1 against the implicit reference class 0. Multiclass models store one
// row per class and predict with a softmax. Both shapes are served by
// relative_weights(k), the weights of class k relative to class 0.
class LogisticRegressionModel {
 public:
  LogisticRegressionModel() = default;

  LogisticRegressionModel(std::size_t num_features, std::size_t num_classes,
                          Eigen::MatrixXd weights)
      : num_features_(num_features), num_classes_(num_classes), weights_(std::move(weights)) {
    if (num_features_ < 1) throw dimension_error("logistic regression needs at least one feature");
    if (num_classes_ < 2) throw dimension_error("logistic regression needs at least two classes");
    if (weights_.cols() != static_cast<Eigen::Index>(num_features_ + 1))
      throw dimension_error("weight matrix must have num_features + 1 columns");
    if (num_classes_ == 2 && weights_.rows() == 2) {
      // Accept the two-row softmax form and fold it into the canonical row.
      Eigen::MatrixXd folded = weights_.row(1) - weights_.row(0);
      weights_ = folded;
    }
    const Eigen::Index expected_rows = num_classes_ == 2 ? 1 : static_cast<Eigen::Index>(num_classes_);
    if (weights_.rows() != expected_rows)
      throw dimension_error("weight matrix has " + std::to_string(weights_.rows()) + " rows, expected " +
                            std::to_string(expected_rows));
    if (!weights_.allFinite()) throw domain_error("logistic regression weights must be finite");
  }

  // Convenience constructor for a binary model from (w0, w1, ..., wn).
  static LogisticRegressionModel binary(std::span<const double> w) {
    if (w.size() < 2) throw dimension_error("binary weights need a bias and at least one feature");
    Eigen::MatrixXd m(1, static_cast<Eigen::Index>(w.size()));
    for (std::size_t i = 0; i < w.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = w[i];
    return LogisticRegressionModel(w.size() - 1, 2, std::move(m));
  }

  std::size_t num_features() const { return num_features_; }
  std::size_t num_classes() const { return num_classes_; }
  bool is_binary() const { return num_classes_ == 2; }
  const Eigen::MatrixXd& weights() const { return weights_; }

  // Weights of class k minus those of class 0 (bias first). Row 0 is zero.
  Eigen::RowVectorXd relative_weights(std::size_t k) const {
    const auto cols = static_cast<Eigen::Index>(num_features_ + 1);
    if (k >= num_classes_) throw dimension_error("class index out of range");
    if (k == 0) return Eigen::RowVectorXd::Zero(cols);
    if (is_binary()) return weights_.row(0);
    return weights_.row(static_cast<Eigen::Index>(k)) - weights_.row(0);
  }

 private:
  std::size_t num_features_ = 0;
  std::size_t num_classes_ = 0;
  Eigen::MatrixXd weights_;
};

// Naive Bayes distribution P(C) prod_i P(X_i | C) over binary features.
// cond(k, i) = P(X_i = 1 | C = k). Values are not checked here; see
// validate_nb().
class NaiveBayesModel {
 public:
  NaiveBayesModel() = default;

  NaiveBayesModel(std::vector<double> class_prior, Eigen::MatrixXd cond)
      : prior_(std::move(class_prior)), cond_(std::move(cond)) {
    if (prior_.size() < 2) throw dimension_error("naive Bayes needs at least two classes");
    if (cond_.rows() != static_cast<Eigen::Index>(prior_.size()))
      throw dimension_error("conditional table must have one row per class");
    if (cond_.cols() < 1) throw dimension_error("naive Bayes needs at least one feature");
  }

  std::size_t num_features() const { return static_cast<std::size_t>(cond_.cols()); }
  std::size_t num_classes() const { return prior_.size(); }
  const std::vector<double>& class_prior() const { return prior_; }
  double prior(std::size_t k) const { return prior_[k]; }
  const Eigen::MatrixXd& cond() const { return cond_; }
  double cond(std::size_t k, std::size_t i) const {
    return cond_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i));
  }

  // log P(X_i = value | C = k)
  double log_cond(std::size_t k, std::size_t i, Bit value) const {
    const double q = cond(k, i);
    return value ? std::log(q) : std::log1p(-q);
  }

 private:
  std::vector<double> prior_;
  Eigen::MatrixXd cond_;
};

// Assignment of bits to a subset of feature indices. Missing features are
// simply absent.
class PartialObservation {
 public:
  PartialObservation() = default;

  static PartialObservation total(std::span<const Bit> x) {
    PartialObservation y;
    for (std::size_t i = 0; i < x.size(); ++i) y.set(i, x[i]);
    return y;
  }

  void set(std::size_t index, Bit value) { values_[index] = value ? 1 : 0; }
  void erase(std::size_t index) { values_.erase(index); }
  bool contains(std::size_t index) const { return values_.count(index) != 0; }
  Bit at(std::size_t index) const { return values_.at(index); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  PartialObservation without(std::size_t index) const {
    PartialObservation y = *this;
    y.erase(index);
    return y;
  }

  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  // Throws if any index is >= num_features.
  void check_bounds(std::size_t num_features) const {
    if (!values_.empty() && values_.rbegin()->first >= num_features)
      throw dimension_error("observed feature index " + std::to_string(values_.rbegin()->first) +
                            " out of range for " + std::to_string(num_features) + " features");
  }

  bool operator==(const PartialObservation&) const = default;

 private:
  std::map<std::size_t, Bit> values_;
};

// Rows of bits with optional class labels and optional nonnegative weights.
struct BinaryDataset {
  std::size_t num_features = 0;
  std::vector<BitVector> rows;
  std::optional<std::vector<std::size_t>> labels;
  std::optional<std::vector<double>> weights;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  bool has_labels() const { return labels.has_value(); }
  double weight(std::size_t j) const { return weights ? (*weights)[j] : 1.0; }

  void check() const {
    for (const auto& r : rows)
      if (r.size() != num_features) throw dimension_error("dataset rows must all have num_features entries");
    if (labels && labels->size() != rows.size()) throw dimension_error("labels must align with rows");
    if (weights) {
      if (weights->size() != rows.size()) throw dimension_error("weights must align with rows");
      for (double w : *weights)
        if (!(w >= 0.0) || !std::isfinite(w)) throw domain_error("row weights must be finite and nonnegative");
    }
  }
};

// ---------------------------------------------------------------------------
// Inference.

// Class distribution of the logistic regression. Accepts fractional inputs
// (used by mean imputation).
inline std::vector<double> lr_predict(const LogisticRegressionModel& model, std::span<const double> x) {
  if (x.size() != model.num_features())
    throw dimension_error("input has " + std::to_string(x.size()) + " features, model expects " +
                          std::to_string(model.num_features()));
  const Eigen::MatrixXd& w = model.weights();
  auto score = [&](Eigen::Index row) {
    double s = w(row, 0);
    for (std::size_t i = 0; i < x.size(); ++i) s += w(row, static_cast<Eigen::Index>(i + 1)) * x[i];
    return s;
  };
  if (model.is_binary()) {
    const double p = sigmoid(score(0));
    return {1.0 - p, p};
  }
  std::vector<double> scores(model.num_classes());
  for (std::size_t k = 0; k < scores.size(); ++k) scores[k] = score(static_cast<Eigen::Index>(k));
  return softmax(scores);
}

inline std::vector<double> lr_predict(const LogisticRegressionModel& model, std::span<const Bit> x) {
  std::vector<double> xd(x.begin(), x.end());
  return lr_predict(model, std::span<const double>(xd));
}

// log P(x, c_k) for a total x.
inline double nb_log_joint(const NaiveBayesModel& nb, std::span<const Bit> x, std::size_t k) {
  double s = std::log(nb.prior(k));
  for (std::size_t i = 0; i < x.size(); ++i) s += nb.log_cond(k, i, x[i]);
  return s;
}

// log P(y, c_k) for a partial observation.
inline double nb_log_joint(const NaiveBayesModel& nb, const PartialObservation& y, std::size_t k) {
  double s = std::log(nb.prior(k));
  for (const auto& [i, v] : y) s += nb.log_cond(k, i, v);
  return s;
}

inline std::vector<double> nb_posterior(const NaiveBayesModel& nb, std::span<const Bit> x) {
  if (x.size() != nb.num_features())
    throw dimension_error("input has " + std::to_string(x.size()) + " features, model expects " +
                          std::to_string(nb.num_features()));
  std::vector<double> logs(nb.num_classes());
  for (std::size_t k = 0; k < logs.size(); ++k) logs[k] = nb_log_joint(nb, x, k);
  return softmax(logs);
}

inline double nb_log_marginal(const NaiveBayesModel& nb, const PartialObservation& y) {
  y.check_bounds(nb.num_features());
  std::vector<double> logs(nb.num_classes());
  for (std::size_t k = 0; k < logs.size(); ++k) logs[k] = nb_log_joint(nb, y, k);
  return log_sum_exp(logs);
}

// P(y) = sum_k P(c_k) prod_{i in y} P(y_i | c_k).
inline double nb_marginal(const NaiveBayesModel& nb, const PartialObservation& y) {
  return std::exp(nb_log_marginal(nb, y));
}

inline double nb_log_marginal(const NaiveBayesModel& nb, std::span<const Bit> x) {
  if (x.size() != nb.num_features()) throw dimension_error("input length does not match model");
  std::vector<double> logs(nb.num_classes());
  for (std::size_t k = 0; k < logs.size(); ++k) logs[k] = nb_log_joint(nb, x, k);
  return log_sum_exp(logs);
}

// Weighted marginal log-likelihood sum_j w_j log P(x_j).
inline double nb_log_likelihood(const NaiveBayesModel& nb, const BinaryDataset& d) {
  double ll = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) ll += d.weight(j) * nb_log_marginal(nb, d.rows[j]);
  return ll;
}

// ---------------------------------------------------------------------------
// Validation.

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

inline ValidationReport validate_nb(const NaiveBayesModel& nb, double sum_tol = 1e-9) {
  ValidationReport report;
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
  };
  double total = 0.0;
  for (std::size_t k = 0; k < nb.num_classes(); ++k) {
    const double p = nb.prior(k);
    total += p;
    if (!std::isfinite(p) || p < 0.0 || p > 1.0)
      report.violations.push_back("prior[" + std::to_string(k) + "] = " + fmt(p) + " outside [0,1]");
    else if (p == 0.0 || p == 1.0)
      report.violations.push_back("prior[" + std::to_string(k) + "] parameter at closed boundary");
  }
  if (!(std::abs(total - 1.0) <= sum_tol)) report.violations.push_back("prior sums to " + fmt(total));
  for (std::size_t k = 0; k < nb.num_classes(); ++k) {
    for (std::size_t i = 0; i < nb.num_features(); ++i) {
      const double q = nb.cond(k, i);
      const std::string where = "cond[" + std::to_string(k) + "][" + std::to_string(i) + "]";
      if (!std::isfinite(q) || q < 0.0 || q > 1.0)
        report.violations.push_back(where + " = " + fmt(q) + " outside [0,1]");
      else if (q == 0.0 || q == 1.0)
        report.violations.push_back(where + " parameter at closed boundary");
    }
  }
  return report;
}

}  // namespace nacl
