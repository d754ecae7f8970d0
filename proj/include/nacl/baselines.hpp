#pragma once

// Imputation baselines and maximum-likelihood naive Bayes.

#include <algorithm>
#include <string>
#include <vector>

#include "json.hpp"
#include "nacl/model.hpp"
#include "nacl/model_io.hpp"

namespace nacl {

enum class ImputerKind { Min, Max, Mean, Median };

inline const char* to_string(ImputerKind k) {
  switch (k) {
    case ImputerKind::Min: return "min";
    case ImputerKind::Max: return "max";
    case ImputerKind::Mean: return "mean";
    case ImputerKind::Median: return "median";
  }
  return "?";
}

inline ImputerKind imputer_kind_from_string(const std::string& s) {
  if (s == "min") return ImputerKind::Min;
  if (s == "max") return ImputerKind::Max;
  if (s == "mean") return ImputerKind::Mean;
  if (s == "median") return ImputerKind::Median;
  throw std::invalid_argument("unknown imputer kind '" + s + "'");
}

struct Imputer {
  ImputerKind kind = ImputerKind::Mean;
  std::vector<double> fill;
};

inline Imputer fit_imputer(const BinaryDataset& d, ImputerKind kind) {
  d.check();
  if (d.empty()) throw dimension_error("cannot fit an imputer on an empty dataset");
  Imputer imp{kind, std::vector<double>(d.num_features, 0.0)};
  const std::size_t N = d.size();
  for (std::size_t i = 0; i < d.num_features; ++i) {
    std::size_t ones = 0;
    for (const auto& r : d.rows) ones += r[i] ? 1 : 0;
    switch (kind) {
      case ImputerKind::Min: imp.fill[i] = ones == N ? 1.0 : 0.0; break;
      case ImputerKind::Max: imp.fill[i] = ones > 0 ? 1.0 : 0.0; break;
      case ImputerKind::Mean: imp.fill[i] = static_cast<double>(ones) / static_cast<double>(N); break;
      // Upper median: element N/2 of the sorted column.
      case ImputerKind::Median: imp.fill[i] = N / 2 >= N - ones ? 1.0 : 0.0; break;
    }
  }
  return imp;
}

// Observed positions keep their bit; missing positions take the fill value.
inline std::vector<double> impute(const Imputer& imp, const PartialObservation& y, std::size_t n) {
  if (imp.fill.size() != n) throw dimension_error("imputer was fit on a different number of features");
  y.check_bounds(n);
  std::vector<double> x = imp.fill;
  for (const auto& [i, v] : y) x[i] = v;
  return x;
}

inline std::string to_json(const Imputer& imp) {
  return std::string("{\"type\":\"imputer\",\"kind\":\"") + to_string(imp.kind) +
         "\",\"num_features\":" + std::to_string(imp.fill.size()) + ",\"fill\":" + json_detail::array(imp.fill) + "}";
}

inline Imputer imputer_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("type").get<std::string>() != "imputer") throw dimension_error("not an imputer document");
  Imputer imp{imputer_kind_from_string(j.at("kind").get<std::string>()), j.at("fill").get<std::vector<double>>()};
  if (imp.fill.size() != j.at("num_features").get<std::size_t>()) throw dimension_error("fill length mismatch");
  for (double f : imp.fill)
    if (!(f >= 0.0 && f <= 1.0)) throw domain_error("imputer fill values must lie in [0,1]");
  return imp;
}

// Smoothed relative frequencies:
//   P(x_i = 1 | c_k) = (count + s) / (N_k + 2s),  P(c_k) = (N_k + s) / (N + K s).
inline NaiveBayesModel fit_ml_nb(const BinaryDataset& d, double smoothing = 1.0, std::size_t num_classes = 0) {
  d.check();
  if (!d.labels) throw dimension_error("maximum-likelihood naive Bayes needs labels");
  if (smoothing < 0.0) throw domain_error("smoothing must be nonnegative");
  std::size_t K = num_classes;
  for (std::size_t c : *d.labels) K = std::max(K, c + 1);
  K = std::max<std::size_t>(K, 2);
  const std::size_t n = d.num_features;

  std::vector<double> class_w(K, 0.0);
  Eigen::MatrixXd ones = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(n));
  double total = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    const std::size_t c = (*d.labels)[j];
    const double w = d.weight(j);
    class_w[c] += w;
    total += w;
    for (std::size_t i = 0; i < n; ++i)
      if (d.rows[j][i]) ones(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) += w;
  }

  std::vector<double> prior(K);
  Eigen::MatrixXd cond(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < K; ++k) {
    prior[k] = (class_w[k] + smoothing) / (total + static_cast<double>(K) * smoothing);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ki = static_cast<Eigen::Index>(k), ii = static_cast<Eigen::Index>(i);
      const double denom = class_w[k] + 2.0 * smoothing;
      cond(ki, ii) = denom > 0.0 ? (ones(ki, ii) + smoothing) / denom : 0.0;
    }
  }
  NaiveBayesModel nb(std::move(prior), std::move(cond));
  const auto report = validate_nb(nb);
  if (!report.ok())
    throw numerical_error("maximum-likelihood naive Bayes is degenerate (" + report.violations.front() +
                          "); use smoothing > 0");
  return nb;
}

}  // namespace nacl
