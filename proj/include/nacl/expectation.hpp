#pragma once

// Expected prediction of a classifier F over the missing features M given
// an observation y:   E(y) = E_{m ~ P(M | y)} [ F(y m) ].
//
// For a naive Bayes distribution and its own posterior this is just
// P(C | y), computable in time linear in |y|.

#include <cstdint>
#include <functional>
#include <vector>

#include "nacl/model.hpp"

namespace nacl {

// P(C | y): prior times the likelihood of the observed features only.
inline std::vector<double> expected_prediction(const NaiveBayesModel& nb, const PartialObservation& y) {
  y.check_bounds(nb.num_features());
  std::vector<double> logs(nb.num_classes());
  for (std::size_t k = 0; k < logs.size(); ++k) logs[k] = nb_log_joint(nb, y, k);
  return softmax(logs);
}

using Classifier = std::function<std::vector<double>(const BitVector&)>;

inline constexpr std::size_t kMaxEnumeratedFeatures = 20;

// Sum over all completions m of F(y m) P(m | y), by enumeration.
inline std::vector<double> brute_force_expectation(const Classifier& f, const NaiveBayesModel& p,
                                                   const PartialObservation& y) {
  const std::size_t n = p.num_features();
  y.check_bounds(n);
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < n; ++i)
    if (!y.contains(i)) missing.push_back(i);
  if (missing.size() > kMaxEnumeratedFeatures)
    throw dimension_error("brute-force expectation refused: " + std::to_string(missing.size()) + " missing features");

  const double log_py = nb_log_marginal(p, y);
  BitVector x(n, 0);
  for (const auto& [i, v] : y) x[i] = v;

  std::vector<double> acc;
  const std::uint64_t count = std::uint64_t{1} << missing.size();
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    for (std::size_t j = 0; j < missing.size(); ++j) x[missing[j]] = static_cast<Bit>((mask >> j) & 1u);
    const double w = std::exp(nb_log_marginal(p, std::span<const Bit>(x)) - log_py);
    const std::vector<double> fx = f(x);
    if (acc.empty()) acc.assign(fx.size(), 0.0);
    for (std::size_t k = 0; k < fx.size(); ++k) acc[k] += w * fx[k];
  }
  return acc;
}

// Scalar-classifier convenience form.
inline double brute_force_expectation(const std::function<double(const BitVector&)>& f, const NaiveBayesModel& p,
                                      const PartialObservation& y) {
  return brute_force_expectation([&](const BitVector& x) { return std::vector<double>{f(x)}; }, p, y)[0];
}

// w0 + sum_{i in y} w_i y_i + sum_{i not in y} w_i mu_i, with weights laid
// out bias first.
inline double linear_expected_prediction(std::span<const double> weights, std::span<const double> means,
                                         const PartialObservation& y) {
  if (weights.size() != means.size() + 1) throw dimension_error("weights must be bias plus one per feature");
  y.check_bounds(means.size());
  double s = weights[0];
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (!(means[i] >= 0.0 && means[i] <= 1.0)) throw domain_error("feature means must lie in [0,1]");
    s += weights[i + 1] * (y.contains(i) ? static_cast<double>(y.at(i)) : means[i]);
  }
  return s;
}

// Fully factorized distribution P(X_i = 1) = mu_i, as a naive Bayes model
// with identical class-conditionals.
inline NaiveBayesModel independent_distribution(std::span<const double> mu, std::size_t num_classes = 2) {
  Eigen::MatrixXd cond(static_cast<Eigen::Index>(num_classes), static_cast<Eigen::Index>(mu.size()));
  for (std::size_t k = 0; k < num_classes; ++k)
    for (std::size_t i = 0; i < mu.size(); ++i) cond(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = mu[i];
  return NaiveBayesModel(std::vector<double>(num_classes, 1.0 / static_cast<double>(num_classes)), std::move(cond));
}

}  // namespace nacl
