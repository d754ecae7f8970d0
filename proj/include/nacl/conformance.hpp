#pragma once

// Exact translations between naive Bayes and logistic regression, and an
// exhaustive conformance check.
//
// A naive Bayes model conforms with a logistic regression when
// P(c_k | x) = F_k(x) for every total x. Writing d_k for the LR weights of
// class k relative to class 0, this holds exactly when for every k > 0
//
//   d_k0 = log P(c_k)/P(c_0) + sum_i log P(x̄_i|c_k)/P(x̄_i|c_0)
//   d_ki = log [P(x_i|c_k) P(x̄_i|c_0)] / [P(x_i|c_0) P(x̄_i|c_k)]
//
// For binary models class 1 is the positive class c and class 0 is c̄.

#include <cstdint>
#include <random>

#include "nacl/model.hpp"

namespace nacl {

inline constexpr double kBoundaryEps = 1e-12;

namespace detail {

inline void require_open(double p, const char* what) {
  if (!(p >= kBoundaryEps && p <= 1.0 - kBoundaryEps))
    throw domain_error(std::string(what) + " at or beyond the {0,1} boundary: weights would be infinite");
}

}  // namespace detail

inline LogisticRegressionModel nb_to_lr(const NaiveBayesModel& nb) {
  const std::size_t n = nb.num_features();
  const std::size_t K = nb.num_classes();
  for (std::size_t k = 0; k < K; ++k) {
    detail::require_open(nb.prior(k), "class prior");
    for (std::size_t i = 0; i < n; ++i) detail::require_open(nb.cond(k, i), "conditional parameter");
  }

  auto relative_row = [&](std::size_t k) {
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(n + 1));
    double bias = std::log(nb.prior(k)) - std::log(nb.prior(0));
    for (std::size_t i = 0; i < n; ++i) {
      const double qk = nb.cond(k, i), q0 = nb.cond(0, i);
      bias += std::log1p(-qk) - std::log1p(-q0);
      row(static_cast<Eigen::Index>(i + 1)) = logit(qk) - logit(q0);
    }
    row(0) = bias;
    return row;
  };

  if (K == 2) {
    Eigen::MatrixXd w = relative_row(1);
    return LogisticRegressionModel(n, 2, std::move(w));
  }
  // Gauge: class-0 row all zeros.
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(n + 1));
  for (std::size_t k = 1; k < K; ++k) w.row(static_cast<Eigen::Index>(k)) = relative_row(k);
  return LogisticRegressionModel(n, K, std::move(w));
}

// Class whose feature parameters are pinned by theta: the positive class for
// binary models, class 0 otherwise.
inline std::size_t pinned_class(std::size_t num_classes) { return num_classes == 2 ? 1 : 0; }

// The unique naive Bayes model conforming with lr whose pinned class has
// P(x_i = 1 | c_pinned) = theta_i.
inline NaiveBayesModel lr_to_nb(const LogisticRegressionModel& lr, std::span<const double> theta) {
  const std::size_t n = lr.num_features();
  const std::size_t K = lr.num_classes();
  if (theta.size() != n) throw dimension_error("theta must have one entry per feature");
  for (double t : theta)
    if (!(t >= kBoundaryEps && t <= 1.0 - kBoundaryEps)) throw domain_error("theta must lie strictly inside (0,1)");

  std::vector<Eigen::RowVectorXd> rel(K);
  for (std::size_t k = 0; k < K; ++k) rel[k] = lr.relative_weights(k);
  const std::size_t r = pinned_class(K);

  // logit P(x_i|c_k) = logit theta_i + d_ki - d_ri
  Eigen::MatrixXd cond(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(n));
  Eigen::MatrixXd log_not(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto ki = static_cast<Eigen::Index>(k), ii = static_cast<Eigen::Index>(i);
      const double z = logit(theta[i]) + rel[k](ii + 1) - rel[r](ii + 1);
      cond(ki, ii) = k == r ? theta[i] : sigmoid(z);
      log_not(ki, ii) = k == r ? std::log1p(-theta[i]) : -softplus(z);
    }
  }
  // log P(c_k)/P(c_0) = d_k0 - sum_i log P(x̄_i|c_k)/P(x̄_i|c_0)
  std::vector<double> a(K);
  for (std::size_t k = 0; k < K; ++k) {
    double s = rel[k](0);
    for (std::size_t i = 0; i < n; ++i)
      s -= log_not(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) - log_not(0, static_cast<Eigen::Index>(i));
    a[k] = s;
  }
  return NaiveBayesModel(softmax(a), std::move(cond));
}

struct ConformanceResult {
  bool conforms = false;
  double max_deviation = 0.0;
  std::size_t inputs_checked = 0;
};

struct ConformanceCheckOptions {
  // Above this many features the exhaustive check refuses unless sampling.
  std::size_t max_exhaustive_features = 20;
  bool sampled = false;
  std::size_t num_samples = 100000;
  std::uint64_t seed = 0;
};

inline ConformanceResult check_conformance(const NaiveBayesModel& nb, const LogisticRegressionModel& lr, double tol,
                                           const ConformanceCheckOptions& opts = {}) {
  const std::size_t n = nb.num_features();
  if (lr.num_features() != n || lr.num_classes() != nb.num_classes())
    throw dimension_error("naive Bayes and logistic regression dimensions differ");

  ConformanceResult result;
  BitVector x(n, 0);
  auto visit = [&] {
    const auto p = nb_posterior(nb, x);
    const auto f = lr_predict(lr, std::span<const Bit>(x));
    for (std::size_t k = 0; k < p.size(); ++k)
      result.max_deviation = std::max(result.max_deviation, std::abs(p[k] - f[k]));
    ++result.inputs_checked;
  };

  if (!opts.sampled) {
    if (n > opts.max_exhaustive_features)
      throw dimension_error("exhaustive conformance check refused for " + std::to_string(n) +
                            " features; use the sampled variant");
    const std::uint64_t count = std::uint64_t{1} << n;
    for (std::uint64_t m = 0; m < count; ++m) {
      for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<Bit>((m >> i) & 1u);
      visit();
    }
  } else {
    std::mt19937_64 rng(opts.seed);
    for (std::size_t s = 0; s < opts.num_samples; ++s) {
      for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<Bit>(rng() >> 63);
      visit();
    }
  }
  result.conforms = result.max_deviation <= tol;
  return result;
}

}  // namespace nacl
