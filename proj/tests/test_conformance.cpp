#include <gtest/gtest.h>

#include <random>

#include "nacl/conformance.hpp"
#include "oracles.hpp"

using namespace nacl;

namespace {

const oracle::Nb kP1{{0.5, 0.5}, {{0.3, 0.5}, {0.8, 0.45}}};
const oracle::Nb kP2{{0.64, 0.36}, {{0.14, 0.92}, {0.6, 0.9}}};

LogisticRegressionModel toy_lr() {
  const std::vector<double> w{-1.16, 2.23, -0.20};
  return LogisticRegressionModel::binary(w);
}

// Largest posterior gap between an NB and an LR over all inputs, computed
// from plain products.
double oracle_gap(const oracle::Nb& p, const LogisticRegressionModel& lr) {
  const auto w = oracle::weights_of(lr);
  double gap = 0.0;
  oracle::for_each_completion(std::vector<int>(p.n(), -1), [&](const std::vector<int>& x) {
    const auto a = oracle::posterior(p, x);
    const auto b = oracle::lr(w, x);
    for (std::size_t k = 0; k < a.size(); ++k) gap = std::max(gap, std::abs(a[k] - b[k]));
  });
  return gap;
}

}  // namespace

TEST(NbToLr, ToyWeights) {
  const auto lr = nb_to_lr(kP1.model());
  ASSERT_TRUE(lr.is_binary());
  EXPECT_NEAR(lr.weights()(0, 0), -1.16, 0.005);
  EXPECT_NEAR(lr.weights()(0, 1), 2.23, 0.005);
  EXPECT_NEAR(lr.weights()(0, 2), -0.20, 0.005);
  // P2 is listed to two decimals; logits amplify that rounding to ~0.05.
  const auto lr2 = nb_to_lr(kP2.model());
  EXPECT_NEAR(lr2.weights()(0, 0), -1.16, 0.05);
  EXPECT_NEAR(lr2.weights()(0, 1), 2.23, 0.05);
  EXPECT_NEAR(lr2.weights()(0, 2), -0.20, 0.05);
}

TEST(NbToLr, SymmetricModelGivesZeroWeights) {
  const oracle::Nb p{{0.5, 0.5}, {{0.3, 0.6, 0.9}, {0.3, 0.6, 0.9}}};
  const auto lr = nb_to_lr(p.model());
  EXPECT_NEAR(lr.weights().cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(NbToLr, BoundaryParameterIsRejected) {
  const oracle::Nb p{{0.5, 0.5}, {{0.0, 0.5}, {0.8, 0.45}}};
  EXPECT_THROW(nb_to_lr(p.model()), domain_error);
}

TEST(NbToLr, ConformsByEnumeration) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 8, K = 2 + rng() % 3;
    const auto p = oracle::random_nb(rng, n, K);
    const auto lr = nb_to_lr(p.model());
    EXPECT_LT(oracle_gap(p, lr), 1e-12);
    if (K > 2) {
      // Gauge: class 0 carries the zero row.
      EXPECT_EQ(lr.weights().row(0).cwiseAbs().maxCoeff(), 0.0);
    }
  }
}

TEST(LrToNb, ToyDistributions) {
  const auto lr = toy_lr();
  const std::vector<double> t1{0.8, 0.45}, t2{0.6, 0.9};
  for (const auto& [theta, ref] : {std::pair{t1, kP1}, std::pair{t2, kP2}}) {
    const auto nb = lr_to_nb(lr, theta);
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_NEAR(nb.prior(k), ref.prior[k], 0.005);
      for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(nb.cond(k, i), ref.cond[k][i], 0.005);
    }
  }
}

TEST(LrToNb, ZeroWeightsHalfTheta) {
  const auto lr = LogisticRegressionModel::binary(std::vector<double>(4, 0.0));
  const auto nb = lr_to_nb(lr, std::vector<double>(3, 0.5));
  EXPECT_DOUBLE_EQ(nb.prior(1), 0.5);
  EXPECT_EQ(nb.cond(), Eigen::MatrixXd::Constant(2, 3, 0.5));
}

TEST(LrToNb, ThetaMustBeInterior) {
  const auto lr = toy_lr();
  EXPECT_THROW(lr_to_nb(lr, std::vector<double>{1.0, 0.5}), domain_error);
  EXPECT_THROW(lr_to_nb(lr, std::vector<double>{0.0, 0.5}), domain_error);
  EXPECT_THROW(lr_to_nb(lr, std::vector<double>{0.5}), dimension_error);
}

TEST(LrToNb, DistinctThetasGiveDistinctConformingModels) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng() % 6;
    const auto lr = oracle::random_lr(rng, n, 2);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = u(rng), b[i] = u(rng);
    const auto pa = oracle::Nb::from(lr_to_nb(lr, a));
    const auto pb = oracle::Nb::from(lr_to_nb(lr, b));
    EXPECT_LT(oracle_gap(pa, lr), 1e-12);
    EXPECT_LT(oracle_gap(pb, lr), 1e-12);
    // Different joint distributions: some marginal differs.
    double diff = 0.0;
    oracle::for_each_completion(std::vector<int>(n, -1), [&](const std::vector<int>& x) {
      diff = std::max(diff, std::abs(oracle::marginal(pa, x) - oracle::marginal(pb, x)));
    });
    EXPECT_GT(diff, 1e-6);
  }
}

TEST(LrToNb, MulticlassConforms) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng() % 6, K = 3 + rng() % 2;
    const auto lr = oracle::random_lr(rng, n, K);
    std::vector<double> theta(n);
    for (double& v : theta) v = u(rng);
    const auto nb = lr_to_nb(lr, theta);
    EXPECT_TRUE(validate_nb(nb).ok());
    for (std::size_t i = 0; i < n; ++i) EXPECT_DOUBLE_EQ(nb.cond(0, i), theta[i]);
    EXPECT_TRUE(check_conformance(nb, lr, 1e-8).conforms);
    EXPECT_LT(oracle_gap(oracle::Nb::from(nb), lr), 1e-8);
  }
}

TEST(LrToNb, RoundTripRecoversRelativeWeights) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 10, K = 2 + rng() % 2;
    const auto lr = oracle::random_lr(rng, n, K);
    std::vector<double> theta(n);
    for (double& v : theta) v = u(rng);
    const auto back = nb_to_lr(lr_to_nb(lr, theta));
    for (std::size_t k = 1; k < K; ++k)
      EXPECT_LT((back.relative_weights(k) - lr.relative_weights(k)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(CheckConformance, Examples) {
  const auto nb = kP1.model();
  const auto lr = nb_to_lr(nb);
  EXPECT_TRUE(check_conformance(nb, lr, 1e-9).conforms);
  EXPECT_EQ(check_conformance(nb, lr, 1e-9).inputs_checked, 4u);

  oracle::Nb perturbed = kP1;
  perturbed.prior = {0.6, 0.4};
  EXPECT_FALSE(check_conformance(perturbed.model(), lr, 1e-3).conforms);

  const oracle::Nb uniform{{0.5, 0.5}, {{0.5, 0.5}, {0.5, 0.5}}};
  const auto zero = LogisticRegressionModel::binary(std::vector<double>(3, 0.0));
  EXPECT_TRUE(check_conformance(uniform.model(), zero, 0.0).conforms);
}

TEST(CheckConformance, RefusesLargeInputsUnlessSampled) {
  const std::size_t n = 21;
  const auto lr = LogisticRegressionModel::binary(std::vector<double>(n + 1, 0.1));
  const auto nb = lr_to_nb(lr, std::vector<double>(n, 0.3));
  EXPECT_THROW(check_conformance(nb, lr, 1e-9), dimension_error);
  ConformanceCheckOptions opts;
  opts.sampled = true;
  opts.num_samples = 2000;
  const auto r = check_conformance(nb, lr, 1e-9, opts);
  EXPECT_TRUE(r.conforms);
  EXPECT_EQ(r.inputs_checked, 2000u);
}

TEST(CheckConformance, DimensionMismatchThrows) {
  EXPECT_THROW(check_conformance(kP1.model(), LogisticRegressionModel::binary(std::vector<double>(4, 0.0)), 1e-9),
               dimension_error);
}
