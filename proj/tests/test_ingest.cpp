#include <gtest/gtest.h>

#include <random>

#include "nacl/ingest.hpp"
#include "oracles.hpp"

using namespace nacl;

namespace {

IngestSchema schema(std::vector<ColumnSpec> cols) {
  IngestSchema s;
  s.label = "y";
  s.columns = std::move(cols);
  return s;
}

}  // namespace

TEST(Csv, ParsesQuotesAndLineEndings) {
  const auto t = parse_csv("a,b,c\r\n1,\"x, y\",\"say \"\"hi\"\"\"\r\n2,,z\n");
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b", "c"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][1], "x, y");
  EXPECT_EQ(t.rows[0][2], "say \"hi\"");
  EXPECT_EQ(t.rows[1][1], "");
  EXPECT_THROW(parse_csv("a,b\n1\n"), dimension_error);
  EXPECT_THROW(parse_csv(""), dimension_error);
  EXPECT_THROW(parse_csv("a\n\"open\n"), dimension_error);
}

TEST(Binarize, ContinuousThreshold) {
  const auto t = parse_csv("v,y\n0,a\n10,b\n");
  const auto st = fit_binarization(t, schema({{"v", ColumnType::Continuous}}));
  EXPECT_DOUBLE_EQ(st.columns[0].mean, 5.0);
  EXPECT_DOUBLE_EQ(st.columns[0].std, 5.0);
  EXPECT_DOUBLE_EQ(st.columns[0].threshold, 5.25);
  const auto d = apply_binarization(t, st);
  EXPECT_EQ(d.rows, (std::vector<BitVector>{{0}, {1}}));
  EXPECT_EQ(*d.labels, (std::vector<std::size_t>{0, 1}));
}

TEST(Binarize, ConstantColumnIsAllZeros) {
  const auto t = parse_csv("v,y\n3,0\n3,1\n3,0\n");
  const auto d = apply_binarization(t, fit_binarization(t, schema({{"v", ColumnType::Continuous}})));
  for (const auto& r : d.rows) EXPECT_EQ(r[0], 0);
}

TEST(Binarize, CategoricalOneHotAndUnseenCategory) {
  const auto train = parse_csv("c,y\nb,0\na,1\nc,0\n");
  const auto st = fit_binarization(train, schema({{"c", ColumnType::Categorical}}));
  EXPECT_EQ(st.columns[0].categories, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(st.feature_names(), (std::vector<std::string>{"c=a", "c=b", "c=c"}));
  EXPECT_EQ(apply_binarization(train, st).rows[0], (BitVector{0, 1, 0}));

  std::vector<std::string> warnings;
  const auto d = apply_binarization(parse_csv("c\nd\n"), st, &warnings);
  EXPECT_EQ(d.rows[0], (BitVector{0, 0, 0}));
  EXPECT_FALSE(d.has_labels());
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("unseen category"), std::string::npos);
}

TEST(Binarize, BinaryPassThroughAndErrors) {
  const auto s = schema({{"b", ColumnType::Binary}, {"v", ColumnType::Continuous}});
  const auto t = parse_csv("b,v,y\n1,2.5,yes\n0,-1,no\n");
  const auto st = fit_binarization(t, s);
  EXPECT_EQ(st.classes, (std::vector<std::string>{"no", "yes"}));
  const auto d = apply_binarization(t, st);
  EXPECT_EQ(d.rows[0][0], 1);
  EXPECT_EQ(d.rows[1][0], 0);
  EXPECT_EQ(*d.labels, (std::vector<std::size_t>{1, 0}));

  EXPECT_THROW(fit_binarization(parse_csv("b,v,y\n2,1,a\n"), s), domain_error);
  EXPECT_THROW(fit_binarization(parse_csv("b,v,y\n1,,a\n"), s), domain_error);
  EXPECT_THROW(fit_binarization(parse_csv("b,v,y\n1,abc,a\n"), s), domain_error);
  EXPECT_THROW(fit_binarization(parse_csv("b,y\n1,a\n"), s), dimension_error);
  EXPECT_THROW(apply_binarization(parse_csv("b,v,y\n1,1,maybe\n"), st), domain_error);
}

TEST(Binarize, NumericLabelsSortNumerically) {
  const auto t = parse_csv("v,y\n1,10\n2,2\n3,0\n");
  const auto st = fit_binarization(t, schema({{"v", ColumnType::Continuous}}));
  EXPECT_EQ(st.classes, (std::vector<std::string>{"0", "2", "10"}));
}

TEST(Binarize, SchemaValidation) {
  EXPECT_THROW(schema_from_json(R"({"label":"y","columns":[{"name":"y","type":"binary"}]})"), dimension_error);
  EXPECT_THROW(schema_from_json(R"({"label":"y","columns":[{"name":"a","type":"ordinal"}]})"), std::invalid_argument);
  const auto s = schema_from_json(R"({"label":"y","threshold_sd":0.1,"columns":[{"name":"a","type":"categorical"}]})");
  EXPECT_EQ(s.threshold_sd, 0.1);
  EXPECT_EQ(s.columns[0].type, ColumnType::Categorical);
}

TEST(Binarize, StoredStatsReproduceTheEncoding) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 3.0);
  std::string train = "u,c,y\n", test = "u,c,y\n";
  for (int j = 0; j < 40; ++j) {
    train += std::to_string(g(rng)) + "," + "pqr"[j % 3] + "," + std::to_string(j % 2) + "\n";
    test += std::to_string(g(rng)) + "," + "pqs"[j % 3] + "," + std::to_string(j % 2) + "\n";
  }
  const auto s = schema({{"u", ColumnType::Continuous}, {"c", ColumnType::Categorical}});
  const auto st = fit_binarization(parse_csv(train), s);
  const auto reloaded = binarization_from_json(to_json(st));
  EXPECT_EQ(to_json(reloaded), to_json(st));
  const auto a = apply_binarization(parse_csv(test), st);
  const auto b = apply_binarization(parse_csv(test), reloaded);
  EXPECT_EQ(write_dataset(a), write_dataset(b));
}

TEST(DatasetFile, RoundTripIsBitIdentical) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 10; ++t) {
    auto d = oracle::sample(oracle::random_nb(rng, 1 + t, 2 + t % 2), 25, rng);
    if (t % 2) d.labels.reset();
    const std::string text = write_dataset(d);
    const auto back = read_dataset(text);
    EXPECT_EQ(back.rows, d.rows);
    EXPECT_EQ(back.labels, d.labels);
    EXPECT_EQ(write_dataset(back), text);
  }
}

TEST(DatasetFile, HeaderAndErrors) {
  BinaryDataset d;
  d.num_features = 2;
  d.rows = {{1, 0}};
  d.labels = std::vector<std::size_t>{1};
  EXPECT_EQ(write_dataset(d), "2,1,1\n1,0,1\n");
  EXPECT_THROW(read_dataset("2,2,0\n1,0\n"), dimension_error);
  EXPECT_THROW(read_dataset("2,1,0\n1,2\n"), domain_error);
  EXPECT_THROW(read_dataset("2,1\n"), dimension_error);
  EXPECT_THROW(read_dataset("2,1,0\n1,0,1\n"), dimension_error);
}

namespace {

BinaryDataset labelled(std::vector<BitVector> rows, std::vector<std::size_t> labels) {
  BinaryDataset d;
  d.num_features = rows.front().size();
  d.rows = std::move(rows);
  d.labels = std::move(labels);
  return d;
}

}  // namespace

TEST(TrainLr, SeparableDataGivesFiniteWeightsWithTheRightSign) {
  const auto d = labelled({{1}, {1}, {0}, {0}}, {1, 1, 0, 0});
  const auto r = train_lr(d);
  const double w1 = r.model.weights()(0, 1);
  EXPECT_TRUE(std::isfinite(w1));
  EXPECT_GT(w1, 0.0);
}

TEST(TrainLr, SymmetricDataHasZeroBias) {
  // Every input appears once with each label.
  const auto d = labelled({{1, 0}, {1, 0}, {0, 1}, {0, 1}, {1, 1}, {1, 1}, {0, 0}, {0, 0}}, {1, 0, 1, 0, 1, 0, 1, 0});
  const auto r = train_lr(d);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.model.weights()(0, 0), 0.0, 1e-4);
}

TEST(TrainLr, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  for (std::size_t K : {2u, 3u}) {
    auto d = oracle::sample(oracle::random_nb(rng, 4, K), 60, rng);
    const auto r = train_lr(d);
    Eigen::MatrixXd W = r.model.weights();
    // Perturb away from the optimum so the gradient is not ~0.
    W.array() += 0.3;
    Eigen::MatrixXd g;
    lr_objective(W, d, K, 1e-4, &g);
    for (Eigen::Index a = 0; a < W.rows(); ++a)
      for (Eigen::Index b = 0; b < W.cols(); ++b) {
        Eigen::MatrixXd up = W, dn = W;
        up(a, b) += 1e-6;
        dn(a, b) -= 1e-6;
        const double fd = (lr_objective(up, d, K, 1e-4) - lr_objective(dn, d, K, 1e-4)) / 2e-6;
        EXPECT_LE(std::abs(fd - g(a, b)), 1e-5 * std::max(std::abs(g(a, b)), 1e-3));
      }
  }
}

TEST(TrainLr, ConvergesOnNoisyData) {
  std::mt19937_64 rng(4);
  const auto d = oracle::sample(oracle::random_nb(rng, 6, 2), 400, rng);
  const auto r = train_lr(d);
  EXPECT_TRUE(r.converged);
  EXPECT_LT(r.grad_norm, 1e-6);
}

TEST(TrainLr, DegenerateAndUnlabelledData) {
  EXPECT_THROW(train_lr(labelled({{1}, {0}}, {1, 1})), numerical_error);
  BinaryDataset d = labelled({{1}, {0}}, {1, 0});
  d.labels.reset();
  EXPECT_THROW(train_lr(d), dimension_error);
}
