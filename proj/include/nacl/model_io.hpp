#pragma once

// JSON persistence for models.
//
//   LR: {"type":"lr","num_features":n,"num_classes":K,"weights":[[...],...]}
//   NB: {"type":"nb","num_features":n,"num_classes":K,"prior":[...],"cond":[[...],...]}
//
// Field order is fixed and every number is written with 17 significant
// digits so that a write/read cycle reproduces the doubles exactly.

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <variant>

#include "json.hpp"
#include "nacl/model.hpp"

namespace nacl {

namespace json_detail {

inline std::string number(double v) {
  if (!std::isfinite(v)) throw domain_error("cannot serialize a non-finite number");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string array(std::span<const double> v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += number(v[i]);
  }
  return s + "]";
}

inline std::string matrix(const Eigen::MatrixXd& m) {
  std::string s = "[";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (r) s += ',';
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    s += array(row);
  }
  return s + "]";
}

inline Eigen::MatrixXd read_matrix(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw dimension_error(std::string(what) + " must be a nonempty array of rows");
  const std::size_t cols = j.at(0).size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw dimension_error(std::string(what) + " rows differ in length");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace json_detail

inline std::string to_json(const LogisticRegressionModel& lr) {
  return "{\"type\":\"lr\",\"num_features\":" + std::to_string(lr.num_features()) +
         ",\"num_classes\":" + std::to_string(lr.num_classes()) +
         ",\"weights\":" + json_detail::matrix(lr.weights()) + "}";
}

inline std::string to_json(const NaiveBayesModel& nb) {
  return "{\"type\":\"nb\",\"num_features\":" + std::to_string(nb.num_features()) +
         ",\"num_classes\":" + std::to_string(nb.num_classes()) +
         ",\"prior\":" + json_detail::array(nb.class_prior()) +
         ",\"cond\":" + json_detail::matrix(nb.cond()) + "}";
}

using AnyModel = std::variant<LogisticRegressionModel, NaiveBayesModel>;

inline AnyModel model_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  const auto n = j.at("num_features").get<std::size_t>();
  const auto k = j.at("num_classes").get<std::size_t>();
  if (type == "lr") {
    return LogisticRegressionModel(n, k, json_detail::read_matrix(j.at("weights"), "weights"));
  }
  if (type == "nb") {
    auto prior = j.at("prior").get<std::vector<double>>();
    if (prior.size() != k) throw dimension_error("prior length does not match num_classes");
    NaiveBayesModel nb(std::move(prior), json_detail::read_matrix(j.at("cond"), "cond"));
    if (nb.num_features() != n) throw dimension_error("cond width does not match num_features");
    return nb;
  }
  throw dimension_error("unknown model type '" + type + "'");
}

inline AnyModel model_from_json(const std::string& text) { return model_from_json(nlohmann::json::parse(text)); }

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

inline AnyModel load_model(const std::string& path) { return model_from_json(read_text_file(path)); }

template <class Model>
Model load_model_as(const std::string& path) {
  AnyModel m = load_model(path);
  if (auto* p = std::get_if<Model>(&m)) return std::move(*p);
  throw dimension_error(path + ": model has the wrong type");
}

inline void save_model(const std::string& path, const LogisticRegressionModel& lr) {
  write_text_file(path, to_json(lr) + "\n");
}
inline void save_model(const std::string& path, const NaiveBayesModel& nb) {
  write_text_file(path, to_json(nb) + "\n");
}

}  // namespace nacl
