#pragma once

// CSV ingestion, binarization, the dataset file format and LR training.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nacl/model.hpp"
#include "nacl/model_io.hpp"

namespace nacl {

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw dimension_error("CSV has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
  bool has_column(const std::string& name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
  }
};

// Comma separated, first line is the header. Double quotes enclose fields
// containing commas; "" inside quotes is a literal quote.
inline CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> lines;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, any = false;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    if (!(record.size() == 1 && record[0].empty())) lines.push_back(std::move(record));
    record.clear();
    any = false;
  };
  for (std::size_t p = 0; p < text.size(); ++p) {
    const char c = text[p];
    if (quoted) {
      if (c == '"') {
        if (p + 1 < text.size() && text[p + 1] == '"') {
          field += '"';
          ++p;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') quoted = true;
    else if (c == ',') record.push_back(std::exchange(field, {}));
    else if (c == '\n') end_record();
    else if (c != '\r') field += c;
  }
  if (quoted) throw dimension_error("CSV ends inside a quoted field");
  if (any || !field.empty() || !record.empty()) end_record();
  if (lines.empty()) throw dimension_error("CSV is empty");

  CsvTable t;
  t.header = std::move(lines.front());
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (lines[r].size() != t.header.size())
      throw dimension_error("CSV line " + std::to_string(r + 1) + " has " + std::to_string(lines[r].size()) +
                            " fields, expected " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(lines[r]));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Schema and binarization

enum class ColumnType { Binary, Categorical, Continuous };

inline const char* to_string(ColumnType t) {
  switch (t) {
    case ColumnType::Binary: return "binary";
    case ColumnType::Categorical: return "categorical";
    case ColumnType::Continuous: return "continuous";
  }
  return "?";
}

inline ColumnType column_type_from_string(const std::string& s) {
  if (s == "binary") return ColumnType::Binary;
  if (s == "categorical") return ColumnType::Categorical;
  if (s == "continuous") return ColumnType::Continuous;
  throw std::invalid_argument("unknown column type '" + s + "'");
}

struct ColumnSpec {
  std::string name;
  ColumnType type = ColumnType::Continuous;
};

struct IngestSchema {
  std::string label;
  double threshold_sd = 0.05;
  std::vector<ColumnSpec> columns;

  void check() const {
    if (label.empty()) throw dimension_error("schema needs a label column");
    if (columns.empty()) throw dimension_error("schema has no data columns");
    std::vector<std::string> names{label};
    for (const auto& c : columns) names.push_back(c.name);
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end())
      throw dimension_error("schema names a column twice (label included)");
    if (!std::isfinite(threshold_sd)) throw domain_error("threshold_sd must be finite");
  }
};

// {"label": "y", "threshold_sd": 0.05, "columns": [{"name": "a", "type": "continuous"}, ...]}
inline IngestSchema schema_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  IngestSchema s;
  s.label = j.at("label").get<std::string>();
  if (j.contains("threshold_sd")) s.threshold_sd = j.at("threshold_sd").get<double>();
  for (const auto& c : j.at("columns"))
    s.columns.push_back({c.at("name").get<std::string>(), column_type_from_string(c.at("type").get<std::string>())});
  s.check();
  return s;
}

struct ColumnStats {
  ColumnType type = ColumnType::Continuous;
  double mean = 0.0, std = 0.0, threshold = 0.0;  // continuous
  std::vector<std::string> categories;            // categorical, sorted
};

// Everything needed to binarize new data exactly like the training split.
struct BinarizationStats {
  IngestSchema schema;
  std::vector<ColumnStats> columns;
  std::vector<std::string> classes;  // label value of each class index

  std::size_t num_features() const {
    std::size_t n = 0;
    for (const auto& c : columns) n += c.type == ColumnType::Categorical ? c.categories.size() : 1;
    return n;
  }

  std::vector<std::string> feature_names() const {
    std::vector<std::string> out;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c].type == ColumnType::Categorical)
        for (const auto& v : columns[c].categories) out.push_back(schema.columns[c].name + "=" + v);
      else
        out.push_back(schema.columns[c].name);
    }
    return out;
  }
};

namespace detail {

inline bool is_missing(const std::string& s) { return s.empty() || s == "?" || s == "NA" || s == "nan"; }

inline double parse_number(const std::string& s, const std::string& column) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    throw domain_error("column '" + column + "': '" + s + "' is not a number");
  return v;
}

inline bool all_nonnegative_integers(const std::vector<std::string>& values) {
  return std::all_of(values.begin(), values.end(), [](const std::string& s) {
    return !s.empty() && s.size() < 10 && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  });
}

}  // namespace detail

// Fits thresholds, category lists and label classes on a training table.
inline BinarizationStats fit_binarization(const CsvTable& t, const IngestSchema& schema) {
  schema.check();
  if (t.rows.empty()) throw dimension_error("cannot fit binarization on an empty table");
  BinarizationStats st;
  st.schema = schema;
  for (const auto& spec : schema.columns) {
    const std::size_t col = t.column(spec.name);
    ColumnStats cs;
    cs.type = spec.type;
    for (const auto& r : t.rows)
      if (detail::is_missing(r[col])) throw domain_error("column '" + spec.name + "' has a missing value in training data");
    if (spec.type == ColumnType::Continuous) {
      double sum = 0.0;
      for (const auto& r : t.rows) sum += detail::parse_number(r[col], spec.name);
      cs.mean = sum / static_cast<double>(t.rows.size());
      double ss = 0.0;
      for (const auto& r : t.rows) {
        const double dv = detail::parse_number(r[col], spec.name) - cs.mean;
        ss += dv * dv;
      }
      cs.std = std::sqrt(ss / static_cast<double>(t.rows.size()));
      cs.threshold = cs.mean + schema.threshold_sd * cs.std;
    } else if (spec.type == ColumnType::Categorical) {
      for (const auto& r : t.rows) cs.categories.push_back(r[col]);
      std::sort(cs.categories.begin(), cs.categories.end());
      cs.categories.erase(std::unique(cs.categories.begin(), cs.categories.end()), cs.categories.end());
    } else {
      for (const auto& r : t.rows)
        if (r[col] != "0" && r[col] != "1")
          throw domain_error("binary column '" + spec.name + "' holds '" + r[col] + "'");
    }
    st.columns.push_back(std::move(cs));
  }

  const std::size_t lc = t.column(schema.label);
  for (const auto& r : t.rows) {
    if (detail::is_missing(r[lc])) throw domain_error("label column has a missing value");
    st.classes.push_back(r[lc]);
  }
  std::sort(st.classes.begin(), st.classes.end());
  st.classes.erase(std::unique(st.classes.begin(), st.classes.end()), st.classes.end());
  if (detail::all_nonnegative_integers(st.classes))
    std::stable_sort(st.classes.begin(), st.classes.end(),
                     [](const std::string& a, const std::string& b) { return std::stoul(a) < std::stoul(b); });
  return st;
}

// Applies frozen statistics. The label column is optional at this point;
// without it the dataset carries no labels.
inline BinaryDataset apply_binarization(const CsvTable& t, const BinarizationStats& st,
                                        std::vector<std::string>* warnings = nullptr) {
  const auto& schema = st.schema;
  BinaryDataset d;
  d.num_features = st.num_features();
  std::vector<std::size_t> cols;
  for (const auto& spec : schema.columns) cols.push_back(t.column(spec.name));
  const bool labelled = t.has_column(schema.label);
  const std::size_t lc = labelled ? t.column(schema.label) : 0;
  if (labelled) d.labels.emplace();

  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& raw = t.rows[r];
    BitVector bits;
    bits.reserve(d.num_features);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto& cs = st.columns[c];
      const auto& name = schema.columns[c].name;
      const std::string& v = raw[cols[c]];
      if (detail::is_missing(v))
        throw domain_error("row " + std::to_string(r + 1) + ", column '" + name + "': missing value");
      switch (cs.type) {
        case ColumnType::Continuous:
          bits.push_back(detail::parse_number(v, name) > cs.threshold ? 1 : 0);
          break;
        case ColumnType::Binary:
          if (v != "0" && v != "1") throw domain_error("binary column '" + name + "' holds '" + v + "'");
          bits.push_back(v == "1" ? 1 : 0);
          break;
        case ColumnType::Categorical: {
          const auto it = std::lower_bound(cs.categories.begin(), cs.categories.end(), v);
          const bool seen = it != cs.categories.end() && *it == v;
          if (!seen && warnings)
            warnings->push_back("row " + std::to_string(r + 1) + ", column '" + name + "': unseen category '" + v +
                                "' encoded as all zeros");
          for (auto k = cs.categories.begin(); k != cs.categories.end(); ++k) bits.push_back(seen && k == it ? 1 : 0);
          break;
        }
      }
    }
    d.rows.push_back(std::move(bits));
    if (labelled) {
      const auto it = std::find(st.classes.begin(), st.classes.end(), raw[lc]);
      if (it == st.classes.end())
        throw domain_error("row " + std::to_string(r + 1) + ": label '" + raw[lc] + "' was not seen in training");
      d.labels->push_back(static_cast<std::size_t>(it - st.classes.begin()));
    }
  }
  return d;
}

inline std::string to_json(const BinarizationStats& st) {
  using json_detail::number;
  std::string s = "{\"type\":\"binarization\",\"label\":" + nlohmann::json(st.schema.label).dump() +
                  ",\"threshold_sd\":" + number(st.schema.threshold_sd) + ",\"classes\":" +
                  nlohmann::json(st.classes).dump() + ",\"columns\":[";
  for (std::size_t c = 0; c < st.columns.size(); ++c) {
    const auto& cs = st.columns[c];
    if (c) s += ",";
    s += "{\"name\":" + nlohmann::json(st.schema.columns[c].name).dump() + ",\"type\":\"" + to_string(cs.type) + "\"";
    if (cs.type == ColumnType::Continuous)
      s += ",\"mean\":" + number(cs.mean) + ",\"std\":" + number(cs.std) + ",\"threshold\":" + number(cs.threshold);
    if (cs.type == ColumnType::Categorical) s += ",\"categories\":" + nlohmann::json(cs.categories).dump();
    s += "}";
  }
  return s + "]}";
}

inline BinarizationStats binarization_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("type").get<std::string>() != "binarization") throw dimension_error("not a binarization document");
  BinarizationStats st;
  st.schema.label = j.at("label").get<std::string>();
  st.schema.threshold_sd = j.at("threshold_sd").get<double>();
  st.classes = j.at("classes").get<std::vector<std::string>>();
  for (const auto& c : j.at("columns")) {
    ColumnStats cs;
    cs.type = column_type_from_string(c.at("type").get<std::string>());
    if (cs.type == ColumnType::Continuous) {
      cs.mean = c.at("mean").get<double>();
      cs.std = c.at("std").get<double>();
      cs.threshold = c.at("threshold").get<double>();
    }
    if (cs.type == ColumnType::Categorical) cs.categories = c.at("categories").get<std::vector<std::string>>();
    st.schema.columns.push_back({c.at("name").get<std::string>(), cs.type});
    st.columns.push_back(std::move(cs));
  }
  st.schema.check();
  return st;
}

// ---------------------------------------------------------------------------
// Dataset file: "n_features,n_rows,has_labels" then one line of bits per row,
// with the class index appended when labelled.

inline std::string write_dataset(const BinaryDataset& d) {
  d.check();
  if (d.weights) throw dimension_error("the dataset file format does not store row weights");
  std::string s = std::to_string(d.num_features) + "," + std::to_string(d.size()) + "," +
                  (d.has_labels() ? "1" : "0") + "\n";
  for (std::size_t j = 0; j < d.size(); ++j) {
    for (std::size_t i = 0; i < d.num_features; ++i) {
      if (i) s += ',';
      s += d.rows[j][i] ? '1' : '0';
    }
    if (d.labels) s += "," + std::to_string((*d.labels)[j]);
    s += '\n';
  }
  return s;
}

inline BinaryDataset read_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto fields = [](const std::string& l) {
    std::vector<std::string> f;
    std::string cur;
    for (char c : l) {
      if (c == ',') f.push_back(std::exchange(cur, {}));
      else if (c != '\r') cur += c;
    }
    f.push_back(cur);
    return f;
  };
  auto integer = [](const std::string& s, const char* what) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw dimension_error(std::string("dataset file: bad ") + what + " '" + s + "'");
    return v;
  };

  if (!std::getline(in, line)) throw dimension_error("dataset file is empty");
  const auto head = fields(line);
  if (head.size() != 3) throw dimension_error("dataset header must be n_features,n_rows,has_labels");
  BinaryDataset d;
  d.num_features = integer(head[0], "n_features");
  const std::size_t N = integer(head[1], "n_rows");
  const std::size_t has_labels = integer(head[2], "has_labels");
  if (has_labels > 1) throw dimension_error("dataset header: has_labels must be 0 or 1");
  if (has_labels) d.labels.emplace();

  const std::size_t width = d.num_features + has_labels;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = fields(line);
    if (f.size() != width)
      throw dimension_error("dataset row " + std::to_string(d.size() + 1) + " has " + std::to_string(f.size()) +
                            " fields, expected " + std::to_string(width));
    BitVector row(d.num_features);
    for (std::size_t i = 0; i < d.num_features; ++i) {
      if (f[i] != "0" && f[i] != "1") throw domain_error("dataset row " + std::to_string(d.size() + 1) + ": non-bit '" + f[i] + "'");
      row[i] = f[i] == "1" ? 1 : 0;
    }
    if (has_labels) d.labels->push_back(integer(f.back(), "label"));
    d.rows.push_back(std::move(row));
  }
  if (d.size() != N)
    throw dimension_error("dataset header promises " + std::to_string(N) + " rows, found " + std::to_string(d.size()));
  return d;
}

inline BinaryDataset load_dataset(const std::string& path) { return read_dataset(read_text_file(path)); }
inline void save_dataset(const std::string& path, const BinaryDataset& d) { write_text_file(path, write_dataset(d)); }

// ---------------------------------------------------------------------------
// Logistic regression training

struct LrTrainOptions {
  double l2 = 1e-4;  // on non-bias weights
  std::size_t max_epochs = 20000;
  double grad_tol = 1e-6;
  std::size_t num_classes = 0;  // 0: infer from labels
};

struct LrTrainResult {
  LogisticRegressionModel model;
  double loss = 0.0;
  double grad_norm = 0.0;
  std::size_t epochs = 0;
  bool converged = false;
};

// Weighted mean log-loss plus (l2/2)|W|^2 over non-bias weights. Parameters
// are laid out like LogisticRegressionModel::weights(): one row for binary
// problems, one per class otherwise.
inline double lr_objective(const Eigen::MatrixXd& W, const BinaryDataset& d, std::size_t num_classes, double l2,
                           Eigen::MatrixXd* grad = nullptr) {
  const auto n = static_cast<Eigen::Index>(d.num_features);
  const bool binary = num_classes == 2;
  if (W.cols() != n + 1 || W.rows() != (binary ? 1 : static_cast<Eigen::Index>(num_classes)))
    throw dimension_error("parameter matrix has the wrong shape");
  double total_w = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) total_w += d.weight(j);
  if (!(total_w > 0.0)) throw dimension_error("training data has zero total weight");

  if (grad) *grad = Eigen::MatrixXd::Zero(W.rows(), W.cols());
  double loss = 0.0;
  Eigen::VectorXd xv(n + 1);
  for (std::size_t j = 0; j < d.size(); ++j) {
    const double w = d.weight(j) / total_w;
    if (w == 0.0) continue;
    xv(0) = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) xv(i + 1) = d.rows[j][static_cast<std::size_t>(i)];
    const std::size_t y = (*d.labels)[j];
    if (binary) {
      const double z = W.row(0).dot(xv);
      // -log sigmoid(+-z)
      loss += w * (y == 1 ? softplus(-z) : softplus(z));
      if (grad) grad->row(0) += w * (sigmoid(z) - (y == 1 ? 1.0 : 0.0)) * xv.transpose();
    } else {
      const Eigen::VectorXd z = W * xv;
      const double lse = log_sum_exp(std::span<const double>(z.data(), static_cast<std::size_t>(z.size())));
      loss += w * (lse - z(static_cast<Eigen::Index>(y)));
      if (grad)
        for (Eigen::Index k = 0; k < W.rows(); ++k) {
          const double pk = std::exp(z(k) - lse) - (static_cast<std::size_t>(k) == y ? 1.0 : 0.0);
          grad->row(k) += w * pk * xv.transpose();
        }
    }
  }
  const auto body = W.rightCols(n);
  loss += 0.5 * l2 * body.squaredNorm();
  if (grad) grad->rightCols(n) += l2 * body;
  return loss;
}

// Deterministic full-batch gradient descent with Barzilai-Borwein steps and
// Armijo backtracking, started from zero.
inline LrTrainResult train_lr(const BinaryDataset& d, const LrTrainOptions& opts = {}) {
  d.check();
  if (!d.labels) throw dimension_error("training logistic regression needs labels");
  if (d.empty()) throw dimension_error("training data is empty");
  if (d.num_features < 1) throw dimension_error("training data has no features");
  if (opts.l2 < 0.0) throw domain_error("l2 must be nonnegative");
  std::size_t K = opts.num_classes;
  std::vector<double> class_w;
  for (std::size_t j = 0; j < d.size(); ++j) {
    const std::size_t c = (*d.labels)[j];
    if (c >= class_w.size()) class_w.resize(c + 1, 0.0);
    class_w[c] += d.weight(j);
  }
  if (opts.num_classes && class_w.size() > opts.num_classes) throw dimension_error("label exceeds num_classes");
  K = std::max({K, class_w.size(), std::size_t{2}});
  if (std::count_if(class_w.begin(), class_w.end(), [](double w) { return w > 0.0; }) < 2)
    throw numerical_error("degenerate training data: only one class is present");

  const auto rows = static_cast<Eigen::Index>(K == 2 ? 1 : K);
  const auto cols = static_cast<Eigen::Index>(d.num_features + 1);
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(rows, cols), g, W_prev, g_prev;
  double f = lr_objective(W, d, K, opts.l2, &g);
  double step = 1.0;
  LrTrainResult res;
  std::size_t epoch = 0;
  for (; epoch < opts.max_epochs; ++epoch) {
    if (g.norm() < opts.grad_tol) {
      res.converged = true;
      break;
    }
    if (epoch > 0) {
      const Eigen::MatrixXd s = W - W_prev, yv = g - g_prev;
      const double sy = (s.array() * yv.array()).sum();
      if (sy > 0.0) step = s.squaredNorm() / sy;
    }
    step = std::clamp(step, 1e-10, 1e6);
    Eigen::MatrixXd W_new, g_new;
    double f_new = 0.0;
    const double gg = g.squaredNorm();
    for (int bt = 0;; ++bt) {
      W_new = W - step * g;
      f_new = lr_objective(W_new, d, K, opts.l2, &g_new);
      if (f_new <= f - 1e-4 * step * gg || bt >= 60) break;
      step *= 0.5;
    }
    if (!(f_new <= f)) break;  // line search exhausted
    W_prev = std::move(W);
    g_prev = std::move(g);
    W = std::move(W_new);
    g = std::move(g_new);
    f = f_new;
  }
  res.model = LogisticRegressionModel(d.num_features, K, W);
  res.loss = f;
  res.grad_norm = g.norm();
  res.epochs = epoch;
  if (!res.converged && res.grad_norm < opts.grad_tol) res.converged = true;
  return res;
}

}  // namespace nacl
