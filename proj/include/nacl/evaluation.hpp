#pragma once

// Missing-feature experiments: MCAR masking, fidelity and accuracy metrics,
// and a runner comparing expected predictions against imputation.
//
// Masks come from a per-row random stream keyed by (seed, repetition, row),
// and every metric is reduced in row order, so reports do not depend on the
// number of worker threads.

#include <atomic>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "nacl/baselines.hpp"
#include "nacl/expectation.hpp"
#include "nacl/model.hpp"

namespace nacl {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 row_stream(std::uint64_t seed, std::uint64_t repetition, std::uint64_t row) {
  return std::mt19937_64(splitmix64(splitmix64(splitmix64(seed) ^ repetition) ^ row));
}

// Uniform in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline PartialObservation mask_mcar(std::span<const Bit> x, double rate, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw domain_error("missingness rate must lie in [0,1]");
  PartialObservation y;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(uniform01(rng) < rate)) y.set(i, x[i]);
  return y;
}

inline constexpr double kProbabilityFloor = 1e-12;

inline double cross_entropy(std::span<const double> p_ref, std::span<const double> p_pred) {
  if (p_ref.size() != p_pred.size()) throw dimension_error("distributions differ in length");
  double ce = 0.0;
  for (std::size_t k = 0; k < p_ref.size(); ++k)
    if (p_ref[k] > 0.0) ce -= p_ref[k] * std::log(std::max(p_pred[k], kProbabilityFloor));
  return ce;
}

inline double entropy(std::span<const double> p) { return cross_entropy(p, p); }

// Per-class F1 averaged with weights proportional to true-class support.
inline double weighted_f1(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                          std::size_t num_classes) {
  if (predicted.size() != truth.size()) throw dimension_error("label vectors differ in length");
  if (truth.empty()) return 0.0;
  std::vector<double> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0), support(num_classes, 0);
  for (std::size_t j = 0; j < truth.size(); ++j) {
    const std::size_t t = truth[j], p = predicted[j];
    if (t >= num_classes || p >= num_classes) throw dimension_error("label out of range");
    support[t] += 1;
    if (t == p) {
      tp[t] += 1;
    } else {
      fp[p] += 1;
      fn[t] += 1;
    }
  }
  double score = 0.0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (support[k] == 0) continue;
    const double denom = 2 * tp[k] + fp[k] + fn[k];
    const double f1 = denom > 0 ? 2 * tp[k] / denom : 0.0;
    score += f1 * support[k];
  }
  return score / static_cast<double>(truth.size());
}

// ---------------------------------------------------------------------------

// A way of predicting under missingness: expected prediction of a naive
// Bayes model, or imputation followed by the logistic regression.
struct EvalMethod {
  std::string name;
  std::variant<NaiveBayesModel, Imputer> model;
  // A conforming model's expectation at a total observation is the
  // classifier output itself; use it verbatim there.
  bool conforms_with_lr = false;
};

struct ExperimentConfig {
  LogisticRegressionModel lr;
  std::vector<EvalMethod> methods;
  std::vector<double> rates;
  std::size_t repetitions = 10;
  std::uint64_t seed = 0;
  BinaryDataset test;
  std::size_t threads = 1;
  // Emit rows for the bare classifier on fully observed inputs.
  bool include_reference = true;
  // Fail instead of silently skipping accuracy and F1 on unlabeled data.
  bool require_accuracy = false;
};

struct MetricSummary {
  std::string method;
  double rate = 0.0;
  std::string metric;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t repetitions = 0;
};

struct ExperimentReport {
  std::vector<MetricSummary> rows;

  const MetricSummary* find(const std::string& method, double rate, const std::string& metric) const {
    for (const auto& r : rows)
      if (r.method == method && r.rate == rate && r.metric == metric) return &r;
    return nullptr;
  }

  std::string to_csv() const {
    std::string s = "method,rate,metric,mean,stderr,repetitions\n";
    char buf[160];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, ",%.17g,%s,%.17g,%.17g,%zu\n", r.rate, r.metric.c_str(), r.mean, r.stderr_,
                    r.repetitions);
      s += r.method + buf;
    }
    return s;
  }

  std::string to_json() const {
    std::string s = "{\"results\":[";
    char buf[200];
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      std::snprintf(buf, sizeof buf, "\",\"rate\":%.17g,\"metric\":\"%s\",\"mean\":%.17g,\"stderr\":%.17g,\"repetitions\":%zu}",
                    r.rate, r.metric.c_str(), r.mean, r.stderr_, r.repetitions);
      s += (i ? ",{\"method\":\"" : "{\"method\":\"") + r.method + buf;
    }
    return s + "]}";
  }

  // One line per (method, metric), one column per rate.
  std::string to_table() const {
    std::vector<double> rates;
    std::vector<std::pair<std::string, std::string>> keys;
    for (const auto& r : rows) {
      if (std::find(rates.begin(), rates.end(), r.rate) == rates.end()) rates.push_back(r.rate);
      const auto key = std::make_pair(r.metric, r.method);
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
    std::ostringstream os;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-16s %-10s", "metric", "method");
    os << buf;
    for (double rt : rates) {
      std::snprintf(buf, sizeof buf, " %9.0f%%", rt * 100);
      os << buf;
    }
    os << '\n';
    for (const auto& [metric, method] : keys) {
      std::snprintf(buf, sizeof buf, "%-16s %-10s", metric.c_str(), method.c_str());
      os << buf;
      for (double rt : rates) {
        const auto* r = find(method, rt, metric);
        if (r)
          std::snprintf(buf, sizeof buf, " %10.4f", r->mean);
        else
          std::snprintf(buf, sizeof buf, " %10s", "-");
        os << buf;
      }
      os << '\n';
    }
    return os.str();
  }
};

namespace detail {

inline std::vector<double> predict_with(const EvalMethod& m, const LogisticRegressionModel& lr,
                                        const PartialObservation& y, std::span<const Bit> x) {
  if (const auto* nb = std::get_if<NaiveBayesModel>(&m.model)) {
    if (m.conforms_with_lr && y.size() == x.size()) return lr_predict(lr, x);
    return expected_prediction(*nb, y);
  }
  return lr_predict(lr, std::span<const double>(impute(std::get<Imputer>(m.model), y, x.size())));
}

struct RepetitionMetrics {
  double cross_entropy = 0.0;
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
};

inline void mean_and_stderr(const std::vector<double>& v, double& mean, double& se) {
  // Identical samples (rate 0) report the value itself and zero spread,
  // free of summation rounding.
  if (!v.empty() && std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) {
    mean = v.front();
    se = 0.0;
    return;
  }
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  se = 0.0;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
  }
}

}  // namespace detail

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  const auto& lr = cfg.lr;
  const auto& test = cfg.test;
  test.check();
  if (test.num_features != lr.num_features()) throw dimension_error("test data and classifier feature counts differ");
  if (test.empty()) throw dimension_error("test dataset is empty");
  if (cfg.repetitions == 0) throw domain_error("need at least one repetition");
  for (const auto& m : cfg.methods) {
    if (const auto* nb = std::get_if<NaiveBayesModel>(&m.model)) {
      if (nb->num_features() != lr.num_features() || nb->num_classes() != lr.num_classes())
        throw dimension_error("method '" + m.name + "' does not match the classifier dimensions");
    } else if (std::get<Imputer>(m.model).fill.size() != lr.num_features()) {
      throw dimension_error("imputer '" + m.name + "' does not match the classifier dimensions");
    }
  }
  for (double r : cfg.rates)
    if (!(r >= 0.0 && r <= 1.0)) throw domain_error("missingness rate must lie in [0,1]");

  const bool labelled = test.has_labels();
  if (cfg.require_accuracy && !labelled) throw dimension_error("accuracy requested but the test data has no labels");
  const std::size_t K = lr.num_classes();
  const std::size_t N = test.size();
  const std::size_t M = cfg.methods.size();

  // Full-data reference predictions.
  std::vector<std::vector<double>> reference(N);
  std::vector<std::size_t> ref_labels(N);
  for (std::size_t j = 0; j < N; ++j) {
    reference[j] = lr_predict(lr, std::span<const Bit>(test.rows[j]));
    ref_labels[j] = argmax(reference[j]);
  }

  const std::size_t R = cfg.repetitions;
  const std::size_t tasks = cfg.rates.size() * R;
  // results[task][method]
  std::vector<std::vector<detail::RepetitionMetrics>> results(tasks, std::vector<detail::RepetitionMetrics>(M));

  auto run_task = [&](std::size_t task) {
    const double rate = cfg.rates[task / R];
    const std::size_t rep = task % R;
    std::vector<double> ce(M, 0.0);
    std::vector<std::size_t> correct(M, 0);
    std::vector<std::vector<std::size_t>> predicted(M, std::vector<std::size_t>(N));
    for (std::size_t j = 0; j < N; ++j) {
      auto rng = row_stream(cfg.seed, rep, j);
      const PartialObservation y = mask_mcar(test.rows[j], rate, rng);
      for (std::size_t m = 0; m < M; ++m) {
        const auto p = detail::predict_with(cfg.methods[m], lr, y, test.rows[j]);
        ce[m] += cross_entropy(reference[j], p);
        predicted[m][j] = argmax(p);
        if (labelled && predicted[m][j] == (*test.labels)[j]) ++correct[m];
      }
    }
    for (std::size_t m = 0; m < M; ++m) {
      auto& out = results[task][m];
      out.cross_entropy = ce[m] / static_cast<double>(N);
      if (labelled) {
        out.accuracy = static_cast<double>(correct[m]) / static_cast<double>(N);
        out.weighted_f1 = weighted_f1(predicted[m], *test.labels, K);
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.threads, tasks));
  if (workers == 1) {
    for (std::size_t t = 0; t < tasks; ++t) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < tasks; t = next++) run_task(t);
      });
    for (auto& th : pool) th.join();
  }

  ExperimentReport report;
  auto emit = [&](const std::string& name, double rate, const char* metric, const std::vector<double>& vals) {
    MetricSummary s{name, rate, metric, 0.0, 0.0, vals.size()};
    detail::mean_and_stderr(vals, s.mean, s.stderr_);
    report.rows.push_back(std::move(s));
  };

  double ref_ce = 0.0, ref_acc = 0.0;
  for (std::size_t j = 0; j < N; ++j) {
    ref_ce += entropy(reference[j]);
    if (labelled && ref_labels[j] == (*test.labels)[j]) ref_acc += 1.0;
  }
  ref_ce /= static_cast<double>(N);
  ref_acc /= static_cast<double>(N);
  const double ref_f1 = labelled ? weighted_f1(ref_labels, *test.labels, K) : 0.0;

  for (std::size_t ri = 0; ri < cfg.rates.size(); ++ri) {
    const double rate = cfg.rates[ri];
    if (cfg.include_reference) {
      emit("lr", rate, "cross_entropy", std::vector<double>(R, ref_ce));
      if (labelled) {
        emit("lr", rate, "accuracy", std::vector<double>(R, ref_acc));
        emit("lr", rate, "weighted_f1", std::vector<double>(R, ref_f1));
      }
    }
    for (std::size_t m = 0; m < M; ++m) {
      std::vector<double> ce(R), acc(R), f1(R);
      for (std::size_t rep = 0; rep < R; ++rep) {
        const auto& r = results[ri * R + rep][m];
        ce[rep] = r.cross_entropy;
        acc[rep] = r.accuracy;
        f1[rep] = r.weighted_f1;
      }
      emit(cfg.methods[m].name, rate, "cross_entropy", ce);
      if (labelled) {
        emit(cfg.methods[m].name, rate, "accuracy", acc);
        emit(cfg.methods[m].name, rate, "weighted_f1", f1);
      }
    }
  }
  return report;
}

}  // namespace nacl
