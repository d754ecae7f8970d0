#pragma once

// Sufficient explanations of binary logistic regression classifications,
// using expected predictions under a conformant naive Bayes model.
//
// Support features are those whose removal does not move the expected
// prediction toward the opposite class; the rest are opposing. A
// sufficient explanation is a smallest subset e of the support such that
// the observation e + opposing still lands on the same side of 0.5.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "nacl/expectation.hpp"
#include "nacl/model.hpp"
#include "nacl/model_io.hpp"

namespace nacl {

struct SupportPartition {
  std::vector<std::size_t> support;
  std::vector<std::size_t> opposing;
  double prediction = 0.0;  // F(x) for the positive class
};

namespace detail {

inline void require_binary_pair(const LogisticRegressionModel& lr, const NaiveBayesModel& nb, std::size_t n) {
  if (!lr.is_binary() || nb.num_classes() != 2) throw dimension_error("explanations support binary classifiers only");
  if (lr.num_features() != n || nb.num_features() != n) throw dimension_error("instance length does not match models");
}

inline double positive_expectation(const NaiveBayesModel& nb, std::span<const Bit> x,
                                   std::span<const std::size_t> features) {
  PartialObservation y;
  for (std::size_t i : features) y.set(i, x[i]);
  return expected_prediction(nb, y)[1];
}

inline int sign_around_half(double p) { return p > 0.5 ? 1 : (p < 0.5 ? -1 : 0); }

}  // namespace detail

inline SupportPartition partition_support(const LogisticRegressionModel& lr, const NaiveBayesModel& nb,
                                          std::span<const Bit> x) {
  detail::require_binary_pair(lr, nb, x.size());
  SupportPartition part;
  part.prediction = lr_predict(lr, x)[1];
  const PartialObservation full = PartialObservation::total(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = expected_prediction(nb, full.without(i))[1];
    const bool support = part.prediction >= 0.5 ? e <= part.prediction : e > part.prediction;
    (support ? part.support : part.opposing).push_back(i);
  }
  return part;
}

enum class SearchKind { ExactUpTo, Greedy };

struct SearchOptions {
  SearchKind kind = SearchKind::Greedy;
  std::size_t cap = 4;
};

// "greedy" or "exact:<cap>" ("exact" alone uses cap 4).
inline SearchOptions parse_search(const std::string& s) {
  if (s == "greedy") return {SearchKind::Greedy, 4};
  if (s == "exact") return {SearchKind::ExactUpTo, 4};
  if (s.rfind("exact:", 0) == 0) {
    std::size_t pos = 0;
    const auto cap = std::stoul(s.substr(6), &pos);
    if (pos != s.size() - 6) throw std::invalid_argument("bad search cap in '" + s + "'");
    return {SearchKind::ExactUpTo, cap};
  }
  throw std::invalid_argument("unknown search '" + s + "' (use greedy or exact:<cap>)");
}

enum class ExplainStatus { Found, NotFound };

struct Explanation {
  ExplainStatus status = ExplainStatus::NotFound;
  // Chosen support features, ascending. On NotFound, the best candidate seen.
  std::vector<std::size_t> features;
  // Expected positive-class prediction given features + opposing.
  double expectation = 0.0;
  SupportPartition partition;
};

inline Explanation sufficient_explanation(const LogisticRegressionModel& lr, const NaiveBayesModel& nb,
                                          std::span<const Bit> x, const SearchOptions& search = {}) {
  Explanation ex;
  ex.partition = partition_support(lr, nb, x);
  const auto& support = ex.partition.support;
  const auto& opposing = ex.partition.opposing;
  const int target = detail::sign_around_half(ex.partition.prediction);
  const double dir = ex.partition.prediction >= 0.5 ? 1.0 : -1.0;

  auto evaluate = [&](const std::vector<std::size_t>& chosen) {
    std::vector<std::size_t> obs = opposing;
    obs.insert(obs.end(), chosen.begin(), chosen.end());
    return detail::positive_expectation(nb, x, obs);
  };
  double best_margin = -std::numeric_limits<double>::infinity();
  auto consider = [&](const std::vector<std::size_t>& chosen, double e) {
    const double margin = dir * (e - 0.5);
    if (margin > best_margin) {
      best_margin = margin;
      ex.features = chosen;
      std::sort(ex.features.begin(), ex.features.end());
      ex.expectation = e;
    }
    return detail::sign_around_half(e) == target;
  };

  if (search.kind == SearchKind::ExactUpTo) {
    // Subsets by increasing size, each size in lexicographic order, so the
    // first hit is the lexicographically smallest minimal explanation.
    const std::size_t S = support.size();
    for (std::size_t size = 0; size <= std::min(search.cap, S); ++size) {
      std::vector<std::size_t> idx(size);
      for (std::size_t j = 0; j < size; ++j) idx[j] = j;
      for (;;) {
        std::vector<std::size_t> chosen(size);
        for (std::size_t j = 0; j < size; ++j) chosen[j] = support[idx[j]];
        if (consider(chosen, evaluate(chosen))) {
          ex.features = chosen;
          ex.expectation = evaluate(chosen);
          ex.status = ExplainStatus::Found;
          return ex;
        }
        // Next combination.
        std::size_t j = size;
        while (j > 0 && idx[j - 1] == S - size + j - 1) --j;
        if (j == 0) break;
        ++idx[j - 1];
        for (std::size_t t = j; t < size; ++t) idx[t] = idx[t - 1] + 1;
      }
    }
    return ex;
  }

  // Greedy: add support features by decreasing single-feature effect toward
  // the classification, then drop members that are not needed.
  const double base = evaluate({});
  if (consider({}, base)) {
    ex.features.clear();
    ex.expectation = base;
    ex.status = ExplainStatus::Found;
    return ex;
  }
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t f : support) order.emplace_back(dir * (evaluate({f}) - base), f);
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<std::size_t> chosen;
  bool found = false;
  for (const auto& [effect, f] : order) {
    chosen.push_back(f);
    if (consider(chosen, evaluate(chosen))) {
      found = true;
      break;
    }
  }
  if (!found) return ex;

  for (std::size_t j = chosen.size(); j-- > 0;) {
    std::vector<std::size_t> trial = chosen;
    trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(j));
    if (detail::sign_around_half(evaluate(trial)) == target) chosen = std::move(trial);
  }
  std::sort(chosen.begin(), chosen.end());
  ex.features = chosen;
  ex.expectation = evaluate(chosen);
  ex.status = ExplainStatus::Found;
  return ex;
}

// The k support features whose current value pushes the logit hardest
// toward the classification, |w_i| signed by that direction.
inline std::vector<std::size_t> top_k_by_weight(const LogisticRegressionModel& lr, std::span<const Bit> x,
                                                const SupportPartition& part, std::size_t k) {
  const Eigen::RowVectorXd w = lr.relative_weights(1);
  const double dir = part.prediction >= 0.5 ? 1.0 : -1.0;
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i : part.support) {
    const double wi = w(static_cast<Eigen::Index>(i + 1));
    scored.emplace_back(dir * wi * (x[i] ? 1.0 : -1.0), i);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < std::min(k, scored.size()); ++j) out.push_back(scored[j].second);
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

inline constexpr std::uint8_t kUnchosenGray = 128;

// Highlighted features show their true color (1 -> 255, 0 -> 0); all other
// pixels are mid-gray.
inline GrayImage render_grid(std::span<const Bit> x, std::span<const std::size_t> highlight, std::size_t width,
                             std::size_t height) {
  if (width * height != x.size()) throw dimension_error("width * height must equal the number of features");
  GrayImage img{width, height, std::vector<std::uint8_t>(x.size(), kUnchosenGray)};
  for (std::size_t i : highlight) {
    if (i >= x.size()) throw dimension_error("highlighted feature out of range");
    img.pixels[i] = x[i] ? 255 : 0;
  }
  return img;
}

// Binary PGM (P5), maxval 255.
inline std::string to_pgm(const GrayImage& img) {
  std::string s = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  s.append(img.pixels.begin(), img.pixels.end());
  return s;
}

inline void write_pgm(const std::string& path, const GrayImage& img) { write_text_file(path, to_pgm(img)); }

}  // namespace nacl
