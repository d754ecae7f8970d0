#pragma once

// Naive conformant learning: the maximum-likelihood naive Bayes model among
// those that conform with a given logistic regression.
//
// Two solvers ship:
//   * Gp       - the geometric program over all NB parameters, with the
//                conformance equalities and relaxed sum-to-one inequalities,
//                solved by nacl::gp::solve_gp.
//   * Reduced  - the conformant family parameterized by the pinned-class
//                conditionals theta (see lr_to_nb), maximizing the marginal
//                log-likelihood by projected gradient ascent.

#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nacl/conformance.hpp"
#include "nacl/gp.hpp"
#include "nacl/model.hpp"

namespace nacl {

enum class AlphaPolicy { LrPosterior, Uniform };
enum class FitMethod { Gp, Reduced };

inline const char* to_string(AlphaPolicy a) { return a == AlphaPolicy::LrPosterior ? "posterior" : "uniform"; }
inline const char* to_string(FitMethod m) { return m == FitMethod::Gp ? "gp" : "reduced"; }

// Distinct rows with their summed weights, in lexicographic row order.
struct AggregatedRows {
  std::vector<BitVector> rows;
  std::vector<double> counts;
  double total() const {
    double s = 0.0;
    for (double c : counts) s += c;
    return s;
  }
};

inline AggregatedRows aggregate_rows(const BinaryDataset& d) {
  d.check();
  std::map<BitVector, double> counts;
  for (std::size_t j = 0; j < d.size(); ++j) counts[d.rows[j]] += d.weight(j);
  AggregatedRows out;
  for (auto& [row, c] : counts) {
    if (c <= 0.0) continue;
    out.rows.push_back(row);
    out.counts.push_back(c);
  }
  return out;
}

// Every row expanded into one weighted copy per class. Row weights of d, if
// any, scale the per-class weights.
inline BinaryDataset completed_dataset(const BinaryDataset& d, const LogisticRegressionModel& lr, AlphaPolicy policy) {
  d.check();
  if (d.num_features != lr.num_features()) throw dimension_error("dataset and classifier feature counts differ");
  const std::size_t K = lr.num_classes();
  BinaryDataset out;
  out.num_features = d.num_features;
  out.labels.emplace();
  out.weights.emplace();
  for (std::size_t j = 0; j < d.size(); ++j) {
    std::vector<double> alpha(K, 1.0 / static_cast<double>(K));
    if (policy == AlphaPolicy::LrPosterior) alpha = lr_predict(lr, std::span<const Bit>(d.rows[j]));
    for (std::size_t k = 0; k < K; ++k) {
      out.rows.push_back(d.rows[j]);
      out.labels->push_back(k);
      out.weights->push_back(alpha[k] * d.weight(j));
    }
  }
  return out;
}

// Variable ids of the NaCL geometric program: K class priors, then for
// each class k and feature i the pair (theta_{x_i|c_k}, theta_{x̄_i|c_k}).
struct NaclVariables {
  std::size_t num_classes = 0;
  std::size_t num_features = 0;
  gp::VarId prior(std::size_t k) const { return k; }
  gp::VarId pos(std::size_t k, std::size_t i) const { return num_classes + 2 * (k * num_features + i); }
  gp::VarId neg(std::size_t k, std::size_t i) const { return pos(k, i) + 1; }
  std::size_t count() const { return num_classes + 2 * num_classes * num_features; }
};

struct NaclProgram {
  gp::GeometricProgram program;
  NaclVariables vars;
  // The first num_sum_constraints inequalities are the sum-to-one
  // relaxations; any clamp constraints follow.
  std::size_t num_sum_constraints = 0;
};

// The NaCL geometric program. With clamp_eps set, adds
// eps * theta^{-1} <= 1 for both parameters of the pinned class, boxing
// theta into [eps, 1 - eps] once the sums are tight.
inline NaclProgram build_nacl_program(const LogisticRegressionModel& lr, const BinaryDataset& d, AlphaPolicy policy,
                                      std::optional<double> clamp_eps = std::nullopt) {
  d.check();
  if (d.num_features != lr.num_features()) throw dimension_error("dataset and classifier feature counts differ");
  const std::size_t n = lr.num_features();
  const std::size_t K = lr.num_classes();

  NaclProgram np;
  np.vars = {K, n};
  const NaclVariables& v = np.vars;
  gp::GeometricProgram& g = np.program;
  for (std::size_t k = 0; k < K; ++k) g.add_variable("theta_c" + std::to_string(k));
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < n; ++i) {
      g.add_variable("theta_x" + std::to_string(i) + "|c" + std::to_string(k));
      g.add_variable("theta_notx" + std::to_string(i) + "|c" + std::to_string(k));
    }

  // Objective: prod over the completed dataset of (theta_c prod theta_x|c)^-alpha.
  const AggregatedRows agg = aggregate_rows(d);
  std::vector<double> expo(v.count(), 0.0);
  for (std::size_t j = 0; j < agg.rows.size(); ++j) {
    const BitVector& x = agg.rows[j];
    std::vector<double> alpha(K, 1.0 / static_cast<double>(K));
    if (policy == AlphaPolicy::LrPosterior) alpha = lr_predict(lr, std::span<const Bit>(x));
    for (std::size_t k = 0; k < K; ++k) {
      const double a = agg.counts[j] * alpha[k];
      expo[v.prior(k)] -= a;
      for (std::size_t i = 0; i < n; ++i) expo[x[i] ? v.pos(k, i) : v.neg(k, i)] -= a;
    }
  }
  std::map<gp::VarId, double> obj;
  for (gp::VarId id = 0; id < expo.size(); ++id)
    if (expo[id] != 0.0) obj[id] = expo[id];
  g.set_objective(gp::Monomial(1.0, std::move(obj)));

  // Sum-to-one relaxations.
  {
    std::vector<gp::Monomial> terms;
    for (std::size_t k = 0; k < K; ++k) terms.emplace_back(1.0, std::map<gp::VarId, double>{{v.prior(k), 1.0}});
    g.add_inequality(gp::Posynomial(std::move(terms)), "sum of class priors <= 1");
  }
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < n; ++i)
      g.add_inequality(gp::Monomial(1.0, {{v.pos(k, i), 1.0}}) + gp::Monomial(1.0, {{v.neg(k, i), 1.0}}),
                       "theta_x" + std::to_string(i) + "|c" + std::to_string(k) + " + theta_notx" +
                           std::to_string(i) + "|c" + std::to_string(k) + " <= 1");
  np.num_sum_constraints = g.inequalities().size();

  if (clamp_eps) {
    if (!(*clamp_eps > 0.0 && *clamp_eps < 0.5)) throw domain_error("clamp_eps must lie in (0, 0.5)");
    const std::size_t r = pinned_class(K);
    for (std::size_t i = 0; i < n; ++i) {
      g.add_inequality(gp::Monomial(*clamp_eps, {{v.pos(r, i), -1.0}}), "clamp low x" + std::to_string(i));
      g.add_inequality(gp::Monomial(*clamp_eps, {{v.neg(r, i), -1.0}}), "clamp high x" + std::to_string(i));
    }
  }

  // Conformance equalities against class 0.
  for (std::size_t k = 1; k < K; ++k) {
    const Eigen::RowVectorXd w = lr.relative_weights(k);
    std::map<gp::VarId, double> bias{{v.prior(k), -1.0}, {v.prior(0), 1.0}};
    for (std::size_t i = 0; i < n; ++i) {
      bias[v.neg(k, i)] = -1.0;
      bias[v.neg(0, i)] = 1.0;
    }
    g.add_equality(gp::Monomial::from_log_coefficient(w(0), std::move(bias)),
                   "bias weight of class " + std::to_string(k));
    for (std::size_t i = 0; i < n; ++i) {
      std::map<gp::VarId, double> e{
          {v.pos(k, i), -1.0}, {v.neg(k, i), 1.0}, {v.pos(0, i), 1.0}, {v.neg(0, i), -1.0}};
      g.add_equality(gp::Monomial::from_log_coefficient(w(static_cast<Eigen::Index>(i + 1)), std::move(e)),
                     "weight " + std::to_string(i + 1) + " of class " + std::to_string(k));
    }
  }
  return np;
}

// ---------------------------------------------------------------------------

struct NaclOptions {
  FitMethod method = FitMethod::Reduced;
  AlphaPolicy alpha_policy = AlphaPolicy::LrPosterior;
  double clamp_eps = 1e-4;
  gp::SolverOptions solver;
  // Projected gradient ascent (Reduced).
  std::size_t max_iter = 20000;
  double tol = 1e-11;
};

struct FitReport {
  FitMethod method = FitMethod::Reduced;
  AlphaPolicy alpha_policy = AlphaPolicy::LrPosterior;
  double log_likelihood = 0.0;
  std::size_t iterations = 0;
  double conformance_max_dev = 0.0;
  bool active_inequalities = true;
  std::string solver_status = "OPTIMAL";
  std::vector<std::string> warnings;
};

struct NaclFit {
  NaiveBayesModel model;
  FitReport report;
};

class nacl_solver_error : public numerical_error {
 public:
  nacl_solver_error(const std::string& what, gp::SolveStatus status, std::optional<NaiveBayesModel> best)
      : numerical_error(what), status_(status), best_(std::move(best)) {}
  gp::SolveStatus status() const { return status_; }
  const std::optional<NaiveBayesModel>& best_iterate() const { return best_; }

 private:
  gp::SolveStatus status_;
  std::optional<NaiveBayesModel> best_;
};

namespace detail {

// Marginal log-likelihood of the conformant model lr_to_nb(lr, sigmoid(l)),
// per unit of data weight and up to an additive constant:
//
//   f(l) = sum_i mean_i * l_i - logsumexp_k( b_k + sum_i softplus(l_i + D_ki) )
//
// with b_k the relative bias of class k and D_ki = d_ki - d_ri. Its gradient
// is mean_i - sum_k P(c_k) P(x_i = 1 | c_k): data moments minus model moments.
class ReducedObjective {
 public:
  ReducedObjective(const LogisticRegressionModel& lr, std::vector<double> means) : means_(std::move(means)) {
    const std::size_t K = lr.num_classes(), n = lr.num_features();
    const std::size_t r = pinned_class(K);
    const Eigen::RowVectorXd wr = lr.relative_weights(r);
    bias_.resize(K);
    shift_ = Eigen::MatrixXd(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < K; ++k) {
      const Eigen::RowVectorXd wk = lr.relative_weights(k);
      bias_[k] = wk(0);
      for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i + 1);
        shift_(static_cast<Eigen::Index>(k), ii - 1) = wk(ii) - wr(ii);
      }
    }
  }

  double value(const std::vector<double>& l, std::vector<double>* grad = nullptr) const {
    const std::size_t K = bias_.size(), n = means_.size();
    std::vector<double> g(K);
    for (std::size_t k = 0; k < K; ++k) {
      double s = bias_[k];
      for (std::size_t i = 0; i < n; ++i) s += softplus(l[i] + shift_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)));
      g[k] = s;
    }
    const double lse = log_sum_exp(g);
    double f = -lse;
    for (std::size_t i = 0; i < n; ++i) f += means_[i] * l[i];
    if (grad) {
      grad->assign(n, 0.0);
      for (std::size_t k = 0; k < K; ++k) {
        const double pk = std::exp(g[k] - lse);
        for (std::size_t i = 0; i < n; ++i)
          (*grad)[i] -= pk * sigmoid(l[i] + shift_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)));
      }
      for (std::size_t i = 0; i < n; ++i) (*grad)[i] += means_[i];
    }
    return f;
  }

 private:
  std::vector<double> means_;
  std::vector<double> bias_;
  Eigen::MatrixXd shift_;
};

inline std::vector<double> column_means(const AggregatedRows& agg, std::size_t n) {
  std::vector<double> m(n, 0.0);
  const double total = agg.total();
  for (std::size_t j = 0; j < agg.rows.size(); ++j)
    for (std::size_t i = 0; i < n; ++i)
      if (agg.rows[j][i]) m[i] += agg.counts[j];
  for (double& x : m) x /= total;
  return m;
}

struct ReducedResult {
  std::vector<double> theta;
  std::size_t iterations = 0;
};

inline ReducedResult fit_reduced(const LogisticRegressionModel& lr, const AggregatedRows& agg, const NaclOptions& opts) {
  const std::size_t n = lr.num_features();
  const ReducedObjective f(lr, column_means(agg, n));
  const double lo = logit(opts.clamp_eps), hi = logit(1.0 - opts.clamp_eps);
  auto clip = [&](std::vector<double>& l) {
    for (double& x : l) x = std::clamp(x, lo, hi);
  };

  std::vector<double> l(n, 0.0), g, cand(n), gc;
  clip(l);
  double fl = f.value(l, &g);
  double step = 1.0;
  std::size_t it = 0;
  for (; it < opts.max_iter; ++it) {
    double pg = 0.0;
    for (std::size_t i = 0; i < n; ++i) pg = std::max(pg, std::abs(std::clamp(l[i] + g[i], lo, hi) - l[i]));
    if (pg < opts.tol) break;

    bool accepted = false;
    double fc = 0.0;
    for (int ls = 0; ls < 60; ++ls) {
      double ascent = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        cand[i] = std::clamp(l[i] + step * g[i], lo, hi);
        ascent += g[i] * (cand[i] - l[i]);
      }
      fc = f.value(cand, &gc);
      if (fc >= fl + 1e-4 * ascent) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    // Barzilai-Borwein step for the next iteration.
    double ss = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = cand[i] - l[i];
      ss += s * s;
      sy -= s * (gc[i] - g[i]);
    }
    step = sy > 0.0 ? std::clamp(ss / sy, 1e-10, 1e10) : std::min(step * 2.0, 1e10);
    l.swap(cand);
    g.swap(gc);
    fl = fc;
  }

  ReducedResult out;
  out.iterations = it;
  out.theta.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.theta[i] = std::clamp(sigmoid(l[i]), opts.clamp_eps, 1.0 - opts.clamp_eps);
  return out;
}

inline double aggregated_log_likelihood(const NaiveBayesModel& nb, const AggregatedRows& agg) {
  double ll = 0.0;
  for (std::size_t j = 0; j < agg.rows.size(); ++j) ll += agg.counts[j] * nb_log_marginal(nb, agg.rows[j]);
  return ll;
}

inline double conformance_deviation(const NaiveBayesModel& nb, const LogisticRegressionModel& lr) {
  ConformanceCheckOptions co;
  if (nb.num_features() > co.max_exhaustive_features) {
    co.sampled = true;
    co.num_samples = 4096;
  }
  return check_conformance(nb, lr, 0.0, co).max_deviation;
}

}  // namespace detail

inline NaclFit fit_nacl(const LogisticRegressionModel& lr, const BinaryDataset& d, const NaclOptions& opts = {}) {
  d.check();
  if (d.num_features != lr.num_features()) throw dimension_error("dataset and classifier feature counts differ");
  if (!(opts.clamp_eps > 0.0 && opts.clamp_eps < 0.5)) throw domain_error("clamp_eps must lie in (0, 0.5)");
  const std::size_t n = lr.num_features();
  const std::size_t K = lr.num_classes();

  NaclFit fit;
  fit.report.method = opts.method;
  fit.report.alpha_policy = opts.alpha_policy;

  const AggregatedRows agg = aggregate_rows(d);
  if (agg.rows.empty()) {
    fit.model = lr_to_nb(lr, std::vector<double>(n, 0.5));
    fit.report.warnings.push_back("empty dataset: returning the conformant model with theta = 0.5");
    fit.report.conformance_max_dev = detail::conformance_deviation(fit.model, lr);
    return fit;
  }

  if (opts.method == FitMethod::Reduced) {
    const auto res = detail::fit_reduced(lr, agg, opts);
    fit.model = lr_to_nb(lr, res.theta);
    fit.report.iterations = res.iterations;
    if (res.iterations >= opts.max_iter) {
      fit.report.solver_status = "MAX_ITER";
      fit.report.warnings.push_back("projected gradient ascent hit the iteration cap");
    }
  } else {
    NaclProgram np = build_nacl_program(lr, d, opts.alpha_policy, opts.clamp_eps);
    const NaclVariables& v = np.vars;
    // Strictly feasible start: the theta = 0.5 conformant model shrunk
    // uniformly, which leaves every equality unchanged.
    const NaiveBayesModel start = lr_to_nb(lr, std::vector<double>(n, 0.5));
    constexpr double kShrink = 1.0 - 1e-3;
    std::vector<double> seed(v.count());
    for (std::size_t k = 0; k < K; ++k) {
      seed[v.prior(k)] = start.prior(k) * kShrink;
      for (std::size_t i = 0; i < n; ++i) {
        seed[v.pos(k, i)] = start.cond(k, i) * kShrink;
        seed[v.neg(k, i)] = (1.0 - start.cond(k, i)) * kShrink;
      }
    }
    gp::SolverOptions so = opts.solver;
    so.initial_point = std::move(seed);
    const gp::GpSolution sol = gp::solve_gp(np.program, so);
    fit.report.iterations = sol.iterations;
    fit.report.solver_status = gp::to_string(sol.status);

    std::optional<NaiveBayesModel> read;
    if (sol.values.size() == v.count()) {
      const std::size_t r = pinned_class(K);
      std::vector<double> theta(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double a = sol.values[v.pos(r, i)], b = sol.values[v.neg(r, i)];
        theta[i] = std::clamp(a / (a + b), opts.clamp_eps, 1.0 - opts.clamp_eps);
      }
      read = lr_to_nb(lr, theta);
    }
    if (sol.status != gp::SolveStatus::Optimal || !read)
      throw nacl_solver_error(std::string("NaCL geometric program failed: ") + gp::to_string(sol.status), sol.status,
                              read);
    fit.model = std::move(*read);
    for (std::size_t j = 0; j < np.num_sum_constraints; ++j)
      if (sol.inequality_values[j] < 1.0 - 1e-6) fit.report.active_inequalities = false;
  }

  fit.report.log_likelihood = detail::aggregated_log_likelihood(fit.model, agg);
  fit.report.conformance_max_dev = detail::conformance_deviation(fit.model, lr);
  return fit;
}

inline std::string to_json(const FitReport& r) {
  char ll[40], dev[40];
  std::snprintf(ll, sizeof ll, "%.17g", r.log_likelihood);
  std::snprintf(dev, sizeof dev, "%.17g", r.conformance_max_dev);
  std::string s = std::string("{\"method\":\"") + to_string(r.method) + "\",\"alpha_policy\":\"" +
                  to_string(r.alpha_policy) + "\",\"log_likelihood\":" + ll +
                  ",\"iterations\":" + std::to_string(r.iterations) + ",\"conformance_max_dev\":" + dev +
                  ",\"active_inequalities\":" + (r.active_inequalities ? "true" : "false") + "}";
  return s;
}

}  // namespace nacl
