#pragma once

// Geometric programs and a log-barrier solver.
//
//   minimize    f0(x)
//   subject to  f_i(x) <= 1   (posynomials)
//               g_j(x)  = 1   (monomials)
//
// With u = log x every monomial becomes affine in u and every posynomial
// becomes a log-sum-exp of affine functions, giving a convex program. The
// solver eliminates the affine equalities with a null-space basis
// (u = u_base + Z z) so they hold to machine precision, then runs a barrier
// method on the remaining log-sum-exp inequalities.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nacl/error.hpp"

namespace nacl::gp {

using VarId = std::size_t;

// b * prod_v x_v^{a_v}, with b > 0 stored as log b.
class Monomial {
 public:
  Monomial() = default;

  explicit Monomial(double coefficient, std::map<VarId, double> exponents = {})
      : exponents_(std::move(exponents)) {
    if (!(coefficient > 0.0) || !std::isfinite(coefficient))
      throw domain_error("monomial coefficient must be positive and finite");
    log_coefficient_ = std::log(coefficient);
    check_exponents();
  }

  static Monomial from_log_coefficient(double log_coefficient, std::map<VarId, double> exponents) {
    if (!std::isfinite(log_coefficient)) throw domain_error("monomial log-coefficient must be finite");
    Monomial m;
    m.log_coefficient_ = log_coefficient;
    m.exponents_ = std::move(exponents);
    m.check_exponents();
    return m;
  }

  double coefficient() const { return std::exp(log_coefficient_); }
  double log_coefficient() const { return log_coefficient_; }
  const std::map<VarId, double>& exponents() const { return exponents_; }

  double exponent(VarId v) const {
    auto it = exponents_.find(v);
    return it == exponents_.end() ? 0.0 : it->second;
  }

 private:
  void check_exponents() const {
    for (const auto& [v, a] : exponents_)
      if (!std::isfinite(a)) throw domain_error("monomial exponents must be finite");
  }

  double log_coefficient_ = 0.0;
  std::map<VarId, double> exponents_;
};

class Posynomial {
 public:
  Posynomial() = default;
  Posynomial(Monomial m) : terms_{std::move(m)} {}  // NOLINT(google-explicit-constructor)
  explicit Posynomial(std::vector<Monomial> terms) : terms_(std::move(terms)) {
    if (terms_.empty()) throw domain_error("posynomial needs at least one term");
  }

  const std::vector<Monomial>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }

  Posynomial& operator+=(const Monomial& m) {
    terms_.push_back(m);
    return *this;
  }

 private:
  std::vector<Monomial> terms_;
};

inline Posynomial operator+(Posynomial p, const Monomial& m) { return p += m; }
inline Posynomial operator+(const Monomial& a, const Monomial& b) { return Posynomial(std::vector<Monomial>{a, b}); }

class GeometricProgram {
 public:
  struct Inequality {
    Posynomial posynomial;
    std::string label;
  };
  struct Equality {
    Monomial monomial;
    std::string label;
  };

  VarId add_variable(std::string name) {
    names_.push_back(std::move(name));
    return names_.size() - 1;
  }

  std::size_t num_variables() const { return names_.size(); }
  const std::vector<std::string>& variable_names() const { return names_; }

  void set_objective(Posynomial objective) { objective_ = std::move(objective); }
  void add_inequality(Posynomial p, std::string label = {}) {
    if (p.terms().empty()) throw domain_error("inequality posynomial needs at least one term");
    inequalities_.push_back({std::move(p), std::move(label)});
  }
  void add_equality(Monomial m, std::string label = {}) { equalities_.push_back({std::move(m), std::move(label)}); }

  // Constant 1 when no objective was set.
  const Posynomial& objective() const { return objective_; }
  const std::vector<Inequality>& inequalities() const { return inequalities_; }
  const std::vector<Equality>& equalities() const { return equalities_; }

  void validate() const {
    auto check = [&](const Monomial& m) {
      for (const auto& [v, a] : m.exponents())
        if (v >= names_.size()) throw dimension_error("GP references undeclared variable " + std::to_string(v));
    };
    for (const auto& m : objective_.terms()) check(m);
    for (const auto& c : inequalities_)
      for (const auto& m : c.posynomial.terms()) check(m);
    for (const auto& c : equalities_) check(c.monomial);
  }

 private:
  std::vector<std::string> names_;
  Posynomial objective_{Monomial{}};
  std::vector<Inequality> inequalities_;
  std::vector<Equality> equalities_;
};

// ---------------------------------------------------------------------------
// Evaluation.

inline double eval_monomial(const Monomial& m, std::span<const double> values) {
  double s = m.log_coefficient();
  for (const auto& [v, a] : m.exponents()) {
    if (v >= values.size()) throw domain_error("variable " + std::to_string(v) + " is not assigned");
    const double x = values[v];
    if (!(x > 0.0)) throw domain_error("GP variables must be positive");
    s += a * std::log(x);
  }
  return std::exp(s);
}

inline double eval_posynomial(const Posynomial& p, std::span<const double> values) {
  double s = 0.0;
  for (const auto& m : p.terms()) s += eval_monomial(m, values);
  return s;
}

// ---------------------------------------------------------------------------
// Log-space convex form.

// log sum_t exp(A_t . u + b_t) <= 0
struct LogSumExpConstraint {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  std::string provenance;
};

struct LogConvexProgram {
  std::size_t num_vars = 0;
  // Set when a multi-term objective was moved into an epigraph constraint.
  std::optional<std::size_t> epigraph_var;
  // minimize objective . u + objective_offset
  Eigen::VectorXd objective;
  double objective_offset = 0.0;
  std::vector<LogSumExpConstraint> inequalities;
  // eq_matrix * u + eq_offset = 0
  Eigen::MatrixXd eq_matrix;
  Eigen::VectorXd eq_offset;
  std::vector<std::string> eq_provenance;
};

inline LogSumExpConstraint to_log_sum_exp(const Posynomial& p, std::size_t num_vars, std::string provenance) {
  LogSumExpConstraint c;
  const auto T = static_cast<Eigen::Index>(p.size());
  c.A = Eigen::MatrixXd::Zero(T, static_cast<Eigen::Index>(num_vars));
  c.b.resize(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& m = p.terms()[static_cast<std::size_t>(t)];
    c.b(t) = m.log_coefficient();
    for (const auto& [v, a] : m.exponents()) c.A(t, static_cast<Eigen::Index>(v)) += a;
  }
  c.provenance = std::move(provenance);
  return c;
}

inline LogConvexProgram to_log_convex(const GeometricProgram& gp) {
  gp.validate();
  LogConvexProgram lcp;
  const std::size_t n = gp.num_variables();
  const bool epigraph = gp.objective().size() > 1;
  lcp.num_vars = n + (epigraph ? 1 : 0);
  const auto N = static_cast<Eigen::Index>(lcp.num_vars);

  lcp.objective = Eigen::VectorXd::Zero(N);
  if (epigraph) {
    lcp.epigraph_var = n;
    lcp.objective(static_cast<Eigen::Index>(n)) = 1.0;
    // f0(x) / s <= 1
    LogSumExpConstraint c = to_log_sum_exp(gp.objective(), lcp.num_vars, "objective epigraph");
    c.A.col(static_cast<Eigen::Index>(n)).setConstant(-1.0);
    lcp.inequalities.push_back(std::move(c));
  } else {
    const Monomial& m = gp.objective().terms().front();
    lcp.objective_offset = m.log_coefficient();
    for (const auto& [v, a] : m.exponents()) lcp.objective(static_cast<Eigen::Index>(v)) += a;
  }

  for (std::size_t j = 0; j < gp.inequalities().size(); ++j) {
    const auto& c = gp.inequalities()[j];
    lcp.inequalities.push_back(
        to_log_sum_exp(c.posynomial, lcp.num_vars, c.label.empty() ? "inequality " + std::to_string(j) : c.label));
  }

  const auto p = static_cast<Eigen::Index>(gp.equalities().size());
  lcp.eq_matrix = Eigen::MatrixXd::Zero(p, N);
  lcp.eq_offset = Eigen::VectorXd::Zero(p);
  for (Eigen::Index r = 0; r < p; ++r) {
    const auto& e = gp.equalities()[static_cast<std::size_t>(r)];
    lcp.eq_offset(r) = e.monomial.log_coefficient();
    for (const auto& [v, a] : e.monomial.exponents()) lcp.eq_matrix(r, static_cast<Eigen::Index>(v)) += a;
    lcp.eq_provenance.push_back(e.label.empty() ? "equality " + std::to_string(r) : e.label);
  }
  return lcp;
}

// Value of log-sum-exp(A u + b); optionally its gradient and Hessian.
inline double log_sum_exp_eval(const LogSumExpConstraint& c, const Eigen::VectorXd& u, Eigen::VectorXd* grad = nullptr,
                               Eigen::MatrixXd* hess = nullptr) {
  const Eigen::VectorXd v = c.A * u + c.b;
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  Eigen::VectorXd p = (v.array() - m).exp().matrix();
  const double s = p.sum();
  p /= s;
  if (grad) *grad = c.A.transpose() * p;
  if (hess) {
    const Eigen::VectorXd Ap = c.A.transpose() * p;
    *hess = c.A.transpose() * p.asDiagonal() * c.A - Ap * Ap.transpose();
  }
  return m + std::log(s);
}

// ---------------------------------------------------------------------------
// Solver.

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIter };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "OPTIMAL";
    case SolveStatus::Infeasible: return "INFEASIBLE";
    case SolveStatus::Unbounded: return "UNBOUNDED";
    case SolveStatus::MaxIter: return "MAX_ITER";
  }
  return "?";
}

// Half-width, in log space, of the box phase I searches for a feasible point.
inline constexpr double kPhaseOneBox = 100.0;

struct SolverOptions {
  // Cap on Newton steps across both phases.
  std::size_t max_iter = 2000;
  // Stop when the duality-gap estimate m / t drops below tol.
  double tol = 1e-8;
  double mu0 = 1.0;
  double mu_factor = 10.0;
  // Strictly positive starting values, one per GP variable. Projected onto
  // the equality constraints; a phase-I search runs if it is not strictly
  // feasible for the inequalities.
  std::optional<std::vector<double>> initial_point;
};

struct KktResiduals {
  double equality = 0.0;      // max |log g_j(x)|
  double inequality = 0.0;    // max_i f_i(x) - 1
  double stationarity = 0.0;  // inf-norm of the reduced Lagrangian gradient
  double duality_gap = 0.0;   // m / t
};

struct GpSolution {
  SolveStatus status = SolveStatus::MaxIter;
  std::vector<double> values;
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::size_t iterations = 0;
  KktResiduals kkt;
  std::vector<double> inequality_values;
};

namespace detail {

// minimize c . z  s.t.  lse_j(z) <= 0
struct BarrierProblem {
  Eigen::VectorXd c;
  std::vector<LogSumExpConstraint> cons;
};

struct BarrierState {
  Eigen::VectorXd z;
  double t = 1.0;
  std::size_t steps = 0;
  SolveStatus status = SolveStatus::MaxIter;
  bool stopped_early = false;
};

inline double barrier_value(const BarrierProblem& bp, const Eigen::VectorXd& z, double t) {
  double phi = t * bp.c.dot(z);
  for (const auto& c : bp.cons) {
    const double h = log_sum_exp_eval(c, z);
    if (!(h < 0.0)) return std::numeric_limits<double>::infinity();
    phi -= std::log(-h);
  }
  return phi;
}

inline Eigen::VectorXd newton_direction(Eigen::MatrixXd H, const Eigen::VectorXd& g) {
  double ridge = 0.0;
  const double scale = 1.0 + H.diagonal().cwiseAbs().maxCoeff();
  for (int attempt = 0; attempt < 30; ++attempt) {
    Eigen::MatrixXd Hr = H;
    if (ridge > 0) Hr.diagonal().array() += ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(Hr);
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd dz = llt.solve(-g);
      if (dz.allFinite()) return dz;
    }
    ridge = ridge == 0.0 ? 1e-12 * scale : ridge * 10.0;
  }
  return -g;
}

// Barrier method from a strictly feasible z0. early_stop, when given, is
// checked after every Newton step.
inline BarrierState run_barrier(const BarrierProblem& bp, Eigen::VectorXd z0, const SolverOptions& opts,
                                std::size_t step_budget,
                                const std::function<bool(const Eigen::VectorXd&)>& early_stop = {}) {
  constexpr double kNewtonTol = 1e-10;
  constexpr double kDivergence = 1e12;
  BarrierState st;
  st.z = std::move(z0);
  st.t = 1.0 / opts.mu0;
  const auto d = st.z.size();
  const double m = static_cast<double>(bp.cons.size());

  if (bp.cons.empty()) {
    st.status = bp.c.cwiseAbs().maxCoeff() <= 1e-14 || d == 0 ? SolveStatus::Optimal : SolveStatus::Unbounded;
    return st;
  }
  if (d == 0) {
    st.status = SolveStatus::Optimal;
    return st;
  }

  for (;;) {
    // Centering.
    for (std::size_t inner = 0; inner < 200; ++inner) {
      if (st.steps >= step_budget) {
        st.status = SolveStatus::MaxIter;
        return st;
      }
      Eigen::VectorXd grad = st.t * bp.c;
      Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d, d);
      Eigen::VectorXd gj;
      Eigen::MatrixXd Hj;
      for (const auto& c : bp.cons) {
        const double h = log_sum_exp_eval(c, st.z, &gj, &Hj);
        const double inv = 1.0 / (-h);
        grad += inv * gj;
        H += (inv * inv) * gj * gj.transpose() + inv * Hj;
      }
      const Eigen::VectorXd dz = newton_direction(H, grad);
      const double decrement2 = -grad.dot(dz);
      if (decrement2 / 2.0 <= kNewtonTol) break;

      const double phi0 = barrier_value(bp, st.z, st.t);
      double s = 1.0;
      Eigen::VectorXd trial;
      bool accepted = false;
      for (int ls = 0; ls < 80; ++ls) {
        trial = st.z + s * dz;
        const double phi = barrier_value(bp, trial, st.t);
        if (std::isfinite(phi) && phi <= phi0 - 0.25 * s * decrement2) {
          accepted = true;
          break;
        }
        s *= 0.5;
      }
      ++st.steps;
      if (!accepted) break;
      st.z = trial;
      if (!st.z.allFinite() || st.z.cwiseAbs().maxCoeff() > kDivergence) {
        st.status = SolveStatus::Unbounded;
        return st;
      }
      if (early_stop && early_stop(st.z)) {
        st.stopped_early = true;
        st.status = SolveStatus::Optimal;
        return st;
      }
    }
    if (m / st.t < opts.tol) {
      st.status = SolveStatus::Optimal;
      return st;
    }
    st.t *= opts.mu_factor;
  }
}

}  // namespace detail

inline GpSolution solve_gp(const GeometricProgram& gp, const SolverOptions& opts = {}) {
  const LogConvexProgram lcp = to_log_convex(gp);
  const auto N = static_cast<Eigen::Index>(lcp.num_vars);
  const std::size_t nvars = gp.num_variables();
  GpSolution sol;

  // Starting point in log space.
  Eigen::VectorXd u0 = Eigen::VectorXd::Zero(N);
  if (opts.initial_point) {
    if (opts.initial_point->size() != nvars) throw dimension_error("initial point must assign every GP variable");
    for (std::size_t v = 0; v < nvars; ++v) {
      const double x = (*opts.initial_point)[v];
      if (!(x > 0.0) || !std::isfinite(x)) throw domain_error("initial point must be strictly positive");
      u0(static_cast<Eigen::Index>(v)) = std::log(x);
    }
  }
  if (lcp.epigraph_var) {
    // Start the epigraph variable above the objective value.
    const auto& epi = lcp.inequalities.front();
    Eigen::VectorXd tmp = u0;
    tmp(static_cast<Eigen::Index>(*lcp.epigraph_var)) = 0.0;
    u0(static_cast<Eigen::Index>(*lcp.epigraph_var)) = log_sum_exp_eval(epi, tmp) + 1.0;
  }

  // Equality elimination: u = u_base + Z z.
  Eigen::VectorXd u_base = u0;
  Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(N, N);
  if (lcp.eq_matrix.rows() > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(lcp.eq_matrix, Eigen::ComputeFullU | Eigen::ComputeFullV);
    svd.setThreshold(1e-12 * static_cast<double>(N));
    const Eigen::Index rank = svd.rank();
    const Eigen::VectorXd residual0 = lcp.eq_matrix * u0 + lcp.eq_offset;
    u_base = u0 - svd.solve(residual0);
    const double res = (lcp.eq_matrix * u_base + lcp.eq_offset).cwiseAbs().maxCoeff();
    if (res > 1e-8 * (1.0 + lcp.eq_offset.cwiseAbs().maxCoeff())) {
      sol.status = SolveStatus::Infeasible;
      return sol;
    }
    Z = svd.matrixV().rightCols(N - rank);
  }

  // Reduced problem data.
  detail::BarrierProblem bp;
  bp.c = Z.transpose() * lcp.objective;
  for (const auto& c : lcp.inequalities)
    bp.cons.push_back({c.A * Z, c.A * u_base + c.b, c.provenance});

  Eigen::VectorXd z = Eigen::VectorXd::Zero(Z.cols());
  auto max_h = [&](const Eigen::VectorXd& zz) {
    double mh = -std::numeric_limits<double>::infinity();
    for (const auto& c : bp.cons) mh = std::max(mh, log_sum_exp_eval(c, zz));
    return mh;
  };

  std::size_t used = 0;
  if (!bp.cons.empty() && !(max_h(z) < 0.0)) {
    // Phase I: minimize s s.t. lse_j(z) - s <= 0, s >= -1.
    detail::BarrierProblem p1;
    const auto d = Z.cols();
    p1.c = Eigen::VectorXd::Zero(d + 1);
    p1.c(d) = 1.0;
    for (const auto& c : bp.cons) {
      LogSumExpConstraint e;
      e.A.resize(c.A.rows(), d + 1);
      e.A.leftCols(d) = c.A;
      e.A.col(d).setConstant(-1.0);
      e.b = c.b;
      p1.cons.push_back(std::move(e));
    }
    LogSumExpConstraint floor;
    floor.A = Eigen::MatrixXd::Zero(1, d + 1);
    floor.A(0, d) = -1.0;
    floor.b = Eigen::VectorXd::Constant(1, -1.0);
    p1.cons.push_back(std::move(floor));
    // Box |z_j| <= R. Without it the barrier can run off along a feasible
    // ray that the objective ignores.
    const double R = kPhaseOneBox + (z.size() ? z.cwiseAbs().maxCoeff() : 0.0);
    for (Eigen::Index j = 0; j < d; ++j)
      for (double sgn : {1.0, -1.0}) {
        LogSumExpConstraint box;
        box.A = Eigen::MatrixXd::Zero(1, d + 1);
        box.A(0, j) = sgn;
        box.b = Eigen::VectorXd::Constant(1, -R);
        p1.cons.push_back(std::move(box));
      }

    Eigen::VectorXd w(d + 1);
    w.head(d) = z;
    w(d) = max_h(z) + 1.0;
    auto st = detail::run_barrier(p1, w, opts, opts.max_iter,
                                  [d](const Eigen::VectorXd& ww) { return ww(d) <= -0.5; });
    used += st.steps;
    if (st.status == SolveStatus::MaxIter) {
      sol.status = SolveStatus::MaxIter;
      sol.iterations = used;
      return sol;
    }
    if (!(st.z(d) < 0.0) || !(max_h(st.z.head(d)) < 0.0)) {
      sol.status = SolveStatus::Infeasible;
      sol.iterations = used;
      return sol;
    }
    z = st.z.head(d);
  }

  auto st = detail::run_barrier(bp, z, opts, opts.max_iter > used ? opts.max_iter - used : 0);
  used += st.steps;
  sol.status = st.status;
  sol.iterations = used;

  const Eigen::VectorXd u = u_base + Z * st.z;
  sol.values.resize(nvars);
  for (std::size_t v = 0; v < nvars; ++v) sol.values[v] = std::exp(u(static_cast<Eigen::Index>(v)));
  for (double x : sol.values)
    if (!(x > 0.0) || !std::isfinite(x)) {
      sol.status = SolveStatus::Unbounded;
      return sol;
    }

  sol.objective = eval_posynomial(gp.objective(), sol.values);
  sol.kkt.equality = lcp.eq_matrix.rows() ? (lcp.eq_matrix * u + lcp.eq_offset).cwiseAbs().maxCoeff() : 0.0;
  sol.kkt.inequality = -std::numeric_limits<double>::infinity();
  for (const auto& c : gp.inequalities()) {
    const double val = eval_posynomial(c.posynomial, sol.values);
    sol.inequality_values.push_back(val);
    sol.kkt.inequality = std::max(sol.kkt.inequality, val - 1.0);
  }
  if (gp.inequalities().empty()) sol.kkt.inequality = 0.0;
  Eigen::VectorXd stat = bp.c;
  Eigen::VectorXd gj;
  for (const auto& c : bp.cons) {
    const double h = log_sum_exp_eval(c, st.z, &gj);
    stat += (1.0 / (st.t * -h)) * gj;
  }
  sol.kkt.stationarity = stat.size() ? stat.cwiseAbs().maxCoeff() : 0.0;
  sol.kkt.duality_gap = static_cast<double>(bp.cons.size()) / st.t;
  return sol;
}

// ---------------------------------------------------------------------------
// Debug dump: one item per line.
//
//   variables <name0> <name1> ...
//   minimize <posynomial>
//   <posynomial> <= 1        # label
//   <monomial> == 1          # label
//
// A monomial prints as "coef*name^exp*name^exp"; terms of a posynomial are
// joined with " + ".

inline std::string to_text(const Monomial& m, const std::vector<std::string>& names) {
  std::ostringstream os;
  os.precision(17);
  os << m.coefficient();
  for (const auto& [v, a] : m.exponents()) os << '*' << (v < names.size() ? names[v] : "?") << '^' << a;
  return os.str();
}

inline std::string to_text(const Posynomial& p, const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (t) s += " + ";
    s += to_text(p.terms()[t], names);
  }
  return s;
}

inline std::string to_text(const GeometricProgram& gp) {
  const auto& names = gp.variable_names();
  std::string s = "variables";
  for (const auto& n : names) s += ' ' + n;
  s += "\nminimize " + to_text(gp.objective(), names) + '\n';
  for (const auto& c : gp.inequalities()) s += to_text(c.posynomial, names) + " <= 1  # " + c.label + '\n';
  for (const auto& c : gp.equalities()) s += to_text(c.monomial, names) + " == 1  # " + c.label + '\n';
  return s;
}

}  // namespace nacl::gp
