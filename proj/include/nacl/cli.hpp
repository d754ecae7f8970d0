#pragma once

// Command-line front end. Exit codes: 0 success, 1 user error (bad flags,
// unreadable or malformed input), 2 numerical failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "nacl/baselines.hpp"
#include "nacl/conformance.hpp"
#include "nacl/evaluation.hpp"
#include "nacl/explain.hpp"
#include "nacl/ingest.hpp"
#include "nacl/model_io.hpp"
#include "nacl/nacl.hpp"

namespace nacl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUser = 1;
inline constexpr int kExitNumerical = 2;

// Worker count from NACL_THREADS, else the machine's parallelism.
inline std::size_t threads_from_env() {
  if (const char* v = std::getenv("NACL_THREADS"); v && *v) {
    char* end = nullptr;
    const long t = std::strtol(v, &end, 10);
    if (*end != '\0' || t < 1) throw std::invalid_argument(std::string("NACL_THREADS must be a positive integer, got '") + v + "'");
    return static_cast<std::size_t>(t);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace cli_detail {

inline std::string fmt17(double v) { return json_detail::number(v); }

inline std::string join_indices(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") out << text;
  else write_text_file(path, text);
}

struct IngestArgs {
  std::string csv, schema, out, stats_out, stats_in;
};

inline int run_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err) {
  const CsvTable table = parse_csv(read_text_file(a.csv));
  BinarizationStats stats;
  if (!a.stats_in.empty()) {
    if (!a.schema.empty()) throw std::invalid_argument("--schema and --stats-in are mutually exclusive");
    stats = binarization_from_json(read_text_file(a.stats_in));
  } else {
    if (a.schema.empty()) throw std::invalid_argument("ingest needs --schema or --stats-in");
    stats = fit_binarization(table, schema_from_json(read_text_file(a.schema)));
  }
  std::vector<std::string> warnings;
  const BinaryDataset d = apply_binarization(table, stats, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  save_dataset(a.out, d);
  if (!a.stats_out.empty()) write_text_file(a.stats_out, to_json(stats) + "\n");
  out << "wrote " << d.size() << " rows with " << d.num_features << " features"
      << (d.has_labels() ? " and labels" : "") << " to " << a.out << '\n';
  return kExitOk;
}

struct TrainArgs {
  std::string data, out;
  LrTrainOptions opts;
};

inline int run_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const BinaryDataset d = load_dataset(a.data);
  const LrTrainResult r = train_lr(d, a.opts);
  save_model(a.out, r.model);
  if (!r.converged) err << "warning: stopped after " << r.epochs << " epochs with gradient norm " << r.grad_norm << '\n';
  out << "loss " << fmt17(r.loss) << "\nepochs " << r.epochs << "\ngradient_norm " << fmt17(r.grad_norm) << '\n';
  return kExitOk;
}

struct FitArgs {
  std::string lr, data, out, report, method = "reduced", alpha = "posterior";
};

inline NaclOptions fit_options(const std::string& method, const std::string& alpha) {
  NaclOptions o;
  o.method = method == "gp" ? FitMethod::Gp : FitMethod::Reduced;
  o.alpha_policy = alpha == "uniform" ? AlphaPolicy::Uniform : AlphaPolicy::LrPosterior;
  return o;
}

inline int run_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  const auto lr = load_model_as<LogisticRegressionModel>(a.lr);
  const BinaryDataset d = load_dataset(a.data);
  const NaclFit fit = fit_nacl(lr, d, fit_options(a.method, a.alpha));
  for (const auto& w : fit.report.warnings) err << "warning: " << w << '\n';
  save_model(a.out, fit.model);
  emit(a.report, to_json(fit.report) + "\n", out);
  return kExitOk;
}

struct EvalArgs {
  std::string lr, test, train, nb, csv_out, json_out;
  std::vector<double> rates{0.0, 0.2, 0.4, 0.6, 0.8};
  std::vector<std::string> methods{"nacl", "mean"};
  std::size_t reps = 10;
  std::uint64_t seed = 0;
  bool table = false;
};

inline int run_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  cfg.lr = load_model_as<LogisticRegressionModel>(a.lr);
  cfg.test = load_dataset(a.test);
  cfg.rates = a.rates;
  cfg.repetitions = a.reps;
  cfg.seed = a.seed;
  cfg.threads = threads_from_env();

  std::optional<BinaryDataset> train;
  auto need_train = [&](const std::string& why) -> const BinaryDataset& {
    if (!train) {
      if (a.train.empty()) throw std::invalid_argument("method '" + why + "' needs --train");
      train = load_dataset(a.train);
    }
    return *train;
  };
  for (const auto& m : a.methods) {
    if (m == "nacl") {
      if (!a.nb.empty()) {
        cfg.methods.push_back({m, load_model_as<NaiveBayesModel>(a.nb), true});
      } else {
        NaclFit fit = fit_nacl(cfg.lr, need_train(m));
        for (const auto& w : fit.report.warnings) err << "warning: " << w << '\n';
        cfg.methods.push_back({m, std::move(fit.model), true});
      }
    } else if (m == "mlnb") {
      cfg.methods.push_back({m, fit_ml_nb(need_train(m), 1.0, cfg.lr.num_classes()), false});
    } else {
      cfg.methods.push_back({m, fit_imputer(need_train(m), imputer_kind_from_string(m)), false});
    }
  }

  const ExperimentReport report = run_experiment(cfg);
  if (a.csv_out.empty() && a.json_out.empty() && !a.table) out << report.to_csv();
  if (!a.csv_out.empty()) emit(a.csv_out, report.to_csv(), out);
  if (!a.json_out.empty()) emit(a.json_out, report.to_json() + "\n", out);
  if (a.table) out << report.to_table();
  return kExitOk;
}

struct ExplainArgs {
  std::string lr, nb, data, search = "greedy", image_out;
  std::size_t index = 0, width = 0, height = 0;
};

inline int run_explain(const ExplainArgs& a, std::ostream& out, std::ostream&) {
  const auto lr = load_model_as<LogisticRegressionModel>(a.lr);
  const auto nb = load_model_as<NaiveBayesModel>(a.nb);
  const BinaryDataset d = load_dataset(a.data);
  if (a.index >= d.size())
    throw std::invalid_argument("--index " + std::to_string(a.index) + " is out of range for " +
                                std::to_string(d.size()) + " rows");
  const SearchOptions search = parse_search(a.search);
  const BitVector& x = d.rows[a.index];
  const Explanation ex = sufficient_explanation(lr, nb, x, search);

  auto line = [&](const char* key, const std::string& value) {
    out << key << (value.empty() ? "" : " ") << value << '\n';
  };
  line("index", std::to_string(a.index));
  line("prediction", fmt17(ex.partition.prediction));
  line("support", join_indices(ex.partition.support));
  line("opposing", join_indices(ex.partition.opposing));
  line("status", ex.status == ExplainStatus::Found ? "found" : "not_found");
  line("explanation", join_indices(ex.features));
  line("expectation", fmt17(ex.expectation));

  if (!a.image_out.empty()) {
    std::size_t w = a.width, h = a.height;
    if (w == 0 && h == 0) {
      // Square by default.
      w = h = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(x.size()))));
    } else if (w == 0) {
      w = h ? x.size() / h : 0;
    } else if (h == 0) {
      h = x.size() / w;
    }
    write_pgm(a.image_out, render_grid(x, ex.features, w, h));
  }
  return kExitOk;
}

struct ConvertArgs {
  std::string in, out;
  bool to_lr = false, to_nb = false;
  std::vector<double> theta;
};

inline int run_convert(const ConvertArgs& a, std::ostream& out, std::ostream&) {
  const AnyModel m = load_model(a.in);
  if (a.to_lr) {
    const auto* nb = std::get_if<NaiveBayesModel>(&m);
    if (!nb) throw std::invalid_argument("--to-lr needs a naive Bayes input");
    emit(a.out, to_json(nb_to_lr(*nb)) + "\n", out);
    return kExitOk;
  }
  if (a.to_nb) {
    const auto* lr = std::get_if<LogisticRegressionModel>(&m);
    if (!lr) throw std::invalid_argument("--to-nb needs a logistic regression input");
    std::vector<double> theta = a.theta;
    if (theta.empty()) theta.assign(lr->num_features(), 0.5);
    emit(a.out, to_json(lr_to_nb(*lr, theta)) + "\n", out);
    return kExitOk;
  }

  if (const auto* lr = std::get_if<LogisticRegressionModel>(&m)) {
    out << "type lr\nnum_features " << lr->num_features() << "\nnum_classes " << lr->num_classes() << '\n';
    for (std::size_t k = 1; k < lr->num_classes(); ++k) {
      const Eigen::RowVectorXd w = lr->relative_weights(k);
      out << "relative_weights " << k;
      for (Eigen::Index i = 0; i < w.size(); ++i) out << ' ' << fmt17(w(i));
      out << '\n';
    }
  } else {
    const auto& nb = std::get<NaiveBayesModel>(m);
    out << "type nb\nnum_features " << nb.num_features() << "\nnum_classes " << nb.num_classes() << '\n';
    const ValidationReport v = validate_nb(nb);
    out << "valid " << (v.ok() ? "yes" : "no") << '\n';
    for (const auto& s : v.violations) out << "violation " << s << '\n';
    if (v.ok()) {
      const auto lr = nb_to_lr(nb);
      for (std::size_t k = 1; k < lr.num_classes(); ++k) {
        const Eigen::RowVectorXd w = lr.relative_weights(k);
        out << "equivalent_lr " << k;
        for (Eigen::Index i = 0; i < w.size(); ++i) out << ' ' << fmt17(w(i));
        out << '\n';
      }
    }
  }
  return kExitOk;
}

}  // namespace cli_detail

inline int cli_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"Conformant naive Bayes for logistic regression under missing features", "nacl"};
  app.require_subcommand(1);

  IngestArgs ia;
  auto* ingest = app.add_subcommand("ingest", "Binarize a CSV into a dataset file");
  ingest->add_option("--csv", ia.csv, "Raw CSV with a header line")->required();
  ingest->add_option("--schema", ia.schema, "Schema JSON (fits statistics on this CSV)");
  ingest->add_option("--stats-in", ia.stats_in, "Reuse binarization statistics from an earlier ingest");
  ingest->add_option("--stats-out", ia.stats_out, "Write the fitted statistics here");
  ingest->add_option("--out", ia.out, "Dataset file to write")->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train-lr", "Train a logistic regression classifier");
  train->add_option("--data", ta.data, "Labelled dataset file")->required();
  train->add_option("--out", ta.out, "Model JSON to write")->required();
  train->add_option("--l2", ta.opts.l2, "L2 penalty on non-bias weights")->capture_default_str();
  train->add_option("--max-epochs", ta.opts.max_epochs, "Epoch cap")->capture_default_str();
  train->add_option("--classes", ta.opts.num_classes, "Number of classes (default: from labels)");

  FitArgs fa;
  auto* fit = app.add_subcommand("nacl-fit", "Learn the naive Bayes model conformant with a classifier");
  fit->add_option("--lr", fa.lr, "Logistic regression JSON")->required();
  fit->add_option("--data", fa.data, "Training dataset file")->required();
  fit->add_option("--out", fa.out, "Naive Bayes JSON to write")->required();
  fit->add_option("--method", fa.method, "gp or reduced")->check(CLI::IsMember({"gp", "reduced"}))->capture_default_str();
  fit->add_option("--alpha", fa.alpha, "Label weights of the completed data: posterior or uniform")
      ->check(CLI::IsMember({"posterior", "uniform"}))
      ->capture_default_str();
  fit->add_option("--report", fa.report, "Write the fit report JSON here (default: stdout)");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Benchmark predictions under random missingness");
  eval->add_option("--lr", ea.lr, "Logistic regression JSON")->required();
  eval->add_option("--test", ea.test, "Test dataset file")->required();
  eval->add_option("--train", ea.train, "Training dataset (imputers, mlnb, and nacl without --nb)");
  eval->add_option("--nb", ea.nb, "Conformant naive Bayes JSON used by the nacl method");
  eval->add_option("--rates", ea.rates, "Comma-separated missingness rates")->delimiter(',')->capture_default_str();
  eval->add_option("--reps", ea.reps, "Repetitions per rate")->capture_default_str();
  eval->add_option("--seed", ea.seed, "Masking seed")->capture_default_str();
  eval->add_option("--methods", ea.methods, "Comma-separated: nacl, mlnb, mean, median, min, max")
      ->delimiter(',')
      ->check(CLI::IsMember({"nacl", "mlnb", "mean", "median", "min", "max"}))
      ->capture_default_str();
  eval->add_option("--csv-out", ea.csv_out, "Report CSV path");
  eval->add_option("--json-out", ea.json_out, "Report JSON path");
  eval->add_flag("--table", ea.table, "Print a per-rate summary table");

  ExplainArgs xa;
  auto* explain = app.add_subcommand("explain", "Sufficient explanation of one classification");
  explain->add_option("--lr", xa.lr, "Binary logistic regression JSON")->required();
  explain->add_option("--nb", xa.nb, "Conformant naive Bayes JSON")->required();
  explain->add_option("--data", xa.data, "Dataset file holding the instance")->required();
  explain->add_option("--index", xa.index, "Row to explain")->capture_default_str();
  explain->add_option("--search", xa.search, "greedy or exact:<cap>")->capture_default_str();
  explain->add_option("--image-out", xa.image_out, "Write a PGM rendering of the explanation");
  explain->add_option("--width", xa.width, "Image width");
  explain->add_option("--height", xa.height, "Image height");

  ConvertArgs ca;
  auto* convert = app.add_subcommand("convert", "Inspect a model or convert between NB and LR");
  convert->add_option("--in", ca.in, "Model JSON")->required();
  convert->add_option("--out", ca.out, "Output JSON (default: stdout)");
  auto* to_lr = convert->add_flag("--to-lr", ca.to_lr, "Equivalent logistic regression of a naive Bayes model");
  auto* to_nb = convert->add_flag("--to-nb", ca.to_nb, "Conformant naive Bayes of a logistic regression");
  convert->add_option("--theta", ca.theta, "P(x_i=1 | pinned class), comma-separated")->delimiter(',');
  to_lr->excludes(to_nb);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUser;
  }

  try {
    if (*ingest) return run_ingest(ia, out, err);
    if (*train) return run_train(ta, out, err);
    if (*fit) return run_fit(fa, out, err);
    if (*eval) return run_eval(ea, out, err);
    if (*explain) return run_explain(xa, out, err);
    if (*convert) return run_convert(ca, out, err);
  } catch (const numerical_error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUser;
  }
  return kExitUser;
}

}  // namespace nacl
