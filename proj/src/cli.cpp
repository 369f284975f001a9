#include "cvxrobust/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cvxrobust/attack.hpp"
#include "cvxrobust/dataset.hpp"
#include "cvxrobust/error.hpp"
#include "cvxrobust/polynet.hpp"
#include "cvxrobust/polytrain.hpp"
#include "cvxrobust/relutrain.hpp"
#include "cvxrobust/rng.hpp"

namespace cvxrobust::cli {

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- options ------------------------------------------------------------

struct DataOptions {
  std::string data;
  std::string label = "label";
  std::string positive = "1";
};

struct SplitOptions {
  double test_fraction = 0.25;
  bool standardize = true;
};

struct PolyOptions {
  DataOptions io;
  SplitOptions split;
  std::string out = "out";
  std::uint64_t seed = 0;
  double beta = 0.01;
  double radius = 0.0;
  std::vector<double> coeffs{0.09, 0.50, 0.47};
  std::string solver = "ipm";
  double tol = poly_solver_defaults().tol;
  std::int64_t max_iters = 0;  // 0 keeps the method default
};

struct CertifyOptions {
  DataOptions io;
  std::string model;
  std::string out = "out";
  std::uint64_t seed = 0;
  int probes = 100;
};

struct ReluOptions {
  DataOptions io;
  SplitOptions split;
  std::string out = "out";
  std::uint64_t seed = 0;
  double beta = 0.01;
  double radius = 0.0;
  std::string norm = "1";
  Index patterns = 500;
  PenaltyConfig penalty;
};

struct AttackOptions {
  DataOptions io;
  std::string model;
  std::string out = "out";
  std::vector<double> eps{0.0};
  std::string id;
};

struct FitOptions {
  std::string out = "out";
  double lo = -5.0;
  double hi = 5.0;
  int grid = 10001;
};

void add_data_options(CLI::App& app, DataOptions& o) {
  app.add_option("--data", o.data, "CSV file with a header row")->required();
  app.add_option("--label", o.label, "label column (name or 0-based index)")->capture_default_str();
  app.add_option("--positive", o.positive, "label value of the +1 class")->capture_default_str();
}

void add_split_options(CLI::App& app, SplitOptions& o) {
  app.add_option("--test-fraction", o.test_fraction, "held-out fraction, 0 trains on every row")
      ->check(CLI::Range(0.0, 0.99))
      ->capture_default_str();
  app.add_option("--standardize", o.standardize, "z-score features with training statistics")->capture_default_str();
}

json data_json(const DataOptions& o) { return {{"data", o.data}, {"label", o.label}, {"positive", o.positive}}; }

json split_json(const SplitOptions& o) {
  return {{"test-fraction", o.test_fraction}, {"standardize", o.standardize}};
}

// ---- config files -------------------------------------------------------

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

std::string scalar_token(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw UsageError("config values must be strings, numbers, booleans or arrays of those");
}

std::set<std::string> given_flags(const std::vector<std::string>& args) {
  std::set<std::string> out;
  for (const auto& a : args) {
    if (a.rfind("--", 0) == 0) out.insert(a.substr(0, a.find('=')));
  }
  return out;
}

// Appends the config file entries (and the output directory from the
// environment) that no flag already sets.
std::vector<std::string> merge_config(std::vector<std::string> args, CLI::App& sub) {
  std::set<std::string> given = given_flags(args);
  if (given.count("--out") == 0 && sub.get_option_no_throw("--out") != nullptr) {
    if (const char* env = std::getenv(output_env); env != nullptr && *env != '\0') {
      args.insert(args.end(), {"--out", env});
      given.insert("--out");
    }
  }
  std::optional<std::string> config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  if (!config) return args;
  const json j = read_json(*config);
  if (!j.is_object()) throw UsageError(*config + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "command") continue;
    const std::string flag = "--" + key;
    if (key == "config" || sub.get_option_no_throw(flag) == nullptr) {
      throw UsageError(*config + ": unknown option '" + key + "' for " + sub.get_name());
    }
    if (given.count(flag) != 0) continue;
    std::vector<std::string> tokens;
    if (value.is_array()) {
      for (const auto& v : value) tokens.push_back(scalar_token(v));
      if (tokens.empty()) continue;
    } else {
      tokens.push_back(scalar_token(value));
    }
    args.push_back(flag);
    args.insert(args.end(), tokens.begin(), tokens.end());
  }
  return args;
}

// ---- shared steps -------------------------------------------------------

fs::path prepare_out(const std::string& dir) {
  const fs::path p(dir);
  fs::create_directories(p);
  return p;
}

struct Prepared {
  Dataset train;
  Dataset test;
};

Prepared prepare_data(const DataOptions& io, const SplitOptions& so, std::uint64_t seed, const fs::path& out) {
  LoadReport report;
  const Dataset all = load_csv(io.data, io.label, io.positive, &report);
  Prepared p;
  json info{{"rows_read", report.rows_read},
            {"rows_rejected", report.rows_rejected},
            {"positive_label", report.positive_label},
            {"negative_label", report.negative_label}};
  if (so.test_fraction > 0.0) {
    Split sp = split(all, so.test_fraction, derive_seed(seed, "split"));
    p.train = std::move(sp.train);
    p.test = std::move(sp.test);
    info["train_index"] = sp.train_index;
    info["test_index"] = sp.test_index;
  } else {
    p.train = all;
  }
  if (so.standardize) {
    Standardized st = standardize(p.train, p.test.n() > 0 ? p.test : p.train);
    p.train = std::move(st.train);
    if (p.test.n() > 0) p.test = std::move(st.test);
    write_json(to_json(st.stats), out / "standardization.json");
  }
  write_json(info, out / "split.json");
  save_csv(p.train, out / "train.csv");
  if (p.test.n() > 0) save_csv(p.test, out / "test.csv");
  return p;
}

double clean_accuracy(const AttackModel& model, const Dataset& data) {
  if (data.n() == 0) return std::numeric_limits<double>::quiet_NaN();
  return robust_accuracy(model, data, {0.0}).accuracy.front();
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json solution_json(const conic::ConicSolution& s) {
  return {{"status", conic::to_string(s.status)},
          {"primal_residual", s.primal_residual},
          {"dual_residual", s.dual_residual},
          {"duality_gap", s.duality_gap},
          {"primal_objective", s.primal_objective},
          {"dual_objective", s.dual_objective},
          {"iterations", s.iterations},
          {"setup_seconds", s.setup_seconds},
          {"solve_seconds", s.solve_seconds}};
}

AttackModel load_model(const std::string& path) {
  const json j = read_json(path);
  const std::string type = j.value("type", "");
  if (type == "quadratic_classifier") return classifier_from_json(j);
  if (type == "two_layer_network") return network_from_json(j);
  if (type == "gated_linear_model") return recover_weights(gated_model_from_json(j));
  throw UsageError(path + ": unsupported model type '" + type + "'");
}

// ---- commands -------------------------------------------------------------

int train_poly_cmd(const PolyOptions& o, std::ostream& out) {
  const fs::path dir = prepare_out(o.out);
  json cfg{{"command", "train-poly"}, {"out", o.out}, {"seed", o.seed}, {"beta", o.beta}, {"radius", o.radius},
           {"coeffs", o.coeffs}, {"solver", o.solver}, {"tol", o.tol}, {"max-iters", o.max_iters}};
  cfg.update(data_json(o.io));
  cfg.update(split_json(o.split));
  write_json(cfg, dir / "config.json");

  if (o.coeffs.size() != 3) throw UsageError("--coeffs takes three values a b c");
  TrainConfig tc;
  tc.beta = o.beta;
  tc.radius = o.radius;
  tc.coeffs = {o.coeffs[0], o.coeffs[1], o.coeffs[2]};
  tc.solver.method = o.solver == "admm" ? conic::Method::admm : conic::Method::interior_point;
  tc.solver.tol = o.tol;
  if (o.max_iters > 0) {
    tc.solver.max_iters = o.max_iters;
    tc.solver.ipm_max_iters = static_cast<int>(std::min<std::int64_t>(o.max_iters, 1000000));
  }

  const Prepared data = prepare_data(o.io, o.split, o.seed, dir);
  PolyTrainResult res;
  try {
    res = train_poly(data.train, tc);
  } catch (const SolveFailure& e) {
    json diag = solution_json(e.solution());
    diag["error"] = e.what();
    write_json(diag, dir / "diagnostics.json");
    throw;
  }
  const ExtractedModel& m = res.model;
  const json provenance{{"command", "train-poly"}, {"beta", o.beta}, {"radius", o.radius}, {"data", o.io.data}};
  write_json(to_json(m.classifier, provenance), dir / "classifier.json");
  json blocks = to_json(m.blocks);
  blocks["z_min_eigenvalue"] = m.z_min_eigenvalue;
  blocks["zp_min_eigenvalue"] = m.zp_min_eigenvalue;
  write_json(blocks, dir / "blocks.json");
  const TwoLayerNetwork net = decompose_blocks(m.blocks.Z, m.blocks.Zp, tc.coeffs);
  write_json(to_json(net, provenance), dir / "network.json");
  if (m.certificate) write_json(to_json(*m.certificate), dir / "certificate.json");

  const double train_acc = clean_accuracy(m.classifier, data.train);
  const double test_acc = clean_accuracy(m.classifier, data.test);
  json diag = solution_json(res.solution);
  diag["objective"] = m.objective;
  diag["hinge_loss"] = m.hinge_loss;
  diag["neurons"] = net.neurons.size();
  diag["train_accuracy"] = number_or_null(train_acc);
  diag["test_accuracy"] = number_or_null(test_acc);
  diag["warnings"] = m.warnings;
  write_json(diag, dir / "diagnostics.json");

  out << (o.radius > 0.0 ? "robust" : "standard") << " model: objective " << m.objective << ", status "
      << conic::to_string(res.solution.status) << ", train accuracy " << train_acc;
  if (data.test.n() > 0) out << ", test accuracy " << test_acc;
  out << '\n';
  for (const auto& w : m.warnings) out << "warning: " << w << '\n';
  return exit_ok;
}

int certify_cmd(const CertifyOptions& o, std::ostream& out) {
  const fs::path dir = prepare_out(o.out);
  json cfg{{"command", "certify"}, {"model", o.model}, {"out", o.out}, {"seed", o.seed}, {"probes", o.probes}};
  cfg.update(data_json(o.io));
  write_json(cfg, dir / "config.json");

  const AttackModel model = load_model(o.model);
  QuadraticClassifier clf;
  if (const auto* q = std::get_if<QuadraticClassifier>(&model)) {
    clf = *q;
  } else {
    const auto& net = std::get<TwoLayerNetwork>(model);
    if (net.activation != Activation::polynomial) throw UsageError("certify: needs a polynomial-activation model");
    clf = to_quadratic(net);
  }
  const Dataset data = load_csv(o.io.data, o.io.label, o.io.positive);
  if (data.d() != clf.dim()) {
    throw DomainError("certify: model expects " + std::to_string(clf.dim()) + " features, data has " +
                      std::to_string(data.d()));
  }

  std::ofstream csv(dir / "distances.csv");
  if (!csv) throw std::runtime_error("cannot write distances.csv");
  csv.precision(17);
  csv << "row,label,score,distance,s,lambda,unbounded\n";
  std::vector<Index> wrong;
  double sum = 0.0;
  Index certified = 0, unbounded = 0;
  DistanceOptions opt;
  opt.reference_points = &data.X();
  opt.random_probes = o.probes;
  for (Index i = 0; i < data.n(); ++i) {
    const VectorXd x = data.X().row(i).transpose();
    const double y = data.y()[i];
    const double score = evaluate(clf, x);
    if (!(y * score > 0.0)) {
      wrong.push_back(i);
      continue;
    }
    opt.seed = derive_seed(o.seed, "probe-" + std::to_string(i));
    const DistanceResult r = decision_distance(clf, x, y, opt);
    csv << i << ',' << y << ',' << score << ',' << r.distance << ',' << r.s << ',' << r.lambda << ','
        << (r.unbounded ? 1 : 0) << '\n';
    if (r.unbounded || !std::isfinite(r.distance)) {
      ++unbounded;
    } else {
      sum += r.distance;
      ++certified;
    }
  }
  const double mean = certified > 0 ? sum / static_cast<double>(certified) : std::numeric_limits<double>::quiet_NaN();
  write_json({{"rows", data.n()},
              {"correct", data.n() - static_cast<Index>(wrong.size())},
              {"certified", certified},
              {"unbounded", unbounded},
              {"mean_distance", number_or_null(mean)},
              {"misclassified", wrong}},
             dir / "certify.json");
  out << "certified " << certified << " of " << data.n() << " rows, mean distance " << mean << '\n';
  return exit_ok;
}

int train_relu_cmd(const ReluOptions& o, std::ostream& out, std::ostream& err) {
  const fs::path dir = prepare_out(o.out);
  const PenaltyConfig& pc = o.penalty;
  json cfg{{"command", "train-relu"},
           {"out", o.out},
           {"seed", o.seed},
           {"beta", o.beta},
           {"radius", o.radius},
           {"norm", o.norm},
           {"patterns", o.patterns},
           {"rho", pc.rho},
           {"max-rho", pc.max_rho},
           {"step", pc.step_size},
           {"momentum", pc.momentum},
           {"epochs", pc.epochs},
           {"constant-epochs", pc.constant_epochs},
           {"final-step-ratio", pc.final_step_ratio},
           {"batch", pc.batch_size},
           {"prox-sweeps", pc.prox_sweeps},
           {"feasibility-tol", pc.feasibility_tol}};
  cfg.update(data_json(o.io));
  cfg.update(split_json(o.split));
  write_json(cfg, dir / "config.json");

  const Norm p = norm_from_string(o.norm);
  PenaltyConfig penalty = pc;
  penalty.validate();
  penalty.seed = o.seed;
  const Prepared data = prepare_data(o.io, o.split, o.seed, dir);
  const SignPatternSet patterns = sample_sign_patterns(data.train.X(), o.patterns, o.seed);
  ReluTrainResult res;
  try {
    res = train_convex_relu(data.train.X(), data.train.y(), patterns, o.beta, o.radius, p, penalty);
  } catch (const DivergenceError& e) {
    write_json(to_json(e.last_finite()), dir / "gated_model.json");
    throw;
  }
  write_json(to_json(res.model), dir / "gated_model.json");
  const TwoLayerNetwork net = recover_weights(res.model);
  write_json(to_json(net, {{"command", "train-relu"}, {"beta", o.beta}, {"radius", o.radius}, {"norm", o.norm}}),
             dir / "network.json");
  write_trace_csv(res.trace, dir / "trace.csv");

  const ObjectiveParts parts = evaluate_objective(res.model, data.train.X(), data.train.y(), res.rho);
  const double train_acc = clean_accuracy(net, data.train);
  const double test_acc = clean_accuracy(net, data.test);
  write_json({{"feasible", res.feasible},
              {"max_violation", res.residual.max_violation},
              {"scale", res.residual.scale},
              {"relative_violation", res.residual.relative()},
              {"rho", res.rho},
              {"objective", parts.objective()},
              {"hinge", parts.hinge},
              {"regularizer", parts.regularizer},
              {"penalty", parts.penalty},
              {"patterns", patterns.count()},
              {"pattern_draws", patterns.draws},
              {"neurons", net.neurons.size()},
              {"train_accuracy", number_or_null(train_acc)},
              {"test_accuracy", number_or_null(test_acc)}},
             dir / "residual.json");

  out << "objective " << parts.objective() << ", relative violation " << res.residual.relative() << ", "
      << net.neurons.size() << " neurons, train accuracy " << train_acc;
  if (data.test.n() > 0) out << ", test accuracy " << test_acc;
  out << '\n';
  if (!res.feasible) {
    err << "error: constraint residual " << res.residual.relative() << " exceeds the feasibility tolerance "
        << pc.feasibility_tol << " at rho " << res.rho << "; the model was kept but is flagged\n";
    return exit_numerical;
  }
  return exit_ok;
}

int attack_cmd(const AttackOptions& o, std::ostream& out) {
  const fs::path dir = prepare_out(o.out);
  json cfg{{"command", "attack"}, {"model", o.model}, {"out", o.out}, {"eps", o.eps}, {"id", o.id}};
  cfg.update(data_json(o.io));
  write_json(cfg, dir / "config.json");

  const AttackModel model = load_model(o.model);
  const Dataset data = load_csv(o.io.data, o.io.label, o.io.positive);
  const AttackReport rep = robust_accuracy(model, data, o.eps, o.id.empty() ? o.model : o.id);
  write_csv(rep, dir / "attack.csv");
  write_json(to_json(rep), dir / "attack.json");
  for (std::size_t i = 0; i < rep.eps.size(); ++i) out << "eps " << rep.eps[i] << "  accuracy " << rep.accuracy[i] << '\n';
  return exit_ok;
}

int fit_cmd(const FitOptions& o, std::ostream& out) {
  const fs::path dir = prepare_out(o.out);
  write_json({{"command", "fit-activation"}, {"out", o.out}, {"lo", o.lo}, {"hi", o.hi}, {"grid", o.grid}},
             dir / "config.json");
  const ActivationCoeffs c = fit_relu_poly(o.lo, o.hi, o.grid);
  const auto round2 = [](double v) { return std::round(v * 100.0) / 100.0; };
  write_json({{"a", c.a}, {"b", c.b}, {"c", c.c}, {"rounded", {{"a", round2(c.a)}, {"b", round2(c.b)}, {"c", round2(c.c)}}},
              {"lo", o.lo}, {"hi", o.hi}, {"grid", o.grid}},
             dir / "activation.json");
  out.precision(10);
  out << "a " << c.a << "  b " << c.b << "  c " << c.c << '\n';
  return exit_ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Convex training, certification and attack evaluation of two-layer networks", "cvxrobust"};
  app.require_subcommand(1);
  std::string config_file;  // read by merge_config before parsing

  PolyOptions poly;
  auto* tp = app.add_subcommand("train-poly", "train a polynomial-activation network by SDP");
  add_data_options(*tp, poly.io);
  add_split_options(*tp, poly.split);
  tp->add_option("--out", poly.out, "output directory")->capture_default_str();
  tp->add_option("--seed", poly.seed, "root seed")->capture_default_str();
  tp->add_option("--beta", poly.beta, "regularization strength")->check(CLI::PositiveNumber)->capture_default_str();
  tp->add_option("--radius", poly.radius, "l2 attack radius; > 0 trains the robust model")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  tp->add_option("--coeffs", poly.coeffs, "activation a b c")->expected(3)->capture_default_str();
  tp->add_option("--solver", poly.solver, "ipm or admm")->check(CLI::IsMember({"ipm", "admm"}))->capture_default_str();
  tp->add_option("--tol", poly.tol, "solver tolerance")->check(CLI::PositiveNumber)->capture_default_str();
  tp->add_option("--max-iters", poly.max_iters, "solver iteration cap, 0 for the default")->check(CLI::NonNegativeNumber);
  tp->add_option("--config", config_file, "JSON config file");

  CertifyOptions cert;
  auto* cp = app.add_subcommand("certify", "decision-boundary distances of a polynomial model");
  add_data_options(*cp, cert.io);
  cp->add_option("--model", cert.model, "classifier.json or a polynomial network.json")->required();
  cp->add_option("--out", cert.out, "output directory")->capture_default_str();
  cp->add_option("--seed", cert.seed, "root seed for the sign-change probes")->capture_default_str();
  cp->add_option("--probes", cert.probes, "random probes per row")->check(CLI::NonNegativeNumber)->capture_default_str();
  cp->add_option("--config", config_file, "JSON config file");

  ReluOptions relu;
  auto* rp = app.add_subcommand("train-relu", "train a two-layer ReLU network through the gated convex program");
  add_data_options(*rp, relu.io);
  add_split_options(*rp, relu.split);
  rp->add_option("--out", relu.out, "output directory")->capture_default_str();
  rp->add_option("--seed", relu.seed, "root seed")->capture_default_str();
  rp->add_option("--beta", relu.beta, "regularization strength")->check(CLI::PositiveNumber)->capture_default_str();
  rp->add_option("--radius", relu.radius, "attack radius, 0 for standard training")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  rp->add_option("--norm", relu.norm, "attack norm p: 1, 2 or inf")
      ->check(CLI::IsMember({"1", "2", "inf"}))
      ->capture_default_str();
  rp->add_option("--patterns", relu.patterns, "sign pattern draws")->check(CLI::PositiveNumber)->capture_default_str();
  auto& pc = relu.penalty;
  rp->add_option("--rho", pc.rho, "penalty weight")->check(CLI::PositiveNumber)->capture_default_str();
  rp->add_option("--max-rho", pc.max_rho, "cap for the tenfold escalation")->capture_default_str();
  rp->add_option("--step", pc.step_size, "step size, 0 for n / lambda_max(X'X)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  rp->add_option("--momentum", pc.momentum, "momentum on the last displacement")->check(CLI::Range(0.0, 0.999999))->capture_default_str();
  rp->add_option("--epochs", pc.epochs, "epochs per penalty round")->check(CLI::NonNegativeNumber)->capture_default_str();
  rp->add_option("--constant-epochs", pc.constant_epochs, "epochs before the step starts to decay")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  rp->add_option("--final-step-ratio", pc.final_step_ratio, "last step relative to the first")
      ->capture_default_str();
  rp->add_option("--batch", pc.batch_size, "minibatch size, 0 for full batch")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  rp->add_option("--prox-sweeps", pc.prox_sweeps, "row sweeps per penalty prox")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  rp->add_option("--feasibility-tol", pc.feasibility_tol, "relative constraint residual accepted at the end")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  rp->add_option("--config", config_file, "JSON config file");

  AttackOptions atk;
  auto* ap = app.add_subcommand("attack", "FGSM accuracy over an eps grid");
  add_data_options(*ap, atk.io);
  ap->add_option("--model", atk.model, "classifier, network or gated model JSON")->required();
  ap->add_option("--out", atk.out, "output directory")->capture_default_str();
  ap->add_option("--eps", atk.eps, "l_inf attack sizes")->check(CLI::NonNegativeNumber)->capture_default_str();
  ap->add_option("--id", atk.id, "model id recorded in the report");
  ap->add_option("--config", config_file, "JSON config file");

  FitOptions fit;
  auto* fp = app.add_subcommand("fit-activation", "least-squares quadratic fit of the ReLU");
  fp->add_option("--out", fit.out, "output directory")->capture_default_str();
  fp->add_option("--lo", fit.lo, "interval start")->capture_default_str();
  fp->add_option("--hi", fit.hi, "interval end")->capture_default_str();
  fp->add_option("--grid", fit.grid, "grid points")->check(CLI::Range(3, 100000000))->capture_default_str();
  fp->add_option("--config", config_file, "JSON config file");

  try {
    std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
    if (!rest.empty()) {
      if (CLI::App* sub = app.get_subcommand_no_throw(rest.front()); sub != nullptr) {
        std::vector<std::string> tail(rest.begin() + 1, rest.end());
        tail = merge_config(std::move(tail), *sub);
        tail.insert(tail.begin(), rest.front());
        rest = std::move(tail);
      }
    }
    std::reverse(rest.begin(), rest.end());
    app.parse(std::move(rest));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_usage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  }

  try {
    if (tp->parsed()) return train_poly_cmd(poly, out);
    if (cp->parsed()) return certify_cmd(cert, out);
    if (rp->parsed()) return train_relu_cmd(relu, out, err);
    if (ap->parsed()) return attack_cmd(atk, out);
    if (fp->parsed()) return fit_cmd(fit, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return exit_usage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << " (line " << e.line() << ")\n";
    return exit_usage;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return exit_numerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_numerical;
  }
  return exit_usage;
}

}  // namespace cvxrobust::cli
