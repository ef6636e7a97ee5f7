#include "patree/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

#include "patree/attach.hpp"
#include "patree/constants.hpp"
#include "patree/errors.hpp"
#include "patree/grd.hpp"
#include "patree/series.hpp"
#include "patree/simulate.hpp"

namespace patree::cli {

namespace {

using json = nlohmann::ordered_json;

struct Options {
  std::string fn, g, f;
  bool height = false;
  bool dump_series = false;
  bool dump_tree = false;
  double delta = 1.0;
  double theta = 0.5;
  std::size_t grid = 21;
  std::size_t n = 0;
  std::size_t reps = 100;
  unsigned long long seed = kDefaultSeed;
  double rel_tol = TruncationConfig{}.rel_tol;
  std::size_t max_terms = TruncationConfig{}.max_terms;
  std::string out_path;
  std::string format;
};

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

json depth_json(const DepthSolution& d) {
  return {{"lambda_f", d.lambda_f},   {"q_f", d.q_f},
          {"c_f", d.c_f},             {"lambda_lo", d.lambda_lo},
          {"lambda_hi", d.lambda_hi}, {"iterations", d.iterations},
          {"residual", d.residual},   {"mprime_neg", d.mprime_neg},
          {"q_err", d.q_err},         {"n_used", d.n_used}};
}

void add_height(json& j, const HeightSolution& h) {
  j["lambda_star"] = h.lambda_star;
  j["kappa"] = h.kappa;
  j["r_f"] = h.r_f;
  j["c_star"] = h.c_star;
  j["stationarity_residual"] = h.stationarity_residual;
  j["local_maxima"] = h.local_maxima;
  j["warnings"] = h.warnings;
}

json header(const std::string& command) { return {{"schema", "1"}, {"command", command}}; }

// Writes either to the --out file or to the given stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw DomainError("cannot open output file " + path);
      stream_ = &file_;
    }
  }
  std::ostream& get() { return *stream_; }
  bool to_file() const { return file_.is_open(); }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

// JSON record, or a header row and one value row of its numeric fields.
void emit(const json& j, const Options& o, std::ostream& out) {
  Sink sink(o.out_path, out);
  if (o.format != "csv") {
    sink.get() << j.dump() << '\n';
    return;
  }
  std::string keys, vals;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_number()) continue;
    keys += (keys.empty() ? "" : ",") + k;
    vals += (vals.empty() ? "" : ",") + (v.is_number_float() ? num(v.get<double>()) : v.dump());
  }
  sink.get() << keys << '\n' << vals << '\n';
}

TruncationConfig make_cfg(const Options& o) {
  TruncationConfig cfg;
  cfg.rel_tol = o.rel_tol;
  cfg.max_terms = o.max_terms;
  cfg.validate();
  return cfg;
}

int cmd_constants(const Options& o, std::ostream& out) {
  const TruncationConfig cfg = make_cfg(o);
  const AttachmentFunction fn = parse_function(o.fn);
  const DepthSolution d = depth_constant(fn, cfg);
  if (o.dump_series) {
    Sink sink(o.out_path, out);
    const WeightPrefix w = weights_with_tail(fn, d.lambda_f, cfg);
    const std::size_t N = w.log_A.size() - 1;
    const std::vector<double> r = tails(w, N);
    auto& s = sink.get();
    s << "n,A_n,r_n\n";
    for (std::size_t n = 0; n <= N; ++n)
      s << n << ',' << num(std::exp(w.log_A[n])) << ',' << num(r[n]) << '\n';
    return kOk;
  }
  json j = header("constants");
  j["fn"] = to_spec(fn);
  j.update(depth_json(d));
  if (o.height) {
    FunctionSamples fs(fn);
    add_height(j, height_speed(fs, d.lambda_f, cfg));
  }
  emit(j, o, out);
  return kOk;
}

int cmd_affine(const Options& o, std::ostream& out) {
  const auto [d, h] = affine_closed_form(o.delta);
  json j = header("affine");
  j["delta"] = o.delta;
  j.update(depth_json(d));
  add_height(j, h);
  emit(j, o, out);
  return kOk;
}

int cmd_interpolate(const Options& o, std::ostream& out) {
  const TruncationConfig cfg = make_cfg(o);
  const AttachmentFunction g = parse_function(o.g);
  const AttachmentFunction f = parse_function(o.f);
  const GaugedFamily fam = gauge(g, f, o.theta, cfg);
  const QPrime qp = q_prime(fam);
  json j = header("interpolate");
  j["g"] = to_spec(g);
  j["f"] = to_spec(f);
  j["theta"] = o.theta;
  j["fn"] = to_spec(fam.f_theta);
  j["grd"] = to_string(is_grd_dominant(f, g, kDefaultGrdPrefix));
  j["lambda_f"] = fam.lambda_theta;
  j["q_f"] = fam.q_theta;
  j["c_f"] = 1.0 / fam.q_theta;
  j["a_prime"] = fam.a_prime;
  j["malthus_residual"] = fam.malthus_residual;
  j["centering_residual"] = fam.centering_residual;
  j["q_prime"] = qp.value_double_sum;
  j["q_prime_ck_form"] = qp.value_Ck_form;
  j["ck_sum"] = qp.ck_sum;
  j["diagonal"] = qp.diagonal;
  if (o.height) {
    FunctionSamples fs(fam.f_theta);
    add_height(j, height_speed(fs, fam.lambda_theta, cfg));
  }
  emit(j, o, out);
  return kOk;
}

const char* kPathColumns =
    "param,lambda,lambda_star,value,constant,derivative,derivative_alt,derivative_fd,"
    "centering_residual,representation_residual,fd_residual,refined,error";

json point_json(const PathPoint& p) {
  return {{"param", p.param},
          {"lambda", p.lambda},
          {"lambda_star", p.lambda_star},
          {"value", p.value},
          {"constant", p.constant},
          {"derivative", p.derivative},
          {"derivative_alt", p.derivative_alt},
          {"derivative_fd", p.derivative_fd},
          {"centering_residual", p.centering_residual},
          {"representation_residual", p.representation_residual},
          {"fd_residual", p.fd_residual},
          {"refined", p.refined},
          {"error", p.error}};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

int cmd_verify(const Options& o, bool height_mode, std::ostream& out, std::ostream& err) {
  const TruncationConfig cfg = make_cfg(o);
  const AttachmentFunction g = parse_function(o.g);
  const AttachmentFunction f = parse_function(o.f);
  const GrdVerdict order = is_grd_dominant(f, g, kDefaultGrdPrefix);
  const std::vector<double> grid = unit_grid(o.grid);
  const PathReport rep = height_mode ? height_path(g, f, grid, cfg) : depth_path(g, f, grid, cfg);

  json summary = header(height_mode ? "verify-height" : "verify-depth");
  summary["g"] = to_spec(g);
  summary["f"] = to_spec(f);
  summary["grd"] = to_string(order);
  summary["verdict"] = rep.verdict.monotone ? "Monotone" : "ViolationAt";
  if (!rep.verdict.monotone) {
    summary["violation_index"] = rep.verdict.index;
    summary["violation_param"] = rep.points[rep.verdict.index].param;
    summary["violation_magnitude"] = rep.verdict.magnitude;
  }
  summary["points"] = rep.points.size();
  summary["failures"] = rep.failures;
  if (height_mode) summary["extrapolated_instance"] = rep.outside_rv;
  std::vector<std::string> warnings = rep.warnings;
  if (!order.dominates()) warnings.push_back("f does not dominate g in growth-ratio order");
  summary["warnings"] = warnings;

  Sink sink(o.out_path, out);
  if (o.format == "json") {
    json rows = json::array();
    for (const auto& p : rep.points) rows.push_back(point_json(p));
    summary["rows"] = rows;
    sink.get() << summary.dump() << '\n';
  } else {
    auto& s = sink.get();
    s << kPathColumns << '\n';
    for (const auto& p : rep.points) {
      s << num(p.param) << ',' << num(p.lambda) << ',' << num(p.lambda_star) << ','
        << num(p.value) << ',' << num(p.constant) << ',' << num(p.derivative) << ','
        << num(p.derivative_alt) << ',' << num(p.derivative_fd) << ','
        << num(p.centering_residual) << ',' << num(p.representation_residual) << ','
        << num(p.fd_residual) << ',' << (p.refined ? 1 : 0) << ',' << csv_field(p.error)
        << '\n';
    }
    (sink.to_file() ? out : err) << summary.dump() << '\n';
  }
  if (!rep.verdict.monotone) return kViolation;
  if (rep.failures > 0) return kSolverFailure;
  return kOk;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const AttachmentFunction fn = parse_function(o.fn);
  if (o.n < 1) throw DomainError("--n must be positive");
  Sink sink(o.out_path, out);
  if (o.dump_tree) {
    const TreeState t = grow(fn, o.n, o.seed);
    auto& s = sink.get();
    s << "child,parent,depth\n";
    for (std::size_t v = 1; v < t.n; ++v)
      s << v + 1 << ',' << t.parent[v] + 1 << ',' << t.depth[v] << '\n';
    return kOk;
  }
  const SimSummary sm = monte_carlo(fn, o.n, o.reps, o.seed);
  json j = header("simulate");
  j["fn"] = to_spec(fn);
  j["n"] = sm.n;
  j["reps"] = sm.reps;
  j["mean_D_over_logn"] = sm.mean_D_over_logn;
  j["stderr_D"] = sm.stderr_D;
  j["mean_H_over_logn"] = sm.mean_H_over_logn;
  j["stderr_H"] = sm.stderr_H;
  j["seed_base"] = sm.seed_base;
  emit(j, o, out);
  return kOk;
}

int cmd_oracle(const Options& o, std::ostream& out, std::ostream& err) {
  const AttachmentFunction fn = parse_function(o.fn);
  if (o.n == 9) err << "warning: n=9 enumerates 40320 histories\n";
  const double v = exact_expected_depth(fn, o.n);
  json j = header("oracle");
  j["fn"] = to_spec(fn);
  j["n"] = o.n;
  j["expected_depth"] = v;
  emit(j, o, out);
  return kOk;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError:
    case ErrorKind::DomainError:
    case ErrorKind::NonPositiveValue:
    case ErrorKind::PreconditionViolation:
      return kUsage;
    default:
      return kSolverFailure;
  }
}

void error_record(std::ostream& err, const std::string& kind, const std::string& message) {
  json j = {{"schema", "1"}, {"error", kind}, {"message", message}};
  err << j.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Depth and height constants of preferential attachment trees", "patree"};
  app.require_subcommand(1, 1);

  auto add_cfg = [&o](CLI::App* sub) {
    sub->add_option("--rel-tol", o.rel_tol, "Relative tolerance for series and solvers")
        ->check(CLI::PositiveNumber);
    sub->add_option("--max-terms", o.max_terms, "Hard cap on directly summed terms")
        ->check(CLI::PositiveNumber);
  };

  auto* constants = app.add_subcommand("constants", "Depth constant and optional height constant");
  constants->add_option("--fn", o.fn, "Attachment function spec")->required();
  constants->add_flag("--height", o.height, "Also compute the height constant");
  constants->add_flag("--dump-series", o.dump_series, "CSV of n, A_n, r_n at lambda_f");
  add_cfg(constants);

  auto* affine = app.add_subcommand("affine", "Closed forms for f(k) = delta*k + 1");
  affine->add_option("--delta", o.delta, "Affine slope")->required()->check(CLI::PositiveNumber);

  auto* interp = app.add_subcommand("interpolate", "Gauge diagnostics of g^(1-theta) f^theta");
  interp->add_option("--g", o.g, "Lower endpoint spec")->required();
  interp->add_option("--f", o.f, "Upper endpoint spec")->required();
  interp->add_option("--theta", o.theta, "Interpolation parameter")->check(CLI::Range(0.0, 1.0));
  interp->add_flag("--height", o.height, "Also compute the height constant");
  add_cfg(interp);

  auto* vdepth = app.add_subcommand("verify-depth", "Depth monotonicity along the interpolation");
  auto* vheight = app.add_subcommand("verify-height", "Height monotonicity along the interpolation");
  for (auto* sub : {vdepth, vheight}) {
    sub->add_option("--g", o.g, "Lower endpoint spec")->required();
    sub->add_option("--f", o.f, "Upper endpoint spec")->required();
    sub->add_option("--grid", o.grid, "Number of grid points")->check(CLI::Range(2, 100000));
    add_cfg(sub);
  }

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo of D_n/log n and H_n/log n");
  simulate->add_option("--fn", o.fn, "Attachment function spec")->required();
  simulate->add_option("--n", o.n, "Tree size")->required()->check(CLI::PositiveNumber);
  simulate->add_option("--reps", o.reps, "Replicas")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", o.seed, "Seed of the first replica");
  simulate->add_flag("--dump-tree", o.dump_tree, "CSV edge list of one tree grown with --seed");

  auto* oracle = app.add_subcommand("oracle", "Exact E[D_n] by enumeration, n <= 9");
  oracle->add_option("--fn", o.fn, "Attachment function spec")->required();
  oracle->add_option("--n", o.n, "Tree size")->required()->check(CLI::Range(2, 9));

  for (auto* sub : {constants, affine, interp, vdepth, vheight, simulate, oracle}) {
    sub->add_option("--out", o.out_path, "Write the result to this file");
    sub->add_option("--format", o.format, "Output format: json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
  }

  std::vector<std::string> argv_store{"patree"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    error_record(err, "UsageError", e.what());
    err << app.help();
    return kUsage;
  }

  try {
    if (*vdepth || *vheight) {
      if (o.format.empty()) o.format = "csv";
      return cmd_verify(o, static_cast<bool>(*vheight), out, err);
    }
    if (o.format.empty()) o.format = "json";
    if (*constants) return cmd_constants(o, out);
    if (*affine) return cmd_affine(o, out);
    if (*interp) return cmd_interpolate(o, out);
    if (*simulate) return cmd_simulate(o, out);
    if (*oracle) return cmd_oracle(o, out, err);
  } catch (const Error& e) {
    error_record(err, to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    error_record(err, "InternalError", e.what());
    return kSolverFailure;
  }
  return kUsage;
}

}  // namespace patree::cli
