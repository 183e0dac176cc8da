#include "syndecomp/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "syndecomp/analysis.hpp"
#include "syndecomp/error.hpp"
#include "syndecomp/parallel.hpp"
#include "syndecomp/report.hpp"
#include "syndecomp/simulation.hpp"

namespace syndecomp {

namespace {

struct DataFlags {
  std::string data;
  std::string config;
  std::string region_col = "region";
  std::string outcome_col = "y";
  std::string covariates;
  std::string threshold_col;
  std::string index_outcome_col;
  std::string target = "0";
  double counterfactual_threshold = 0.0;
  std::string shift;
  std::string loadings;
  std::vector<std::string> select;
  std::string index_column;
  std::string pre_map = "1,0";
  std::string post_map;
  std::string arf = "polynomial";
  std::string groupby;
  bool robust = false;
  double alpha = 0.0;
  double kappa = 0.0;
  std::uint64_t seed = 0;
  std::size_t bootstrap = 0;
  std::size_t grid = 0;
  std::size_t jobs = 1;
  std::string out;
  bool timings = false;

  CLI::Option* threshold_opt = nullptr;
  CLI::Option* shift_opt = nullptr;
  CLI::Option* index_column_opt = nullptr;
  CLI::Option* alpha_opt = nullptr;
  CLI::Option* kappa_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* bootstrap_opt = nullptr;
  CLI::Option* grid_opt = nullptr;
};

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    out.push_back(a == std::string::npos ? std::string() : item.substr(a, b - a + 1));
  }
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::usage, "cli", "cannot parse '" + s + "' as a number in " + what);
  }
}

Eigen::VectorXd parse_vector(const std::string& s, const std::string& what) {
  const auto items = split_list(s);
  Eigen::VectorXd v(static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) v(static_cast<Eigen::Index>(i)) = parse_double(items[i], what);
  return v;
}

std::size_t column_index(const std::vector<std::string>& covariates, const std::string& name) {
  const auto it = std::find(covariates.begin(), covariates.end(), name);
  if (it == covariates.end()) {
    throw Error(ErrorKind::usage, "cli", "'" + name + "' is not one of the --covariates columns");
  }
  return static_cast<std::size_t>(it - covariates.begin());
}

void add_data_flags(CLI::App* cmd, DataFlags& f) {
  cmd->add_option("--data", f.data, "CSV file with one row per observation")->required();
  cmd->add_option("--config", f.config, "JSON analysis config");
  cmd->add_option("--region-col", f.region_col, "region identifier column");
  cmd->add_option("--outcome-col", f.outcome_col, "outcome column");
  cmd->add_option("--covariates", f.covariates, "comma-separated covariate columns")->required();
  cmd->add_option("--threshold-col", f.threshold_col, "per-region threshold column");
  cmd->add_option("--index-outcome-col", f.index_outcome_col, "log outcome used to estimate a censored index");
  cmd->add_option("--target", f.target, "target region identifier");
  f.threshold_opt = cmd->add_option("--counterfactual-threshold", f.counterfactual_threshold,
                                    "index-threshold policy: new threshold for every region");
  f.shift_opt = cmd->add_option("--shift", f.shift, "covariate-shift policy: comma-separated shift vector");
  cmd->add_option("--index-loadings", f.loadings, "covariate-shift policy: index loadings a in a'x");
  cmd->add_option("--select", f.select, "covariate-shift selection bound NAME:LO:HI (repeatable)");
  f.index_column_opt = cmd->add_option("--index-column", f.index_column, "identity-index policy: index column");
  cmd->add_option("--pre-map", f.pre_map, "identity-index policy: pre-policy SCALE,OFFSET");
  cmd->add_option("--post-map", f.post_map, "identity-index policy: post-policy SCALE,OFFSET");
  cmd->add_option("--arf", f.arf, "ARF estimator")->check(CLI::IsMember({"polynomial", "kernel"}));
  cmd->add_option("--groupby", f.groupby, "discrete covariate for group-wise weights");
  f.alpha_opt = cmd->add_option("--alpha", f.alpha, "overall level");
  f.kappa_opt = cmd->add_option("--kappa", f.kappa, "level spent on the weight set");
  f.seed_opt = cmd->add_option("--seed", f.seed, "master seed");
  f.bootstrap_opt = cmd->add_option("--bootstrap-draws,-B", f.bootstrap, "bootstrap draws");
  f.grid_opt = cmd->add_option("--grid-size", f.grid, "random simplex grid points");
  cmd->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", f.out, "write the JSON report here instead of stdout");
  cmd->add_flag("--timings", f.timings, "print stage timings to stderr");
}

CsvSchema make_schema(const DataFlags& f) {
  CsvSchema schema;
  schema.region_column = f.region_col;
  schema.outcome_column = f.outcome_col;
  schema.covariate_columns = split_list(f.covariates);
  if (!f.threshold_col.empty()) schema.threshold_column = f.threshold_col;
  if (!f.index_outcome_col.empty()) schema.index_outcome_column = f.index_outcome_col;
  schema.target_region = f.target;
  return schema;
}

PolicySpec make_policy(const DataFlags& f, const CsvSchema& schema) {
  const int modes = static_cast<int>(f.threshold_opt->count() > 0) + static_cast<int>(f.shift_opt->count() > 0) +
                    static_cast<int>(f.index_column_opt->count() > 0);
  if (modes != 1) {
    throw Error(ErrorKind::usage, "cli",
                "choose exactly one policy: --counterfactual-threshold, --shift or --index-column");
  }
  const auto& cov = schema.covariate_columns;
  if (f.threshold_opt->count() > 0) {
    if (!schema.threshold_column) {
      throw Error(ErrorKind::usage, "cli", "--counterfactual-threshold needs --threshold-col");
    }
    return IndexThresholdPolicy{f.counterfactual_threshold};
  }
  if (f.shift_opt->count() > 0) {
    CovariateShiftPolicy p;
    p.shift = parse_vector(f.shift, "--shift");
    if (f.loadings.empty()) throw Error(ErrorKind::usage, "cli", "--shift needs --index-loadings");
    p.loadings = parse_vector(f.loadings, "--index-loadings");
    for (const auto& s : f.select) {
      const auto parts = split_list(s, ':');
      if (parts.size() != 3) throw Error(ErrorKind::usage, "cli", "--select expects NAME:LO:HI, got '" + s + "'");
      CovariateShiftPolicy::Bound b;
      b.column = column_index(cov, parts[0]);
      if (!parts[1].empty()) b.lower = parse_double(parts[1], "--select");
      if (!parts[2].empty()) b.upper = parse_double(parts[2], "--select");
      p.selection.push_back(b);
    }
    return p;
  }
  IdentityIndexPolicy p;
  p.column = column_index(cov, f.index_column);
  const Eigen::VectorXd pre = parse_vector(f.pre_map, "--pre-map");
  if (f.post_map.empty()) throw Error(ErrorKind::usage, "cli", "--index-column needs --post-map SCALE,OFFSET");
  const Eigen::VectorXd post = parse_vector(f.post_map, "--post-map");
  if (pre.size() != 2 || post.size() != 2) {
    throw Error(ErrorKind::usage, "cli", "--pre-map and --post-map take SCALE,OFFSET");
  }
  p.pre_scale = pre(0);
  p.pre_offset = pre(1);
  p.post_scale = post(0);
  p.post_offset = post(1);
  return p;
}

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("SYNDECOMP_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const auto s = std::stoull(v, &used);
    if (v[used] != '\0') throw std::invalid_argument(v);
    return s;
  } catch (const std::exception&) {
    throw Error(ErrorKind::usage, "cli", std::string("SYNDECOMP_SEED is not an unsigned integer: ") + v);
  }
}

AnalysisConfig make_config(const DataFlags& f) {
  AnalysisConfig cfg = f.config.empty() ? AnalysisConfig{} : load_config(f.config);
  if (auto s = env_seed()) cfg.master_seed = *s;
  if (f.seed_opt->count() > 0) cfg.master_seed = f.seed;
  if (f.alpha_opt->count() > 0) cfg.alpha = f.alpha;
  if (f.kappa_opt->count() > 0) cfg.kappa = f.kappa;
  if (f.bootstrap_opt->count() > 0) cfg.bootstrap_draws = f.bootstrap;
  if (f.grid_opt->count() > 0) cfg.simplex_grid_size = f.grid;
  if (f.robust) cfg.robust_mode = true;
  cfg.validate();
  return cfg;
}

// Arguments that do not affect results are left out of the echo.
Json command_echo(const std::vector<std::string>& args) {
  static const std::vector<std::string> skip_with_value{"--jobs", "--out"};
  Json a = Json::array();
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& t = args[i];
    if (t == "--timings" || t.rfind("--jobs=", 0) == 0 || t.rfind("--out=", 0) == 0) continue;
    if (std::find(skip_with_value.begin(), skip_with_value.end(), t) != skip_with_value.end()) {
      ++i;
      continue;
    }
    a.push_back(t);
  }
  return a;
}

void emit(const Json& report, const std::string& path, std::ostream& out) {
  const std::string text = report.dump(2) + "\n";
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::usage, "cli", "cannot write report to '" + path + "'");
  f << text;
}

std::string_view hint(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::schema:
      return "check --region-col, --outcome-col and --covariates against the CSV header";
    case ErrorKind::parse:
      return "fix or drop the offending row";
    case ErrorKind::validation:
    case ErrorKind::usage:
      return "see --help for the accepted values";
    case ErrorKind::singular_fit:
      return "each region needs at least 4 distinct index values for the cubic ARF";
    case ErrorKind::degenerate_design:
      return "the index does not vary within a region; check the policy index definition";
    case ErrorKind::no_identification:
      return "the censored index needs some observations above the threshold";
    case ErrorKind::empty_window:
      return "use --arf polynomial or a smaller policy change";
    case ErrorKind::empty_matched_group:
      return "the policy moves every target observation outside the observed index range";
    case ErrorKind::singular_metric:
      return "rerun with --robust or more bootstrap draws";
    case ErrorKind::insufficient_draws:
    case ErrorKind::bootstrap_failure:
      return "increase bootstrap_draws or inspect the failing regions";
    case ErrorKind::degenerate_scale:
      return "the prediction does not vary across bootstrap draws; check for duplicated data";
    case ErrorKind::numeric:
      break;
  }
  return "inspect the input data for extreme or non-finite values";
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Loaded {
  MultiRegionDataset data;
  PolicySpec policy;
  AnalysisOptions options;
  Json head;
};

Loaded load_inputs(const std::string& command, const DataFlags& f, const std::vector<std::string>& args) {
  Loaded l;
  l.options.config = make_config(f);
  const CsvSchema schema = make_schema(f);
  l.policy = make_policy(f, schema);
  l.data = load_csv(f.data, schema);
  l.options.pipeline.arf_kind = f.arf == "kernel" ? ArfKind::kernel : ArfKind::polynomial;
  if (!f.groupby.empty()) l.options.groupby_column = column_index(schema.covariate_columns, f.groupby);
  l.options.jobs = f.jobs;
  l.head["command"] = command;
  l.head["args"] = command_echo(args);
  l.head["seed"] = l.options.config.master_seed;
  l.head["config"] = config_json(l.options.config);
  l.head["policy"] = policy_json(l.policy);
  l.head["arf"] = f.arf;
  l.head["data"] = dataset_json(l.data);
  return l;
}

int cmd_estimate(const DataFlags& f, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto start = Clock::now();
  Loaded l = load_inputs("estimate", f, args);
  const EstimateResult r = run_estimate(l.data, l.policy, l.options);
  Json report = l.head;
  report["estimate"] = estimate_json(r, l.data);
  report["warnings"] = Json(r.warnings);
  emit(report, f.out, out);
  if (f.timings) err << "timing total_seconds=" << seconds_since(start) << "\n";
  return exit_ok;
}

int cmd_infer(const DataFlags& f, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto start = Clock::now();
  Loaded l = load_inputs("infer", f, args);
  const InferenceResult r = run_inference(l.data, l.policy, l.options);
  Json report = l.head;
  report["estimate"] = estimate_json(r.estimate, l.data);
  report["inference"] = inference_json(r);
  report["warnings"] = Json(r.warnings);
  emit(report, f.out, out);
  if (f.timings) err << "timing total_seconds=" << seconds_since(start) << "\n";
  return r.transferability_rejected ? exit_rejected : exit_ok;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Counterfactual policy prediction from weighted source regions", "syndecomp"};
  app.require_subcommand(1);

  DataFlags est_flags;
  auto* estimate = app.add_subcommand("estimate", "fit ARFs and weights, print the point prediction");
  add_data_flags(estimate, est_flags);

  DataFlags inf_flags;
  auto* infer = app.add_subcommand("infer", "bootstrap, weight confidence set and interval for the prediction");
  add_data_flags(infer, inf_flags);
  infer->add_flag("--robust", inf_flags.robust, "rebuild the metric at every grid point (singular H)");

  std::string family = "linear";
  std::size_t n0 = 1000;
  double s = 0.9;
  std::string preset = "reduced";
  std::size_t R = 0;
  std::size_t B = 0;
  std::uint64_t mc_seed = AnalysisConfig{}.master_seed;
  std::size_t mc_jobs = 1;
  std::string mc_out;
  std::string csv_prefix;
  bool estimate_only = false;
  auto* mc = app.add_subcommand("mc", "Monte Carlo coverage and accuracy study");
  mc->add_option("--family", family, "linear or nonlinear")->check(CLI::IsMember({"linear", "nonlinear"}));
  mc->add_option("--n0", n0, "observations per region");
  mc->add_option("--s", s, "overlap fraction in (0, 1]");
  mc->add_option("--preset", preset, "reduced (R=300, B=299) or full (R=1000, B=999)")
      ->check(CLI::IsMember({"reduced", "full"}));
  auto* r_opt = mc->add_option("--R", R, "replications (overrides the preset)");
  auto* b_opt = mc->add_option("--B", B, "bootstrap draws (overrides the preset)");
  auto* mc_seed_opt = mc->add_option("--seed", mc_seed, "master seed");
  mc->add_option("--jobs", mc_jobs, "worker threads")->check(CLI::PositiveNumber);
  mc->add_option("--out", mc_out, "write the JSON report here instead of stdout");
  mc->add_option("--csv", csv_prefix, "write PREFIX_coverage.csv and PREFIX_accuracy.csv");
  mc->add_flag("--estimate-only", estimate_only, "skip the bootstrap and report point accuracy only");

  std::string sim_out;
  std::string sim_family = "linear";
  std::size_t sim_n0 = 1000;
  double sim_s = 0.9;
  std::uint64_t sim_seed = 1;
  auto* simulate = app.add_subcommand("simulate", "write one Monte Carlo dataset as CSV");
  simulate->add_option("--family", sim_family)->check(CLI::IsMember({"linear", "nonlinear"}));
  simulate->add_option("--n0", sim_n0);
  simulate->add_option("--s", sim_s);
  simulate->add_option("--seed", sim_seed);
  simulate->add_option("--out", sim_out, "CSV path")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*estimate) return cmd_estimate(est_flags, args, out, err);
    if (*infer) return cmd_infer(inf_flags, args, out, err);
    if (*simulate) {
      McSpec spec;
      spec.family = parse_family(sim_family);
      spec.n0 = sim_n0;
      spec.s = sim_s;
      const McData d = generate_mc_data(spec, sim_seed);
      CsvSchema schema;
      schema.covariate_columns = {"x"};
      write_csv(d.data, sim_out, schema);
      return exit_ok;
    }
    McSpec spec = mc_preset(preset, parse_family(family), n0, s);
    if (r_opt->count() > 0) spec.R = R;
    if (b_opt->count() > 0) spec.B = B;
    spec.validate();
    AnalysisConfig cfg;
    if (auto e = env_seed()) cfg.master_seed = *e;
    if (mc_seed_opt->count() > 0) cfg.master_seed = mc_seed;
    McOptions opts;
    opts.jobs = mc_jobs;
    opts.inference = !estimate_only;
    const auto start = Clock::now();
    const McResult result = run_mc(spec, cfg, opts);
    Json report;
    report["command"] = "mc";
    report["args"] = command_echo(args);
    report["seed"] = cfg.master_seed;
    report["config"] = config_json(cfg);
    report["result"] = mc_json(result);
    emit(report, mc_out, out);
    if (!csv_prefix.empty()) {
      std::ofstream(csv_prefix + "_coverage.csv") << mc_coverage_csv({result});
      std::ofstream(csv_prefix + "_accuracy.csv") << mc_accuracy_csv({result});
    }
    err << "mc elapsed_seconds=" << seconds_since(start) << "\n";
    return exit_ok;
  } catch (const Error& e) {
    err << "error [" << e.module() << "/" << to_string(e.kind()) << "]: " << e.what() << "\n"
        << "hint: " << hint(e) << "\n";
    return e.is_input_error() ? exit_usage : exit_numeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_numeric;
  }
}

}  // namespace syndecomp
