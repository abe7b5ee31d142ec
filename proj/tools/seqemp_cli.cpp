// Command-line front end. Each subcommand writes <out>/<command>.csv (a
// '#'-prefixed metadata header, then a deterministic body) and
// <out>/<command>.jsonl (one summary line).
//
// Exit codes: 0 ok, 2 configuration or parameter error, 3 numerical failure,
// 1 anything else (I/O).

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "seqemp/seqemp.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace seqemp;

namespace {

// ---------------------------------------------------------------------------
// Options shared by every subcommand.

struct Common {
  std::string family = "iid";
  int m = 1;
  double phi = 0.5;
  std::size_t dim = 1;
  std::optional<double> rho;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  std::string out = ".";

  SequenceSpec spec() const {
    SequenceSpec s = family == "mdependent" ? SequenceSpec::mdependent(m, dim)
                     : family == "ar1"      ? SequenceSpec::ar1(phi, dim)
                                            : SequenceSpec::iid(dim);
    if (rho) s = s.with_equicorrelation(*rho);
    s.validate();
    return s;
  }
};

void add_common(CLI::App* sub, Common& c, bool with_spec = true) {
  if (with_spec) {
    sub->add_option("--family", c.family, "iid | mdependent | ar1")
        ->check(CLI::IsMember({"iid", "mdependent", "ar1"}))
        ->capture_default_str();
    sub->add_option("--m", c.m, "m-dependence window parameter")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--phi", c.phi, "AR(1) coefficient")->check(CLI::Range(-0.999999, 0.999999))->capture_default_str();
    sub->add_option("--dim", c.dim, "dimension d")->check(CLI::Range(1, 8))->capture_default_str();
    sub->add_option("--rho", c.rho, "equicorrelated Gaussian copula across coordinates")->check(CLI::Range(0.0, 0.999999));
  }
  sub->add_option("--seed", c.seed, "master seed")->capture_default_str();
  sub->add_option("--threads", c.threads, "worker threads (0 = all cores)")->capture_default_str();
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
}

// Resolved options of a subcommand, in declaration order.
json resolved_config(const CLI::App* sub) {
  json cfg = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    // The output directory does not affect results.
    if (name.empty() || name == "help" || name == "config" || name == "out") continue;
    if (opt->get_type_size() == 0) {
      cfg[name] = opt->count() > 0;
    } else if (opt->count() > 0) {
      const auto& res = opt->results();
      if (opt->get_expected_max() > 1) {
        cfg[name] = res;
      } else {
        cfg[name] = res.empty() ? "" : res.back();
      }
    } else {
      const std::string def = opt->get_default_str();
      if (def.empty()) {
        cfg[name] = nullptr;
      } else {
        cfg[name] = def;
      }
    }
  }
  return cfg;
}

std::string timestamp_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

// CSV + JSONL writer for one run.
class Report {
 public:
  Report(std::string command, const CLI::App* sub, const Common& c)
      : command_(std::move(command)), config_(resolved_config(sub)), seed_(c.seed), dir_(c.out) {}

  void columns(std::vector<std::string> names) { columns_ = std::move(names); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) body_ << (i ? "," : "") << cells[i];
    body_ << '\n';
  }

  json& summary() { return summary_; }

  void write() const {
    fs::create_directories(dir_);
    const fs::path csv = fs::path(dir_) / (command_ + ".csv");
    std::ofstream os(csv);
    if (!os) throw std::runtime_error("cannot write " + csv.string());
    os << "# tool: seqemp " << kVersion << '\n';
    os << "# command: " << command_ << '\n';
    os << "# seed: " << seed_ << '\n';
    os << "# out: " << dir_ << '\n';
    os << "# timestamp: " << timestamp_utc() << '\n';
    for (const auto& [key, value] : config_.items())
      os << "# config." << key << " = " << (value.is_string() ? value.get<std::string>() : value.dump()) << '\n';
    for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "," : "") << columns_[i];
    os << '\n' << body_.str();

    json line;
    line["tool"] = "seqemp";
    line["version"] = kVersion;
    line["command"] = command_;
    line["seed"] = seed_;
    line["config"] = config_;
    line["summary"] = summary_;
    std::ofstream js(fs::path(dir_) / (command_ + ".jsonl"));
    if (!js) throw std::runtime_error("cannot write summary file");
    js << line.dump() << '\n';
    std::cout << line["summary"].dump() << '\n';
  }

 private:
  std::string command_;
  json config_;
  std::uint64_t seed_;
  std::string dir_;
  std::vector<std::string> columns_;
  std::ostringstream body_;
  json summary_ = json::object();
};

Centering parse_centering(const std::string& s) { return s == "empirical" ? Centering::EmpiricalCdf : Centering::TrueCdf; }

std::vector<std::string> u_columns(std::size_t d) {
  std::vector<std::string> out;
  for (std::size_t j = 1; j <= d; ++j) out.push_back("u" + std::to_string(j));
  return out;
}

// Rows of numbers in [0,1]; '#' lines and a non-numeric first line are skipped.
StationarySample read_sample(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParameterError("cannot open input file " + path);
  std::vector<double> data;
  std::size_t dim = 0;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw ParameterError("non-numeric row in " + path);
    }
    first = false;
    if (dim == 0) dim = row.size();
    if (row.size() != dim) throw ParameterError("ragged rows in " + path);
    data.insert(data.end(), row.begin(), row.end());
  }
  if (dim == 0) throw ParameterError("no data rows in " + path);
  return StationarySample::from_rows(std::move(data), dim);
}

Rational parse_rational(const std::string& s) {
  const auto slash = s.find('/');
  try {
    if (slash == std::string::npos) return Rational(std::stoll(s));
    return Rational(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
  } catch (const std::exception&) {
    throw ParameterError("not a rational number: " + s);
  }
}

template <typename T, typename F>
std::vector<T> split_list(const std::string& s, F parse) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(parse(cell));
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands.

struct Simulate {
  Common c;
  std::size_t n = 1000;
  void add(CLI::App* sub) {
    add_common(sub, c);
    sub->add_option("--n", n, "sample size")->check(CLI::PositiveNumber)->capture_default_str();
  }
  void run(const CLI::App* sub) {
    const auto sample = generate(c.spec(), n, c.seed);
    Report rep("simulate", sub, c);
    auto cols = u_columns(sample.dim());
    cols.insert(cols.begin(), "i");
    rep.columns(cols);
    for (std::size_t i = 0; i < sample.n(); ++i) {
      std::vector<std::string> cells{std::to_string(i + 1)};
      for (double v : sample.row(i)) cells.push_back(num(v));
      rep.row(cells);
    }
    std::vector<double> means;
    for (std::size_t j = 0; j < sample.dim(); ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < sample.n(); ++i) acc += sample.at(i, j);
      means.push_back(acc / static_cast<double>(sample.n()));
    }
    rep.summary()["n"] = n;
    rep.summary()["spec"] = sample.spec().describe();
    rep.summary()["coordinate_means"] = means;
    rep.write();
  }
};

struct Evaluate {
  Common c;
  std::size_t n = 100;
  std::string centering = "true";
  std::string grid = "regular";
  std::size_t s_steps = 8, u_steps = 8;
  double delta = 0.1;
  void add(CLI::App* sub) {
    add_common(sub, c);
    sub->add_option("--n", n, "sample size")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--centering", centering, "true | empirical")->check(CLI::IsMember({"true", "empirical"}))->capture_default_str();
    sub->add_option("--grid", grid, "regular | sample (s = k/n, u = observed values)")
        ->check(CLI::IsMember({"regular", "sample"}))
        ->capture_default_str();
    sub->add_option("--s-steps", s_steps, "regular grid: s steps")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--u-steps", u_steps, "regular grid: u steps per axis")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--delta", delta, "modulus of continuity radius")->check(CLI::NonNegativeNumber)->capture_default_str();
  }
  void run(const CLI::App* sub) {
    const auto sample = generate(c.spec(), n, c.seed);
    const auto g = grid == "sample" ? EvaluationGrid::for_sample(sample) : EvaluationGrid::regular(sample.dim(), s_steps, u_steps);
    const auto field = eval_sequential(sample, parse_centering(centering), g);
    Report rep("evaluate", sub, c);
    auto cols = u_columns(sample.dim());
    cols.insert(cols.begin(), "s");
    cols.push_back("value");
    rep.columns(cols);
    const Lattice lattice = g.lattice();
    std::vector<double> u(sample.dim());
    for (std::size_t r = 0; r < field.rows(); ++r)
      for (std::size_t idx = 0; idx < lattice.size(); ++idx) {
        lattice.point(idx, u);
        std::vector<std::string> cells{num(g.s_points[r])};
        for (double x : u) cells.push_back(num(x));
        cells.push_back(num(field.at(r, idx)));
        rep.row(cells);
      }
    const auto last = field.row(field.rows() - 1);
    rep.summary()["n"] = n;
    rep.summary()["sup_abs"] = sup_norm(field);
    rep.summary()["sup_abs_final_row"] = sup_norm(last);
    rep.summary()["modulus_final_row"] = modulus_of_continuity(last, g.u_points, delta);
    rep.write();
  }
};

struct Limit {
  Common c;
  std::string kernel = "analytic";
  std::size_t kernel_n = 20000;
  std::optional<std::size_t> bandwidth;
  std::size_t reps = 1000, s_steps = 16, u_steps = 8;
  void add(CLI::App* sub) {
    add_common(sub, c);
    sub->add_option("--kernel", kernel, "analytic (iid only) | estimated")
        ->check(CLI::IsMember({"analytic", "estimated"}))
        ->capture_default_str();
    sub->add_option("--kernel-n", kernel_n, "sample size for the estimated kernel")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--bandwidth", bandwidth, "lag window L (default floor(n^{1/3}))");
    sub->add_option("--reps", reps, "replications")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--s-steps", s_steps, "s steps")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--u-steps", u_steps, "u steps per axis")->check(CLI::PositiveNumber)->capture_default_str();
  }
  void run(const CLI::App* sub) {
    const auto spec = c.spec();
    const auto g = EvaluationGrid::regular(spec.dim, s_steps, u_steps);
    CovKernelEstimate k;
    if (kernel == "analytic") {
      k = gamma_analytic_iid(g.u_points, spec);
    } else {
      const auto sample = generate(spec, kernel_n, derive_seed(c.seed, 0xC0FFEE));
      k = estimate_gamma(sample, g.u_points, bandwidth.value_or(default_bandwidth(kernel_n)));
    }
    const LimitSampler sampler(k);
    // Probe: s = 1 and the lattice point nearest the cube centre.
    const Lattice lattice(g.u_points);
    std::vector<std::size_t> mid(spec.dim, u_steps / 2);
    const std::size_t probe = lattice.index(mid);
    const std::size_t last = g.s_points.size() - 1;
    struct Row { double sup, cvm, probe; };
    const auto rows = parallel_map(reps, c.threads, [&](std::size_t r) {
      const auto f = sampler.draw(g.s_points, c.seed, r);
      return Row{apply_functional(Functional::SupAbs, f.values), apply_functional(Functional::CvM, f.values), f.at(last, probe)};
    });
    Report rep("limit", sub, c);
    rep.columns({"rep", "sup_abs", "cvm", "probe_value"});
    std::vector<double> sups, probes;
    for (std::size_t r = 0; r < reps; ++r) {
      rep.row({std::to_string(r), num(rows[r].sup), num(rows[r].cvm), num(rows[r].probe)});
      sups.push_back(rows[r].sup);
      probes.push_back(rows[r].probe);
    }
    const double var = stats::variance(probes);
    rep.summary()["kernel"] = kernel;
    rep.summary()["jitter"] = sampler.jitter();
    rep.summary()["mean_sup_abs"] = stats::mean(sups);
    rep.summary()["mean_sup_abs_se"] = std::sqrt(stats::variance(sups) / static_cast<double>(reps));
    rep.summary()["probe_u"] = lattice.point(probe);
    rep.summary()["probe_gamma"] = k.gamma(static_cast<Eigen::Index>(probe), static_cast<Eigen::Index>(probe));
    rep.summary()["probe_variance"] = var;
    rep.summary()["probe_variance_se"] = var * std::sqrt(2.0 / static_cast<double>(reps > 1 ? reps - 1 : 1));
    rep.write();
  }
};

struct Ottaviani {
  Common c;
  std::string mode = "mc";
  std::size_t n = 64;
  std::optional<std::size_t> ell;
  double eta = 0.8;
  std::vector<double> eps_list{0.25, 0.5, 1.0};
  std::size_t reps = 500;
  std::string index_family = "singletons";
  double delta = 0.1;
  std::size_t u_steps = 8;
  std::string centering = "true";
  bool independent_inner = false;
  std::vector<std::string> steps, probs, transition;
  void add(CLI::App* sub) {
    add_common(sub, c);
    sub->add_option("--mode", mode, "mc | exact")->check(CLI::IsMember({"mc", "exact"}))->capture_default_str();
    sub->add_option("--n", n, "number of steps")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--ell", ell, "block length (default: blocking plan from eta)");
    sub->add_option("--eta", eta, "mixing-rate exponent for the blocking plan")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--eps-list", eps_list, "epsilon values")->capture_default_str();
    sub->add_option("--reps", reps, "Monte Carlo replications")->capture_default_str();
    sub->add_option("--index-family", index_family, "singletons | pairs")
        ->check(CLI::IsMember({"singletons", "pairs"}))
        ->capture_default_str();
    sub->add_option("--delta", delta, "pair radius for increment pairs")->check(CLI::NonNegativeNumber)->capture_default_str();
    sub->add_option("--u-steps", u_steps, "u steps per axis")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--centering", centering, "true | empirical")->check(CLI::IsMember({"true", "empirical"}))->capture_default_str();
    sub->add_flag("--independent-inner", independent_inner, "inner factor from an independent replication set");
    sub->add_option("--steps", steps, "exact mode: per-outcome integer vectors, e.g. [\"1\", \"-1\"]");
    sub->add_option("--probs", probs, "exact mode: outcome probabilities as rationals");
    sub->add_option("--transition", transition, "exact mode: Markov transition rows, e.g. [\"3/4,1/4\", \"1/4,3/4\"]");
  }

  void emit(Report& rep, const InequalityReport& r) {
    rep.row({num(r.epsilon), std::to_string(r.ell), std::to_string(r.n), std::to_string(r.reps), num(r.lhs_est.value),
             num(r.lhs_est.se), num(r.rhs_est.value), num(r.rhs_est.se), num(r.max_exceed.value),
             num(r.denominator_est.value), num(r.rhs_term_supS.value), num(r.rhs_term_block.value), num(r.alpha_ell),
             num(r.rhs_term_mixing), num(r.combined_se), r.exact ? "true" : "false", r.pass ? "true" : "false"});
  }

  void run(const CLI::App* sub) {
    Report rep("ottaviani", sub, c);
    rep.columns({"epsilon", "ell", "n", "reps", "lhs", "lhs_se", "rhs", "rhs_se", "p_max_exceed", "inner_factor",
                 "term_sup_sn", "term_block", "alpha_ell", "term_mixing", "combined_se", "exact", "pass"});
    if (eps_list.empty()) throw ParameterError("eps-list must not be empty");
    bool all_pass = true;
    json cells = json::array();
    if (mode == "exact") {
      if (steps.empty()) throw ParameterError("exact mode needs steps");
      std::vector<std::vector<std::int64_t>> values;
      for (const auto& s : steps)
        values.push_back(split_list<std::int64_t>(s, [](const std::string& x) {
          try {
            return static_cast<std::int64_t>(std::stoll(x));
          } catch (const std::exception&) {
            throw ParameterError("step values must be integers: " + x);
          }
        }));
      FiniteStepModel model;
      if (!transition.empty()) {
        std::vector<std::vector<Rational>> P;
        for (const auto& row : transition) P.push_back(split_list<Rational>(row, parse_rational));
        model = FiniteStepModel::markov(values, P);
      } else {
        std::vector<Rational> p;
        for (const auto& x : probs) p.push_back(parse_rational(x));
        model = FiniteStepModel::independent(values, p);
      }
      const std::size_t L = ell.value_or(1);
      for (double eps : eps_list) {
        const auto res = verify_inequality_exact(model, n, L, eps);
        emit(rep, res.report);
        all_pass = all_pass && res.holds;
        cells.push_back({{"epsilon", eps}, {"lhs", res.lhs.str()}, {"rhs", res.rhs.str()}, {"pass", res.holds}});
      }
      rep.summary()["mode"] = "exact";
      rep.summary()["ell"] = L;
    } else {
      const auto spec = c.spec();
      const BlockingPlan plan = blocking_plan(n, eta);
      const std::size_t L = ell.value_or(plan.ell_n);
      PartialSumFamily fam{index_family == "pairs" ? IndexFamily::IncrementPairs : IndexFamily::Singletons, delta,
                           std::vector<std::vector<double>>(spec.dim, regular_axis(u_steps)), parse_centering(centering)};
      McOptions opt;
      opt.threads = c.threads;
      opt.independent_inner = independent_inner;
      for (const auto& r : verify_inequality_mc(spec, fam, n, L, eps_list, reps, c.seed, opt)) {
        emit(rep, r);
        all_pass = all_pass && r.pass;
        cells.push_back({{"epsilon", r.epsilon}, {"lhs", r.lhs_est.value}, {"lhs_se", r.lhs_est.se},
                         {"rhs", r.rhs_est.value}, {"rhs_se", r.rhs_est.se}, {"pass", r.pass}});
      }
      rep.summary()["mode"] = "mc";
      rep.summary()["ell"] = L;
      rep.summary()["kappa"] = plan.kappa;
      rep.summary()["eta_outside_unit_interval"] = plan.eta_outside_unit_interval;
      if (plan.eta_outside_unit_interval)
        std::cerr << "warning: eta >= 1 lies outside the range assumed by the blocking argument\n";
    }
    rep.summary()["cells"] = cells;
    rep.summary()["pass"] = all_pass;
    rep.write();
  }
};

struct Diagnose {
  Common c;
  std::string functional = "sup";
  std::vector<std::size_t> n_list{128, 2048};
  std::size_t reps = 500, s_steps = 64, u_steps = 64, kernel_n = 20000;
  void add(CLI::App* sub) {
    add_common(sub, c);
    sub->add_option("--functional", functional, "sup | cvm")->check(CLI::IsMember({"sup", "cvm"}))->capture_default_str();
    sub->add_option("--n-list", n_list, "sample sizes")->capture_default_str();
    sub->add_option("--reps", reps, "replications per side")->capture_default_str();
    sub->add_option("--s-steps", s_steps, "s steps")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--u-steps", u_steps, "u steps per axis")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--kernel-n", kernel_n, "sample size for the estimated kernel")->check(CLI::PositiveNumber)->capture_default_str();
  }
  void run(const CLI::App* sub) {
    DiagnosticOptions opt;
    opt.s_steps = s_steps;
    opt.u_steps = u_steps;
    opt.threads = c.threads;
    opt.kernel_sample_size = kernel_n;
    const auto report = weak_convergence_diagnostic(c.spec(), functional == "cvm" ? Functional::CvM : Functional::SupAbs,
                                                    n_list, reps, c.seed, opt);
    Report rep("diagnose", sub, c);
    rep.columns({"n", "ks", "ks_critical_1pct", "mean_process", "mean_limit"});
    for (const auto& r : report.rows)
      rep.row({std::to_string(r.n), num(r.ks), num(r.ks_critical_1pct), num(r.mean_process), num(r.mean_limit)});
    rep.summary()["analytic_kernel"] = report.analytic_kernel;
    rep.summary()["ks_first"] = report.rows.front().ks;
    rep.summary()["ks_last"] = report.rows.back().ks;
    rep.summary()["decreasing"] = report.decreasing();
    rep.write();
  }
};

struct Changepoint {
  Common c;
  std::size_t n = 1024;
  double level = 0.05;
  std::size_t calib_reps = 500, s_steps = 64, u_steps = 16, replications = 1;
  std::optional<std::size_t> bandwidth;
  std::string alternative = "none";
  std::string input;
  void add(CLI::App* sub) {
    add_common(sub, c);
    sub->add_option("--n", n, "sample size")->capture_default_str();
    sub->add_option("--level", level, "test level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    sub->add_option("--calib-reps", calib_reps, "limit simulations per test")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--bandwidth", bandwidth, "lag window L (default floor(n^{1/3}))");
    sub->add_option("--s-steps", s_steps, "s steps")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--u-steps", u_steps, "u steps per axis")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--replications", replications, "independent samples to test")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--alternative", alternative, "none | half-cube (second half mapped to U^{1/3}, re-ranked)")
        ->check(CLI::IsMember({"none", "half-cube"}))
        ->capture_default_str();
    sub->add_option("--input", input, "CSV of observations in [0,1] (replaces the generator)");
  }
  void run(const CLI::App* sub) {
    ChangepointCalibration calib;
    calib.reps = calib_reps;
    calib.bandwidth = bandwidth;
    calib.s_steps = s_steps;
    calib.u_steps = u_steps;
    const std::size_t R = input.empty() ? replications : 1;
    const auto spec = input.empty() ? c.spec() : SequenceSpec{};
    // Outer loop in parallel, calibration sequential inside.
    const auto results = parallel_map(R, c.threads, [&](std::size_t r) {
      StationarySample sample = input.empty() ? generate(spec, n, derive_seed(c.seed, r)) : read_sample(input);
      if (alternative == "half-cube") sample = half_sample_distortion(sample);
      ChangepointCalibration local = calib;
      local.seed = derive_seed(c.seed, 0x5EED0000 + r);
      return changepoint_test(sample, level, local);
    });
    Report rep("changepoint", sub, c);
    rep.columns({"replication", "statistic", "critical_value", "p_value", "reject", "bandwidth"});
    std::size_t rejects = 0;
    for (std::size_t r = 0; r < R; ++r) {
      const auto& t = results[r];
      rejects += t.reject;
      rep.row({std::to_string(r), num(t.statistic), num(t.critical_value), num(t.p_value), t.reject ? "1" : "0",
               std::to_string(t.bandwidth)});
    }
    const double rate = static_cast<double>(rejects) / static_cast<double>(R);
    rep.summary()["replications"] = R;
    rep.summary()["rejection_rate"] = rate;
    rep.summary()["rejection_rate_se"] = stats::proportion_se(rate, R);
    if (R == 1) {
      rep.summary()["statistic"] = results[0].statistic;
      rep.summary()["critical_value"] = results[0].critical_value;
      rep.summary()["p_value"] = results[0].p_value;
      rep.summary()["reject"] = results[0].reject;
    }
    rep.write();
  }
};

struct Ci {
  Common c;
  std::size_t n = 2048;
  double level = 0.05;
  std::size_t crit_reps = 100000, crit_grid = 10000, replications = 1;
  std::uint64_t crit_seed = SelfNormCriticalOptions{}.seed;
  std::string input;
  void add(CLI::App* sub) {
    add_common(sub, c);
    sub->add_option("--n", n, "sample size")->capture_default_str();
    sub->add_option("--level", level, "1 - nominal coverage")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    sub->add_option("--crit-reps", crit_reps, "Brownian paths for the critical value")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--crit-grid", crit_grid, "grid points per Brownian path")->check(CLI::Range(2, 1000000))->capture_default_str();
    sub->add_option("--crit-seed", crit_seed, "seed of the critical-value simulation")->capture_default_str();
    sub->add_option("--replications", replications, "independent samples")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--input", input, "CSV of observations in [0,1] (replaces the generator)");
  }
  void run(const CLI::App* sub) {
    SelfNormCriticalOptions copt{crit_reps, crit_grid, crit_seed, resolve_threads(c.threads)};
    const double crit = selfnorm_critical_value(level, copt);
    const std::size_t R = input.empty() ? replications : 1;
    const auto spec = input.empty() ? c.spec() : SequenceSpec{};
    const auto cis = parallel_map(R, c.threads, [&](std::size_t r) {
      const StationarySample sample = input.empty() ? generate(spec, n, derive_seed(c.seed, r)) : read_sample(input);
      return selfnorm_ci(sample, level, crit);
    });
    const auto truth = input.empty() ? integral_functional_truth(spec) : std::nullopt;
    Report rep("ci", sub, c);
    rep.columns({"replication", "theta_hat", "lo", "hi", "normalizer", "degenerate", "covered"});
    std::size_t covered = 0;
    for (std::size_t r = 0; r < R; ++r) {
      const auto& ci = cis[r];
      const bool hit = truth && ci.lo <= *truth && *truth <= ci.hi;
      covered += hit;
      rep.row({std::to_string(r), num(ci.theta_hat), num(ci.lo), num(ci.hi), num(ci.normalizer), ci.degenerate ? "1" : "0",
               truth ? (hit ? "1" : "0") : ""});
    }
    rep.summary()["critical_value"] = crit;
    rep.summary()["replications"] = R;
    if (truth) {
      const double cov = static_cast<double>(covered) / static_cast<double>(R);
      rep.summary()["theta"] = *truth;
      rep.summary()["coverage"] = cov;
      rep.summary()["coverage_se"] = stats::proportion_se(cov, R);
    } else {
      rep.summary()["theta"] = nullptr;
    }
    if (R == 1) {
      rep.summary()["theta_hat"] = cis[0].theta_hat;
      rep.summary()["lo"] = cis[0].lo;
      rep.summary()["hi"] = cis[0].hi;
    }
    rep.write();
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential empirical process experiments"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "TOML config; keys go under a [<command>] section");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.fallthrough();
  app.require_subcommand(1);

  Simulate simulate;
  Evaluate evaluate;
  Limit limit;
  Ottaviani ottaviani;
  Diagnose diagnose;
  Changepoint changepoint;
  Ci ci;
  std::map<CLI::App*, std::function<void(const CLI::App*)>> runners;
  auto reg = [&](const char* name, const char* help, auto& cmd) {
    CLI::App* sub = app.add_subcommand(name, help);
    cmd.add(sub);
    runners[sub] = [&cmd](const CLI::App* s) { cmd.run(s); };
  };
  reg("simulate", "draw a stationary sample", simulate);
  reg("evaluate", "evaluate the sequential empirical process on a grid", evaluate);
  reg("limit", "simulate the Gaussian limit field", limit);
  reg("ottaviani", "check the maximal inequality (Monte Carlo or exact)", ottaviani);
  reg("diagnose", "compare process and limit functionals across n", diagnose);
  reg("changepoint", "CUSUM change-point test", changepoint);
  reg("ci", "self-normalized confidence interval", ci);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    for (auto& [sub, run] : runners)
      if (sub->parsed()) run(sub);
  } catch (const ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "parameter error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
