#pragma once

// Experiment drivers behind the command-line tool: method specifications,
// sequence runs over a worker pool, output-error tracking, the weight-scheme
// study and the bound-verification sweep. Each driver writes CSV/JSON into an
// output directory and returns a process exit code.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "recykl/analysis.hpp"
#include "recykl/problems.hpp"
#include "recykl/threestage.hpp"
#include "recykl/truncation.hpp"
#include "recykl/weights.hpp"

namespace recykl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitBoundViolated = 1;
inline constexpr int kExitNotConverged = 2;
inline constexpr int kExitConfig = 3;

// ---------------------------------------------------------------------------
// Method specifications

inline ToleranceSchedule schedule_by_name(const std::string& s) {
  if (s == "standard") return ToleranceSchedule::standard();
  if (s == "stg1") return ToleranceSchedule::pod_it_stg1();
  if (s == "mixed") return ToleranceSchedule::pod_it_mixed();
  if (s == "stg2") return ToleranceSchedule::pod_it_stg2();
  throw InvalidConfig("unknown tolerance schedule '" + s + "'");
}

struct MethodSpec {
  std::string name;
  bool recycle = true;
  std::string strategy = "none";
  std::optional<std::size_t> storage_cap;
  std::optional<std::size_t> retain_dim;
  std::optional<std::size_t> stage1_dim;
  double nu_y = 1.0;
  double nu_w = 1.0;
  double rho = 1.0;
  bool inner_iterative = false;
  bool keep_history = false;
  std::string schedule = "standard";
  std::optional<std::string> precond;  // overrides the run-wide choice

  ThreeStageConfig config(const PreconditionerSpec& fallback) const {
    ThreeStageConfig c;
    c.recycle = recycle;
    parse_strategy(strategy, c.truncation);
    if (storage_cap) c.truncation.storage_cap = *storage_cap;
    c.truncation.retain_dim = retain_dim;
    c.truncation.stage1_dim = stage1_dim;
    c.truncation.nu_y = nu_y;
    c.truncation.nu_w = nu_w;
    c.truncation.stage1_threshold = rho;
    c.truncation.keep_history_across_truncation = keep_history;
    c.truncation.validate();
    c.inner_iterative = inner_iterative;
    c.schedule = schedule_by_name(schedule);
    c.precond = precond ? PreconditionerSpec::parse(*precond) : fallback;
    return c;
  }
};

inline void to_json(nlohmann::json& j, const MethodSpec& m) {
  j = {{"name", m.name},   {"recycle", m.recycle},         {"strategy", m.strategy}, {"nu_y", m.nu_y},
       {"nu_w", m.nu_w},   {"rho", m.rho},                 {"phi", m.inner_iterative ? 1 : 0},
       {"schedule", m.schedule}, {"keep_history", m.keep_history}};
  if (m.storage_cap) j["storage_cap"] = *m.storage_cap;
  if (m.retain_dim) j["retain_dim"] = *m.retain_dim;
  if (m.stage1_dim) j["stage1_dim"] = *m.stage1_dim;
  if (m.precond) j["precond"] = *m.precond;
}

inline void from_json(const nlohmann::json& j, MethodSpec& m) {
  static const std::set<std::string> known = {"name",   "recycle",  "strategy",     "storage_cap", "retain_dim",
                                              "stage1_dim", "nu_y", "nu_w",         "rho",         "phi",
                                              "schedule",   "keep_history", "precond"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw InvalidConfig("method spec: unknown field '" + k + "'");
  if (!j.contains("name")) throw InvalidConfig("method spec: missing name");
  m = MethodSpec{};
  m.name = j.at("name").get<std::string>();
  m.recycle = j.value("recycle", true);
  m.strategy = j.value("strategy", std::string("none"));
  const auto opt_size = [&](const char* key) -> std::optional<std::size_t> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::size_t>();
  };
  m.storage_cap = opt_size("storage_cap");
  m.retain_dim = opt_size("retain_dim");
  m.stage1_dim = opt_size("stage1_dim");
  m.nu_y = j.value("nu_y", 1.0);
  m.nu_w = j.value("nu_w", 1.0);
  m.rho = j.value("rho", 1.0);
  const int phi = j.value("phi", 0);
  if (phi != 0 && phi != 1) throw InvalidConfig("method spec: phi must be 0 or 1");
  m.inner_iterative = phi == 1;
  m.keep_history = j.value("keep_history", false);
  m.schedule = j.value("schedule", std::string("standard"));
  if (j.contains("precond")) m.precond = j.at("precond").get<std::string>();
}

inline void check_unique_names(const std::vector<MethodSpec>& methods) {
  std::set<std::string> seen;
  for (const auto& m : methods)
    if (!seen.insert(m.name).second) throw InvalidConfig("duplicate method name '" + m.name + "'");
}

inline std::vector<MethodSpec> load_methods(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open method file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidConfig("method file '" + path + "': " + e.what());
  }
  if (!j.is_array()) throw InvalidConfig("method file '" + path + "' must hold a JSON array");
  std::vector<MethodSpec> out;
  try {
    for (const auto& e : j) out.push_back(e.get<MethodSpec>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig("method file '" + path + "': " + e.what());
  }
  check_unique_names(out);
  for (const auto& m : out) m.config(PreconditionerSpec{});
  return out;
}

// The comparison set at storage cap ybar: plain PCG, recycling without
// truncation, deflation and POD to ybar/2, the inner-iterative POD variants
// with a 5-vector stage 1, and the output-metric POD when C is available.
inline std::vector<MethodSpec> default_methods(std::size_t ybar = 50, bool with_output = false) {
  const std::size_t keep = std::max<std::size_t>(1, ybar / 2);
  const std::size_t w = std::min<std::size_t>(5, keep);
  const std::string kd = std::to_string(keep), split = std::to_string(w) + "," + std::to_string(keep - w);
  std::vector<MethodSpec> out;

  MethodSpec pcg;
  pcg.name = "PCG";
  pcg.recycle = false;
  out.push_back(pcg);

  MethodSpec full;
  full.name = "no-truncation";
  out.push_back(full);

  MethodSpec df;
  df.name = "DF(" + kd + ",0)";
  df.strategy = "deflate:" + kd;
  df.storage_cap = ybar;
  out.push_back(df);

  MethodSpec pod;
  pod.name = "POD(" + kd + ",0)";
  pod.strategy = "pod-a-rbf";
  pod.storage_cap = ybar;
  pod.retain_dim = keep;
  out.push_back(pod);

  const struct {
    const char* tag;
    double rho;
  } variants[] = {{"stg1", 1.0}, {"mixed", 1e-3}, {"stg2", 0.0}};
  for (const auto& v : variants) {
    MethodSpec it = pod;
    it.name = "POD(" + split + ")it " + v.tag;
    it.stage1_dim = w;
    it.rho = v.rho;
    it.inner_iterative = true;
    it.schedule = v.tag;
    out.push_back(it);
  }

  if (with_output) {
    MethodSpec ctc = pod;
    ctc.name = "POD-CtC(" + kd + ",0)";
    ctc.strategy = "pod-ctc-rbf";
    out.push_back(ctc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Worker pool

inline std::size_t resolve_threads(std::optional<std::size_t> flag) {
  if (flag && *flag > 0) return *flag;
  if (const char* env = std::getenv("RECYKL_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw InvalidConfig(std::string("RECYKL_THREADS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs task(i) for i < count on up to `threads` workers; the first exception
// is rethrown after all workers finish.
inline void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& task) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Sequence runs

struct MethodRun {
  MethodSpec spec;
  std::optional<double> tol;  // sweep value, none for the manifest tolerances
  SequenceRun run;
};

struct MethodAverages {
  std::string method;
  std::optional<double> tol;
  std::size_t systems = 0;
  double matvecs = 0.0;
  double precond_applications = 0.0;
  double stage3_iters = 0.0;
  double wall_ms = 0.0;
  bool all_converged = true;
};

inline std::vector<double> default_tolerance_sweep() { return {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}; }

inline std::vector<MethodRun> run_methods(const SystemSequence& seq, const std::vector<MethodSpec>& methods,
                                          const std::vector<std::optional<double>>& tols,
                                          const PreconditionerSpec& precond, std::size_t threads,
                                          bool diagnostics = false) {
  check_unique_names(methods);
  std::vector<MethodRun> out;
  for (const auto& m : methods)
    for (const auto& t : tols) out.push_back({m, t, {}});
  std::vector<ThreeStageConfig> cfgs;
  for (const auto& r : out) {
    ThreeStageConfig c = r.spec.config(precond);
    c.tol = r.tol;
    c.diagnostics = diagnostics;
    cfgs.push_back(std::move(c));
  }
  parallel_for(out.size(), threads, [&](std::size_t i) { out[i].run = run_sequence(seq, cfgs[i], true); });
  return out;
}

inline MethodAverages averages(const MethodRun& r) {
  MethodAverages a;
  a.method = r.spec.name;
  a.tol = r.tol;
  a.systems = r.run.reports.size();
  a.all_converged = r.run.all_converged;
  for (const auto& rep : r.run.reports) {
    a.matvecs += static_cast<double>(rep.matvecs);
    a.precond_applications += static_cast<double>(rep.precond_applications);
    a.stage3_iters += static_cast<double>(rep.stage3_iters);
    a.wall_ms += rep.wall_ms;
  }
  if (a.systems) {
    const double s = static_cast<double>(a.systems);
    a.matvecs /= s;
    a.precond_applications /= s;
    a.stage3_iters /= s;
    a.wall_ms /= s;
  }
  return a;
}

namespace detail {

inline std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

inline std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p);
  if (!f) throw Error("cannot write '" + p.string() + "'");
  return f;
}

inline std::string tol_label(const std::optional<double>& t) { return t ? num(*t) : "manifest"; }

}  // namespace detail

inline const char* kRunCsvHeader =
    "method,tol,j,matvecs,precond_apps,stage1_dim,basis_dim,stage2_iters,stage3_iters,inner_iters,wall_ms,"
    "final_residual,converged";

inline void write_run_outputs(const std::vector<MethodRun>& runs, const std::filesystem::path& dir,
                              bool diagnostics) {
  namespace fs = std::filesystem;
  auto csv = detail::open_out(dir / "runs.csv");
  csv << kRunCsvHeader << '\n';
  auto avg = detail::open_out(dir / "averages.csv");
  avg << "method,tol,systems,avg_matvecs,avg_precond_apps,avg_stage3_iters,avg_wall_ms,all_converged\n";
  std::ofstream trace;
  if (diagnostics) {
    trace = detail::open_out(dir / "conditioning.csv");
    trace << "method,tol,j,jbar,basis_dim,lhs,y_norm_sq,a_diff_norm,kappa,hypotheses\n";
  }
  nlohmann::json summary = nlohmann::json::array();
  std::map<std::string, std::size_t> tol_index;
  for (const auto& r : runs) {
    const std::string tl = detail::tol_label(r.tol);
    for (const auto& rep : r.run.reports)
      csv << '"' << r.spec.name << '"' << ',' << detail::num(rep.tol) << ',' << rep.j << ',' << rep.matvecs << ','
          << rep.precond_applications << ',' << rep.stage1_dim << ',' << rep.basis_dim << ',' << rep.stage2_iters
          << ',' << rep.stage3_iters << ',' << rep.inner_iters << ',' << detail::num(rep.wall_ms) << ','
          << detail::num(rep.final_residual) << ',' << (rep.converged ? 1 : 0) << '\n';
    const MethodAverages a = averages(r);
    avg << '"' << a.method << '"' << ',' << tl << ',' << a.systems << ',' << detail::num(a.matvecs) << ','
        << detail::num(a.precond_applications) << ',' << detail::num(a.stage3_iters) << ','
        << detail::num(a.wall_ms) << ',' << (a.all_converged ? 1 : 0) << '\n';
    summary.push_back({{"method", r.spec},
                       {"tol", tl},
                       {"systems", a.systems},
                       {"avg_matvecs", a.matvecs},
                       {"avg_precond_apps", a.precond_applications},
                       {"avg_stage3_iters", a.stage3_iters},
                       {"avg_wall_ms", a.wall_ms},
                       {"all_converged", a.all_converged}});

    const std::size_t ti = tol_index.emplace(r.spec.name + "|" + tl, tol_index.size()).first->second;
    auto hist = detail::open_out(dir / "histories" / (detail::slug(r.spec.name) + "_" + std::to_string(ti) + ".csv"));
    hist << "j,k,residual\n";
    for (const auto& rep : r.run.reports)
      for (std::size_t k = 0; k < rep.residual_history.size(); ++k)
        hist << rep.j << ',' << k << ',' << detail::num(rep.residual_history[k]) << '\n';
    if (diagnostics)
      for (const auto& e : r.run.trace)
        trace << '"' << r.spec.name << '"' << ',' << tl << ',' << e.j << ',' << e.jbar << ',' << e.basis_dim << ','
              << detail::num(e.lhs) << ',' << detail::num(e.y_norm_sq) << ',' << detail::num(e.a_diff_norm) << ','
              << detail::num(e.kappa) << ',' << (e.hypotheses ? 1 : 0) << '\n';
  }
  detail::open_out(dir / "summary.json") << summary.dump(2) << '\n';
}

struct RunArgs {
  std::string manifest;
  std::optional<std::string> methods_file;
  bool tol_sweep = false;
  std::string precond = "ssor";
  std::optional<std::size_t> threads;
  bool diagnostics = false;
  std::string out_dir = "out";
  std::size_t ybar = 50;
};

inline int cmd_run(const RunArgs& args) {
  const SystemSequence seq = load_sequence(args.manifest);
  const auto methods =
      args.methods_file ? load_methods(*args.methods_file) : default_methods(args.ybar, seq.output_matrix.has_value());
  std::vector<std::optional<double>> tols;
  if (args.tol_sweep)
    for (double t : default_tolerance_sweep()) tols.emplace_back(t);
  else
    tols.emplace_back(std::nullopt);
  const auto runs = run_methods(seq, methods, tols, PreconditionerSpec::parse(args.precond),
                                resolve_threads(args.threads), args.diagnostics);
  write_run_outputs(runs, args.out_dir, args.diagnostics);
  for (const auto& r : runs)
    if (!r.run.all_converged) return kExitNotConverged;
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Generation

struct GenerateArgs {
  DiffusionParams params;
  std::size_t outputs = 0;  // rows of C, 0 for none
  std::string out_dir = "sequence";
};

inline int cmd_generate(const GenerateArgs& args) {
  SystemSequence seq = gen_diffusion_sequence(args.params);
  if (args.outputs > 0) seq.output_matrix = gen_output_matrix(args.outputs, seq.n, args.params.seed + 1);
  write_sequence(seq, args.out_dir);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Output-oriented error

struct OutputCost {
  double matvecs = 0.0;
  double precond_applications = 0.0;
  double wall_ms = 0.0;
  bool met = false;
};

// Dense-free reference solution from tightly converged SSOR-PCG.
inline Vector reference_solution(const LinearSystem& sys) {
  PcgOptions opt;
  opt.tol = 1e-13 * std::max(1.0, norm2(sys.b));
  opt.max_iter = 20 * sys.a.n() + 100;
  const Preconditioner m = Preconditioner::build(PreconditionerSpec::parse("ssor"), sys.a);
  return pcg(sys.a, sys.b, {}, preconditioner_fn(m, nullptr), opt).x;
}

// For each system and each tau: the cost when ||C (x* - x)||_2 first drops
// below tau, counting the initial guess at zero cost. Unmet thresholds keep
// the full solve cost.
inline std::vector<std::vector<OutputCost>> output_error_costs(const SystemSequence& seq, const MethodSpec& method,
                                                               const std::vector<double>& taus,
                                                               const PreconditionerSpec& precond) {
  if (!seq.output_matrix) throw InvalidConfig("output-error: the sequence has no output matrix");
  const DenseMatrix& c = *seq.output_matrix;
  ThreeStageConfig cfg = method.config(precond);
  cfg.output_matrix = &c;
  cfg.throw_on_failure = false;
  RecycleState st;
  std::vector<std::vector<OutputCost>> out;
  for (std::size_t j = 0; j < seq.systems.size(); ++j) {
    const LinearSystem& sys = seq.systems[j];
    const Vector xstar = reference_solution(sys);
    std::vector<OutputCost> cost(taus.size());
    double observer_ms = 0.0;
    std::chrono::steady_clock::time_point t0;
    const auto err = [&](std::span<const double> x) { return norm2(gemv(c, subtract(xstar, x))); };
    const auto mark = [&](double e, const CounterSnapshot& s, double wall) {
      for (std::size_t i = 0; i < taus.size(); ++i)
        if (!cost[i].met && e < taus[i])
          cost[i] = {static_cast<double>(s.matvecs), static_cast<double>(s.precond_applications), wall, true};
    };
    mark(err(sys.xguess.empty() ? Vector(seq.n, 0.0) : sys.xguess), {}, 0.0);
    cfg.observer = [&](int, std::span<const double> x, const CounterSnapshot& s) {
      const auto a = std::chrono::steady_clock::now();
      const double wall = std::chrono::duration<double, std::milli>(a - t0).count() - observer_ms;
      mark(err(x), s, wall);
      observer_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - a).count();
    };
    t0 = std::chrono::steady_clock::now();
    const SolveOutcome o = solve_system(sys, st, cfg, j + 1);
    for (auto& ci : cost)
      if (!ci.met)
        ci = {static_cast<double>(o.report.matvecs), static_cast<double>(o.report.precond_applications),
              o.report.wall_ms - observer_ms, false};
    out.push_back(std::move(cost));
  }
  return out;
}

struct OutputErrorArgs {
  std::string manifest;
  std::optional<std::string> methods_file;
  std::vector<double> taus = {std::numeric_limits<double>::infinity(), 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  std::string precond = "ssor";
  std::optional<std::size_t> threads;
  std::string out_dir = "out";
  std::size_t ybar = 50;
};

inline int cmd_output_error(const OutputErrorArgs& args) {
  const SystemSequence seq = load_sequence(args.manifest);
  if (!seq.output_matrix) throw InvalidConfig("output-error: manifest has no output matrix");
  const auto methods = args.methods_file ? load_methods(*args.methods_file) : default_methods(args.ybar, true);
  check_unique_names(methods);
  const PreconditionerSpec pre = PreconditionerSpec::parse(args.precond);
  std::vector<std::vector<std::vector<OutputCost>>> costs(methods.size());
  parallel_for(methods.size(), resolve_threads(args.threads),
               [&](std::size_t i) { costs[i] = output_error_costs(seq, methods[i], args.taus, pre); });
  auto avg = detail::open_out(std::filesystem::path(args.out_dir) / "output_error.csv");
  avg << "method,tau,avg_matvecs,avg_precond_apps,avg_wall_ms,met_fraction\n";
  auto per = detail::open_out(std::filesystem::path(args.out_dir) / "output_error_systems.csv");
  per << "method,j,tau,matvecs,precond_apps,wall_ms,met\n";
  for (std::size_t m = 0; m < methods.size(); ++m)
    for (std::size_t t = 0; t < args.taus.size(); ++t) {
      OutputCost sum;
      double met = 0.0;
      for (std::size_t j = 0; j < costs[m].size(); ++j) {
        const OutputCost& c = costs[m][j][t];
        sum.matvecs += c.matvecs;
        sum.precond_applications += c.precond_applications;
        sum.wall_ms += c.wall_ms;
        met += c.met;
        per << '"' << methods[m].name << '"' << ',' << detail::num(args.taus[t]) << ',' << j + 1 << ','
            << c.matvecs << ',' << c.precond_applications << ',' << detail::num(c.wall_ms) << ',' << (c.met ? 1 : 0)
            << '\n';
      }
      const double p = static_cast<double>(std::max<std::size_t>(1, costs[m].size()));
      avg << '"' << methods[m].name << '"' << ',' << detail::num(args.taus[t]) << ',' << detail::num(sum.matvecs / p)
          << ',' << detail::num(sum.precond_applications / p) << ',' << detail::num(sum.wall_ms / p) << ','
          << detail::num(met / p) << '\n';
    }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Weight-scheme study

struct WeightStudyRow {
  WeightScheme scheme = WeightScheme::ideal;
  std::size_t k = 0;          // requested dimension
  std::size_t basis_dim = 0;  // retained dimension
  double residual = 0.0;      // ||b - A x|| after stages 1 and 2
  std::size_t stage3_iters = 0;
};

struct WeightStudyArgs {
  std::string manifest;
  std::vector<std::size_t> dims = {1, 2, 5, 10, 20, 40, 80, 160};
  std::size_t train = 10;
  std::string precond = "ssor";
  std::string out_dir = "out";
};

// Recycles without truncation over the first `train` systems, then compresses
// the accumulated basis with each weight scheme in the A_train metric and
// solves system train + 1 over each retained dimension (W = Y).
inline std::vector<WeightStudyRow> weight_study(const SystemSequence& seq, std::vector<std::size_t> dims,
                                                std::size_t train, const PreconditionerSpec& precond) {
  if (train == 0 || seq.systems.size() < train + 1)
    throw InvalidConfig("weight-study: need at least " + std::to_string(train + 1) + " systems");
  ThreeStageConfig cfg;
  cfg.precond = precond;
  cfg.truncation.stage1_threshold = 1.0;
  cfg.throw_on_failure = false;
  RecycleState st;
  for (std::size_t j = 0; j < train; ++j) solve_system(seq.systems[j], st, cfg, j + 1);
  const DenseMatrix& z = st.y;
  if (z.cols() == 0) throw InvalidConfig("weight-study: training produced an empty basis");
  const SparseSpdMatrix& a_prev = seq.systems[train - 1].a;
  const LinearSystem& sys = seq.systems[train];
  const Vector guess = sys.xguess.empty() ? Vector(seq.n, 0.0) : sys.xguess;

  const std::pair<WeightScheme, Vector> schemes[] = {
      {WeightScheme::ideal, weights_ideal(z, sys.a, sys.b, guess)},
      {WeightScheme::previous, weights_previous(st.history)},
      {WeightScheme::rbf, weights_rbf(st.history, train)},
  };
  dims.push_back(z.cols());
  std::sort(dims.begin(), dims.end());
  dims.erase(std::unique(dims.begin(), dims.end()), dims.end());

  std::vector<WeightStudyRow> rows;
  for (const auto& [scheme, eta] : schemes) {
    Vector w = eta;
    w.resize(z.cols(), 0.0);
    for (std::size_t k : dims) {
      if (k == 0 || k > z.cols()) continue;
      TruncationConfig tc;
      parse_strategy("pod-a-prev", tc);
      tc.retain_dim = k;
      const TruncationOutcome t = pod_compress(z, w, tc, a_prev, nullptr, nullptr);
      RecycleState s;
      s.y = t.y_new;
      s.stage1 = detail::iota(0, s.y.cols());
      s.systems_solved = train;
      Vector x_pre;
      ThreeStageConfig c = cfg;
      c.observer = [&](int stage, std::span<const double> x, const CounterSnapshot&) {
        if (stage <= 2) x_pre.assign(x.begin(), x.end());
      };
      const SolveOutcome o = solve_system(sys, s, c, train + 1);
      if (x_pre.empty()) x_pre = guess;
      WeightStudyRow r;
      r.scheme = scheme;
      r.k = k;
      r.basis_dim = t.y_new.cols();
      r.residual = norm2(subtract(sys.b, spmv(sys.a, x_pre, nullptr)));
      r.stage3_iters = o.report.stage3_iters;
      rows.push_back(r);
    }
  }
  return rows;
}

inline int cmd_weight_study(const WeightStudyArgs& args) {
  const SystemSequence seq = load_sequence(args.manifest);
  const auto rows = weight_study(seq, args.dims, args.train, PreconditionerSpec::parse(args.precond));
  auto csv = detail::open_out(std::filesystem::path(args.out_dir) / "weight_study.csv");
  csv << "scheme,k,basis_dim,residual,stage3_iters\n";
  for (const auto& r : rows)
    csv << to_string(r.scheme) << ',' << r.k << ',' << r.basis_dim << ',' << detail::num(r.residual) << ','
        << r.stage3_iters << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Bound verification

struct VerifyBoundsArgs {
  std::size_t seeds = 100;
  std::uint64_t first_seed = 1;
  std::optional<std::string> manifest;  // conditioning sequence; a small drift sequence otherwise
  std::optional<std::size_t> threads;
  std::string out_dir = "out";
};

inline std::vector<BoundCheckReport> verify_bounds(std::size_t seeds, const SystemSequence& cond_seq,
                                                   std::size_t threads, std::uint64_t first_seed = 1) {
  constexpr BoundRegime regimes[] = {BoundRegime::General,    BoundRegime::FixedWeights, BoundRegime::FixedMetric,
                                     BoundRegime::RelBounded, BoundRegime::Commuting,    BoundRegime::StrongSep};
  constexpr std::size_t groups = 2 + std::size(regimes);
  std::vector<BoundCheckReport> out(groups * seeds);
  parallel_for(out.size(), threads, [&](std::size_t i) {
    const std::size_t g = i / seeds;
    const std::uint64_t seed = i % seeds + first_seed;
    if (g < 2) {
      out[i] = check_weights_bound(random_weights_instance(seed, 30, 5, 1e-2, g == 1));
    } else {
      const BoundRegime r = regimes[g - 2];
      out[i] = check_subspace_distance_bound(random_subspace_instance(seed, r), r);
    }
  });
  {
    WeightsInstance w = random_weights_instance(first_seed);
    w.a_cur = w.a_prev;
    w.e_cur = w.e_prev;
    BoundCheckReport r = check_weights_bound(w);
    r.context = "corollary " + r.context;
    out.push_back(r);
  }
  ThreeStageConfig cfg;
  cfg.truncation.stage1_threshold = 1.0;
  cfg.diagnostics = true;
  const SequenceRun run = run_sequence(cond_seq, cfg, true);
  for (auto& r : conditioning_bound_reports(run.trace)) out.push_back(std::move(r));
  return out;
}

inline int cmd_verify_bounds(const VerifyBoundsArgs& args) {
  SystemSequence seq;
  if (args.manifest) {
    seq = load_sequence(*args.manifest);
  } else {
    DiffusionParams p;
    p.nx = p.ny = 20;
    p.systems = 10;
    p.tol = 1e-8;
    seq = gen_diffusion_sequence(p);
  }
  const auto reports = verify_bounds(args.seeds, seq, resolve_threads(args.threads), args.first_seed);
  nlohmann::json j = nlohmann::json::array();
  bool ok = true;
  for (const auto& r : reports) {
    j.push_back(to_json(r));
    ok = ok && r.satisfied;
  }
  detail::open_out(std::filesystem::path(args.out_dir) / "bounds.json") << j.dump(2) << '\n';
  return ok ? kExitOk : kExitBoundViolated;
}

}  // namespace recykl
