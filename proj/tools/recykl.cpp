// recykl: generate synthetic sequences and run the recycling experiments.

#include <iostream>

#include "CLI11.hpp"
#include "recykl/bench.hpp"
#include "recykl/fixtures.hpp"

using namespace recykl;

int main(int argc, char** argv) {
  CLI::App app{"Krylov recycling for sequences of SPD systems"};
  app.require_subcommand(1);

  std::optional<std::size_t> threads;
  std::string out_dir = "out";
  std::string precond = "ssor";

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "write a synthetic diffusion sequence");
  g->add_option("--nx", gen.params.nx, "grid points in x")->capture_default_str();
  g->add_option("--ny", gen.params.ny, "grid points in y")->capture_default_str();
  g->add_option("--systems", gen.params.systems, "number of systems")->capture_default_str();
  g->add_option("--drift", gen.params.drift, "coefficient drift amplitude")->capture_default_str();
  g->add_option("--seed", gen.params.seed, "generator seed")->capture_default_str();
  g->add_option("--tol", gen.params.tol, "residual tolerance per system")->capture_default_str();
  g->add_option("--outputs", gen.outputs, "rows of the output matrix C (0: none)")->capture_default_str();
  g->add_option("--out-dir", gen.out_dir, "destination directory")->capture_default_str();

  RunArgs run;
  auto* r = app.add_subcommand("run", "solve a sequence with each method");
  r->add_option("--manifest", run.manifest, "sequence manifest")->required();
  r->add_option("--methods", run.methods_file, "JSON array of method specs");
  r->add_flag("--tol-sweep", run.tol_sweep, "sweep tolerances 1e-1 to 1e-6");
  r->add_option("--ybar", run.ybar, "storage cap of the default methods")->capture_default_str();
  r->add_flag("--diagnostics", run.diagnostics, "record the conditioning trace");

  OutputErrorArgs oe;
  auto* o = app.add_subcommand("output-error", "cost to reach output-error thresholds");
  o->add_option("--manifest", oe.manifest, "sequence manifest with an output matrix")->required();
  o->add_option("--methods", oe.methods_file, "JSON array of method specs");
  o->add_option("--taus", oe.taus, "output-error thresholds");
  o->add_option("--ybar", oe.ybar, "storage cap of the default methods")->capture_default_str();

  WeightStudyArgs ws;
  auto* w = app.add_subcommand("weight-study", "compare ideal, previous and RBF weights");
  w->add_option("--manifest", ws.manifest, "sequence manifest")->required();
  w->add_option("--dims", ws.dims, "retained dimensions");
  w->add_option("--train", ws.train, "systems solved before truncation")->capture_default_str();

  VerifyBoundsArgs vb;
  auto* v = app.add_subcommand("verify-bounds", "check the bounds on seeded random instances");
  v->add_option("--seed-count", vb.seeds, "instances per family")->capture_default_str();
  v->add_option("--manifest", vb.manifest, "sequence for the conditioning check");

  std::string fixture_dir;
  bool fixture_check = false;
  auto* f = app.add_subcommand("fixtures", "regenerate or check the regression fixtures");
  f->add_option("--dir", fixture_dir, "fixture directory")->required();
  f->add_flag("--check", fixture_check, "compare instead of writing");

  for (auto* sub : {r, o, w}) sub->add_option("--precond", precond, "identity, jacobi, ssor or ssor:<omega>");
  for (auto* sub : {r, o, v}) sub->add_option("--threads", threads, "worker threads (default RECYKL_THREADS)");
  for (auto* sub : {r, o, w, v}) sub->add_option("--out-dir", out_dir, "output directory")->capture_default_str();
  v->add_option("--seed", vb.first_seed, "seed of the first instance")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) return cmd_generate(gen);
    if (*r) {
      run.precond = precond;
      run.threads = threads;
      run.out_dir = out_dir;
      return cmd_run(run);
    }
    if (*o) {
      oe.precond = precond;
      oe.threads = threads;
      oe.out_dir = out_dir;
      return cmd_output_error(oe);
    }
    if (*w) {
      ws.precond = precond;
      ws.out_dir = out_dir;
      return cmd_weight_study(ws);
    }
    if (*v) {
      vb.threads = threads;
      vb.out_dir = out_dir;
      return cmd_verify_bounds(vb);
    }
    if (*f) {
      if (!fixture_check) {
        regenerate_fixtures(fixture_dir);
        return kExitOk;
      }
      const auto diffs = check_fixtures(fixture_dir);
      for (const auto& d : diffs) std::cerr << d << '\n';
      return diffs.empty() ? kExitOk : kExitBoundViolated;
    }
  } catch (const InvalidConfig& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DimensionMismatch& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SequenceNotConverged& e) {
    std::cerr << "not converged: " << e.what() << '\n';
    return kExitNotConverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
