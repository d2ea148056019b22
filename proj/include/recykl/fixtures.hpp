#pragma once

// Regression fixtures: small sequences with a method spec and the counters
// they produced, frozen exactly. Residuals are compared with a relative
// tolerance; wall times are never stored.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "recykl/bench.hpp"
#include "recykl/problems.hpp"

namespace recykl {

inline constexpr double kFixtureResidualRtol = 1e-6;

struct FixtureCase {
  std::string name;
  SystemSequence sequence;
  MethodSpec method;
  std::string precond;
};

inline std::vector<FixtureCase> fixture_cases() {
  std::vector<FixtureCase> out;

  {
    FixtureCase c;
    c.name = "identity";
    c.sequence.n = 3;
    c.sequence.name = "identity";
    LinearSystem s;
    s.a = SparseSpdMatrix::from_triplets(3, {{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}});
    s.b = {1.0, 2.0, 3.0};
    s.tol = 1e-10;
    c.sequence.systems.push_back(s);
    c.method.name = "PCG";
    c.method.recycle = false;
    c.precond = "identity";
    out.push_back(std::move(c));
  }
  {
    // One system repeated: from system 2 on the recycled space holds the
    // solution and stage 3 has nothing left to do.
    FixtureCase c;
    c.name = "invariant";
    DiffusionParams p;
    p.nx = p.ny = 8;
    p.systems = 1;
    p.drift = 0.0;
    p.tol = 1e-8;
    c.sequence = gen_diffusion_sequence(p);
    for (int k = 0; k < 3; ++k) c.sequence.systems.push_back(c.sequence.systems[0]);
    c.sequence.name = "invariant";
    c.method.name = "no-truncation";
    c.precond = "ssor";
    out.push_back(std::move(c));
  }
  {
    FixtureCase c;
    c.name = "drift";
    DiffusionParams p;
    p.nx = p.ny = 10;
    p.systems = 6;
    p.drift = 0.05;
    p.tol = 1e-6;
    c.sequence = gen_diffusion_sequence(p);
    c.sequence.name = "drift";
    c.method.name = "POD(6,0)";
    c.method.strategy = "pod-a-rbf";
    c.method.storage_cap = 12;
    c.method.retain_dim = 6;
    c.precond = "ssor";
    out.push_back(std::move(c));
  }
  return out;
}

inline nlohmann::json fixture_expectation(const FixtureCase& c) {
  ThreeStageConfig cfg = c.method.config(PreconditionerSpec::parse(c.precond));
  const SequenceRun run = run_sequence(c.sequence, cfg, true);
  nlohmann::json systems = nlohmann::json::array();
  for (const auto& r : run.reports)
    systems.push_back({{"j", r.j},
                       {"matvecs", r.matvecs},
                       {"precond_apps", r.precond_applications},
                       {"stage1_dim", r.stage1_dim},
                       {"basis_dim", r.basis_dim},
                       {"stage2_iters", r.stage2_iters},
                       {"stage3_iters", r.stage3_iters},
                       {"inner_iters", r.inner_iters},
                       {"converged", r.converged},
                       {"final_residual", r.final_residual}});
  return {{"method", c.method},
          {"precond", c.precond},
          {"residual_rtol", kFixtureResidualRtol},
          {"systems", systems}};
}

// Writes <dir>/<case>/manifest.json, the Matrix Market files and
// expected.json for every case.
inline void regenerate_fixtures(const std::string& dir) {
  for (const auto& c : fixture_cases()) {
    const auto sub = std::filesystem::path(dir) / c.name;
    std::filesystem::create_directories(sub);
    write_sequence(c.sequence, sub.string());
    std::ofstream(sub / "expected.json") << fixture_expectation(c).dump(2) << '\n';
  }
}

// Re-runs every fixture in dir against its expected.json; one message per
// discrepancy, empty when everything matches.
inline std::vector<std::string> check_fixtures(const std::string& dir) {
  std::vector<std::string> diffs;
  for (const auto& c : fixture_cases()) {
    const auto sub = std::filesystem::path(dir) / c.name;
    std::ifstream in(sub / "expected.json");
    if (!in) {
      diffs.push_back(c.name + ": missing expected.json");
      continue;
    }
    nlohmann::json expected;
    in >> expected;
    FixtureCase loaded = c;
    loaded.sequence = load_sequence((sub / "manifest.json").string());
    loaded.method = expected.at("method").get<MethodSpec>();
    loaded.precond = expected.at("precond").get<std::string>();
    const nlohmann::json got = fixture_expectation(loaded);
    const auto& es = expected.at("systems");
    const auto& gs = got.at("systems");
    if (es.size() != gs.size()) {
      diffs.push_back(c.name + ": expected " + std::to_string(es.size()) + " systems, got " +
                      std::to_string(gs.size()));
      continue;
    }
    const double rtol = expected.value("residual_rtol", kFixtureResidualRtol);
    for (std::size_t k = 0; k < es.size(); ++k)
      for (const auto& [key, value] : es[k].items()) {
        const auto& g = gs[k].at(key);
        const std::string where = c.name + " system " + std::to_string(k + 1) + " " + key;
        if (key == "final_residual") {
          const double a = value.get<double>(), b = g.get<double>();
          if (std::abs(a - b) > rtol * std::max(std::abs(a), 1e-300))
            diffs.push_back(where + ": expected " + value.dump() + ", got " + g.dump());
        } else if (value != g) {
          diffs.push_back(where + ": expected " + value.dump() + ", got " + g.dump());
        }
      }
  }
  return diffs;
}

}  // namespace recykl
