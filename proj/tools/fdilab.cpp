// fdilab: run testbed scenarios, analyse traces, export plot data.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fdilab/scenario/scenario.hpp"

namespace {

namespace sc = fdilab::scenario;

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

sc::Scenario resolve(const std::string& name_or_path, std::uint64_t seed, bool seed_given) {
  if (sc::is_builtin(name_or_path)) return sc::builtin(name_or_path, seed);
  auto s = sc::load_scenario_file(name_or_path);
  if (seed_given) s.seed = seed;
  return s;
}

void print_counts(const fdilab::ids::Report& r) {
  for (auto i : fdilab::ids::kAllIndicators) {
    std::printf("  %-20s %zu\n", fdilab::ids::to_string(i).c_str(), r.count(i));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IEC-104 MITM false-data-injection testbed"};
  app.require_subcommand(1);

  std::string scenario = "paper-experiment";
  std::uint64_t seed = 1;
  std::string out = "out";
  double compress = -1.0;
  std::string policy;
  auto* run = app.add_subcommand("run", "run a scenario and write run-<name>-<seed>/");
  run->add_option("--scenario", scenario, "builtin name or scenario JSON file")->capture_default_str();
  auto* seed_opt = run->add_option("--seed", seed, "seed for every stochastic choice")->capture_default_str();
  run->add_option("--out", out, "output root directory")->capture_default_str();
  run->add_option("--compress", compress, "wall seconds per simulated second (0 = as fast as possible)");
  run->add_option("--policy", policy, "process-plausibility policy JSON");

  std::string trace;
  std::string detect_out;
  std::string detect_policy;
  auto* detect = app.add_subcommand("detect", "analyse a trace file");
  detect->add_option("trace", trace, "trace JSONL file")->required();
  detect->add_option("--policy", detect_policy, "process-plausibility policy JSON");
  detect->add_option("--out", detect_out, "directory for alerts.jsonl and summary.json")->required();

  std::string bundle;
  auto* exp = app.add_subcommand("export", "write plot CSVs for a run directory");
  exp->add_option("bundle", bundle, "run-<name>-<seed> directory")->required();

  std::string dump;
  auto* list = app.add_subcommand("list-scenarios", "list builtin scenarios");
  list->add_option("--json", dump, "print this builtin as an editable scenario file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto s = resolve(scenario, seed, seed_opt->count() > 0);
      sc::RunOptions opts;
      opts.out_root = out;
      if (compress >= 0.0) opts.compression = compress;
      if (!policy.empty()) opts.policy = fdilab::ids::load_policy_file(policy);
      const auto wall0 = std::chrono::steady_clock::now();
      const auto b = sc::run(s, opts);
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
      std::printf("run %s seed %llu: %zu frames, %.2f s wall -> %s\n", s.name.c_str(),
                  static_cast<unsigned long long>(s.seed), b.switch_trace.frames.size(), wall, b.dir.c_str());
      print_counts(b.report);
      for (const auto& f : b.failures) std::printf("  failure: %s\n", f.c_str());
      return b.partial ? kRuntime : kOk;
    }
    if (*detect) {
      const auto r = sc::detect(trace, detect_policy, detect_out);
      std::printf("%zu frames, %zu alerts\n", r.frames, r.alerts.size());
      print_counts(r);
      for (const auto& w : r.warnings) std::printf("  warning: %s\n", w.c_str());
      return kOk;
    }
    if (*exp) {
      for (const auto& p : sc::export_plotdata(bundle)) std::printf("%s\n", p.c_str());
      return kOk;
    }
    if (*list) {
      if (!dump.empty()) {
        std::cout << sc::to_json(sc::builtin(dump)).dump(2) << '\n';
        return kOk;
      }
      for (const auto& n : sc::builtin_names()) std::printf("%s\n", n.c_str());
      return kOk;
    }
  } catch (const sc::ValidationError& e) {
    std::fprintf(stderr, "invalid scenario: %s\n", e.what());
    return kValidation;
  } catch (const fdilab::ids::PolicyError& e) {
    std::fprintf(stderr, "invalid policy: %s\n", e.what());
    return kValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kOk;
}
