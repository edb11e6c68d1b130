#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mixlap/experiments.hpp"
#include "mixlap/parallel.hpp"

namespace {

struct Common {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool emit_svg = false;
};

int run(const std::string& kind, const Common& opt) {
  using namespace mixlap;
  std::ifstream in(opt.config_path);
  if (!in) throw Error("cannot open config '" + opt.config_path + "'");
  nlohmann::json j = nlohmann::json::parse(in);
  const auto expected = experiment_kind_from_string(kind);
  if (!j.contains("kind")) j["kind"] = to_string(expected);
  ExperimentConfig cfg = j.get<ExperimentConfig>();
  if (cfg.kind != expected)
    throw Error("config kind '" + to_string(cfg.kind) + "' does not match the subcommand '" + kind + "'");
  if (opt.seed) cfg.seed = *opt.seed;
  if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
  set_thread_count(opt.threads);

  RunOptions ro;
  ro.emit_svg = opt.emit_svg;
  try {
    const auto res = run_experiment(cfg, ro);
    write_result(res, cfg.output_dir);
    std::cout << cfg.output_dir << "/report.json\n";
    return 0;
  } catch (const SolveFailure& e) {
    ExperimentResult res;
    res.report = {{"version", kVersionTag},
                  {"kind", to_string(cfg.kind)},
                  {"config_hash", config_hash(cfg)},
                  {"status", "solver_failure"},
                  {"message", e.what()},
                  {"iterations", e.report().iterations},
                  {"residual_inf", e.report().residual_inf},
                  {"tol_residual", e.report().tol_residual}};
    std::ostringstream csv;
    write_csv(csv, e.report().solution);
    res.files["best_iterate.csv"] = csv.str();
    write_result(res, cfg.output_dir);
    std::cerr << "mixlap: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical lab for the mixed local/nonlocal p-Laplace equation"};
  app.require_subcommand(1);
  Common opt;
  std::uint64_t seed = 0;

  const char* kinds[][2] = {{"solve", "Solve a Dirichlet problem"},
                            {"manufactured", "Manufactured-solution recovery"},
                            {"sharpness", "Barrier sharpness experiment"},
                            {"probe", "Homogeneous almost-Lipschitz probe"},
                            {"bounds", "Comparison bounds for u and its homogeneous replacement"},
                            {"fuzz", "Pointwise inequality fuzzing"}};
  for (auto& k : kinds) {
    auto* sub = app.add_subcommand(k[0], k[1]);
    sub->add_option("config", opt.config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out_dir, "Output directory (overrides the config)");
    sub->add_option("--seed", seed, "Master seed (overrides the config)");
    sub->add_option("--threads", opt.threads, "Worker threads; results do not depend on it")
        ->check(CLI::Range(1, 256));
    sub->add_flag("--emit-svg", opt.emit_svg, "Write log-log fit plots");
  }
  CLI11_PARSE(app, argc, argv);

  auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opt.seed = seed;
  try {
    return run(sub->get_name(), opt);
  } catch (const std::exception& e) {
    std::cerr << "mixlap: " << e.what() << "\n";
    return 1;
  }
}
