#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "sparsereg/config.hpp"
#include "sparsereg/error.hpp"
#include "sparsereg/experiment.hpp"
#include "sparsereg/noise.hpp"
#include "sparsereg/verify.hpp"

namespace {

using namespace sparsereg;

int cmd_run(const std::string& config_path, std::size_t jobs) {
  const ExperimentConfig cfg = load_config(config_path);
  const ExperimentResult result = run_experiment(cfg, jobs);
  for (const auto& run : result.runs) {
    const auto& last = run.record.epochs.back();
    std::printf("seed %llu: test_accuracy %.4f sparse_rate %.4f (flip rate %.4f)\n",
                static_cast<unsigned long long>(run.seed), last.test_accuracy, last.sparse_rate,
                run.observed_flip_rate);
  }
  std::printf("%s: %zu runs, test accuracy %.4f +- %.4f, sparse rate %.4f\n", cfg.name.c_str(),
              result.summary.runs, result.summary.accuracy_mean, result.summary.accuracy_std,
              result.summary.sparse_mean);
  std::printf("wrote %s\n", result.output_dir.string().c_str());
  return 0;
}

int cmd_verify(const std::string& suite, const VerifyOptions& options) {
  const auto checks = run_verify_suite(suite, options);
  std::size_t failed = 0;
  for (const auto& c : checks) {
    const char* tag = c.passed ? "PASS" : (c.asserted ? "FAIL" : "NOTE");
    std::printf("[%s] %s: %s\n", tag, c.name.c_str(), c.detail.c_str());
    if (c.asserted && !c.passed) ++failed;
  }
  std::printf("%zu checks, %zu failed\n", checks.size(), failed);
  if (failed > 0) {
    std::printf("failing checks:\n");
    for (const auto& c : checks) {
      if (c.asserted && !c.passed) std::printf("  %s\n", c.name.c_str());
    }
  }
  return failed == 0 ? 0 : 1;
}

int cmd_noise_preview(const std::string& preset, std::size_t k, double eta,
                      const std::string& map_file) {
  std::optional<TransitionMatrix> t;
  if (preset == "symmetric") {
    t = symmetric_transition(k, eta);
  } else if (preset == "file") {
    if (map_file.empty()) throw DomainError("preset 'file' needs --map");
    t = asymmetric_transition(read_flip_map(map_file), k, eta);
  } else {
    t = asymmetric_transition(parse_flip_preset(preset), k, eta);
  }
  const std::size_t n = t->classes();
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      std::printf("%s%.4f", j ? " " : "", (*t)(i, j));
      sum += (*t)(i, j);
    }
    std::printf("  | row sum %.12g\n", sum);
  }
  const double bound = 1.0 - 1.0 / static_cast<double>(n);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, t->flip_rate(i));
  std::printf("max eta_y %.6g < 1 - 1/k = %.6g: %s\n", worst, bound,
              t->below_symmetric_bound() ? "true" : "false");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-regularized robust training and noise-tolerance checks"};
  app.require_subcommand(1);

  std::string config_path;
  std::size_t jobs = 1;
  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--jobs", jobs, "Runs executed concurrently")->check(CLI::PositiveNumber);

  std::string suite;
  VerifyOptions vopt;
  double eta = 0.0;
  std::size_t k = 0, m = 0;
  auto* verify = app.add_subcommand("verify", "Run a verification suite");
  verify->add_option("suite", suite, "lemma1, theorem1, theorem2, theorem3, gradients or all")
      ->required();
  verify->add_option("--seed", vopt.seed, "Seed");
  auto* eta_opt = verify->add_option("--eta", eta, "Noise rate");
  auto* k_opt = verify->add_option("--k", k, "Classes")->check(CLI::Range(2, 8));
  auto* m_opt = verify->add_option("--m", m, "Points per instance")->check(CLI::PositiveNumber);

  std::string preset, map_file;
  std::size_t preview_k = 10;
  double preview_eta = 0.0;
  auto* preview = app.add_subcommand("noise-preview", "Print a transition matrix");
  preview->add_option("preset", preset, "symmetric, mnist, cifar10, cifar100_superclass or file")->required();
  preview->add_option("--k", preview_k, "Classes")->check(CLI::PositiveNumber);
  preview->add_option("--eta", preview_eta, "Noise rate");
  preview->add_option("--map", map_file, "Flip map file (preset 'file')");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, jobs);
    if (*verify) {
      if (*eta_opt) vopt.eta = eta;
      if (*k_opt) vopt.classes = k;
      if (*m_opt) vopt.points = m;
      return cmd_verify(suite, vopt);
    }
    if (*preview) return cmd_noise_preview(preset, preview_k, preview_eta, map_file);
  } catch (const sparsereg::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
