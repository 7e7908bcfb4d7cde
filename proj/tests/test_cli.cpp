#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sparsereg/config.hpp"
#include "sparsereg/error.hpp"
#include "sparsereg/experiment.hpp"
#include "sparsereg/verify.hpp"

using namespace sparsereg;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test.cfg");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

const char* kSmallRun = R"(name = tiny
repeats = 3
seed = 10
dataset.source = blobs
dataset.classes = 3
dataset.per_class = 30
dataset.dim = 2
dataset.separation = 4
dataset.seed = 1
noise.type = symmetric
noise.eta = 0.2
loss.kind = ce
model.hidden = 8
optim.lr = 0.1
optim.epochs = 4
optim.batch_size = 16
)";

}  // namespace

TEST_CASE("config defaults and explicit keys") {
  const auto cfg = parse("# comment\nname = demo\n\nrepeats = 2\nloss.kind = gce\nloss.q = 0.5\n"
                         "model.hidden = 16, 8\noptim.cosine = false\n");
  CHECK(cfg.name == "demo");
  CHECK(cfg.repeats == 2);
  CHECK(cfg.loss.kind == LossKind::kGCE);
  CHECK(cfg.loss.gce_q == 0.5);
  CHECK(cfg.hidden == std::vector<std::size_t>{16, 8});
  CHECK_FALSE(cfg.optim.cosine_annealing);
  CHECK_FALSE(cfg.sr.has_value());
  CHECK(parse("").hidden.empty());
  CHECK(parse("model.hidden = none\n").hidden.empty());
}

TEST_CASE("config errors name the line and key") {
  CHECK(error_of("name = a\nbogus = 1\n").find("test.cfg:2") != std::string::npos);
  CHECK(error_of("name = a\nbogus = 1\n").find("bogus") != std::string::npos);
  const std::string repeated = error_of("seed = 1\nseed = 2\n");
  CHECK(repeated.find("test.cfg:2") != std::string::npos);
  CHECK(repeated.find("repeated") != std::string::npos);
  const std::string bad = error_of("name = a\n\noptim.lr = fast\n");
  CHECK(bad.find("test.cfg:3") != std::string::npos);
  CHECK(bad.find("optim.lr") != std::string::npos);
  CHECK_FALSE(error_of("sr.enabled = false\nsr.tau = 0.5\n").empty());
  CHECK_FALSE(error_of("sr.tau = 0.5\n").empty());
  CHECK_FALSE(error_of("no equals sign\n").empty());
  CHECK_FALSE(error_of("noise.type = none\nnoise.eta = 0.2\n").empty());
  CHECK_FALSE(error_of("noise.type = asymmetric\nnoise.eta = 0.6\nnoise.preset = mnist\n").empty());
  CHECK_FALSE(error_of("noise.type = asymmetric\nnoise.eta = 0.2\n").empty());
  CHECK_FALSE(error_of("optim.epochs = 0\n").empty());
  CHECK_FALSE(error_of("loss.kind = ce\nloss.preset = mnist\n").empty());
  CHECK_THROWS_AS(load_config("/nonexistent/x.cfg"), FormatError);
}

TEST_CASE("presets resolve before explicit keys") {
  const auto cfg = parse("sr.tau = 0.2\nsr.enabled = true\nsr.preset = mnist\n");
  REQUIRE(cfg.sr.has_value());
  SRConfig expected = SRConfig::preset(Benchmark::kMnist, true);
  expected.tau = 0.2;
  CHECK(*cfg.sr == expected);
  CHECK(lambda_at(0, *cfg.sr) == 4.0);
  CHECK(lambda_at(5, *cfg.sr) == 8.0);

  const auto sce = parse("loss.alpha = 2\nloss.kind = sce\nloss.preset = cifar10\n");
  LossSpec sce_expected = LossSpec::sce(Benchmark::kCifar10);
  sce_expected.alpha = 2.0;
  CHECK(sce.loss == sce_expected);
}

TEST_CASE("serialized config parses back to the same value") {
  const auto a = parse(kSmallRun);
  CHECK(parse(serialize_config(a)) == a);
  const auto b = parse(std::string(kSmallRun) + "sr.enabled = true\nsr.preset = cifar10\n");
  const std::string text = serialize_config(b);
  CHECK(text.find("preset") == std::string::npos);
  CHECK(parse(text) == b);
  const auto c = parse("noise.type = asymmetric\nnoise.eta = 0.3\nnoise.preset = mnist\ndataset.classes = 10\n");
  CHECK(parse(serialize_config(c)) == c);
}

TEST_CASE("experiment writes per-run and summary csv files") {
  auto cfg = parse(kSmallRun);
  const fs::path dir = fs::path(SPARSEREG_TEST_TMP) / "exp_a";
  fs::remove_all(dir);
  cfg.output_dir = dir.string();
  const auto result = run_experiment(cfg);
  REQUIRE(result.runs.size() == 3);
  CHECK(result.runs[0].seed == 10);
  CHECK(result.runs[2].seed == 12);

  for (std::uint64_t seed : {10, 11, 12}) {
    const auto lines = lines_of(slurp(dir / ("run_" + std::to_string(seed) + ".csv")));
    REQUIRE(lines.size() == cfg.optim.epochs + 1);
    CHECK(lines[0] == kRunCsvHeader);
    CHECK(lines[1].rfind("0,0,", 0) == 0);  // epoch 0, lambda 0 without SR
  }
  const auto summary = lines_of(slurp(dir / "summary.csv"));
  REQUIRE(summary.size() == 2);
  CHECK(summary[0] == kSummaryCsvHeader);
  CHECK(summary[1].rfind("tiny,3,", 0) == 0);
  CHECK(parse(slurp(dir / "config.snapshot")) == cfg);

  // Sample standard deviation over the three runs.
  double mean = 0.0;
  for (const auto& r : result.runs) mean += r.record.epochs.back().test_accuracy / 3.0;
  double ss = 0.0;
  for (const auto& r : result.runs) ss += std::pow(r.record.epochs.back().test_accuracy - mean, 2);
  CHECK(result.summary.accuracy_mean == doctest::Approx(mean));
  CHECK(result.summary.accuracy_std == doctest::Approx(std::sqrt(ss / 2.0)));

  for (const auto& r : result.runs) CHECK(std::abs(r.observed_flip_rate - 0.2) < 0.15);

  // Same config, parallel execution: byte-identical outputs.
  const fs::path dir_b = fs::path(SPARSEREG_TEST_TMP) / "exp_b";
  fs::remove_all(dir_b);
  cfg.output_dir = dir_b.string();
  run_experiment(cfg, 2);
  for (const char* file : {"run_10.csv", "run_11.csv", "run_12.csv", "summary.csv"}) {
    CAPTURE(file);
    CHECK(slurp(dir / file) == slurp(dir_b / file));
  }
}

TEST_CASE("imbalance applies to the training split only") {
  auto cfg = parse(kSmallRun);
  cfg.dataset.imbalance = Imbalance::kStep;
  cfg.dataset.imbalance_ratio = 0.5;
  cfg.dataset.minority_fraction = 0.3;
  const auto data = prepare_data(cfg);
  const auto train = data.train.class_counts();
  const auto test = data.test.class_counts();
  CHECK(test[0] == test[2]);
  CHECK(train[0] == train[1]);
  CHECK(train[2] * 2 == train[0]);
}

TEST_CASE("noise transition from a config block") {
  NoiseBlock sym;
  sym.type = NoiseType::kSymmetric;
  sym.eta = 0.6;
  CHECK(noise_transition(sym, 4) == symmetric_transition(4, 0.6));
  CHECK(noise_transition(NoiseBlock{}, 3) == TransitionMatrix::identity(3));
}

TEST_CASE("verify suite api") {
  VerifyOptions opts;
  const auto lemma = run_verify_suite("lemma1", opts);
  CHECK_FALSE(lemma.empty());
  for (const auto& c : lemma) CHECK(c.passed);
  CHECK_THROWS_AS(run_verify_suite("lemma9", opts), DomainError);

  opts.eta = 0.8;
  opts.classes = 3;
  const auto t1 = run_verify_suite("theorem1", opts);
  for (const auto& c : t1) CHECK_FALSE(c.asserted);
}
