#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ifvb/errors.hpp"
#include "ifvb/harness.hpp"

using namespace ifvb;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("ifvb_test_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// File contents with the elapsed_ms column and status line blanked out.
std::string normalized(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.rfind("# status:", 0) == 0) continue;
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    std::string rebuilt;
    while (std::getline(ss, cell, ',')) {
      if (line[0] != '#' && col == 1) cell = "-";
      rebuilt += (col ? "," : "") + cell;
      ++col;
    }
    out += rebuilt + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("minimal spec resolves the documented defaults") {
  const ExperimentSpec spec = parse_spec("experiment=example1 optimizer=ifvb seed=42");
  CHECK(spec.experiment == "example1");
  CHECK(spec.model_id == "bernoulli_beta");
  CHECK(spec.optimizers.size() == 1);
  CHECK(spec.optimizers[0] == OptimizerKind::ifvb);
  CHECK(spec.config.seed == 42);
  CHECK(spec.lambda0.isApprox(Eigen::Vector2d(5.0, 45.0)));
  CHECK(spec.config.fisher.epsilon == 1.0);
  CHECK(spec.config.fisher.c_beta == 0.0);  // reference setting for this experiment
  CHECK(spec.config.fisher.beta == 0.3);
  CHECK(spec.config.fisher.capacity == 100);
  CHECK(spec.config.averaging_exponent == 2.0);
  CHECK(spec.config.gradient_samples == 20);
  CHECK(spec.config.tol == 1e-5);
  CHECK(spec.config.c_alpha == 10.0);
  CHECK(spec.config.c_alpha_prime == 1.0);
  CHECK(spec.config.alpha == 0.6);
  CHECK(spec.config.max_iters == 5000);

  const ExperimentSpec ex2 = parse_spec("experiment=example2 optimizer=ngvb,ifvb");
  CHECK(ex2.config.alpha == 0.75);
  CHECK(ex2.config.c_alpha_prime == 1000.0);
  CHECK(ex2.config.fisher.c_beta == 1.0);
  CHECK(ex2.config.max_iters == 3000);
  CHECK(ex2.lambda0.size() == 12);
}

TEST_CASE("spec round trip") {
  const std::string text =
      "experiment=example1 optimizer=ifvb,aifvb seed=7 B=40 clip=50 "
      "lambda0=25,25 ngvb.alpha=1 data=simulate n=150";
  const ExperimentSpec spec = parse_spec(text);
  const ExperimentSpec again = parse_spec(render_spec(spec));
  CHECK(spec == again);
  CHECK(render_spec(spec) == render_spec(again));
}

TEST_CASE("spec errors carry the offending key") {
  CHECK_THROWS_WITH_AS(parse_spec("optimizer=ifvb"), doctest::Contains("experiment"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_spec("experiment=example1 optimizer=ifvb bogus=1"),
                       doctest::Contains("bogus"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_spec("experiment=example1 optimizer=warp"),
                       doctest::Contains("warp"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_spec("experiment=example1 optimizer=ifvb B=x"),
                       doctest::Contains("B"), ConfigError);
  // The regularizer decay must stay below alpha - 1/2.
  CHECK_THROWS_WITH_AS(
      parse_spec("experiment=example1 optimizer=ifvb c_beta=1 beta=0.9 alpha=0.6"),
      doctest::Contains("beta"), ConfigError);
  CHECK_THROWS_AS(parse_spec("experiment=custom optimizer=ifvb"), ConfigError);
  CHECK_THROWS_AS(parse_spec("experiment=example9 optimizer=ifvb"), ConfigError);
}

TEST_CASE("comments and layout are ignored") {
  const ExperimentSpec spec = parse_spec(
      "# reference run\n"
      "experiment=example1   optimizer=ifvb\n"
      "seed=3 # trailing comment\n");
  CHECK(spec.config.seed == 3);
}

TEST_CASE("emit_trace writes the documented schema") {
  TempDir tmp;
  const std::string path = (tmp.path / "trace.csv").string();
  TraceRecord rec;
  rec.iter = 1;
  rec.elapsed_ms = 0.25;
  rec.elbo = -122.05171796833299;
  rec.param_error = std::nan("");
  rec.grad_norm = 8.6595140036091491;
  rec.min_denominator = 1.25;
  rec.fallback_count = 0;
  emit_trace({rec}, path, {"ifvb test", "seed = 1"}, "converged");

  std::ifstream in(path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] == "# ifvb test");
  CHECK(lines[2] == "iter,elapsed_ms,elbo,param_error,grad_norm,min_denominator,fallback_count");
  CHECK(lines[3].find(",,") != std::string::npos);  // blank param_error
  CHECK(lines[4] == "# status: converged");

  const ParsedTrace parsed = read_trace(path);
  REQUIRE(parsed.records.size() == 1);
  CHECK(parsed.records[0].iter == 1);
  // 17 significant digits survive the round trip bit-for-bit.
  CHECK(parsed.records[0].elbo == rec.elbo);
  CHECK(parsed.records[0].grad_norm == rec.grad_norm);
  CHECK(std::isnan(parsed.records[0].param_error));

  CHECK_THROWS_AS(emit_trace({}, path, {}, ""), ConfigError);
}

TEST_CASE("run_experiment writes one deterministic trace per optimizer") {
  TempDir tmp;
  ExperimentSpec spec = parse_spec(
      "experiment=example1 optimizer=ifvb,aifvb seed=11 max_iters=40 eval_b=20 tol=0");
  spec.out_dir = tmp.path.string();

  const auto outcomes = run_experiment(spec);
  REQUIRE(outcomes.size() == 2);
  CHECK(outcomes[0].trace_path == tmp.path.string() + "/example1_ifvb.csv");
  CHECK(outcomes[1].trace_path == tmp.path.string() + "/example1_aifvb.csv");
  for (const auto& o : outcomes) CHECK(o.status == RunStatus::max_iters_reached);

  const std::string first = normalized(outcomes[0].trace_path);
  const std::string first_avg = normalized(outcomes[1].trace_path);
  run_experiment(spec);
  CHECK(normalized(outcomes[0].trace_path) == first);
  CHECK(normalized(outcomes[1].trace_path) == first_avg);

  // Parallel compare mode reproduces the sequential traces.
  run_experiment(spec, /*parallel=*/true);
  CHECK(normalized(outcomes[0].trace_path) == first);
  CHECK(normalized(outcomes[1].trace_path) == first_avg);

  // param_error is present for this model (the optimum is known).
  const ParsedTrace parsed = read_trace(outcomes[0].trace_path);
  REQUIRE(!parsed.records.empty());
  CHECK(std::isfinite(parsed.records.back().param_error));
  CHECK(parsed.records.front().iter == 1);
  for (size_t i = 1; i < parsed.records.size(); ++i)
    CHECK(parsed.records[i].iter > parsed.records[i - 1].iter);
}

TEST_CASE("example2 short run: finite closed-form elbo, ngvb guard holds") {
  TempDir tmp;
  ExperimentSpec spec = parse_spec(
      "experiment=example2 optimizer=ngvb,ifvb seed=1 max_iters=60 n=40");
  spec.out_dir = tmp.path.string();
  const auto outcomes = run_experiment(spec);
  for (const auto& o : outcomes) {
    CAPTURE(to_string(o.optimizer));
    CHECK(o.status == RunStatus::max_iters_reached);
    const ParsedTrace parsed = read_trace(o.trace_path);
    REQUIRE(parsed.records.size() == 60);
    for (const auto& r : parsed.records) {
      CHECK(std::isfinite(r.elbo));
      CHECK(std::isnan(r.param_error));  // no known optimum here
    }
  }
}

TEST_CASE("custom experiment requires an explicit model and start point") {
  TempDir tmp;
  ExperimentSpec spec = parse_spec(
      "experiment=custom model=normal_invgamma optimizer=ifvb lambda0=9.7,0.5,1,1 "
      "alpha=0.7 c_alpha=1 c_alpha_prime=10 beta=0.15 max_iters=25 eval_b=10");
  spec.out_dir = tmp.path.string();
  const auto outcomes = run_experiment(spec);
  REQUIRE(outcomes.size() == 1);
  const ParsedTrace parsed = read_trace(outcomes[0].trace_path);
  CHECK(parsed.records.size() == 25);
  for (const auto& r : parsed.records) CHECK(std::isnan(r.param_error));
}

TEST_CASE("dataset csv feeds a run") {
  TempDir tmp;
  Rng rng = Rng::stream(5, Stream::data);
  const Dataset data = PoissonLoglinearModel::simulate(30, 3, rng);
  const std::string csv = (tmp.path / "data.csv").string();
  data.save_csv(csv);

  ExperimentSpec spec = parse_spec("experiment=example2 optimizer=ifvb max_iters=10 data=" + csv);
  spec.out_dir = tmp.path.string();
  const auto outcomes = run_experiment(spec);
  CHECK(outcomes[0].status == RunStatus::max_iters_reached);

  const Dataset back = Dataset::load_csv(csv, 3);
  CHECK(back.covariates.isApprox(data.covariates));
}

TEST_CASE("fisher diagnostic: degenerate start row and checkpoint decay") {
  BetaFamily family;
  FisherConfig cfg;
  cfg.c_beta = 1.0;
  cfg.beta = 0.3;
  const auto report = fisher_diagnostic(family, Eigen::Vector2d(1.0, 1.0), 5000, cfg, 7);
  REQUIRE(report.rows.size() >= 3);
  CHECK(report.rows.front().s == 0);
  CHECK(std::isfinite(report.rows.front().err_plain));
  CHECK(report.rows.back().s == 5000);
  // The rescaled estimate closes most of the initial distance.
  CHECK(report.final_err_plain < 0.2);
  CHECK(report.final_err_plain < report.rows.front().err_plain);

  GaussianFullFamily gf(2);
  CHECK_THROWS_AS(
      fisher_diagnostic(gf, gf.pack(Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity()),
                        10, cfg, 1),
      ConfigError);
}

TEST_CASE("fisher diagnostic csv") {
  TempDir tmp;
  GaussianInvGammaFamily family;
  FisherConfig cfg;
  const auto report =
      fisher_diagnostic(family, Eigen::Vector4d(0.0, 1.0, 1.0, 1.0), 2000, cfg, 3);
  const std::string path = (tmp.path / "fisher.csv").string();
  save_fisher_diagnostic(report, path, {"family = gaussian_invgamma"});
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# family = gaussian_invgamma");
  std::getline(in, line);
  CHECK(line == "s,rel_frobenius_error,rel_frobenius_error_regularized");
}
