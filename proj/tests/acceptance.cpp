// Acceptance suite: one quantitative check per criterion, each printed as a
// single PASS/FAIL line. Exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "ifvb/elbo.hpp"
#include "ifvb/harness.hpp"
#include "ifvb/optim.hpp"
#include "oracles.hpp"

using namespace ifvb;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& label, const std::string& detail) {
  std::printf("%s criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", id, label.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

const BernoulliBetaModel& example1_model() {
  static const BernoulliBetaModel model(BernoulliBetaModel::fixed_count_data(200, 57));
  return model;
}

OptimizerConfig example1_config(std::uint64_t seed) {
  OptimizerConfig cfg;
  cfg.c_alpha = 10.0;
  cfg.c_alpha_prime = 1.0;
  cfg.alpha = 0.6;
  cfg.fisher.c_beta = 0.0;
  cfg.max_iters = 5000;
  cfg.tol = 1e-5;
  cfg.seed = seed;
  return cfg;
}

// 1. Rank-one recursion equals direct dense inversion (plain stream).
void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  const int dim = 8;
  Rng rng(1001);
  FisherConfig cfg;
  cfg.c_beta = 0.0;
  FisherInverseState state(dim, cfg);
  oracle::DenseFisherAccumulator acc(dim, cfg.epsilon);
  for (int s = 0; s < 500; ++s) {
    const Eigen::VectorXd phi = rng.normal_vector(dim) * (0.5 + 2.0 * rng.uniform());
    state.absorb_score(phi);
    acc.add_score(phi);
  }
  const Eigen::MatrixXd direct = acc.inverse();
  const double err =
      (state.dense_matrix() - direct).cwiseAbs().maxCoeff() / direct.cwiseAbs().maxCoeff();
  const double elapsed = seconds_since(t0);
  report(1, err <= 1e-8 && elapsed < 1.0, "recursive inverse vs dense inversion (D=8, s=500)",
         "max-abs rel err " + fmt(err) + ", " + fmt(elapsed) + " s");
}

// 2. Regularized recursion equals the dense oracle; SPD after every update.
void criterion2() {
  const int dim = 6;
  Rng score_rng(2002), reg_rng(2003);
  FisherConfig cfg;
  cfg.c_beta = 1.0;
  cfg.beta = 0.3;
  FisherInverseState state(dim, cfg);
  oracle::DenseFisherAccumulator acc(dim, cfg.epsilon);
  bool spd_ok = true;
  for (long s = 1; s <= 500; ++s) {
    const Eigen::VectorXd phi = score_rng.normal_vector(dim);
    state.absorb_score(phi);
    acc.add_score(phi);
    const Eigen::VectorXd z = reg_rng.normal_vector(dim);
    state.absorb_regularizer(z);
    acc.add_weighted(z, std::pow(static_cast<double>(s), -0.3));
    const Eigen::MatrixXd m = state.dense_matrix();
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * m.norm()) spd_ok = false;
    if (Eigen::LLT<Eigen::MatrixXd>(m).info() != Eigen::Success) spd_ok = false;
  }
  const Eigen::MatrixXd direct = acc.inverse();
  const double err =
      (state.dense_matrix() - direct).cwiseAbs().maxCoeff() / direct.cwiseAbs().maxCoeff();
  report(2, err <= 1e-8 && spd_ok,
         "regularized recursion vs dense oracle (D=6, 500 interleaved)",
         "max-abs rel err " + fmt(err) + ", SPD " + (spd_ok ? "held" : "violated"));
}

// 3. Compact outer-product representation: exact while untruncated, survives truncation.
void criterion3() {
  const int dim = 6;
  FisherConfig cfg;
  cfg.c_beta = 1.0;
  cfg.beta = 0.3;
  cfg.capacity = -1;
  Rng score_rng(3001), reg_rng(3002), query_rng(3003);
  FisherInverseState dense(dim, cfg, FisherMode::dense);
  FisherInverseState compact(dim, cfg, FisherMode::compact);
  double worst = 0.0;
  for (long s = 0; s < 300; ++s) {
    const Eigen::VectorXd phi = score_rng.normal_vector(dim);
    const Eigen::VectorXd z = reg_rng.normal_vector(dim);
    dense.absorb_score(phi);
    compact.absorb_score(phi);
    dense.absorb_regularizer(z);
    compact.absorb_regularizer(z);
    const Eigen::VectorXd v = query_rng.normal_vector(dim);
    const Eigen::VectorXd a = dense.apply_inverse(v, true);
    const Eigen::VectorXd b = compact.apply_inverse(v, true);
    worst = std::max(worst, (a - b).norm() / std::max(1e-300, a.norm()));
  }
  const bool untruncated_ok = worst <= 1e-10 && compact.fallback_count() == 0;

  FisherConfig trunc_cfg = cfg;
  trunc_cfg.capacity = 100;
  FisherInverseState truncated(dim, trunc_cfg, FisherMode::compact);
  bool completed = true;
  for (long s = 0; s < 300; ++s) {
    truncated.absorb_score(4.0 * score_rng.normal_vector(dim));
    truncated.absorb_regularizer(reg_rng.normal_vector(dim));
    const Eigen::VectorXd r = truncated.apply_inverse(query_rng.normal_vector(dim), true);
    if (!r.allFinite()) completed = false;
  }
  report(3, untruncated_ok && completed, "compact mode vs dense mode (D=6, s=300)",
         "untruncated rel diff " + fmt(worst) + ", truncated run " +
             (completed ? "completed" : "failed") + " with " +
             std::to_string(truncated.fallback_count()) + " fallbacks");
}

// 4. Consistency of the rescaled estimate at the Example 1 optimum.
void criterion4() {
  const auto t0 = std::chrono::steady_clock::now();
  BetaFamily family;
  const Eigen::Vector2d lambda(58.0, 144.0);
  FisherConfig cfg;
  cfg.c_beta = 1.0;
  cfg.beta = 0.3;
  std::vector<double> finals, finals_reg;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto rep = fisher_diagnostic(family, lambda, 200000, cfg, seed);
    finals.push_back(rep.final_err_plain);
    finals_reg.push_back(rep.final_err_reg);
  }
  const double med = median(finals);
  const double elapsed = seconds_since(t0);
  report(4, med <= 0.05 && elapsed < 30.0,
         "fisher consistency at lambda*=(58,144), s=2e5, median of 3 seeds",
         "median rel err " + fmt(med) + " (regularized " + fmt(median(finals_reg)) + "), " +
             fmt(elapsed) + " s");
}

// 5. Example 1 end to end: fitted mean, initialization insensitivity, averaging.
void criterion5() {
  BetaFamily family;
  const auto& model = example1_model();
  const double target = 58.0 / 202.0;

  bool means_ok = true;
  std::string mean_detail;
  for (const auto& start : {Eigen::Vector2d(5.0, 45.0), Eigen::Vector2d(25.0, 25.0)}) {
    for (const OptimizerKind kind : {OptimizerKind::ifvb, OptimizerKind::aifvb}) {
      const RunResult res = run(kind, model, family, start, example1_config(1));
      const Eigen::VectorXd lambda = res.reported(kind);
      const double mean = lambda[0] / (lambda[0] + lambda[1]);
      if (std::abs(mean - target) > 0.02) means_ok = false;
      mean_detail += to_string(kind) + "@(" + fmt(start[0]) + "," + fmt(start[1]) +
                     "): " + fmt(mean) + "  ";
    }
  }

  int averaged_wins = 0;
  const Eigen::VectorXd optimum = *model.optimum();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const RunResult plain =
        run(OptimizerKind::ifvb, model, family, Eigen::Vector2d(5.0, 45.0),
            example1_config(seed));
    const RunResult averaged =
        run(OptimizerKind::aifvb, model, family, Eigen::Vector2d(5.0, 45.0),
            example1_config(seed));
    const double err_plain = (plain.reported(OptimizerKind::ifvb) - optimum).norm();
    const double err_avg = (averaged.reported(OptimizerKind::aifvb) - optimum).norm();
    if (err_avg <= err_plain) ++averaged_wins;
  }
  report(5, means_ok && averaged_wins >= 7, "example 1 end to end (paper schedule)",
         mean_detail + "averaging no worse in " + std::to_string(averaged_wins) + "/10 seeds");
}

// 6. Empirical rate surrogates on Example 1.
void criterion6() {
  BetaFamily family;
  const auto& model = example1_model();
  DiagnosticsConfig diag;
  diag.reference = model.optimum();

  std::vector<double> slopes_plain, slopes_avg;
  int steeper = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    OptimizerConfig cfg = example1_config(seed);
    cfg.tol = 0.0;
    cfg.max_iters = 10000;
    auto slope_of = [&](OptimizerKind kind) {
      const RunResult res = run(kind, model, family, Eigen::Vector2d(5.0, 45.0), cfg, diag);
      std::vector<double> xs, ys;
      for (const auto& rec : res.trace) {
        if (rec.iter >= 1000 && rec.iter <= 10000 && rec.param_error > 0.0) {
          xs.push_back(std::log(static_cast<double>(rec.iter)));
          ys.push_back(2.0 * std::log(rec.param_error));
        }
      }
      return oracle::regression_slope(xs, ys);
    };
    const double sp = slope_of(OptimizerKind::ifvb);
    const double sa = slope_of(OptimizerKind::aifvb);
    slopes_plain.push_back(sp);
    slopes_avg.push_back(sa);
    if (sa <= sp - 0.2) ++steeper;
  }
  const double med_plain = median(slopes_plain);
  report(6, med_plain <= -0.3 && steeper >= 7, "rate surrogates on example 1 (10 seeds)",
         "median slope " + fmt(med_plain) + ", averaged steeper by 0.2 in " +
             std::to_string(steeper) + "/10 seeds (median " + fmt(median(slopes_avg)) + ")");
}

// 7. Example 2: inversion-free vs exact natural gradient on the closed-form LB.
void criterion7() {
  Rng data_rng = Rng::stream(7, Stream::data);
  const PoissonLoglinearModel model(PoissonLoglinearModel::simulate(200, 3, data_rng), 100.0);
  GaussianFullFamily family(3);
  const Eigen::VectorXd lambda0 =
      family.pack(Eigen::VectorXd::Zero(3), 1e-2 * Eigen::MatrixXd::Identity(3, 3));

  OptimizerConfig cfg;
  cfg.c_alpha = 1.0;
  cfg.c_alpha_prime = 1000.0;
  cfg.alpha = 0.75;
  cfg.fisher.c_beta = 1.0;
  cfg.fisher.beta = 0.2;
  cfg.tol = 0.0;
  cfg.max_iters = 3000;
  cfg.seed = 7;

  bool pd_ok = true;
  auto run_checked = [&](OptimizerKind kind) {
    RunStreams streams = RunStreams::from_seed(cfg.seed);
    IterateState st(lambda0, cfg);
    for (long s = 0; s < cfg.max_iters; ++s) {
      if (kind == OptimizerKind::ngvb)
        exact_ngvb_step(st, model, family, cfg, streams);
      else
        ifvb_step(st, model, family, cfg, streams);
      Eigen::LLT<Eigen::MatrixXd> llt(family.covariance(st.lambda));
      if (llt.info() != Eigen::Success) pd_ok = false;
    }
    return st.lambda;
  };

  const Eigen::VectorXd ngvb_final = run_checked(OptimizerKind::ngvb);
  const Eigen::VectorXd ifvb_final = run_checked(OptimizerKind::ifvb);
  const double lb_ngvb = *model.exact_lb(family, ngvb_final);
  const double lb_ifvb = *model.exact_lb(family, ifvb_final);
  const double gap = std::abs(lb_ifvb - lb_ngvb);
  report(7, gap <= 1.0 && pd_ok, "example 2: ifvb within 1.0 of ngvb closed-form LB",
         "LB ngvb " + fmt(lb_ngvb) + ", ifvb " + fmt(lb_ifvb) + ", gap " + fmt(gap) +
             ", covariance PD " + (pd_ok ? "held" : "violated"));
}

// 8. Example 5: all three natural-gradient routes agree.
void criterion8() {
  const NormalInvGammaModel model(NormalInvGammaModel::builtin_data());
  GaussianInvGammaFamily family;
  const Eigen::Vector4d lambda0(9.7, 0.5, 1.0, 1.0);

  OptimizerConfig cfg;
  cfg.c_alpha = 1.0;
  cfg.c_alpha_prime = 10.0;
  cfg.alpha = 0.7;
  cfg.fisher.c_beta = 1.0;
  cfg.fisher.beta = 0.15;
  cfg.tol = 1e-5;
  cfg.max_iters = 20000;
  cfg.seed = 8;

  const RunResult ngvb = run(OptimizerKind::ngvb, model, family, lambda0, cfg);
  const RunResult ifvb = run(OptimizerKind::ifvb, model, family, lambda0, cfg);
  const RunResult aifvb = run(OptimizerKind::aifvb, model, family, lambda0, cfg);

  const Eigen::VectorXd l_ngvb = ngvb.reported(OptimizerKind::ngvb);
  const Eigen::VectorXd l_ifvb = ifvb.reported(OptimizerKind::ifvb);
  const Eigen::VectorXd l_aifvb = aifvb.reported(OptimizerKind::aifvb);

  auto final_lb = [&](const Eigen::VectorXd& lambda) {
    Rng eval = Rng::stream(777, Stream::eval);
    return estimate_lb(model, family, lambda, 50000, eval);
  };
  const double lb_ngvb = final_lb(l_ngvb);
  const double gap_ifvb = std::abs(final_lb(l_ifvb) - lb_ngvb);
  const double gap_aifvb = std::abs(final_lb(l_aifvb) - lb_ngvb);
  const double rel_ifvb = (l_ifvb - l_ngvb).norm() / l_ngvb.norm();
  const double rel_aifvb = (l_aifvb - l_ngvb).norm() / l_ngvb.norm();

  report(8, gap_ifvb <= 0.5 && gap_aifvb <= 0.5 && rel_ifvb <= 0.05 && rel_aifvb <= 0.05,
         "example 5: ifvb/aifvb track exact ngvb",
         "LB gaps " + fmt(gap_ifvb) + "/" + fmt(gap_aifvb) + ", lambda rel " + fmt(rel_ifvb) +
             "/" + fmt(rel_aifvb));
}

// 9. Score-function estimator unbiasedness at (5,45).
void criterion9() {
  BetaFamily family;
  const auto& model = example1_model();
  const Eigen::Vector2d lambda(5.0, 45.0);
  const Eigen::VectorXd reference = *model.exact_lb_gradient(family, lambda);

  Rng rng = Rng::stream(9, Stream::gradient);
  oracle::MeanAccumulator acc(2);
  for (long i = 0; i < 100000; ++i) {
    const Eigen::VectorXd theta = family.sample(lambda, rng);
    acc.add(family.score(lambda, theta) * h_lambda(model, family, lambda, theta));
  }
  bool ok = true;
  std::string detail;
  for (int i = 0; i < 2; ++i) {
    const double dev = std::abs(acc.mean()[i] - reference[i]);
    const double se = acc.standard_error()[i];
    if (dev > 3.0 * se) ok = false;
    detail += "coord " + std::to_string(i) + ": " + fmt(dev / se) + " SE  ";
  }
  report(9, ok, "gradient estimator unbiased at (5,45), 1e5 draws", detail);
}

// 10. Bit-identical traces modulo elapsed_ms.
void criterion10() {
  const fs::path dir_a = fs::temp_directory_path() / "ifvb_accept_a";
  const fs::path dir_b = fs::temp_directory_path() / "ifvb_accept_b";
  fs::create_directories(dir_a);
  fs::create_directories(dir_b);

  ExperimentSpec spec =
      parse_spec("experiment=example1 optimizer=ifvb,aifvb seed=10 max_iters=200 tol=0");
  auto normalized = [](const fs::path& p) {
    std::ifstream in(p);
    std::string line, out;
    while (std::getline(in, line)) {
      if (line.rfind("# status:", 0) == 0) {
        out += line + "\n";
        continue;
      }
      if (!line.empty() && line[0] != '#') {
        std::stringstream ss(line);
        std::string cell, rebuilt;
        int col = 0;
        while (std::getline(ss, cell, ',')) {
          rebuilt += (col ? "," : "") + (col == 1 ? std::string("-") : cell);
          ++col;
        }
        line = rebuilt;
      }
      out += line + "\n";
    }
    return out;
  };

  spec.out_dir = dir_a.string();
  run_experiment(spec);
  spec.out_dir = dir_b.string();
  run_experiment(spec);

  bool ok = true;
  for (const char* name : {"example1_ifvb.csv", "example1_aifvb.csv"}) {
    if (normalized(dir_a / name) != normalized(dir_b / name)) ok = false;
  }
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  report(10, ok, "repeated runs give identical traces modulo elapsed_ms",
         ok ? "byte-identical" : "differences found");
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  criterion10();
  if (failures == 0)
    std::printf("acceptance: all criteria passed\n");
  else
    std::printf("acceptance: %d criteria failed\n", failures);
  return failures;
}
