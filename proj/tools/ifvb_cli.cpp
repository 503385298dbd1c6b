#include <algorithm>
#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ifvb/errors.hpp"
#include "ifvb/harness.hpp"
#include "ifvb/version.hpp"

namespace {

using namespace ifvb;

int report_outcomes(const std::vector<OptimizerOutcome>& outcomes) {
  int rc = 0;
  for (const auto& o : outcomes) {
    std::cout << to_string(o.optimizer) << ": " << to_string(o.status);
    if (!o.message.empty()) std::cout << " (" << o.message << ")";
    std::cout << " -> " << o.trace_path << '\n';
    if (o.status == RunStatus::stalled || o.status == RunStatus::numeric_error) rc = 3;
  }
  return rc;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inversion-free natural-gradient variational Bayes experiments"};
  app.set_version_flag("--version", std::string("ifvb ") + kVersion);
  app.require_subcommand(1);

  std::string spec_path;
  std::string out_override;
  auto* run_cmd = app.add_subcommand("run", "Run the optimizers of a spec file");
  run_cmd->add_option("spec", spec_path, "Spec file (key=value format)")->required();
  run_cmd->add_option("--out", out_override, "Output directory (overrides the spec)");

  std::string cmp_spec;
  std::string cmp_out;
  auto* compare_cmd =
      app.add_subcommand("compare", "Run several optimizers in parallel on shared data");
  compare_cmd->add_option("spec", cmp_spec, "Spec file (key=value format)")->required();
  compare_cmd->add_option("--out", cmp_out, "Output directory (overrides the spec)");

  std::string family_id;
  std::string lambda_str;
  long smax = 200000;
  int seeds = 3;
  std::uint64_t fc_seed = 0;
  std::string fc_out = ".";
  double fc_epsilon = 1.0, fc_cbeta = 1.0, fc_beta = 0.3;
  auto* fisher_cmd = app.add_subcommand(
      "fisher-check", "Consistency diagnostic of the recursive inverse-Fisher estimate");
  fisher_cmd->add_option("family", family_id, "beta | gaussian_invgamma | gaussian_full:<d>")
      ->required();
  fisher_cmd->add_option("lambda", lambda_str, "Comma-separated parameter vector")->required();
  fisher_cmd->add_option("--smax", smax, "Number of score updates");
  fisher_cmd->add_option("--seeds", seeds, "Number of seeds (median reported)");
  fisher_cmd->add_option("--seed", fc_seed, "Base seed");
  fisher_cmd->add_option("--out", fc_out, "Output directory");
  fisher_cmd->add_option("--epsilon", fc_epsilon, "H0 scale");
  fisher_cmd->add_option("--c-beta", fc_cbeta, "Regularizer weight of the second variant");
  fisher_cmd->add_option("--beta", fc_beta, "Regularizer decay exponent");

  std::string sim_experiment;
  std::uint64_t sim_seed = 0;
  std::string sim_out;
  long sim_n = 200;
  auto* sim_cmd = app.add_subcommand("simulate", "Write a synthetic dataset as CSV");
  sim_cmd->add_option("experiment", sim_experiment, "example1 | example2 | example5")->required();
  sim_cmd->add_option("--seed", sim_seed, "Seed for the data stream");
  sim_cmd->add_option("--out", sim_out, "Output CSV path")->required();
  sim_cmd->add_option("--n", sim_n, "Observation count where applicable");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd || *compare_cmd) {
      const bool parallel = static_cast<bool>(*compare_cmd);
      ExperimentSpec spec = parse_spec_file(parallel ? cmp_spec : spec_path);
      const std::string& ov = parallel ? cmp_out : out_override;
      if (!ov.empty()) spec.out_dir = ov;
      return report_outcomes(run_experiment(spec, parallel));
    }

    if (*fisher_cmd) {
      const auto family = make_family(family_id);
      Eigen::VectorXd lambda(family->dim());
      {
        std::stringstream ss(lambda_str);
        std::string cell;
        Eigen::Index i = 0;
        while (std::getline(ss, cell, ',')) {
          if (i >= lambda.size()) throw ConfigError("lambda: too many entries");
          lambda[i++] = std::stod(cell);
        }
        if (i != lambda.size())
          throw ConfigError("lambda: expected " + std::to_string(lambda.size()) + " entries");
      }
      FisherConfig cfg;
      cfg.epsilon = fc_epsilon;
      cfg.c_beta = fc_cbeta;
      cfg.beta = fc_beta;
      std::vector<double> finals_plain, finals_reg;
      for (int k = 0; k < seeds; ++k) {
        const auto report = fisher_diagnostic(*family, lambda, smax, cfg, fc_seed + k);
        const std::string path = fc_out + "/fisher_check_" + family->name() + "_seed" +
                                 std::to_string(fc_seed + k) + ".csv";
        save_fisher_diagnostic(report, path,
                               {std::string("ifvb ") + kVersion, "family = " + family_id,
                                "lambda = " + lambda_str, "smax = " + std::to_string(smax),
                                "seed = " + std::to_string(fc_seed + k)});
        finals_plain.push_back(report.final_err_plain);
        finals_reg.push_back(report.final_err_reg);
        std::cout << "seed " << fc_seed + k << ": final error " << report.final_err_plain
                  << " (regularized " << report.final_err_reg << ") -> " << path << '\n';
      }
      std::cout << "median final error: " << median(finals_plain) << " (regularized "
                << median(finals_reg) << ")\n";
      return 0;
    }

    if (*sim_cmd) {
      Rng rng = Rng::stream(sim_seed, Stream::data);
      Dataset data;
      if (sim_experiment == "example1") {
        data = BernoulliBetaModel::simulate(sim_n, 0.3, rng);
      } else if (sim_experiment == "example2") {
        data = PoissonLoglinearModel::simulate(sim_n, 3, rng);
      } else if (sim_experiment == "example5") {
        data = NormalInvGammaModel::builtin_data();
      } else {
        throw ConfigError("simulate: unknown experiment " + sim_experiment);
      }
      data.save_csv(sim_out);
      std::cout << "wrote " << data.n() << " observations to " << sim_out << '\n';
      return 0;
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "spec error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
