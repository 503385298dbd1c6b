#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ifvb/model.hpp"
#include "ifvb/optim.hpp"

namespace ifvb {

/// Environment variable consulted for the default output directory.
inline constexpr const char* kOutDirEnv = "IFVB_OUT_DIR";

/// Optional per-optimizer step-size override.
struct ScheduleOverride {
  std::optional<double> c_alpha;
  std::optional<double> c_alpha_prime;
  std::optional<double> alpha;
};

/// A fully resolved experiment description. Produced by parse_spec from the
/// flat key=value format; render_spec writes the canonical form back out.
struct ExperimentSpec {
  std::string experiment;  ///< example1 | example2 | example5 | custom
  std::string model_id;    ///< bernoulli_beta | poisson_loglinear | normal_invgamma
  std::vector<OptimizerKind> optimizers;
  Eigen::VectorXd lambda0;
  OptimizerConfig config;  ///< base optimizer configuration (seed included)
  std::map<std::string, ScheduleOverride> schedule_overrides;
  std::string data_source = "builtin";  ///< builtin | simulate | <path>.csv
  long simulate_n = 200;
  double sigma0_sq = 100.0;  ///< prior variance of the Poisson model
  std::string out_dir;       ///< empty = $IFVB_OUT_DIR or the working directory
  long eval_samples = 100;   ///< MC draws for the trace ELBO column

  /// Base config with this optimizer's schedule override applied.
  OptimizerConfig config_for(OptimizerKind kind) const;
};

bool operator==(const ExperimentSpec& a, const ExperimentSpec& b);

/// Parses the flat key=value format ('#' starts a comment, whitespace
/// separates entries). Fills documented defaults and validates ranges and
/// optimizer/model compatibility. Throws ConfigError naming the offending key.
ExperimentSpec parse_spec(const std::string& text);

ExperimentSpec parse_spec_file(const std::string& path);

/// Canonical textual form; parse_spec(render_spec(s)) == s.
std::string render_spec(const ExperimentSpec& spec);

/// Dataset and model construction for a spec (data stream of spec seed).
Dataset make_dataset(const ExperimentSpec& spec);
std::shared_ptr<const Model> make_model(const ExperimentSpec& spec, Dataset data);
std::shared_ptr<const Family> family_for_model(const std::string& model_id, int covariate_dim);

/// Outcome of one optimizer's run within an experiment.
struct OptimizerOutcome {
  OptimizerKind optimizer;
  std::string trace_path;
  RunStatus status;
  std::string message;
  Eigen::VectorXd final_lambda;
};

/// Runs every optimizer of the spec on a shared dataset and writes one trace
/// CSV per optimizer. With `parallel`, optimizers run on separate workers
/// (each owns derived generators, so results match the sequential ones).
std::vector<OptimizerOutcome> run_experiment(const ExperimentSpec& spec, bool parallel = false);

/// Writes trace records as CSV: '#'-prefixed metadata lines, the fixed
/// header, one row per record (17 significant digits, blank for NaN), and a
/// trailing status comment when `status` is non-empty.
void emit_trace(const std::vector<TraceRecord>& records, const std::string& path,
                const std::vector<std::string>& metadata, const std::string& status = "");

struct ParsedTrace {
  std::vector<std::string> metadata;
  std::vector<TraceRecord> records;
};

ParsedTrace read_trace(const std::string& path);

/// One checkpoint of the Fisher-consistency diagnostic.
struct FisherDiagnosticRow {
  long s = 0;
  double err_plain = 0.0;  ///< relative Frobenius error, c_beta = 0 recursion
  double err_reg = 0.0;    ///< same with the regularizer terms included
};

struct FisherDiagnosticReport {
  std::vector<FisherDiagnosticRow> rows;
  double final_err_plain = 0.0;
  double final_err_reg = 0.0;
};

/// Streams s_max score draws at fixed lambda through the inverse recursion
/// and reports the relative Frobenius error of the rescaled estimate against
/// the analytic Fisher at logarithmic checkpoints, for both the plain and the
/// regularized recursion (same score draws). The regularized variant uses
/// config.c_beta when positive, else 1.
FisherDiagnosticReport fisher_diagnostic(const Family& family, const Eigen::VectorXd& lambda,
                                         long s_max, const FisherConfig& config,
                                         std::uint64_t seed);

void save_fisher_diagnostic(const FisherDiagnosticReport& report, const std::string& path,
                            const std::vector<std::string>& metadata);

}  // namespace ifvb
