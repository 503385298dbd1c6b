#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ifvb/elbo.hpp"
#include "ifvb/family.hpp"
#include "ifvb/fisher.hpp"
#include "ifvb/model.hpp"
#include "ifvb/rng.hpp"

namespace ifvb {

enum class OptimizerKind { sga, ngvb, ifvb, aifvb };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

/// All schedule and estimator constants for one optimizer run.
struct OptimizerConfig {
  // Step size tau_k = c_alpha / (c_alpha_prime + k)^alpha.
  double c_alpha = 1.0;
  double c_alpha_prime = 1.0;
  double alpha = 0.6;

  FisherConfig fisher;
  FisherMode fisher_mode = FisherMode::dense;
  long fisher_samples = 1;  ///< score draws per iteration feeding the recursion (S)

  long gradient_samples = 20;  ///< B, Monte Carlo draws per gradient estimate
  double averaging_exponent = 2.0;  ///< w in the (log k)^w averaging weights
  double clip_threshold = 100.0;    ///< l2 clip of the step direction; <= 0 disables
  double tol = 1e-5;                ///< stop when successive iterates move less than this
  long max_iters = 5000;
  std::uint64_t seed = 0;

  void validate() const;
};

/// tau_k = c_alpha / (c_alpha_prime + k)^alpha.
double step_size(const OptimizerConfig& config, long k);

/// One optimizer run's evolving state.
struct IterateState {
  long s = 0;
  Eigen::VectorXd lambda;
  Eigen::VectorXd lambda_bar;
  double cum_weight = 0.0;  ///< sum of (log(k+1))^w absorbed so far
  FisherInverseState fisher;
  double last_grad_norm = 0.0;  // diagnostic, norm of the last gradient used

  IterateState(const Eigen::VectorXd& lambda0, const OptimizerConfig& config);
};

/// Derived per-component generators for one run.
struct RunStreams {
  Rng gradient;
  Rng fisher_score;
  Rng regularizer;
  Rng eval;

  static RunStreams from_seed(std::uint64_t seed);
};

/// One iteration's diagnostics. NaN marks a value with no meaning for the
/// run (written blank in traces).
struct TraceRecord {
  long iter = 0;
  double elapsed_ms = 0.0;
  double elbo = 0.0;
  double param_error = 0.0;
  double grad_norm = 0.0;
  double min_denominator = 0.0;
  long fallback_count = 0;
};

enum class RunStatus { converged, max_iters_reached, stalled, numeric_error };

std::string to_string(RunStatus s);

/// What to evaluate per iteration beyond the optimization itself.
struct DiagnosticsConfig {
  long elbo_eval_samples = 0;  ///< MC draws for the trace ELBO when no closed form; 0 skips
  std::optional<Eigen::VectorXd> reference;  ///< lambda* for the param_error column
};

struct RunResult {
  IterateState state;
  std::vector<TraceRecord> trace;
  RunStatus status = RunStatus::max_iters_reached;
  std::string message;

  /// The iterate a run reports: lambda_bar for aifvb, lambda otherwise.
  Eigen::VectorXd reported(OptimizerKind kind) const;
};

/// Plain stochastic gradient ascent: lambda <- project(lambda + tau * grad).
void sga_step(IterateState& state, const GradientEstimate& grad, const Family& family,
              const OptimizerConfig& config);

/// Natural-gradient ascent with the analytic Fisher, or the precision/mean
/// two-line update for the Poisson model under the full Gaussian family.
/// Uses the closed-form LB gradient when the model provides one, otherwise
/// the Monte Carlo estimate.
void exact_ngvb_step(IterateState& state, const Model& model, const Family& family,
                     const OptimizerConfig& config, RunStreams& streams);

/// Inversion-free natural-gradient step: estimate the gradient, stream one
/// score draw (and one regularizer draw) into the inverse-Fisher recursion,
/// premultiply, clip, step.
void ifvb_step(IterateState& state, const Model& model, const Family& family,
               const OptimizerConfig& config, RunStreams& streams);

/// ifvb_step with the Fisher recursion fed at the averaged iterate and the
/// (log k)^w weighted average maintained alongside.
void aifvb_step(IterateState& state, const Model& model, const Family& family,
                const OptimizerConfig& config, RunStreams& streams);

/// Full optimization loop; stops when the reported iterate moves less than
/// config.tol in l2 norm or after max_iters iterations. Fully deterministic
/// given config.seed. Numeric failures are returned with the partial trace.
RunResult run(OptimizerKind kind, const Model& model, const Family& family,
              const Eigen::VectorXd& lambda0, const OptimizerConfig& config,
              const DiagnosticsConfig& diagnostics = {});

}  // namespace ifvb
