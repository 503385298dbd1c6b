#include "ifvb/optim.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "ifvb/errors.hpp"

namespace ifvb {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void clip_direction(Eigen::VectorXd& direction, double threshold) {
  if (threshold <= 0.0) return;
  const double norm = direction.norm();
  if (norm > threshold) direction *= threshold / norm;
}

// Applies lambda + tau * direction with projection, halving tau until the
// candidate lies in the family domain (covariance blocks can leave the
// positive definite cone under generic vector arithmetic).
Eigen::VectorXd step_with_backoff(const Family& family, const Eigen::VectorXd& lambda,
                                  const Eigen::VectorXd& direction, double tau) {
  for (int attempt = 0; attempt <= 30; ++attempt) {
    Eigen::VectorXd candidate = family.project_to_domain(lambda + tau * direction);
    if (family.in_domain(candidate)) return candidate;
    tau *= 0.5;
  }
  throw StallError("step backoff: no valid iterate after 30 halvings");
}
}  // namespace

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sga: return "sga";
    case OptimizerKind::ngvb: return "ngvb";
    case OptimizerKind::ifvb: return "ifvb";
    case OptimizerKind::aifvb: return "aifvb";
  }
  return "?";
}

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sga") return OptimizerKind::sga;
  if (s == "ngvb") return OptimizerKind::ngvb;
  if (s == "ifvb") return OptimizerKind::ifvb;
  if (s == "aifvb") return OptimizerKind::aifvb;
  throw ConfigError("unknown optimizer: " + s);
}

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::max_iters_reached: return "max_iters_reached";
    case RunStatus::stalled: return "stalled";
    case RunStatus::numeric_error: return "numeric_error";
  }
  return "?";
}

void OptimizerConfig::validate() const {
  if (!(c_alpha > 0.0)) throw ConfigError("optimizer: c_alpha must be > 0");
  if (!(c_alpha_prime >= 0.0)) throw ConfigError("optimizer: c_alpha_prime must be >= 0");
  if (!(alpha > 0.0)) throw ConfigError("optimizer: alpha must be > 0");
  if (gradient_samples < 1) throw ConfigError("optimizer: B must be >= 1");
  if (fisher_samples < 1) throw ConfigError("optimizer: fisher_samples must be >= 1");
  if (!(averaging_exponent >= 0.0)) throw ConfigError("optimizer: w must be >= 0");
  if (!(tol >= 0.0)) throw ConfigError("optimizer: tol must be >= 0");
  if (max_iters < 0) throw ConfigError("optimizer: max_iters must be >= 0");
  fisher.validate();
}

double step_size(const OptimizerConfig& config, long k) {
  return config.c_alpha / std::pow(config.c_alpha_prime + static_cast<double>(k), config.alpha);
}

IterateState::IterateState(const Eigen::VectorXd& lambda0, const OptimizerConfig& config)
    : lambda(lambda0),
      lambda_bar(lambda0),
      fisher(static_cast<int>(lambda0.size()), config.fisher, config.fisher_mode) {}

RunStreams RunStreams::from_seed(std::uint64_t seed) {
  return RunStreams{Rng::stream(seed, Stream::gradient), Rng::stream(seed, Stream::fisher_score),
                    Rng::stream(seed, Stream::regularizer), Rng::stream(seed, Stream::eval)};
}

Eigen::VectorXd RunResult::reported(OptimizerKind kind) const {
  return kind == OptimizerKind::aifvb ? state.lambda_bar : state.lambda;
}

void sga_step(IterateState& state, const GradientEstimate& grad, const Family& family,
              const OptimizerConfig& config) {
  if (!grad.grad.allFinite()) throw NumericError("sga_step: non-finite gradient estimate");
  const double tau = step_size(config, state.s + 1);
  state.lambda = step_with_backoff(family, state.lambda, grad.grad, tau);
  state.lambda_bar = state.lambda;
  state.s += 1;
}

void exact_ngvb_step(IterateState& state, const Model& model, const Family& family,
                     const OptimizerConfig& config, RunStreams& streams) {
  const double tau0 = step_size(config, state.s + 1);

  if (const auto* gf = dynamic_cast<const GaussianFullFamily*>(&family)) {
    // Exponential-family shortcut: the natural-gradient update reduces to
    //   Sigma^{-1} <- Sigma^{-1} - 2 tau grad_Sigma LB
    //   mu        <- mu + tau Sigma grad_mu LB
    // with the refreshed Sigma in the mean line.
    const auto grad = model.exact_lb_gradient(family, state.lambda);
    if (!grad) throw ConfigError("ngvb: no closed-form gradient for " + model.name());
    const int d = gf->theta_dim();
    const Eigen::VectorXd grad_mu = grad->head(d);
    const Eigen::MatrixXd grad_sigma =
        Eigen::Map<const Eigen::MatrixXd>(grad->data() + d, d, d);
    const Eigen::MatrixXd sigma = gf->covariance(state.lambda);
    const Eigen::MatrixXd prec = sigma.llt().solve(Eigen::MatrixXd::Identity(d, d));

    double tau = tau0;
    for (int attempt = 0;; ++attempt) {
      const Eigen::MatrixXd prec_new = prec - 2.0 * tau * grad_sigma;
      Eigen::LLT<Eigen::MatrixXd> llt(prec_new);
      if (llt.info() == Eigen::Success) {
        const Eigen::MatrixXd sigma_new = llt.solve(Eigen::MatrixXd::Identity(d, d));
        const Eigen::VectorXd mu_new = gf->mean(state.lambda) + tau * sigma_new * grad_mu;
        state.lambda = gf->pack(mu_new, 0.5 * (sigma_new + sigma_new.transpose()));
        break;
      }
      if (attempt >= 30)
        throw StallError("ngvb: updated precision not positive definite after 30 halvings");
      tau *= 0.5;
    }
    state.last_grad_norm = grad->norm();
    state.lambda_bar = state.lambda;
    state.s += 1;
    return;
  }

  const auto fisher = family.exact_fisher(state.lambda);
  if (!fisher)
    throw ConfigError("ngvb: family " + family.name() + " has no analytic Fisher matrix");
  Eigen::VectorXd grad;
  if (const auto g = model.exact_lb_gradient(family, state.lambda)) {
    grad = *g;
  } else {
    grad = estimate_gradient(model, family, state.lambda, config.gradient_samples,
                             streams.gradient)
               .grad;
  }
  const Eigen::VectorXd direction = fisher->llt().solve(grad);
  state.lambda = step_with_backoff(family, state.lambda, direction, tau0);
  state.last_grad_norm = grad.norm();
  state.lambda_bar = state.lambda;
  state.s += 1;
}

namespace {

// Shared body of the ifvb/aifvb iteration; `anchor` is the iterate at which
// the Fisher recursion draws its score samples.
void inversion_free_step(IterateState& state, const Model& model, const Family& family,
                         const OptimizerConfig& config, RunStreams& streams,
                         const Eigen::VectorXd& anchor) {
  const GradientEstimate grad =
      estimate_gradient(model, family, state.lambda, config.gradient_samples, streams.gradient);
  state.last_grad_norm = grad.grad.norm();

  for (long i = 0; i < config.fisher_samples; ++i) {
    const Eigen::VectorXd theta = family.sample(anchor, streams.fisher_score);
    state.fisher.absorb_score(family.score(anchor, theta));
  }
  state.fisher.absorb_regularizer(streams.regularizer.normal_vector(family.dim()));

  Eigen::VectorXd direction = state.fisher.apply_inverse(grad.grad, /*scaled=*/true);
  clip_direction(direction, config.clip_threshold);

  const double tau = step_size(config, state.s + 1);
  state.lambda = step_with_backoff(family, state.lambda, direction, tau);
  state.s += 1;
}

}  // namespace

void ifvb_step(IterateState& state, const Model& model, const Family& family,
               const OptimizerConfig& config, RunStreams& streams) {
  inversion_free_step(state, model, family, config, streams, state.lambda);
  state.lambda_bar = state.lambda;
}

void aifvb_step(IterateState& state, const Model& model, const Family& family,
                const OptimizerConfig& config, RunStreams& streams) {
  inversion_free_step(state, model, family, config, streams, state.lambda_bar);
  // Weighted average with w_k = (log k)^w; while the cumulative weight is
  // still zero the average tracks the iterate exactly. state.s already
  // indexes the iterate produced by this step.
  const double weight =
      std::pow(std::log(static_cast<double>(state.s)), config.averaging_exponent);
  state.cum_weight += weight;
  const double ratio = state.cum_weight > 0.0 ? weight / state.cum_weight : 1.0;
  state.lambda_bar += ratio * (state.lambda - state.lambda_bar);
  if (state.cum_weight == 0.0) state.lambda_bar = state.lambda;
}

RunResult run(OptimizerKind kind, const Model& model, const Family& family,
              const Eigen::VectorXd& lambda0, const OptimizerConfig& config,
              const DiagnosticsConfig& diagnostics) {
  config.validate();
  if (kind == OptimizerKind::ifvb || kind == OptimizerKind::aifvb)
    config.fisher.validate_against_alpha(config.alpha);
  family.check_domain(lambda0);

  RunStreams streams = RunStreams::from_seed(config.seed);
  RunResult out{IterateState(lambda0, config), {}, RunStatus::max_iters_reached, ""};
  IterateState& state = out.state;
  const bool uses_fisher = kind == OptimizerKind::ifvb || kind == OptimizerKind::aifvb;

  const auto t0 = std::chrono::steady_clock::now();
  Eigen::VectorXd prev = out.reported(kind);
  for (long it = 0; it < config.max_iters; ++it) {
    try {
      switch (kind) {
        case OptimizerKind::sga: {
          const GradientEstimate grad = estimate_gradient(model, family, state.lambda,
                                                          config.gradient_samples,
                                                          streams.gradient);
          state.last_grad_norm = grad.grad.norm();
          sga_step(state, grad, family, config);
          break;
        }
        case OptimizerKind::ngvb:
          exact_ngvb_step(state, model, family, config, streams);
          break;
        case OptimizerKind::ifvb:
          ifvb_step(state, model, family, config, streams);
          break;
        case OptimizerKind::aifvb:
          aifvb_step(state, model, family, config, streams);
          break;
      }
    } catch (const StallError& e) {
      out.status = RunStatus::stalled;
      out.message = "iteration " + std::to_string(it + 1) + ": " + e.what();
      break;
    } catch (const NumericError& e) {
      out.status = RunStatus::numeric_error;
      out.message = "iteration " + std::to_string(it + 1) + ": " + e.what();
      break;
    }

    const Eigen::VectorXd reported = out.reported(kind);

    TraceRecord rec;
    rec.iter = state.s;
    rec.elapsed_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    if (const auto lb = model.exact_lb(family, reported)) {
      rec.elbo = *lb;
    } else if (diagnostics.elbo_eval_samples > 0) {
      rec.elbo = estimate_lb(model, family, reported, diagnostics.elbo_eval_samples,
                             streams.eval);
    } else {
      rec.elbo = kNaN;
    }
    rec.param_error =
        diagnostics.reference ? (reported - *diagnostics.reference).norm() : kNaN;
    rec.grad_norm = state.last_grad_norm;
    rec.min_denominator =
        uses_fisher && std::isfinite(state.fisher.min_denominator())
            ? state.fisher.min_denominator()
            : kNaN;
    rec.fallback_count = uses_fisher ? state.fisher.fallback_count() : 0;
    out.trace.push_back(rec);

    const double diff = (reported - prev).norm();
    prev = reported;
    if (config.tol > 0.0 && diff < config.tol) {
      out.status = RunStatus::converged;
      break;
    }
  }
  return out;
}

}  // namespace ifvb
