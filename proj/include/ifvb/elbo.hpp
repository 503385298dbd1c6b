#pragma once

#include <Eigen/Core>

#include "ifvb/family.hpp"
#include "ifvb/model.hpp"
#include "ifvb/rng.hpp"

namespace ifvb {

/// Monte Carlo estimate of grad_lambda LB with its sample count.
struct GradientEstimate {
  Eigen::VectorXd grad;
  long samples = 0;
};

/// h_lambda(theta) = log p(theta) + log p(y|theta) - log q_lambda(theta).
/// Propagates the -infinity sentinel from either side.
double h_lambda(const Model& model, const Family& family, const Eigen::VectorXd& lambda,
                const Eigen::VectorXd& theta);

/// Score-function (REINFORCE) estimator
///   (1/B) sum_i score(lambda, theta_i) h_lambda(theta_i),  theta_i ~ q_lambda,
/// unbiased for grad_lambda LB(lambda). Throws NumericError, naming the
/// offending draw index, if any term is non-finite.
GradientEstimate estimate_gradient(const Model& model, const Family& family,
                                   const Eigen::VectorXd& lambda, long samples, Rng& rng);

/// Plain Monte Carlo estimate of LB(lambda) = E_q[h_lambda(theta)].
double estimate_lb(const Model& model, const Family& family, const Eigen::VectorXd& lambda,
                   long samples, Rng& rng);

}  // namespace ifvb
