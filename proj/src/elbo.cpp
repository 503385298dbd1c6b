#include "ifvb/elbo.hpp"

#include <cmath>
#include <string>

#include "ifvb/errors.hpp"

namespace ifvb {

double h_lambda(const Model& model, const Family& family, const Eigen::VectorXd& lambda,
                const Eigen::VectorXd& theta) {
  return model.log_joint(theta) - family.log_density(lambda, theta);
}

GradientEstimate estimate_gradient(const Model& model, const Family& family,
                                   const Eigen::VectorXd& lambda, long samples, Rng& rng) {
  if (samples < 1) throw ConfigError("estimate_gradient: samples must be >= 1");
  family.check_domain(lambda);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(family.dim());
  for (long i = 0; i < samples; ++i) {
    const Eigen::VectorXd theta = family.sample(lambda, rng);
    const double h = h_lambda(model, family, lambda, theta);
    const Eigen::VectorXd term = family.score(lambda, theta) * h;
    if (!term.allFinite())
      throw NumericError("estimate_gradient: non-finite term at draw " + std::to_string(i));
    acc += term;
  }
  return GradientEstimate{acc / static_cast<double>(samples), samples};
}

double estimate_lb(const Model& model, const Family& family, const Eigen::VectorXd& lambda,
                   long samples, Rng& rng) {
  if (samples < 1) throw ConfigError("estimate_lb: samples must be >= 1");
  family.check_domain(lambda);
  double acc = 0.0;
  for (long i = 0; i < samples; ++i) {
    const double h = h_lambda(model, family, lambda, family.sample(lambda, rng));
    if (!std::isfinite(h))
      throw NumericError("estimate_lb: non-finite term at draw " + std::to_string(i));
    acc += h;
  }
  return acc / static_cast<double>(samples);
}

}  // namespace ifvb
