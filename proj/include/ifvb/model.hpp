#pragma once

#include <memory>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "ifvb/family.hpp"
#include "ifvb/rng.hpp"

namespace ifvb {

/// Observations, plus covariates where the model has them. Immutable after
/// construction.
struct Dataset {
  Eigen::MatrixXd covariates;  ///< n x d, zero columns when absent
  Eigen::VectorXd response;    ///< y, length n

  long n() const { return response.size(); }

  /// CSV with one row per observation, covariates first then the response.
  void save_csv(const std::string& path) const;
  static Dataset load_csv(const std::string& path, int covariate_cols);
};

/// Target posterior: prior x likelihood with log-joint evaluation, plus the
/// closed-form ELBO and gradient where those exist for the paired family.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string name() const = 0;
  virtual int theta_dim() const = 0;
  virtual const Dataset& data() const = 0;

  /// log p(theta) + log p(y|theta); -infinity outside the support.
  virtual double log_joint(const Eigen::VectorXd& theta) const = 0;

  /// Exact LB(lambda) when available for this (model, family) pair.
  virtual std::optional<double> exact_lb(const Family&, const Eigen::VectorXd&) const {
    return std::nullopt;
  }

  /// Exact Euclidean gradient of LB when available.
  virtual std::optional<Eigen::VectorXd> exact_lb_gradient(const Family&,
                                                           const Eigen::VectorXd&) const {
    return std::nullopt;
  }

  /// lambda* when the optimum is known in closed form.
  virtual std::optional<Eigen::VectorXd> optimum() const { return std::nullopt; }
};

/// Bernoulli observations with a uniform prior on the success probability.
/// The posterior is Beta(kappa+1, n-kappa+1), so the paired Beta family
/// contains it and lambda* is exact.
class BernoulliBetaModel final : public Model {
 public:
  explicit BernoulliBetaModel(Dataset data);

  /// n observations with exactly kappa ones (order is irrelevant to the likelihood).
  static Dataset fixed_count_data(long n, long kappa);
  /// n Bernoulli(p) draws.
  static Dataset simulate(long n, double p, Rng& rng);

  std::string name() const override { return "bernoulli_beta"; }
  int theta_dim() const override { return 1; }
  const Dataset& data() const override { return data_; }
  double log_joint(const Eigen::VectorXd& theta) const override;
  std::optional<Eigen::VectorXd> exact_lb_gradient(const Family&,
                                                   const Eigen::VectorXd&) const override;
  std::optional<Eigen::VectorXd> optimum() const override;

  long kappa() const { return kappa_; }

 private:
  Dataset data_;
  long kappa_;
};

/// Poisson log-linear counts y_i ~ Poisson(exp(x_i^T theta)) with a
/// N(0, s02 I) prior. Paired with the full-covariance Gaussian family the
/// ELBO and its gradient are available in closed form.
class PoissonLoglinearModel final : public Model {
 public:
  PoissonLoglinearModel(Dataset data, double sigma0_sq = 100.0);

  /// X with standard normal entries, y from the model at theta = (1,...,1).
  static Dataset simulate(long n, int d, Rng& rng);

  std::string name() const override { return "poisson_loglinear"; }
  int theta_dim() const override { return d_; }
  const Dataset& data() const override { return data_; }
  double log_joint(const Eigen::VectorXd& theta) const override;
  std::optional<double> exact_lb(const Family&, const Eigen::VectorXd&) const override;
  std::optional<Eigen::VectorXd> exact_lb_gradient(const Family&,
                                                   const Eigen::VectorXd&) const override;

  double sigma0_sq() const { return sigma0_sq_; }

 private:
  Dataset data_;
  int d_;
  double sigma0_sq_;
  double log_factorial_sum_;  // sum_i ln(y_i!)
};

/// Normal observations with unknown mean and variance; N(mu0, s0^2) prior on
/// the mean and Inverse-Gamma(a0, b0) prior on the variance. Paired with the
/// mean-field Gaussian x Inverse-Gamma family.
class NormalInvGammaModel final : public Model {
 public:
  explicit NormalInvGammaModel(Dataset data, double mu0 = 0.0, double sigma0 = 10.0,
                               double a0 = 1.0, double b0 = 1.0);

  /// The ten fixed observations used by the reference experiment.
  static Dataset builtin_data();

  std::string name() const override { return "normal_invgamma"; }
  int theta_dim() const override { return 2; }
  const Dataset& data() const override { return data_; }
  double log_joint(const Eigen::VectorXd& theta) const override;

 private:
  Dataset data_;
  double mu0_, sigma0_, a0_, b0_;
};

}  // namespace ifvb
