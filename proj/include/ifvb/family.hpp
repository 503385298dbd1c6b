#pragma once

#include <memory>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "ifvb/rng.hpp"

namespace ifvb {

/// A variational family q_lambda: sampling, log density, score
/// grad_lambda log q_lambda(theta), and the analytic Fisher matrix where one
/// exists. Family descriptors are immutable and shareable; sampling takes an
/// externally owned generator.
class Family {
 public:
  virtual ~Family() = default;

  virtual std::string name() const = 0;
  /// D, the length of lambda.
  virtual int dim() const = 0;
  /// d, the length of a model-parameter draw.
  virtual int theta_dim() const = 0;

  virtual bool in_domain(const Eigen::VectorXd& lambda) const = 0;

  /// One draw from q_lambda. Throws std::domain_error when lambda is outside
  /// the domain. Deterministic given the generator state.
  virtual Eigen::VectorXd sample(const Eigen::VectorXd& lambda, Rng& rng) const = 0;

  /// log q_lambda(theta); -infinity when theta lies outside the support.
  virtual double log_density(const Eigen::VectorXd& lambda,
                             const Eigen::VectorXd& theta) const = 0;

  /// grad_lambda log q_lambda(theta), length D.
  virtual Eigen::VectorXd score(const Eigen::VectorXd& lambda,
                                const Eigen::VectorXd& theta) const = 0;

  /// Analytic I_F(lambda), or nullopt for families without one.
  virtual std::optional<Eigen::MatrixXd> exact_fisher(const Eigen::VectorXd& lambda) const = 0;

  /// Clamps positivity-constrained coordinates to >= 1e-8. Covariance blocks
  /// are symmetrized but not otherwise altered; positive definiteness is the
  /// optimizer's responsibility (step backoff).
  virtual Eigen::VectorXd project_to_domain(Eigen::VectorXd lambda) const = 0;

  void check_domain(const Eigen::VectorXd& lambda) const;
  void check_shape(const Eigen::VectorXd& lambda, const Eigen::VectorXd& theta) const;
};

/// Floor used when clamping positivity-constrained coordinates.
inline constexpr double kPositivityFloor = 1e-8;

/// q = Beta(a, b) on (0,1); lambda = (a, b). Sampling uses two
/// Marsaglia-Tsang Gamma draws; draws are clamped into the open interval.
class BetaFamily final : public Family {
 public:
  std::string name() const override { return "beta"; }
  int dim() const override { return 2; }
  int theta_dim() const override { return 1; }
  bool in_domain(const Eigen::VectorXd& lambda) const override;
  Eigen::VectorXd sample(const Eigen::VectorXd& lambda, Rng& rng) const override;
  double log_density(const Eigen::VectorXd& lambda, const Eigen::VectorXd& theta) const override;
  Eigen::VectorXd score(const Eigen::VectorXd& lambda, const Eigen::VectorXd& theta) const override;
  std::optional<Eigen::MatrixXd> exact_fisher(const Eigen::VectorXd& lambda) const override;
  Eigen::VectorXd project_to_domain(Eigen::VectorXd lambda) const override;
};

/// q = N(mu, Sigma) with a full covariance; lambda = (mu, vec(Sigma)) of
/// length d + d^2. The Sigma block is read as the symmetric part of the
/// stored matrix. No analytic Fisher is exposed; the optimizer uses the
/// exponential-family shortcut for natural-gradient steps instead.
class GaussianFullFamily final : public Family {
 public:
  explicit GaussianFullFamily(int d);

  std::string name() const override { return "gaussian_full"; }
  int dim() const override { return d_ + d_ * d_; }
  int theta_dim() const override { return d_; }
  bool in_domain(const Eigen::VectorXd& lambda) const override;
  Eigen::VectorXd sample(const Eigen::VectorXd& lambda, Rng& rng) const override;
  double log_density(const Eigen::VectorXd& lambda, const Eigen::VectorXd& theta) const override;
  Eigen::VectorXd score(const Eigen::VectorXd& lambda, const Eigen::VectorXd& theta) const override;
  std::optional<Eigen::MatrixXd> exact_fisher(const Eigen::VectorXd&) const override {
    return std::nullopt;
  }
  Eigen::VectorXd project_to_domain(Eigen::VectorXd lambda) const override;

  Eigen::VectorXd mean(const Eigen::VectorXd& lambda) const;
  /// Symmetrized covariance block.
  Eigen::MatrixXd covariance(const Eigen::VectorXd& lambda) const;
  Eigen::VectorXd pack(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) const;

 private:
  int d_;
};

/// Mean-field q(mu) q(sigma^2) with q(mu) = N(mu_mu, s2_mu) and
/// q(sigma^2) = Inverse-Gamma(a, b); lambda = (mu_mu, s2_mu, a, b),
/// theta = (mu, sigma^2).
class GaussianInvGammaFamily final : public Family {
 public:
  std::string name() const override { return "gaussian_invgamma"; }
  int dim() const override { return 4; }
  int theta_dim() const override { return 2; }
  bool in_domain(const Eigen::VectorXd& lambda) const override;
  Eigen::VectorXd sample(const Eigen::VectorXd& lambda, Rng& rng) const override;
  double log_density(const Eigen::VectorXd& lambda, const Eigen::VectorXd& theta) const override;
  Eigen::VectorXd score(const Eigen::VectorXd& lambda, const Eigen::VectorXd& theta) const override;
  std::optional<Eigen::MatrixXd> exact_fisher(const Eigen::VectorXd& lambda) const override;
  Eigen::VectorXd project_to_domain(Eigen::VectorXd lambda) const override;
};

/// Family registry by name ("beta", "gaussian_full:<d>", "gaussian_invgamma").
std::shared_ptr<const Family> make_family(const std::string& id);

}  // namespace ifvb
