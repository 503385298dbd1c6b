#include "ifvb/family.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "ifvb/errors.hpp"
#include "ifvb/specfun.hpp"

namespace ifvb {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Keeps draws strictly inside open supports so log terms stay finite even at
// clamped parameter values.
double clamp_open_unit(double x) {
  return std::min(std::max(x, 1e-300), 1.0 - 1e-16);
}

double clamp_positive(double x) {
  return std::min(std::max(x, 1e-300), 1e300);
}

}  // namespace

using specfun::digamma;
using specfun::log_gamma;
using specfun::trigamma;

void Family::check_domain(const Eigen::VectorXd& lambda) const {
  if (lambda.size() != dim())
    throw ShapeError(name() + ": lambda has length " + std::to_string(lambda.size()) +
                     ", expected " + std::to_string(dim()));
  if (!in_domain(lambda)) throw std::domain_error(name() + ": lambda outside the family domain");
}

void Family::check_shape(const Eigen::VectorXd& lambda, const Eigen::VectorXd& theta) const {
  check_domain(lambda);
  if (theta.size() != theta_dim())
    throw ShapeError(name() + ": theta has length " + std::to_string(theta.size()) +
                     ", expected " + std::to_string(theta_dim()));
}

// ---------------------------------------------------------------------------
// Beta

bool BetaFamily::in_domain(const Eigen::VectorXd& lambda) const {
  return lambda.size() == 2 && lambda.allFinite() && lambda[0] > 0.0 && lambda[1] > 0.0;
}

Eigen::VectorXd BetaFamily::sample(const Eigen::VectorXd& lambda, Rng& rng) const {
  check_domain(lambda);
  const double x = rng.gamma(lambda[0]);
  const double y = rng.gamma(lambda[1]);
  Eigen::VectorXd theta(1);
  theta[0] = clamp_open_unit(x / (x + y));
  return theta;
}

double BetaFamily::log_density(const Eigen::VectorXd& lambda, const Eigen::VectorXd& theta) const {
  check_shape(lambda, theta);
  const double t = theta[0];
  if (!(t > 0.0 && t < 1.0)) return kNegInf;
  const double a = lambda[0], b = lambda[1];
  return log_gamma(a + b) - log_gamma(a) - log_gamma(b) + (a - 1.0) * std::log(t) +
         (b - 1.0) * std::log1p(-t);
}

Eigen::VectorXd BetaFamily::score(const Eigen::VectorXd& lambda,
                                  const Eigen::VectorXd& theta) const {
  check_shape(lambda, theta);
  const double t = theta[0];
  if (!(t > 0.0 && t < 1.0)) throw std::domain_error("beta: theta outside (0,1)");
  const double a = lambda[0], b = lambda[1];
  const double dab = digamma(a + b);
  Eigen::VectorXd s(2);
  s[0] = dab - digamma(a) + std::log(t);
  s[1] = dab - digamma(b) + std::log1p(-t);
  return s;
}

std::optional<Eigen::MatrixXd> BetaFamily::exact_fisher(const Eigen::VectorXd& lambda) const {
  check_domain(lambda);
  const double tab = trigamma(lambda[0] + lambda[1]);
  Eigen::MatrixXd f(2, 2);
  f(0, 0) = trigamma(lambda[0]) - tab;
  f(1, 1) = trigamma(lambda[1]) - tab;
  f(0, 1) = f(1, 0) = -tab;
  return f;
}

Eigen::VectorXd BetaFamily::project_to_domain(Eigen::VectorXd lambda) const {
  lambda[0] = std::max(lambda[0], kPositivityFloor);
  lambda[1] = std::max(lambda[1], kPositivityFloor);
  return lambda;
}

// ---------------------------------------------------------------------------
// Full-covariance Gaussian

GaussianFullFamily::GaussianFullFamily(int d) : d_(d) {
  if (d < 1) throw ConfigError("gaussian_full: d must be >= 1");
}

Eigen::VectorXd GaussianFullFamily::mean(const Eigen::VectorXd& lambda) const {
  return lambda.head(d_);
}

Eigen::MatrixXd GaussianFullFamily::covariance(const Eigen::VectorXd& lambda) const {
  Eigen::MatrixXd s = Eigen::Map<const Eigen::MatrixXd>(lambda.data() + d_, d_, d_);
  return 0.5 * (s + s.transpose());
}

Eigen::VectorXd GaussianFullFamily::pack(const Eigen::VectorXd& mu,
                                         const Eigen::MatrixXd& sigma) const {
  Eigen::VectorXd lambda(dim());
  lambda.head(d_) = mu;
  Eigen::Map<Eigen::MatrixXd>(lambda.data() + d_, d_, d_) = sigma;
  return lambda;
}

bool GaussianFullFamily::in_domain(const Eigen::VectorXd& lambda) const {
  if (lambda.size() != dim() || !lambda.allFinite()) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(covariance(lambda));
  return llt.info() == Eigen::Success;
}

Eigen::VectorXd GaussianFullFamily::sample(const Eigen::VectorXd& lambda, Rng& rng) const {
  check_domain(lambda);
  Eigen::LLT<Eigen::MatrixXd> llt(covariance(lambda));
  return mean(lambda) + llt.matrixL() * rng.normal_vector(d_);
}

double GaussianFullFamily::log_density(const Eigen::VectorXd& lambda,
                                       const Eigen::VectorXd& theta) const {
  check_shape(lambda, theta);
  const Eigen::MatrixXd sigma = covariance(lambda);
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  const Eigen::VectorXd r = theta - mean(lambda);
  double log_det = 0.0;
  for (int i = 0; i < d_; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * d_ * std::log(2.0 * std::numbers::pi) - 0.5 * log_det -
         0.5 * r.dot(llt.solve(r));
}

Eigen::VectorXd GaussianFullFamily::score(const Eigen::VectorXd& lambda,
                                          const Eigen::VectorXd& theta) const {
  check_shape(lambda, theta);
  Eigen::LLT<Eigen::MatrixXd> llt(covariance(lambda));
  const Eigen::MatrixXd prec = llt.solve(Eigen::MatrixXd::Identity(d_, d_));
  const Eigen::VectorXd u = prec * (theta - mean(lambda));
  Eigen::VectorXd s(dim());
  s.head(d_) = u;
  Eigen::Map<Eigen::MatrixXd>(s.data() + d_, d_, d_) = -0.5 * prec + 0.5 * u * u.transpose();
  return s;
}

Eigen::VectorXd GaussianFullFamily::project_to_domain(Eigen::VectorXd lambda) const {
  Eigen::Map<Eigen::MatrixXd> s(lambda.data() + d_, d_, d_);
  Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
  s = sym;
  return lambda;
}

// ---------------------------------------------------------------------------
// Gaussian x Inverse-Gamma mean field

bool GaussianInvGammaFamily::in_domain(const Eigen::VectorXd& lambda) const {
  return lambda.size() == 4 && lambda.allFinite() && lambda[1] > 0.0 && lambda[2] > 0.0 &&
         lambda[3] > 0.0;
}

Eigen::VectorXd GaussianInvGammaFamily::sample(const Eigen::VectorXd& lambda, Rng& rng) const {
  check_domain(lambda);
  Eigen::VectorXd theta(2);
  theta[0] = lambda[0] + std::sqrt(lambda[1]) * rng.normal();
  theta[1] = clamp_positive(lambda[3] / rng.gamma(lambda[2]));
  return theta;
}

double GaussianInvGammaFamily::log_density(const Eigen::VectorXd& lambda,
                                           const Eigen::VectorXd& theta) const {
  check_shape(lambda, theta);
  const double mu = theta[0], s2 = theta[1];
  if (!(s2 > 0.0)) return kNegInf;
  const double mu_mu = lambda[0], s2_mu = lambda[1], a = lambda[2], b = lambda[3];
  const double lq_mu = -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(s2_mu) -
                       (mu - mu_mu) * (mu - mu_mu) / (2.0 * s2_mu);
  const double lq_s2 = a * std::log(b) - log_gamma(a) - (a + 1.0) * std::log(s2) - b / s2;
  return lq_mu + lq_s2;
}

Eigen::VectorXd GaussianInvGammaFamily::score(const Eigen::VectorXd& lambda,
                                              const Eigen::VectorXd& theta) const {
  check_shape(lambda, theta);
  const double mu = theta[0], s2 = theta[1];
  if (!(s2 > 0.0)) throw std::domain_error("gaussian_invgamma: sigma^2 must be > 0");
  const double mu_mu = lambda[0], s2_mu = lambda[1], a = lambda[2], b = lambda[3];
  Eigen::VectorXd s(4);
  s[0] = (mu - mu_mu) / s2_mu;
  s[1] = -0.5 / s2_mu + (mu - mu_mu) * (mu - mu_mu) / (2.0 * s2_mu * s2_mu);
  s[2] = std::log(b) - digamma(a) - std::log(s2);
  s[3] = a / b - 1.0 / s2;
  return s;
}

std::optional<Eigen::MatrixXd> GaussianInvGammaFamily::exact_fisher(
    const Eigen::VectorXd& lambda) const {
  check_domain(lambda);
  const double s2_mu = lambda[1], a = lambda[2], b = lambda[3];
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(4, 4);
  f(0, 0) = 1.0 / s2_mu;
  f(1, 1) = 1.0 / (2.0 * s2_mu * s2_mu);
  f(2, 2) = trigamma(a);
  f(2, 3) = f(3, 2) = -1.0 / b;
  f(3, 3) = a / (b * b);
  return f;
}

Eigen::VectorXd GaussianInvGammaFamily::project_to_domain(Eigen::VectorXd lambda) const {
  for (int i = 1; i < 4; ++i) lambda[i] = std::max(lambda[i], kPositivityFloor);
  return lambda;
}

// ---------------------------------------------------------------------------

std::shared_ptr<const Family> make_family(const std::string& id) {
  if (id == "beta") return std::make_shared<BetaFamily>();
  if (id == "gaussian_invgamma") return std::make_shared<GaussianInvGammaFamily>();
  if (id.rfind("gaussian_full", 0) == 0) {
    int d = 3;
    if (auto pos = id.find(':'); pos != std::string::npos) d = std::stoi(id.substr(pos + 1));
    return std::make_shared<GaussianFullFamily>(d);
  }
  throw ConfigError("unknown family: " + id);
}

}  // namespace ifvb
