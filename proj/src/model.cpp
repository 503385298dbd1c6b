#include "ifvb/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "ifvb/errors.hpp"
#include "ifvb/specfun.hpp"

namespace ifvb {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

using specfun::digamma;
using specfun::log_gamma;
using specfun::trigamma;

void Dataset::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  for (long i = 0; i < n(); ++i) {
    for (Eigen::Index j = 0; j < covariates.cols(); ++j)
      out << format_value(covariates(i, j)) << ',';
    out << format_value(response[i]) << '\n';
  }
}

Dataset Dataset::load_csv(const std::string& path, int covariate_cols) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<int>(row.size()) != covariate_cols + 1)
      throw ConfigError(path + ": expected " + std::to_string(covariate_cols + 1) +
                        " columns, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  Dataset d;
  d.covariates.resize(rows.size(), covariate_cols);
  d.response.resize(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < covariate_cols; ++j) d.covariates(i, j) = rows[i][j];
    d.response[i] = rows[i].back();
  }
  return d;
}

// ---------------------------------------------------------------------------
// Bernoulli with uniform prior

BernoulliBetaModel::BernoulliBetaModel(Dataset data) : data_(std::move(data)) {
  kappa_ = 0;
  for (long i = 0; i < data_.n(); ++i) {
    const double y = data_.response[i];
    if (y != 0.0 && y != 1.0) throw ConfigError("bernoulli_beta: observations must be 0 or 1");
    kappa_ += static_cast<long>(y);
  }
}

Dataset BernoulliBetaModel::fixed_count_data(long n, long kappa) {
  if (kappa < 0 || kappa > n) throw ConfigError("bernoulli_beta: kappa must lie in [0, n]");
  Dataset d;
  d.covariates.resize(n, 0);
  d.response = Eigen::VectorXd::Zero(n);
  d.response.head(kappa).setOnes();
  return d;
}

Dataset BernoulliBetaModel::simulate(long n, double p, Rng& rng) {
  Dataset d;
  d.covariates.resize(n, 0);
  d.response.resize(n);
  for (long i = 0; i < n; ++i) d.response[i] = rng.uniform() < p ? 1.0 : 0.0;
  return d;
}

double BernoulliBetaModel::log_joint(const Eigen::VectorXd& theta) const {
  const double t = theta[0];
  if (!(t > 0.0 && t < 1.0)) return kNegInf;
  const double n = static_cast<double>(data_.n());
  const double k = static_cast<double>(kappa_);
  return k * std::log(t) + (n - k) * std::log1p(-t);  // uniform prior contributes 0
}

std::optional<Eigen::VectorXd> BernoulliBetaModel::exact_lb_gradient(
    const Family& family, const Eigen::VectorXd& lambda) const {
  if (family.name() != "beta") return std::nullopt;
  family.check_domain(lambda);
  const double a = lambda[0], b = lambda[1];
  const double n = static_cast<double>(data_.n());
  const double k = static_cast<double>(kappa_);
  const double tab = trigamma(a + b);
  Eigen::VectorXd g(2);
  g[0] = (k + 1.0 - a) * (trigamma(a) - tab) - (n - k + 1.0 - b) * tab;
  g[1] = (n - k + 1.0 - b) * (trigamma(b) - tab) - (k + 1.0 - a) * tab;
  return g;
}

std::optional<Eigen::VectorXd> BernoulliBetaModel::optimum() const {
  Eigen::VectorXd opt(2);
  opt[0] = static_cast<double>(kappa_ + 1);
  opt[1] = static_cast<double>(data_.n() - kappa_ + 1);
  return opt;
}

// ---------------------------------------------------------------------------
// Poisson log-linear regression

PoissonLoglinearModel::PoissonLoglinearModel(Dataset data, double sigma0_sq)
    : data_(std::move(data)), d_(static_cast<int>(data_.covariates.cols())),
      sigma0_sq_(sigma0_sq) {
  if (d_ < 1) throw ConfigError("poisson_loglinear: covariates required");
  if (!(sigma0_sq_ > 0.0)) throw ConfigError("poisson_loglinear: sigma0^2 must be > 0");
  log_factorial_sum_ = 0.0;
  for (long i = 0; i < data_.n(); ++i) {
    const double y = data_.response[i];
    if (y < 0.0 || y != std::floor(y))
      throw ConfigError("poisson_loglinear: observations must be non-negative integers");
    log_factorial_sum_ += log_gamma(y + 1.0);
  }
}

Dataset PoissonLoglinearModel::simulate(long n, int d, Rng& rng) {
  Dataset out;
  out.covariates.resize(n, d);
  out.response.resize(n);
  const Eigen::VectorXd theta = Eigen::VectorXd::Ones(d);
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) out.covariates(i, j) = rng.normal();
    const double rate = std::exp(out.covariates.row(i).dot(theta));
    out.response[i] = static_cast<double>(rng.poisson(rate));
  }
  return out;
}

double PoissonLoglinearModel::log_joint(const Eigen::VectorXd& theta) const {
  const double prior = -0.5 * d_ * std::log(2.0 * std::numbers::pi * sigma0_sq_) -
                       theta.squaredNorm() / (2.0 * sigma0_sq_);
  const Eigen::VectorXd eta = data_.covariates * theta;
  double lik = data_.response.dot(eta) - eta.array().exp().sum() - log_factorial_sum_;
  return prior + lik;
}

std::optional<double> PoissonLoglinearModel::exact_lb(const Family& family,
                                                      const Eigen::VectorXd& lambda) const {
  const auto* gf = dynamic_cast<const GaussianFullFamily*>(&family);
  if (gf == nullptr || gf->theta_dim() != d_) return std::nullopt;
  family.check_domain(lambda);
  const Eigen::VectorXd mu = gf->mean(lambda);
  const Eigen::MatrixXd sigma = gf->covariance(lambda);
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("poisson_loglinear: Sigma is not positive definite");
  const Eigen::MatrixXd& x = data_.covariates;
  const Eigen::VectorXd eta = x * mu;
  const Eigen::VectorXd quad = ((x * sigma).cwiseProduct(x)).rowwise().sum();
  const double w_sum = (eta + 0.5 * quad).array().exp().sum();
  double log_det = 0.0;
  for (int i = 0; i < d_; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  return data_.response.dot(eta) - w_sum - log_factorial_sum_ -
         (mu.squaredNorm() + sigma.trace()) / (2.0 * sigma0_sq_) + 0.5 * log_det +
         0.5 * d_ * (1.0 - std::log(sigma0_sq_));
}

std::optional<Eigen::VectorXd> PoissonLoglinearModel::exact_lb_gradient(
    const Family& family, const Eigen::VectorXd& lambda) const {
  const auto* gf = dynamic_cast<const GaussianFullFamily*>(&family);
  if (gf == nullptr || gf->theta_dim() != d_) return std::nullopt;
  family.check_domain(lambda);
  const Eigen::VectorXd mu = gf->mean(lambda);
  const Eigen::MatrixXd sigma = gf->covariance(lambda);
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("poisson_loglinear: Sigma is not positive definite");
  const Eigen::MatrixXd& x = data_.covariates;
  const Eigen::VectorXd eta = x * mu;
  const Eigen::VectorXd quad = ((x * sigma).cwiseProduct(x)).rowwise().sum();
  const Eigen::VectorXd w = (eta + 0.5 * quad).array().exp();
  const Eigen::MatrixXd prec = llt.solve(Eigen::MatrixXd::Identity(d_, d_));

  Eigen::VectorXd g(gf->dim());
  g.head(d_) = x.transpose() * (data_.response - w) - mu / sigma0_sq_;
  const Eigen::MatrixXd xtwx = x.transpose() * w.asDiagonal() * x;
  Eigen::Map<Eigen::MatrixXd>(g.data() + d_, d_, d_) =
      0.5 * (prec - Eigen::MatrixXd::Identity(d_, d_) / sigma0_sq_ - xtwx);
  return g;
}

// ---------------------------------------------------------------------------
// Normal with unknown mean and variance

NormalInvGammaModel::NormalInvGammaModel(Dataset data, double mu0, double sigma0, double a0,
                                         double b0)
    : data_(std::move(data)), mu0_(mu0), sigma0_(sigma0), a0_(a0), b0_(b0) {
  if (!(sigma0_ > 0.0 && a0_ > 0.0 && b0_ > 0.0))
    throw ConfigError("normal_invgamma: hyperparameters must be positive");
}

Dataset NormalInvGammaModel::builtin_data() {
  Dataset d;
  d.covariates.resize(10, 0);
  d.response.resize(10);
  d.response << 11, 12, 8, 10, 9, 8, 9, 10, 13, 7;
  return d;
}

double NormalInvGammaModel::log_joint(const Eigen::VectorXd& theta) const {
  const double mu = theta[0], s2 = theta[1];
  if (!(s2 > 0.0)) return kNegInf;
  const double n = static_cast<double>(data_.n());
  const double rss = (data_.response.array() - mu).square().sum();
  return -(n + 1.0) / 2.0 * std::log(2.0 * std::numbers::pi) - std::log(sigma0_ * sigma0_) / 2.0 -
         (mu - mu0_) * (mu - mu0_) / (2.0 * sigma0_ * sigma0_) + a0_ * std::log(b0_) -
         log_gamma(a0_) - (n / 2.0 + a0_ + 1.0) * std::log(s2) - b0_ / s2 - rss / (2.0 * s2);
}

}  // namespace ifvb
