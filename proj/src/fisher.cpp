#include "ifvb/fisher.hpp"

#include <cmath>
#include <string>

#include "ifvb/errors.hpp"

namespace ifvb {

void FisherConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("fisher: epsilon must be > 0");
  if (!(c_beta >= 0.0)) throw ConfigError("fisher: c_beta must be >= 0");
  if (c_beta > 0.0 && !(beta > 0.0 && beta < 1.0))
    throw ConfigError("fisher: beta must lie in (0,1) when c_beta > 0");
}

void FisherConfig::validate_against_alpha(double alpha) const {
  validate();
  if (c_beta > 0.0 && !(beta < alpha - 0.5)) {
    throw ConfigError("fisher: beta (" + std::to_string(beta) +
                      ") must lie in (0, alpha - 1/2) = (0, " + std::to_string(alpha - 0.5) +
                      ") when c_beta > 0");
  }
}

FisherInverseState::FisherInverseState(int dim, const FisherConfig& config, FisherMode mode)
    : dim_(dim), config_(config), mode_(mode) {
  if (dim < 1) throw ConfigError("fisher: dim must be >= 1");
  config_.validate();
  if (mode_ == FisherMode::dense) {
    inv_ = Eigen::MatrixXd::Identity(dim_, dim_) / config_.epsilon;
  }
}

void FisherInverseState::check_vector(const Eigen::Ref<const Eigen::VectorXd>& v,
                                      const char* what) const {
  if (v.size() != dim_) {
    throw ShapeError(std::string(what) + ": expected length " + std::to_string(dim_) +
                     ", got " + std::to_string(v.size()));
  }
  if (!v.allFinite()) throw NumericError(std::string(what) + ": non-finite entries");
}

Eigen::VectorXd FisherInverseState::multiply(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  if (mode_ == FisherMode::dense) return inv_ * v;
  Eigen::VectorXd r = v / config_.epsilon;
  for (const auto& psi : psis_) r -= psi.dot(v) * psi;
  for (const auto& psi : reg_psis_) r -= psi.dot(v) * psi;
  return r;
}

void FisherInverseState::rank_one_downdate(const Eigen::VectorXd& u, double denom) {
  // inv <- inv - u u^T / denom, coefficient-wise so symmetry is exact.
  inv_.noalias() -= (u * u.transpose()) / denom;
}

void FisherInverseState::absorb_score(const Eigen::Ref<const Eigen::VectorXd>& phi) {
  check_vector(phi, "absorb_score");
  const Eigen::VectorXd u = multiply(phi);
  const double denom = 1.0 + phi.dot(u);
  if (!(denom > 0.0)) {
    if (mode_ == FisherMode::dense)
      throw NumericError("absorb_score: Riccati denominator " + std::to_string(denom) +
                         " is not positive");
    // A truncated compact state may have lost definiteness; skip the update
    // rather than injecting an indefinite outer product.
    ++fallback_count_;
    ++count_;
    return;
  }
  min_denominator_ = std::min(min_denominator_, denom);
  if (mode_ == FisherMode::dense) {
    rank_one_downdate(u, denom);
  } else if (u.squaredNorm() > 0.0) {
    psis_.push_back(u / std::sqrt(denom));
    if (config_.capacity > 0 && static_cast<long>(psis_.size()) > config_.capacity)
      psis_.pop_front();
  }
  ++count_;
}

void FisherInverseState::absorb_regularizer(const Eigen::Ref<const Eigen::VectorXd>& z) {
  check_vector(z, "absorb_regularizer");
  const long j = reg_count_ + 1;
  const double c = config_.c_beta * std::pow(static_cast<double>(j), -config_.beta);
  if (c > 0.0) {
    const Eigen::VectorXd u = multiply(z);
    const double denom = 1.0 + c * z.dot(u);
    if (!(denom > 0.0)) {
      if (mode_ == FisherMode::dense)
        throw NumericError("absorb_regularizer: Riccati denominator is not positive");
      ++fallback_count_;
      ++reg_count_;
      return;
    }
    min_denominator_ = std::min(min_denominator_, denom);
    if (mode_ == FisherMode::dense) {
      rank_one_downdate(u, denom / c);
    } else if (u.squaredNorm() > 0.0) {
      reg_psis_.push_back(std::sqrt(c / denom) * u);
      if (config_.capacity > 0 && static_cast<long>(reg_psis_.size()) > config_.capacity)
        reg_psis_.pop_front();
    }
  }
  ++reg_count_;
}

Eigen::VectorXd FisherInverseState::apply_inverse(const Eigen::Ref<const Eigen::VectorXd>& v,
                                                  bool scaled) {
  check_vector(v, "apply_inverse");
  if (scaled && count_ == 0)
    throw StateError("apply_inverse: scaled application requires at least one score update");
  Eigen::VectorXd r = multiply(v);
  if (mode_ == FisherMode::compact && v.dot(r) <= 0.0 && v.squaredNorm() > 0.0) {
    r = v / config_.epsilon;
    ++fallback_count_;
  }
  if (scaled) r *= static_cast<double>(count_);
  return r;
}

Eigen::MatrixXd FisherInverseState::dense_matrix() const {
  if (mode_ == FisherMode::dense) return inv_;
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(dim_, dim_) / config_.epsilon;
  for (const auto& psi : psis_) m.noalias() -= psi * psi.transpose();
  for (const auto& psi : reg_psis_) m.noalias() -= psi * psi.transpose();
  return m;
}

FisherInverseState FisherInverseState::densify() const {
  FisherInverseState out(dim_, config_, FisherMode::dense);
  out.inv_ = dense_matrix();
  out.count_ = count_;
  out.reg_count_ = reg_count_;
  out.min_denominator_ = min_denominator_;
  out.fallback_count_ = fallback_count_;
  return out;
}

}  // namespace ifvb
