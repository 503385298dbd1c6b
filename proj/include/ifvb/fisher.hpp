#pragma once

#include <deque>
#include <limits>

#include <Eigen/Core>

namespace ifvb {

/// Parameters of the running inverse-Fisher estimate.
struct FisherConfig {
  double epsilon = 1.0;  ///< H_0 = epsilon * I scale, > 0.
  double c_beta = 1.0;   ///< regularizer weight, >= 0.
  double beta = 0.3;     ///< regularizer decay exponent.
  long capacity = 100;   ///< retained outer products in compact mode; <= 0 means unbounded.

  /// Validates the standalone constraints (epsilon > 0, c_beta >= 0,
  /// beta in (0,1) whenever c_beta > 0).
  void validate() const;

  /// Additionally enforces beta < alpha - 1/2 when c_beta > 0, where alpha is
  /// the step-size decay exponent of the optimizer driving this state.
  void validate_against_alpha(double alpha) const;
};

enum class FisherMode { dense, compact };

/// Running estimate of the inverse of
///
///   H_s = epsilon*I + sum_k phi_k phi_k^T + c_beta * sum_j j^-beta Z_j Z_j^T
///
/// maintained purely through rank-one Riccati updates, so the usual matrix
/// inversion never happens. Dense mode stores the D x D inverse; compact mode
/// stores only the update vectors psi_k with
///
///   H_s^{-1} = (1/epsilon) I - sum_k psi_k psi_k^T
///
/// and keeps at most `capacity` of them per list (score and regularizer
/// vectors are held in separate lists, symmetric treatment). When no
/// truncation has occurred the two representations agree to rounding.
class FisherInverseState {
 public:
  FisherInverseState(int dim, const FisherConfig& config, FisherMode mode = FisherMode::dense);

  /// Absorbs one score vector phi:
  ///   H^{-1} <- H^{-1} - (1 + phi^T H^{-1} phi)^{-1} (H^{-1} phi)(H^{-1} phi)^T.
  void absorb_score(const Eigen::Ref<const Eigen::VectorXd>& phi);

  /// Absorbs one regularizer vector z with weight c_beta * j^-beta where j
  /// counts regularizer updates (this one included).
  void absorb_regularizer(const Eigen::Ref<const Eigen::VectorXd>& z);

  /// H^{-1} v, or count * H^{-1} v when `scaled` (the Fisher-inverse scale).
  /// Compact mode never materializes a matrix. If a truncated compact state
  /// has lost positive definiteness along v (v^T H^{-1} v <= 0), falls back to
  /// (1/epsilon) v and counts the event.
  Eigen::VectorXd apply_inverse(const Eigen::Ref<const Eigen::VectorXd>& v, bool scaled);

  /// Materializes the current H^{-1} as a dense matrix (either mode).
  Eigen::MatrixXd dense_matrix() const;

  /// Dense-mode state equivalent to this one (counts and diagnostics carried over).
  FisherInverseState densify() const;

  int dim() const { return dim_; }
  FisherMode mode() const { return mode_; }
  const FisherConfig& config() const { return config_; }
  long count() const { return count_; }
  long reg_count() const { return reg_count_; }

  /// Smallest Riccati denominator seen so far (>= 1 while the state is PSD).
  double min_denominator() const { return min_denominator_; }
  /// Number of apply_inverse calls that hit the truncation fallback.
  long fallback_count() const { return fallback_count_; }

 private:
  void check_vector(const Eigen::Ref<const Eigen::VectorXd>& v, const char* what) const;
  Eigen::VectorXd multiply(const Eigen::Ref<const Eigen::VectorXd>& v) const;
  void rank_one_downdate(const Eigen::VectorXd& u, double denom);

  int dim_;
  FisherConfig config_;
  FisherMode mode_;
  long count_ = 0;
  long reg_count_ = 0;
  double min_denominator_ = std::numeric_limits<double>::infinity();
  long fallback_count_ = 0;

  Eigen::MatrixXd inv_;               // dense mode
  std::deque<Eigen::VectorXd> psis_;  // compact mode, score updates
  std::deque<Eigen::VectorXd> reg_psis_;
};

}  // namespace ifvb
