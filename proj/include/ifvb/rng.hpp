#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace ifvb {

/// Named sub-streams derived from a master seed. Keeping draws on separate
/// streams means toggling one component (say the regularizer) does not
/// perturb the draws of another (say the gradient estimator).
enum class Stream : std::uint64_t {
  data = 1,         // synthetic dataset generation
  gradient = 2,     // score-function gradient estimator draws
  fisher_score = 3, // theta draws feeding the inverse-Fisher recursion
  regularizer = 4,  // Gaussian regularizer vectors Z_k
  eval = 5,         // Monte Carlo ELBO evaluation for traces
};

/// Seeded generator with the samplers the library needs. All distributions
/// are implemented explicitly so draw sequences are reproducible across
/// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Generator for a named sub-stream of `seed`.
  static Rng stream(std::uint64_t seed, Stream id);

  /// Uniform on the open interval (0,1).
  double uniform();

  /// Standard normal via Box-Muller (one spare cached).
  double normal();

  Eigen::VectorXd normal_vector(Eigen::Index n);

  /// Gamma(shape, scale=1) via Marsaglia-Tsang, with the power-of-uniform
  /// boost for shape < 1. Returns a strictly positive value.
  double gamma(double shape);

  /// Poisson(rate) by exponential arrival counting; safe for any rate.
  long poisson(double rate);

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 mix; used to derive sub-stream seeds.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace ifvb
