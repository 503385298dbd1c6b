#include "ifvb/rng.hpp"

#include <cmath>
#include <numbers>

#include "ifvb/errors.hpp"

namespace ifvb {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

Rng Rng::stream(std::uint64_t seed, Stream id) {
  return Rng(splitmix64(seed) ^ splitmix64(static_cast<std::uint64_t>(id) * 0xA24BAED4963EE407ULL));
}

double Rng::uniform() {
  // 53-bit mantissa shifted into (0,1); never returns an endpoint.
  return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform()));
  const double t = 2.0 * std::numbers::pi * uniform();
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

Eigen::VectorXd Rng::normal_vector(Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
  return v;
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) throw std::domain_error("gamma shape must be positive");
  if (shape < 1.0) {
    // Gamma(a) = Gamma(a+1) * U^{1/a}; computed in log space to survive tiny shapes.
    const double g = gamma(shape + 1.0);
    const double boost = std::log(uniform()) / shape;
    double x = std::exp(std::log(g) + boost);
    return x > 0.0 ? x : 1e-300;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
      double r = d * v;
      return r > 0.0 ? r : 1e-300;
    }
  }
}

long Rng::poisson(double rate) {
  if (!(rate >= 0.0) || !std::isfinite(rate)) throw std::domain_error("poisson rate must be finite and >= 0");
  // Count exponential arrivals in [0, rate]; O(rate) but safe at any magnitude.
  long k = 0;
  double acc = -std::log(uniform());
  while (acc <= rate) {
    ++k;
    acc += -std::log(uniform());
  }
  return k;
}

}  // namespace ifvb
