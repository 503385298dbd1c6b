#include "ifvb/specfun.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

// All three functions use the same scheme: shift the argument upward with the
// recurrences
//   ln Gamma(x) = ln Gamma(x+1) - ln x
//   psi(x)      = psi(x+1)      - 1/x
//   psi_1(x)    = psi_1(x+1)    + 1/x^2
// until it reaches kShift, then evaluate the Stirling-type asymptotic series.
// Only positive arguments are supported; no family in this library evaluates
// on the negative axis.

namespace ifvb::specfun {

namespace {

constexpr double kShift = 12.0;

void require_positive(double x, const char* fn) {
  if (!(x > 0.0)) throw std::domain_error(std::string(fn) + ": argument must be > 0");
}

// Bernoulli-number coefficients B_{2n}/(2n(2n-1)) for the ln Gamma series.
constexpr double kLgCoef[] = {
    1.0 / 12.0,      -1.0 / 360.0,      1.0 / 1260.0,  -1.0 / 1680.0,
    1.0 / 1188.0,    -691.0 / 360360.0, 1.0 / 156.0,   -3617.0 / 122400.0,
};

// B_{2n}/(2n) for the digamma series.
constexpr double kDgCoef[] = {
    1.0 / 12.0,    -1.0 / 120.0,     1.0 / 252.0,  -1.0 / 240.0,
    1.0 / 132.0,   -691.0 / 32760.0, 1.0 / 12.0,
};

// B_{2n} for the trigamma series.
constexpr double kTgCoef[] = {
    1.0 / 6.0,   -1.0 / 30.0,     1.0 / 42.0,  -1.0 / 30.0,
    5.0 / 66.0,  -691.0 / 2730.0, 7.0 / 6.0,
};

}  // namespace

double log_gamma(double x) {
  require_positive(x, "log_gamma");
  double shift = 0.0;
  while (x < kShift) {
    shift -= std::log(x);
    x += 1.0;
  }
  const double inv2 = 1.0 / (x * x);
  double series = 0.0;
  double p = 1.0 / x;
  for (double c : kLgCoef) {
    series += c * p;
    p *= inv2;
  }
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  return shift + (x - 0.5) * std::log(x) - x + half_log_2pi + series;
}

double digamma(double x) {
  require_positive(x, "digamma");
  double shift = 0.0;
  while (x < kShift) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv2 = 1.0 / (x * x);
  double series = 0.0;
  double p = inv2;
  for (double c : kDgCoef) {
    series += c * p;
    p *= inv2;
  }
  return shift + std::log(x) - 0.5 / x - series;
}

double trigamma(double x) {
  require_positive(x, "trigamma");
  double shift = 0.0;
  while (x < kShift) {
    shift += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = 0.0;
  double p = inv2 * inv;
  for (double c : kTgCoef) {
    series += c * p;
    p *= inv2;
  }
  return shift + inv + 0.5 * inv2 + series;
}

}  // namespace ifvb::specfun
