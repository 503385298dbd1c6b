#pragma once

namespace ifvb::specfun {

/// ln Gamma(x) for x > 0. Throws std::domain_error otherwise.
double log_gamma(double x);

/// psi(x) = d/dx ln Gamma(x) for x > 0.
double digamma(double x);

/// psi_1(x) = d^2/dx^2 ln Gamma(x) for x > 0.
double trigamma(double x);

}  // namespace ifvb::specfun
