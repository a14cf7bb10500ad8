#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace susytb {

using cplx = std::complex<double>;

inline constexpr cplx I{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

// Error hierarchy. Every failure the library reports derives from Error so
// callers (CLI, bindings) can map them onto exit codes / Python exceptions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parameter or configuration outside its admissible set.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A seed or Wronskian vanishes (to the node threshold) at an evaluation point.
class SingularPointError : public Error {
 public:
  SingularPointError(const std::string& what, double x, double z)
      : Error(what), x_(x), z_(z) {}
  double x() const noexcept { return x_; }
  double z() const noexcept { return z_; }

 private:
  double x_;
  double z_;
};

// Quadrature tail or derivative-resolution checks failed.
class QuadratureError : public Error {
 public:
  using Error::Error;
};

// Linear algebra / ODE / optimizer breakdown.
class SolverError : public Error {
 public:
  using Error::Error;
};

std::vector<double> linspace(double a, double b, int n);

}  // namespace susytb
