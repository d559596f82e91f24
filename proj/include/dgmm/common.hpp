#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace dgmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class Errc {
  invalid_argument,
  empty_sample,
  domain,
  unsupported_order,
  shape_mismatch,
  guard_exceeded,
  degenerate_kernel,
  degenerate_data,
  non_finite,
  factorization_failed,
  io,
};

inline const char* errc_name(Errc e) {
  switch (e) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::empty_sample: return "empty-sample";
    case Errc::domain: return "domain";
    case Errc::unsupported_order: return "unsupported-order";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::guard_exceeded: return "guard-exceeded";
    case Errc::degenerate_kernel: return "degenerate-kernel";
    case Errc::degenerate_data: return "degenerate-data";
    case Errc::non_finite: return "non-finite";
    case Errc::factorization_failed: return "factorization-failed";
    case Errc::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

/// Binomial coefficients C(n, r) for n < 64, built once.
inline double binomial(int n, int r) {
  static const auto table = [] {
    std::array<std::array<double, 64>, 64> t{};
    for (int i = 0; i < 64; ++i) {
      t[i][0] = 1.0;
      for (int j = 1; j <= i; ++j) t[i][j] = t[i - 1][j - 1] + (j < i ? t[i - 1][j] : 0.0);
    }
    return t;
  }();
  if (r < 0 || n < 0 || r > n) return 0.0;
  if (n >= 64) throw Error(Errc::unsupported_order, "binomial table limited to n < 64");
  return table[n][r];
}

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

inline double relative_error(double approx, double exact, double floor = 1e-30) {
  return std::abs(approx - exact) / std::max(std::abs(exact), floor);
}

}  // namespace dgmm
