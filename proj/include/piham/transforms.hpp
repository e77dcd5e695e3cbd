#pragma once

#include "piham/types.hpp"

namespace piham {

inline constexpr double kProbFloor = 1e-12;
inline constexpr double kExpCap = 700.0;

// exp with the argument capped so the result stays finite.
inline double exp_clamped(double x) { return std::exp(std::min(x, kExpCap)); }

// Logistic function with output kept inside (0, 1).
inline double logistic(double x) {
  double p = 1.0 / (1.0 + exp_clamped(-x));
  return std::min(std::max(p, kProbFloor), 1.0 - kProbFloor);
}

// Neumaier compensated accumulator. Likelihoods sum thousands of terms whose
// magnitudes span several orders (Gaussian terms scale with 1/sigma^2), and
// plain sequential addition leaves ~1e-10 of noise on the total, which
// dominates central finite differences of the objective at small steps.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double term) {
    double t = sum + term;
    if (std::abs(sum) >= std::abs(term))
      carry += (sum - t) + term;
    else
      carry += (term - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

// Softmax of one row, max-subtracted; outputs are strictly positive and
// renormalized after flooring so each row sums to 1.
RowVector softmax_row(const RowVector& row);

// Row-wise softmax of a matrix.
Matrix softmax_rows(const Matrix& m);

// Elementwise link g applied to an affinity matrix per layer family:
// bernoulli -> logistic, poisson -> exp, gaussian -> identity.
Matrix transform_g(const LayerKind& kind, const Matrix& raw);

// Link for an attribute loading block: categorical -> row softmax over the
// Z categories, poisson -> exp, gaussian -> identity.
Matrix transform_g(const AttributeKind& kind, const Matrix& raw);

}  // namespace piham
