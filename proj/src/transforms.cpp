#include "piham/transforms.hpp"

namespace piham {

RowVector softmax_row(const RowVector& row) {
  RowVector shifted = row.array() - row.maxCoeff();
  RowVector p = shifted.array().exp();
  p /= p.sum();
  p = p.array().max(kProbFloor);
  p /= p.sum();
  return p;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) out.row(i) = softmax_row(m.row(i));
  return out;
}

Matrix transform_g(const LayerKind& kind, const Matrix& raw) {
  switch (kind.family) {
    case LayerFamily::bernoulli:
      return raw.unaryExpr([](double v) { return logistic(v); });
    case LayerFamily::poisson:
      return raw.unaryExpr([](double v) { return exp_clamped(v); });
    case LayerFamily::gaussian:
      return raw;
  }
  throw std::invalid_argument("unknown layer family");
}

Matrix transform_g(const AttributeKind& kind, const Matrix& raw) {
  switch (kind.family) {
    case AttributeFamily::categorical:
      return softmax_rows(raw);
    case AttributeFamily::poisson:
      return raw.unaryExpr([](double v) { return exp_clamped(v); });
    case AttributeFamily::gaussian:
      return raw;
  }
  throw std::invalid_argument("unknown attribute family");
}

}  // namespace piham
