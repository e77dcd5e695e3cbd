#include "piham/laplace_matching.hpp"

#include "piham/transforms.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace piham {

void GaussianBlock::validate() const {
  if (mean.size() != variance_diag.size())
    throw std::invalid_argument("mean and variance lengths differ");
  if (mean.size() < 1) throw std::invalid_argument("empty Gaussian block");
  if (!mean.allFinite())
    throw std::invalid_argument("Gaussian block mean is not finite");
  if ((variance_diag.array() <= 0.0).any())
    throw std::invalid_argument("Gaussian block variances must be positive");
}

DirichletPosterior gaussian_to_dirichlet(const GaussianBlock& g,
                                         bool clamp_nonpositive) {
  g.validate();
  const Index k = g.mean.size();
  if (k < 2)
    throw std::invalid_argument("Dirichlet matching needs at least 2 components");

  // exp(mu_i) * sum_l exp(mu_l), computed in log space against the max so
  // large means cannot overflow before the cap applies.
  const double shift = g.mean.maxCoeff();
  double exp_sum = 0.0;
  for (Index l = 0; l < k; ++l) exp_sum += std::exp(g.mean(l) - shift);
  const double log_sum = shift + std::log(exp_sum);

  DirichletPosterior d;
  d.alpha.resize(k);
  const double kk = static_cast<double>(k);
  for (Index i = 0; i < k; ++i) {
    double pair_sum = std::exp(std::min(g.mean(i) + log_sum, kExpCap));
    double alpha =
        (1.0 - 2.0 / kk + pair_sum / (kk * kk)) / g.variance_diag(i);
    if (alpha <= 0.0) {
      if (!clamp_nonpositive)
        throw std::domain_error(
            "Laplace matching produced nonpositive alpha at component " +
            std::to_string(i));
      alpha = 1e-6;
    }
    d.alpha(i) = alpha;
  }
  return d;
}

Vector dirichlet_mean(const DirichletPosterior& d) {
  if (d.alpha.size() < 1) throw std::invalid_argument("empty Dirichlet");
  if ((d.alpha.array() <= 0.0).any())
    throw std::invalid_argument("Dirichlet parameters must be positive");
  return d.alpha / d.alpha.sum();
}

Vector softmax_point_estimate(const Vector& mean) {
  return softmax_row(mean.transpose()).transpose();
}

Vector LogNormalParams::mean() const {
  return (mu.array() + variance.array() / 2.0).exp();
}

Vector LogNormalParams::median() const { return mu.array().exp(); }

LogNormalParams lognormal_params(const GaussianBlock& g) {
  g.validate();
  return {g.mean, g.variance_diag};
}

Vector LogitNormalParams::median() const {
  Vector out(mu.size());
  for (Index i = 0; i < mu.size(); ++i) out(i) = logistic(mu(i));
  return out;
}

Vector LogitNormalParams::mean() const {
  constexpr Index kGridPoints = 4097;
  Vector out(mu.size());
  for (Index i = 0; i < mu.size(); ++i) {
    const double sigma = std::sqrt(variance(i));
    const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
    // x times the logit-normal density; the leading x cancels one factor of
    // the change-of-variables Jacobian 1/(x(1-x)).
    auto integrand = [&](double x) {
      double z = (std::log(x / (1.0 - x)) - mu(i)) / sigma;
      return norm * std::exp(-0.5 * z * z) / (1.0 - x);
    };
    const double h = 1.0 / static_cast<double>(kGridPoints + 1);
    double previous = integrand(h);
    double sum = 0.0;
    for (Index p = 2; p <= kGridPoints; ++p) {
      double current = integrand(static_cast<double>(p) * h);
      sum += 0.5 * (previous + current) * h;
      previous = current;
    }
    out(i) = sum;
  }
  return out;
}

LogitNormalParams logitnormal_params(const GaussianBlock& g) {
  g.validate();
  return {g.mean, g.variance_diag};
}

}  // namespace piham
