#pragma once

#include "piham/types.hpp"

namespace piham {

// Marginal Gaussian over one membership row: block mean and the diagonal of
// the block covariance. Off-diagonal curvature does not enter the matching.
struct GaussianBlock {
  Vector mean;
  Vector variance_diag;

  void validate() const;
};

struct DirichletPosterior {
  Vector alpha;
};

// Laplace matching of a Gaussian over R^K to a Dirichlet on the simplex:
//   alpha_k = (1 / var_k) * (1 - 2/K + (exp(mu_k) / K^2) * sum_l exp(mu_l)).
// A nonpositive alpha (large variances) throws std::domain_error naming the
// offending component unless clamp_nonpositive is set, in which case the
// entry is clamped to 1e-6.
DirichletPosterior gaussian_to_dirichlet(const GaussianBlock& g,
                                         bool clamp_nonpositive = false);

// alpha / sum(alpha); strictly positive, sums to 1 within 1e-12.
Vector dirichlet_mean(const DirichletPosterior& d);

// softmax of the posterior mean; the point-estimate alternative to
// dirichlet_mean.
Vector softmax_point_estimate(const Vector& mean);

// Log-normal view of a Gaussian over log-space parameters.
struct LogNormalParams {
  Vector mu;
  Vector variance;

  Vector mean() const;    // exp(mu + var/2)
  Vector median() const;  // exp(mu)
};

LogNormalParams lognormal_params(const GaussianBlock& g);

// Logit-normal view; the mean has no closed form and integrates
// logistic^{-1}-transformed Gaussian mass on (0,1) with a fixed trapezoid
// grid for determinism.
struct LogitNormalParams {
  Vector mu;
  Vector variance;

  Vector median() const;  // logistic(mu)
  Vector mean() const;    // trapezoid on (0,1), 4097 points
};

LogitNormalParams logitnormal_params(const GaussianBlock& g);

}  // namespace piham
