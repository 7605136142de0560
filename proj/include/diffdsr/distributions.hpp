#pragma once

// Gaussian algebra for forward marginals and the fidelity/alignment
// trade-off that drives timestep selection.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "diffdsr/error.hpp"

namespace diffdsr {

/// N(mean, sigma^2 I) over a flat latent vector.
struct IsotropicGaussian {
  std::vector<double> mean;
  double sigma = 0.0;

  std::size_t dim() const noexcept { return mean.size(); }

  void validate() const {
    detail::require(!mean.empty(), "gaussian needs a positive dimension");
    detail::require(std::isfinite(sigma) && sigma >= 0.0, "gaussian sigma must be finite and >= 0");
    for (double m : mean) detail::require(std::isfinite(m), "gaussian mean must be finite");
  }
};

struct TradeoffParams {
  double lambda = 1.0;  // weight on the distance term
  double omega = 1.0;   // distance scale

  void validate() const {
    detail::require(std::isfinite(lambda) && lambda > 0.0, "lambda must be > 0");
    detail::require(std::isfinite(omega) && omega > 0.0, "omega must be > 0");
  }
};

namespace detail {

inline void require_alpha(double alpha_bar) {
  require(std::isfinite(alpha_bar) && alpha_bar > 0.0 && alpha_bar <= 1.0,
          "alpha_bar must lie in (0, 1]");
}

}  // namespace detail

/// Marginal of sqrt(a) z0 + sqrt(1 - a) eps when z0 carries isotropic
/// uncertainty sigma0. sigma0 = 0 gives the clean forward marginal.
inline IsotropicGaussian forward_marginal(std::span<const double> z0, double sigma0, double alpha_bar) {
  detail::require(std::isfinite(sigma0) && sigma0 >= 0.0, "sigma0 must be finite and >= 0");
  detail::require_alpha(alpha_bar);
  IsotropicGaussian g;
  g.mean.resize(z0.size());
  const double scale = std::sqrt(alpha_bar);
  for (std::size_t i = 0; i < z0.size(); ++i) {
    detail::require(std::isfinite(z0[i]), "z0 must be finite");
    g.mean[i] = scale * z0[i];
  }
  g.sigma = std::sqrt(alpha_bar * sigma0 * sigma0 + (1.0 - alpha_bar));
  return g;
}

/// Closed-form W2 between isotropic Gaussians of equal dimension.
inline double wasserstein2_exact(const IsotropicGaussian& p, const IsotropicGaussian& q) {
  if (p.dim() != q.dim()) throw std::invalid_argument("wasserstein2: dimension mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double d = p.mean[i] - q.mean[i];
    sq += d * d;
  }
  const double ds = p.sigma - q.sigma;
  sq += static_cast<double>(p.dim()) * ds * ds;
  return std::sqrt(sq);
}

/// wasserstein2_exact(forward_marginal(z0, sigma0, a), forward_marginal(z, 0, a))
/// from ||z0 - z||^2 and the dimension alone.
inline double wasserstein2_forward(double sq_distance, std::size_t dim, double sigma0, double alpha_bar) {
  detail::require(std::isfinite(sq_distance) && sq_distance >= 0.0, "squared distance must be >= 0");
  detail::require(std::isfinite(sigma0) && sigma0 >= 0.0, "sigma0 must be finite and >= 0");
  detail::require_alpha(alpha_bar);
  const double ds = std::sqrt(alpha_bar * sigma0 * sigma0 + (1.0 - alpha_bar)) - std::sqrt(1.0 - alpha_bar);
  return std::sqrt(alpha_bar * sq_distance + static_cast<double>(dim) * ds * ds);
}

/// sqrt(alpha_bar) * omega: the distance form that the selection rule is
/// derived from. Deliberately carries no dimension factor.
inline double wasserstein2_surrogate(double alpha_bar, double omega) {
  detail::require_alpha(alpha_bar);
  detail::require(std::isfinite(omega) && omega >= 0.0, "omega must be >= 0");
  return std::sqrt(alpha_bar) * omega;
}

/// log H = 0.5 log a - lambda omega sqrt(a).
inline double log_h_objective(double alpha_bar, const TradeoffParams& params) {
  detail::require_alpha(alpha_bar);
  params.validate();
  const double root = std::sqrt(alpha_bar);
  return std::log(root) - params.lambda * params.omega * root;
}

/// H(a) = sqrt(a) exp(-lambda omega sqrt(a)).
inline double h_objective(double alpha_bar, const TradeoffParams& params) {
  detail::require_alpha(alpha_bar);
  params.validate();
  const double root = std::sqrt(alpha_bar);
  const double exponent = params.lambda * params.omega * root;
  if (exponent > 30.0) return std::exp(log_h_objective(alpha_bar, params));
  return root * std::exp(-exponent);
}

/// argmax of H over (0, 1]: the critical point 1 / (lambda omega)^2,
/// or the boundary 1 when lambda omega <= 1.
inline double h_maximizer(const TradeoffParams& params) {
  params.validate();
  const double lw = params.lambda * params.omega;
  if (lw <= 1.0) return 1.0;
  return std::min(1.0, 1.0 / (lw * lw));
}

}  // namespace diffdsr
