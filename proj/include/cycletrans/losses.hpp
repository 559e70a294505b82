#pragma once

#include <cmath>
#include <string>

#include "cycletrans/tensor.hpp"

namespace cycletrans {

struct LossWeights {
  double lambda1 = 10.0;  // cycle weight
  double lambda2 = 5.0;   // disparity weight

  void validate() const {
    if (lambda1 < 0 || lambda2 < 0) throw ConfigError("LossWeights: lambdas must be >= 0");
  }
};

struct LossBreakdown {
  double adv_x = 0;
  double adv_y = 0;
  double cycle = 0;
  double disparity = 0;
  double total = 0;
};

enum class AdversarialMode { LogLoss, LeastSquares };

inline const char* adversarial_mode_name(AdversarialMode m) {
  return m == AdversarialMode::LogLoss ? "log" : "least_squares";
}

inline constexpr double kLogClampEps = 1e-7;

template <typename Scalar>
struct AdversarialResult {
  Scalar discriminator_loss;
  Scalar generator_loss;  // non-saturating form in log mode
  long clamped = 0;       // probabilities pushed back inside [eps, 1-eps]
};

namespace detail {
template <typename Scalar>
Scalar clamp_prob(Scalar p, long& clamped) {
  const Scalar eps = Scalar(kLogClampEps);
  if (p < eps) {
    ++clamped;
    return eps;
  }
  if (p > Scalar(1) - eps) {
    ++clamped;
    return Scalar(1) - eps;
  }
  return p;
}
}  // namespace detail

/// Discriminator loss follows the log objective literally,
/// -mean(log real) - mean(log(1 - fake)); the generator side uses the
/// non-saturating -mean(log fake). Least-squares mode targets 1/0 with
/// squared error instead.
template <typename Scalar>
AdversarialResult<Scalar> adversarial_loss(const Tensor4<Scalar>& disc_real,
                                           const Tensor4<Scalar>& disc_fake,
                                           AdversarialMode mode = AdversarialMode::LogLoss) {
  AdversarialResult<Scalar> r{};
  const Scalar nr = static_cast<Scalar>(disc_real.size());
  const Scalar nf = static_cast<Scalar>(disc_fake.size());
  if (mode == AdversarialMode::LeastSquares) {
    r.discriminator_loss = (disc_real.array() - Scalar(1)).square().sum() / nr +
                           disc_fake.array().square().sum() / nf;
    r.generator_loss = (disc_fake.array() - Scalar(1)).square().sum() / nf;
    return r;
  }
  Scalar log_real = 0, log_one_minus_fake = 0, log_fake = 0;
  for (Eigen::Index i = 0; i < disc_real.size(); ++i)
    log_real += std::log(detail::clamp_prob(disc_real.array()[i], r.clamped));
  for (Eigen::Index i = 0; i < disc_fake.size(); ++i) {
    const Scalar p = detail::clamp_prob(disc_fake.array()[i], r.clamped);
    log_one_minus_fake += std::log(Scalar(1) - p);
    log_fake += std::log(p);
  }
  r.discriminator_loss = -log_real / nr - log_one_minus_fake / nf;
  r.generator_loss = -log_fake / nf;
  return r;
}

/// d(generator_loss)/d(disc_fake); zero where the clamp is active.
template <typename Scalar>
Tensor4<Scalar> adversarial_generator_grad(const Tensor4<Scalar>& disc_fake,
                                           AdversarialMode mode = AdversarialMode::LogLoss) {
  Tensor4<Scalar> g = disc_fake.zeros_like();
  const Scalar n = static_cast<Scalar>(disc_fake.size());
  if (mode == AdversarialMode::LeastSquares) {
    g.array() = Scalar(2) * (disc_fake.array() - Scalar(1)) / n;
    return g;
  }
  const Scalar eps = Scalar(kLogClampEps);
  for (Eigen::Index i = 0; i < disc_fake.size(); ++i) {
    const Scalar p = disc_fake.array()[i];
    g.array()[i] = (p < eps || p > Scalar(1) - eps) ? Scalar(0) : Scalar(-1) / (p * n);
  }
  return g;
}

/// d(discriminator_loss)/d(disc_real) and /d(disc_fake).
template <typename Scalar>
std::pair<Tensor4<Scalar>, Tensor4<Scalar>> adversarial_discriminator_grads(
    const Tensor4<Scalar>& disc_real, const Tensor4<Scalar>& disc_fake,
    AdversarialMode mode = AdversarialMode::LogLoss) {
  Tensor4<Scalar> gr = disc_real.zeros_like();
  Tensor4<Scalar> gf = disc_fake.zeros_like();
  const Scalar nr = static_cast<Scalar>(disc_real.size());
  const Scalar nf = static_cast<Scalar>(disc_fake.size());
  if (mode == AdversarialMode::LeastSquares) {
    gr.array() = Scalar(2) * (disc_real.array() - Scalar(1)) / nr;
    gf.array() = Scalar(2) * disc_fake.array() / nf;
    return {gr, gf};
  }
  const Scalar eps = Scalar(kLogClampEps);
  for (Eigen::Index i = 0; i < disc_real.size(); ++i) {
    const Scalar p = disc_real.array()[i];
    gr.array()[i] = (p < eps || p > Scalar(1) - eps) ? Scalar(0) : Scalar(-1) / (p * nr);
  }
  for (Eigen::Index i = 0; i < disc_fake.size(); ++i) {
    const Scalar p = disc_fake.array()[i];
    gf.array()[i] = (p < eps || p > Scalar(1) - eps) ? Scalar(0) : Scalar(1) / ((Scalar(1) - p) * nf);
  }
  return {gr, gf};
}

/// Pixel-wise mean absolute difference, so loss weights stay
/// resolution-independent.
template <typename Scalar>
Scalar l1_mean(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b) {
  require_same_shape(a, b, "l1_mean");
  return (a.array() - b.array()).abs().sum() / static_cast<Scalar>(a.size());
}

/// d(l1_mean)/d(a); the gradient with respect to b is its negation.
template <typename Scalar>
Tensor4<Scalar> l1_mean_grad(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b) {
  require_same_shape(a, b, "l1_mean_grad");
  Tensor4<Scalar> g = a.zeros_like();
  g.array() = (a.array() - b.array()).sign() / static_cast<Scalar>(a.size());
  return g;
}

template <typename Scalar>
Scalar cycle_loss(const Tensor4<Scalar>& x_real, const Tensor4<Scalar>& x_reconstructed,
                  const Tensor4<Scalar>& y_real, const Tensor4<Scalar>& y_reconstructed) {
  return l1_mean(x_real, x_reconstructed) + l1_mean(y_real, y_reconstructed);
}

template <typename Scalar>
Scalar disparity_loss(const Tensor4<Scalar>& x_real, const Tensor4<Scalar>& y_translated,
                      const Tensor4<Scalar>& y_real, const Tensor4<Scalar>& x_translated) {
  return l1_mean(x_real, y_translated) + l1_mean(y_real, x_translated);
}

/// Combines components into the training objective. The total is composed as
/// adv_x + adv_y + lambda1*cycle + lambda2*disparity in exactly this order so
/// persisted breakdowns recompose bit-for-bit.
inline LossBreakdown combined_objective(double adv_x, double adv_y, double cycle,
                                        double disparity, const LossWeights& weights) {
  weights.validate();
  const auto check = [](double v, const char* name) {
    if (!std::isfinite(v))
      throw DivergenceError(std::string("combined_objective: non-finite component '") + name +
                            "'");
  };
  check(adv_x, "adv_x");
  check(adv_y, "adv_y");
  check(cycle, "cycle");
  check(disparity, "disparity");
  LossBreakdown b;
  b.adv_x = adv_x;
  b.adv_y = adv_y;
  b.cycle = cycle;
  b.disparity = disparity;
  b.total = adv_x + adv_y + weights.lambda1 * cycle + weights.lambda2 * disparity;
  return b;
}

inline double recompose_total(const LossBreakdown& b, const LossWeights& w) {
  return b.adv_x + b.adv_y + w.lambda1 * b.cycle + w.lambda2 * b.disparity;
}

}  // namespace cycletrans
