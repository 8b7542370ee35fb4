#pragma once

#include "grafair/autodiff.hpp"
#include "grafair/model.hpp"

#include <cstdint>

namespace grafair {

/// total = kl_term + beta * nll_term.
struct LossBreakdown {
  double kl_term = 0.0;
  double nll_term = 0.0;
  double beta = 1.0;
  double total = 0.0;
};

/// Probabilities are floored here before taking the log.
inline constexpr double kProbabilityFloor = 1e-12;

/// KL(N(mu, diag exp(log_var)) || N(0, I)) summed over dimensions and averaged
/// over rows (nodes).
double gaussian_kl(const Matrix& mu, const Matrix& log_var);

/// -mean over train nodes of ln prob[i][label_i].
double conditional_nll(const Matrix& prob, const BinaryVector& labels,
                       const BinaryVector& train_mask);

void validate_beta(double beta);

/// Combines the two terms, zeroing the KL for variants trained without it.
LossBreakdown combine_loss(double kl, double nll, double beta, Variant variant);

LossBreakdown cfb_loss(const EncodedPosterior& posterior, const Matrix& prob,
                       const BinaryVector& labels, const BinaryVector& train_mask, double beta,
                       Variant variant);

struct LossValues {
  ad::Value total;
  ad::Value kl;   // unset (no tape) for variants without the KL term
  ad::Value nll;
  LossBreakdown breakdown;
};

ad::Value gaussian_kl_on_tape(const ad::Value& mu, const ad::Value& log_var);
ad::Value conditional_nll_on_tape(ad::Tape& tape, const ad::Value& prob, const BinaryVector& labels,
                                  const BinaryVector& train_mask);
LossValues cfb_loss_on_tape(ad::Tape& tape, const PosteriorValues& posterior, const ad::Value& prob,
                            const BinaryVector& labels, const BinaryVector& train_mask, double beta,
                            Variant variant);

/// -mean over mask nodes of ln Q(y_i | s_i), with Q the empirical conditional
/// label frequency on the same nodes. Constant in the model parameters; adding
/// beta times it back recovers the unreduced objective.
double empirical_label_entropy(const BinaryVector& labels, const BinaryVector& sensitive,
                               const BinaryVector& mask);

/// KL - beta * E[log p(y|z,s) / Q(y|s)], i.e. the objective before the
/// Q(Y|S) term is dropped.
double full_objective_value(const LossBreakdown& loss, double label_entropy);

// Monte-Carlo checks of the two variational bounds on toy systems with known densities.

/// X uniform on {0,1}, Z | X=x ~ N(mean[x], sd[x]^2), prior Q(Z) = N(0,1).
struct UpperBoundToy {
  double mean0 = -1.0;
  double mean1 = 1.0;
  double sd0 = 1.0;
  double sd1 = 1.0;
};

/// S ~ Bernoulli(1/2), Y | S=s ~ Bernoulli(p_y[s]), Z | Y=y,S=s ~ N(mean_y[y] + shift_s * s, sd^2).
/// The variational decoder has logit = scale * true_logit + offset.
struct LowerBoundToy {
  double p_y0 = 0.3;
  double p_y1 = 0.7;
  double mean_y0 = -1.0;
  double mean_y1 = 1.0;
  double shift_s = 0.5;
  double sd = 1.0;
  double decoder_scale = 0.5;
  double decoder_offset = 0.4;
};

struct BoundToy {
  UpperBoundToy upper;
  LowerBoundToy lower;

  /// mu = -1/+1, sd = 1, and a miscalibrated decoder.
  static BoundToy separated();
  /// P(Z|X) = Q(Z) for both x, Z independent of Y, and an exact decoder.
  static BoundToy degenerate();
};

struct BoundCheck {
  double mutual_information_xz = 0.0;  // Monte-Carlo estimate
  double kl_bound = 0.0;               // closed form E_x KL(P(Z|x) || Q)
  double ub_gap = 0.0;                 // kl_bound - I(X;Z)
  double ub_se = 0.0;
  double mutual_information_yz_s = 0.0;
  double decoder_bound = 0.0;          // E[log q(y|z,s) / P(y|s)]
  double lb_gap = 0.0;                 // I(Y;Z|S) - decoder_bound
  double lb_se = 0.0;
};

/// Needs at least 1e5 samples.
BoundCheck verify_bounds_toy(std::uint64_t seed, std::int64_t samples,
                             const BoundToy& toy = BoundToy::separated());

}  // namespace grafair
