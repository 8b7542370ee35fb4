#include "grafair/loss.hpp"

#include "grafair/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace grafair {
namespace {

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw Error(ErrorCode::NonFiniteInput, std::string(what) + " has non-finite entries");
}

std::vector<Index> train_rows(const BinaryVector& labels, const BinaryVector& train_mask,
                              Index rows) {
  if (static_cast<Index>(labels.size()) != rows || static_cast<Index>(train_mask.size()) != rows) {
    throw Error(ErrorCode::ShapeMismatch, "labels and train mask must have one entry per row");
  }
  auto idx = mask_indices(train_mask);
  if (idx.empty()) throw Error(ErrorCode::EmptyTrainMask, "no training nodes");
  return idx;
}

double log_normal_pdf(double x, double mean, double sd) {
  const double u = (x - mean) / sd;
  return -0.5 * u * u - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double normal_kl_to_standard(double mean, double sd) {
  return 0.5 * (mean * mean + sd * sd - 1.0 - 2.0 * std::log(sd));
}

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::int64_t n = 0;

  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++n;
  }
  double mean() const { return sum / static_cast<double>(n); }
  double standard_error() const {
    const double m = mean();
    const double var = std::max(0.0, sum_sq / static_cast<double>(n) - m * m);
    return std::sqrt(var / static_cast<double>(n));
  }
};

}  // namespace

double gaussian_kl(const Matrix& mu, const Matrix& log_var) {
  if (mu.rows() != log_var.rows() || mu.cols() != log_var.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "mu and log_var differ in shape");
  }
  check_finite(mu, "mu");
  check_finite(log_var, "log_var");
  if (mu.rows() == 0) return 0.0;
  const auto terms = mu.array().square() + log_var.array().exp() - 1.0 - log_var.array();
  return 0.5 * terms.sum() / static_cast<double>(mu.rows());
}

double conditional_nll(const Matrix& prob, const BinaryVector& labels,
                       const BinaryVector& train_mask) {
  const auto idx = train_rows(labels, train_mask, prob.rows());
  double sum = 0.0;
  for (Index i : idx) {
    const double p = prob(i, labels[static_cast<std::size_t>(i)]);
    sum -= std::log(std::max(p, kProbabilityFloor));
  }
  return sum / static_cast<double>(idx.size());
}

void validate_beta(double beta) {
  if (!(beta >= 1.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::InvalidBeta, "beta must be finite and >= 1, got " + std::to_string(beta));
  }
}

LossBreakdown combine_loss(double kl, double nll, double beta, Variant variant) {
  validate_beta(beta);
  LossBreakdown out;
  out.kl_term = uses_kl(variant) ? kl : 0.0;
  out.nll_term = nll;
  out.beta = beta;
  out.total = out.kl_term + beta * out.nll_term;
  return out;
}

LossBreakdown cfb_loss(const EncodedPosterior& posterior, const Matrix& prob,
                       const BinaryVector& labels, const BinaryVector& train_mask, double beta,
                       Variant variant) {
  validate_beta(beta);
  const double kl = uses_kl(variant) ? gaussian_kl(posterior.mu, posterior.log_var) : 0.0;
  return combine_loss(kl, conditional_nll(prob, labels, train_mask), beta, variant);
}

ad::Value gaussian_kl_on_tape(const ad::Value& mu, const ad::Value& log_var) {
  ad::Value terms = ad::sub(ad::add(ad::square(mu), ad::exp(log_var)), log_var);
  terms = ad::add_scalar(terms, -1.0);
  return ad::scalar_mul(0.5 / static_cast<double>(mu.rows()), ad::sum_all(terms));
}

ad::Value conditional_nll_on_tape(ad::Tape& tape, const ad::Value& prob, const BinaryVector& labels,
                                  const BinaryVector& train_mask) {
  const auto idx = train_rows(labels, train_mask, prob.rows());
  Matrix pick = Matrix::Zero(static_cast<Index>(idx.size()), prob.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    pick(static_cast<Index>(r), labels[static_cast<std::size_t>(idx[r])]) = 1.0;
  }
  ad::Value logp = ad::log(ad::clamp_min(ad::row_gather(prob, idx), kProbabilityFloor));
  ad::Value picked = ad::sum_all(ad::elementwise_mul(logp, tape.constant(pick)));
  return ad::scalar_mul(-1.0 / static_cast<double>(idx.size()), picked);
}

LossValues cfb_loss_on_tape(ad::Tape& tape, const PosteriorValues& posterior, const ad::Value& prob,
                            const BinaryVector& labels, const BinaryVector& train_mask, double beta,
                            Variant variant) {
  validate_beta(beta);
  LossValues out;
  out.nll = conditional_nll_on_tape(tape, prob, labels, train_mask);
  out.total = ad::scalar_mul(beta, out.nll);
  double kl = 0.0;
  if (uses_kl(variant)) {
    out.kl = gaussian_kl_on_tape(posterior.mu, posterior.log_var);
    out.total = ad::add(out.kl, out.total);
    kl = out.kl.scalar();
  }
  out.breakdown = combine_loss(kl, out.nll.scalar(), beta, variant);
  out.breakdown.total = out.total.scalar();
  return out;
}

double empirical_label_entropy(const BinaryVector& labels, const BinaryVector& sensitive,
                               const BinaryVector& mask) {
  double counts[2][2] = {{0, 0}, {0, 0}};  // [s][y]
  std::int64_t total = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    counts[sensitive[i]][labels[i]] += 1.0;
    ++total;
  }
  if (total == 0) throw Error(ErrorCode::EmptyMask, "no nodes to estimate Q(Y|S) from");
  double h = 0.0;
  for (int s = 0; s < 2; ++s) {
    const double group = counts[s][0] + counts[s][1];
    for (int y = 0; y < 2; ++y) {
      if (counts[s][y] > 0) h -= counts[s][y] * std::log(counts[s][y] / group);
    }
  }
  return h / static_cast<double>(total);
}

double full_objective_value(const LossBreakdown& loss, double label_entropy) {
  return loss.kl_term + loss.beta * (loss.nll_term - label_entropy);
}

BoundToy BoundToy::separated() { return BoundToy{}; }

BoundToy BoundToy::degenerate() {
  BoundToy t;
  t.upper = {0.0, 0.0, 1.0, 1.0};
  t.lower.mean_y0 = 0.0;
  t.lower.mean_y1 = 0.0;
  t.lower.decoder_scale = 1.0;
  t.lower.decoder_offset = 0.0;
  return t;
}

BoundCheck verify_bounds_toy(std::uint64_t seed, std::int64_t samples, const BoundToy& toy) {
  if (samples < 100000) {
    throw Error(ErrorCode::InvalidParameter, "bound check needs at least 1e5 samples");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  BoundCheck out;

  // I(X;Z) <= E_x KL(P(Z|x) || Q(Z)).
  const auto& u = toy.upper;
  const double means[2] = {u.mean0, u.mean1};
  const double sds[2] = {u.sd0, u.sd1};
  Moments mi;
  for (std::int64_t k = 0; k < samples; ++k) {
    const int x = coin(rng) ? 1 : 0;
    const double z = means[x] + sds[x] * normal(rng);
    const double l0 = log_normal_pdf(z, means[0], sds[0]);
    const double l1 = log_normal_pdf(z, means[1], sds[1]);
    const double top = std::max(l0, l1);
    const double log_marginal = top + std::log(0.5 * std::exp(l0 - top) + 0.5 * std::exp(l1 - top));
    mi.add((x ? l1 : l0) - log_marginal);
  }
  out.mutual_information_xz = mi.mean();
  out.kl_bound = 0.5 * (normal_kl_to_standard(u.mean0, u.sd0) + normal_kl_to_standard(u.mean1, u.sd1));
  out.ub_gap = out.kl_bound - out.mutual_information_xz;
  out.ub_se = mi.standard_error();

  // I(Y;Z|S) >= E[log q(y|z,s) / P(y|s)], with P(y|s) known exactly.
  const auto& l = toy.lower;
  const double p_y[2] = {l.p_y0, l.p_y1};
  const double mean_y[2] = {l.mean_y0, l.mean_y1};
  Moments info;
  Moments bound;
  Moments gap;
  for (std::int64_t k = 0; k < samples; ++k) {
    const int s = coin(rng) ? 1 : 0;
    const int y = unit(rng) < p_y[s] ? 1 : 0;
    const double z = mean_y[y] + l.shift_s * s + l.sd * normal(rng);
    const double logit = log_normal_pdf(z, mean_y[1] + l.shift_s * s, l.sd) + std::log(p_y[s]) -
                         log_normal_pdf(z, mean_y[0] + l.shift_s * s, l.sd) -
                         std::log(1.0 - p_y[s]);
    const double q_logit = l.decoder_scale * logit + l.decoder_offset;
    const double sign = y ? 1.0 : -1.0;
    const double log_post = log_sigmoid(sign * logit);
    const double log_q = log_sigmoid(sign * q_logit);
    const double log_prior = std::log(y ? p_y[s] : 1.0 - p_y[s]);
    info.add(log_post - log_prior);
    bound.add(log_q - log_prior);
    gap.add(log_post - log_q);
  }
  out.mutual_information_yz_s = info.mean();
  out.decoder_bound = bound.mean();
  out.lb_gap = gap.mean();
  out.lb_se = gap.standard_error();
  return out;
}

}  // namespace grafair
